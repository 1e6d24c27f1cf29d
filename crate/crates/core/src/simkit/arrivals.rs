use rand::Rng;
use rand_distr::Exp1;

use super::ArrivalProcess;

/// Arrival epoch in `(0, horizon]` with the uniform that drives its size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Epoch {
    pub time: f64,
    pub u: f64,
}

/// Epochs up to `horizon`, each followed in the stream by its size uniform.
pub(crate) fn epochs<R: Rng + ?Sized>(
    process: &ArrivalProcess,
    horizon: f64,
    rng: &mut R,
) -> Vec<Epoch> {
    let mut out = Vec::new();
    let mut t = 0.0;
    match process {
        ArrivalProcess::Poisson { rate } => {
            if *rate <= 0.0 {
                return out;
            }
            loop {
                let gap: f64 = rng.sample(Exp1);
                t += gap / rate;
                if t > horizon {
                    break;
                }
                out.push(Epoch {
                    time: t,
                    u: rng.random(),
                });
            }
        }
        ArrivalProcess::Nonhomogeneous { rate, bound } => {
            if *bound <= 0.0 {
                return out;
            }
            loop {
                let gap: f64 = rng.sample(Exp1);
                t += gap / bound;
                if t > horizon {
                    break;
                }
                let accept: f64 = rng.random();
                if accept * bound <= rate(t).clamp(0.0, *bound) {
                    out.push(Epoch {
                        time: t,
                        u: rng.random(),
                    });
                }
            }
        }
        ArrivalProcess::Renewal { interarrival } => loop {
            t += interarrival.sample(rng);
            if t > horizon {
                break;
            }
            out.push(Epoch {
                time: t,
                u: rng.random(),
            });
        },
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::marks::ServiceDistribution;

    #[test]
    fn poisson_count_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = epochs(&ArrivalProcess::Poisson { rate: 4.0 }, 10_000.0, &mut rng);
        let rate = e.len() as f64 / 10_000.0;
        assert!((rate - 4.0).abs() < 0.1, "{rate}");
        assert!(e.windows(2).all(|w| w[0].time < w[1].time));
        assert!(e.last().unwrap().time <= 10_000.0);
    }

    #[test]
    fn thinning_follows_the_rate_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Rate 1 on even unit intervals, 3 on odd ones.
        let rate = Arc::new(|t: f64| {
            if (t.floor() as i64) % 2 == 0 {
                1.0
            } else {
                3.0
            }
        });
        let p = ArrivalProcess::Nonhomogeneous { rate, bound: 3.0 };
        let e = epochs(&p, 20_000.0, &mut rng);
        let (even, odd): (Vec<&Epoch>, Vec<&Epoch>) =
            e.iter().partition(|x| (x.time.floor() as i64) % 2 == 0);
        assert!((even.len() as f64 / 10_000.0 - 1.0).abs() < 0.05);
        assert!((odd.len() as f64 / 10_000.0 - 3.0).abs() < 0.1);
    }

    #[test]
    fn deterministic_renewal_is_a_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ArrivalProcess::Renewal {
            interarrival: ServiceDistribution::deterministic(0.5).unwrap(),
        };
        let e = epochs(&p, 3.2, &mut rng);
        let times: Vec<f64> = e.iter().map(|x| x.time).collect();
        assert_eq!(times, vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    }
}
