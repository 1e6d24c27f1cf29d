use super::arrivals::{self, Epoch};
use super::{
    replication_rng, run_replications, ArrivalProcess, EventKind, PathRecord, RepOutput, SimError,
    SimOptions, StorageSpec, StorageVariant, ARRIVAL_STREAM,
};

/// Threshold storage level `dt` after `level` with no jump: linear drain at
/// rate `cμ` down to `c`, exponential decay below it.
pub fn drain_threshold(level: f64, c: f64, mu: f64, dt: f64) -> f64 {
    if level > c {
        let to_c = (level - c) / (c * mu);
        if dt <= to_c {
            return level - c * mu * dt;
        }
        return c * (-mu * (dt - to_c)).exp();
    }
    level * (-mu * dt).exp()
}

/// Finite storage after a jump of size `mark`: only `min(mark, c − level)`
/// is admitted.
pub fn finite_admit(level: f64, c: f64, mark: f64) -> f64 {
    level + mark.min(c - level).max(0.0)
}

/// `∫₀ᵈ min(x e^{−μs}, cap) ds`.
fn int_min_exp(x: f64, mu: f64, d: f64, cap: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if x <= cap {
        return x * -(-mu * d).exp_m1() / mu;
    }
    let to_cap = (x / cap).ln() / mu;
    if d <= to_cap {
        cap * d
    } else {
        cap * to_cap + cap * -(-mu * (d - to_cap)).exp_m1() / mu
    }
}

/// `∫₀ᵈ min(x − r s, cap) ds` for `r ≥ 0`.
fn int_min_linear(x: f64, r: f64, d: f64, cap: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if x <= cap {
        return x * d - r * d * d / 2.0;
    }
    let to_cap = if r > 0.0 {
        (x - cap) / r
    } else {
        f64::INFINITY
    };
    if d <= to_cap {
        cap * d
    } else {
        let rest = d - to_cap;
        cap * d - r * rest * rest / 2.0
    }
}

/// Between-jump dynamics of the exponential-service variants.
#[derive(Debug, Clone, Copy)]
struct Markov {
    variant: StorageVariant,
    mu: f64,
}

impl Markov {
    fn evolve(&self, x: f64, dt: f64) -> f64 {
        match self.variant {
            StorageVariant::Threshold(c) => drain_threshold(x, c, self.mu, dt),
            _ => x * (-self.mu * dt).exp(),
        }
    }

    fn jump(&self, x: f64, mark: f64) -> f64 {
        match self.variant {
            StorageVariant::Finite(c) => finite_admit(x, c, mark),
            _ => x + mark,
        }
    }

    fn integral_min(&self, x: f64, dt: f64, cap: f64) -> f64 {
        match self.variant {
            StorageVariant::Threshold(c) if x > c => {
                let linear = dt.min((x - c) / (c * self.mu));
                int_min_linear(x, c * self.mu, linear, cap)
                    + int_min_exp(c, self.mu, dt - linear, cap)
            }
            _ => int_min_exp(x, self.mu, dt, cap),
        }
    }
}

fn markov(spec: &StorageSpec, mu: Option<f64>) -> Option<Markov> {
    let fresh = spec.initial_residual.is_none_or(|r| r == spec.service);
    match mu {
        Some(mu) if fresh => Some(Markov {
            variant: spec.variant,
            mu,
        }),
        _ => None,
    }
}

fn record(
    path: &mut Vec<PathRecord>,
    on: bool,
    rep: usize,
    time: f64,
    level: f64,
    kind: EventKind,
) {
    if on {
        path.push(PathRecord {
            replication: rep,
            time,
            level,
            kind,
        });
    }
}

pub(crate) fn run(
    spec: &StorageSpec,
    mu: Option<f64>,
    opts: &SimOptions,
    rep: usize,
    epochs: &[Epoch],
) -> RepOutput {
    let on = opts.record_paths;
    let mut path = Vec::new();
    record(
        &mut path,
        on,
        rep,
        0.0,
        spec.initial_level,
        EventKind::Start,
    );
    let terminal = match markov(spec, mu) {
        Some(m) => {
            let (mut t, mut x) = (0.0, spec.initial_level);
            for e in epochs {
                let before = m.evolve(x, e.time - t);
                let mark = spec.mark.quantile(e.u);
                x = m.jump(before, mark);
                t = e.time;
                let kind = if x < before + mark {
                    EventKind::Blocked
                } else {
                    EventKind::Arrival
                };
                record(&mut path, on, rep, t, x, kind);
            }
            m.evolve(x, opts.horizon - t)
        }
        None => {
            // Direct shot-noise sum, exact at every sample time.
            let residual = spec.initial_residual.unwrap_or(spec.service);
            let marks: Vec<f64> = epochs.iter().map(|e| spec.mark.quantile(e.u)).collect();
            let level_at = |t: f64, upto: usize| {
                spec.initial_level * residual.survival(t)
                    + epochs[..upto]
                        .iter()
                        .zip(&marks)
                        .map(|(e, m)| m * spec.service.survival(t - e.time))
                        .sum::<f64>()
            };
            if on {
                for (k, e) in epochs.iter().enumerate() {
                    record(
                        &mut path,
                        on,
                        rep,
                        e.time,
                        level_at(e.time, k + 1),
                        EventKind::Arrival,
                    );
                }
            }
            level_at(opts.horizon, epochs.len())
        }
    };
    record(&mut path, on, rep, opts.horizon, terminal, EventKind::End);
    RepOutput {
        terminal,
        busy_integral: None,
        path,
    }
}

fn require_markov(spec: &StorageSpec) -> Result<Markov, SimError> {
    let mu = spec.validate()?;
    markov(spec, mu).ok_or(SimError::Unsupported(
        "stationary storage estimates need exponential service and a fresh initial level",
    ))
}

/// Share of post-warm-up arrivals with `ψ(A⁻) + M > c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalExceedance {
    pub probability: f64,
    pub arrivals: u64,
}

/// By PASTA this estimates `P(ψ∞ + M > c)` for the stationary level.
pub fn storage_arrival_exceedance(
    spec: &StorageSpec,
    c: f64,
    opts: &SimOptions,
) -> Result<ArrivalExceedance, SimError> {
    let m = require_markov(spec)?;
    opts.validate()?;
    let lo = opts.warmup();
    let arrivals = ArrivalProcess::Poisson { rate: spec.lambda };
    let outs = run_replications(opts.reps, |rep| {
        let mut rng = replication_rng(opts.seed, rep, ARRIVAL_STREAM);
        let epochs = arrivals::epochs(&arrivals, opts.horizon, &mut rng);
        let (mut t, mut x) = (0.0, spec.initial_level);
        let (mut seen, mut hits) = (0u64, 0u64);
        for e in &epochs {
            let before = m.evolve(x, e.time - t);
            let mark = spec.mark.quantile(e.u);
            if e.time >= lo {
                seen += 1;
                hits += u64::from(before + mark > c);
            }
            x = m.jump(before, mark);
            t = e.time;
        }
        (hits, seen)
    });
    let hits: u64 = outs.iter().map(|o| o.0).sum();
    let seen: u64 = outs.iter().map(|o| o.1).sum();
    if seen == 0 {
        return Err(SimError::EmptySample);
    }
    Ok(ArrivalExceedance {
        probability: hits as f64 / seen as f64,
        arrivals: seen,
    })
}

/// Post-warm-up time-average of `min(ψ_t, cap)`, averaged over replications.
pub fn storage_time_average_min(
    spec: &StorageSpec,
    cap: f64,
    opts: &SimOptions,
) -> Result<f64, SimError> {
    let m = require_markov(spec)?;
    opts.validate()?;
    let (lo, hi) = (opts.warmup(), opts.horizon);
    let arrivals = ArrivalProcess::Poisson { rate: spec.lambda };
    let outs = run_replications(opts.reps, |rep| {
        let mut rng = replication_rng(opts.seed, rep, ARRIVAL_STREAM);
        let epochs = arrivals::epochs(&arrivals, hi, &mut rng);
        let (mut t, mut x) = (0.0, spec.initial_level);
        let mut area = 0.0;
        let mut segment = |x: f64, from: f64, to: f64| {
            if to <= lo {
                return;
            }
            // Skip the warm-up part of the segment before integrating.
            let start = from.max(lo);
            let x0 = m.evolve(x, start - from);
            area += m.integral_min(x0, to - start, cap);
        };
        for e in &epochs {
            segment(x, t, e.time);
            x = m.jump(m.evolve(x, e.time - t), spec.mark.quantile(e.u));
            t = e.time;
        }
        segment(x, t, hi);
        area / (hi - lo)
    });
    Ok(super::pairwise_sum(&outs) / outs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::simulate_storage;
    use super::*;
    use crate::marks::{MarkDistribution, ServiceDistribution};
    use proptest::prelude::*;

    fn exp_service(mu: f64) -> ServiceDistribution {
        ServiceDistribution::exponential(mu).unwrap()
    }

    #[test]
    fn threshold_reaches_c_after_linear_drain() {
        // Level 3, c = 2, μ = 2: hits c at (3 − 2)/(2·2) = 0.25.
        assert!((drain_threshold(3.0, 2.0, 2.0, 0.25) - 2.0).abs() < 1e-15);
        assert!((drain_threshold(3.0, 2.0, 2.0, 0.125) - 2.5).abs() < 1e-15);
        let later = drain_threshold(3.0, 2.0, 2.0, 0.75);
        assert!((later - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn finite_admits_only_the_free_room() {
        assert!((finite_admit(1.7, 2.0, 0.5) - 2.0).abs() < 1e-15);
        assert_eq!(finite_admit(0.5, 2.0, 0.5), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn threshold_right_derivative(x in 0.05f64..6.0, c in 0.5f64..3.0, mu in 0.2f64..4.0) {
            let h = 1e-7;
            let fd = (drain_threshold(x, c, mu, h) - x) / h;
            let exact = -mu * x.min(c);
            prop_assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "{fd} vs {exact}");
        }

        #[test]
        fn threshold_path_is_continuous_and_semigroup(
            x in 0.0f64..6.0, c in 0.5f64..3.0, mu in 0.2f64..4.0, a in 0.0f64..2.0, b in 0.0f64..2.0,
        ) {
            let two_step = drain_threshold(drain_threshold(x, c, mu, a), c, mu, b);
            let one_step = drain_threshold(x, c, mu, a + b);
            prop_assert!((two_step - one_step).abs() < 1e-12 * (1.0 + x));
            if x > c {
                let hit = (x - c) / (c * mu);
                let l = drain_threshold(x, c, mu, hit * (1.0 - 1e-12));
                let r = drain_threshold(x, c, mu, hit * (1.0 + 1e-12));
                prop_assert!((l - r).abs() < 1e-9);
            }
        }

        #[test]
        fn clipped_integrals_match_quadrature(
            x in 0.0f64..5.0, cap in 0.3f64..3.0, c in 0.5f64..3.0, mu in 0.3f64..3.0, d in 0.0f64..3.0,
        ) {
            let m = Markov { variant: StorageVariant::Threshold(c), mu };
            let n = 4000;
            let h = d / n as f64;
            let mid: f64 = (0..n)
                .map(|i| m.evolve(x, (i as f64 + 0.5) * h).min(cap) * h)
                .sum();
            prop_assert!((m.integral_min(x, d, cap) - mid).abs() < 1e-5 * (1.0 + d * cap));
        }
    }

    #[test]
    fn shot_noise_deterministic_marks_mean() {
        // E[ψ_t] = λ E[M] (1 − e^{−μt}) / μ.
        let spec = StorageSpec::new(
            1.0,
            MarkDistribution::deterministic(1.0).unwrap(),
            exp_service(1.0),
            StorageVariant::ShotNoise,
        );
        let r = simulate_storage(&spec, &SimOptions::new(10.0, 20_000, 4)).unwrap();
        let expect = 1.0 - (-10.0f64).exp();
        assert!((r.mean - expect).abs() < 4.0 * (r.variance / 20_000.0).sqrt());
        // Variance λE[M²](1 − e^{−2μt})/(2μ).
        assert!((r.variance - 0.5).abs() < 0.03, "{}", r.variance);
    }

    #[test]
    fn general_shot_noise_uses_the_service_tail() {
        // Deterministic duration 1: ψ_t counts marks in (t − 1, t].
        let spec = StorageSpec::new(
            2.0,
            MarkDistribution::deterministic(0.5).unwrap(),
            ServiceDistribution::deterministic(1.0).unwrap(),
            StorageVariant::ShotNoise,
        )
        .with_initial_level(3.0);
        let opts = SimOptions::new(5.0, 4000, 12).with_paths();
        let r = simulate_storage(&spec, &opts).unwrap();
        // Poisson(2) count times 0.5; the initial level has expired.
        assert!((r.mean - 1.0).abs() < 0.05);
        assert!((r.variance - 0.5).abs() < 0.05);
        assert!(r.terminal.iter().all(|x| (2.0 * x).fract().abs() < 1e-9));
        let first = r
            .paths
            .iter()
            .find(|p| p.kind == EventKind::Arrival)
            .unwrap();
        let expect = if first.time < 1.0 { 3.5 } else { 0.5 };
        assert!((first.level - expect).abs() < 1e-12);
    }

    #[test]
    fn bounded_variants_need_exponential_service() {
        let mut spec = StorageSpec::new(
            1.0,
            MarkDistribution::exponential(1.0).unwrap(),
            ServiceDistribution::deterministic(1.0).unwrap(),
            StorageVariant::Threshold(2.0),
        );
        let opts = SimOptions::new(1.0, 1, 1);
        assert!(matches!(
            simulate_storage(&spec, &opts),
            Err(SimError::Unsupported(_))
        ));
        spec.service = exp_service(1.0);
        spec.variant = StorageVariant::Finite(1.0);
        spec.initial_level = 1.5;
        assert!(matches!(
            simulate_storage(&spec, &opts),
            Err(SimError::InvalidParameter {
                name: "initial_level",
                ..
            })
        ));
        spec.variant = StorageVariant::Threshold(-1.0);
        assert!(simulate_storage(&spec, &opts).is_err());
    }

    #[test]
    fn finite_storage_stays_below_capacity() {
        let spec = StorageSpec::new(
            3.0,
            MarkDistribution::exponential(1.0).unwrap(),
            exp_service(2.0),
            StorageVariant::Finite(2.0),
        );
        let r = simulate_storage(&spec, &SimOptions::new(10.0, 200, 3).with_paths()).unwrap();
        assert!(r.paths.iter().all(|p| p.level <= 2.0 + 1e-12));
        assert!(r.paths.iter().any(|p| p.kind == EventKind::Blocked));
    }

    #[test]
    fn threshold_storage_outflow_balances_inflow() {
        // Outflow rate μ·min(ψ, c) balances λE[M], so E[min(ψ, c)] = λE[M]/μ.
        let spec = StorageSpec::new(
            3.0,
            MarkDistribution::exponential(1.0).unwrap(),
            exp_service(2.0),
            StorageVariant::Threshold(2.0),
        );
        let avg = storage_time_average_min(&spec, 2.0, &SimOptions::new(4000.0, 4, 6)).unwrap();
        assert!((avg - 1.5).abs() < 0.02, "{avg}");
        // Shot noise: E[ψ] = λE[M]/μ without a cap.
        let mut sn = spec.clone();
        sn.variant = StorageVariant::ShotNoise;
        let avg =
            storage_time_average_min(&sn, f64::INFINITY, &SimOptions::new(4000.0, 4, 6)).unwrap();
        assert!((avg - 1.5).abs() < 0.02, "{avg}");
    }

    #[test]
    fn arrival_exceedance_of_shot_noise_matches_gamma_law() {
        // Exp(1) marks, λ/μ = 1.5: ψ∞ ~ Gamma(1.5, 1) and ψ∞ + M ~ Gamma(2.5, 1).
        let spec = StorageSpec::new(
            3.0,
            MarkDistribution::exponential(1.0).unwrap(),
            exp_service(2.0),
            StorageVariant::ShotNoise,
        );
        let est = storage_arrival_exceedance(&spec, 2.0, &SimOptions::new(20_000.0, 2, 9)).unwrap();
        let exact = 1.0 - statrs::function::gamma::gamma_lr(2.5, 2.0);
        assert!(est.arrivals > 90_000);
        assert!(
            (est.probability - exact).abs() < 0.006,
            "{} vs {exact}",
            est.probability
        );
    }
}
