use rand::Rng;

use super::{check_param, SimError};
use crate::marks::ServiceDistribution;

/// Rule applied, with probability `ρ`, to each duration after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependenceMode {
    CopyFirst,
    CopyPrevious,
    AveragePrevious,
}

impl DependenceMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::CopyFirst => "copy_first",
            Self::CopyPrevious => "copy_previous",
            Self::AveragePrevious => "average_previous",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "copy_first" => Some(Self::CopyFirst),
            "copy_previous" => Some(Self::CopyPrevious),
            "average_previous" => Some(Self::AveragePrevious),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dependence {
    pub mode: DependenceMode,
    pub rho: f64,
}

impl Dependence {
    pub fn new(mode: DependenceMode, rho: f64) -> Result<Self, SimError> {
        let d = Self { mode, rho };
        d.validate()?;
        Ok(d)
    }

    /// `ρ = 0`: i.i.d. durations.
    pub fn independent() -> Self {
        Self {
            mode: DependenceMode::CopyFirst,
            rho: 0.0,
        }
    }

    pub fn is_independent(&self) -> bool {
        self.rho == 0.0
    }

    pub(crate) fn validate(&self) -> Result<(), SimError> {
        check_param("rho", self.rho, (0.0..=1.0).contains(&self.rho))
    }
}

/// Durations of one batch of `size` jobs. The first is always a fresh draw.
pub fn sample_dependent_services<R: Rng + ?Sized>(
    mode: DependenceMode,
    rho: f64,
    size: usize,
    service: &ServiceDistribution,
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    check_param("rho", rho, (0.0..=1.0).contains(&rho))?;
    if size == 0 {
        return Err(SimError::InvalidParameter {
            name: "batch size",
            value: 0.0,
        });
    }
    let mut out = Vec::with_capacity(size);
    fill_services(mode, rho, size, service, rng, &mut out);
    Ok(out)
}

/// Appends `size` durations to `out`; assumes validated inputs.
pub(crate) fn fill_services<R: Rng + ?Sized>(
    mode: DependenceMode,
    rho: f64,
    size: usize,
    service: &ServiceDistribution,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let base = out.len();
    let mut sum = 0.0;
    for j in 0..size {
        let d = if j > 0 && rho > 0.0 && rng.random::<f64>() < rho {
            match mode {
                DependenceMode::CopyFirst => out[base],
                DependenceMode::CopyPrevious => out[base + j - 1],
                DependenceMode::AveragePrevious => sum / j as f64,
            }
        } else {
            service.sample(rng)
        };
        sum += d;
        out.push(d);
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn exp1() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    const MODES: [DependenceMode; 3] = [
        DependenceMode::CopyFirst,
        DependenceMode::CopyPrevious,
        DependenceMode::AveragePrevious,
    ];

    #[test]
    fn zero_rho_gives_distinct_draws() {
        for mode in MODES {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let d = sample_dependent_services(mode, 0.0, 200, &exp1(), &mut rng).unwrap();
            let mut sorted = d.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            assert_eq!(sorted.len(), 200);
            let mean = d.iter().sum::<f64>() / 200.0;
            assert!((mean - 1.0).abs() < 0.25);
        }
    }

    #[test]
    fn full_dependence_repeats_the_first_draw() {
        for mode in MODES {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let d = sample_dependent_services(mode, 1.0, 50, &exp1(), &mut rng).unwrap();
            // Averages of identical values can differ from them by rounding.
            assert!(
                d.iter().all(|&x| (x - d[0]).abs() <= 1e-15 * d[0]),
                "{mode:?}"
            );
        }
    }

    #[test]
    fn partial_copy_previous_keeps_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d =
            sample_dependent_services(DependenceMode::CopyPrevious, 0.7, 10_000, &exp1(), &mut rng)
                .unwrap();
        let repeats = d.windows(2).filter(|w| w[0] == w[1]).count() as f64 / 9_999.0;
        assert!((repeats - 0.7).abs() < 0.02, "{repeats}");
    }

    #[test]
    fn invalid_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(
            sample_dependent_services(DependenceMode::CopyFirst, 1.5, 3, &exp1(), &mut rng)
                .is_err()
        );
        assert!(
            sample_dependent_services(DependenceMode::CopyFirst, 0.5, 0, &exp1(), &mut rng)
                .is_err()
        );
        assert!(Dependence::new(DependenceMode::AveragePrevious, -0.1).is_err());
        for mode in MODES {
            assert_eq!(DependenceMode::parse(mode.name()), Some(mode));
        }
    }
}
