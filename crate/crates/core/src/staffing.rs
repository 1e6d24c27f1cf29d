//! Minimal operator-to-batch-size ratio `c` meeting an exceedance target.
//!
//! The solver brackets upward from just above the load `ρ = λE[M]/μ` and
//! bisects to `|Δc| ≤ 1e-3`. Exceedance is assumed decreasing in `c`; each
//! evaluation is logged and an increase beyond the estimate's own spread is
//! reported rather than bisected through.

use thiserror::Error;

use crate::legendre::LegendreConfig;
use crate::marks::{MarkDistribution, MarkError, ServiceDistribution};
use crate::numerics::normal_quantile;
use crate::stationary::{MarkovSystem, StationaryError};

/// Solver tolerance on `c`.
pub const RATIO_TOL: f64 = 1e-3;
/// Relative offset of the first bracket point above the load.
const START_OFFSET: f64 = 0.05;
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaffingError {
    #[error("target epsilon must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no ratio up to c = {c_max} meets epsilon = {epsilon}")]
    Infeasible { epsilon: f64, c_max: f64 },
    #[error("exceedance increased from {lower} at c = {c_lower} to {upper} at c = {c_upper}")]
    NonMonotone {
        c_lower: f64,
        lower: f64,
        c_upper: f64,
        upper: f64,
        log: Vec<Evaluation>,
    },
    #[error("evaluation failed at c = {c}: {source}")]
    Evaluation {
        c: f64,
        #[source]
        source: StationaryError,
    },
    #[error(transparent)]
    Mark(#[from] MarkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// `P(ψ∞^C > c)`.
    P0,
    /// `P(ψ∞^C + M > c)`.
    P1,
    /// `P(ψ∞^B + M > c)`.
    Blocking,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::P0 => "p0",
            Criterion::P1 => "p1",
            Criterion::Blocking => "blocking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "p0" => Some(Criterion::P0),
            "p1" => Some(Criterion::P1),
            "blocking" => Some(Criterion::Blocking),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub c: f64,
    pub exceedance: f64,
    /// Spread of the retained Legendre candidates.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaffingResult {
    pub c: f64,
    pub criterion: Criterion,
    pub achieved: f64,
    pub epsilon: f64,
    pub log: Vec<Evaluation>,
}

impl StaffingResult {
    pub fn staff_count(&self, n: u64) -> u64 {
        staff_count(self.c, n)
    }
}

/// Evaluate the criterion at ratio `c`.
pub fn exceedance(
    lambda: f64,
    mu: f64,
    mark: &MarkDistribution,
    c: f64,
    criterion: Criterion,
    cfg: &LegendreConfig,
) -> Result<Evaluation, StationaryError> {
    let sys = MarkovSystem::with_config(lambda, mu, *mark, c, cfg.clone())?;
    let est = match criterion {
        Criterion::P0 => sys.exceedance_p0()?,
        Criterion::P1 => sys.exceedance_p1()?,
        Criterion::Blocking => sys.blocking_exceedance()?,
    };
    Ok(Evaluation {
        c,
        exceedance: est.value,
        spread: est.spread,
    })
}

pub fn solve_ratio(
    lambda: f64,
    mu: f64,
    mark: &MarkDistribution,
    epsilon: f64,
    criterion: Criterion,
) -> Result<StaffingResult, StaffingError> {
    solve_ratio_with(
        lambda,
        mu,
        mark,
        epsilon,
        criterion,
        &LegendreConfig::default(),
    )
}

pub fn solve_ratio_with(
    lambda: f64,
    mu: f64,
    mark: &MarkDistribution,
    epsilon: f64,
    criterion: Criterion,
    cfg: &LegendreConfig,
) -> Result<StaffingResult, StaffingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(StaffingError::InvalidTarget(epsilon));
    }
    for (name, value) in [("lambda", lambda), ("mu", mu)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(StaffingError::InvalidParameter { name, value });
        }
    }
    let rho = lambda * mark.mean() / mu;
    let mut res = bracket_and_bisect(rho, epsilon, |c| {
        exceedance(lambda, mu, mark, c, criterion, cfg)
            .map_err(|source| StaffingError::Evaluation { c, source })
    })?;
    res.criterion = criterion;
    Ok(res)
}

/// Smallest `c > rho` (to [`RATIO_TOL`]) with `eval(c) ≤ epsilon`, for an
/// `eval` assumed non-increasing.
fn bracket_and_bisect<F>(
    rho: f64,
    epsilon: f64,
    mut eval_raw: F,
) -> Result<StaffingResult, StaffingError>
where
    F: FnMut(f64) -> Result<Evaluation, StaffingError>,
{
    let mut log: Vec<Evaluation> = Vec::new();
    let mut eval = |c: f64, log: &mut Vec<Evaluation>| -> Result<Evaluation, StaffingError> {
        let e = eval_raw(c)?;
        let prev = log
            .iter()
            .filter(|p| p.c < c)
            .max_by(|a, b| a.c.total_cmp(&b.c))
            .copied();
        if let Some(prev) = prev {
            let slack = prev.spread.max(e.spread) + 1e-9;
            if e.exceedance > prev.exceedance + slack {
                log.push(e);
                return Err(StaffingError::NonMonotone {
                    c_lower: prev.c,
                    lower: prev.exceedance,
                    c_upper: c,
                    upper: e.exceedance,
                    log: log.clone(),
                });
            }
        }
        log.push(e);
        Ok(e)
    };

    // lo fails the target (or is the stability floor); hi meets it.
    let mut lo = rho;
    let mut gap = rho.max(1e-6) * START_OFFSET;
    let mut hi = rho + gap;
    let mut hi_eval = eval(hi, &mut log)?;
    let mut doublings = 0;
    while hi_eval.exceedance > epsilon {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(StaffingError::Infeasible { epsilon, c_max: hi });
        }
        lo = hi;
        gap *= 2.0;
        hi = rho + gap;
        hi_eval = eval(hi, &mut log)?;
    }
    while hi - lo > RATIO_TOL {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid, &mut log)?;
        if e.exceedance <= epsilon {
            hi = mid;
            hi_eval = e;
        } else {
            lo = mid;
        }
    }
    Ok(StaffingResult {
        c: hi,
        criterion: Criterion::P0,
        achieved: hi_eval.exceedance,
        epsilon,
        log,
    })
}

/// `⌈cn⌉`, ignoring floating-point fuzz just above an integer.
pub fn staff_count(c: f64, n: u64) -> u64 {
    let v = c * n as f64;
    (v - 1e-9 * v.max(1.0)).ceil().max(0.0) as u64
}

/// `ρ_ψ + z_ε σ_ψ` with `ρ_ψ = λE[M]∫Ḡ` and `σ_ψ² = λE[M²]∫Ḡ²`.
pub fn normal_approx_ratio(
    lambda: f64,
    service: &ServiceDistribution,
    mark: &MarkDistribution,
    epsilon: f64,
) -> Result<f64, StaffingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(StaffingError::InvalidTarget(epsilon));
    }
    let z = normal_quantile(1.0 - epsilon);
    let rho = lambda * mark.mean() * service.mean();
    let var = lambda * mark.second_moment() * service.integrated_survival_sq()?;
    Ok(rho + z * var.sqrt())
}

/// Square-root staffing for the `M^{Det(n)}/M/∞` queue:
/// `nλ/μ + z_ε √(n(n+1)λ/(2μ))`.
pub fn mmn_infinite_normal_staff(
    lambda: f64,
    mu: f64,
    n: u64,
    epsilon: f64,
) -> Result<f64, StaffingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(StaffingError::InvalidTarget(epsilon));
    }
    let z = normal_quantile(1.0 - epsilon);
    let nf = n as f64;
    Ok(nf * lambda / mu + z * (nf * (nf + 1.0) * lambda / (2.0 * mu)).sqrt())
}
