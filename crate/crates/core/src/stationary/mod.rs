//! Steady-state analytics in the Markovian setting: Poisson batch epochs,
//! exponential service at rate `μ`, limiting marks `M`.
//!
//! With `φ(s) = E[e^{-sψ∞}] = e^{-λI(s)}` the shot-noise transform, the
//! Legendre estimators give, for `s_k = k/c`,
//!
//! * `σ1 = Σ a_k φ(s_k)` ≈ `P(ψ∞ ≤ c)`
//! * `σ2 = Σ a_k g_k φ(s_k)` ≈ `E[ψ∞; ψ∞ ≤ c]`, with `g_k = cλ(1 − E[e^{-s_k M}])/(μk)`
//! * `σ3 = Σ a_k E[e^{-s_k M}] φ(s_k)` ≈ `P(ψ∞ + M ≤ c)`
//! * `σ4 = Σ a_k (E[M e^{-s_k M}] + E[e^{-s_k M}] g_k) φ(s_k)` ≈ `E[ψ∞ + M; ψ∞ + M ≤ c]`
//!
//! and the conditional means `C1 = σ2/σ1`, `C2 = σ4/σ3`. Because
//! `E[min(ψ∞^C, c)] = λE[M]/μ` and the threshold process shares the
//! shot-noise shape below `c`,
//!
//! * `P(ψ∞^C > c) = (λE[M]/μ − C1) / (c − C1)`
//! * `P(ψ∞^C + M > c) = (λE[M]/μ − C2)/(c − C2) + C1(cμ/λ − E[M]) / ((c − C1)(c − C2))`
//! * `P(ψ∞^B + M > c) = ((λ+μ)/λ · C1 − C2) / (c − C2)`

mod closed_form;
mod recurrence;
mod transforms;

use thiserror::Error;

pub use closed_form::{
    blocking_closed_form_density, blocking_closed_form_exceedance, gamma_stationary_cdf,
    gamma_stationary_density, threshold_closed_form_density, threshold_closed_form_exceedance,
    threshold_closed_form_exceedance_p1, threshold_integral_residual,
};
pub use recurrence::{
    finite_n_steady_state, finite_n_steady_state_with_cap, RecurrenceConfig,
    SteadyStateDistribution, DEFAULT_STATE_CAP,
};
use transforms::DdMark;
pub use transforms::{shot_noise_integral, shot_noise_integral_by_substitution};

use crate::legendre::{
    coefficients_ref, stabilize, transform_sum_dd, EstimateKind, LegendreConfig, LegendreError,
    LegendreEstimate, LegendreSum,
};
use crate::marks::{MarkDistribution, MarkError};
use crate::numerics::{Dd, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("unstable system: load λE[M]/μ = {load} is not below c = {c}")]
    Unstable { load: f64, c: f64 },
    #[error("recurrence reached the cap of {states} states before the tail bound was met")]
    TruncationCap { states: usize },
    #[error(transparent)]
    Mark(#[from] MarkError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Legendre(#[from] LegendreError),
}

/// Double-double unit roundoff.
const DD_EPS: f64 = 4.93e-32;

/// Per-`k` transform values at `s_k = k/c`, each with an absolute error.
#[derive(Debug, Clone, Copy)]
struct TransformRow {
    phi: (Dd, f64),
    mark: (Dd, f64),
    mark_deriv: (Dd, f64),
    g: (Dd, f64),
}

/// `(λ, μ, M, c)` with `λE[M] < cμ`.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    lambda: f64,
    mu: f64,
    mark: MarkDistribution,
    c: f64,
    legendre: LegendreConfig,
    table: Vec<TransformRow>,
}

/// Which σ ratio to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ratio {
    C1,
    C2,
}

impl MarkovSystem {
    pub fn new(
        lambda: f64,
        mu: f64,
        mark: MarkDistribution,
        c: f64,
    ) -> Result<Self, StationaryError> {
        Self::with_config(lambda, mu, mark, c, LegendreConfig::default())
    }

    pub fn with_config(
        lambda: f64,
        mu: f64,
        mark: MarkDistribution,
        c: f64,
        legendre: LegendreConfig,
    ) -> Result<Self, StationaryError> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(StationaryError::InvalidParameter { name, value: v });
            }
        }
        let load = lambda * mark.mean() / mu;
        if load >= c {
            return Err(StationaryError::Unstable { load, c });
        }
        if legendre.min_order == 0 || legendre.max_order < legendre.min_order {
            return Err(LegendreError::InvalidOrder.into());
        }
        let mut sys = Self {
            lambda,
            mu,
            mark,
            c,
            legendre,
            table: Vec::new(),
        };
        let dd_mark = DdMark::new(&sys.mark);
        sys.table = (1..=sys.legendre.max_order)
            .map(|k| sys.row(k, dd_mark.as_ref()))
            .collect::<Result<_, _>>()?;
        Ok(sys)
    }

    fn row(&self, k: usize, dd_mark: Option<&DdMark>) -> Result<TransformRow, StationaryError> {
        let s = Dd::new(k as f64).div_f64(self.c);
        // cλ/(μk) = λ/(μ s).
        let scale = Dd::new(self.lambda).div(s.mul_f64(self.mu));
        let (exponent, mark, mark_deriv, one_minus) =
            match dd_mark.map(|m| m.transforms(self.mu, s)) {
                Some(t) => (t.exponent, t.mgf, t.mgf_deriv, t.one_minus_mgf),
                None => {
                    let sf = s.to_f64();
                    let (i, i_err) = shot_noise_integral(&self.mark, self.mu, sf)?;
                    let (m, m_err) = self.mark.mgf_neg_with_error(sf)?;
                    let (d, d_err) = self.mark.mgf_neg_deriv_with_error(sf)?;
                    let om = self.mark.one_minus_mgf_neg(sf)?;
                    let ulp = f64::EPSILON;
                    (
                        (Dd::new(i), i_err + i * ulp),
                        (Dd::new(m), m_err + m * ulp),
                        (Dd::new(d), d_err + d * ulp),
                        (Dd::new(om), m_err + om * 2.0 * ulp),
                    )
                }
            };
        let expo = exponent.0.mul_f64(self.lambda);
        let phi = Dd::exp_neg_dd(expo);
        let phi_f = phi.to_f64();
        let phi_err = phi_f * (self.lambda * exponent.1 + expo.to_f64() * 64.0 * DD_EPS);
        let g = scale * one_minus.0;
        let g_err = scale.to_f64() * one_minus.1 + g.to_f64().abs() * 8.0 * DD_EPS;
        Ok(TransformRow {
            phi: (phi, phi_err),
            mark,
            mark_deriv,
            g: (g, g_err),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn mark(&self) -> &MarkDistribution {
        &self.mark
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn legendre_config(&self) -> &LegendreConfig {
        &self.legendre
    }

    /// `λE[M]/μ`, the mean of `min(ψ∞^C, c)`.
    pub fn load(&self) -> f64 {
        self.lambda * self.mark.mean() / self.mu
    }

    /// `E[e^{-sψ∞}] = e^{-λI(s)}`.
    pub fn shot_noise_mgf_neg(&self, s: f64) -> Result<f64, StationaryError> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(MarkError::NegativeArgument { s }.into());
        }
        let (i, _) = shot_noise_integral(&self.mark, self.mu, s)?;
        Ok((-self.lambda * i).exp())
    }

    fn check_order(&self, m: usize) -> Result<(), StationaryError> {
        if m == 0 || m > self.legendre.max_order {
            return Err(LegendreError::InvalidOrder.into());
        }
        Ok(())
    }

    /// `(σ1, σ2, σ3, σ4)` at order `m`.
    pub fn sigmas(&self, m: usize) -> Result<[LegendreSum; 4], StationaryError> {
        self.check_order(m)?;
        let coeffs = coefficients_ref(m);
        let rows = &self.table;
        let pick = |f: &dyn Fn(&TransformRow) -> (Dd, f64)| {
            transform_sum_dd(&coeffs, self.c, |k, _| {
                Ok::<_, std::convert::Infallible>(f(&rows[k - 1]))
            })
        };
        let s1 = pick(&|r| r.phi)?;
        let s2 = pick(&|r| prod(r.g, r.phi))?;
        let s3 = pick(&|r| prod(r.mark, r.phi))?;
        let s4 = pick(&|r| {
            let inner = prod(r.mark, r.g);
            prod((r.mark_deriv.0 + inner.0, r.mark_deriv.1 + inner.1), r.phi)
        })?;
        Ok([s1, s2, s3, s4])
    }

    fn ratio_at(&self, m: usize, which: Ratio) -> Result<LegendreSum, StationaryError> {
        let [s1, s2, s3, s4] = self.sigmas(m)?;
        let (num, den) = match which {
            Ratio::C1 => (s2, s1),
            Ratio::C2 => (s4, s3),
        };
        let value = num.value / den.value;
        let noise = corners(&[num, den], |v| v[0] / v[1], value);
        Ok(LegendreSum {
            order: m,
            value,
            noise,
        })
    }

    /// `σ^{(C1)} = σ2/σ1` at order `m`, approximating `E[ψ∞ | ψ∞ ≤ c]`.
    pub fn sigma_c1(&self, m: usize) -> Result<LegendreSum, StationaryError> {
        self.ratio_at(m, Ratio::C1)
    }

    /// `σ^{(C2)} = σ4/σ3` at order `m`, approximating `E[ψ∞ + M | ψ∞ + M ≤ c]`.
    pub fn sigma_c2(&self, m: usize) -> Result<LegendreSum, StationaryError> {
        self.ratio_at(m, Ratio::C2)
    }

    pub fn sigma_c1_stabilized(&self) -> Result<LegendreEstimate, StationaryError> {
        self.stabilized(EstimateKind::NonnegMean, |m| self.sigma_c1(m))
    }

    pub fn sigma_c2_stabilized(&self) -> Result<LegendreEstimate, StationaryError> {
        self.stabilized(EstimateKind::NonnegMean, |m| self.sigma_c2(m))
    }

    fn stabilized<F>(&self, kind: EstimateKind, f: F) -> Result<LegendreEstimate, StationaryError>
    where
        F: Fn(usize) -> Result<LegendreSum, StationaryError>,
    {
        let cands = self
            .legendre
            .orders()
            .map(f)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(stabilize(&cands, kind, &self.legendre)?)
    }

    /// Every jump alone lifts the level past `c`. Then `P(M + ψ∞ > x) = 1` on
    /// `[0, c]`, the truncated-mean bound is exact and both jump criteria are one.
    fn jump_clears_threshold(
        &self,
        m: usize,
        value: impl FnOnce() -> f64,
    ) -> Result<Option<LegendreSum>, StationaryError> {
        if self.mark.essential_min() < self.c {
            return Ok(None);
        }
        self.check_order(m)?;
        Ok(Some(LegendreSum {
            order: m,
            value: value(),
            noise: 0.0,
        }))
    }

    /// `P(ψ∞^C > c)` at order `m`.
    pub fn exceedance_p0_at_order(&self, m: usize) -> Result<LegendreSum, StationaryError> {
        if let Some(exact) = self.jump_clears_threshold(m, || self.exceedance_upper_bound())? {
            return Ok(exact);
        }
        let [s1, s2, _, _] = self.sigmas(m)?;
        let (rho, c) = (self.load(), self.c);
        let f = |v: &[f64]| {
            let c1 = v[1] / v[0];
            (rho - c1) / (c - c1)
        };
        let value = f(&[s1.value, s2.value]);
        Ok(LegendreSum {
            order: m,
            value,
            noise: corners(&[s1, s2], f, value),
        })
    }

    /// `P(ψ∞^C + M > c)` at order `m`.
    pub fn exceedance_p1_at_order(&self, m: usize) -> Result<LegendreSum, StationaryError> {
        if let Some(exact) = self.jump_clears_threshold(m, || 1.0)? {
            return Ok(exact);
        }
        let sig = self.sigmas(m)?;
        let (rho, c, mean) = (self.load(), self.c, self.mark.mean());
        let back = c * self.mu / self.lambda - mean;
        let f = |v: &[f64]| {
            let c1 = v[1] / v[0];
            let c2 = v[3] / v[2];
            (rho - c2) / (c - c2) + c1 * back / ((c - c1) * (c - c2))
        };
        let value = f(&sig.map(|s| s.value));
        Ok(LegendreSum {
            order: m,
            value,
            noise: corners(&sig, f, value),
        })
    }

    /// `P(ψ∞^B + M > c)` at order `m`.
    pub fn blocking_exceedance_at_order(&self, m: usize) -> Result<LegendreSum, StationaryError> {
        if let Some(exact) = self.jump_clears_threshold(m, || 1.0)? {
            return Ok(exact);
        }
        let sig = self.sigmas(m)?;
        let c = self.c;
        let w = (self.lambda + self.mu) / self.lambda;
        let f = |v: &[f64]| {
            let c1 = v[1] / v[0];
            let c2 = v[3] / v[2];
            (w * c1 - c2) / (c - c2)
        };
        let value = f(&sig.map(|s| s.value));
        Ok(LegendreSum {
            order: m,
            value,
            noise: corners(&sig, f, value),
        })
    }

    /// Stabilized `P(ψ∞^C > c)`.
    pub fn exceedance_p0(&self) -> Result<LegendreEstimate, StationaryError> {
        self.stabilized(EstimateKind::Probability, |m| {
            self.exceedance_p0_at_order(m)
        })
    }

    /// Stabilized `P(ψ∞^C + M > c)`.
    pub fn exceedance_p1(&self) -> Result<LegendreEstimate, StationaryError> {
        self.stabilized(EstimateKind::Probability, |m| {
            self.exceedance_p1_at_order(m)
        })
    }

    /// Stabilized `P(ψ∞^B + M > c)`.
    pub fn blocking_exceedance(&self) -> Result<LegendreEstimate, StationaryError> {
        self.stabilized(EstimateKind::Probability, |m| {
            self.blocking_exceedance_at_order(m)
        })
    }

    /// Closed-form bound on `P(ψ∞^C > c)` from `E[ψ∞ | ψ∞ ≤ c] ≥ λ/(λ+μ) E[M ∧ c]`.
    pub fn exceedance_upper_bound(&self) -> f64 {
        let low = self.lambda / (self.lambda + self.mu) * self.mark.mean_min(self.c);
        (self.load() - low) / (self.c - low)
    }

    /// Long-run busy fraction `λE[M]/(cμ)`.
    pub fn utilization(&self) -> f64 {
        self.load() / self.c
    }
}

fn prod(a: (Dd, f64), b: (Dd, f64)) -> (Dd, f64) {
    let (x, y) = (a.0.to_f64().abs(), b.0.to_f64().abs());
    (a.0 * b.0, x * b.1 + y * a.1 + x * y * 4.0 * DD_EPS)
}

/// Largest deviation of `f` over the `2^d` corners of the noise box.
fn corners<F: Fn(&[f64]) -> f64>(sums: &[LegendreSum], f: F, centre: f64) -> f64 {
    let d = sums.len();
    let mut worst: f64 = 0.0;
    let mut v = vec![0.0; d];
    for mask in 0..(1u32 << d) {
        for (j, s) in sums.iter().enumerate() {
            v[j] = if mask & (1 << j) == 0 {
                s.value - s.noise
            } else {
                s.value + s.noise
            };
        }
        let y = f(&v);
        worst = worst.max(if y.is_finite() {
            (y - centre).abs()
        } else {
            f64::INFINITY
        });
    }
    worst
}
