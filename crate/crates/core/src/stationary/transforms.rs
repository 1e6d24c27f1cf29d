//! The shot-noise exponent `I(s) = ∫₀^∞ (1 − E[e^{-sMe^{-μx}}]) dx`.
//!
//! After `u = e^{-μx}` this is `(1/μ) ∫₀¹ (1 − E[e^{-sMu}]) / u du`, and
//! swapping the order of integration gives `E[Ein(sM)] / μ`.

use super::StationaryError;
use crate::marks::{LaplaceMethod, MarkDistribution, TRANSFORM_REL_TOL};
use crate::numerics::special::ein_dd_given_exp;
use crate::numerics::{ein, ein_dd, integrate, Dd, QuadConfig, EULER_GAMMA_DD};

/// Double-double unit roundoff.
const DD_EPS: f64 = 4.93e-32;

fn transform_cfg() -> QuadConfig {
    QuadConfig {
        rel_tol: TRANSFORM_REL_TOL,
        abs_tol: 1e-300,
        ..QuadConfig::default()
    }
}

/// `I(s)` and an absolute error estimate.
///
/// Exponential marks use `ln(1 + s/α)/μ`, deterministic marks `Ein(s m̄)/μ`,
/// quadrature-mode log-normal marks `E[Ein(sM)]/μ` over the normal variable;
/// everything else integrates the substituted form.
pub fn shot_noise_integral(
    mark: &MarkDistribution,
    mu: f64,
    s: f64,
) -> Result<(f64, f64), StationaryError> {
    if s == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (v, err) = match *mark {
        MarkDistribution::Exponential { rate } => {
            let v = (s / rate).ln_1p();
            (v, v * f64::EPSILON)
        }
        MarkDistribution::Deterministic { value } => {
            let v = ein(s * value);
            (v, v * 4.0 * f64::EPSILON)
        }
        MarkDistribution::LogNormal {
            params,
            method: LaplaceMethod::Quadrature,
        } => params.expect(|x| ein(s * x))?,
        _ => return shot_noise_integral_by_substitution(mark, mu, s),
    };
    Ok((v / mu, err / mu))
}

/// `I(s)` by quadrature of `(1/μ) ∫₀¹ (1 − E[e^{-sMu}]) / u du` for any mark.
pub fn shot_noise_integral_by_substitution(
    mark: &MarkDistribution,
    mu: f64,
    s: f64,
) -> Result<(f64, f64), StationaryError> {
    if s == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut failure = None;
    let q = integrate(
        |u| match mark.one_minus_mgf_neg(s * u) {
            Ok(v) => v / u,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        &transform_cfg(),
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((q.value / mu, q.error / mu))
}

/// `I(s)`, `E[e^{-sM}]`, `E[M e^{-sM}]` and `1 − E[e^{-sM}]` in double-double,
/// each with an absolute error bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DdTransforms {
    pub exponent: (Dd, f64),
    pub mgf: (Dd, f64),
    pub mgf_deriv: (Dd, f64),
    pub one_minus_mgf: (Dd, f64),
}

fn bound(v: Dd, ulps: f64) -> (Dd, f64) {
    (v, v.to_f64().abs() * ulps * DD_EPS)
}

/// Marks whose transforms are evaluated in double-double, with any
/// `s`-independent work done once.
#[derive(Debug, Clone)]
pub(crate) enum DdMark {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    LogNormal(LogNormalNodes),
}

impl DdMark {
    /// Exponential, deterministic and quadrature-mode log-normal marks;
    /// `None` otherwise.
    pub fn new(mark: &MarkDistribution) -> Option<Self> {
        match *mark {
            MarkDistribution::Exponential { rate } => Some(Self::Exponential { rate }),
            MarkDistribution::Deterministic { value } => Some(Self::Deterministic { value }),
            MarkDistribution::LogNormal {
                params,
                method: LaplaceMethod::Quadrature,
            } => Some(Self::LogNormal(LogNormalNodes::new(
                params.location(),
                params.scale(),
            ))),
            _ => None,
        }
    }

    pub fn transforms(&self, mu: f64, s: Dd) -> DdTransforms {
        match self {
            Self::Exponential { rate } => {
                let u = s.div_f64(*rate);
                let x = Dd::ONE + u;
                let mgf = Dd::ONE.div(x);
                DdTransforms {
                    exponent: bound(Dd::ln_ge_one(x).div_f64(mu), 32.0),
                    mgf: bound(mgf, 8.0),
                    mgf_deriv: bound((mgf * mgf).div_f64(*rate), 16.0),
                    one_minus_mgf: bound(u.div(x), 8.0),
                }
            }
            Self::Deterministic { value } => {
                let z = s.mul_f64(*value);
                // The series route cancels up to a factor e^z.
                let ein_ulps = 64.0 * z.hi.min(2.0).exp();
                let mgf = Dd::exp_neg_dd(z);
                let squarings = (z.hi.log2().ceil() + 4.0).max(1.0);
                let exp_ulps = 16.0 * squarings.exp2();
                DdTransforms {
                    exponent: bound(ein_dd(z).div_f64(mu), ein_ulps),
                    mgf: bound(mgf, exp_ulps),
                    mgf_deriv: bound(mgf.mul_f64(*value), exp_ulps + 2.0),
                    one_minus_mgf: (Dd::ONE - mgf, mgf.to_f64() * exp_ulps * DD_EPS + DD_EPS),
                }
            }
            Self::LogNormal(nodes) => nodes.transforms(mu, s),
        }
    }
}

#[cfg(test)]
pub(crate) fn dd_transforms(mark: &MarkDistribution, mu: f64, s: Dd) -> Option<DdTransforms> {
    DdMark::new(mark).map(|m| m.transforms(mu, s))
}

/// Beyond this `sM`, `e^{-sM}` and `E1(sM)` are below 1e-34.
const NEGLIGIBLE_EXPONENT: f64 = 80.0;

/// Trapezoid rule over the standard-normal variable `z ∈ [−13, 13]`. The
/// integrands `f(e^{m + σz})` are bounded by 1 in the strip `|Im z| < π/(4σ)`,
/// so step `h` aliases at `exp(−π²/(2σh))`; `h = 1/(16σ)` puts that near
/// `e^{-79}`, rounded down to a power of two so the nodes and `z²/2` are exact.
/// The truncated Gaussian mass is below `e^{-84}`.
#[derive(Debug, Clone)]
pub(crate) struct LogNormalNodes {
    /// `(weight, x)` pairs.
    nodes: Vec<(Dd, Dd)>,
    w_sum: Dd,
}

impl LogNormalNodes {
    fn new(location: f64, scale: f64) -> Self {
        let steps = ((16.0 * scale).ceil().clamp(4.0, 4096.0) as u32).next_power_of_two();
        Self::with_steps(location, scale, steps as i32)
    }

    fn with_steps(location: f64, scale: f64, steps_per_unit: i32) -> Self {
        const HALF_WIDTH: i32 = 13;
        let nodes: Vec<(Dd, Dd)> = (-HALF_WIDTH * steps_per_unit..=HALF_WIDTH * steps_per_unit)
            .map(|j| {
                let z = f64::from(j) / f64::from(steps_per_unit);
                let w = Dd::exp_neg(0.5 * z * z);
                let t = Dd::new(scale).mul_f64(z) + Dd::new(location);
                let x = if t.hi >= 0.0 {
                    Dd::ONE.div(Dd::exp_neg_dd(t))
                } else {
                    Dd::exp_neg_dd(-t)
                };
                (w, x)
            })
            .collect();
        let w_sum = nodes.iter().fold(Dd::ZERO, |acc, &(w, _)| acc + w);
        Self { nodes, w_sum }
    }

    fn transforms(&self, mu: f64, s: Dd) -> DdTransforms {
        let (mut ein_sum, mut mgf, mut deriv, mut one_minus) =
            (Dd::ZERO, Dd::ZERO, Dd::ZERO, Dd::ZERO);
        for &(w, x) in &self.nodes {
            let sx = s * x;
            if sx.hi > NEGLIGIBLE_EXPONENT {
                ein_sum = ein_sum + w * (EULER_GAMMA_DD + Dd::ln_ge_one(sx));
                one_minus = one_minus + w;
                continue;
            }
            let e = Dd::exp_neg_dd(sx);
            ein_sum = ein_sum + w * ein_dd_given_exp(sx, e);
            mgf = mgf + w * e;
            deriv = deriv + w * x * e;
            one_minus = one_minus + w * (Dd::ONE - e);
        }
        let w_sum = self.w_sum;
        DdTransforms {
            exponent: bound(ein_sum.div(w_sum).div_f64(mu), 1024.0),
            mgf: bound(mgf.div(w_sum), 1024.0),
            mgf_deriv: bound(deriv.div(w_sum), 1024.0),
            one_minus_mgf: (one_minus.div(w_sum), 1024.0 * DD_EPS),
        }
    }
}
