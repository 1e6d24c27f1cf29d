use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use super::MarkError;
use crate::numerics::{self, integrate, QuadConfig};

/// Tolerance used for transform quadratures. Tighter than the library-wide
/// default because Legendre sums amplify transform error by up to `Σ|a_k|`.
pub(crate) const TRANSFORM_REL_TOL: f64 = 1e-13;

/// Standard-normal window for log-normal expectations; mass outside is below 1e-32.
const Z_SPAN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplaceMethod {
    #[default]
    Quadrature,
    ClosedApprox,
}

/// Log-normal law described by the mean and variance of the variable itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalParams {
    pub mean: f64,
    pub variance: f64,
}

impl LogNormalParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self, MarkError> {
        positive("mean", mean)?;
        positive("variance", variance)?;
        Ok(Self { mean, variance })
    }

    /// `σ² = ln(1 + var / mean²)` of the underlying normal.
    pub fn scale_sq(&self) -> f64 {
        (self.variance / (self.mean * self.mean)).ln_1p()
    }

    pub fn scale(&self) -> f64 {
        self.scale_sq().sqrt()
    }

    /// `μ = ln(mean) − σ²/2` of the underlying normal.
    pub fn location(&self) -> f64 {
        self.mean.ln() - 0.5 * self.scale_sq()
    }

    /// `E[f(X)]` by quadrature over the standard-normal variable.
    pub(crate) fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<(f64, f64), MarkError> {
        let (loc, sc) = (self.location(), self.scale());
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let cfg = QuadConfig {
            rel_tol: TRANSFORM_REL_TOL,
            abs_tol: 1e-300,
            ..QuadConfig::default()
        };
        let q = integrate(
            |z| {
                let w = (-0.5 * z * z).exp() * norm;
                if w == 0.0 {
                    0.0
                } else {
                    w * f((loc + sc * z).exp())
                }
            },
            -Z_SPAN,
            Z_SPAN,
            &cfg,
        )?;
        Ok((q.value, q.error))
    }
}

/// A Laplace-transform value together with its reported relative error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceValue {
    pub value: f64,
    pub rel_error: f64,
}

/// Worst relative error of the closed approximation per unit of `σ²`,
/// measured over `s ∈ [1e-3, 1e4]` and `σ² ≤ 3`.
pub const CLOSED_APPROX_ERROR_PER_SCALE_SQ: f64 = 0.014;

/// `E[e^{-sX}]` for a log-normal `X`.
///
/// `ClosedApprox` is the Lambert-W saddlepoint form
/// `exp(-(W² + 2W) / (2σ²)) / √(1 + W)` with `W = W₀(s σ² e^μ)`; its reported
/// error is `0.014 σ²`. `Quadrature` reports the integration error estimate.
pub fn lognormal_laplace(
    params: LogNormalParams,
    s: f64,
    method: LaplaceMethod,
) -> Result<LaplaceValue, MarkError> {
    nonneg_arg(s)?;
    if s == 0.0 {
        return Ok(LaplaceValue {
            value: 1.0,
            rel_error: 0.0,
        });
    }
    match method {
        LaplaceMethod::Quadrature => {
            let (value, err) = params.expect(|x| (-s * x).exp())?;
            Ok(LaplaceValue {
                value,
                rel_error: err / value,
            })
        }
        LaplaceMethod::ClosedApprox => {
            let s2 = params.scale_sq();
            let w = numerics::lambert_w0(s * s2 * params.location().exp());
            let value = (-(w * w + 2.0 * w) / (2.0 * s2)).exp() / (1.0 + w).sqrt();
            Ok(LaplaceValue {
                value,
                rel_error: CLOSED_APPROX_ERROR_PER_SCALE_SQ * s2,
            })
        }
    }
}

/// Limiting jump-size law `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkDistribution {
    Deterministic {
        value: f64,
    },
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    LogNormal {
        params: LogNormalParams,
        method: LaplaceMethod,
    },
}

impl MarkDistribution {
    pub fn deterministic(value: f64) -> Result<Self, MarkError> {
        positive("value", value)?;
        Ok(Self::Deterministic { value })
    }

    pub fn exponential(rate: f64) -> Result<Self, MarkError> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self, MarkError> {
        positive("shape", shape)?;
        positive("rate", rate)?;
        Ok(Self::Gamma { shape, rate })
    }

    pub fn lognormal(mean: f64, variance: f64) -> Result<Self, MarkError> {
        Ok(Self::LogNormal {
            params: LogNormalParams::new(mean, variance)?,
            method: LaplaceMethod::Quadrature,
        })
    }

    pub fn with_laplace_method(self, method: LaplaceMethod) -> Self {
        match self {
            Self::LogNormal { params, .. } => Self::LogNormal { params, method },
            other => other,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::LogNormal { params, .. } => params.mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value * value,
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
            Self::LogNormal { params, .. } => params.variance + params.mean * params.mean,
        }
    }

    /// `E[e^{-sM}]`.
    pub fn mgf_neg(&self, s: f64) -> Result<f64, MarkError> {
        Ok(self.mgf_neg_with_error(s)?.0)
    }

    /// `E[e^{-sM}]` with an absolute error estimate.
    pub fn mgf_neg_with_error(&self, s: f64) -> Result<(f64, f64), MarkError> {
        nonneg_arg(s)?;
        let v = match *self {
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Exponential { rate } => rate / (rate + s),
            Self::Gamma { shape, rate } => (-shape * (s / rate).ln_1p()).exp(),
            Self::LogNormal { params, method } => {
                let r = lognormal_laplace(params, s, method)?;
                return Ok((r.value, r.value * r.rel_error));
            }
        };
        Ok((v, 0.0))
    }

    /// `1 − E[e^{-sM}]` without cancellation for small `s`.
    pub fn one_minus_mgf_neg(&self, s: f64) -> Result<f64, MarkError> {
        nonneg_arg(s)?;
        Ok(match *self {
            Self::Deterministic { value } => -(-s * value).exp_m1(),
            Self::Exponential { rate } => s / (rate + s),
            Self::Gamma { shape, rate } => -(-shape * (s / rate).ln_1p()).exp_m1(),
            Self::LogNormal {
                params,
                method: LaplaceMethod::Quadrature,
            } => params.expect(|x| -(-s * x).exp_m1())?.0,
            Self::LogNormal { .. } => 1.0 - self.mgf_neg(s)?,
        })
    }

    /// `E[M e^{-sM}]`.
    pub fn mgf_neg_deriv(&self, s: f64) -> Result<f64, MarkError> {
        Ok(self.mgf_neg_deriv_with_error(s)?.0)
    }

    pub fn mgf_neg_deriv_with_error(&self, s: f64) -> Result<(f64, f64), MarkError> {
        nonneg_arg(s)?;
        let v = match *self {
            Self::Deterministic { value } => value * (-s * value).exp(),
            Self::Exponential { rate } => rate / ((rate + s) * (rate + s)),
            Self::Gamma { shape, rate } => shape / (rate + s) * (-shape * (s / rate).ln_1p()).exp(),
            Self::LogNormal { params, .. } => {
                if s == 0.0 {
                    params.mean
                } else {
                    return params.expect(|x| x * (-s * x).exp());
                }
            }
        };
        Ok((v, 0.0))
    }

    /// Largest `m` with `P(M ≥ m) = 1`.
    pub fn essential_min(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            _ => 0.0,
        }
    }

    /// `E[min(M, c)]`.
    pub fn mean_min(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Deterministic { value } => value.min(c),
            Self::Exponential { rate } => -(-rate * c).exp_m1() / rate,
            Self::Gamma { shape, rate } => {
                shape / rate * numerics::gamma_p(shape + 1.0, rate * c)
                    + c * numerics::gamma_q(shape, rate * c)
            }
            Self::LogNormal { params, .. } => {
                let (loc, sc) = (params.location(), params.scale());
                let d = (c.ln() - loc) / sc;
                params.mean * numerics::normal_cdf(d - sc) + c * numerics::normal_cdf(-d)
            }
        }
    }

    /// `P(M > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Deterministic { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Gamma { shape, rate } => numerics::gamma_q(shape, rate * x),
            Self::LogNormal { params, .. } => {
                if x == 0.0 {
                    1.0
                } else {
                    numerics::normal_cdf(-(x.ln() - params.location()) / params.scale())
                }
            }
        }
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Gamma { shape, rate } => GammaDist::new(shape, rate)
                .expect("validated on construction")
                .inverse_cdf(u),
            Self::LogNormal { params, .. } => {
                if u <= 0.0 {
                    0.0
                } else {
                    (params.location() + params.scale() * numerics::normal_quantile(u)).exp()
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    pub fn is_exponential(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(rate),
            _ => None,
        }
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<(), MarkError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(MarkError::InvalidParameter { name, value })
    }
}

fn nonneg_arg(s: f64) -> Result<(), MarkError> {
    if s.is_finite() && s >= 0.0 {
        Ok(())
    } else {
        Err(MarkError::NegativeArgument { s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_density_quad<F: Fn(f64) -> f64>(shape: f64, rate: f64, f: F) -> f64 {
        let norm = shape * rate.ln() - numerics::ln_gamma(shape);
        numerics::integrate_to_infinity(
            |x| {
                if x == 0.0 {
                    return 0.0;
                }
                f(x) * (norm + (shape - 1.0) * x.ln() - rate * x).exp()
            },
            0.0,
            &QuadConfig::default(),
        )
        .unwrap()
        .value
    }

    #[test]
    fn trivial_transform_values() {
        let det = MarkDistribution::deterministic(1.0).unwrap();
        assert_eq!(det.mgf_neg(0.0).unwrap(), 1.0);
        let exp = MarkDistribution::exponential(1.0).unwrap();
        assert_eq!(exp.mgf_neg(1.0).unwrap(), 0.5);
        assert_eq!(exp.mgf_neg_deriv(1.0).unwrap(), 0.25);
        let det2 = MarkDistribution::deterministic(2.0).unwrap();
        assert_eq!(det2.mgf_neg_deriv(0.0).unwrap(), 2.0);
    }

    #[test]
    fn gamma_derivative_matches_quadrature_and_analytic() {
        let g = MarkDistribution::gamma(2.0, 1.0).unwrap();
        let quad = gamma_density_quad(2.0, 1.0, |x| x * (-x).exp());
        // d/ds of -(1+s)^{-2} at s = 1 gives 2 (1+s)^{-3} = 1/4.
        assert!((g.mgf_neg_deriv(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((quad - 0.25).abs() < 1e-10);
    }

    #[test]
    fn exponential_closed_form_matches_quadrature() {
        let e = MarkDistribution::exponential(1.7).unwrap();
        for &s in &[0.1, 1.0, 5.0] {
            let q = gamma_density_quad(1.0, 1.7, |x| (-s * x).exp());
            let v = e.mgf_neg(s).unwrap();
            assert!(((v - q) / q).abs() < 1e-9);
        }
    }

    #[test]
    fn lognormal_parameter_conversion() {
        let p = LogNormalParams::new(1.0, 0.5).unwrap();
        assert!((p.scale_sq() - 1.5_f64.ln()).abs() < 1e-15);
        let (m, _) = p.expect(|x| x).unwrap();
        let (m2, _) = p.expect(|x| x * x).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert!((m2 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn lognormal_reference_transform() {
        let p = LogNormalParams::new(1.0, 0.5).unwrap();
        let q = lognormal_laplace(p, 1.0, LaplaceMethod::Quadrature).unwrap();
        // 25-digit reference quadrature: 0.4350720813974375.
        assert!((q.value - 0.435_072_081_397_437_5).abs() < 1e-12);
        let a = lognormal_laplace(p, 1.0, LaplaceMethod::ClosedApprox).unwrap();
        let rel = ((a.value - q.value) / q.value).abs();
        assert!(rel < 0.01);
        assert!(rel <= a.rel_error);
        let zero = lognormal_laplace(p, 0.0, LaplaceMethod::ClosedApprox).unwrap();
        assert_eq!(zero.value, 1.0);
    }

    #[test]
    fn mean_min_against_quadrature() {
        let c = 0.8;
        let g = MarkDistribution::gamma(1.5, 2.0).unwrap();
        let q = gamma_density_quad(1.5, 2.0, |x| x.min(c));
        assert!((g.mean_min(c) - q).abs() < 1e-9);
        let ln = MarkDistribution::lognormal(1.0, 0.5).unwrap();
        if let MarkDistribution::LogNormal { params, .. } = ln {
            let (q, _) = params.expect(|x| x.min(c)).unwrap();
            assert!((ln.mean_min(c) - q).abs() < 1e-9);
        }
        let e = MarkDistribution::exponential(1.0).unwrap();
        assert!((e.mean_min(2.0) - (1.0 - (-2.0_f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_tail() {
        let laws = [
            MarkDistribution::exponential(1.3).unwrap(),
            MarkDistribution::gamma(1.5, 1.0).unwrap(),
            MarkDistribution::lognormal(1.0, 0.5).unwrap(),
        ];
        for law in laws {
            for &u in &[0.05, 0.5, 0.95] {
                let x = law.quantile(u);
                assert!((1.0 - law.tail(x) - u).abs() < 1e-9, "{law:?} u={u}");
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MarkDistribution::exponential(0.0).is_err());
        assert!(MarkDistribution::gamma(1.0, -1.0).is_err());
        assert!(MarkDistribution::lognormal(f64::NAN, 1.0).is_err());
        let e = MarkDistribution::exponential(1.0).unwrap();
        assert!(e.mgf_neg(-1.0).is_err());
    }
}
