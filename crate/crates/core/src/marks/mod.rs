//! Batch-size, limiting-mark and service-duration laws.
//!
//! Every analytic formula consumes marks through the negative-argument
//! transforms `E[e^{-sM}]` and `E[M e^{-sM}]`. Closed forms are used where
//! they exist; log-normal transforms fall back to quadrature over the
//! underlying standard normal.

mod batch;
mod mark;
mod service;

use thiserror::Error;

pub use batch::BatchDistribution;
pub(crate) use mark::TRANSFORM_REL_TOL;
pub use mark::{
    lognormal_laplace, LaplaceMethod, LaplaceValue, LogNormalParams, MarkDistribution,
    CLOSED_APPROX_ERROR_PER_SCALE_SQ,
};
pub use service::ServiceDistribution;

use crate::numerics::QuadError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("batch index n must be at least 1")]
    InvalidIndex,
    #[error("transform argument must be non-negative, got {s}")]
    NegativeArgument { s: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Negative-argument transform of `dist` at `s`.
pub fn mgf_neg(dist: &MarkDistribution, s: f64) -> Result<f64, MarkError> {
    dist.mgf_neg(s)
}

/// `E[M e^{-sM}]` for `dist`.
pub fn mgf_neg_deriv(dist: &MarkDistribution, s: f64) -> Result<f64, MarkError> {
    dist.mgf_neg_deriv(s)
}

/// Weak limit of `B(n)/n`.
pub fn batch_to_mark(batch: &BatchDistribution) -> MarkDistribution {
    batch.batch_to_mark()
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn any_mark() -> impl Strategy<Value = MarkDistribution> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|v| MarkDistribution::deterministic(v).unwrap()),
            (0.1f64..5.0).prop_map(|r| MarkDistribution::exponential(r).unwrap()),
            (0.2f64..4.0, 0.2f64..4.0).prop_map(|(k, r)| MarkDistribution::gamma(k, r).unwrap()),
            (0.2f64..3.0, 0.05f64..2.0)
                .prop_map(|(m, v)| MarkDistribution::lognormal(m, v).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transform_strictly_decreasing(mark in any_mark(), s1 in 0.0f64..5.0, gap in 0.01f64..5.0) {
            let s2 = s1 + gap;
            let (a, b) = (mark.mgf_neg(s1).unwrap(), mark.mgf_neg(s2).unwrap());
            prop_assert!(b < a);
            prop_assert!(b > 0.0 && a <= 1.0);
        }

        #[test]
        fn derivative_bounded_by_mean(mark in any_mark(), s in 0.0f64..5.0) {
            let d = mark.mgf_neg_deriv(s).unwrap();
            prop_assert!(d > 0.0);
            prop_assert!(d <= mark.mean() * (1.0 + 1e-12));
        }

        #[test]
        fn complement_consistent(mark in any_mark(), s in 0.0f64..5.0) {
            let a = mark.mgf_neg(s).unwrap();
            let b = mark.one_minus_mgf_neg(s).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn exponential_matches_gamma_shape_one(rate in 0.1f64..5.0, s in 0.0f64..10.0) {
            let e = MarkDistribution::exponential(rate).unwrap().mgf_neg(s).unwrap();
            let g = MarkDistribution::gamma(1.0, rate).unwrap().mgf_neg(s).unwrap();
            prop_assert!(((e - g) / e).abs() < 1e-9);
        }
    }

    #[test]
    fn transform_is_one_at_zero() {
        for mark in [
            MarkDistribution::deterministic(1.0).unwrap(),
            MarkDistribution::exponential(2.0).unwrap(),
            MarkDistribution::gamma(1.5, 1.0).unwrap(),
            MarkDistribution::lognormal(1.0, 0.5).unwrap(),
        ] {
            assert_eq!(mgf_neg(&mark, 0.0).unwrap(), 1.0);
            assert!((mgf_neg_deriv(&mark, 0.0).unwrap() - mark.mean()).abs() < 1e-12);
        }
    }
}
