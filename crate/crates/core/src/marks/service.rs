use rand::Rng;

use super::mark::{positive, LogNormalParams};
use super::MarkError;
use crate::numerics::{self, integrate_to_infinity, QuadConfig};

/// Service-duration law with CDF `G` and tail `Ḡ = 1 − G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { duration: f64 },
    LogNormal { params: LogNormalParams },
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self, MarkError> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn deterministic(duration: f64) -> Result<Self, MarkError> {
        positive("duration", duration)?;
        Ok(Self::Deterministic { duration })
    }

    pub fn lognormal(mean: f64, variance: f64) -> Result<Self, MarkError> {
        Ok(Self::LogNormal {
            params: LogNormalParams::new(mean, variance)?,
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { duration } => duration,
            Self::LogNormal { params } => params.mean,
        }
    }

    pub fn exponential_rate(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// `Ḡ(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Deterministic { duration } => {
                if x < duration {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LogNormal { params } => {
                if x == 0.0 {
                    1.0
                } else {
                    numerics::normal_cdf(-(x.ln() - params.location()) / params.scale())
                }
            }
        }
    }

    /// `∫₀^∞ Ḡ(x)² dx`.
    pub fn integrated_survival_sq(&self) -> Result<f64, MarkError> {
        Ok(match *self {
            Self::Exponential { rate } => 0.5 / rate,
            Self::Deterministic { duration } => duration,
            Self::LogNormal { .. } => {
                integrate_to_infinity(|x| self.survival(x).powi(2), 0.0, &QuadConfig::default())?
                    .value
            }
        })
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Deterministic { duration } => duration,
            Self::LogNormal { params } => {
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
}
