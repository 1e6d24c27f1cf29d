use rand::Rng;
use statrs::function::beta::beta_reg;

use super::{MarkDistribution, MarkError};
use crate::numerics;

/// Batch-size law `B(n)` indexed by the scaling parameter `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchDistribution {
    /// `B = n` almost surely.
    DeterministicSize { n: u64 },
    /// `B ~ Poisson(n)`.
    Poisson { n: u64 },
    /// `B ~ Geometric(α/n)` on `{1, 2, ...}`, mean `n/α`.
    Geometric { n: u64, alpha: f64 },
    /// `B ~ Binomial(n, p)`.
    Binomial { n: u64, p: f64 },
}

impl BatchDistribution {
    pub fn deterministic(n: u64) -> Result<Self, MarkError> {
        check_index(n)?;
        Ok(Self::DeterministicSize { n })
    }

    pub fn poisson(n: u64) -> Result<Self, MarkError> {
        check_index(n)?;
        Ok(Self::Poisson { n })
    }

    pub fn geometric(n: u64, alpha: f64) -> Result<Self, MarkError> {
        check_index(n)?;
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= n as f64) {
            return Err(MarkError::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        Ok(Self::Geometric { n, alpha })
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self, MarkError> {
        check_index(n)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(MarkError::InvalidParameter {
                name: "p",
                value: p,
            });
        }
        Ok(Self::Binomial { n, p })
    }

    pub fn index(&self) -> u64 {
        match *self {
            Self::DeterministicSize { n }
            | Self::Poisson { n }
            | Self::Geometric { n, .. }
            | Self::Binomial { n, .. } => n,
        }
    }

    /// Same family at a different scaling index.
    pub fn rescaled(&self, n: u64) -> Result<Self, MarkError> {
        match *self {
            Self::DeterministicSize { .. } => Self::deterministic(n),
            Self::Poisson { .. } => Self::poisson(n),
            Self::Geometric { alpha, .. } => Self::geometric(n, alpha),
            Self::Binomial { p, .. } => Self::binomial(n, p),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::DeterministicSize { n } | Self::Poisson { n } => n as f64,
            Self::Geometric { n, alpha } => n as f64 / alpha,
            Self::Binomial { n, p } => n as f64 * p,
        }
    }

    fn geometric_p(n: u64, alpha: f64) -> f64 {
        alpha / n as f64
    }

    /// `P(B ≥ j)`.
    pub fn tail_ge(&self, j: u64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        match *self {
            Self::DeterministicSize { n } => {
                if j <= n {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Poisson { n } => numerics::gamma_p(j as f64, n as f64),
            Self::Geometric { n, alpha } => {
                let p = Self::geometric_p(n, alpha);
                if p >= 1.0 {
                    if j == 1 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ((j - 1) as f64 * (-p).ln_1p()).exp()
                }
            }
            Self::Binomial { n, p } => {
                if j > n {
                    0.0
                } else if p >= 1.0 {
                    1.0
                } else {
                    // P(B ≥ j) = I_p(j, n − j + 1)
                    beta_reg(j as f64, (n - j + 1) as f64, p)
                }
            }
        }
    }

    /// `P(B = j)`.
    pub fn pmf(&self, j: u64) -> f64 {
        match *self {
            Self::DeterministicSize { n } => {
                if j == n {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Poisson { n } => {
                let lam = n as f64;
                (j as f64 * lam.ln() - lam - numerics::ln_gamma(j as f64 + 1.0)).exp()
            }
            Self::Geometric { n, alpha } => {
                if j == 0 {
                    return 0.0;
                }
                let p = Self::geometric_p(n, alpha);
                if p >= 1.0 {
                    return if j == 1 { 1.0 } else { 0.0 };
                }
                p * ((j - 1) as f64 * (-p).ln_1p()).exp()
            }
            Self::Binomial { n, p } => {
                if j > n {
                    return 0.0;
                }
                if p >= 1.0 {
                    return if j == n { 1.0 } else { 0.0 };
                }
                let (nf, jf) = (n as f64, j as f64);
                (numerics::ln_gamma(nf + 1.0)
                    - numerics::ln_gamma(jf + 1.0)
                    - numerics::ln_gamma(nf - jf + 1.0)
                    + jf * p.ln()
                    + (nf - jf) * (-p).ln_1p())
                .exp()
            }
        }
    }

    /// `P(B ≤ k)`.
    pub fn cdf(&self, k: u64) -> f64 {
        1.0 - self.tail_ge(k + 1)
    }

    /// Largest `j` with `P(B ≥ j) > 0`, if finite.
    pub fn max_size(&self) -> Option<u64> {
        match *self {
            Self::DeterministicSize { n } | Self::Binomial { n, .. } => Some(n),
            Self::Geometric { n, alpha } if Self::geometric_p(n, alpha) >= 1.0 => Some(1),
            _ => None,
        }
    }

    /// `E[(B − d)⁺]`.
    pub fn expected_excess(&self, d: u64) -> f64 {
        match *self {
            Self::DeterministicSize { n } => n.saturating_sub(d) as f64,
            Self::Geometric { n, alpha } => {
                let p = Self::geometric_p(n, alpha);
                if d == 0 {
                    self.mean()
                } else {
                    // Memoryless: E[(B − d)⁺] = P(B > d) · E[B].
                    self.tail_ge(d + 1) / p
                }
            }
            _ => {
                // E[(B − d)⁺] = E[B] − Σ_{j=1}^{d} P(B ≥ j)
                let mut s = 0.0;
                for j in 1..=d {
                    let t = self.tail_ge(j);
                    s += t;
                    if t == 0.0 {
                        break;
                    }
                }
                (self.mean() - s).max(0.0)
            }
        }
    }

    /// Inverse CDF: smallest `k` with `P(B ≤ k) ≥ u`.
    pub fn quantile(&self, u: f64) -> u64 {
        match *self {
            Self::DeterministicSize { n } => n,
            Self::Geometric { n, alpha } => {
                let p = Self::geometric_p(n, alpha);
                if p >= 1.0 || u <= 0.0 {
                    return 1;
                }
                // P(B > k) = (1 − p)^k ≤ 1 − u
                let k = ((-u).ln_1p() / (-p).ln_1p()).ceil();
                (k.max(1.0)) as u64
            }
            Self::Poisson { .. } | Self::Binomial { .. } => self.walk_quantile(u),
        }
    }

    fn walk_quantile(&self, u: f64) -> u64 {
        let start = self.mean().floor() as u64;
        let mut k = start;
        let mut cdf = self.cdf(k);
        if cdf >= u {
            while k > 0 {
                let below = cdf - self.pmf(k);
                if below < u {
                    break;
                }
                cdf = below;
                k -= 1;
            }
            k
        } else {
            let cap = self.max_size().unwrap_or(u64::MAX);
            while cdf < u && k < cap {
                k += 1;
                let pk = self.pmf(k);
                cdf += pk;
                if pk == 0.0 && k as f64 > self.mean() {
                    break;
                }
            }
            k
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.quantile(rng.random::<f64>())
    }

    /// Weak limit of `B(n)/n`.
    pub fn batch_to_mark(&self) -> MarkDistribution {
        match *self {
            Self::DeterministicSize { .. } | Self::Poisson { .. } => {
                MarkDistribution::Deterministic { value: 1.0 }
            }
            Self::Geometric { alpha, .. } => MarkDistribution::Exponential { rate: alpha },
            Self::Binomial { p, .. } => MarkDistribution::Deterministic { value: p },
        }
    }
}

fn check_index(n: u64) -> Result<(), MarkError> {
    if n == 0 {
        Err(MarkError::InvalidIndex)
    } else {
        Ok(())
    }
}
