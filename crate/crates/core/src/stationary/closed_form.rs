//! Closed forms for exponential marks `M ~ Exp(α)`, with `a = λ/μ`.
//!
//! The shot-noise limit is `Gamma(a, α)`. The threshold density is gamma-shaped
//! on `[0, c]` and exponential with rate `α − λ/(cμ)` above `c`. The finite
//! storage density is the gamma density truncated to `[0, c]`.
//!
//! Normalisers are divided through by `Γ(a)` and written with
//! `T = (αc)^a e^{-αc} / Γ(a + 1)`, using `Q(a+1, x) − Q(a, x) = x^a e^{-x}/Γ(a+1)`.

use super::StationaryError;
use crate::numerics::{gamma_p, integrate, ln_gamma, QuadConfig};

fn check(lambda: f64, mu: f64, alpha: f64) -> Result<(), StationaryError> {
    for (name, v) in [("lambda", lambda), ("mu", mu), ("alpha", alpha)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(StationaryError::InvalidParameter { name, value: v });
        }
    }
    Ok(())
}

fn check_stable(lambda: f64, mu: f64, alpha: f64, c: f64) -> Result<(), StationaryError> {
    check(lambda, mu, alpha)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(StationaryError::InvalidParameter {
            name: "c",
            value: c,
        });
    }
    if lambda >= alpha * c * mu {
        return Err(StationaryError::Unstable {
            load: lambda / (alpha * mu),
            c,
        });
    }
    Ok(())
}

/// `T = (αc)^a e^{-αc} / Γ(a+1)`.
fn boundary_mass(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a + 1.0)).exp()
}

/// `D / Γ(a) = (αcμ − λ) P(a, αc) + λ T`.
fn threshold_normaliser(lambda: f64, mu: f64, alpha: f64, c: f64) -> f64 {
    let a = lambda / mu;
    let x = alpha * c;
    (alpha * c * mu - lambda) * gamma_p(a, x) + lambda * boundary_mass(a, x)
}

/// `P(ψ∞ ≤ x) = P(λ/μ, αx)`.
pub fn gamma_stationary_cdf(
    lambda: f64,
    mu: f64,
    alpha: f64,
    x: f64,
) -> Result<f64, StationaryError> {
    check(lambda, mu, alpha)?;
    Ok(gamma_p(lambda / mu, alpha * x.max(0.0)))
}

/// Gamma(λ/μ, α) density.
pub fn gamma_stationary_density(
    lambda: f64,
    mu: f64,
    alpha: f64,
    x: f64,
) -> Result<f64, StationaryError> {
    check(lambda, mu, alpha)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let a = lambda / mu;
    Ok((a * alpha.ln() + (a - 1.0) * x.ln() - alpha * x - ln_gamma(a)).exp())
}

/// Stationary density of the threshold storage process.
pub fn threshold_closed_form_density(
    lambda: f64,
    mu: f64,
    alpha: f64,
    c: f64,
    x: f64,
) -> Result<f64, StationaryError> {
    check_stable(lambda, mu, alpha, c)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    let a = lambda / mu;
    let d = threshold_normaliser(lambda, mu, alpha, c);
    if x <= c {
        if x == 0.0 {
            return Ok(0.0);
        }
        let shape = (a * alpha.ln() + (a - 1.0) * x.ln() - alpha * x - ln_gamma(a)).exp();
        Ok((alpha * c * mu - lambda) * shape / d)
    } else {
        let rate = alpha - lambda / (c * mu);
        let mass = lambda * boundary_mass(a, alpha * c);
        Ok(rate * mass * (-rate * (x - c)).exp() / d)
    }
}

/// `P(ψ∞^C > c)`: the mass of the exponential branch.
pub fn threshold_closed_form_exceedance(
    lambda: f64,
    mu: f64,
    alpha: f64,
    c: f64,
) -> Result<f64, StationaryError> {
    check_stable(lambda, mu, alpha, c)?;
    let a = lambda / mu;
    let t = boundary_mass(a, alpha * c);
    Ok(lambda * t / threshold_normaliser(lambda, mu, alpha, c))
}

/// `P(ψ∞^C + M > c)`.
pub fn threshold_closed_form_exceedance_p1(
    lambda: f64,
    mu: f64,
    alpha: f64,
    c: f64,
) -> Result<f64, StationaryError> {
    check_stable(lambda, mu, alpha, c)?;
    let a = lambda / mu;
    let t = boundary_mass(a, alpha * c);
    Ok(alpha * c * mu * t / threshold_normaliser(lambda, mu, alpha, c))
}

/// Stationary density of the finite storage process on `(0, c]`.
pub fn blocking_closed_form_density(
    lambda: f64,
    mu: f64,
    alpha: f64,
    x: f64,
    c: f64,
) -> Result<f64, StationaryError> {
    check(lambda, mu, alpha)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(StationaryError::InvalidParameter {
            name: "c",
            value: c,
        });
    }
    if x <= 0.0 || x > c {
        return Ok(0.0);
    }
    let a = lambda / mu;
    Ok(gamma_stationary_density(lambda, mu, alpha, x)? / gamma_p(a, alpha * c))
}

/// `P(ψ∞^B + M > c) = T / P(a, αc)`.
pub fn blocking_closed_form_exceedance(
    lambda: f64,
    mu: f64,
    alpha: f64,
    c: f64,
) -> Result<f64, StationaryError> {
    check(lambda, mu, alpha)?;
    let a = lambda / mu;
    Ok(boundary_mass(a, alpha * c) / gamma_p(a, alpha * c))
}

/// `(x ∧ c) f_C(x) − (λ/μ) ∫₀^x P(M > x − y) f_C(y) dy` for the closed-form
/// threshold density with `M ~ Exp(α)`; zero when the density solves the
/// storage integral equation. Pass `c = ∞` for the shot-noise (gamma) density.
pub fn threshold_integral_residual(
    lambda: f64,
    mu: f64,
    alpha: f64,
    c: f64,
    x: f64,
) -> Result<f64, StationaryError> {
    let density = |y: f64| -> Result<f64, StationaryError> {
        if c.is_infinite() {
            gamma_stationary_density(lambda, mu, alpha, y)
        } else {
            threshold_closed_form_density(lambda, mu, alpha, c, y)
        }
    };
    // Parameter errors surface here; afterwards the density cannot fail.
    let f_x = density(x)?;
    let cfg = QuadConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        ..QuadConfig::default()
    };
    let integrand = |y: f64| (-alpha * (x - y)).exp() * density(y).unwrap_or(0.0);
    // The density has a kink at c, so split there.
    let q = if x > c {
        integrate(&integrand, 0.0, c, &cfg)?.value + integrate(&integrand, c, x, &cfg)?.value
    } else {
        integrate(&integrand, 0.0, x, &cfg)?.value
    };
    Ok(x.min(c) * f_x - lambda / mu * q)
}
