//! Special functions not covered by `statrs`: the entire exponential integral,
//! `E1`, and the principal branch of Lambert W on the non-negative axis.

use std::sync::OnceLock;

use super::ddouble::{inv_factorials, INV_FACTORIAL_LEN};
use super::Dd;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_4;
pub(crate) const EULER_GAMMA_DD: Dd = Dd {
    hi: 0.577_215_664_901_532_9,
    lo: -4.942_915_152_430_645e-18,
};
/// Below this `Ein` is summed directly; the alternating series loses about `z / ln 10` digits.
const EIN_SERIES_MAX_DD: f64 = 2.0;
/// Below this the positive series beats the continued fraction for `E1`.
const EIN_POSITIVE_SERIES_MAX_DD: f64 = 10.0;
/// Above this `E1(z) < e^{-z}/z` is below 1e-36 and is dropped from `Ein`.
const E1_NEGLIGIBLE_DD: f64 = 80.0;

/// `Ein(z) = ∫₀ᶻ (1 - e^{-t}) / t dt` for `z >= 0`.
///
/// Uses the alternating series for small `z` and `γ + ln z + E1(z)` otherwise.
pub fn ein(z: f64) -> f64 {
    debug_assert!(z >= 0.0, "ein is evaluated on the non-negative axis");
    if z <= 0.0 {
        return 0.0;
    }
    if z <= 4.0 {
        // Σ (-1)^{k+1} z^k / (k · k!)
        let mut term = z;
        let mut sum = z;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term *= -z / k;
            let add = term / k;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        EULER_GAMMA + z.ln() + e1(z)
    }
}

/// Exponential integral `E1(z) = ∫_z^∞ e^{-t} / t dt` for `z > 0`.
pub fn e1(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= 1.0 {
        // E1 = -γ - ln z + Σ (-1)^{k+1} z^k / (k · k!)
        let mut term = z;
        let mut sum = z;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term *= -z / k;
            let add = term / k;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - z.ln() + sum
    } else {
        // Modified Lentz on the continued fraction e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))).
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// `H_n / n!` with `H_n` the harmonic numbers.
fn harmonic_over_factorial() -> &'static [Dd; INV_FACTORIAL_LEN] {
    static TABLE: OnceLock<[Dd; INV_FACTORIAL_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let inv = inv_factorials();
        let mut t = [Dd::ZERO; INV_FACTORIAL_LEN];
        let mut h = Dd::ZERO;
        for n in 1..INV_FACTORIAL_LEN {
            h = h + Dd::ONE.div_f64(n as f64);
            t[n] = h * inv[n];
        }
        t
    })
}

/// `Ein(z)` in double-double for `z >= 0`.
pub fn ein_dd(z: Dd) -> Dd {
    ein_dd_given_exp(z, Dd::exp_neg_dd(z))
}

/// [`ein_dd`] with `e^{-z}` supplied by the caller.
pub(crate) fn ein_dd_given_exp(z: Dd, exp_neg_z: Dd) -> Dd {
    if z.hi <= 0.0 {
        return Dd::ZERO;
    }
    if z.hi <= EIN_SERIES_MAX_DD {
        let mut term = z;
        let mut sum = z;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term = -(term * z).div_f64(k);
            let add = term.div_f64(k);
            sum = sum + add;
            if add.hi.abs() <= 1e-34 * sum.hi.abs() {
                return sum;
            }
        }
    }
    if z.hi <= EIN_POSITIVE_SERIES_MAX_DD {
        // Ein(z) = e^{-z} Σ_{n≥1} H_n z^n / n!, all terms positive.
        let coef = harmonic_over_factorial();
        let mut power = z;
        let mut sum = z;
        for (n, c) in coef.iter().enumerate().skip(2) {
            power = power * z;
            let add = power * *c;
            sum = sum + add;
            if n as f64 > z.hi && add.hi <= 1e-34 * sum.hi {
                break;
            }
        }
        return sum * exp_neg_z;
    }
    let head = EULER_GAMMA_DD + Dd::ln_ge_one(z);
    if z.hi > E1_NEGLIGIBLE_DD {
        return head;
    }
    head + e1_dd_given_exp(z, exp_neg_z)
}

/// `E1(z)` in double-double for `z >= 1`, by backward evaluation of the
/// continued fraction `e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))`.
pub fn e1_dd(z: Dd) -> Dd {
    e1_dd_given_exp(z, Dd::exp_neg_dd(z))
}

fn e1_dd_given_exp(z: Dd, exp_neg_z: Dd) -> Dd {
    debug_assert!(z.hi >= 1.0);
    // Truncation error decays like exp(-4√(zN)); zN ≥ 400 reaches 1e-34.
    let n = (400.0 / z.hi).ceil() as usize + 16;
    let mut f = z + Dd::new((2 * n + 1) as f64);
    for i in (1..=n).rev() {
        let i2 = (i * i) as f64;
        f = z + Dd::new((2 * i - 1) as f64) - Dd::new(i2).div(f);
    }
    exp_neg_z.div(f)
}

/// Principal branch `W₀(x)` for `x >= 0`, by Halley iteration.
pub fn lambert_w0(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let mut w = if x < 1.0 {
        x * (1.0 - x)
    } else {
        let l = x.ln();
        (l - l.ln().max(0.0)).max(0.5)
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}
