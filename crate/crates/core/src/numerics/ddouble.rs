//! Double-double arithmetic: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Taylor terms used by [`Dd::exp_neg`].
const EXP_TERMS: usize = 22;
/// Entries of [`inv_factorials`]; `150!` is still a finite double.
pub(crate) const INV_FACTORIAL_LEN: usize = 151;

/// `1/n!` for `n < INV_FACTORIAL_LEN`, each within about `n` units of roundoff.
pub(crate) fn inv_factorials() -> &'static [Dd; INV_FACTORIAL_LEN] {
    static TABLE: OnceLock<[Dd; INV_FACTORIAL_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Dd::ONE; INV_FACTORIAL_LEN];
        for n in 1..INV_FACTORIAL_LEN {
            t[n] = t[n - 1].div_f64(n as f64);
        }
        t
    })
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self - Dd::new(q1).mul_f64(b);
        let q2 = r.hi / b;
        let r = r - Dd::new(q2).mul_f64(b);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }

    /// `e^{-1}` to full double-double precision, from its Taylor series.
    pub fn exp_neg_one() -> Dd {
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for k in 1..40 {
            term = -term.div_f64(k as f64);
            sum = sum + term;
        }
        sum
    }

    /// `e^{-t}` for `t >= 0`: Taylor series on `t / 2^j`, then `j` squarings.
    pub fn exp_neg(t: f64) -> Dd {
        debug_assert!(t >= 0.0);
        if t == 0.0 {
            return Dd::ONE;
        }
        if t > 746.0 {
            return Dd::ZERO;
        }
        // |r| ≤ 1/16 and EXP_TERMS terms leave a truncation far below the unit roundoff;
        // each squaring doubles the relative error, so keep j small.
        let j = (t.log2().ceil() as i32 + 4).max(0);
        let r = t / f64::powi(2.0, j);
        let inv = inv_factorials();
        let mut sum = inv[EXP_TERMS];
        for n in (0..EXP_TERMS).rev() {
            sum = sum.mul_f64(-r) + inv[n];
        }
        for _ in 0..j {
            sum = sum * sum;
        }
        sum
    }

    /// `e^{-t}` for a double-double `t >= 0`.
    pub fn exp_neg_dd(t: Dd) -> Dd {
        // e^{-(hi + lo)} = e^{-hi} (1 - lo + lo²/2), |lo| ≤ ulp(hi).
        let base = Dd::exp_neg(t.hi);
        base * (Dd::ONE - Dd::new(t.lo) + Dd::new(0.5 * t.lo * t.lo))
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }

    /// Natural logarithm for `x >= 1`, by one Newton step on `e^{-y} x = 1`.
    pub fn ln_ge_one(x: Dd) -> Dd {
        debug_assert!(x.hi >= 1.0);
        let y0 = x.hi.ln();
        let y = Dd::new(y0);
        // y1 = y0 + x e^{-y0} - 1.
        y + x * Dd::exp_neg(y0) - Dd::ONE
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_tiny_addend() {
        let a = Dd::new(1.0) + Dd::new(1e-20);
        assert_eq!(a.hi, 1.0);
        assert!((a.lo - 1e-20).abs() < 1e-36);
        let back = a - Dd::new(1.0);
        assert!((back.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn division_round_trips() {
        let x = Dd::new(1.0).div_f64(3.0);
        let y = x.mul_f64(3.0) - Dd::ONE;
        assert!(y.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_neg_one_matches_f64_and_beyond() {
        let e = Dd::exp_neg_one();
        assert_eq!(e.hi, (-1.0_f64).exp());
        // e^{-1} · e = 1 to double-double accuracy, using e = Σ 1/k!.
        let mut term = Dd::ONE;
        let mut euler = Dd::ONE;
        for k in 1..40 {
            term = term.div_f64(k as f64);
            euler = euler + term;
        }
        assert!((e * euler - Dd::ONE).to_f64().abs() < 1e-30);
    }

    #[test]
    fn exp_neg_agrees_with_series_constant() {
        let a = Dd::exp_neg(1.0);
        let b = Dd::exp_neg_one();
        assert!((a - b).to_f64().abs() < 1e-29);
        let c = Dd::exp_neg(0.25) * Dd::exp_neg(0.75);
        assert!((c - b).to_f64().abs() < 1e-29);
        assert_eq!(Dd::exp_neg(20.0).hi, (-20.0_f64).exp());
    }

    #[test]
    fn compensation_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
