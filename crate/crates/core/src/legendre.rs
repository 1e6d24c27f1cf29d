//! Exponential-sum approximation of the indicator `1{x ≤ c}`.
//!
//! `L_m(x) = Σ_{k=1}^m a_k^m e^{-kx/c}` with
//! `a_k^m = (-1)^{k+1} C(m,k) C(m+k,k) ₃F₂(k, -m, m+1; 1, k+1; 1/e)`.
//! Replacing the indicator by `L_m` turns `P(X ≤ c)` into `Σ a_k^m E[e^{-kX/c}]`
//! and `E[X 1{X ≤ c}]` into `Σ a_k^m E[X e^{-kX/c}]`.
//!
//! The coefficients alternate in sign and grow like `Σ|a_k^m| ≈ 10^{0.7 m}`, so
//! they are summed exactly in fixed point, stored in double-double, and every
//! transform sum carries a rounding bound (`noise`). [`stabilize`] averages the candidates over a range
//! of orders after discarding those whose value is implausible or whose noise
//! exceeds the configured tolerance.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use thiserror::Error;

use crate::numerics::Dd;

/// Orders cached on first use.
const CACHED_ORDERS: usize = 40;
/// Double-double unit roundoff.
const DD_EPS: f64 = 4.93e-32;
/// Rounding factor applied to each f64 transform value.
const ROUNDING: f64 = 4.0 * f64::EPSILON;
/// Rounding factor for a double-double product and accumulation.
const DD_ROUNDING: f64 = 8.0 * DD_EPS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LegendreError {
    #[error("truncation order must be at least 1")]
    InvalidOrder,
    #[error("threshold c must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("no candidates to stabilize")]
    NoCandidates,
    #[error("all {count} candidates were filtered out (values {values:?}, noise {noise:?})")]
    AllFiltered {
        count: usize,
        values: Vec<f64>,
        noise: Vec<f64>,
    },
    #[error("transform accessor failed at s = {s}: {message}")]
    Accessor { s: f64, message: String },
}

/// The coefficients `a_1^m … a_m^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreCoefficients {
    order: usize,
    exact: Vec<Dd>,
    signs: Vec<i8>,
    ln_abs: Vec<f64>,
    abs_err: Vec<f64>,
    healthy: bool,
    amplification: f64,
}

impl LegendreCoefficients {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `a_k^m` for `1 ≤ k ≤ m`, rounded to f64.
    pub fn value(&self, k: usize) -> f64 {
        f64::from(self.signs[k - 1]) * self.ln_abs[k - 1].exp()
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.order).map(|k| self.value(k)).collect()
    }

    pub fn sign(&self, k: usize) -> i8 {
        self.signs[k - 1]
    }

    pub fn ln_abs(&self, k: usize) -> f64 {
        self.ln_abs[k - 1]
    }

    /// Bound on the absolute error of the stored `a_k^m`.
    pub fn error_bound(&self, k: usize) -> f64 {
        self.abs_err[k - 1]
    }

    /// `Σ_k` of [`Self::error_bound`].
    pub fn total_error_bound(&self) -> f64 {
        self.abs_err.iter().sum()
    }

    pub(crate) fn exact(&self, k: usize) -> Dd {
        self.exact[k - 1]
    }

    /// False when a coefficient overflows f64.
    pub fn is_healthy(&self) -> bool {
        self.healthy
    }

    /// `Σ|a_k^m|`, the worst-case amplification of transform error.
    pub fn amplification(&self) -> f64 {
        self.amplification
    }
}

/// Fractional bits of the fixed-point evaluation. The alternating sum cancels
/// about `0.7 m` decimal digits, so this covers orders well past any cached one.
const FIXED_BITS: u32 = 640;

/// `⌊e^{-1} 2^FIXED_BITS⌋` up to a few units, from the alternating factorial series.
fn inv_e_fixed() -> BigInt {
    let one = BigInt::one() << FIXED_BITS;
    let mut term = one.clone();
    let mut sum = one;
    let mut n = 1u32;
    while !term.is_zero() {
        term /= n;
        if n % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        n += 1;
    }
    sum
}

/// Round a fixed-point integer with `FIXED_BITS` fractional bits to double-double.
fn fixed_to_dd(x: &BigInt) -> Dd {
    let scale = f64::powi(2.0, -(FIXED_BITS as i32));
    let hi = x.to_f64().unwrap_or(f64::NAN) * scale;
    if !hi.is_finite() {
        return Dd::new(hi);
    }
    let hi_fixed = BigInt::from_f64(hi / scale).unwrap_or_default();
    let lo = (x - hi_fixed).to_f64().unwrap_or(0.0) * scale;
    Dd::new(hi) + Dd::new(lo)
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut b = BigInt::one();
    for i in 0..k {
        b = b * (n - i) / (i + 1);
    }
    b
}

/// `a_k^m = Σ_i (-1)^{k+1+i} C(m,k) C(m+k,k) C(m,i) C(m+i,i) k/(k+i) e^{-i}`,
/// summed exactly in fixed point and rounded once.
fn compute(m: usize) -> LegendreCoefficients {
    let inv_e = inv_e_fixed();
    let mut base = Vec::with_capacity(m + 1);
    let mut pow = BigInt::one() << FIXED_BITS;
    for i in 0..=m {
        let t = binomial(m, i) * binomial(m + i, i) * &pow;
        base.push(if i % 2 == 0 { t } else { -t });
        pow = (pow * &inv_e) >> FIXED_BITS;
    }

    let mut exact = Vec::with_capacity(m);
    let mut signs = Vec::with_capacity(m);
    let mut ln_abs = Vec::with_capacity(m);
    let mut abs_err = Vec::with_capacity(m);
    let mut amplification = 0.0;
    let mut healthy = true;
    for k in 1..=m {
        let mut f = BigInt::zero();
        for (i, t) in base.iter().enumerate() {
            f += t * k / (k + i);
        }
        let mut a = f * binomial(m, k) * binomial(m + k, k);
        if k % 2 == 0 {
            a = -a;
        }
        let d = fixed_to_dd(&a);
        let v = d.to_f64();
        healthy &= v.is_finite();
        // Double-double rounding; the fixed-point truncation is far smaller.
        abs_err.push(v.abs() * DD_EPS);
        amplification += v.abs();
        exact.push(d);
        signs.push(if v < 0.0 { -1 } else { 1 });
        ln_abs.push(v.abs().ln());
    }
    LegendreCoefficients {
        order: m,
        exact,
        signs,
        ln_abs,
        abs_err,
        healthy,
        amplification,
    }
}

fn cache() -> &'static [LegendreCoefficients] {
    static CACHE: OnceLock<Vec<LegendreCoefficients>> = OnceLock::new();
    CACHE.get_or_init(|| (1..=CACHED_ORDERS).map(compute).collect())
}

/// Coefficients of order `m`.
pub fn coefficients(m: usize) -> Result<LegendreCoefficients, LegendreError> {
    if m == 0 {
        return Err(LegendreError::InvalidOrder);
    }
    Ok(coefficients_ref(m).into_owned())
}

pub(crate) fn coefficients_ref(m: usize) -> std::borrow::Cow<'static, LegendreCoefficients> {
    if m <= CACHED_ORDERS {
        std::borrow::Cow::Borrowed(&cache()[m - 1])
    } else {
        std::borrow::Cow::Owned(compute(m))
    }
}

/// `L_m(x) = Σ a_k^m e^{-kx/c}`, evaluated in double-double.
pub fn indicator_approx(
    coeffs: &LegendreCoefficients,
    c: f64,
    x: f64,
) -> Result<f64, LegendreError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(LegendreError::InvalidThreshold(c));
    }
    let step = Dd::exp_neg(x.max(0.0) / c);
    let mut pow = Dd::ONE;
    let mut sum = Dd::ZERO;
    for k in 1..=coeffs.order {
        pow = pow * step;
        sum = sum + coeffs.exact(k) * pow;
    }
    Ok(sum.to_f64())
}

/// One order-`m` candidate with its rounding bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreSum {
    pub order: usize,
    pub value: f64,
    pub noise: f64,
}

/// `Σ a_k^m v_k` for transform values `v_k = (value, abs_error)` at `s = k/c`.
pub fn transform_sum<F, E>(
    coeffs: &LegendreCoefficients,
    c: f64,
    mut transform: F,
) -> Result<LegendreSum, LegendreError>
where
    F: FnMut(f64) -> Result<(f64, f64), E>,
    E: std::fmt::Display,
{
    if !(c.is_finite() && c > 0.0) {
        return Err(LegendreError::InvalidThreshold(c));
    }
    let mut sum = Dd::ZERO;
    let mut noise = 0.0;
    for k in 1..=coeffs.order {
        let s = k as f64 / c;
        let (v, err) = transform(s).map_err(|e| LegendreError::Accessor {
            s,
            message: e.to_string(),
        })?;
        let a = coeffs.exact(k);
        sum = sum + a * Dd::new(v);
        noise +=
            a.to_f64().abs() * (v.abs() * ROUNDING + err.abs()) + coeffs.error_bound(k) * v.abs();
    }
    Ok(LegendreSum {
        order: coeffs.order,
        value: sum.to_f64(),
        noise,
    })
}

/// [`transform_sum`] for transform values held in double-double, evaluated at
/// the exact nodes `s_k = k/c`.
pub fn transform_sum_dd<F, E>(
    coeffs: &LegendreCoefficients,
    c: f64,
    mut transform: F,
) -> Result<LegendreSum, LegendreError>
where
    F: FnMut(usize, Dd) -> Result<(Dd, f64), E>,
    E: std::fmt::Display,
{
    if !(c.is_finite() && c > 0.0) {
        return Err(LegendreError::InvalidThreshold(c));
    }
    let mut sum = Dd::ZERO;
    let mut noise = 0.0;
    for k in 1..=coeffs.order {
        let s = Dd::new(k as f64).div_f64(c);
        let (v, err) = transform(k, s).map_err(|e| LegendreError::Accessor {
            s: s.to_f64(),
            message: e.to_string(),
        })?;
        let a = coeffs.exact(k);
        sum = sum + a * v;
        let mag = v.to_f64().abs();
        noise += a.to_f64().abs() * (mag * DD_ROUNDING + err.abs()) + coeffs.error_bound(k) * mag;
    }
    Ok(LegendreSum {
        order: coeffs.order,
        value: sum.to_f64(),
        noise,
    })
}

/// Approximate `P(X ≤ c)` from the transform `s ↦ E[e^{-sX}]`.
pub fn cdf_from_mgf<F, E>(
    coeffs: &LegendreCoefficients,
    c: f64,
    mut mgf_neg: F,
) -> Result<LegendreSum, LegendreError>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    transform_sum(coeffs, c, |s| mgf_neg(s).map(|v| (v, 0.0)))
}

/// Approximate `E[X 1{X ≤ c}]` from `s ↦ E[X e^{-sX}]`.
pub fn truncated_mean_from_mgf<F, E>(
    coeffs: &LegendreCoefficients,
    c: f64,
    mut mgf_neg_deriv: F,
) -> Result<LegendreSum, LegendreError>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    transform_sum(coeffs, c, |s| mgf_neg_deriv(s).map(|v| (v, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// Values in `[0, 1]`.
    Probability,
    /// Non-negative expectations.
    NonnegMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreConfig {
    pub min_order: usize,
    pub max_order: usize,
    /// Probability candidates outside `[-slack, 1 + slack]` are dropped.
    pub slack: f64,
    /// Candidates with rounding bound above this are dropped. Relative to
    /// `max(1, |value|)` for means, absolute for probabilities.
    pub noise_tol: f64,
    /// Only the `window` highest orders that pass the other filters are kept;
    /// lower orders sit in the pre-convergence regime. `None` keeps all.
    pub window: Option<usize>,
}

impl Default for LegendreConfig {
    fn default() -> Self {
        Self {
            min_order: 5,
            max_order: 40,
            slack: 0.05,
            noise_tol: 1e-6,
            window: Some(16),
        }
    }
}

impl LegendreConfig {
    pub fn orders(&self) -> std::ops::RangeInclusive<usize> {
        self.min_order..=self.max_order
    }

    /// A configuration evaluating the single order `m`.
    pub fn single(m: usize) -> Self {
        Self {
            min_order: m,
            max_order: m,
            noise_tol: f64::INFINITY,
            ..Self::default()
        }
    }
}

/// Filtered average of per-order candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreEstimate {
    pub candidates: Vec<LegendreSum>,
    /// Orders that survived filtering, with their (clamped) values.
    pub retained: Vec<(usize, f64)>,
    pub value: f64,
    /// `max − min` over retained values.
    pub spread: f64,
}

impl LegendreEstimate {
    pub fn orders(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.order).collect()
    }
}

/// Drop implausible or noisy candidates and average the rest.
pub fn stabilize(
    candidates: &[LegendreSum],
    kind: EstimateKind,
    cfg: &LegendreConfig,
) -> Result<LegendreEstimate, LegendreError> {
    if candidates.is_empty() {
        return Err(LegendreError::NoCandidates);
    }
    let mut retained = Vec::new();
    for c in candidates {
        if !c.value.is_finite() || !c.noise.is_finite() && cfg.noise_tol.is_finite() {
            continue;
        }
        match kind {
            EstimateKind::Probability => {
                if c.noise > cfg.noise_tol {
                    continue;
                }
                if c.value < -cfg.slack || c.value > 1.0 + cfg.slack {
                    continue;
                }
                retained.push((c.order, c.value.clamp(0.0, 1.0)));
            }
            EstimateKind::NonnegMean => {
                if c.noise > cfg.noise_tol * c.value.abs().max(1.0) {
                    continue;
                }
                if c.value < 0.0 {
                    continue;
                }
                retained.push((c.order, c.value));
            }
        }
    }
    if let (Some(w), Some(top)) = (cfg.window, retained.iter().map(|r| r.0).max()) {
        retained.retain(|r| r.0 + w > top);
    }
    if retained.is_empty() {
        return Err(LegendreError::AllFiltered {
            count: candidates.len(),
            values: candidates.iter().map(|c| c.value).collect(),
            noise: candidates.iter().map(|c| c.noise).collect(),
        });
    }
    let n = retained.len() as f64;
    let value = retained.iter().map(|r| r.1).sum::<f64>() / n;
    let lo = retained.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = retained
        .iter()
        .map(|r| r.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LegendreEstimate {
        candidates: candidates.to_vec(),
        retained,
        value: value.clamp(lo, hi),
        spread: hi - lo,
    })
}

/// Stabilized `P(X ≤ c)` over the configured orders.
pub fn stabilized_cdf<F, E>(
    c: f64,
    mut mgf_neg: F,
    cfg: &LegendreConfig,
) -> Result<LegendreEstimate, LegendreError>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let mut cands = Vec::new();
    for m in cfg.orders() {
        cands.push(cdf_from_mgf(&coefficients_ref(m), c, &mut mgf_neg)?);
    }
    stabilize(&cands, EstimateKind::Probability, cfg)
}

/// Stabilized `E[X 1{X ≤ c}]` over the configured orders.
pub fn stabilized_truncated_mean<F, E>(
    c: f64,
    mut mgf_neg_deriv: F,
    cfg: &LegendreConfig,
) -> Result<LegendreEstimate, LegendreError>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let mut cands = Vec::new();
    for m in cfg.orders() {
        cands.push(truncated_mean_from_mgf(
            &coefficients_ref(m),
            c,
            &mut mgf_neg_deriv,
        )?);
    }
    stabilize(&cands, EstimateKind::NonnegMean, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gamma_p, integrate, QuadConfig};
    use std::convert::Infallible;

    /// Reference coefficients from 60-digit hypergeometric evaluation.
    const FROZEN: &[(usize, usize, f64)] = &[
        (1, 1, 1.264_241_117_657_115_356_8),
        (5, 1, 0.295_960_905_276_560_714_67),
        (5, 3, 80.116_751_119_157_170_432),
        (5, 5, 60.309_853_789_666_307_417),
        (10, 1, 1.162_933_747_563_292_655_5),
        (10, 5, 80_884.081_208_763_743_917),
        (10, 10, -35_585.119_536_600_701_037),
        (20, 1, 3.480_267_049_791_755_642),
        (20, 7, 4_836_744_823.834_900_653_6),
        (20, 14, -6_658_878_118_275.547_269_2),
        (20, 20, -19_722_093_226.232_034_619),
        (25, 1, 4.635_439_328_132_908_111_4),
        (25, 9, 7_379_365_001_204.020_819_9),
        (25, 13, 2_590_190_872_759_556.709_4),
        (25, 25, 15_201_870_181_975.623_166),
        (30, 16, -11_807_781_346_684_017_130.0),
        (40, 21, 8.528_793_783_631_333_665_8e25),
    ];

    #[test]
    fn coefficients_match_reference() {
        for &(m, k, v) in FROZEN {
            let c = coefficients(m).unwrap();
            assert!(c.is_healthy());
            let got = c.value(k);
            assert!(((got - v) / v).abs() < 1e-14, "m={m} k={k}: {got} vs {v}");
        }
    }

    #[test]
    fn first_coefficient_closed_form() {
        let c = coefficients(1).unwrap();
        let expect = 2.0 * (1.0 - (-1.0_f64).exp());
        assert!((c.value(1) - expect).abs() < 1e-15);
        assert_eq!(indicator_approx(&c, 1.0, 0.0).unwrap(), c.value(1));
        let at_one = indicator_approx(&c, 1.0, 1.0).unwrap();
        assert!((at_one - expect * (-1.0_f64).exp()).abs() < 1e-15);
    }

    /// Shifted-Legendre integral form of the ₃F₂ factor:
    /// `₃F₂(k, -m, m+1; 1, k+1; x) = k ∫₀¹ t^{k-1} P_m(1 - 2xt) dt`.
    fn integral_form(m: usize, k: usize) -> f64 {
        let x = (-1.0_f64).exp();
        let legendre = |y: f64| {
            let (mut p0, mut p1) = (1.0, y);
            if m == 0 {
                return p0;
            }
            for j in 1..m {
                let jf = j as f64;
                let p2 = ((2.0 * jf + 1.0) * y * p1 - jf * p0) / (jf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        };
        let f = integrate(
            |t| k as f64 * t.powi(k as i32 - 1) * legendre(1.0 - 2.0 * x * t),
            0.0,
            1.0,
            &QuadConfig::default().with_abs_tol(1e-17),
        )
        .unwrap()
        .value;
        let binom = |n: usize, r: usize| -> f64 {
            (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sign * binom(m, k) * binom(m + k, k) * f
    }

    #[test]
    fn coefficients_match_integral_form_at_low_order() {
        for m in 1..=8 {
            let c = coefficients(m).unwrap();
            for k in 1..=m {
                let oracle = integral_form(m, k);
                let scale = c.amplification();
                assert!(
                    (c.value(k) - oracle).abs() <= 1e-9 * scale,
                    "m={m} k={k}: {} vs {oracle}",
                    c.value(k)
                );
            }
        }
    }

    #[test]
    fn indicator_at_origin_in_range() {
        for m in 1..=25 {
            let c = coefficients(m).unwrap();
            let v = indicator_approx(&c, 1.0, 0.0).unwrap();
            assert!(v > 0.0 && v < 2.0, "m={m}: {v}");
        }
        // 60-digit reference sums Σ a_k^m.
        let frozen = [
            (5, 1.344_157_814_674_583_5),
            (10, 0.762_981_783_425_390_9),
            (20, 0.874_933_830_606_835_2),
            (25, 1.082_336_439_382_720_4),
            (30, 0.956_056_752_130_469_6),
            (40, 1.020_885_391_032_360_03),
        ];
        for (m, v) in frozen {
            let got = indicator_approx(&coefficients(m).unwrap(), 3.0, 0.0).unwrap();
            let coeffs = coefficients(m).unwrap();
            let tol = coeffs.total_error_bound() + 1e-14;
            assert!((got - v).abs() <= tol, "m={m}: {got} vs {v}, bound {tol}");
        }
    }

    #[test]
    fn indicator_approaches_half_at_threshold() {
        let c = 2.0;
        let err =
            |m: usize| (indicator_approx(&coefficients(m).unwrap(), c, c).unwrap() - 0.5).abs();
        assert!(err(25) < err(5));
        assert!(err(25) < 0.1);
    }

    #[test]
    fn gamma_cdf_oracle() {
        let truth = gamma_p(1.5, 2.0);
        let mgf = |s: f64| Ok::<_, Infallible>((1.0 + s).powf(-1.5));
        let est = stabilized_cdf(2.0, mgf, &LegendreConfig::default()).unwrap();
        assert!((est.value - truth).abs() < 1e-3, "{} vs {truth}", est.value);
        let worst = est
            .retained
            .iter()
            .map(|r| (r.1 - truth).abs())
            .fold(0.0, f64::max);
        assert!((est.value - truth).abs() <= worst + 1e-15);
    }

    #[test]
    fn gamma_truncated_mean_oracle() {
        let c = 2.0;
        let oracle = integrate(
            |x| x * x.sqrt() * (-x).exp() / statrs::function::gamma::gamma(1.5),
            0.0,
            c,
            &QuadConfig::default(),
        )
        .unwrap()
        .value;
        let deriv = |s: f64| Ok::<_, Infallible>(1.5 * (1.0 + s).powf(-2.5));
        let est = stabilized_truncated_mean(c, deriv, &LegendreConfig::default()).unwrap();
        assert!(
            (est.value - oracle).abs() < 1e-3,
            "{} vs {oracle}",
            est.value
        );
    }

    #[test]
    fn degenerate_at_zero_reproduces_indicator_origin() {
        let one = |_s: f64| Ok::<_, Infallible>(1.0);
        for m in [5, 12, 25] {
            let coeffs = coefficients(m).unwrap();
            let s = cdf_from_mgf(&coeffs, 1.5, one).unwrap();
            let l0 = indicator_approx(&coeffs, 1.5, 0.0).unwrap();
            assert!((s.value - l0).abs() < 1e-12);
        }
    }

    #[test]
    fn double_double_sum_matches_and_is_quiet() {
        // Gamma(2, 1): E[e^{-sX}] = (1 + s)^{-2} has an exact double-double form.
        let c = 2.0;
        let truth = gamma_p(2.0, c);
        for m in [10, 20, 30] {
            let coeffs = coefficients(m).unwrap();
            let dd = transform_sum_dd(&coeffs, c, |_, s| {
                let x = Dd::ONE + s;
                Ok::<_, Infallible>((Dd::ONE.div(x * x), 0.0))
            })
            .unwrap();
            let plain =
                cdf_from_mgf(&coeffs, c, |s| Ok::<_, Infallible>((1.0 + s).powi(-2))).unwrap();
            assert!(dd.noise < 1e-9, "m={m}: {}", dd.noise);
            assert!((dd.value - plain.value).abs() <= plain.noise + dd.noise);
            if m == 30 {
                assert!((dd.value - truth).abs() < 1e-5, "{} vs {truth}", dd.value);
            }
        }
    }

    fn sum(order: usize, value: f64) -> LegendreSum {
        LegendreSum {
            order,
            value,
            noise: 0.0,
        }
    }

    #[test]
    fn stabilize_examples() {
        let cfg = LegendreConfig::default();
        let e = stabilize(
            &[sum(5, 0.31), sum(6, 0.30), sum(7, 0.32)],
            EstimateKind::Probability,
            &cfg,
        )
        .unwrap();
        assert!((e.value - 0.31).abs() < 1e-15);
        let e = stabilize(
            &[sum(5, 0.31), sum(6, f64::NAN), sum(7, 7.2)],
            EstimateKind::Probability,
            &cfg,
        )
        .unwrap();
        assert_eq!(e.value, 0.31);
        assert_eq!(e.retained, vec![(5, 0.31)]);
        let err = stabilize(&[sum(5, -3.0)], EstimateKind::Probability, &cfg).unwrap_err();
        assert!(matches!(err, LegendreError::AllFiltered { .. }));
        assert!(matches!(
            stabilize(&[], EstimateKind::Probability, &cfg),
            Err(LegendreError::NoCandidates)
        ));
        let clamped = stabilize(
            &[sum(5, 1.02), sum(6, -0.01)],
            EstimateKind::Probability,
            &cfg,
        )
        .unwrap();
        assert_eq!(clamped.value, 0.5);
        let noisy = LegendreSum {
            order: 9,
            value: 0.4,
            noise: 1.0,
        };
        let e = stabilize(&[sum(5, 0.2), noisy], EstimateKind::Probability, &cfg).unwrap();
        assert_eq!(e.value, 0.2);
        let means = stabilize(
            &[sum(5, 2.0), sum(6, -1.0), sum(7, 4.0)],
            EstimateKind::NonnegMean,
            &cfg,
        )
        .unwrap();
        assert_eq!(means.value, 3.0);
    }

    fn l2_error(m: usize, c: f64) -> f64 {
        let coeffs = coefficients(m).unwrap();
        let sq = |x: f64| {
            let ind = if x <= c { 1.0 } else { 0.0 };
            (indicator_approx(&coeffs, c, x).unwrap() - ind).powi(2)
        };
        let cfg = QuadConfig {
            rel_tol: 1e-8,
            ..QuadConfig::default()
        };
        let body = integrate(sq, 0.0, c, &cfg).unwrap().value
            + integrate(sq, c, 5.0 * c, &cfg).unwrap().value;
        // Tail beyond 5c: ∫ (Σ a_k e^{-kx/c})² dx = Σ_{j,k} a_j a_k c e^{-5(j+k)}/(j+k).
        let mut tail = 0.0;
        for j in 1..=m {
            for k in 1..=m {
                let jk = (j + k) as f64;
                tail += coeffs.value(j) * coeffs.value(k) * c * (-5.0 * jk).exp() / jk;
            }
        }
        body + tail
    }

    #[test]
    fn l2_error_decreases_with_order() {
        let (e5, e10, e20) = (l2_error(5, 1.0), l2_error(10, 1.0), l2_error(20, 1.0));
        assert!(e5 > e10 && e10 > e20, "{e5} {e10} {e20}");
    }
}
