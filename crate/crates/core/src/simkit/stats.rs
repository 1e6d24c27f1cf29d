use super::SimError;

/// Order-fixed pairwise summation; the result depends only on the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, SimError> {
    if samples.is_empty() {
        return Err(SimError::EmptySample);
    }
    if let Some(&bad) = samples.iter().find(|x| x.is_nan()) {
        return Err(SimError::InvalidParameter {
            name: "sample",
            value: bad,
        });
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `F̂(x) = #{samples ≤ x} / N` at each grid point.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>, SimError> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| v.partition_point(|&s| s <= x) as f64 / n)
        .collect())
}

/// Two-sample statistic `sup_x |F̂_a(x) − F̂_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, SimError> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // Ties are consumed on both sides before comparing.
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d.min(1.0))
}

/// One-sample statistic against a `cdf` that is continuous at the samples.
pub fn ks_distance_to_cdf<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64, SimError> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let below = i as f64 / n;
        while i < v.len() && v[i] == x {
            i += 1;
        }
        let f = cdf(x);
        d = d.max((f - below).abs()).max((i as f64 / n - f).abs());
    }
    Ok(d.min(1.0))
}
