//! Small statistics helpers shared by metrics, benchmarks and tests.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};

/// Arithmetic mean. Returns an error on empty input.
pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Parameter("mean of empty slice".into()));
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Quantile with linear interpolation between order statistics
/// (the same convention as numpy's default). `q` must lie in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Parameter("quantile of empty slice".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("quantile {q} outside [0, 1]")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn median(xs: &[f64]) -> Result<f64> {
    quantile(xs, 0.5)
}

/// Ranks with ties replaced by the mean of the tied positions (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the rank (i + j) / 2 + 1 (1-based)
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two equal-length slices.
/// Errors if either input has zero variance or fewer than two points.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Parameter(format!(
            "correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Parameter(
            "correlation needs at least two points".into(),
        ));
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Parameter(format!(
            "correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// One-sided (greater) permutation test for a Spearman correlation.
///
/// Shuffles `ys` `n_shuffles` times and counts how often the shuffled
/// correlation reaches the observed one. Returns `(rho, p)` with the
/// add-one-smoothed estimate p = (count + 1) / (n_shuffles + 1), so p is
/// never exactly zero.
pub fn spearman_permutation_test(
    xs: &[f64],
    ys: &[f64],
    n_shuffles: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_shuffles == 0 {
        return Err(Error::Parameter("permutation test with zero shuffles".into()));
    }
    let rho = spearman(xs, ys)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut shuffled = ys.to_vec();
    let mut count = 0usize;
    for _ in 0..n_shuffles {
        shuffled.shuffle(&mut rng);
        // A shuffled column with the same values keeps its variance, so
        // spearman cannot fail here if the observed one succeeded.
        if spearman(xs, &shuffled)? >= rho {
            count += 1;
        }
    }
    Ok((rho, (count + 1) as f64 / (n_shuffles + 1) as f64))
}
