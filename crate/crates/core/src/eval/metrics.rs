use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::real::Real;

/// Share of the truly poor that were not selected.
///
/// When the selection size differs from the truth count a warning is
/// logged and the rate is still taken against the truth count.
pub fn error_rate(selected: &BTreeSet<String>, truly_poor: &BTreeSet<String>) -> f64 {
    if selected.len() != truly_poor.len() {
        log::warn!(
            "quota mismatch: {} selected for {} truly poor",
            selected.len(),
            truly_poor.len()
        );
    }
    if truly_poor.is_empty() {
        return 0.0;
    }
    1.0 - selected.intersection(truly_poor).count() as f64 / truly_poor.len() as f64
}

/// Error pooled over communities: missed poor over all poor.
pub fn pooled_error_rate(
    selected: &BTreeMap<String, BTreeSet<String>>,
    truly_poor: &BTreeMap<String, BTreeSet<String>>,
) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (c, truth) in truly_poor {
        total += truth.len();
        if let Some(sel) = selected.get(c) {
            hit += sel.intersection(truth).count();
        }
    }
    if total == 0 {
        0.0
    } else {
        1.0 - hit as f64 / total as f64
    }
}

/// Each coefficient divided by the mean absolute coefficient, sign kept.
pub fn standardized_coefficients<T: Real>(coefs: &[T]) -> Result<Vec<T>> {
    let n = T::lit(coefs.len() as f64);
    let mean_abs = coefs.iter().map(|c| c.abs()).sum::<T>() / n;
    if coefs.is_empty() || mean_abs == T::zero() {
        return Err(Error::AllZero);
    }
    Ok(coefs.iter().map(|&c| c / mean_abs).collect())
}

/// Spearman correlation of two rankings of the same households.
pub fn rank_correlation(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> Result<f64> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::SetMismatch);
    }
    let ra: Vec<f64> = a.values().map(|&r| r as f64).collect();
    let rb: Vec<f64> = b.values().map(|&r| r as f64).collect();
    Ok(pearson(&ra, &rb))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Mean and sample standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}
