//! Seedable random streams and the sampling primitives used by the Gibbs
//! conditionals.
//!
//! All draws are made in `f64` and converted to the caller's scalar type.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sequences for the same seed without any coordination between workers.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Mixes a tag into a seed (splitmix64 finalizer), for deriving per-task seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate for large `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Draws from `N(mean, variance)` restricted to the open interval
/// `(lower, upper)`; either bound may be infinite.
pub fn sample_truncated_normal<T: Real, R: Rng + ?Sized>(
    mean: T,
    variance: T,
    lower: T,
    upper: T,
    rng: &mut R,
) -> Result<T> {
    let (m, v, lo, hi) = (mean.as_f64(), variance.as_f64(), lower.as_f64(), upper.as_f64());
    if !(lo < hi) {
        return Err(Error::EmptyInterval {
            lower: lo,
            upper: hi,
        });
    }
    if !(v > 0.0) || !v.is_finite() || !m.is_finite() {
        return Err(Error::InvalidParam(format!(
            "truncated normal needs finite mean and positive variance, got ({m}, {v})"
        )));
    }
    let sd = v.sqrt();
    let a = (lo - m) / sd;
    let b = (hi - m) / sd;
    for _ in 0..64 {
        let x = T::lit(m + sd * std_truncated(a, b, rng));
        if x > lower && x < upper {
            return Ok(x);
        }
    }
    // Only reachable when (lower, upper) holds no representable interior point.
    Ok(lower + (upper - lower) / T::lit(2.0))
}

/// Standard normal truncated to `(a, b)`.
///
/// Uses plain normal rejection when the interval carries substantial mass,
/// uniform rejection on short intervals, and Robert's translated-exponential
/// proposal in the tails, so acceptance stays bounded away from zero for
/// intervals such as `(8, ∞)`.
pub fn std_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return std_normal(rng);
    }
    if b <= 0.0 {
        return -std_truncated(-b, -a, rng);
    }
    if a < 0.0 {
        // interval straddles zero
        if b - a > 2.5 {
            return normal_rejection(a, b, rng);
        }
        return loop {
            let x = a + (b - a) * open01(rng);
            if open01(rng) < (-0.5 * x * x).exp() {
                break x;
            }
        };
    }
    // 0 <= a < b
    if a < 0.5 {
        if b - a > 2.0 {
            return normal_rejection(a, b, rng);
        }
        return uniform_rejection_tail(a, b, rng);
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a > 1.0 / lambda {
        loop {
            let x = a - open01(rng).ln() / lambda;
            if x >= b {
                continue;
            }
            let d = x - lambda;
            if open01(rng) < (-0.5 * d * d).exp() {
                return x;
            }
        }
    }
    uniform_rejection_tail(a, b, rng)
}

fn normal_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    loop {
        let x = std_normal(rng);
        if x > a && x < b {
            return x;
        }
    }
}

// Uniform proposal on (a, b) with 0 <= a, envelope φ(a).
fn uniform_rejection_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    loop {
        let x = a + (b - a) * open01(rng);
        if open01(rng) < (0.5 * (a * a - x * x)).exp() {
            return x;
        }
    }
}

/// Draws `scale_sum / X` with `X ~ χ²(df)`: a scaled-inverse-chi-square
/// variate whose "scale" argument is the residual-plus-prior sum of squares.
pub fn sample_scaled_inv_chisq<T: Real, R: Rng + ?Sized>(df: T, scale_sum: T, rng: &mut R) -> Result<T> {
    let (df, s) = (df.as_f64(), scale_sum.as_f64());
    if !(df > 0.0) || !(s > 0.0) || !df.is_finite() || !s.is_finite() {
        return Err(Error::InvalidParam(format!(
            "scaled-inverse-chi-square needs df > 0 and scale > 0, got ({df}, {s})"
        )));
    }
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidParam(e.to_string()))?;
    loop {
        let x: f64 = chi.sample(rng);
        if x > 0.0 {
            return Ok(T::lit(s / x));
        }
    }
}

/// Multivariate normal draw via the Cholesky factor of `cov`.
pub fn sample_mvn<T: Real, R: Rng + ?Sized>(mean: &[T], cov: &Matrix<T>, rng: &mut R) -> Result<Vec<T>> {
    if cov.rows() != mean.len() || !cov.is_square() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: cov.rows(),
        });
    }
    let chol = cov.cholesky()?;
    let z: Vec<T> = (0..mean.len()).map(|_| T::lit(std_normal(rng))).collect();
    Ok(chol
        .mul_l(&z)
        .into_iter()
        .zip(mean)
        .map(|(d, &m)| m + d)
        .collect())
}

/// Returns index `l` with probability `probs[l]`.
pub fn sample_multinomial_index<T: Real, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    let mut total = 0.0;
    for &p in probs {
        let p = p.as_f64();
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidProbabilities(format!("entry {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidProbabilities(format!("sum is {total}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (l, &p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = l;
            acc += p;
            if u < acc {
                return Ok(l);
            }
        }
    }
    Ok(last_positive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(42, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(42, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(42, 4);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn untruncated_and_symmetric() {
        let mut rng = RngStream::new(1, 0);
        let inf = f64::INFINITY;
        let d: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_normal(0.0, 1.0, -inf, inf, &mut rng).unwrap())
            .collect();
        assert!(mean(&d).abs() < 0.02);
        let d: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_normal(0.0, 1.0, -0.7, 0.7, &mut rng).unwrap())
            .collect();
        assert!(mean(&d).abs() < 0.01);
        assert!(d.iter().all(|&x| x > -0.7 && x < 0.7));
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = RngStream::new(2, 0);
        let d: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_normal(0.0, 1.0, 0.0, f64::INFINITY, &mut rng).unwrap())
            .collect();
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean(&d) - expect).abs() < 0.01, "{}", mean(&d));
        // independent oracle: naive rejection from the untruncated normal
        let mut rng = RngStream::new(2, 1);
        let naive: Vec<f64> = std::iter::repeat_with(|| std_normal(&mut rng))
            .filter(|&x| x > 0.0)
            .take(100_000)
            .collect();
        assert!((mean(&d) - mean(&naive)).abs() < 0.015);
    }

    #[test]
    fn far_tail_stays_in_bounds() {
        let mut rng = RngStream::new(3, 0);
        for &(lo, hi) in &[(8.0, f64::INFINITY), (12.0, 12.001), (-f64::INFINITY, -9.0), (30.0, 31.0)] {
            for _ in 0..1000 {
                let x = sample_truncated_normal(0.0, 1.0, lo, hi, &mut rng).unwrap();
                assert!(x > lo && x < hi);
            }
        }
        // mean of N(0,1) on (8, ∞) is φ(8)/Q(8) ≈ 8.1211
        let d: Vec<f64> = (0..20_000)
            .map(|_| sample_truncated_normal(0.0, 1.0, 8.0, f64::INFINITY, &mut rng).unwrap())
            .collect();
        assert!((mean(&d) - norm_pdf(8.0) / norm_sf(8.0)).abs() < 0.01);
    }

    #[test]
    fn empty_interval_rejected() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(
            sample_truncated_normal(0.0, 1.0, 1.0, 1.0, &mut rng),
            Err(Error::EmptyInterval { .. })
        ));
        assert!(matches!(
            sample_truncated_normal(0.0, 1.0, 2.0, 1.0, &mut rng),
            Err(Error::EmptyInterval { .. })
        ));
    }

    #[test]
    fn scaled_inv_chisq_properties() {
        let mut rng = RngStream::new(5, 0);
        assert!((0..1000).all(|_| sample_scaled_inv_chisq(0.5, 0.1, &mut rng).unwrap() > 0.0));
        let d: Vec<f64> = (0..100_000)
            .map(|_| sample_scaled_inv_chisq(5.0, 3.0, &mut rng).unwrap())
            .collect();
        // oracle: χ²(5) as a sum of five squared normals
        let mut rng2 = RngStream::new(5, 1);
        let oracle: Vec<f64> = (0..100_000)
            .map(|_| 3.0 / (0..5).map(|_| std_normal(&mut rng2).powi(2)).sum::<f64>())
            .collect();
        assert!((mean(&d) - 1.0).abs() < 0.03, "{}", mean(&d));
        assert!((mean(&oracle) - 1.0).abs() < 0.03);
        let d: Vec<f64> = (0..2000)
            .map(|_| sample_scaled_inv_chisq(1e6, 1e6, &mut rng).unwrap())
            .collect();
        let m = mean(&d);
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!(sd < 0.01 && (m - 1.0).abs() < 0.01);
        assert!(sample_scaled_inv_chisq(0.0, 1.0, &mut rng).is_err());
        assert!(sample_scaled_inv_chisq(1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn mvn_moments() {
        let mut rng = RngStream::new(6, 0);
        let n = 100_000;
        let cov = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_mvn(&[0.0, 0.0], &cov, &mut rng).unwrap()).collect();
        let m0 = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        let m1 = draws.iter().map(|d| d[1]).sum::<f64>() / n as f64;
        let v0 = draws.iter().map(|d| (d[0] - m0).powi(2)).sum::<f64>() / n as f64;
        let v1 = draws.iter().map(|d| (d[1] - m1).powi(2)).sum::<f64>() / n as f64;
        let c = draws.iter().map(|d| (d[0] - m0) * (d[1] - m1)).sum::<f64>() / n as f64;
        assert!((c / (v0 * v1).sqrt() - 0.5).abs() < 0.02);

        let eye = Matrix::identity(2);
        let draws: Vec<Vec<f64>> = (0..20_000).map(|_| sample_mvn(&[0.0, 0.0], &eye, &mut rng).unwrap()).collect();
        let c = draws.iter().map(|d| d[0] * d[1]).sum::<f64>() / 20_000.0;
        let v = draws.iter().map(|d| d[0] * d[0]).sum::<f64>() / 20_000.0;
        assert!(c.abs() < 0.03 && (v - 1.0).abs() < 0.05);

        let tight = Matrix::<f64>::from_diagonal(&[1e-4, 1e-4]);
        for _ in 0..1000 {
            let d = sample_mvn(&[1.0, 2.0], &tight, &mut rng).unwrap();
            assert!((d[0] - 1.0).abs() < 0.05 && (d[1] - 2.0).abs() < 0.05);
        }
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(sample_mvn(&[0.0, 0.0], &bad, &mut rng), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn multinomial_frequencies() {
        let mut rng = RngStream::new(7, 0);
        assert!((0..1000).all(|_| sample_multinomial_index(&[1.0, 0.0, 0.0], &mut rng).unwrap() == 0));
        for probs in [[1.0 / 3.0; 3], [0.2, 0.3, 0.5]] {
            let mut counts = [0usize; 3];
            for _ in 0..100_000 {
                counts[sample_multinomial_index(&probs, &mut rng).unwrap()] += 1;
            }
            for l in 0..3 {
                assert!((counts[l] as f64 / 1e5 - probs[l]).abs() < 0.01);
            }
        }
        assert!(sample_multinomial_index(&[0.5, 0.6], &mut rng).is_err());
        assert!(sample_multinomial_index(&[-0.1, 1.1], &mut rng).is_err());
    }
}
