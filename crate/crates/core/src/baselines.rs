//! Comparison methods: a probit on dichotomized rankings and a proxy means
//! test fitted by least squares on expenditure.

use crate::data::RankingScheme;
use crate::dist::{norm_cdf, norm_pdf, norm_quantile};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::real::Real;

const MAX_ITER: usize = 50;
const SEPARATION_COEF: f64 = 1e3;

/// 1 for the `quota` most needy households of the scheme, 0 otherwise,
/// in the scheme's household id order.
pub fn dichotomize(scheme: &RankingScheme, quota: usize) -> Result<Vec<(String, u8)>> {
    if quota < 1 || quota > scheme.len() {
        return Err(Error::InvalidQuota {
            community: scheme.community_id.clone(),
            quota,
            size: scheme.len(),
        });
    }
    Ok(scheme
        .ranks()
        .iter()
        .map(|(h, &r)| (h.clone(), u8::from(r <= quota)))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbitFit<T = f64> {
    /// Slopes followed by the intercept.
    pub beta: Vec<T>,
    pub converged: bool,
    pub separation_detected: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl<T: Real> ProbitFit<T> {
    pub fn slopes(&self) -> &[T] {
        &self.beta[..self.beta.len() - 1]
    }

    pub fn intercept(&self) -> T {
        self.beta[self.beta.len() - 1]
    }
}

/// `log Φ(s)` and `φ(s)/Φ(s)`, stable far into the lower tail.
fn log_cdf_and_ratio(s: f64) -> (f64, f64) {
    if s > -30.0 {
        let c = norm_cdf(s);
        (c.ln(), norm_pdf(s) / c)
    } else {
        // asymptotic Mills ratio
        let r = -s / (1.0 - 1.0 / (s * s) + 3.0 / s.powi(4));
        (-0.5 * s * s - (-s).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln(), r)
    }
}

fn probit_loglik(x: &Matrix<f64>, d: &[u8], beta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let s = dot(x.row(i), beta);
            let sign = if d[i] == 1 { 1.0 } else { -1.0 };
            log_cdf_and_ratio(sign * s).0
        })
        .sum()
}

/// Probit maximum likelihood with an intercept appended to `x`.
///
/// Newton steps with step halving; capped at 50 iterations. Complete or
/// quasi-complete separation shows up as a coefficient beyond `1e3` or a
/// log-likelihood near zero; the fit is then returned as is, flagged.
pub fn fit_probit_mle<T: Real>(x: &Matrix<T>, d: &[u8]) -> Result<ProbitFit<T>> {
    if x.rows() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: d.len(),
        });
    }
    let ones = d.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == d.len() {
        return Err(Error::AllSameOutcome);
    }
    let k = x.cols() + 1;
    let mut data = Vec::with_capacity(x.rows() * k);
    for i in 0..x.rows() {
        data.extend(x.row(i).iter().map(|v| v.as_f64()));
        data.push(1.0);
    }
    let xa = Matrix::from_vec(x.rows(), k, data)?;

    let mut beta = vec![0.0; k];
    beta[k - 1] = norm_quantile(ones as f64 / d.len() as f64);
    let mut ll = probit_loglik(&xa, d, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut grad = vec![0.0; k];
        let mut info = Matrix::zeros(k, k);
        for i in 0..xa.rows() {
            let xi = xa.row(i);
            let s = dot(xi, &beta);
            let sign = if d[i] == 1 { 1.0 } else { -1.0 };
            let (_, lam) = log_cdf_and_ratio(sign * s);
            let g = sign * lam;
            // observed information weight: λ(λ + s·sign)
            let w = lam * (lam + sign * s);
            for j in 0..k {
                grad[j] += g * xi[j];
            }
            info.add_outer(xi, w.max(1e-300));
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-8 {
            converged = true;
            break;
        }
        let step = match info.cholesky() {
            Ok(c) => c.solve(&grad),
            Err(_) => break,
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cll = probit_loglik(&xa, d, &cand);
            if cll.is_finite() && cll >= ll - 1e-12 {
                beta = cand;
                ll = cll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || beta.iter().any(|b| b.abs() > SEPARATION_COEF) {
            break;
        }
    }
    let separation_detected = beta.iter().any(|b| b.abs() > SEPARATION_COEF) || ll > -1e-6;
    if separation_detected {
        log::warn!("probit: separation detected after {iterations} iterations");
    }
    Ok(ProbitFit {
        beta: beta.into_iter().map(T::lit).collect(),
        converged: converged && !separation_detected,
        separation_detected,
        iterations,
        log_likelihood: ll,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmtFit<T = f64> {
    /// Slopes followed by the intercept.
    pub coefficients: Vec<T>,
    pub residual_variance: T,
}

impl<T: Real> PmtFit<T> {
    pub fn slopes(&self) -> &[T] {
        &self.coefficients[..self.coefficients.len() - 1]
    }

    /// Predicted log expenditure (lower means poorer).
    pub fn predict(&self, x: &[T]) -> T {
        dot(x, self.slopes()) + self.coefficients[self.coefficients.len() - 1]
    }
}

/// Least squares of `y` on `x` plus an intercept.
pub fn fit_pmt_ols<T: Real>(x: &Matrix<T>, y: &[T]) -> Result<PmtFit<T>> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    let k = x.cols() + 1;
    if x.rows() <= k {
        return Err(Error::RankDeficient);
    }
    let mut xtx = Matrix::zeros(k, k);
    let mut xty = vec![0.0; k];
    let mut row = vec![0.0; k];
    for i in 0..x.rows() {
        for (r, v) in row.iter_mut().zip(x.row(i)) {
            *r = v.as_f64();
        }
        row[k - 1] = 1.0;
        xtx.add_outer(&row, 1.0);
        for j in 0..k {
            xty[j] += row[j] * y[i].as_f64();
        }
    }
    // relative pivot check catches exact collinearity that Cholesky rounding hides
    let chol = xtx.cholesky().map_err(|_| Error::RankDeficient)?;
    let l = chol.l();
    let max_diag = (0..k).map(|j| xtx[(j, j)]).fold(0.0, f64::max);
    if (0..k).any(|j| l[(j, j)] * l[(j, j)] < 1e-12 * max_diag) {
        return Err(Error::RankDeficient);
    }
    let coef = chol.solve(&xty);
    let mut rss = 0.0;
    for i in 0..x.rows() {
        let pred: f64 = x.row(i).iter().zip(&coef).map(|(a, b)| a.as_f64() * b).sum::<f64>() + coef[k - 1];
        rss += (y[i].as_f64() - pred).powi(2);
    }
    Ok(PmtFit {
        coefficients: coef.into_iter().map(T::lit).collect(),
        residual_variance: T::lit(rss / (x.rows() - k) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dichotomize_examples() {
        let order = ["a", "b", "c", "d", "e"];
        let s = RankingScheme::from_order("c", "r", &order).unwrap();
        let d: Vec<u8> = dichotomize(&s, 2).unwrap().into_iter().map(|(_, v)| v).collect();
        assert_eq!(d, vec![1, 1, 0, 0, 0]);
        assert!(dichotomize(&s, 5).unwrap().iter().all(|(_, v)| *v == 1));
        let one: Vec<_> = dichotomize(&s, 1).unwrap().into_iter().filter(|(_, v)| *v == 1).collect();
        assert_eq!(one, vec![("a".to_string(), 1)]);
        assert!(dichotomize(&s, 0).is_err() && dichotomize(&s, 6).is_err());
    }

    #[test]
    fn probit_examples() {
        let x = Matrix::<f64>::zeros(4, 0);
        let fit = fit_probit_mle(&x, &[0, 1, 0, 1]).unwrap();
        assert!(fit.converged && fit.intercept().abs() < 1e-10);

        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let fit = fit_probit_mle(&x, &[0, 1]).unwrap();
        assert!(fit.separation_detected && !fit.converged);
        assert!(fit.iterations <= MAX_ITER);

        assert!(matches!(fit_probit_mle(&x, &[1, 1]), Err(Error::AllSameOutcome)));
    }

    #[test]
    fn pmt_examples() {
        let x = Matrix::<f64>::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let fit = fit_pmt_ols(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((fit.slopes()[0] - 2.0).abs() < 1e-12 && fit.residual_variance.abs() < 1e-20);

        let x = Matrix::<f64>::from_rows(&[[-1.0], [1.0], [-1.0], [1.0]]).unwrap();
        let fit = fit_pmt_ols(&x, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert!(fit.slopes()[0].abs() < 1e-12);

        let x = Matrix::<f64>::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]]).unwrap();
        assert!(matches!(fit_pmt_ols(&x, &[1.0, 2.0, 3.0, 5.0]), Err(Error::RankDeficient)));
    }
}
