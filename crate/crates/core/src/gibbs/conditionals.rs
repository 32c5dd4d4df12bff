//! Parameters of every full conditional distribution of the sampler.
//!
//! Each function is pure: it reads the current state and returns the
//! distribution's parameters, leaving the draw to the sampler. That keeps
//! them checkable against a dense-matrix evaluation of the same formulas.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::real::Real;

use super::design::{Design, LatentState, SurveyBlock};

/// Mean and covariance of a multivariate normal conditional.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

/// Truncation bounds for the latent score at rank position `h` (0-based) of
/// one ranking: its neighbours' current values, open at the ends.
///
/// During a sweep in ascending rank order the lower neighbour has already
/// been redrawn and the upper one still holds the previous value.
pub fn latent_bounds<T: Real>(z: &[T], h: usize) -> (T, T) {
    let lower = if h == 0 { T::neg_infinity() } else { z[h - 1] };
    let upper = if h + 1 >= z.len() { T::infinity() } else { z[h + 1] };
    (lower, upper)
}

/// Per-household precision-weighted sums over all rankings:
/// `Σ_r ω_r` and `Σ_r ω_r (z_ir − offset_i)`.
fn weighted_sums<T: Real>(design: &Design<T>, state: &LatentState<T>, offset: &[T]) -> (Vec<T>, Vec<T>) {
    let n = design.n_households();
    let mut w = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    for (scheme, z) in design.schemes.iter().zip(&state.z) {
        let omega = state.omega[scheme.ranker];
        for (&i, &zi) in scheme.order.iter().zip(z) {
            w[i] = w[i] + omega;
            s[i] = s[i] + omega * (zi - offset[i]);
        }
    }
    (w, s)
}

/// Household random effects. The posterior covariance is diagonal because
/// each `α_i` enters only its own household's rows, so this returns the
/// elementwise `(means, variances)`.
pub fn alpha_params<T: Real>(design: &Design<T>, state: &LatentState<T>) -> (Vec<T>, Vec<T>) {
    let xd: Vec<T> = (0..design.n_households())
        .map(|i| dot(design.x.row(i), &state.delta))
        .collect();
    let (w, s) = weighted_sums(design, state, &xd);
    let var: Vec<T> = w.iter().map(|&wi| T::one() / (wi + T::one())).collect();
    let mean = s.iter().zip(&var).map(|(&si, &v)| si * v).collect();
    (mean, var)
}

/// Preference weights given the latent scores, random effects, precisions
/// and a normal prior `N(prior_mean, prior_cov)`.
pub fn delta_params<T: Real>(
    design: &Design<T>,
    state: &LatentState<T>,
    prior_mean: &[T],
    prior_cov: &Matrix<T>,
) -> Result<Gaussian<T>> {
    let p = design.n_covariates();
    let (_, s) = weighted_sums(design, state, &state.alpha);
    let prior_prec = prior_cov.spd_inverse()?;
    let mut precision = prior_prec.clone();
    let mut rhs = prior_prec.mul_vec(prior_mean);
    // Σ_i w_i x_i x_iᵀ grouped by ranker, since every row of ranker r has weight ω_r
    for (g, &omega) in design.ranker_gram.iter().zip(&state.omega) {
        precision = precision.add(&g.clone().scale(omega))?;
    }
    for i in 0..design.n_households() {
        let xi = design.x.row(i);
        for j in 0..p {
            rhs[j] = rhs[j] + xi[j] * s[i];
        }
    }
    gaussian_from_precision(precision, &rhs)
}

/// Survey coefficients (slopes then intercept) given `σ²_ψ` and a normal prior.
pub fn gamma_params<T: Real>(
    survey: &SurveyBlock<T>,
    sigma_psi: T,
    prior_mean: &[T],
    prior_cov: &Matrix<T>,
) -> Result<Gaussian<T>> {
    if !(sigma_psi > T::zero()) {
        return Err(Error::InvalidParam("survey noise variance must be positive".into()));
    }
    let inv = T::one() / sigma_psi;
    let prior_prec = prior_cov.spd_inverse()?;
    let precision = prior_prec.add(&survey.xtx.clone().scale(inv))?;
    let rhs: Vec<T> = prior_prec
        .mul_vec(prior_mean)
        .into_iter()
        .zip(&survey.xty)
        .map(|(a, &b)| a + b * inv)
        .collect();
    gaussian_from_precision(precision, &rhs)
}

fn gaussian_from_precision<T: Real>(precision: Matrix<T>, rhs: &[T]) -> Result<Gaussian<T>> {
    let chol = precision.cholesky()?;
    Ok(Gaussian {
        mean: chol.solve(rhs),
        cov: chol.inverse(),
    })
}

/// Posterior probabilities that ranker `r` has each precision in `support`,
/// evaluated in log space.
pub fn omega_probs<T: Real>(
    design: &Design<T>,
    state: &LatentState<T>,
    ranker: usize,
    support: &[T; 3],
    prior: &[T; 3],
) -> [T; 3] {
    let eta = design.linear_predictor(state);
    omega_probs_with(design, state, &eta, ranker, support, prior)
}

pub(crate) fn omega_probs_with<T: Real>(
    design: &Design<T>,
    state: &LatentState<T>,
    eta: &[T],
    ranker: usize,
    support: &[T; 3],
    prior: &[T; 3],
) -> [T; 3] {
    let mut n = 0usize;
    let mut ss = 0.0f64;
    for (scheme, z) in design.schemes.iter().zip(&state.z) {
        if scheme.ranker != ranker {
            continue;
        }
        for (&i, &zi) in scheme.order.iter().zip(z) {
            let e = (zi - eta[i]).as_f64();
            ss += e * e;
            n += 1;
        }
    }
    let mut logp = [f64::NEG_INFINITY; 3];
    for l in 0..3 {
        let a = prior[l].as_f64();
        if a > 0.0 {
            let w = support[l].as_f64();
            logp[l] = a.ln() + 0.5 * n as f64 * w.ln() - 0.5 * w * ss;
        }
    }
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let un: Vec<f64> = logp.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = un.iter().sum();
    [T::lit(un[0] / total), T::lit(un[1] / total), T::lit(un[2] / total)]
}

/// `(df, scale_sum)` of the survey noise variance's scaled-inverse-χ² conditional.
pub fn sigma_psi_params<T: Real>(survey: &SurveyBlock<T>, gamma: &[T]) -> (T, T) {
    let rss: T = survey
        .y
        .iter()
        .enumerate()
        .map(|(m, &y)| {
            let r = y - dot(survey.x.row(m), gamma);
            r * r
        })
        .sum();
    (T::one() + T::lit(survey.y.len() as f64), rss + T::one())
}

/// Elementwise `(means, variance)` of the shared prior mean `μ`.
/// `gamma` holds the survey slopes only.
pub fn mu_params<T: Real>(delta: &[T], gamma: &[T], sigma: T) -> (Vec<T>, T) {
    let prec = T::lit(2.0) / sigma + T::one();
    let var = T::one() / prec;
    let mean = delta
        .iter()
        .zip(gamma)
        .map(|(&d, &g)| (d + g) / sigma * var)
        .collect();
    (mean, var)
}

/// `(df, scale_sum)` of the shared prior variance `Σ`.
/// `gamma` holds the survey slopes only.
pub fn sigma_hyper_params<T: Real>(delta: &[T], gamma: &[T], mu: &[T]) -> (T, T) {
    let dev = |v: &[T]| -> T { v.iter().zip(mu).map(|(&a, &m)| (a - m) * (a - m)).sum() };
    (
        T::one() + T::lit((gamma.len() + delta.len()) as f64),
        dev(gamma) + dev(delta) + T::one(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::design::SchemeLayout;

    fn design(x: Vec<Vec<f64>>, schemes: Vec<(usize, Vec<usize>)>, n_rankers: usize) -> Design<f64> {
        let n = x.len();
        Design::from_layout(
            (0..x[0].len()).map(|j| format!("x{j}")).collect(),
            (0..n).map(|i| format!("h{i}")).collect(),
            vec!["c".into(); n],
            Matrix::from_rows(&x).unwrap(),
            schemes
                .into_iter()
                .map(|(ranker, order)| SchemeLayout {
                    community_id: "c".into(),
                    ranker,
                    order,
                })
                .collect(),
            (0..n_rankers).map(|r| format!("r{r}")).collect(),
            None,
        )
        .unwrap()
    }

    fn state(d: &Design<f64>, z: Vec<Vec<f64>>) -> LatentState<f64> {
        let mut s = LatentState::initial(d);
        s.z = z;
        s
    }

    #[test]
    fn bounds_follow_neighbours() {
        // ranks {A:2, B:1, C:3}: ascending order is B, A, C
        let z = [-0.3, 0.5, 1.2];
        assert_eq!(latent_bounds(&z, 0), (f64::NEG_INFINITY, 0.5));
        assert_eq!(latent_bounds(&z, 1), (-0.3, 1.2));
        assert_eq!(latent_bounds(&z, 2), (0.5, f64::INFINITY));
        assert_eq!(latent_bounds(&[0.1], 0), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn alpha_examples() {
        let d = design(vec![vec![0.0]], vec![(0, vec![0])], 1);
        let s = state(&d, vec![vec![1.0]]);
        let (m, v) = alpha_params(&d, &s);
        assert!((m[0] - 0.5).abs() < 1e-15 && (v[0] - 0.5).abs() < 1e-15);

        let d = design(vec![vec![0.0]], vec![(0, vec![0]), (1, vec![0])], 2);
        let mut s = state(&d, vec![vec![1.0], vec![1.0]]);
        s.omega = vec![2.0, 2.0];
        let (m, v) = alpha_params(&d, &s);
        assert!((v[0] - 0.2).abs() < 1e-15 && (m[0] - 0.8).abs() < 1e-15);

        let s = state(&d, vec![vec![0.0], vec![0.0]]);
        assert_eq!(alpha_params(&d, &s).0, vec![0.0]);
    }

    #[test]
    fn delta_examples() {
        let d = design(vec![vec![1.0], vec![-1.0]], vec![(0, vec![1, 0])], 1);
        let s = state(&d, vec![vec![-1.0, 1.0]]);
        let g = delta_params(&d, &s, &[0.0], &Matrix::from_diagonal(&[6.25])).unwrap();
        assert!((g.cov[(0, 0)] - 1.0 / 2.16).abs() < 1e-12);
        assert!((g.mean[0] - 2.0 / 2.16).abs() < 1e-12);
        assert!((g.cov[(0, 0)] - 0.46296).abs() < 1e-5 && (g.mean[0] - 0.92593).abs() < 1e-5);

        let zero = state(&d, vec![vec![0.0, 0.0]]);
        let g = delta_params(&d, &zero, &[0.0], &Matrix::from_diagonal(&[6.25])).unwrap();
        assert_eq!(g.mean[0], 0.0);
    }

    #[test]
    fn delta_flat_prior_is_ols() {
        let x = vec![vec![1.0, 0.3], vec![0.2, -1.0], vec![-0.7, 0.4], vec![1.5, 1.1], vec![-0.1, 0.9]];
        let z = vec![0.4, -0.8, 0.1, 1.9, 0.6];
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap());
        let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
        let d = design(x.clone(), vec![(0, order)], 1);
        let s = state(&d, vec![zs]);
        let g = delta_params(&d, &s, &[0.0, 0.0], &Matrix::from_diagonal(&[1e8, 1e8])).unwrap();
        // OLS via 2x2 normal equations
        let (mut a, mut b, mut c, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (xi, zi) in x.iter().zip(&z) {
            a += xi[0] * xi[0];
            b += xi[0] * xi[1];
            c += xi[1] * xi[1];
            r0 += xi[0] * zi;
            r1 += xi[1] * zi;
        }
        let det = a * c - b * b;
        let ols = [(c * r0 - b * r1) / det, (a * r1 - b * r0) / det];
        assert!((g.mean[0] - ols[0]).abs() < 1e-4 && (g.mean[1] - ols[1]).abs() < 1e-4);
    }

    #[test]
    fn collinear_covariates_surface_as_error() {
        let d = design(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![(0, vec![0, 1])], 1);
        let s = state(&d, vec![vec![-1.0, 1.0]]);
        let flat = Matrix::from_diagonal(&[1e300, 1e300]);
        assert!(delta_params(&d, &s, &[0.0, 0.0], &flat).is_err());
    }

    #[test]
    fn gamma_examples() {
        let one = Matrix::<f64>::from_rows(&[[1.0]]).unwrap();
        let sb = SurveyBlock::new(vec!["a".into()], one.clone(), vec![2.0]).unwrap();
        let g = gamma_params(&sb, 1.0, &[0.0], &Matrix::identity(1)).unwrap();
        assert!((g.mean[0] - 1.0).abs() < 1e-15 && (g.cov[(0, 0)] - 0.5).abs() < 1e-15);
        let sb0 = SurveyBlock::new(vec!["a".into()], one, vec![0.0]).unwrap();
        assert_eq!(gamma_params(&sb0, 1.0, &[0.0], &Matrix::identity(1)).unwrap().mean[0], 0.0);
        assert!(gamma_params(&sb0, 0.0, &[0.0], &Matrix::identity(1)).is_err());
    }

    #[test]
    fn omega_examples() {
        let d = design(vec![vec![0.0]], vec![(0, vec![0])], 1);
        let s = state(&d, vec![vec![0.0]]);
        let support = [0.5, 1.0, 2.0];
        let p = omega_probs(&d, &s, 0, &support, &[1.0, 0.0, 0.0]);
        assert_eq!(p, [1.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        let p = omega_probs(&d, &s, 0, &support, &[third; 3]);
        let expect = [0.2265, 0.3204, 0.4531];
        for l in 0..3 {
            assert!((p[l] - expect[l]).abs() < 1e-4, "{p:?}");
        }
        let order: Vec<usize> = (0..20).collect();
        let d = design(vec![vec![0.0]; 20], vec![(0, order)], 1);
        let s = state(&d, vec![(0..20).map(|i| -10.0 + i as f64).collect()]);
        let p = omega_probs(&d, &s, 0, &support, &[third; 3]);
        assert!(p[0] > 0.999);
    }

    #[test]
    fn variance_and_mean_examples() {
        let sb = SurveyBlock::new(
            vec!["a".into(), "b".into()],
            Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
            vec![1.0, -1.0],
        )
        .unwrap();
        assert_eq!(sigma_psi_params(&sb, &[0.0]), (3.0, 3.0));
        let sb = SurveyBlock::new(vec!["a".into(); 10], Matrix::from_rows(&[[1.0]; 10]).unwrap(), vec![2.0; 10]).unwrap();
        assert_eq!(sigma_psi_params(&sb, &[2.0]), (11.0, 1.0));

        let (m, v) = mu_params::<f64>(&[1.0], &[3.0], 1.0);
        assert!((m[0] - 4.0 / 3.0).abs() < 1e-15 && (v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mu_params(&[0.0], &[0.0], 1.0).0, vec![0.0]);
        let (m, v) = mu_params::<f64>(&[1.0], &[3.0], 1e12);
        assert!(m[0].abs() < 1e-9 && (v - 1.0).abs() < 1e-9);

        assert_eq!(sigma_hyper_params(&[1.0], &[1.0], &[1.0]), (3.0, 1.0));
        assert_eq!(sigma_hyper_params(&[2.0], &[0.0], &[1.0]), (3.0, 3.0));
    }
}
