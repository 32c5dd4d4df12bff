use std::path::Path;

use crate::data::io::{read_table, write_table};
use crate::error::{Error, Result};
use crate::real::Real;

use super::design::{Design, LatentState};
use super::spec::{McmcConfig, ModelSpec};

/// Name used for the survey intercept in summaries and dumps.
pub const INTERCEPT: &str = "(intercept)";

/// Posterior summary of one coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSummary<T = f64> {
    pub name: String,
    pub mean: T,
    pub sd: T,
    pub q025: T,
    pub q975: T,
}

/// Retained draws of one chain, one entry per kept iteration.
///
/// Blocks that were inactive in the fitted model are `None`.
#[derive(Clone, Debug)]
pub struct PosteriorSamples<T = f64> {
    pub covariate_names: Vec<String>,
    pub ranker_ids: Vec<String>,
    /// Ranked households, aligned with each `alpha` draw.
    pub household_ids: Vec<String>,
    pub household_communities: Vec<String>,
    pub omega_support: [T; 3],
    pub elite_cols: Vec<usize>,
    pub prior_source: String,
    pub config: McmcConfig,
    pub delta: Vec<Vec<T>>,
    pub alpha: Option<Vec<Vec<T>>>,
    pub omega: Option<Vec<Vec<T>>>,
    /// Slopes followed by the intercept.
    pub gamma: Option<Vec<Vec<T>>>,
    pub sigma_psi: Option<Vec<T>>,
    pub mu: Option<Vec<Vec<T>>>,
    pub sigma: Option<Vec<T>>,
    /// Latent scores per draw, per scheme, in ascending-rank order.
    pub latent: Option<Vec<Vec<Vec<T>>>>,
}

impl<T: Real> PosteriorSamples<T> {
    pub(crate) fn empty(design: &Design<T>, spec: &ModelSpec<T>, cfg: &McmcConfig) -> Self {
        let b = cfg.retained();
        Self {
            covariate_names: design.covariate_names.clone(),
            ranker_ids: design.ranker_ids.clone(),
            household_ids: design.household_ids.clone(),
            household_communities: design.household_communities.clone(),
            omega_support: spec.omega_support,
            elite_cols: spec.elite_cols.clone(),
            prior_source: spec.prior_source.clone(),
            config: *cfg,
            delta: Vec::with_capacity(b),
            alpha: opt(spec.multi_ranker, Vec::with_capacity(b)),
            omega: opt(spec.multi_ranker, Vec::with_capacity(b)),
            gamma: opt(spec.auxiliary, Vec::with_capacity(b)),
            sigma_psi: opt(spec.auxiliary, Vec::with_capacity(b)),
            mu: opt(spec.auxiliary, Vec::with_capacity(b)),
            sigma: opt(spec.auxiliary, Vec::with_capacity(b)),
            latent: opt(cfg.retain_latent, Vec::with_capacity(b)),
        }
    }

    pub(crate) fn push(&mut self, s: &LatentState<T>, latent: bool) {
        self.delta.push(s.delta.clone());
        if let Some(v) = &mut self.alpha {
            v.push(s.alpha.clone());
        }
        if let Some(v) = &mut self.omega {
            v.push(s.omega.clone());
        }
        if let Some(v) = &mut self.gamma {
            v.push(s.gamma.clone());
        }
        if let Some(v) = &mut self.sigma_psi {
            v.push(s.sigma_psi);
        }
        if let Some(v) = &mut self.mu {
            v.push(s.mu.clone());
        }
        if let Some(v) = &mut self.sigma {
            v.push(s.sigma);
        }
        if latent {
            if let Some(v) = &mut self.latent {
                v.push(s.z.clone());
            }
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let bad = |name: &str| Err(Error::DivergentChain(format!("non-finite {name} draw")));
        let rows_ok = |v: &Option<Vec<Vec<T>>>| v.iter().flatten().flatten().all(|x| x.is_finite());
        let flat_ok = |v: &Option<Vec<T>>| v.iter().flatten().all(|x| x.is_finite());
        if !self.delta.iter().flatten().all(|x| x.is_finite()) {
            return bad("delta");
        }
        if !rows_ok(&self.alpha) {
            return bad("alpha");
        }
        if !rows_ok(&self.gamma) {
            return bad("gamma");
        }
        if !rows_ok(&self.mu) {
            return bad("mu");
        }
        if !flat_ok(&self.sigma_psi) || !flat_ok(&self.sigma) {
            return bad("variance");
        }
        Ok(())
    }

    /// Number of retained draws `B`.
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    /// Posterior mean `δ̂`, the targeting weights.
    pub fn delta_mean(&self) -> Vec<T> {
        column_means(&self.delta, self.n_covariates())
    }

    /// Draws of coefficient `j` of `δ`.
    pub fn delta_column(&self, j: usize) -> Vec<T> {
        self.delta.iter().map(|d| d[j]).collect()
    }

    pub fn delta_summary(&self) -> Vec<CoefficientSummary<T>> {
        summarize(&self.delta, &self.covariate_names)
    }

    pub fn gamma_summary(&self) -> Option<Vec<CoefficientSummary<T>>> {
        let mut names = self.covariate_names.clone();
        names.push(INTERCEPT.into());
        self.gamma.as_ref().map(|g| summarize(g, &names))
    }

    /// Posterior mean of each household's random effect, aligned with
    /// `household_ids`; zeros when the model had none.
    pub fn alpha_mean(&self) -> Vec<T> {
        match &self.alpha {
            Some(a) => column_means(a, self.household_ids.len()),
            None => vec![T::zero(); self.household_ids.len()],
        }
    }

    /// Posterior mean precision per ranker (aligned with `ranker_ids`).
    pub fn omega_mean(&self) -> Option<Vec<T>> {
        self.omega.as_ref().map(|o| column_means(o, self.ranker_ids.len()))
    }

    /// Share of draws at each support value for ranker index `r`.
    pub fn omega_frequencies(&self, r: usize) -> Option<[f64; 3]> {
        let draws = self.omega.as_ref()?;
        let mut counts = [0usize; 3];
        for d in draws {
            let v = d[r].as_f64();
            let l = (0..3)
                .min_by(|&a, &b| {
                    let da = (self.omega_support[a].as_f64() - v).abs();
                    let db = (self.omega_support[b].as_f64() - v).abs();
                    da.total_cmp(&db)
                })
                .expect("three support values");
            counts[l] += 1;
        }
        let n = draws.len().max(1) as f64;
        Some(counts.map(|c| c as f64 / n))
    }

    /// Writes one row per retained draw with columns `delta:<name>`,
    /// `omega:<ranker>`, `gamma:<name>`, `sigma_psi`, `mu:<name>`, `sigma`
    /// for the blocks present.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header: Vec<String> = self.covariate_names.iter().map(|n| format!("delta:{n}")).collect();
        if self.omega.is_some() {
            header.extend(self.ranker_ids.iter().map(|r| format!("omega:{r}")));
        }
        if self.gamma.is_some() {
            header.extend(self.covariate_names.iter().map(|n| format!("gamma:{n}")));
            header.push(format!("gamma:{INTERCEPT}"));
            header.push("sigma_psi".into());
            header.extend(self.covariate_names.iter().map(|n| format!("mu:{n}")));
            header.push("sigma".into());
        }
        let rows = (0..self.len()).map(|b| {
            let mut row: Vec<String> = self.delta[b].iter().map(|v| fmt(*v)).collect();
            if let Some(o) = &self.omega {
                row.extend(o[b].iter().map(|v| fmt(*v)));
            }
            if let (Some(g), Some(s), Some(m), Some(sg)) = (&self.gamma, &self.sigma_psi, &self.mu, &self.sigma) {
                row.extend(g[b].iter().map(|v| fmt(*v)));
                row.push(fmt(s[b]));
                row.extend(m[b].iter().map(|v| fmt(*v)));
                row.push(fmt(sg[b]));
            }
            row
        });
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(path, &header, rows)
    }

    /// Reads a dump written by [`PosteriorSamples::write_csv`]. Household
    /// effects are not part of the dump, so `alpha` comes back empty.
    pub fn read_csv(path: impl AsRef<Path>, omega_support: [T; 3]) -> Result<Self> {
        let path = path.as_ref();
        let (header, rows) = read_table(path)?;
        let parse = |row: usize, col: usize, s: &str| -> Result<T> {
            s.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Parse {
                path: path.display().to_string(),
                message: format!("row {}: `{}` in column `{}` is not a number", row + 2, s, header[col]),
            })
        };
        let cols = |prefix: &str| -> Vec<(usize, String)> {
            header
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.strip_prefix(prefix).map(|n| (i, n.to_string())))
                .collect()
        };
        let delta_cols = cols("delta:");
        if delta_cols.is_empty() {
            return Err(Error::MissingColumn("delta:*".into()));
        }
        let omega_cols = cols("omega:");
        let gamma_cols = cols("gamma:");
        let mu_cols = cols("mu:");
        let find = |name: &str| header.iter().position(|h| h == name);
        let (sp_col, sg_col) = (find("sigma_psi"), find("sigma"));

        let grab = |cs: &[(usize, String)], r: usize, row: &[String]| -> Result<Vec<T>> {
            cs.iter().map(|(c, _)| parse(r, *c, &row[*c])).collect()
        };
        let mut delta = Vec::with_capacity(rows.len());
        let mut omega = Vec::new();
        let mut gamma = Vec::new();
        let mut mu = Vec::new();
        let mut sigma_psi = Vec::new();
        let mut sigma = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            delta.push(grab(&delta_cols, r, row)?);
            omega.push(grab(&omega_cols, r, row)?);
            gamma.push(grab(&gamma_cols, r, row)?);
            mu.push(grab(&mu_cols, r, row)?);
            if let Some(c) = sp_col {
                sigma_psi.push(parse(r, c, &row[c])?);
            }
            if let Some(c) = sg_col {
                sigma.push(parse(r, c, &row[c])?);
            }
        }
        let names = |cs: &[(usize, String)]| cs.iter().map(|(_, n)| n.clone()).collect::<Vec<_>>();
        let b = rows.len();
        Ok(Self {
            covariate_names: names(&delta_cols),
            ranker_ids: names(&omega_cols),
            household_ids: Vec::new(),
            household_communities: Vec::new(),
            omega_support,
            elite_cols: Vec::new(),
            prior_source: path.display().to_string(),
            config: McmcConfig::new(b, 0, 0),
            delta,
            alpha: None,
            omega: opt(!omega_cols.is_empty(), omega),
            gamma: opt(!gamma_cols.is_empty(), gamma),
            sigma_psi: opt(sp_col.is_some(), sigma_psi),
            mu: opt(!mu_cols.is_empty(), mu),
            sigma: opt(sg_col.is_some(), sigma),
            latent: None,
        })
    }
}

fn opt<V>(on: bool, v: V) -> Option<V> {
    on.then_some(v)
}

fn fmt<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

fn column_means<T: Real>(rows: &[Vec<T>], k: usize) -> Vec<T> {
    let n = T::lit(rows.len().max(1) as f64);
    let mut acc = vec![T::zero(); k];
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a = *a + v;
        }
    }
    acc.into_iter().map(|a| a / n).collect()
}

fn summarize<T: Real>(rows: &[Vec<T>], names: &[String]) -> Vec<CoefficientSummary<T>> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j].as_f64()).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = if col.len() > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            col.sort_by(f64::total_cmp);
            CoefficientSummary {
                name: name.clone(),
                mean: T::lit(mean),
                sd: T::lit(var.sqrt()),
                q025: T::lit(quantile_sorted(&col, 0.025)),
                q975: T::lit(quantile_sorted(&col, 0.975)),
            }
        })
        .collect()
}

/// Linear-interpolation quantile (R type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.025) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn summary_of_known_draws() {
        let rows = vec![vec![0.0], vec![2.0]];
        let s = summarize(&rows, &["a".to_string()]);
        assert_eq!(s[0].mean, 1.0);
        assert!((s[0].sd - 2f64.sqrt()).abs() < 1e-12);
    }
}
