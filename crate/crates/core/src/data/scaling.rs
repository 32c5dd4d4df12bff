use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Binary,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnScale<T> {
    pub kind: ColumnKind,
    pub divisor: T,
}

/// Per-column divisors so the same scaling can be applied to other data.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingInfo<T> {
    pub columns: Vec<ColumnScale<T>>,
}

impl<T: Real> ScalingInfo<T> {
    /// Scaling that leaves every column untouched.
    pub fn identity(p: usize) -> Self {
        Self {
            columns: vec![
                ColumnScale {
                    kind: ColumnKind::Continuous,
                    divisor: T::one(),
                };
                p
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn apply_row(&self, x: &mut [T]) {
        for (v, c) in x.iter_mut().zip(&self.columns) {
            *v = *v / c.divisor;
        }
    }

    pub fn apply(&self, raw: &Matrix<T>) -> Result<Matrix<T>> {
        if raw.cols() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: raw.cols(),
            });
        }
        let mut out = raw.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        Ok(out)
    }

    /// Maps coefficients estimated on scaled covariates back to raw units.
    pub fn unscale_coefficients(&self, coefs: &[T]) -> Vec<T> {
        coefs
            .iter()
            .zip(&self.columns)
            .map(|(&b, c)| b / c.divisor)
            .collect()
    }
}

/// Divides continuous columns by twice their sample standard deviation and
/// leaves 0/1 columns alone, so a unit change is comparable across columns.
///
/// `names` is only used for error messages and may be empty.
pub fn standardize_covariates<T: Real>(raw: &Matrix<T>, names: &[String]) -> Result<(Matrix<T>, ScalingInfo<T>)> {
    standardize_covariates_with(raw, names, &BTreeMap::new())
}

/// As [`standardize_covariates`], with column kinds forced by name instead
/// of detected from the values.
pub fn standardize_covariates_with<T: Real>(
    raw: &Matrix<T>,
    names: &[String],
    kinds: &BTreeMap<String, ColumnKind>,
) -> Result<(Matrix<T>, ScalingInfo<T>)> {
    let n = raw.rows();
    if n < 2 {
        return Err(Error::InvalidParam("standardization needs at least 2 rows".into()));
    }
    let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
    let mut columns = Vec::with_capacity(raw.cols());
    for j in 0..raw.cols() {
        let col = raw.column(j);
        let mean = col.iter().copied().sum::<T>() / T::lit(n as f64);
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::lit((n - 1) as f64);
        if !(var > T::zero()) {
            return Err(Error::ZeroVarianceColumn(name(j)));
        }
        let binary = match names.get(j).and_then(|n| kinds.get(n)) {
            Some(&k) => k == ColumnKind::Binary,
            None => col.iter().all(|&v| v == T::zero() || v == T::one()),
        };
        columns.push(if binary {
            ColumnScale {
                kind: ColumnKind::Binary,
                divisor: T::one(),
            }
        } else {
            ColumnScale {
                kind: ColumnKind::Continuous,
                divisor: T::lit(2.0) * var.sqrt(),
            }
        });
    }
    let info = ScalingInfo { columns };
    let scaled = info.apply(raw)?;
    Ok((scaled, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let (s, info) = standardize_covariates(&col(&[0.0, 1.0, 1.0, 0.0]), &[]).unwrap();
        assert_eq!(s.column(0), vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(info.columns[0].kind, ColumnKind::Binary);

        let (s, info) = standardize_covariates(&col(&[0.0, 2.0, 4.0]), &[]).unwrap();
        assert_eq!(s.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(info.columns[0].divisor, 4.0);
        assert_eq!(info.columns[0].kind, ColumnKind::Continuous);

        let err = standardize_covariates(&col(&[5.0, 5.0, 5.0]), &["hhsize".to_string()]).unwrap_err();
        assert!(matches!(err, Error::ZeroVarianceColumn(ref c) if c == "hhsize"));
    }

    proptest! {
        #[test]
        fn reapplying_info_reproduces_scaled(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 3..20)) {
            let raw = Matrix::from_rows(&rows).unwrap();
            if let Ok((scaled, info)) = standardize_covariates(&raw, &[]) {
                prop_assert_eq!(info.apply(&raw).unwrap(), scaled);
            }
        }
    }
}
