//! Point-referenced observations and covariate centering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundingBox, Point};

/// Footprint observations: location, orbit label, log-scale response and
/// `p` covariates per point.
#[derive(Clone, Debug)]
pub struct FootprintTable {
    pub ids: Vec<u64>,
    pub coords: Vec<Point>,
    pub orbits: Vec<i64>,
    pub response: Vec<f64>,
    /// `n x p`.
    pub covariates: DMatrix<f64>,
}

impl FootprintTable {
    pub fn new(
        ids: Vec<u64>,
        coords: Vec<Point>,
        orbits: Vec<i64>,
        response: Vec<f64>,
        covariates: DMatrix<f64>,
    ) -> Result<Self> {
        let n = coords.len();
        for (len, what) in [
            (ids.len(), "FootprintTable ids"),
            (orbits.len(), "FootprintTable orbits"),
            (response.len(), "FootprintTable response"),
            (covariates.nrows(), "FootprintTable covariates"),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len, context: what });
            }
        }
        if coords.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
            return Err(Error::InvalidParameter("coordinates must be finite".into()));
        }
        if response.iter().any(|v| !v.is_finite()) || covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("responses and covariates must be finite".into()));
        }
        Ok(Self { ids, coords, orbits, response, covariates })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        BoundingBox::around(&self.coords)
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i]).collect(),
            coords: rows.iter().map(|&i| self.coords[i]).collect(),
            orbits: rows.iter().map(|&i| self.orbits[i]).collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
            covariates: self.covariates.select_rows(rows),
        }
    }

    /// Distinct orbit labels in increasing order.
    pub fn distinct_orbits(&self) -> Vec<i64> {
        let mut o = self.orbits.clone();
        o.sort_unstable();
        o.dedup();
        o
    }
}

/// Column means (and optionally standard deviations) removed from the
/// covariates before fitting; reapplied to prediction covariates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub means: Vec<f64>,
    pub scales: Option<Vec<f64>>,
}

impl Centering {
    pub fn fit(x: &DMatrix<f64>, standardize: bool) -> Self {
        let n = x.nrows().max(1) as f64;
        let means: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
        let scales = standardize.then(|| {
            x.column_iter()
                .zip(&means)
                .map(|(c, m)| {
                    let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    if var > 0.0 {
                        var.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect()
        });
        Self { means, scales }
    }

    pub fn identity(p: usize) -> Self {
        Self { means: vec![0.0; p], scales: None }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: x.ncols(),
                context: "Centering::apply",
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let s = self.scales.as_ref().map_or(1.0, |s| s[j]);
            for v in col.iter_mut() {
                *v = (*v - self.means[j]) / s;
            }
        }
        Ok(out)
    }
}

/// `[1, X]`.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut xt = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    xt.view_mut((0, 1), (x.nrows(), x.ncols())).copy_from(x);
    xt
}
