//! The `k x k` systems every sampler step factorizes:
//! `Q(theta) + (1 / tau2) A(s)' A(s)`, optionally restricted to a subset of
//! observations, all assembled on one fixed sparsity pattern.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::{CholFactor, SparseSymMatrix, SymbolicCholesky};
use crate::mesh::ProjectionMatrix;
use crate::spde::{MaternParams, SpdePrecision};

/// Positions of the six entries of `A_i' A_i` in the shared pattern, with the
/// multiplier each product carries (2 when an off-diagonal pair lands on the
/// diagonal because two columns coincide).
#[derive(Clone, Copy, Debug)]
struct PointSlots {
    slots: [usize; 6],
    mult: [f64; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 0), (2, 0), (2, 1)];

#[derive(Clone, Debug)]
pub struct LatentSystem {
    spde: Arc<SpdePrecision>,
    pattern: SparseSymMatrix,
    q_slots: Vec<usize>,
    points: Vec<PointSlots>,
    symbolic: Arc<SymbolicCholesky>,
}

impl LatentSystem {
    pub fn new(spde: Arc<SpdePrecision>, a: &ProjectionMatrix) -> Result<Self> {
        let k = spde.dim();
        let mut triplets = Vec::with_capacity(a.nrows() * 6);
        for i in 0..a.nrows() {
            let (c, _) = a.row(i);
            for (s, t) in PAIRS {
                triplets.push((c[s], c[t], 0.0));
            }
        }
        let data = SparseSymMatrix::from_triplets(k, &triplets)?;
        let (pattern, q_slots, _) = spde.pattern().union_pattern(&data)?;
        let symbolic = if pattern.same_pattern(spde.pattern()) {
            Arc::clone(spde.symbolic())
        } else {
            Arc::new(SymbolicCholesky::analyze(&pattern))
        };
        let points = (0..a.nrows())
            .map(|i| {
                let (c, _) = a.row(i);
                let mut slots = [0usize; 6];
                let mut mult = [1.0; 6];
                for (e, (s, t)) in PAIRS.into_iter().enumerate() {
                    slots[e] = pattern.position(c[s], c[t]).expect("pattern covers data term");
                    if s != t && c[s] == c[t] {
                        mult[e] = 2.0;
                    }
                }
                PointSlots { slots, mult }
            })
            .collect();
        Ok(Self { spde, pattern, q_slots, points, symbolic })
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn spde(&self) -> &Arc<SpdePrecision> {
        &self.spde
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// `Q(theta)` on the shared pattern.
    pub fn prior(&self, theta: MaternParams) -> SparseSymMatrix {
        let mut values = vec![0.0; self.pattern.nnz()];
        for (slot, v) in self.q_slots.iter().zip(self.spde.values(theta)) {
            values[*slot] = v;
        }
        self.pattern.with_values(values).expect("lengths agree")
    }

    /// `Q(theta) + (1 / tau2) sum_{i in rows} A_i' A_i`; all rows when `rows`
    /// is `None`.
    pub fn conditional(
        &self,
        theta: MaternParams,
        a: &ProjectionMatrix,
        rows: Option<&[usize]>,
        tau2: f64,
    ) -> SparseSymMatrix {
        let mut m = self.prior(theta);
        let inv = 1.0 / tau2;
        let values = m.values_mut();
        let mut add = |i: usize| {
            let (_, w) = a.row(i);
            let ps = &self.points[i];
            for (e, (s, t)) in PAIRS.into_iter().enumerate() {
                values[ps.slots[e]] += ps.mult[e] * w[s] * w[t] * inv;
            }
        };
        match rows {
            Some(rows) => rows.iter().for_each(|&i| add(i)),
            None => (0..a.nrows()).for_each(add),
        }
        m
    }

    pub fn factorize(&self, m: &SparseSymMatrix) -> Result<CholFactor> {
        self.symbolic.factorize(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundingBox, Point};

    #[test]
    fn conditional_matches_dense_assembly() {
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 3000.0, 2000.0).unwrap(), 500.0, 0.0).unwrap();
        let spde = Arc::new(SpdePrecision::from_mesh(&mesh).unwrap());
        let pts = vec![
            Point::new(120.0, 80.0),
            Point::new(1500.0, 1000.0),
            Point::new(2999.0, 1999.0),
            Point::new(500.0, 500.0),
        ];
        let a = mesh.projection_matrix(&pts).unwrap();
        let sys = LatentSystem::new(Arc::clone(&spde), &a).unwrap();
        let theta = MaternParams::new(0.7, 900.0).unwrap();
        let rows = [0usize, 1, 3];
        let m = sys.conditional(theta, &a, Some(&rows), 0.25).to_dense();
        let sub = a.select_rows(&rows).to_dense();
        let oracle = spde.precision(theta).to_dense() + sub.transpose() * &sub / 0.25;
        assert!((m - oracle).amax() < 1e-10);
    }

    #[test]
    fn indicator_rows_hit_the_diagonal_once() {
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 2000.0, 2000.0).unwrap(), 1000.0, 0.0).unwrap();
        let spde = Arc::new(SpdePrecision::from_mesh(&mesh).unwrap());
        let a = ProjectionMatrix::indicator(mesh.num_vertices(), &[4, 4, 2]).unwrap();
        let sys = LatentSystem::new(Arc::clone(&spde), &a).unwrap();
        let theta = MaternParams::new(1.0, 1000.0).unwrap();
        let diff = sys.conditional(theta, &a, None, 1.0).to_dense() - spde.precision(theta).to_dense();
        assert!((diff[(4, 4)] - 2.0).abs() < 1e-12);
        assert!((diff[(2, 2)] - 1.0).abs() < 1e-12);
        assert!((diff.sum() - 3.0).abs() < 1e-12);
    }
}
