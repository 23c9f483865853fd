//! Matérn (ν = 1) fields through the SPDE/GMRF representation on a mesh.
//!
//! With `kappa = sqrt(8) / phi` and `tau2 = 1 / (4 pi kappa^2 sigma2)` the
//! precision on the mesh vertices is
//!
//! ```text
//! Q = tau2 * (kappa^4 C + 2 kappa^2 G + G C^{-1} G)
//! ```
//!
//! where `C` is the lumped mass matrix and `G` the linear-element stiffness
//! matrix. `sigma2` is then the marginal variance of the continuous field.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseSymMatrix, SymbolicCholesky};
use crate::mesh::Mesh;

/// Variance and range of a Matérn field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub phi: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, phi: f64) -> Result<Self> {
        let p = Self { sigma2, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite() && self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("Matérn parameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        8f64.sqrt() / self.phi
    }
}

/// Modified Bessel function of the second kind, order one, for `x > 0`.
///
/// Trapezoidal quadrature of `K1(x) = int_0^inf exp(-x cosh t) cosh t dt`;
/// the integrand is analytic in a strip, so a fixed step of 0.05 is accurate
/// to rounding.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k1 requires x > 0");
    const H: f64 = 0.05;
    let mut sum = 0.5 * (-x).exp();
    let mut t = H;
    loop {
        let c = t.cosh();
        let term = (-x * c).exp() * c;
        sum += term;
        if term < 1e-18 * sum || x * c > 800.0 {
            break;
        }
        t += H;
    }
    sum * H
}

/// Matérn covariance with smoothness one at `distance`.
pub fn matern_cov(distance: f64, theta: MaternParams) -> f64 {
    let x = 8f64.sqrt() * distance / theta.phi;
    if x < 1e-8 {
        return theta.sigma2;
    }
    theta.sigma2 * x * bessel_k1(x)
}

/// Penalized-complexity prior thresholds: `P(sigma > sigma0) = alpha_sigma`
/// and `P(phi < phi0) = alpha_phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcPrior {
    pub sigma0: f64,
    pub alpha_sigma: f64,
    pub phi0: f64,
    pub alpha_phi: f64,
}

impl PcPrior {
    pub fn new(sigma0: f64, alpha_sigma: f64, phi0: f64, alpha_phi: f64) -> Result<Self> {
        let p = Self { sigma0, alpha_sigma, phi0, alpha_phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |a: f64| a > 0.0 && a < 1.0;
        if !(self.sigma0 > 0.0 && self.phi0 > 0.0 && prob(self.alpha_sigma) && prob(self.alpha_phi)) {
            return Err(Error::InvalidParameter(format!("invalid PC prior {self:?}")));
        }
        Ok(())
    }

    pub fn lambda_sigma(&self) -> f64 {
        -self.alpha_sigma.ln() / self.sigma0
    }

    pub fn lambda_phi(&self) -> f64 {
        -self.alpha_phi.ln() * self.phi0
    }

    /// Density of the standard deviation, `lambda exp(-lambda sigma)`.
    pub fn log_density_sigma(&self, sigma: f64) -> f64 {
        let l = self.lambda_sigma();
        l.ln() - l * sigma
    }

    /// Density of the range, `lambda phi^{-2} exp(-lambda / phi)`.
    pub fn log_density_phi(&self, phi: f64) -> f64 {
        let l = self.lambda_phi();
        l.ln() - 2.0 * phi.ln() - l / phi
    }
}

/// `log pi(sigma) + log pi(phi)` evaluated at `sigma = sqrt(sigma2)`.
pub fn pc_log_prior(theta: MaternParams, prior: &PcPrior) -> f64 {
    prior.log_density_sigma(theta.sigma2.sqrt()) + prior.log_density_phi(theta.phi)
}

/// Lumped mass (diagonal) and stiffness matrices of linear elements.
#[derive(Clone, Debug)]
pub struct FemMatrices {
    pub c_lumped: Vec<f64>,
    pub g: SparseSymMatrix,
}

/// Element stiffness matrix of one triangle, `grad(phi_a) . grad(phi_b) |T|`.
pub fn element_stiffness(p: [crate::mesh::Point; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
    let edge = |a: usize| {
        let (u, v) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        (v.x - u.x, v.y - u.y)
    };
    let e = [edge(0), edge(1), edge(2)];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (e[a].0 * e[b].0 + e[a].1 * e[b].1) / (4.0 * area.abs());
        }
    }
    k
}

pub fn assemble_fem(mesh: &Mesh) -> Result<FemMatrices> {
    let k = mesh.num_vertices();
    let mut c = vec![0.0; k];
    let mut triplets = Vec::with_capacity(mesh.triangles().len() * 6);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = tri.map(|v| mesh.vertices()[v]);
        let area = mesh.triangle_area(t);
        let scale = pts[0].distance(pts[1]).max(pts[1].distance(pts[2])).max(pts[2].distance(pts[0]));
        if !(area > 1e-12 * scale * scale) {
            return Err(Error::DegenerateTriangle { triangle: t, area });
        }
        for &v in tri {
            c[v] += area / 3.0;
        }
        let ke = element_stiffness(pts);
        for a in 0..3 {
            for b in 0..=a {
                let (i, j) = (tri[a], tri[b]);
                // Off-diagonal element entries appear once per unordered pair.
                triplets.push((i, j, ke[a][b]));
            }
        }
    }
    let g = SparseSymMatrix::from_triplets(k, &triplets)?;
    Ok(FemMatrices { c_lumped: c, g })
}

/// Precomputed pattern and value components of `Q(theta)` for one mesh.
///
/// The pattern covers second-order neighbours and is shared by every
/// precision built from this template, so one symbolic factorization serves
/// all of them.
#[derive(Clone, Debug)]
pub struct SpdePrecision {
    pattern: SparseSymMatrix,
    c_part: Vec<f64>,
    g_part: Vec<f64>,
    gcg_part: Vec<f64>,
    symbolic: Arc<SymbolicCholesky>,
}

impl SpdePrecision {
    pub fn new(fem: &FemMatrices) -> Result<Self> {
        let k = fem.c_lumped.len();
        if fem.g.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: fem.g.dim(), context: "SpdePrecision::new" });
        }
        // Full adjacency of G for the product G C^-1 G.
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for (i, j, v) in fem.g.iter() {
            adj[j].push((i, v));
            if i != j {
                adj[i].push((j, v));
            }
        }
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; k];
        let mut touched = vec![false; k];
        let mut list = Vec::new();
        for i in 0..k {
            for &(l, gil) in &adj[i] {
                let s = gil / fem.c_lumped[l];
                for &(j, glj) in &adj[l] {
                    if j < i {
                        continue;
                    }
                    if !touched[j] {
                        touched[j] = true;
                        list.push(j);
                    }
                    acc[j] += s * glj;
                }
            }
            for &j in &list {
                triplets.push((j, i, acc[j]));
                acc[j] = 0.0;
                touched[j] = false;
            }
            list.clear();
        }
        let gcg = SparseSymMatrix::from_triplets(k, &triplets)?;
        let (pattern, gcg_pos, g_pos) = gcg.union_pattern(&fem.g)?;
        let mut pattern = pattern;
        let nnz = pattern.nnz();
        let mut gcg_part = vec![0.0; nnz];
        for (p, v) in gcg_pos.iter().zip(gcg.values()) {
            gcg_part[*p] = *v;
        }
        let mut g_part = vec![0.0; nnz];
        for (p, v) in g_pos.iter().zip(fem.g.values()) {
            g_part[*p] = *v;
        }
        let mut c_part = vec![0.0; nnz];
        for (j, &cj) in fem.c_lumped.iter().enumerate() {
            let p = pattern.position(j, j).expect("diagonal present");
            c_part[p] = cj;
        }
        pattern.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let symbolic = Arc::new(SymbolicCholesky::analyze(&pattern));
        Ok(Self { pattern, c_part, g_part, gcg_part, symbolic })
    }

    pub fn from_mesh(mesh: &Mesh) -> Result<Self> {
        Self::new(&assemble_fem(mesh)?)
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// The shared sparsity pattern (all values zero).
    pub fn pattern(&self) -> &SparseSymMatrix {
        &self.pattern
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// Values of `Q(theta)` aligned with [`Self::pattern`].
    pub fn values(&self, theta: MaternParams) -> Vec<f64> {
        let kappa2 = 8.0 / (theta.phi * theta.phi);
        let tau2 = 1.0 / (4.0 * PI * kappa2 * theta.sigma2);
        let (a, b) = (tau2 * kappa2 * kappa2, 2.0 * tau2 * kappa2);
        self.c_part.iter().zip(&self.g_part).zip(&self.gcg_part).map(|((c, g), h)| a * c + b * g + tau2 * h).collect()
    }

    pub fn precision(&self, theta: MaternParams) -> SparseSymMatrix {
        self.pattern.with_values(self.values(theta)).expect("template lengths agree")
    }
}

/// `Q(theta)` for a set of FEM matrices.
pub fn precision(theta: MaternParams, fem: &FemMatrices) -> Result<SparseSymMatrix> {
    Ok(SpdePrecision::new(fem)?.precision(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundingBox, Point};

    #[test]
    fn covariance_at_zero_is_variance() {
        let theta = MaternParams::new(2.5, 1000.0).unwrap();
        assert_eq!(matern_cov(0.0, theta), 2.5);
    }

    #[test]
    fn covariance_vanishes_far_away() {
        let theta = MaternParams::new(1.0, 1000.0).unwrap();
        assert!(matern_cov(10_000.0, theta) < 1e-9);
    }

    #[test]
    fn unit_right_triangle_elements() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let k = element_stiffness(pts);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((k[a][b] - expect[a][b]).abs() < 1e-15);
            }
        }
        let mesh = Mesh::new(pts.to_vec(), vec![[0, 1, 2]]).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        for c in &fem.c_lumped {
            assert!((c - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 5000.0, 3000.0).unwrap(), 700.0, 300.0).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        for r in fem.g.mul_vec(&ones).unwrap() {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn precision_scales_inversely_with_variance() {
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 4000.0, 4000.0).unwrap(), 1000.0, 0.0).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let q1 = precision(MaternParams::new(1.0, 2000.0).unwrap(), &fem).unwrap();
        let q2 = precision(MaternParams::new(2.0, 2000.0).unwrap(), &fem).unwrap();
        for (a, b) in q1.values().iter().zip(q2.values()) {
            assert!((a - 2.0 * b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn pc_rates() {
        let prior = PcPrior::new(1.0, 0.01, 2000.0, 0.01).unwrap();
        assert!((prior.lambda_sigma() - 4.605_170_185_988_091).abs() < 1e-12);
        assert!((prior.lambda_phi() - 9_210.340_371_976_183).abs() < 1e-8);
        assert!(PcPrior::new(1.0, 1.0, 1.0, 0.5).is_err());
    }
}
