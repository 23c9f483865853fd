//! Browser bindings: covariance of the mesh field against the exact Matérn
//! curve, a simulated field on a grid, and a two-class membership map.
//!
//! Build with `wasm-pack build crates/geomix-wasm --target web --out-dir www/pkg`
//! and serve `www/`.

use geomix::linalg::cholesky;
use geomix::mesh::{build_mesh, BoundingBox, Mesh, Point};
use geomix::mixture::logistic;
use geomix::simulate::sample_field;
use geomix::spde::{matern_cov, MaternParams, SpdePrecision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Side of the square demo domain in meters.
const DOMAIN: f64 = 10_000.0;

fn theta(sigma2: f64, phi: f64) -> Result<MaternParams, String> {
    MaternParams::new(sigma2, phi).map_err(|e| e.to_string())
}

/// Distances along the lattice axis from the central vertex, with the exact
/// Matérn covariance and the covariance implied by the mesh precision, as
/// flat `[d, exact, mesh, d, exact, mesh, ...]`.
///
/// The lattice has `per_range` vertices per range and extends four ranges
/// from the center in each direction.
#[wasm_bindgen]
pub fn covariance_profile(sigma2: f64, phi: f64, per_range: u32) -> Result<Vec<f64>, String> {
    let theta = theta(sigma2, phi)?;
    let per_range = per_range.clamp(2, 12) as f64;
    let spacing = phi / per_range;
    let half = 4.0 * phi;
    let bbox = BoundingBox::new(-half, -half, half, half).map_err(|e| e.to_string())?;
    let mesh = build_mesh(bbox, spacing, 0.0).map_err(|e| e.to_string())?;
    let center = nearest_vertex(&mesh, Point::new(0.0, 0.0));
    let spde = SpdePrecision::from_mesh(&mesh).map_err(|e| e.to_string())?;
    let factor = cholesky(&spde.precision(theta)).map_err(|e| e.to_string())?;
    let mut unit = vec![0.0; mesh.num_vertices()];
    unit[center] = 1.0;
    let column = factor.solve(&unit).map_err(|e| e.to_string())?;

    let origin = mesh.vertices()[center];
    let mut rows: Vec<(f64, usize)> = mesh
        .vertices()
        .iter()
        .enumerate()
        .filter(|(_, v)| (v.y - origin.y).abs() < 1e-6 * spacing && v.x >= origin.x && v.x - origin.x <= 2.5 * phi)
        .map(|(j, v)| (v.x - origin.x, j))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows.into_iter().flat_map(|(d, j)| [d, matern_cov(d, theta), column[j]]).collect())
}

fn nearest_vertex(mesh: &Mesh, p: Point) -> usize {
    mesh.vertices().iter().enumerate().min_by(|a, b| a.1.distance(p).total_cmp(&b.1.distance(p))).map_or(0, |(j, _)| j)
}

/// Mesh covering the demo domain with a buffer of one range.
fn demo_mesh(phi: f64) -> Result<Mesh, String> {
    let bbox = BoundingBox::new(0.0, 0.0, DOMAIN, DOMAIN).map_err(|e| e.to_string())?;
    let spacing = (phi / 5.0).clamp(DOMAIN / 60.0, DOMAIN / 10.0);
    build_mesh(bbox, spacing, phi.min(DOMAIN)).map_err(|e| e.to_string())
}

/// Cell centers of a `cells x cells` grid over the domain, row 0 north.
fn grid(cells: u32) -> Vec<Point> {
    let n = cells.clamp(4, 256) as usize;
    let size = DOMAIN / n as f64;
    (0..n * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            Point::new((c as f64 + 0.5) * size, DOMAIN - (r as f64 + 0.5) * size)
        })
        .collect()
}

fn field_on_grid(sigma2: f64, phi: f64, cells: u32, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, String> {
    let theta = theta(sigma2, phi)?;
    let mesh = demo_mesh(phi)?;
    let spde = SpdePrecision::from_mesh(&mesh).map_err(|e| e.to_string())?;
    let w = sample_field(&spde, theta, rng).map_err(|e| e.to_string())?;
    let a = mesh.projection_matrix(&grid(cells)).map_err(|e| e.to_string())?;
    a.mul_vec(&w).map_err(|e| e.to_string())
}

/// One draw of a zero-mean Matérn field on a `cells x cells` grid
/// (row-major, first row north).
#[wasm_bindgen]
pub fn simulate_field(sigma2: f64, phi: f64, cells: u32, seed: u64) -> Result<Vec<f64>, String> {
    field_on_grid(sigma2, phi, cells, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Class-1 probabilities `logistic(mu + eta)` of a membership field followed
/// by one Bernoulli label per cell; `2 * cells^2` values.
#[wasm_bindgen]
pub fn class_map(mu: f64, sigma2: f64, phi: f64, cells: u32, seed: u64) -> Result<Vec<f64>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = field_on_grid(sigma2, phi, cells, &mut rng)?;
    let pi: Vec<f64> = eta.iter().map(|e| logistic(mu + e)).collect();
    let labels: Vec<f64> = pi.iter().map(|&p| f64::from(u8::from(rng.random::<f64>() < p))).collect();
    Ok(pi.into_iter().chain(labels).collect())
}
