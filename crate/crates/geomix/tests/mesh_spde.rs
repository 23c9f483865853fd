use geomix::linalg::cholesky;
use geomix::mesh::{build_mesh, BoundingBox, Location, Mesh, Point};
use geomix::spde::{assemble_fem, matern_cov, pc_log_prior, MaternParams, PcPrior, SpdePrecision};
use geomix::Error;
use proptest::prelude::*;

// x K1(x) at x = sqrt(8) r, from 30-digit mpmath.
const MATERN_AT_HALF_RANGE: f64 = 0.444_342_523_632_236_04;
const MATERN_AT_RANGE: f64 = 0.139_667_474_015_293_14;
const MATERN_AT_TWO_RANGES: f64 = 0.011_070_734_099_161_846;

fn theta(sigma2: f64, phi: f64) -> MaternParams {
    MaternParams::new(sigma2, phi).unwrap()
}

#[test]
fn matern_matches_high_precision_bessel() {
    let t = theta(1.0, 1000.0);
    for (d, want) in [(500.0, MATERN_AT_HALF_RANGE), (1000.0, MATERN_AT_RANGE), (2000.0, MATERN_AT_TWO_RANGES)] {
        let got = matern_cov(d, t);
        assert!((got - want).abs() < 1e-12 * want.max(1e-3), "d = {d}: {got} vs {want}");
    }
    assert!(matern_cov(10_000.0, t) < 1e-9);
}

#[test]
fn matern_is_decreasing_and_linear_in_variance() {
    let t = theta(2.5, 700.0);
    let mut prev = f64::INFINITY;
    for i in 0..400 {
        let d = i as f64 * 10.0;
        let c = matern_cov(d, t);
        assert!(c < prev || (i == 0 && c == 2.5));
        assert!((c - 2.5 * matern_cov(d, theta(1.0, 700.0))).abs() < 1e-14);
        prev = c;
    }
}

#[test]
fn paper_scale_mesh_vertex_count() {
    let bbox = BoundingBox::new(0.0, 0.0, 85_000.0, 115_000.0).unwrap();
    let mesh = build_mesh(bbox, 1000.0, 7000.0).unwrap();
    let k = mesh.num_vertices() as f64;
    assert!((k / 12_870.0 - 1.0).abs() < 0.05, "k = {k}");
    let hull = mesh.bounding_box();
    assert!(hull.xmin <= -7000.0 && hull.ymin <= -7000.0);
    assert!(hull.xmax >= 92_000.0 && hull.ymax >= 122_000.0);
    assert!(mesh.max_edge_length() <= 1000.0 * 2f64.sqrt() + 1e-9);
}

#[test]
fn degenerate_inputs_are_rejected() {
    let bbox = BoundingBox { xmin: 0.0, ymin: 0.0, xmax: 0.0, ymax: 10.0 };
    assert!(matches!(build_mesh(bbox, 1.0, 0.0), Err(Error::InvalidGeometry(_))));
    let ok = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    assert!(matches!(build_mesh(ok, 0.0, 0.0), Err(Error::InvalidGeometry(_))));
}

#[test]
fn outside_point_is_reported_by_index() {
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), 5.0, 0.0).unwrap();
    let pts = [Point::new(1.0, 1.0), Point::new(11.0, 1.0)];
    assert!(matches!(mesh.projection_matrix(&pts), Err(Error::PointOutsideMesh { index: 1, .. })));
}

#[test]
fn triangles_tile_the_hull() {
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 730.0, 410.0).unwrap(), 100.0, 50.0).unwrap();
    let area: f64 = (0..mesh.triangles().len()).map(|t| mesh.triangle_area(t)).sum();
    let hull = mesh.bounding_box();
    assert!((area - hull.width() * hull.height()).abs() < 1e-6 * area);
    assert!((0..mesh.triangles().len()).all(|t| mesh.triangle_area(t) > 0.0));
}

#[test]
fn unit_triangle_fem() {
    let mesh =
        Mesh::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)], vec![[0, 1, 2]]).unwrap();
    let fem = assemble_fem(&mesh).unwrap();
    for m in &fem.c_lumped {
        assert!((m - 1.0 / 6.0).abs() < 1e-15);
    }
    let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            assert!((fem.g.get(i, j) - w).abs() < 1e-15);
        }
    }
}

#[test]
fn pc_prior_tails_and_mass() {
    let prior = PcPrior::new(1.0, 0.01, 2000.0, 0.01).unwrap();
    assert!((prior.lambda_sigma() - 4.605_170_185_988_091).abs() < 1e-12);
    assert!((prior.lambda_phi() - 9_210.340_371_976_183).abs() < 1e-8);

    // Composite Simpson on a substitution that maps the half-line to (0, 1).
    let integrate = |f: &dyn Fn(f64) -> f64, a: f64, scale: f64| -> f64 {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let g = |u: f64| {
            // The right end is a limit; the range density's tail keeps it
            // non-zero.
            let u = u.min(1.0 - 1e-12);
            let x = a + scale * u / (1.0 - u);
            scale * f(x) / (1.0 - u).powi(2)
        };
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let dens_sigma = |s: f64| prior.log_density_sigma(s).exp();
    let dens_phi = |p: f64| if p > 0.0 { prior.log_density_phi(p).exp() } else { 0.0 };
    assert!((integrate(&dens_sigma, 0.0, 1.0) - 1.0).abs() < 1e-6);
    assert!((integrate(&dens_sigma, 1.0, 1.0) - 0.01).abs() < 1e-8);
    assert!((integrate(&dens_phi, 0.0, 2000.0) - 1.0).abs() < 1e-6);
    assert!((1.0 - integrate(&dens_phi, 2000.0, 2000.0) - 0.01).abs() < 1e-8);
    assert!((-(-prior.lambda_phi() / 2000.0f64).exp().ln() - 0.01f64.ln().abs()).abs() < 1e-12);

    let t = theta(0.64, 1500.0);
    let joint = pc_log_prior(t, &prior);
    assert!((joint - prior.log_density_sigma(0.8) - prior.log_density_phi(1500.0)).abs() < 1e-14);
}

/// Dense inverse of `Q` on a small lattice against the Matérn covariance.
fn worst_interior_error(phi: f64, per_range: f64, extent: f64) -> (f64, f64) {
    let spacing = phi / per_range;
    let side = extent * phi;
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, side, side).unwrap(), spacing, 0.0).unwrap();
    let t = theta(1.3, phi);
    let q = SpdePrecision::from_mesh(&mesh).unwrap().precision(t);
    let f = cholesky(&q).unwrap();
    let c = Point::new(side / 2.0, side / 2.0);
    let center = (0..mesh.num_vertices())
        .min_by(|&i, &j| mesh.vertices()[i].distance(c).total_cmp(&mesh.vertices()[j].distance(c)))
        .unwrap();
    let c = mesh.vertices()[center];
    let mut e = vec![0.0; mesh.num_vertices()];
    e[center] = 1.0;
    let col = f.solve(&e).unwrap();
    let mut worst_cov: f64 = 0.0;
    for (j, p) in mesh.vertices().iter().enumerate() {
        let d = p.distance(c);
        if d <= 2.0 * phi {
            let m = matern_cov(d, t);
            worst_cov = worst_cov.max((col[j] - m).abs() / m);
        }
    }
    (worst_cov, (col[center] / 1.3 - 1.0).abs())
}

#[test]
fn mesh_covariance_tracks_matern_on_fine_lattice() {
    let (cov, var) = worst_interior_error(400.0, 10.0, 6.0);
    assert!(cov < 0.10, "worst relative covariance error {cov}");
    assert!(var < 0.10, "marginal variance error {var}");
}

#[test]
fn lattice_error_shrinks_with_resolution() {
    // Lumped-mass discretization inflates the variance; at 5 spacings per
    // range the inflation is about 16%.
    let errors: Vec<f64> = [5.0, 8.0, 12.0].iter().map(|&r| worst_interior_error(300.0, r, 6.0).1).collect();
    assert!(errors[0] > 0.10 && errors[1] < 0.10 && errors[2] < errors[1], "{errors:?}");
}

#[test]
fn precision_scales_with_inverse_variance() {
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap(), 100.0, 0.0).unwrap();
    let spde = SpdePrecision::from_mesh(&mesh).unwrap();
    let q1 = spde.precision(theta(1.0, 300.0));
    let q2 = spde.precision(theta(2.0, 300.0));
    for (a, b) in q1.values().iter().zip(q2.values()) {
        assert!((a - 2.0 * b).abs() <= 1e-12 * a.abs());
    }
}

fn random_mesh(nx: usize, ny: usize, jitter: f64, seed: u64) -> Mesh {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = build_mesh(BoundingBox::new(0.0, 0.0, nx as f64, ny as f64).unwrap(), 1.0, 0.0).unwrap();
    // Interior vertices move by less than half a cell, keeping orientation.
    let verts = base
        .vertices()
        .iter()
        .map(|p| {
            let interior = p.x > 0.0 && p.y > 0.0 && p.x < nx as f64 && p.y < ny as f64;
            if interior {
                Point::new(p.x + jitter * (rng.random::<f64>() - 0.5), p.y + jitter * (rng.random::<f64>() - 0.5))
            } else {
                *p
            }
        })
        .collect();
    Mesh::new(verts, base.triangles().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rows_are_a_partition_of_unity(nx in 1usize..8, ny in 1usize..8, seed in any::<u64>(), jitter in 0.0f64..0.4) {
        use rand::{Rng, SeedableRng};
        let mesh = random_mesh(nx, ny, jitter, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
        let pts: Vec<Point> = (0..1000)
            .map(|_| Point::new(rng.random::<f64>() * nx as f64, rng.random::<f64>() * ny as f64))
            .collect();
        let a = mesh.projection_matrix(&pts).unwrap();
        for i in 0..pts.len() {
            let (_, w) = a.row(i);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn affine_fields_interpolate_exactly(
        nx in 1usize..8, ny in 1usize..8, seed in any::<u64>(), jitter in 0.0f64..0.4,
        c0 in -10.0f64..10.0, c1 in -10.0f64..10.0, c2 in -10.0f64..10.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mesh = random_mesh(nx, ny, jitter, seed);
        let f = |p: &Point| c0 + c1 * p.x + c2 * p.y;
        let w: Vec<f64> = mesh.vertices().iter().map(f).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 2);
        let pts: Vec<Point> = (0..200)
            .map(|_| Point::new(rng.random::<f64>() * nx as f64, rng.random::<f64>() * ny as f64))
            .collect();
        let a = mesh.projection_matrix(&pts).unwrap();
        let got = a.mul_vec(&w).unwrap();
        for (p, g) in pts.iter().zip(got) {
            prop_assert!((g - f(p)).abs() < 1e-12 * (1.0 + f(p).abs()) * 10.0);
        }
    }

    #[test]
    fn location_is_deterministic(nx in 1usize..6, ny in 1usize..6, i in 0usize..36, j in 0usize..36) {
        // Vertices and edge midpoints are the tie cases.
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, nx as f64, ny as f64).unwrap(), 1.0, 0.0).unwrap();
        let p = Point::new((i % (2 * nx + 1)) as f64 * 0.5, (j % (2 * ny + 1)) as f64 * 0.5);
        let a = mesh.locate(p);
        prop_assert_eq!(a, mesh.locate(p));
        let inside = matches!(a, Location::Inside { .. });
        prop_assert!(inside);
    }

    #[test]
    fn precision_is_positive_definite(sigma2 in 0.01f64..100.0, per_spacing in 1.0f64..40.0) {
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 2000.0, 1500.0).unwrap(), 100.0, 0.0).unwrap();
        let q = SpdePrecision::from_mesh(&mesh).unwrap().precision(theta(sigma2, 100.0 * per_spacing));
        let f = cholesky(&q).unwrap();
        prop_assert_eq!(f.jitter(), 0.0);
    }

    #[test]
    fn stiffness_rows_sum_to_zero(nx in 1usize..8, ny in 1usize..8, seed in any::<u64>(), jitter in 0.0f64..0.4) {
        let mesh = random_mesh(nx, ny, jitter, seed);
        let fem = assemble_fem(&mesh).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        for r in fem.g.mul_vec(&ones).unwrap() {
            prop_assert!(r.abs() < 1e-10);
        }
        prop_assert!(fem.c_lumped.iter().all(|&m| m > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn covariance_consistency_across_ranges(per_range in 8.0f64..20.0) {
        let (cov, var) = worst_interior_error(300.0, per_range, 6.0);
        prop_assert!(cov < 0.10 && var < 0.10, "cov {} var {}", cov, var);
    }
}
