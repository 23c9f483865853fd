//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use geomix::data::{with_intercept, FootprintTable};
use geomix::linalg::cholesky;
use geomix::mesh::{build_mesh, BoundingBox, Mesh, Point};
use geomix::mixture::{
    fit_mixture, label_frequencies, newton_raphson_mode, LogisticSystem, LogisticTarget, MixtureConfig,
};
use geomix::predict::{
    cpo_scores, log_cpo_transformed, make_folds, predict, predictive_log_densities, quantile_sorted, total_log_cpo,
    CvScheme, FittedModel, Transform,
};
use geomix::simulate::{simulate_design, simulate_response, DesignSpec, OrbitSpec, ProcessTruth, TruthParams};
use geomix::spde::{matern_cov, MaternParams, PcPrior, SpdePrecision};
use geomix::typical::{fit_typical, mean_params_for, McmcConfig, SpatialInputs, TypicalConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

struct Outcome {
    pass: bool,
    detail: String,
}

/// A criterion name and the check that decides it.
type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn theta(sigma2: f64, phi: f64) -> MaternParams {
    MaternParams::new(sigma2, phi).unwrap()
}

fn calibration_prior() -> PcPrior {
    PcPrior::new(3.0, 0.05, 500.0, 0.05).unwrap()
}

/// Equal-tailed 90% interval of `draws` contains `truth`.
fn covers(mut draws: Vec<f64>, truth: f64) -> bool {
    draws.sort_by(f64::total_cmp);
    quantile_sorted(&draws, 0.05) <= truth && truth <= quantile_sorted(&draws, 0.95)
}

fn shifted_intercept(p: &ProcessTruth, means: &[f64]) -> f64 {
    p.mu + p.beta.iter().zip(means).map(|(b, m)| b * m).sum::<f64>()
}

/// 9 km square with two crossing orbits and two covariate bands.
fn scene(tracks: usize) -> (DesignSpec, Mesh) {
    let domain = BoundingBox::new(0.0, 0.0, 9000.0, 9000.0).unwrap();
    let spec = DesignSpec {
        domain,
        tracks_per_orbit: tracks,
        along_track_spacing: 60.0,
        across_track_spacing: 600.0,
        orbits: vec![OrbitSpec { azimuth: 10.0, anchor: None }, OrbitSpec { azimuth: 170.0, anchor: None }],
        covariate_fields: vec![theta(1.0, 3000.0); 2],
        raster_cellsize: 100.0,
    };
    (spec, build_mesh(domain, 500.0, 500.0).unwrap())
}

fn mixture_truth() -> ([ProcessTruth; 2], ProcessTruth) {
    let process = |mu: f64, beta: [f64; 2], sigma2: f64, phi: f64, tau2: f64| ProcessTruth {
        mu,
        beta: beta.to_vec(),
        theta: theta(sigma2, phi),
        tau2,
    };
    (
        [process(1.0, [0.1, 0.1], 0.1, 1500.0, 0.05), process(3.0, [0.3, -0.2], 0.2, 2000.0, 0.05)],
        process(0.0, [1.0, 0.5], 2.25, 2000.0, 0.0),
    )
}

fn mixed_data(spec: &DesignSpec, mesh: &Mesh, seed: u64) -> (FootprintTable, geomix::simulate::TruthRecord) {
    let (classes, membership) = mixture_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = simulate_design(spec, mesh, &mut rng).unwrap();
    simulate_response(&design, mesh, &TruthParams::Mixture { classes, membership }, &mut rng).unwrap()
}

fn spde_fidelity() -> Outcome {
    let start = Instant::now();
    let phi = 400.0;
    let t = theta(1.0, phi);
    let side = 6.0 * phi;
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, side, side).unwrap(), phi / 10.0, 0.0).unwrap();
    let k = mesh.num_vertices();
    let factor = cholesky(&SpdePrecision::from_mesh(&mesh).unwrap().precision(t)).unwrap();
    let centre = Point::new(side / 2.0, side / 2.0);
    let verts = mesh.vertices();
    let (mut worst_cov, mut worst_var, mut pairs) = (0.0f64, 0.0f64, 0usize);
    for (i, vi) in verts.iter().enumerate().filter(|(_, v)| v.distance(centre) <= 0.3 * phi) {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        let column = factor.solve(&e).unwrap();
        worst_var = worst_var.max((column[i] - 1.0).abs());
        for (j, vj) in verts.iter().enumerate() {
            let d = vi.distance(*vj);
            if d <= 2.0 * phi {
                let m = matern_cov(d, t);
                worst_cov = worst_cov.max((column[j] - m).abs() / m);
                pairs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_cov <= 0.10 && worst_var <= 0.10 && secs < 30.0,
        format!(
            "k = {k}, {pairs} pairs within 2 ranges: worst covariance error {:.1}%, variance error {:.1}%, {secs:.1} s",
            100.0 * worst_cov,
            100.0 * worst_var
        ),
    )
}

fn range_anchor() -> Outcome {
    let r = matern_cov(1000.0, theta(1.0, 1000.0));
    outcome((r - 0.1398).abs() <= 0.0005, format!("correlation at the range = {r:.6}"))
}

fn typical_calibration() -> Outcome {
    let start = Instant::now();
    let (spec, mesh) = scene(7);
    let truth = ProcessTruth { mu: 5.0, beta: vec![1.0, -0.5], theta: theta(1.0, 2000.0), tau2: 0.3 };
    let (mut hit, mut total, mut n) = (0, 0, 0);
    for r in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
        let design = simulate_design(&spec, &mesh, &mut rng).unwrap();
        let (data, _) =
            simulate_response(&design, &mesh, &TruthParams::Typical { process: truth.clone() }, &mut rng).unwrap();
        n = data.len();
        let config =
            TypicalConfig { mcmc: McmcConfig::new(1000, 1000, r), prior: calibration_prior(), standardize: false };
        let d = fit_typical(&data, &mesh, &config).unwrap();
        let mu = shifted_intercept(&truth, &d.centering.means);
        let checks = [
            covers(d.states.iter().map(|s| s.mu).collect(), mu),
            covers(d.states.iter().map(|s| s.beta[0]).collect(), truth.beta[0]),
            covers(d.states.iter().map(|s| s.beta[1]).collect(), truth.beta[1]),
            covers(d.states.iter().map(|s| s.tau2).collect(), truth.tau2),
            covers(d.states.iter().map(|s| s.theta.sigma2).collect(), truth.theta.sigma2),
            covers(d.states.iter().map(|s| s.theta.phi).collect(), truth.theta.phi),
        ];
        hit += checks.iter().filter(|&&c| c).count();
        total += checks.len();
    }
    let secs = start.elapsed().as_secs_f64();
    let share = hit as f64 / total as f64;
    outcome(
        share >= 0.8 && secs < 1200.0,
        format!(
            "n = {n}, k = {}: 90% intervals cover {hit}/{total} ({:.1}%), {secs:.0} s",
            mesh.num_vertices(),
            100.0 * share
        ),
    )
}

fn mixture_calibration() -> Outcome {
    let start = Instant::now();
    let (spec, mesh) = scene(10);
    let (classes, _) = mixture_truth();
    let (mut hit, mut total) = (0, 0);
    let (mut agree, mut confident) = (0, 0);
    for r in 0..20u64 {
        let (data, rec) = mixed_data(&spec, &mesh, 200 + r);
        let config = MixtureConfig::new(McmcConfig::new(1000, 1000, r), calibration_prior());
        let d = fit_mixture(&data, &mesh, &config).unwrap();
        for (j, truth) in classes.iter().enumerate() {
            let values = |f: &dyn Fn(&geomix::mixture::MixtureState) -> f64| d.states.iter().map(f).collect::<Vec<_>>();
            let checks = [
                covers(values(&|s| s.classes[j].mu), shifted_intercept(truth, &d.centering.means)),
                covers(values(&|s| s.classes[j].beta[0]), truth.beta[0]),
                covers(values(&|s| s.classes[j].beta[1]), truth.beta[1]),
                covers(values(&|s| s.classes[j].tau2), truth.tau2),
                covers(values(&|s| s.classes[j].theta.sigma2), truth.theta.sigma2),
                covers(values(&|s| s.classes[j].theta.phi), truth.theta.phi),
            ];
            hit += checks.iter().filter(|&&c| c).count();
            total += checks.len();
        }
        let freq = label_frequencies(&d);
        for i in 0..data.len() {
            let pi = rec.pi[i];
            if (pi / (1.0 - pi)).ln().abs() > 1.0 {
                confident += 1;
                agree += usize::from((freq[i] > 0.5) == (rec.z[i] == 1));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let share = hit as f64 / total as f64;
    let labels = agree as f64 / confident as f64;
    outcome(
        share >= 0.8 && labels >= 0.9,
        format!(
            "90% intervals cover {hit}/{total} ({:.1}%), modal labels match {:.2}% of {confident} confident points, {secs:.0} s",
            100.0 * share,
            100.0 * labels
        ),
    )
}

fn laplace_derivatives() -> Outcome {
    let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap(), 200.0, 0.0).unwrap();
    let spde = SpdePrecision::from_mesh(&mesh).unwrap();
    let q = spde.precision(theta(1.5, 400.0));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 60;
    let pts: Vec<Point> =
        (0..n).map(|_| Point::new(rng.random::<f64>() * 1000.0, rng.random::<f64>() * 1000.0)).collect();
    let a = mesh.projection_matrix(&pts).unwrap();
    let xt = with_intercept(&DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() - 0.5));
    let z: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
    let system = LogisticSystem::new(&xt, Some(&a), Some(&q)).unwrap();
    let target = LogisticTarget { system: &system, xt: &xt, a: Some(&a), z: &z, prior: Some(&q) };
    let b: Vec<f64> = (0..system.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
    let h = 1e-5;
    let shifted = |j: usize, d: f64| {
        let mut c = b.clone();
        c[j] += d;
        c
    };
    let g = target.gradient(&b).unwrap();
    let prec = target.precision(&b).unwrap().to_dense();
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for j in 0..b.len() {
        let fd = (target.log_posterior(&shifted(j, h)).unwrap() - target.log_posterior(&shifted(j, -h)).unwrap())
            / (2.0 * h);
        worst_g = worst_g.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        let gp = target.gradient(&shifted(j, h)).unwrap();
        let gm = target.gradient(&shifted(j, -h)).unwrap();
        for i in 0..b.len() {
            let fd = -(gp[i] - gm[i]) / (2.0 * h);
            worst_h = worst_h.max((fd - prec[(i, j)]).abs() / prec[(i, i)].abs().max(prec[(j, j)].abs()).max(1.0));
        }
    }

    let ones = DMatrix::from_element(n, 1, 1.0);
    let flat = LogisticSystem::new(&ones, None, None).unwrap();
    let intercept = LogisticTarget { system: &flat, xt: &ones, a: None, z: &z, prior: None };
    let mode = newton_raphson_mode(&intercept, &[0.0]).unwrap().mode[0];
    let pbar = z.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let mode_err = (mode - (pbar / (1.0 - pbar)).ln()).abs();
    outcome(
        worst_g <= 1e-6 && worst_h <= 1e-6 && mode_err <= 1e-8,
        format!("gradient error {worst_g:.1e}, Hessian error {worst_h:.1e}, intercept mode error {mode_err:.1e}"),
    )
}

/// Small scene: about 200 footprints on two tracks per orbit.
fn small_scene() -> (DesignSpec, Mesh) {
    let domain = BoundingBox::new(0.0, 0.0, 3000.0, 3000.0).unwrap();
    let spec = DesignSpec {
        domain,
        tracks_per_orbit: 2,
        along_track_spacing: 60.0,
        across_track_spacing: 600.0,
        orbits: vec![OrbitSpec { azimuth: 10.0, anchor: None }, OrbitSpec { azimuth: 170.0, anchor: None }],
        covariate_fields: vec![theta(1.0, 1500.0)],
        raster_cellsize: 100.0,
    };
    (spec, build_mesh(domain, 500.0, 500.0).unwrap())
}

fn cpo_estimator() -> Outcome {
    let start = Instant::now();
    let (spec, mesh) = small_scene();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let design = simulate_design(&spec, &mesh, &mut rng).unwrap();
    let truth = ProcessTruth { mu: 2.0, beta: vec![0.5], theta: theta(0.5, 1500.0), tau2: 0.2 };
    let (data, _) = simulate_response(&design, &mesh, &TruthParams::Typical { process: truth }, &mut rng).unwrap();
    let n = data.len();
    let config = |draws: usize| TypicalConfig {
        mcmc: McmcConfig::new(1000, draws, 0),
        prior: calibration_prior(),
        standardize: false,
    };
    let a = mesh.projection_matrix(&data.coords).unwrap();
    let full = FittedModel::Typical(fit_typical(&data, &mesh, &config(4000)).unwrap());
    let cpo = cpo_scores(&full, &data, &a).unwrap();

    let mut close = 0;
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let refit = FittedModel::Typical(fit_typical(&data.subset(&rest), &mesh, &config(2000)).unwrap());
        let one = data.subset(&[i]);
        let ai = mesh.projection_matrix(&one.coords).unwrap();
        let loo = predictive_log_densities(&refit, &one.covariates, &ai, &one.response).unwrap()[0].exp();
        close += usize::from((cpo[i] / loo - 1.0).abs() <= 0.15);
    }
    let share = close as f64 / n as f64;

    // Model ordering on mixed data, on the model scale and after exp.
    let (mixed, _) = {
        let (classes, membership) = mixture_truth();
        let one_band = |p: &ProcessTruth| ProcessTruth { beta: p.beta[..1].to_vec(), ..p.clone() };
        let truth = TruthParams::Mixture {
            classes: [one_band(&classes[0]), one_band(&classes[1])],
            membership: one_band(&membership),
        };
        simulate_response(&design, &mesh, &truth, &mut rng).unwrap()
    };
    let am = mesh.projection_matrix(&mixed.coords).unwrap();
    let typical = FittedModel::Typical(fit_typical(&mixed, &mesh, &config(1000)).unwrap());
    let mixture = FittedModel::Mixture(
        fit_mixture(&mixed, &mesh, &MixtureConfig::new(McmcConfig::new(1000, 1000, 0), calibration_prior())).unwrap(),
    );
    let totals = |m: &FittedModel| {
        let base = total_log_cpo(&cpo_scores(m, &mixed, &am).unwrap()).unwrap();
        let exp: f64 = log_cpo_transformed(m, &mixed, &am, Transform::Exp).unwrap().iter().sum();
        (base, exp)
    };
    let (t_base, t_exp) = totals(&typical);
    let (m_base, m_exp) = totals(&mixture);
    let jacobian: f64 = mixed.response.iter().map(|&y| Transform::Exp.log_abs_derivative(y)).sum();
    let shift_err = ((t_base - t_exp) - jacobian).abs().max(((m_base - m_exp) - jacobian).abs());
    let same_order = (t_base < m_base) == (t_exp < m_exp);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        share >= 0.9 && same_order && shift_err <= 1e-8,
        format!(
            "n = {n}: CPO within 15% of refit density at {:.1}% of points; log CPO typical {t_base:.2} / mixture {m_base:.2}, \
             after exp {t_exp:.2} / {m_exp:.2}, shift error {shift_err:.1e}, {secs:.0} s",
            100.0 * share
        ),
    )
}

fn qualitative_reproduction() -> Outcome {
    let start = Instant::now();
    let (spec, mesh) = scene(10);
    let (mut wins, mut covered, mut held) = (0, [0.0, 0.0], 0.0);
    for r in 0..20u64 {
        let (data, _) = mixed_data(&spec, &mesh, 300 + r);
        let fold = make_folds(&data, CvScheme::Random10, r).unwrap().remove(0);
        let train = data.subset(&fold.train);
        let test = data.subset(&fold.test);
        let inputs = SpatialInputs::new(&mesh, &train).unwrap();
        let mcmc = McmcConfig::new(500, 500, r);
        let typical = geomix::predict::FitConfig::Typical(TypicalConfig {
            mcmc: mcmc.clone(),
            prior: calibration_prior(),
            standardize: false,
        });
        let mixture = geomix::predict::FitConfig::Mixture(MixtureConfig::new(mcmc, calibration_prior()));
        let a = mesh.projection_matrix(&test.coords).unwrap();
        let mut scores = [0.0; 2];
        for (m, config) in [typical, mixture].iter().enumerate() {
            let model = config.fit(&train, &inputs).unwrap();
            let pred = predict(&model, &test.covariates, &a, test.coords.clone(), r, 0).unwrap();
            let report = geomix::predict::evaluate(
                &pred,
                &test.response,
                Some(predictive_log_densities(&model, &test.covariates, &a, &test.response).unwrap()),
                "random-10",
            )
            .unwrap();
            scores[m] = report.total_log_density;
            covered[m] += report.coverage_95 * report.n as f64;
        }
        held += test.len() as f64;
        wins += usize::from(scores[1] > scores[0]);
    }
    let coverage = [covered[0] / held, covered[1] / held];
    let in_band = |c: f64| (0.92..=0.98).contains(&c);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        wins >= 18 && in_band(coverage[0]) && in_band(coverage[1]),
        format!(
            "mixture wins holdout log density in {wins}/20; 95% coverage typical {:.3}, mixture {:.3}, {secs:.0} s",
            coverage[0], coverage[1]
        ),
    )
}

fn woodbury() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..30 {
        let n = 10 + (case * 3) % 91;
        let cells = 1 + case % 6;
        let mesh = build_mesh(BoundingBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap(), 1000.0 / cells as f64, 0.0).unwrap();
        let q = SpdePrecision::from_mesh(&mesh)
            .unwrap()
            .precision(theta(0.2 + rng.random::<f64>() * 3.0, 100.0 + rng.random::<f64>() * 1500.0));
        let pts: Vec<Point> =
            (0..n).map(|_| Point::new(rng.random::<f64>() * 1000.0, rng.random::<f64>() * 1000.0)).collect();
        let a = mesh.projection_matrix(&pts).unwrap();
        let p = case % 4;
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0).collect();
        let tau2 = 0.01 + rng.random::<f64>() * 5.0;
        let sys = mean_params_for(&y, &x, &a, tau2, &q).unwrap();
        let ad = a.to_dense();
        let sigma = &ad * q.to_dense().try_inverse().unwrap() * ad.transpose() + DMatrix::identity(n, n) * tau2;
        let sinv = sigma.try_inverse().unwrap();
        let xt = with_intercept(&x);
        let g = xt.transpose() * &sinv * &xt;
        let h = xt.transpose() * &sinv * DVector::from_column_slice(&y);
        let rel = |d: f64, s: f64| d / s.max(1e-300);
        worst = worst.max(rel((&sys.precision - &g).abs().max(), g.abs().max()));
        worst = worst.max(rel((&sys.rhs - &h).abs().max(), h.abs().max()));
    }
    outcome(worst <= 1e-8, format!("30 problems with n <= 100, k <= 49: worst relative difference {worst:.1e}"))
}

#[derive(Deserialize)]
struct Score {
    coverage_95: f64,
}

fn geomix(args: &[&str]) -> i32 {
    geomix_cli::run(std::iter::once("geomix").chain(args.iter().copied()))
}

fn read_counts(dir: &Path) -> Vec<[usize; 4]> {
    let text = fs::read_to_string(dir.join("factorizations.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let v: Vec<usize> = l.split(',').map(|t| t.trim().parse().unwrap()).collect();
            [v[1], v[2], v[3], v[4]]
        })
        .collect()
}

fn determinism_and_scale() -> Outcome {
    let runs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut seconds = Vec::new();
    for dir in &runs {
        let out = dir.path().to_str().unwrap();
        let config = dir.path().join("run.toml");
        fs::write(&config, "seed = 2024\n").unwrap();
        let config = config.to_str().unwrap();
        let start = Instant::now();
        for cmd in ["simulate", "fit-mixture", "predict", "score"] {
            assert_eq!(geomix(&[cmd, "--config", config, "--out-dir", out]), 0, "{cmd} failed");
        }
        seconds.push(start.elapsed().as_secs_f64());
        assert_eq!(geomix(&["fit-typical", "--config", config, "--out-dir", out]), 0);
    }
    let files = [
        "footprints.csv",
        "mixture/chain_0/scalars.csv",
        "mixture/chain_0/w0.bin",
        "mixture/chain_0/w1.bin",
        "mixture/chain_0/wz.bin",
        "mixture/chain_0/z.bin",
        "mixture/prediction.txt",
        "typical/chain_0/scalars.csv",
        "typical/chain_0/w.bin",
    ];
    let identical =
        files.iter().all(|f| fs::read(runs[0].path().join(f)).unwrap() == fs::read(runs[1].path().join(f)).unwrap());
    let raster = geomix::io::read_raster(runs[0].path().join("mixture/prediction.txt")).unwrap();
    let score: Score = geomix::io::read_config(runs[0].path().join("mixture/score.toml")).unwrap();

    let typical = read_counts(&runs[0].path().join("typical/chain_0"));
    let typical_exact = typical.iter().all(|c| c[0] + c[1] == 2 && c[2] + c[3] == 0);
    let mixture = read_counts(&runs[0].path().join("mixture/chain_0"));
    let mixture_exact = mixture.iter().all(|c| c[0] == 2 && c[1] == 3 && c[3] <= 1);
    let laplace = mixture.iter().map(|c| c[2] + c[3]).sum::<usize>() as f64 / mixture.len() as f64;
    let worst = seconds.iter().copied().fold(0.0, f64::max);
    outcome(
        identical && worst < 600.0 && raster.num_cells() == 10_000 && typical_exact && mixture_exact,
        format!(
            "draw files identical: {identical}; simulate, fit, predict {} cells and score in {worst:.0} s \
             (holdout coverage {:.3}); typical 2 factorizations per iteration: {typical_exact}; \
             mixture 2 conditional + 3 proposal + {laplace:.2} Laplace per iteration: {mixture_exact}",
            raster.num_cells(),
            score.coverage_95
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters go to the libtest harness, which
    // this target does not use.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 9] = [
        ("1 SPDE fidelity", spde_fidelity),
        ("2 correlation at the range", range_anchor),
        ("3 typical sampler calibration", typical_calibration),
        ("4 mixture sampler calibration", mixture_calibration),
        ("5 Laplace derivatives and intercept mode", laplace_derivatives),
        ("6 CPO estimator", cpo_estimator),
        ("7 mixture beats typical on mixed data", qualitative_reproduction),
        ("8 Woodbury equivalence", woodbury),
        ("9 determinism and scale", determinism_and_scale),
    ];
    // Criterion numbers on the command line select a subset.
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.parse::<u8>().is_ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.split(' ').next() == Some(o.as_str())) {
            continue;
        }
        ran += 1;
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
