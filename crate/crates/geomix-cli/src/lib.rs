//! Command-line pipeline: simulate data, fit either model, predict rasters,
//! score holdouts and cross-validate.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use geomix::config::{ModelKind, RunConfig};
use geomix::data::FootprintTable;
use geomix::io;
use geomix::mesh::Mesh;
use geomix::mixture::{fit_mixture_with, MixtureState};
use geomix::predict::{
    cpo_scores, cross_validate, evaluate, predict, predict_raster, predictive_log_densities, total_log_cpo,
    FittedModel, MIXTURE_BANDS, TYPICAL_BANDS,
};
use geomix::simulate::{simulate_design, simulate_response};
use geomix::typical::{fit_typical_with, ChainDraws, SpatialInputs, TypicalState};
use geomix::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "geomix", version, about = "Bayesian spatial regression and spatial mixture models on SPDE meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding inputs and receiving outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the configured number of chains.
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate footprints, a covariate raster and a holdout set.
    Simulate(Common),
    /// Fit the single-process spatial regression.
    FitTypical(Common),
    /// Fit the two-class spatial mixture.
    FitMixture(Common),
    /// Predict the covariate raster from fitted draws.
    Predict(Common),
    /// Score fitted draws against the holdout footprints.
    Score(Common),
    /// Cross-validate by refitting on each fold.
    Cv(Common),
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::FitTypical(c) => ("fit-typical", c),
        Command::FitMixture(c) => ("fit-mixture", c),
        Command::Predict(c) => ("predict", c),
        Command::Score(c) => ("score", c),
        Command::Cv(c) => ("cv", c),
    };
    let needs_config =
        matches!(cli.command, Command::FitTypical(_) | Command::FitMixture(_) | Command::Predict(_) | Command::Cv(_));
    if needs_config && common.config.is_none() {
        eprintln!("error: `{name}` requires --config <FILE>");
        return 2;
    }
    let result = load_config(common).and_then(|config| {
        let ctx = Context { config, out_dir: common.out_dir.clone() };
        fs::create_dir_all(&ctx.out_dir).map_err(|e| Error::Io { path: ctx.out_dir.clone(), source: e })?;
        match cli.command {
            Command::Simulate(_) => ctx.simulate(),
            Command::FitTypical(_) => ctx.fit(ModelKind::Typical),
            Command::FitMixture(_) => ctx.fit(ModelKind::Mixture),
            Command::Predict(_) => ctx.predict(),
            Command::Score(_) => ctx.score(),
            Command::Cv(_) => ctx.cv(),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(chains) = common.chains {
        config.chains = chains;
    }
    config.validate()?;
    Ok(config)
}

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct FitSummary {
    model: String,
    seed: u64,
    chains: usize,
    draws_per_chain: usize,
    mesh_vertices: usize,
    observations: usize,
    total_log_cpo: f64,
    seconds: f64,
    mean_factorizations_per_iteration: f64,
    acceptance: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ScoreSummary {
    model: String,
    scheme: String,
    n: usize,
    total_log_density: f64,
    r2_tilde: f64,
    coverage_95: f64,
}

fn model_dir(out_dir: &Path, model: ModelKind) -> PathBuf {
    out_dir.join(model.name())
}

impl Context {
    fn footprints(&self) -> Result<FootprintTable> {
        io::read_footprints(self.config.data.footprints(&self.out_dir))
    }

    /// The mesh depends only on the configuration and the training
    /// footprints, so fit and predict rebuild the same one.
    fn mesh(&self, data: &FootprintTable) -> Result<Mesh> {
        self.config.build_mesh(&data.coords)
    }

    fn simulate(&self) -> Result<()> {
        let sim = &self.config.simulation;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mesh = self.config.build_mesh(&[])?;
        let design = simulate_design(&sim.design, &mesh, &mut rng)?;
        let (table, truth) = simulate_response(&design, &mesh, &sim.truth, &mut rng)?;

        let n = table.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_holdout = (sim.holdout_fraction * n as f64).round() as usize;
        let mut holdout = order[..n_holdout].to_vec();
        let mut train = order[n_holdout..].to_vec();
        holdout.sort_unstable();
        train.sort_unstable();

        let dir = &self.out_dir;
        io::write_footprints(&table.subset(&train), dir.join(geomix::config::FOOTPRINTS_FILE))?;
        if !holdout.is_empty() {
            io::write_footprints(&table.subset(&holdout), dir.join(geomix::config::HOLDOUT_FILE))?;
        }
        io::write_raster(&design.raster, dir.join(geomix::config::COVARIATES_FILE))?;
        io::write_config(&truth.params, dir.join("truth.toml"))?;
        let mut is_holdout = vec![0.0; n];
        holdout.iter().for_each(|&i| is_holdout[i] = 1.0);
        io::write_columns(
            &["id", "z", "pi", "holdout"],
            &[
                table.ids.iter().map(|&i| i as f64).collect(),
                truth.z.iter().map(|&z| f64::from(z)).collect(),
                truth.pi.clone(),
                is_holdout,
            ],
            dir.join("truth_sites.csv"),
        )?;
        let k = mesh.num_vertices();
        io::write_matrix(
            &[truth.w[0].clone(), truth.w[1].clone(), truth.w_z.clone()],
            k,
            dir.join("truth_effects.bin"),
        )?;
        eprintln!(
            "simulated {n} footprints ({} training, {} holdout), raster {}x{}, mesh {k} vertices",
            train.len(),
            holdout.len(),
            design.raster.ncols,
            design.raster.nrows
        );
        Ok(())
    }

    fn fit(&self, model: ModelKind) -> Result<()> {
        let data = self.footprints()?;
        let mesh = self.mesh(&data)?;
        let inputs = SpatialInputs::new(&mesh, &data)?;
        let dir = model_dir(&self.out_dir, model);
        let start = Instant::now();
        let chains = self.config.chains as u64;

        // Each chain owns its output directory; the pooled summary is
        // computed afterwards on this thread.
        let fitted: Vec<Result<FittedModel>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..chains)
                .map(|c| {
                    let (data, inputs, dir) = (&data, &inputs, &dir);
                    s.spawn(move || -> Result<FittedModel> {
                        let chain_dir = io::chain_dir(dir, c);
                        Ok(match model {
                            ModelKind::Typical => {
                                let draws = fit_typical_with(data, inputs, &self.config.typical_config(c))?;
                                io::write_typical_draws(&draws, &chain_dir)?;
                                FittedModel::Typical(draws)
                            }
                            ModelKind::Mixture => {
                                let draws = fit_mixture_with(data, inputs, &self.config.mixture_config(c), None)?;
                                io::write_mixture_draws(&draws, &chain_dir)?;
                                FittedModel::Mixture(draws)
                            }
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::ConfigInvalid("chain thread panicked".into()))))
                .collect()
        });
        let fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
        let seconds = start.elapsed().as_secs_f64();

        let (acceptance, factorizations): (Vec<Vec<f64>>, Vec<f64>) = fitted
            .iter()
            .map(|f| match f {
                FittedModel::Typical(d) => (d.acceptance.clone(), mean_factorizations(d)),
                FittedModel::Mixture(d) => (d.acceptance.clone(), mean_factorizations(d)),
            })
            .unzip();
        let pooled = pool(fitted)?;
        let cpo = cpo_scores(&pooled, &data, &inputs.a)?;
        io::write_columns(
            &["id", "log_cpo"],
            &[data.ids.iter().map(|&i| i as f64).collect(), cpo.clone()],
            dir.join("cpo.csv"),
        )?;
        let summary = FitSummary {
            model: model.name().into(),
            seed: self.config.seed,
            chains: self.config.chains,
            draws_per_chain: pooled.len() / self.config.chains,
            mesh_vertices: mesh.num_vertices(),
            observations: data.len(),
            total_log_cpo: total_log_cpo(&cpo)?,
            seconds,
            mean_factorizations_per_iteration: factorizations.iter().sum::<f64>() / factorizations.len() as f64,
            acceptance,
        };
        io::write_config(&summary, dir.join("fit_summary.toml"))?;
        eprintln!(
            "{} fit: {} chains x {} draws in {seconds:.1} s, total log CPO {:.3}",
            model.name(),
            summary.chains,
            summary.draws_per_chain,
            summary.total_log_cpo
        );
        Ok(())
    }

    fn load_model(&self, model: ModelKind) -> Result<FittedModel> {
        let dir = model_dir(&self.out_dir, model);
        let chains = (0..self.config.chains as u64).map(|c| io::chain_dir(&dir, c));
        match model {
            ModelKind::Typical => {
                let draws = chains.map(io::read_typical_draws).collect::<Result<Vec<_>>>()?;
                Ok(FittedModel::Typical(ChainDraws::concat(draws)?))
            }
            ModelKind::Mixture => {
                let draws = chains.map(io::read_mixture_draws).collect::<Result<Vec<_>>>()?;
                Ok(FittedModel::Mixture(ChainDraws::concat(draws)?))
            }
        }
    }

    fn predict(&self) -> Result<()> {
        let kind = self.config.prediction.model;
        let data = self.footprints()?;
        let mesh = self.mesh(&data)?;
        let model = self.load_model(kind)?;
        let covariates = io::read_raster(self.config.data.covariates(&self.out_dir))?;
        if covariates.bands != data.num_covariates() {
            return Err(Error::DimensionMismatch {
                expected: data.num_covariates(),
                got: covariates.bands,
                context: "covariate raster bands",
            });
        }
        let transform = self.config.prediction.transform()?;
        let start = Instant::now();
        let out =
            predict_raster(&model, &mesh, &covariates, self.config.prediction.chunk_size, self.config.seed, transform)?;
        let dir = model_dir(&self.out_dir, kind);
        io::write_raster(&out, dir.join("prediction.txt"))?;
        let names: &[&str] = if model.is_mixture() { &MIXTURE_BANDS } else { &TYPICAL_BANDS };
        fs::write(dir.join("prediction_bands.txt"), names.join("\n") + "\n")
            .map_err(|e| Error::Io { path: dir.join("prediction_bands.txt"), source: e })?;
        eprintln!(
            "predicted {} cells from {} draws in {:.1} s",
            covariates.num_cells(),
            model.len(),
            start.elapsed().as_secs_f64()
        );
        Ok(())
    }

    fn score(&self) -> Result<()> {
        let kind = self.config.prediction.model;
        let data = self.footprints()?;
        let mesh = self.mesh(&data)?;
        let model = self.load_model(kind)?;
        let holdout = io::read_footprints(self.config.data.holdout(&self.out_dir))?;
        let a = mesh.projection_matrix(&holdout.coords)?;
        let pred = predict(&model, &holdout.covariates, &a, holdout.coords.clone(), self.config.seed, 0)?;
        let dens = predictive_log_densities(&model, &holdout.covariates, &a, &holdout.response)?;
        let report = evaluate(&pred, &holdout.response, Some(dens), "holdout")?;
        let dir = model_dir(&self.out_dir, kind);
        let summaries = pred.summaries();
        io::write_columns(
            &["id", "response", "mean", "sd", "q025", "q975", "log_density"],
            &[
                holdout.ids.iter().map(|&i| i as f64).collect(),
                holdout.response.clone(),
                summaries.iter().map(|s| s.mean).collect(),
                summaries.iter().map(|s| s.sd).collect(),
                summaries.iter().map(|s| s.lower).collect(),
                summaries.iter().map(|s| s.upper).collect(),
                report.log_densities.clone(),
            ],
            dir.join("score_points.csv"),
        )?;
        let summary = ScoreSummary {
            model: kind.name().into(),
            scheme: report.scheme.clone(),
            n: report.n,
            total_log_density: report.total_log_density,
            r2_tilde: report.r2_tilde,
            coverage_95: report.coverage_95,
        };
        io::write_config(&summary, dir.join("score.toml"))?;
        eprintln!(
            "{} holdout: n = {}, log density {:.3}, R2 {:.3}, 95% coverage {:.3}",
            kind.name(),
            report.n,
            report.total_log_density,
            report.r2_tilde,
            report.coverage_95
        );
        Ok(())
    }

    fn cv(&self) -> Result<()> {
        let cv = &self.config.cv;
        let data = self.footprints()?;
        let mesh = self.mesh(&data)?;
        let fit = self.config.fit_config(cv.model, 0);
        let reports = cross_validate(&data, &mesh, &fit, cv.scheme, self.config.seed)?;
        let path = self.out_dir.join(format!("cv_{}.csv", cv.model.name()));
        let mut text = String::from("fold,n,total_log_density,r2_tilde,coverage_95\n");
        for r in &reports {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                r.scheme,
                r.n,
                io::format_f64(r.total_log_density),
                io::format_f64(r.r2_tilde),
                io::format_f64(r.coverage_95)
            ));
            eprintln!(
                "{}: n = {}, log density {:.3}, R2 {:.3}, 95% coverage {:.3}",
                r.scheme, r.n, r.total_log_density, r.r2_tilde, r.coverage_95
            );
        }
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }
}

fn mean_factorizations<S>(d: &ChainDraws<S>) -> f64 {
    let n = d.factorizations.len().max(1) as f64;
    d.factorizations.iter().map(|c| c.total() as f64).sum::<f64>() / n
}

fn pool(fitted: Vec<FittedModel>) -> Result<FittedModel> {
    let mut typical: Vec<ChainDraws<TypicalState>> = Vec::new();
    let mut mixture: Vec<ChainDraws<MixtureState>> = Vec::new();
    for f in fitted {
        match f {
            FittedModel::Typical(d) => typical.push(d),
            FittedModel::Mixture(d) => mixture.push(d),
        }
    }
    if mixture.is_empty() {
        Ok(FittedModel::Typical(ChainDraws::concat(typical)?))
    } else {
        Ok(FittedModel::Mixture(ChainDraws::concat(mixture)?))
    }
}
