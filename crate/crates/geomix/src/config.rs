//! Run configuration read from TOML. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_mesh, BoundingBox, Mesh, Point};
use crate::mixture::MixtureConfig;
use crate::predict::{CvScheme, FitConfig, Transform};
use crate::simulate::{DesignSpec, OrbitSpec, ProcessTruth, TruthParams};
use crate::spde::{MaternParams, PcPrior};
use crate::typical::{McmcConfig, TypicalConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub chains: usize,
    pub mesh: MeshConfig,
    pub mcmc: SamplerConfig,
    pub priors: PriorConfig,
    pub typical: TypicalOptions,
    pub mixture: MixtureOptions,
    pub prediction: PredictionConfig,
    pub cv: CvConfig,
    pub data: DataPaths,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            chains: 1,
            mesh: MeshConfig::default(),
            mcmc: SamplerConfig::default(),
            priors: PriorConfig::default(),
            typical: TypicalOptions::default(),
            mixture: MixtureOptions::default(),
            prediction: PredictionConfig::default(),
            cv: CvConfig::default(),
            data: DataPaths::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub spacing: f64,
    pub buffer: f64,
    /// Region to triangulate before buffering. Defaults to the simulation
    /// domain.
    pub bbox: Option<BoundingBox>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { spacing: 500.0, buffer: 500.0, bbox: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    pub target_acceptance: f64,
    pub initial_proposal_sd: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let m = McmcConfig::new(1000, 1000, 0);
        Self {
            burn_in: m.burn_in,
            draws: m.draws,
            thin: m.thin,
            target_acceptance: m.target_acceptance,
            initial_proposal_sd: m.initial_proposal_sd,
        }
    }
}

/// PC-prior thresholds for each Gaussian process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub typical: PcPrior,
    pub class0: PcPrior,
    pub class1: PcPrior,
    pub membership: PcPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let pc = |sigma0, phi0| PcPrior { sigma0, alpha_sigma: 0.01, phi0, alpha_phi: 0.01 };
        Self {
            typical: pc(1.0, 2000.0),
            class0: pc(0.2, 2000.0),
            class1: pc(0.5, 1000.0),
            membership: pc(10.0, 2000.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypicalOptions {
    pub standardize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureOptions {
    /// Initial EM means of class 1 and class 0.
    pub em_means: [f64; 2],
    pub laplace_correction: bool,
    pub standardize: bool,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self { em_means: [3.0, 1.0], laplace_correction: false, standardize: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Typical,
    Mixture,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Typical => "typical",
            Self::Mixture => "mixture",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionConfig {
    pub model: ModelKind,
    /// Raster cells predicted per batch.
    pub chunk_size: usize,
    /// `identity`, `exp` or `log`, applied to every predictive draw.
    pub transform: String,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { model: ModelKind::Mixture, chunk_size: 10_000, transform: "identity".into() }
    }
}

impl PredictionConfig {
    pub fn transform(&self) -> Result<Transform> {
        self.transform.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub scheme: CvScheme,
    pub model: ModelKind,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { scheme: CvScheme::ByOrbit, model: ModelKind::Mixture }
    }
}

/// Input files. Relative paths are resolved against the output directory;
/// missing entries default to the files `simulate` writes there.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub footprints: Option<PathBuf>,
    pub holdout: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
}

pub const FOOTPRINTS_FILE: &str = "footprints.csv";
pub const HOLDOUT_FILE: &str = "holdout.csv";
pub const COVARIATES_FILE: &str = "covariates.txt";

impl DataPaths {
    fn resolve(path: &Option<PathBuf>, default: &str, out_dir: &Path) -> PathBuf {
        match path {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => out_dir.join(p),
            None => out_dir.join(default),
        }
    }

    pub fn footprints(&self, out_dir: &Path) -> PathBuf {
        Self::resolve(&self.footprints, FOOTPRINTS_FILE, out_dir)
    }

    pub fn holdout(&self, out_dir: &Path) -> PathBuf {
        Self::resolve(&self.holdout, HOLDOUT_FILE, out_dir)
    }

    pub fn covariates(&self, out_dir: &Path) -> PathBuf {
        Self::resolve(&self.covariates, COVARIATES_FILE, out_dir)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub design: DesignSpec,
    pub truth: TruthParams,
    /// Fraction of simulated footprints set aside for scoring.
    pub holdout_fraction: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let orbit = |azimuth| OrbitSpec { azimuth, anchor: None };
        let field = MaternParams { sigma2: 1.0, phi: 3000.0 };
        let process = |mu, beta: [f64; 2], sigma2, phi, tau2| ProcessTruth {
            mu,
            beta: beta.to_vec(),
            theta: MaternParams { sigma2, phi },
            tau2,
        };
        Self {
            design: DesignSpec {
                domain: BoundingBox { xmin: 0.0, ymin: 0.0, xmax: 9000.0, ymax: 9000.0 },
                tracks_per_orbit: 10,
                along_track_spacing: 60.0,
                across_track_spacing: 600.0,
                orbits: vec![orbit(10.0), orbit(170.0)],
                covariate_fields: vec![field, field],
                raster_cellsize: 90.0,
            },
            truth: TruthParams::Mixture {
                classes: [process(1.0, [0.1, 0.1], 0.1, 1500.0, 0.05), process(3.0, [0.3, -0.2], 0.2, 2000.0, 0.05)],
                membership: process(0.0, [1.0, 0.5], 2.25, 2000.0, 0.0),
            },
            holdout_fraction: 0.1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::ConfigInvalid(m) => Error::ConfigInvalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::ConfigInvalid("chains must be at least 1".into()));
        }
        if !(self.mesh.spacing > 0.0) || !(self.mesh.buffer >= 0.0) {
            return Err(Error::ConfigInvalid("mesh spacing must be positive and buffer non-negative".into()));
        }
        if self.prediction.chunk_size == 0 {
            return Err(Error::ConfigInvalid("prediction chunk_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.simulation.holdout_fraction) {
            return Err(Error::ConfigInvalid("holdout_fraction must lie in [0, 1)".into()));
        }
        self.prediction.transform()?;
        for p in [&self.priors.typical, &self.priors.class0, &self.priors.class1, &self.priors.membership] {
            p.validate()?;
        }
        self.mcmc(0).validate()?;
        self.simulation.design.validate()
    }

    pub fn mcmc(&self, chain: u64) -> McmcConfig {
        McmcConfig {
            burn_in: self.mcmc.burn_in,
            draws: self.mcmc.draws,
            thin: self.mcmc.thin,
            seed: self.seed,
            chain,
            target_acceptance: self.mcmc.target_acceptance,
            initial_proposal_sd: self.mcmc.initial_proposal_sd,
        }
    }

    pub fn typical_config(&self, chain: u64) -> TypicalConfig {
        TypicalConfig { mcmc: self.mcmc(chain), prior: self.priors.typical, standardize: self.typical.standardize }
    }

    pub fn mixture_config(&self, chain: u64) -> MixtureConfig {
        MixtureConfig {
            em_means: self.mixture.em_means,
            standardize: self.mixture.standardize,
            laplace_correction: self.mixture.laplace_correction,
            priors: [self.priors.class0, self.priors.class1],
            prior_z: self.priors.membership,
            ..MixtureConfig::new(self.mcmc(chain), self.priors.membership)
        }
    }

    pub fn fit_config(&self, model: ModelKind, chain: u64) -> FitConfig {
        match model {
            ModelKind::Typical => FitConfig::Typical(self.typical_config(chain)),
            ModelKind::Mixture => FitConfig::Mixture(self.mixture_config(chain)),
        }
    }

    /// Mesh over the configured box, else over the simulation domain
    /// widened to include `points`.
    pub fn build_mesh(&self, points: &[Point]) -> Result<Mesh> {
        let bbox = match self.mesh.bbox {
            Some(b) => b,
            None => {
                let d = self.simulation.design.domain;
                match BoundingBox::around(points) {
                    Some(p) => BoundingBox {
                        xmin: d.xmin.min(p.xmin),
                        ymin: d.ymin.min(p.ymin),
                        xmax: d.xmax.max(p.xmax),
                        ymax: d.ymax.max(p.ymax),
                    },
                    None => d,
                }
            }
        };
        build_mesh(bbox, self.mesh.spacing, self.mesh.buffer)
    }
}
