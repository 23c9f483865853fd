//! Posterior prediction, back-transformation, CPO scores and
//! cross-validation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, FootprintTable};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, ProjectionMatrix};
use crate::mixture::{fit_mixture_with, logistic, MixtureConfig, MixtureState};
use crate::raster::RasterGrid;
use crate::spde::SpdePrecision;
use crate::typical::{fit_typical_with, ChainDraws, SpatialInputs, TypicalConfig, TypicalState};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (y - mean).powi(2) / var)
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior draws of either model.
#[derive(Clone, Debug)]
pub enum FittedModel {
    Typical(ChainDraws<TypicalState>),
    Mixture(ChainDraws<MixtureState>),
}

/// One location's design: intercept plus centered covariates, and its
/// projection row.
struct Site<'a> {
    xt: &'a [f64],
    cols: [usize; 3],
    weights: [f64; 3],
}

impl Site<'_> {
    fn linear(&self, mu: f64, beta: &[f64], w: &[f64]) -> f64 {
        let fixed: f64 = mu + beta.iter().zip(&self.xt[1..]).map(|(b, x)| b * x).sum::<f64>();
        let c = self.cols;
        let a = self.weights;
        fixed + a[0] * w[c[0]] + a[1] * w[c[1]] + a[2] * w[c[2]]
    }
}

/// Mean, variance and class-1 weight of the response at one site under one
/// draw. The typical model has a single component with weight 1.
struct SiteDraw {
    means: [f64; 2],
    vars: [f64; 2],
    pi: Option<f64>,
}

impl FittedModel {
    pub fn len(&self) -> usize {
        match self {
            Self::Typical(d) => d.len(),
            Self::Mixture(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self, Self::Mixture(_))
    }

    fn centering(&self) -> &crate::data::Centering {
        match self {
            Self::Typical(d) => &d.centering,
            Self::Mixture(d) => &d.centering,
        }
    }

    fn mesh_size(&self) -> usize {
        match self {
            Self::Typical(d) => d.states.first().map_or(0, |s| s.w.len()),
            Self::Mixture(d) => d.states.first().map_or(0, |s| s.w_z.len()),
        }
    }

    /// `[1, centered X]` for raw covariates.
    fn design(&self, x: &DMatrix<f64>, a: &ProjectionMatrix) -> Result<DMatrix<f64>> {
        if a.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: a.nrows(),
                context: "prediction projection rows",
            });
        }
        if a.ncols() != self.mesh_size() {
            return Err(Error::DimensionMismatch {
                expected: self.mesh_size(),
                got: a.ncols(),
                context: "prediction projection columns",
            });
        }
        Ok(with_intercept(&self.centering().apply(x)?))
    }

    fn site_draw(&self, m: usize, site: &Site) -> SiteDraw {
        match self {
            Self::Typical(d) => {
                let s = &d.states[m];
                let mean = site.linear(s.mu, &s.beta, &s.w);
                SiteDraw { means: [mean, mean], vars: [s.tau2, s.tau2], pi: None }
            }
            Self::Mixture(d) => {
                let s = &d.states[m];
                let [c0, c1] = &s.classes;
                SiteDraw {
                    means: [site.linear(c0.mu, &c0.beta, &c0.w), site.linear(c1.mu, &c1.beta, &c1.w)],
                    vars: [c0.tau2, c1.tau2],
                    pi: Some(logistic(site.linear(s.mu_z, &s.beta_z, &s.w_z))),
                }
            }
        }
    }

    /// Log density of `y` at the site under draw `m`, with the class label
    /// integrated out for the mixture.
    fn site_log_density(&self, m: usize, site: &Site, y: f64) -> f64 {
        let d = self.site_draw(m, site);
        match d.pi {
            None => log_normal_pdf(y, d.means[1], d.vars[1]),
            Some(pi) => {
                let l1 = pi.ln() + log_normal_pdf(y, d.means[1], d.vars[1]);
                let l0 = (1.0 - pi).ln() + log_normal_pdf(y, d.means[0], d.vars[0]);
                log_sum_exp([l0, l1].into_iter())
            }
        }
    }

    /// `M x n` matrix of per-draw log densities of `y`.
    pub fn log_densities(&self, x: &DMatrix<f64>, a: &ProjectionMatrix, y: &[f64]) -> Result<DMatrix<f64>> {
        let xt = self.design(x, a)?;
        if y.len() != xt.nrows() {
            return Err(Error::DimensionMismatch { expected: xt.nrows(), got: y.len(), context: "response length" });
        }
        let mut out = DMatrix::zeros(self.len(), y.len());
        for (i, &yi) in y.iter().enumerate() {
            let row: Vec<f64> = xt.row(i).iter().copied().collect();
            let (cols, weights) = a.row(i);
            let site = Site { xt: &row, cols, weights };
            for m in 0..self.len() {
                out[(m, i)] = self.site_log_density(m, &site, yi);
            }
        }
        Ok(out)
    }
}

/// Strictly monotone maps applied to response draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Exp,
    Log,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Exp => v.exp(),
            Self::Log => v.ln(),
        }
    }

    /// `log |g'(y)|`.
    pub fn log_abs_derivative(self, y: f64) -> f64 {
        match self {
            Self::Identity => 0.0,
            Self::Exp => y,
            Self::Log => -y.ln(),
        }
    }

    fn inverse(self) -> Self {
        match self {
            Self::Identity => Self::Identity,
            Self::Exp => Self::Log,
            Self::Log => Self::Exp,
        }
    }

    /// Composition `self` after `inner`, when it stays in the family.
    fn after(self, inner: Self) -> Option<Self> {
        match (self, inner) {
            (Self::Identity, t) | (t, Self::Identity) => Some(t),
            (a, b) if a == b.inverse() => Some(Self::Identity),
            _ => None,
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(Self::Identity),
            "exp" => Ok(Self::Exp),
            "log" => Ok(Self::Log),
            other => Err(Error::UnsupportedTransform(other.to_string())),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Exp => "exp",
            Self::Log => "log",
        })
    }
}

/// Posterior predictive draws at a set of locations.
#[derive(Clone, Debug)]
pub struct PredictiveDraws {
    /// `M x n*`.
    pub values: DMatrix<f64>,
    /// Class labels per draw and location (mixture only).
    pub labels: Option<DMatrix<u8>>,
    /// Class-1 probabilities per draw and location (mixture only).
    pub class_probability: Option<DMatrix<f64>>,
    pub locations: Vec<Point>,
    /// Map applied to the model-scale response.
    pub transform: Transform,
}

impl PredictiveDraws {
    pub fn num_draws(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_locations(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }
}

const WORDS_PER_SITE: u128 = 8;

/// Random numbers for one draw and one site, independent of the order in
/// which sites are visited.
struct SiteRng(ChaCha8Rng);

impl SiteRng {
    fn new(seed: u64, draw: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(draw as u64);
        Self(rng)
    }

    fn at(&mut self, site: usize) -> &mut Self {
        self.0.set_word_pos(site as u128 * WORDS_PER_SITE);
        self
    }

    /// Uniform on `(0, 1]`.
    fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// Box-Muller; uses exactly two uniforms.
    fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Response draw, label and class-1 probability at one site for one draw.
fn simulate_site(model: &FittedModel, m: usize, site: &Site, rng: &mut SiteRng) -> (f64, Option<(u8, f64)>) {
    let d = model.site_draw(m, site);
    match d.pi {
        None => (d.means[1] + d.vars[1].sqrt() * rng.normal(), None),
        Some(pi) => {
            let z = u8::from(rng.uniform() <= pi && pi > 0.0);
            let j = usize::from(z);
            (d.means[j] + d.vars[j].sqrt() * rng.normal(), Some((z, pi)))
        }
    }
}

/// Posterior predictive draws at locations with raw covariates `x` and
/// projection `a`. Site `i` draws its noise from a stream keyed by
/// `(seed, draw, first_site + i)`.
pub fn predict(
    model: &FittedModel,
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    locations: Vec<Point>,
    seed: u64,
    first_site: usize,
) -> Result<PredictiveDraws> {
    let xt = model.design(x, a)?;
    let n = xt.nrows();
    if !locations.is_empty() && locations.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: locations.len(), context: "prediction locations" });
    }
    let m_total = model.len();
    let mut values = DMatrix::zeros(m_total, n);
    let mixture = model.is_mixture();
    let mut labels = mixture.then(|| DMatrix::<u8>::zeros(m_total, n));
    let mut probs = mixture.then(|| DMatrix::<f64>::zeros(m_total, n));
    let rows: Vec<Vec<f64>> = (0..n).map(|i| xt.row(i).iter().copied().collect()).collect();
    for m in 0..m_total {
        let mut rng = SiteRng::new(seed, m);
        for (i, row) in rows.iter().enumerate() {
            let (cols, weights) = a.row(i);
            let site = Site { xt: row, cols, weights };
            let (y, class) = simulate_site(model, m, &site, rng.at(first_site + i));
            values[(m, i)] = y;
            if let (Some((z, pi)), Some(l), Some(p)) = (class, labels.as_mut(), probs.as_mut()) {
                l[(m, i)] = z;
                p[(m, i)] = pi;
            }
        }
    }
    Ok(PredictiveDraws { values, labels, class_probability: probs, locations, transform: Transform::Identity })
}

/// Typical-model predictive draws `mu + x'beta + A w + eps`.
pub fn predict_typical(
    draws: &ChainDraws<TypicalState>,
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    seed: u64,
) -> Result<PredictiveDraws> {
    predict(&FittedModel::Typical(draws.clone()), x, a, Vec::new(), seed, 0)
}

/// Mixture predictive draws: a label from the membership probability, then
/// the response of that class.
pub fn predict_mixture(
    draws: &ChainDraws<MixtureState>,
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    seed: u64,
) -> Result<PredictiveDraws> {
    predict(&FittedModel::Mixture(draws.clone()), x, a, Vec::new(), seed, 0)
}

/// Applies `transform` to every draw.
pub fn back_transform(pred: &PredictiveDraws, transform: Transform) -> Result<PredictiveDraws> {
    let composed = transform
        .after(pred.transform)
        .ok_or_else(|| Error::UnsupportedTransform(format!("{transform} after {}", pred.transform)))?;
    let mut out = pred.clone();
    out.values.apply(|v| *v = transform.apply(*v));
    out.transform = composed;
    Ok(out)
}

/// Inverse empirical CDF: smallest draw with at least a fraction `p` of
/// draws at or below it. Commutes with increasing maps.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Per-location summaries of predictive draws.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub class_mode: Option<u8>,
    pub class_probability: Option<f64>,
}

/// Summaries of one location's draws, optionally back-transformed.
fn summarize(values: &mut [f64], labels: Option<&[u8]>, transform: Transform) -> LocationSummary {
    values.iter_mut().for_each(|v| *v = transform.apply(*v));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    values.sort_by(f64::total_cmp);
    let (class_mode, class_probability) = match labels {
        Some(l) => {
            let p = l.iter().map(|&z| f64::from(z)).sum::<f64>() / n;
            (Some(u8::from(p > 0.5)), Some(p))
        }
        None => (None, None),
    };
    LocationSummary {
        mean,
        sd,
        lower: quantile_sorted(values, 0.025),
        upper: quantile_sorted(values, 0.975),
        class_mode,
        class_probability,
    }
}

impl PredictiveDraws {
    /// Mean, sd, 2.5% and 97.5% quantiles and class summaries per location.
    pub fn summaries(&self) -> Vec<LocationSummary> {
        (0..self.num_locations())
            .map(|i| {
                let mut v = self.column(i);
                let l: Option<Vec<u8>> = self.labels.as_ref().map(|l| l.column(i).iter().copied().collect());
                summarize(&mut v, l.as_deref(), Transform::Identity)
            })
            .collect()
    }
}

/// Output bands of a prediction raster.
pub const TYPICAL_BANDS: [&str; 4] = ["mean", "sd", "q025", "q975"];
pub const MIXTURE_BANDS: [&str; 6] = ["mean", "sd", "q025", "q975", "class_mode", "class_probability"];

/// Predicts every cell of a covariate raster, `chunk` cells at a time, and
/// returns the summary raster. Cells with a missing covariate stay missing.
pub fn predict_raster(
    model: &FittedModel,
    mesh: &Mesh,
    covariates: &RasterGrid,
    chunk: usize,
    seed: u64,
    transform: Transform,
) -> Result<RasterGrid> {
    let p = covariates.bands;
    let bands = if model.is_mixture() { MIXTURE_BANDS.len() } else { TYPICAL_BANDS.len() };
    let cells = covariates.num_cells();
    let mut out = RasterGrid::filled(
        covariates.ncols,
        covariates.nrows,
        covariates.x_origin,
        covariates.y_origin,
        covariates.cellsize,
        bands,
        f64::NAN,
    )?;
    let chunk = chunk.max(1);
    let mut rngs: Vec<SiteRng> = (0..model.len()).map(|m| SiteRng::new(seed, m)).collect();
    let mut start = 0;
    while start < cells {
        let end = (start + chunk).min(cells);
        let ids: Vec<usize> = (start..end).filter(|&c| (0..p).all(|b| covariates.band(b)[c].is_finite())).collect();
        if !ids.is_empty() {
            let points: Vec<Point> = ids.iter().map(|&c| covariates.cell_center(c)).collect();
            let a = mesh.projection_matrix(&points)?;
            let x = DMatrix::from_fn(ids.len(), p, |r, b| covariates.band(b)[ids[r]]);
            let xt = model.design(&x, &a)?;
            let mut vals = vec![0.0; model.len()];
            let mut labs = vec![0u8; model.len()];
            for (r, &cell) in ids.iter().enumerate() {
                let row: Vec<f64> = xt.row(r).iter().copied().collect();
                let (cols, weights) = a.row(r);
                let site = Site { xt: &row, cols, weights };
                for (m, ((v, l), rng)) in vals.iter_mut().zip(labs.iter_mut()).zip(rngs.iter_mut()).enumerate() {
                    let (y, class) = simulate_site(model, m, &site, rng.at(cell));
                    *v = y;
                    *l = class.map_or(0, |c| c.0);
                }
                let s = summarize(&mut vals, model.is_mixture().then_some(&labs[..]), transform);
                let mut put = |b: usize, v: f64| out.band_mut(b)[cell] = v;
                put(0, s.mean);
                put(1, s.sd);
                put(2, s.lower);
                put(3, s.upper);
                if let (Some(mode), Some(prob)) = (s.class_mode, s.class_probability) {
                    put(4, f64::from(mode));
                    put(5, prob);
                }
            }
        }
        start = end;
    }
    Ok(out)
}

/// Harmonic-mean CPO from an `M x n` matrix of per-draw log densities;
/// returns `log CPO_i`.
pub fn log_cpo_from_densities(log_dens: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = log_dens.nrows() as f64;
    (0..log_dens.ncols())
        .map(|i| {
            let col = log_dens.column(i);
            if col.iter().any(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
                return Err(Error::NumericalOverflow { index: i });
            }
            Ok(m.ln() - log_sum_exp(col.iter().map(|v| -v)))
        })
        .collect()
}

/// Per-point CPO of the fitted data, on the model scale.
pub fn cpo_scores(model: &FittedModel, data: &FootprintTable, a: &ProjectionMatrix) -> Result<Vec<f64>> {
    Ok(log_cpo_from_densities(&model.log_densities(&data.covariates, a, &data.response)?)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Per-point `log CPO` of the response transformed by `g`, using the density
/// of `g(y)` implied by the model.
pub fn log_cpo_transformed(
    model: &FittedModel,
    data: &FootprintTable,
    a: &ProjectionMatrix,
    g: Transform,
) -> Result<Vec<f64>> {
    let h: Vec<f64> = data.response.iter().map(|&y| g.apply(y)).collect();
    let ginv = g.inverse();
    let mut log_dens =
        model.log_densities(&data.covariates, a, &h.iter().map(|&v| ginv.apply(v)).collect::<Vec<_>>())?;
    // Change of variables: f_h(h) = f_y(g^{-1}(h)) / |g'(g^{-1}(h))|.
    for (i, &hi) in h.iter().enumerate() {
        let jac = g.log_abs_derivative(ginv.apply(hi));
        log_dens.column_mut(i).add_scalar_mut(-jac);
    }
    log_cpo_from_densities(&log_dens)
}

/// `sum log CPO_i`.
pub fn total_log_cpo(cpo: &[f64]) -> Result<f64> {
    cpo.iter()
        .enumerate()
        .map(|(i, &c)| if c > 0.0 { Ok(c.ln()) } else { Err(Error::NonPositiveCpo { index: i, value: c }) })
        .sum()
}

/// Holdout scores of one prediction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scheme: String,
    /// Sum of per-point log predictive densities.
    pub total_log_density: f64,
    pub log_densities: Vec<f64>,
    pub r2_tilde: f64,
    pub coverage_95: f64,
    pub n: usize,
}

/// Predictive `R^2`, 95% coverage and log densities against `truth`.
///
/// `log_densities` holds the per-point predictive log densities when the
/// model states are at hand; otherwise they are left empty and the total
/// is `NaN`.
pub fn evaluate(
    pred: &PredictiveDraws,
    truth: &[f64],
    log_densities: Option<Vec<f64>>,
    scheme: &str,
) -> Result<ScoreReport> {
    let n = truth.len();
    if pred.num_locations() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pred.num_locations(),
            context: "evaluate truth length",
        });
    }
    let mean_truth = truth.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean_truth).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::DegenerateTruth);
    }
    let summaries = pred.summaries();
    let ss_res: f64 = summaries.iter().zip(truth).map(|(s, t)| (s.mean - t).powi(2)).sum();
    let covered = summaries.iter().zip(truth).filter(|(s, &t)| s.lower <= t && t <= s.upper).count();
    let log_densities = log_densities.unwrap_or_default();
    let total = if log_densities.len() == n { log_densities.iter().sum() } else { f64::NAN };
    Ok(ScoreReport {
        scheme: scheme.to_string(),
        total_log_density: total,
        log_densities,
        r2_tilde: 1.0 - ss_res / ss_tot,
        coverage_95: covered as f64 / n as f64,
        n,
    })
}

/// `log (1/M sum_m f(y_i | psi_m))` for each point.
pub fn predictive_log_densities(
    model: &FittedModel,
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    y: &[f64],
) -> Result<Vec<f64>> {
    let ld = model.log_densities(x, a, y)?;
    let m = ld.nrows() as f64;
    Ok((0..ld.ncols()).map(|i| log_sum_exp(ld.column(i).iter().copied()) - m.ln()).collect())
}

/// Model to fit in each fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitConfig {
    Typical(TypicalConfig),
    Mixture(MixtureConfig),
}

impl FitConfig {
    pub fn fit(&self, data: &FootprintTable, inputs: &SpatialInputs) -> Result<FittedModel> {
        Ok(match self {
            Self::Typical(c) => FittedModel::Typical(fit_typical_with(data, inputs, c)?),
            Self::Mixture(c) => FittedModel::Mixture(fit_mixture_with(data, inputs, c, None)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Typical(_) => "typical",
            Self::Mixture(_) => "mixture",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvScheme {
    /// One fold holding out a seeded uniform 10% sample.
    Random10,
    /// One fold per orbit label.
    ByOrbit,
}

impl FromStr for CvScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-10" | "random" => Ok(Self::Random10),
            "by-orbit" => Ok(Self::ByOrbit),
            other => Err(Error::ConfigInvalid(format!("unknown cross-validation scheme `{other}`"))),
        }
    }
}

/// Train/test split of one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds of the chosen scheme, validated for size.
pub fn make_folds(data: &FootprintTable, scheme: CvScheme, seed: u64) -> Result<Vec<Fold>> {
    let n = data.len();
    let minimum = data.num_covariates() + 2;
    let folds = match scheme {
        CvScheme::Random10 => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_test = n.div_ceil(10);
            let mut test = idx[..n_test].to_vec();
            let mut train = idx[n_test..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            vec![Fold { name: "random-10".into(), train, test }]
        }
        CvScheme::ByOrbit => {
            let orbits = data.distinct_orbits();
            if orbits.len() < 2 {
                return Err(Error::InsufficientOrbits { found: orbits.len() });
            }
            orbits
                .iter()
                .map(|&o| Fold {
                    name: format!("orbit-{o}"),
                    train: (0..n).filter(|&i| data.orbits[i] != o).collect(),
                    test: (0..n).filter(|&i| data.orbits[i] == o).collect(),
                })
                .collect()
        }
    };
    for (f, fold) in folds.iter().enumerate() {
        if fold.train.len() < minimum || fold.test.len() < minimum {
            return Err(Error::FoldTooSmall { fold: f, train: fold.train.len(), test: fold.test.len(), minimum });
        }
    }
    Ok(folds)
}

/// Fits the model to one fold's training set and scores its holdout.
pub fn score_fold(
    data: &FootprintTable,
    mesh: &Mesh,
    spde: &Arc<SpdePrecision>,
    config: &FitConfig,
    fold: &Fold,
    seed: u64,
) -> Result<ScoreReport> {
    let train = data.subset(&fold.train);
    let test = data.subset(&fold.test);
    let inputs = SpatialInputs::with_spde(Arc::clone(spde), mesh, &train)?;
    let model = config.fit(&train, &inputs)?;
    let a_test = mesh.projection_matrix(&test.coords)?;
    let pred = predict(&model, &test.covariates, &a_test, test.coords.clone(), seed, 0)?;
    let dens = predictive_log_densities(&model, &test.covariates, &a_test, &test.response)?;
    evaluate(&pred, &test.response, Some(dens), &fold.name)
}

/// Refits per fold and scores each holdout.
pub fn cross_validate(
    data: &FootprintTable,
    mesh: &Mesh,
    config: &FitConfig,
    scheme: CvScheme,
    seed: u64,
) -> Result<Vec<ScoreReport>> {
    let folds = make_folds(data, scheme, seed)?;
    let spde = Arc::new(SpdePrecision::from_mesh(mesh)?);
    folds.iter().map(|fold| score_fold(data, mesh, &spde, config, fold, seed)).collect()
}
