//! Gibbs sampler for the two-class spatial mixture.
//!
//! Each footprint belongs to class 1 with probability
//! `logit^{-1}(mu_z + x'beta_z + eta_z(s))` and otherwise to class 0; each
//! class has its own spatial regression. The Bernoulli block
//! `b = (mu_z, beta_z, w_z)` is drawn from a Laplace approximation of its
//! conditional posterior.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, Centering, FootprintTable};
use crate::error::{Error, Result};
use crate::linalg::{CholFactor, SparseSymMatrix, SymbolicCholesky};
use crate::mesh::{Mesh, ProjectionMatrix};
use crate::spde::{MaternParams, PcPrior};
use crate::typical::{
    initial_theta, mean_param_system, ols, residuals, sample_tau2, variance, ChainDraws, Design, FactorizationCounts,
    McmcConfig, SpatialInputs, ThetaBlock, TypicalState,
};

/// Labels plus both class parameter blocks and the Bernoulli block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub z: Vec<u8>,
    /// Class 0 then class 1.
    pub classes: [TypicalState; 2],
    pub mu_z: f64,
    pub beta_z: Vec<f64>,
    pub w_z: Vec<f64>,
    pub theta_z: MaternParams,
}

impl MixtureState {
    /// `(mu_z, beta_z, w_z)` stacked.
    pub fn bernoulli_block(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(1 + self.beta_z.len() + self.w_z.len());
        b.push(self.mu_z);
        b.extend_from_slice(&self.beta_z);
        b.extend_from_slice(&self.w_z);
        b
    }

    fn set_bernoulli_block(&mut self, b: &[f64]) {
        let q = 1 + self.beta_z.len();
        self.mu_z = b[0];
        self.beta_z.copy_from_slice(&b[1..q]);
        self.w_z.copy_from_slice(&b[q..]);
    }
}

fn default_em_means() -> [f64; 2] {
    [3.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub mcmc: McmcConfig,
    /// Priors on the class-0 and class-1 fields.
    pub priors: [PcPrior; 2],
    /// Prior on the class-membership field.
    pub prior_z: PcPrior,
    /// Initial EM means for class 1 and class 0.
    #[serde(default = "default_em_means")]
    pub em_means: [f64; 2],
    #[serde(default)]
    pub standardize: bool,
    /// Metropolis-Hastings correction of the Laplace draw.
    #[serde(default)]
    pub laplace_correction: bool,
    /// Keep the initial labels fixed.
    #[serde(default)]
    pub freeze_labels: bool,
    /// Keep the Bernoulli block and its parameters at their initial values.
    #[serde(default)]
    pub freeze_bernoulli: bool,
}

impl MixtureConfig {
    /// Same prior on all three fields.
    pub fn new(mcmc: McmcConfig, prior: PcPrior) -> Self {
        Self {
            mcmc,
            priors: [prior, prior],
            prior_z: prior,
            em_means: default_em_means(),
            standardize: false,
            laplace_correction: false,
            freeze_labels: false,
            freeze_bernoulli: false,
        }
    }
}

/// Two-component normal mixture fitted by EM.
#[derive(Clone, Debug, PartialEq)]
pub struct EmFit {
    /// Class 0 then class 1.
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn log_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (y - mean).powi(2) / var)
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Initial labels from an equal-weight two-component normal mixture.
///
/// Component 1 starts at `mu1_start` (the larger mean); labels are 1 where its
/// responsibility exceeds one half.
pub fn em_init_z(y: &[f64], mu1_start: f64, mu0_start: f64) -> Result<(Vec<u8>, EmFit)> {
    if y.len() < 4 {
        return Err(Error::InvalidParameter("EM initialization needs at least 4 points".into()));
    }
    if !(mu1_start > mu0_start) {
        return Err(Error::InvalidParameter("class-1 start mean must exceed class-0".into()));
    }
    let vy = variance(y);
    if !(vy > 0.0) {
        return Err(Error::DegenerateComponent { component: 0, variance: vy });
    }
    let floor = 1e-10 * vy;
    let mut means = [mu0_start, mu1_start];
    let mut vars = [vy, vy];
    let mut resp = vec![0.0; y.len()];
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut ll = prev;
    for it in 0..500 {
        iterations = it + 1;
        ll = 0.0;
        for (r, &yi) in resp.iter_mut().zip(y) {
            let l0 = log_normal_pdf(yi, means[0], vars[0]);
            let l1 = log_normal_pdf(yi, means[1], vars[1]);
            let total = log_sum_exp2(l0, l1);
            *r = (l1 - total).exp();
            ll += total + 0.5f64.ln();
        }
        for (j, mean) in means.iter_mut().enumerate() {
            let weight = |r: f64| if j == 1 { r } else { 1.0 - r };
            let sw: f64 = resp.iter().map(|&r| weight(r)).sum();
            if sw <= 0.0 {
                return Err(Error::DegenerateComponent { component: j, variance: 0.0 });
            }
            *mean = resp.iter().zip(y).map(|(&r, &yi)| weight(r) * yi).sum::<f64>() / sw;
            let v = resp.iter().zip(y).map(|(&r, &yi)| weight(r) * (yi - *mean).powi(2)).sum::<f64>() / sw;
            if !(v >= floor) {
                return Err(Error::DegenerateComponent { component: j, variance: v });
            }
            vars[j] = v;
        }
        if (ll - prev).abs() < 1e-8 {
            break;
        }
        prev = ll;
    }
    let labels = resp.iter().map(|&r| u8::from(r > 0.5)).collect();
    Ok((labels, EmFit { means, variances: vars, log_likelihood: ll, iterations }))
}

/// `logit^{-1}` that never overflows.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const LOG_ODDS_CAP: f64 = 700.0;

/// Posterior class-1 probability from the prior log-odds and the two class
/// log-densities.
pub fn membership_probability(prior_log_odds: f64, log_f1: f64, log_f0: f64) -> f64 {
    let lo = prior_log_odds + log_f1 - log_f0;
    let lo = if lo.is_nan() { 0.0 } else { lo.clamp(-LOG_ODDS_CAP, LOG_ODDS_CAP) };
    logistic(lo)
}

/// Per-point linear predictors of both classes and of the membership field.
pub(crate) struct Predictors {
    pub class_means: [Vec<f64>; 2],
    pub log_odds: Vec<f64>,
}

pub(crate) fn predictors(xt: &DMatrix<f64>, a: &ProjectionMatrix, state: &MixtureState) -> Result<Predictors> {
    let lin = |mu: f64, beta: &[f64], w: &[f64]| -> Result<Vec<f64>> {
        let aw = a.mul_vec(w)?;
        Ok((0..xt.nrows())
            .map(|i| {
                let row = xt.row(i);
                mu + beta.iter().enumerate().map(|(j, b)| b * row[j + 1]).sum::<f64>() + aw[i]
            })
            .collect())
    };
    let c0 = &state.classes[0];
    let c1 = &state.classes[1];
    Ok(Predictors {
        class_means: [lin(c0.mu, &c0.beta, &c0.w)?, lin(c1.mu, &c1.beta, &c1.w)?],
        log_odds: lin(state.mu_z, &state.beta_z, &state.w_z)?,
    })
}

/// Independent Bernoulli draws of the labels given everything else.
///
/// `xt` holds the intercept column followed by the centered covariates.
pub fn sample_z<R: Rng + ?Sized>(
    y: &[f64],
    xt: &DMatrix<f64>,
    a: &ProjectionMatrix,
    state: &MixtureState,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let pr = predictors(xt, a, state)?;
    let (t0, t1) = (state.classes[0].tau2, state.classes[1].tau2);
    Ok(y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let p = membership_probability(
                pr.log_odds[i],
                log_normal_pdf(yi, pr.class_means[1][i], t1),
                log_normal_pdf(yi, pr.class_means[0][i], t0),
            );
            u8::from(rng.random::<f64>() < p)
        })
        .collect())
}

/// Conditional posterior of the Bernoulli block given labels:
/// logistic likelihood with design `[X~, A]`, flat prior on the fixed
/// effects and `N(0, Q^{-1})` on the mesh effects.
#[derive(Clone, Debug)]
pub struct LogisticSystem {
    fixed: usize,
    effects: usize,
    pattern: SparseSymMatrix,
    /// Position of each prior entry, in the order of the prior's pattern.
    prior_slots: Vec<usize>,
    prior_pattern: Option<SparseSymMatrix>,
    /// Per observation: slot and multiplicity of every pair of its
    /// `fixed + 3` design entries.
    obs_slots: Vec<Vec<(usize, f64)>>,
    symbolic: Arc<SymbolicCholesky>,
}

impl LogisticSystem {
    /// `prior_pattern` is the pattern of `Q` when a spatial term is present.
    pub fn new(
        xt: &DMatrix<f64>,
        a: Option<&ProjectionMatrix>,
        prior_pattern: Option<&SparseSymMatrix>,
    ) -> Result<Self> {
        let fixed = xt.ncols();
        let effects = a.map_or(0, |a| a.ncols());
        if let Some(a) = a {
            if a.nrows() != xt.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: xt.nrows(),
                    got: a.nrows(),
                    context: "LogisticSystem projection rows",
                });
            }
            match prior_pattern {
                Some(p) if p.dim() == effects => {}
                _ => return Err(Error::InvalidParameter("spatial term needs a prior of matching size".into())),
            }
        }
        let dim = fixed + effects;
        if dim == 0 {
            return Err(Error::EmptyDesign);
        }
        let n = xt.nrows();
        let globals = |i: usize| -> Vec<usize> {
            let mut g: Vec<usize> = (0..fixed).collect();
            if let Some(a) = a {
                g.extend(a.row(i).0.iter().map(|c| fixed + c));
            }
            g
        };
        let mut triplets = Vec::new();
        for r in 0..fixed {
            for c in 0..=r {
                triplets.push((r, c, 0.0));
            }
        }
        for i in 0..n {
            let g = globals(i);
            for s in fixed..g.len() {
                for t in 0..=s {
                    triplets.push((g[s], g[t], 0.0));
                }
            }
        }
        if let (Some(p), true) = (prior_pattern, effects > 0) {
            triplets.extend(p.iter().map(|(i, j, _)| (fixed + i, fixed + j, 0.0)));
        }
        let pattern = SparseSymMatrix::from_triplets(dim, &triplets)?;
        let prior_slots = prior_pattern
            .map(|p| {
                p.iter().map(|(i, j, _)| pattern.position(fixed + i, fixed + j).expect("prior in pattern")).collect()
            })
            .unwrap_or_default();
        let obs_slots = (0..n)
            .map(|i| {
                let g = globals(i);
                let mut v = Vec::with_capacity(g.len() * (g.len() + 1) / 2);
                for s in 0..g.len() {
                    for t in 0..=s {
                        let mult = if s != t && g[s] == g[t] { 2.0 } else { 1.0 };
                        v.push((pattern.position(g[s], g[t]).expect("pair in pattern"), mult));
                    }
                }
                v
            })
            .collect();
        let symbolic = Arc::new(SymbolicCholesky::analyze(&pattern));
        Ok(Self { fixed, effects, pattern, prior_slots, prior_pattern: prior_pattern.cloned(), obs_slots, symbolic })
    }

    pub fn dim(&self) -> usize {
        self.fixed + self.effects
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed
    }
}

/// Everything needed to evaluate the Bernoulli-block log posterior.
#[derive(Clone, Copy)]
pub struct LogisticTarget<'a> {
    pub system: &'a LogisticSystem,
    pub xt: &'a DMatrix<f64>,
    pub a: Option<&'a ProjectionMatrix>,
    pub z: &'a [u8],
    /// `Q(theta_z)`, on the pattern the system was built with.
    pub prior: Option<&'a SparseSymMatrix>,
}

impl LogisticTarget<'_> {
    fn check(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.dim(),
                got: b.len(),
                context: "Bernoulli block",
            });
        }
        if self.z.len() != self.xt.nrows() {
            return Err(Error::DimensionMismatch { expected: self.xt.nrows(), got: self.z.len(), context: "labels" });
        }
        if let (Some(q), Some(p)) = (self.prior, &self.system.prior_pattern) {
            if !q.same_pattern(p) {
                return Err(Error::InvalidMatrix("prior pattern differs from the system's".into()));
            }
        }
        Ok(())
    }

    fn row_values(&self, i: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.xt.row(i).iter().copied().collect();
        if let Some(a) = self.a {
            v.extend_from_slice(&a.row(i).1);
        }
        v
    }

    pub fn linear_predictor(&self, b: &[f64]) -> Vec<f64> {
        let f = self.system.fixed;
        (0..self.xt.nrows())
            .map(|i| {
                let fixed: f64 = self.xt.row(i).iter().zip(&b[..f]).map(|(x, c)| x * c).sum();
                fixed + self.a.map_or(0.0, |a| a.row_dot(i, &b[f..]))
            })
            .collect()
    }

    fn prior_quad(&self, w: &[f64]) -> Result<f64> {
        match self.prior {
            Some(q) if !w.is_empty() => q.quad_form(w),
            _ => Ok(0.0),
        }
    }

    /// Log posterior up to a constant.
    pub fn log_posterior(&self, b: &[f64]) -> Result<f64> {
        self.check(b)?;
        let eta = self.linear_predictor(b);
        let ll: f64 = eta.iter().zip(self.z).map(|(&e, &z)| f64::from(z) * e - softplus(e)).sum();
        Ok(ll - 0.5 * self.prior_quad(&b[self.system.fixed..])?)
    }

    /// `[X~, A]' (z - p) - blockdiag(0, Q) b`.
    pub fn gradient(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check(b)?;
        let f = self.system.fixed;
        let eta = self.linear_predictor(b);
        let mut g = vec![0.0; b.len()];
        for (i, (&e, &z)) in eta.iter().zip(self.z).enumerate() {
            let r = f64::from(z) - logistic(e);
            for (gj, x) in g.iter_mut().zip(self.xt.row(i).iter()) {
                *gj += r * x;
            }
            if let Some(a) = self.a {
                for (c, wt) in a.row_entries(i) {
                    g[f + c] += r * wt;
                }
            }
        }
        if let Some(q) = self.prior {
            if self.system.effects > 0 {
                let qw = q.mul_vec(&b[f..])?;
                for (gj, v) in g[f..].iter_mut().zip(qw) {
                    *gj -= v;
                }
            }
        }
        Ok(g)
    }

    /// Negative Hessian `blockdiag(0, Q) + [X~, A]' D [X~, A]` with
    /// `D = diag(p (1 - p))`.
    pub fn precision(&self, b: &[f64]) -> Result<SparseSymMatrix> {
        self.check(b)?;
        let sys = self.system;
        let mut values = vec![0.0; sys.pattern.nnz()];
        if let Some(q) = self.prior {
            for (slot, v) in sys.prior_slots.iter().zip(q.values()) {
                values[*slot] += v;
            }
        }
        let eta = self.linear_predictor(b);
        for (i, &e) in eta.iter().enumerate() {
            let p = logistic(e);
            let d = p * (1.0 - p);
            let v = self.row_values(i);
            let mut k = 0;
            for s in 0..v.len() {
                for t in 0..=s {
                    let (slot, mult) = sys.obs_slots[i][k];
                    values[slot] += mult * d * v[s] * v[t];
                    k += 1;
                }
            }
        }
        sys.pattern.with_values(values)
    }

    pub fn factorize(&self, m: &SparseSymMatrix) -> Result<CholFactor> {
        self.system.symbolic.factorize(m)
    }
}

/// Mode of the Bernoulli-block posterior and the factorized precision there.
pub struct LaplaceMode {
    pub mode: Vec<f64>,
    pub precision: SparseSymMatrix,
    pub factor: CholFactor,
    /// Newton steps taken.
    pub iterations: usize,
}

const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 30;

/// Newton-Raphson with step halving, started from `start`.
///
/// Converges when the largest gradient entry is below `1e-8` and the next
/// Newton step is negligible; a likelihood with its mode at infinity keeps
/// taking unit-size steps and ends in `NoConvergence`.
pub fn newton_raphson_mode(target: &LogisticTarget, start: &[f64]) -> Result<LaplaceMode> {
    let mut b = start.to_vec();
    let mut lp = target.log_posterior(&b)?;
    let mut gnorm = f64::INFINITY;
    for it in 0..=NEWTON_MAX_ITER {
        let g = target.gradient(&b)?;
        gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let precision = target.precision(&b)?;
        let factor = target.factorize(&precision)?;
        let step = factor.solve(&g)?;
        let smax = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-8 && smax <= 1e-6 * (1.0 + bmax) {
            return Ok(LaplaceMode { mode: b, precision, factor, iterations: it });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let mut scale = 1.0;
        let mut halvings = 0;
        loop {
            let cand: Vec<f64> = b.iter().zip(&step).map(|(x, s)| x + scale * s).collect();
            let lp_new = target.log_posterior(&cand)?;
            if lp_new >= lp || (lp_new - lp).abs() <= 1e-12 * lp.abs().max(1.0) {
                b = cand;
                lp = lp_new.max(lp);
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::StepHalvingExhausted { iteration: it });
            }
            scale *= 0.5;
        }
    }
    Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, gradient_norm: gnorm })
}

/// One draw from `N(mode, precision^{-1})`.
pub fn laplace_sample_b<R: Rng + ?Sized>(laplace: &LaplaceMode, rng: &mut R) -> Result<Vec<f64>> {
    laplace.factor.sample(&laplace.mode, rng)
}

/// Independence Metropolis-Hastings step using the Laplace approximation as
/// proposal. Returns the new block and whether it moved.
pub fn laplace_corrected_step<R: Rng + ?Sized>(
    target: &LogisticTarget,
    laplace: &LaplaceMode,
    current: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    let proposal = laplace_sample_b(laplace, rng)?;
    let log_q = |b: &[f64]| -> Result<f64> {
        let d: Vec<f64> = b.iter().zip(&laplace.mode).map(|(x, m)| x - m).collect();
        Ok(-0.5 * laplace.precision.quad_form(&d)?)
    };
    let log_ratio =
        target.log_posterior(&proposal)? - log_q(&proposal)? - target.log_posterior(current)? + log_q(current)?;
    if rng.random::<f64>().ln() < log_ratio {
        Ok((proposal, true))
    } else {
        Ok((current.to_vec(), false))
    }
}

/// Runs the mixture Gibbs sampler with EM-initialized labels.
pub fn fit_mixture(data: &FootprintTable, mesh: &Mesh, config: &MixtureConfig) -> Result<ChainDraws<MixtureState>> {
    let inputs = SpatialInputs::new(mesh, data)?;
    fit_mixture_with(data, &inputs, config, None)
}

/// Runs the mixture sampler; `initial_labels` replaces the EM start.
pub fn fit_mixture_with(
    data: &FootprintTable,
    inputs: &SpatialInputs,
    config: &MixtureConfig,
    initial_labels: Option<&[u8]>,
) -> Result<ChainDraws<MixtureState>> {
    let mcmc = &config.mcmc;
    mcmc.validate()?;
    for prior in config.priors.iter().chain(std::iter::once(&config.prior_z)) {
        prior.validate()?;
    }
    let n = data.len();
    let p = data.num_covariates();
    if n <= 2 * (p + 2) {
        return Err(Error::RankDeficientDesign);
    }
    let centering = Centering::fit(&data.covariates, config.standardize);
    let xt = with_intercept(&centering.apply(&data.covariates)?);
    let y = &data.response;
    let a = &inputs.a;
    let system = &inputs.system;
    let k = system.dim();

    let z = match initial_labels {
        Some(l) if l.len() == n => l.iter().map(|&v| u8::from(v != 0)).collect(),
        Some(l) => return Err(Error::DimensionMismatch { expected: n, got: l.len(), context: "initial labels" }),
        None => em_init_z(y, config.em_means[0], config.em_means[1])?.0,
    };

    let all: Vec<usize> = (0..n).collect();
    let (global_coef, global_var) = ols(y, &xt, &all)?;
    let class_start = |j: u8| -> Result<TypicalState> {
        let rows: Vec<usize> = (0..n).filter(|&i| z[i] == j).collect();
        let (coef, var) = if rows.len() >= p + 2 {
            ols(y, &xt, &rows).unwrap_or((global_coef.clone(), global_var))
        } else {
            (global_coef.clone(), global_var)
        };
        let var = var.max(1e-8 * global_var.max(1e-300));
        Ok(TypicalState {
            mu: coef[0],
            beta: coef[1..].to_vec(),
            w: vec![0.0; k],
            theta: initial_theta(var, data),
            tau2: var,
        })
    };
    let classes = [class_start(0)?, class_start(1)?];
    let frac = z.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let frac = frac.clamp(0.5 / n as f64, 1.0 - 0.5 / n as f64);
    let theta_z = MaternParams { sigma2: 1.0, phi: initial_theta(1.0, data).phi };
    let mut state =
        MixtureState { z, classes, mu_z: (frac / (1.0 - frac)).ln(), beta_z: vec![0.0; p], w_z: vec![0.0; k], theta_z };

    let mut blocks = [
        ThetaBlock::new(system, state.classes[0].theta, mcmc)?,
        ThetaBlock::new(system, state.classes[1].theta, mcmc)?,
        ThetaBlock::new(system, state.theta_z, mcmc)?,
    ];
    let logistic_system = LogisticSystem::new(&xt, Some(a), Some(system.spde().pattern()))?;

    let mut rng = mcmc.rng();
    let mut states = Vec::with_capacity(mcmc.draws);
    let mut factorizations = Vec::with_capacity(mcmc.total_iterations());
    // Newton starts from the previous mode, which moves little between sweeps.
    let mut last_mode = state.bernoulli_block();

    for it in 0..mcmc.total_iterations() {
        if it == mcmc.burn_in {
            blocks.iter_mut().for_each(|b| b.walk.freeze());
        }
        let mut counts = FactorizationCounts::default();

        if !config.freeze_labels {
            state.z = sample_z(y, &xt, a, &state, &mut rng)?;
        }

        for j in 0..2u8 {
            let rows: Vec<usize> = (0..n).filter(|&i| state.z[i] == j).collect();
            let class = &mut state.classes[j as usize];
            let theta = blocks[j as usize].theta;
            let m = system.conditional(theta, a, Some(&rows), class.tau2);
            let factor = system.factorize(&m)?;
            counts.conditional += 1;
            let design = Design { y, xt: &xt, a, rows: &rows };
            if rows.len() >= p + 2 {
                let mp = mean_param_system(&design, &factor, class.tau2)?;
                let gamma = mp.draw(&mut rng)?;
                class.w = factor.sample(&mp.w_mean(&gamma, class.tau2), &mut rng)?;
                class.mu = gamma[0];
                class.beta = gamma[1..].to_vec();
                let r = residuals(&design, &gamma, &class.w);
                class.tau2 = sample_tau2(&r, &mut rng)?;
            } else {
                let gamma: Vec<f64> = std::iter::once(class.mu).chain(class.beta.iter().copied()).collect();
                let r: Vec<f64> =
                    (0..n).map(|i| if state.z[i] == j { y[i] - design.fitted_mean(i, &gamma) } else { 0.0 }).collect();
                let mut rhs = a.transpose_mul_vec(&r, Some(&rows));
                rhs.iter_mut().for_each(|v| *v /= class.tau2);
                class.w = factor.sample(&factor.solve(&rhs)?, &mut rng)?;
            }
        }

        if !config.freeze_bernoulli {
            let q_z = system.spde().precision(blocks[2].theta);
            let target =
                LogisticTarget { system: &logistic_system, xt: &xt, a: Some(a), z: &state.z, prior: Some(&q_z) };
            let current = state.bernoulli_block();
            match newton_raphson_mode(&target, &last_mode) {
                Ok(laplace) => {
                    last_mode.clone_from(&laplace.mode);
                    counts.newton += laplace.iterations;
                    counts.laplace_mode += 1;
                    let b = if config.laplace_correction {
                        laplace_corrected_step(&target, &laplace, &current, &mut rng)?.0
                    } else {
                        laplace_sample_b(&laplace, &mut rng)?
                    };
                    state.set_bernoulli_block(&b);
                }
                Err(Error::NoConvergence { iterations, .. }) => counts.newton += iterations,
                Err(Error::StepHalvingExhausted { iteration }) => counts.newton += iteration,
                Err(e) => return Err(e),
            }
        }

        for j in 0..2 {
            blocks[j].step(system, &state.classes[j].w, &config.priors[j], &mut rng, &mut counts)?;
            state.classes[j].theta = blocks[j].theta;
        }
        if !config.freeze_bernoulli {
            blocks[2].step(system, &state.w_z, &config.prior_z, &mut rng, &mut counts)?;
            state.theta_z = blocks[2].theta;
        }

        factorizations.push(counts);
        if mcmc.keep(it) {
            states.push(state.clone());
        }
    }

    Ok(ChainDraws {
        states,
        seed: mcmc.seed,
        chain: mcmc.chain,
        burn_in: mcmc.burn_in,
        thin: mcmc.thin,
        centering,
        acceptance: blocks.iter().map(|b| b.walk.acceptance_rate()).collect(),
        factorizations,
    })
}

/// Per-point share of draws with label 1.
pub fn label_frequencies(draws: &ChainDraws<MixtureState>) -> Vec<f64> {
    let Some(first) = draws.states.first() else {
        return Vec::new();
    };
    let mut freq = vec![0.0; first.z.len()];
    for s in &draws.states {
        for (f, &z) in freq.iter_mut().zip(&s.z) {
            *f += f64::from(z);
        }
    }
    let m = draws.states.len() as f64;
    freq.iter_mut().for_each(|f| *f /= m);
    freq
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_even() {
        let p = membership_probability(0.0, log_normal_pdf(2.0, 3.0, 1.0), log_normal_pdf(2.0, 1.0, 1.0));
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn capped_log_odds_stay_finite() {
        assert_eq!(membership_probability(1e6, 0.0, 0.0), 1.0);
        assert!(membership_probability(-1e6, 0.0, 0.0) >= 0.0);
        assert_eq!(membership_probability(f64::INFINITY, 0.0, 0.0), 1.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
