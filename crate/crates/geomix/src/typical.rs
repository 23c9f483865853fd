//! Gibbs sampler for the single-process spatial regression
//! `y(s) = mu + x(s)'beta + eta(s) + eps(s)`.
//!
//! Each sweep draws `(mu, beta)` with `w` integrated out, then `w` given the
//! new mean parameters, then `tau2`, then `theta` by Metropolis-Hastings.
//! The first two draws share one factorization of
//! `Q(theta) + A'A / tau2`; the `theta` proposal needs a second one.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, Centering, FootprintTable};
use crate::error::{Error, Result};
use crate::latent::LatentSystem;
use crate::linalg::{cholesky, CholFactor, SparseSymMatrix};
use crate::mesh::{Mesh, ProjectionMatrix};
use crate::proposal::AdaptiveWalk;
use crate::spde::{pc_log_prior, MaternParams, PcPrior, SpdePrecision};

/// One state of the typical-model chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalState {
    pub mu: f64,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub theta: MaternParams,
    pub tau2: f64,
}

/// Sparse factorizations performed, by purpose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationCounts {
    /// `Q(theta) + A'A / tau2` for the effect and mean-parameter draws.
    pub conditional: usize,
    /// `Q(theta')` for a Metropolis-Hastings proposal.
    pub proposal: usize,
    /// Newton-Raphson iterations of the Laplace step.
    pub newton: usize,
    /// Hessian at the Laplace mode, used for the draw.
    pub laplace_mode: usize,
}

impl FactorizationCounts {
    pub fn total(&self) -> usize {
        self.conditional + self.proposal + self.newton + self.laplace_mode
    }

    pub fn add(&mut self, other: &Self) {
        self.conditional += other.conditional;
        self.proposal += other.proposal;
        self.newton += other.newton;
        self.laplace_mode += other.laplace_mode;
    }
}

/// Posterior draws of one chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDraws<S> {
    pub states: Vec<S>,
    pub seed: u64,
    pub chain: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub centering: Centering,
    /// Post-burn-in Metropolis acceptance rate of each `theta` block.
    pub acceptance: Vec<f64>,
    /// Factorizations performed in every iteration, burn-in included.
    pub factorizations: Vec<FactorizationCounts>,
}

impl<S> ChainDraws<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Pools chains in order. Bookkeeping other than the states comes from
    /// the first chain; acceptance rates are averaged.
    pub fn concat(chains: Vec<Self>) -> Result<Self> {
        let mut iter = chains.into_iter();
        let mut first = iter.next().ok_or_else(|| Error::ConfigInvalid("no chains to combine".into()))?;
        let mut count = 1.0;
        for c in iter {
            if c.centering != first.centering || c.acceptance.len() != first.acceptance.len() {
                return Err(Error::ConfigInvalid("chains were fit to different data".into()));
            }
            first.acceptance.iter_mut().zip(&c.acceptance).for_each(|(a, b)| *a += b);
            first.states.extend(c.states);
            count += 1.0;
        }
        first.acceptance.iter_mut().for_each(|a| *a /= count);
        Ok(first)
    }
}

fn default_thin() -> usize {
    1
}

fn default_target() -> f64 {
    0.3
}

fn default_proposal_sd() -> f64 {
    0.1
}

/// Iteration counts, seed and proposal tuning shared by both samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub draws: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    pub seed: u64,
    #[serde(default)]
    pub chain: u64,
    #[serde(default = "default_target")]
    pub target_acceptance: f64,
    #[serde(default = "default_proposal_sd")]
    pub initial_proposal_sd: f64,
}

impl McmcConfig {
    pub fn new(burn_in: usize, draws: usize, seed: u64) -> Self {
        Self {
            burn_in,
            draws,
            thin: 1,
            seed,
            chain: 0,
            target_acceptance: default_target(),
            initial_proposal_sd: default_proposal_sd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.thin == 0 {
            return Err(Error::ConfigInvalid("draws and thin must be positive".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::ConfigInvalid("target_acceptance must be in (0, 1)".into()));
        }
        if !(self.initial_proposal_sd > 0.0) {
            return Err(Error::ConfigInvalid("initial_proposal_sd must be positive".into()));
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.draws * self.thin
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.chain);
        rng
    }

    pub(crate) fn keep(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypicalConfig {
    pub mcmc: McmcConfig,
    pub prior: PcPrior,
    #[serde(default)]
    pub standardize: bool,
}

/// Response, covariates with intercept column, projection, and the rows of
/// the observations taking part in a step.
#[derive(Clone, Copy)]
pub struct Design<'a> {
    pub y: &'a [f64],
    /// `n x (p + 1)`, first column ones.
    pub xt: &'a DMatrix<f64>,
    pub a: &'a ProjectionMatrix,
    pub rows: &'a [usize],
}

impl Design<'_> {
    fn check(&self) -> Result<()> {
        let n = self.y.len();
        if self.xt.nrows() != n || self.a.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.xt.nrows().min(self.a.nrows()),
                context: "Design rows",
            });
        }
        Ok(())
    }

    pub fn fitted_mean(&self, i: usize, gamma: &[f64]) -> f64 {
        self.xt.row(i).iter().zip(gamma).map(|(x, g)| x * g).sum()
    }
}

/// Posterior of `(mu, beta)` with `w` integrated out, in information form
/// `N(G^{-1} h, G^{-1})`, plus the solves reused by the `w` draw.
pub struct MeanParamSystem {
    pub precision: DMatrix<f64>,
    pub rhs: DVector<f64>,
    m_inv_aty: Vec<f64>,
    m_inv_atx: Vec<Vec<f64>>,
}

/// `X~' Sigma^{-1} X~` and `X~' Sigma^{-1} y` through the Woodbury identity
///
/// ```text
/// Sigma^{-1} = I / tau2 - A (Q + A'A / tau2)^{-1} A' / tau2^2
/// ```
///
/// where `factor` factorizes `Q + A'A / tau2` over `design.rows`.
pub fn mean_param_system(design: &Design, factor: &CholFactor, tau2: f64) -> Result<MeanParamSystem> {
    design.check()?;
    let q = design.xt.ncols();
    let a = design.a;
    let at_y = a.transpose_mul_vec(design.y, Some(design.rows));
    let mut m_inv_atx = Vec::with_capacity(q);
    let mut at_x = Vec::with_capacity(q);
    for c in 0..q {
        let col: Vec<f64> = design.xt.column(c).iter().copied().collect();
        let v = a.transpose_mul_vec(&col, Some(design.rows));
        m_inv_atx.push(factor.solve(&v)?);
        at_x.push(v);
    }
    let m_inv_aty = factor.solve(&at_y)?;

    let inv = 1.0 / tau2;
    let inv2 = inv * inv;
    let mut g = DMatrix::zeros(q, q);
    let mut h = DVector::zeros(q);
    for &i in design.rows {
        let row = design.xt.row(i);
        for r in 0..q {
            h[r] += row[r] * design.y[i] * inv;
            for c in 0..=r {
                g[(r, c)] += row[r] * row[c] * inv;
            }
        }
    }
    for r in 0..q {
        h[r] -= dot(&at_x[r], &m_inv_aty) * inv2;
        for c in 0..=r {
            g[(r, c)] -= dot(&at_x[r], &m_inv_atx[c]) * inv2;
            g[(c, r)] = g[(r, c)];
        }
    }
    Ok(MeanParamSystem { precision: g, rhs: h, m_inv_aty, m_inv_atx })
}

impl MeanParamSystem {
    pub fn mean(&self) -> Result<DVector<f64>> {
        let chol = self.precision.clone().cholesky().ok_or(Error::RankDeficientDesign)?;
        Ok(chol.solve(&self.rhs))
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let chol = self.precision.clone().cholesky().ok_or(Error::RankDeficientDesign)?;
        Ok(chol.inverse())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let chol = self.precision.clone().cholesky().ok_or(Error::RankDeficientDesign)?;
        let mean = chol.solve(&self.rhs);
        let eps = DVector::from_iterator(self.rhs.len(), (0..self.rhs.len()).map(|_| rng.sample(StandardNormal)));
        let l = chol.l();
        let z = l.transpose().solve_upper_triangular(&eps).ok_or(Error::RankDeficientDesign)?;
        Ok((mean + z).iter().copied().collect())
    }

    /// Conditional mean of `w` given `gamma = (mu, beta)`:
    /// `(Q + A'A / tau2)^{-1} A' (y - X~ gamma) / tau2`.
    pub fn w_mean(&self, gamma: &[f64], tau2: f64) -> Vec<f64> {
        let mut m = self.m_inv_aty.clone();
        for (col, g) in self.m_inv_atx.iter().zip(gamma) {
            for (mi, ci) in m.iter_mut().zip(col) {
                *mi -= g * ci;
            }
        }
        m.iter_mut().for_each(|v| *v /= tau2);
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y - X~ gamma - A w` over `rows`.
pub fn residuals(design: &Design, gamma: &[f64], w: &[f64]) -> Vec<f64> {
    design.rows.iter().map(|&i| design.y[i] - design.fitted_mean(i, gamma) - design.a.row_dot(i, w)).collect()
}

/// Inverse-gamma draw with shape `n / 2` and rate `r'r / 2`.
pub fn sample_tau2<R: Rng + ?Sized>(residual: &[f64], rng: &mut R) -> Result<f64> {
    if residual.is_empty() {
        return Err(Error::InvalidParameter("need at least one residual".into()));
    }
    let rate = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    if !(rate >= 1e-300) {
        return Err(Error::ZeroResidual);
    }
    let shape = residual.len() as f64 / 2.0;
    let g: f64 = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng);
    Ok(rate / g)
}

/// Unnormalized log target of `(log sigma2, log phi)` given `w`:
/// `log|Q|/2 - w'Qw/2 + log prior(sigma, phi) + log Jacobian`.
pub fn theta_log_target(log_det: f64, quad: f64, theta: MaternParams, prior: &PcPrior) -> f64 {
    // d sigma / d log sigma2 = sigma / 2 and d phi / d log phi = phi.
    let jacobian = 0.5 * theta.sigma2.ln() + theta.phi.ln();
    0.5 * log_det - 0.5 * quad + pc_log_prior(theta, prior) + jacobian
}

/// Current-state quantities of one Matérn block needed by the MH step.
#[derive(Clone, Debug)]
pub(crate) struct ThetaBlock {
    pub theta: MaternParams,
    pub log_det: f64,
    pub walk: AdaptiveWalk,
}

impl ThetaBlock {
    pub fn new(system: &LatentSystem, theta: MaternParams, mcmc: &McmcConfig) -> Result<Self> {
        let f = system.factorize(&system.prior(theta))?;
        Ok(Self {
            theta,
            log_det: f.log_det(),
            walk: AdaptiveWalk::new(mcmc.initial_proposal_sd, mcmc.target_acceptance),
        })
    }

    /// One Metropolis-Hastings update; counts the proposal factorization.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        system: &LatentSystem,
        w: &[f64],
        prior: &PcPrior,
        rng: &mut R,
        counts: &mut FactorizationCounts,
    ) -> Result<bool> {
        let current = [self.theta.sigma2.ln(), self.theta.phi.ln()];
        let proposed = self.walk.propose(current, rng);
        let theta_new = MaternParams { sigma2: proposed[0].exp(), phi: proposed[1].exp() };
        let quad_old = system.prior(self.theta).quad_form(w)?;
        let (accept_prob, new_log_det) = if theta_new.validate().is_ok() {
            let q_new = system.prior(theta_new);
            counts.proposal += 1;
            match system.factorize(&q_new) {
                Ok(f) => {
                    let ld = f.log_det();
                    let quad_new = q_new.quad_form(w)?;
                    let log_ratio = theta_log_target(ld, quad_new, theta_new, prior)
                        - theta_log_target(self.log_det, quad_old, self.theta, prior);
                    (if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() }, ld)
                }
                Err(_) => (0.0, f64::NAN),
            }
        } else {
            (0.0, f64::NAN)
        };
        let accepted = rng.random::<f64>() < accept_prob;
        if accepted {
            self.theta = theta_new;
            self.log_det = new_log_det;
        }
        self.walk.record(accept_prob, accepted, [self.theta.sigma2.ln(), self.theta.phi.ln()]);
        Ok(accepted)
    }
}

/// Builds `Q + A'A / tau2` for an arbitrary prior precision, merging patterns.
fn conditional_dense_path(
    q: &SparseSymMatrix,
    a: &ProjectionMatrix,
    rows: &[usize],
    tau2: f64,
) -> Result<SparseSymMatrix> {
    let mut triplets: Vec<(usize, usize, f64)> = q.iter().collect();
    for &i in rows {
        let (c, w) = a.row(i);
        for s in 0..3 {
            for t in 0..=s {
                let mult = if s == t { 1.0 } else { 2.0 };
                let v = w[s] * w[t] / tau2;
                if c[s] == c[t] {
                    triplets.push((c[s], c[s], mult * v));
                } else {
                    triplets.push((c[s], c[t], v));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(q.dim(), &triplets)
}

/// Draw of `w` given `(mu, beta, theta, tau2)` for a prior precision `q`.
pub fn sample_w<R: Rng + ?Sized>(
    y: &[f64],
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    state: &TypicalState,
    q: &SparseSymMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let xt = with_intercept(x);
    let rows: Vec<usize> = (0..y.len()).collect();
    let design = Design { y, xt: &xt, a, rows: &rows };
    design.check()?;
    let m = conditional_dense_path(q, a, &rows, state.tau2)?;
    let factor = cholesky(&m)?;
    let gamma: Vec<f64> = std::iter::once(state.mu).chain(state.beta.iter().copied()).collect();
    let r: Vec<f64> = rows.iter().map(|&i| y[i] - design.fitted_mean(i, &gamma)).collect();
    let mut rhs = a.transpose_mul_vec(&r, None);
    rhs.iter_mut().for_each(|v| *v /= state.tau2);
    let mean = factor.solve(&rhs)?;
    factor.sample(&mean, rng)
}

/// Joint draw of `(mu, beta)` with `w` integrated out.
pub fn sample_mean_params<R: Rng + ?Sized>(
    y: &[f64],
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    state: &TypicalState,
    q: &SparseSymMatrix,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let system = mean_params_for(y, x, a, state.tau2, q)?;
    let g = system.draw(rng)?;
    Ok((g[0], g[1..].to_vec()))
}

/// Information-form posterior of `(mu, beta)` for a prior precision `q`.
pub fn mean_params_for(
    y: &[f64],
    x: &DMatrix<f64>,
    a: &ProjectionMatrix,
    tau2: f64,
    q: &SparseSymMatrix,
) -> Result<MeanParamSystem> {
    let n = y.len();
    if n < x.ncols() + 2 {
        return Err(Error::RankDeficientDesign);
    }
    let xt = with_intercept(x);
    let rows: Vec<usize> = (0..n).collect();
    let design = Design { y, xt: &xt, a, rows: &rows };
    let m = conditional_dense_path(q, a, &rows, tau2)?;
    let factor = cholesky(&m)?;
    mean_param_system(&design, &factor, tau2)
}

/// One Metropolis-Hastings update of `theta` given `w`.
pub fn mh_theta<R: Rng + ?Sized>(
    w: &[f64],
    theta: MaternParams,
    prior: &PcPrior,
    proposal_sd: [f64; 2],
    spde: &SpdePrecision,
    rng: &mut R,
) -> Result<(MaternParams, bool)> {
    let walk = AdaptiveWalk::fixed(proposal_sd);
    let current = [theta.sigma2.ln(), theta.phi.ln()];
    let p = walk.propose(current, rng);
    let proposed = MaternParams { sigma2: p[0].exp(), phi: p[1].exp() };
    let log_ratio = mh_log_ratio(w, theta, proposed, prior, spde);
    let accept = match log_ratio {
        Ok(r) if !r.is_nan() => rng.random::<f64>() < r.min(0.0).exp(),
        _ => false,
    };
    Ok(if accept { (proposed, true) } else { (theta, false) })
}

/// Log acceptance ratio of moving from `current` to `proposed`.
pub fn mh_log_ratio(
    w: &[f64],
    current: MaternParams,
    proposed: MaternParams,
    prior: &PcPrior,
    spde: &SpdePrecision,
) -> Result<f64> {
    let target = |theta: MaternParams| -> Result<f64> {
        theta.validate()?;
        let q = spde.precision(theta);
        let f = spde.symbolic().factorize(&q)?;
        Ok(theta_log_target(f.log_det(), q.quad_form(w)?, theta, prior))
    };
    Ok(target(proposed)? - target(current)?)
}

/// Shared, read-only inputs of a fit on one mesh: precision template and the
/// projection of the observations.
#[derive(Clone, Debug)]
pub struct SpatialInputs {
    pub spde: Arc<SpdePrecision>,
    pub a: ProjectionMatrix,
    pub system: LatentSystem,
}

impl SpatialInputs {
    pub fn new(mesh: &Mesh, data: &FootprintTable) -> Result<Self> {
        let spde = Arc::new(SpdePrecision::from_mesh(mesh)?);
        Self::with_spde(spde, mesh, data)
    }

    pub fn with_spde(spde: Arc<SpdePrecision>, mesh: &Mesh, data: &FootprintTable) -> Result<Self> {
        let a = mesh.projection_matrix(&data.coords)?;
        let system = LatentSystem::new(Arc::clone(&spde), &a)?;
        Ok(Self { spde, a, system })
    }
}

/// Ordinary least squares fit of `y` on `X~` over `rows`; returns the
/// coefficients and the residual variance.
pub(crate) fn ols(y: &[f64], xt: &DMatrix<f64>, rows: &[usize]) -> Result<(Vec<f64>, f64)> {
    let q = xt.ncols();
    if rows.len() < q + 1 {
        return Err(Error::RankDeficientDesign);
    }
    let mut g = DMatrix::zeros(q, q);
    let mut h = DVector::zeros(q);
    for &i in rows {
        let r = xt.row(i);
        for a in 0..q {
            h[a] += r[a] * y[i];
            for b in 0..q {
                g[(a, b)] += r[a] * r[b];
            }
        }
    }
    let coef = g.cholesky().ok_or(Error::RankDeficientDesign)?.solve(&h);
    let coef: Vec<f64> = coef.iter().copied().collect();
    let ss: f64 = rows
        .iter()
        .map(|&i| {
            let f: f64 = xt.row(i).iter().zip(&coef).map(|(x, c)| x * c).sum();
            (y[i] - f).powi(2)
        })
        .sum();
    let var = ss / (rows.len() - q).max(1) as f64;
    Ok((coef, var))
}

/// Sample variance of a slice (`n - 1` denominator).
pub(crate) fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Default `theta` start: a tenth of the residual variance and a tenth of the
/// data extent.
pub(crate) fn initial_theta(residual_var: f64, data: &FootprintTable) -> MaternParams {
    let diameter = data.bounding_box().map_or(1.0, |b| b.diameter()).max(1.0);
    MaternParams { sigma2: (0.1 * residual_var).max(1e-6), phi: 0.1 * diameter }
}

/// Runs the typical-model Gibbs sampler.
pub fn fit_typical(data: &FootprintTable, mesh: &Mesh, config: &TypicalConfig) -> Result<ChainDraws<TypicalState>> {
    let inputs = SpatialInputs::new(mesh, data)?;
    fit_typical_with(data, &inputs, config)
}

pub fn fit_typical_with(
    data: &FootprintTable,
    inputs: &SpatialInputs,
    config: &TypicalConfig,
) -> Result<ChainDraws<TypicalState>> {
    config.mcmc.validate()?;
    config.prior.validate()?;
    let n = data.len();
    let p = data.num_covariates();
    if n <= p + 1 {
        return Err(Error::RankDeficientDesign);
    }
    let centering = Centering::fit(&data.covariates, config.standardize);
    let xt = with_intercept(&centering.apply(&data.covariates)?);
    let rows: Vec<usize> = (0..n).collect();
    let design = Design { y: &data.response, xt: &xt, a: &inputs.a, rows: &rows };
    design.check()?;
    let system = &inputs.system;

    let (_, res_var) = ols(&data.response, &xt, &rows)?;
    let mut tau2 = res_var.max(1e-8);
    let mut theta_block = ThetaBlock::new(system, initial_theta(res_var, data), &config.mcmc)?;

    let mcmc = &config.mcmc;
    let mut rng = mcmc.rng();
    let mut states = Vec::with_capacity(mcmc.draws);
    let mut factorizations = Vec::with_capacity(mcmc.total_iterations());

    for it in 0..mcmc.total_iterations() {
        if it == mcmc.burn_in {
            theta_block.walk.freeze();
        }
        let mut counts = FactorizationCounts::default();
        let theta = theta_block.theta;

        let m = system.conditional(theta, &inputs.a, None, tau2);
        let factor = system.factorize(&m)?;
        counts.conditional += 1;
        let mp = mean_param_system(&design, &factor, tau2)?;
        let gamma = mp.draw(&mut rng)?;
        let w_mean = mp.w_mean(&gamma, tau2);
        let w = factor.sample(&w_mean, &mut rng)?;

        let r = residuals(&design, &gamma, &w);
        tau2 = sample_tau2(&r, &mut rng)?;

        theta_block.step(system, &w, &config.prior, &mut rng, &mut counts)?;

        factorizations.push(counts);
        if mcmc.keep(it) {
            states.push(TypicalState {
                mu: gamma[0],
                beta: gamma[1..].to_vec(),
                w: w.clone(),
                theta: theta_block.theta,
                tau2,
            });
        }
    }

    Ok(ChainDraws {
        states,
        seed: mcmc.seed,
        chain: mcmc.chain,
        burn_in: mcmc.burn_in,
        thin: mcmc.thin,
        centering,
        acceptance: vec![theta_block.walk.acceptance_rate()],
        factorizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residual_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_tau2(&[0.0, 0.0], &mut rng), Err(Error::ZeroResidual)));
    }

    #[test]
    fn mcmc_config_validation() {
        let mut c = McmcConfig::new(10, 0, 1);
        assert!(c.validate().is_err());
        c.draws = 5;
        assert!(c.validate().is_ok());
        assert_eq!(c.total_iterations(), 15);
        assert!(!c.keep(9) && c.keep(10));
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let xt = with_intercept(&x);
        let y = [1.0, 3.0, 5.0, 7.1];
        let (coef, _) = ols(&y, &xt, &[0, 1, 2]).unwrap();
        assert!((coef[0] - 1.0).abs() < 1e-12 && (coef[1] - 2.0).abs() < 1e-12);
    }
}
