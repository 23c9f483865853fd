//! Random-walk Metropolis proposals on `(log sigma2, log phi)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Gaussian random walk in two dimensions whose covariance is tuned during
/// burn-in and frozen afterwards.
///
/// The overall scale follows a Robbins-Monro recursion toward the target
/// acceptance rate; once enough burn-in history exists the shape is replaced
/// by the empirical covariance of the visited states, which lines the
/// proposal up with the ridge between variance and range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveWalk {
    log_scale: f64,
    shape: [[f64; 2]; 2],
    target: f64,
    frozen: bool,
    history: Vec<[f64; 2]>,
    steps: usize,
    accepted: usize,
    proposed: usize,
}

const MIN_HISTORY: usize = 100;
const REESTIMATE_EVERY: usize = 50;

impl AdaptiveWalk {
    pub fn new(initial_sd: f64, target: f64) -> Self {
        Self {
            log_scale: initial_sd.ln(),
            shape: [[1.0, 0.0], [0.0, 1.0]],
            target,
            frozen: false,
            history: Vec::new(),
            steps: 0,
            accepted: 0,
            proposed: 0,
        }
    }

    /// Diagonal walk with fixed per-coordinate standard deviations.
    pub fn fixed(sd: [f64; 2]) -> Self {
        let mut w = Self::new(1.0, 0.3);
        w.shape = [[sd[0] * sd[0], 0.0], [0.0, sd[1] * sd[1]]];
        w.frozen = true;
        w
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let s2 = (2.0 * self.log_scale).exp();
        [[s2 * self.shape[0][0], s2 * self.shape[0][1]], [s2 * self.shape[1][0], s2 * self.shape[1][1]]]
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: [f64; 2], rng: &mut R) -> [f64; 2] {
        let c = self.covariance();
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
        let (e0, e1): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        [current[0] + l00 * e0, current[1] + l10 * e0 + l11 * e1]
    }

    /// Records the outcome of one step; while not frozen also adapts.
    pub fn record(&mut self, accept_prob: f64, accepted: bool, state: [f64; 2]) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.frozen {
            return;
        }
        self.steps += 1;
        let gain = (self.steps as f64).powf(-0.6);
        self.log_scale += gain * (accept_prob - self.target);
        self.history.push(state);
        let h = self.history.len();
        if h >= MIN_HISTORY && h.is_multiple_of(REESTIMATE_EVERY) {
            // Use the later half so the initial transient does not dominate.
            let recent = &self.history[h / 2..];
            if let Some(cov) = empirical_covariance(recent) {
                // Normalize to unit mean variance so log_scale keeps meaning.
                let norm = 0.5 * (cov[0][0] + cov[1][1]);
                if norm > 0.0 {
                    let old = (2.0 * self.log_scale).exp() * 0.5 * (self.shape[0][0] + self.shape[1][1]);
                    self.shape =
                        [[cov[0][0] / norm + 1e-6, cov[0][1] / norm], [cov[1][0] / norm, cov[1][1] / norm + 1e-6]];
                    let new_norm = 0.5 * (self.shape[0][0] + self.shape[1][1]);
                    self.log_scale = 0.5 * (old / new_norm).ln();
                }
            }
        }
    }

    /// Stops adaptation and resets the acceptance counters.
    pub fn freeze(&mut self) {
        self.frozen = true;
        self.history = Vec::new();
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn empirical_covariance(xs: &[[f64; 2]]) -> Option<[[f64; 2]; 2]> {
    if xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let m = [xs.iter().map(|x| x[0]).sum::<f64>() / n, xs.iter().map(|x| x[1]).sum::<f64>() / n];
    let mut c = [[0.0; 2]; 2];
    for x in xs {
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += (x[a] - m[a]) * (x[b] - m[b]) / (n - 1.0);
            }
        }
    }
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    (c[0][0] > 0.0 && c[1][1] > 0.0 && det > 0.0).then_some(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn learns_correlated_target() {
        // Target: bivariate normal with correlation 0.95.
        let rho: f64 = 0.95;
        let logp =
            |x: [f64; 2]| -> f64 { -(x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (2.0 * (1.0 - rho * rho)) };
        let mut walk = AdaptiveWalk::new(0.1, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = [0.0, 0.0];
        for _ in 0..5000 {
            let y = walk.propose(x, &mut rng);
            let a = (logp(y) - logp(x)).min(0.0).exp();
            let acc = rng.random::<f64>() < a;
            if acc {
                x = y;
            }
            walk.record(a, acc, x);
        }
        let c = walk.covariance();
        let corr = c[0][1] / (c[0][0] * c[1][1]).sqrt();
        assert!(corr > 0.8, "learned correlation {corr}");
        walk.freeze();
        for _ in 0..5000 {
            let y = walk.propose(x, &mut rng);
            let a = (logp(y) - logp(x)).min(0.0).exp();
            let acc = rng.random::<f64>() < a;
            if acc {
                x = y;
            }
            walk.record(a, acc, x);
        }
        let rate = walk.acceptance_rate();
        assert!((0.15..=0.5).contains(&rate), "acceptance {rate}");
    }
}
