//! Gaussian mixture densities over the decision box.
//!
//! `p_θ(x) = Σ_l ω_l φ(x; m_l, Σ_l)` with `Σ_l = F_l F_lᵀ` for a lower
//! triangular factor `F_l`. All expectations taken by the solver are with
//! respect to the density conditioned on the box: [`sample_gmm`] draws from
//! `p_θ` and rejects draws outside the box.

pub mod nelder_mead;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::problem::DecisionBox;
use crate::rng::RngStream;
use crate::sampling::cholesky;

pub use solver::{
    estimate_chance, estimate_objective, solve_gmm, CovarianceStructure, Encoding, GmmCandidate,
    GmmSolution, GmmSolveConfig, RestartSummary,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmJson", into = "GmmJson")]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<Vec<Vec<f64>>>,
}

/// Wire form: full covariance matrices rather than factors.
#[derive(Serialize, Deserialize)]
struct GmmJson {
    #[serde(rename = "L")]
    components: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<GmmJson> for GmmParams {
    type Error = Error;
    fn try_from(j: GmmJson) -> Result<Self> {
        if j.components != j.weights.len() {
            return domain("L differs from the number of weights");
        }
        let factors = j.covariances.iter().map(|c| cholesky(c)).collect::<Result<_>>()?;
        GmmParams::new(j.weights, j.means, factors)
    }
}

impl From<GmmParams> for GmmJson {
    fn from(g: GmmParams) -> Self {
        GmmJson {
            components: g.len(),
            covariances: (0..g.len()).map(|l| g.covariance(l)).collect(),
            weights: g.weights,
            means: g.means,
        }
    }
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, factors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let g = Self {
            weights,
            means,
            factors,
        };
        g.check()?;
        Ok(g)
    }

    /// Isotropic components `sd² I`.
    pub fn isotropic(weights: Vec<f64>, means: Vec<Vec<f64>>, sd: &[f64]) -> Result<Self> {
        let n = means.first().map(Vec::len).unwrap_or(0);
        let factors = sd
            .iter()
            .map(|&s| {
                (0..n)
                    .map(|i| (0..n).map(|k| if i == k { s } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        Self::new(weights, means, factors)
    }

    pub fn check(&self) -> Result<()> {
        let l = self.weights.len();
        if l == 0 || self.means.len() != l || self.factors.len() != l {
            return domain("mixture needs L >= 1 weights, means and factors");
        }
        let n = self.means[0].len();
        if n == 0 || self.means.iter().any(|m| m.len() != n || m.iter().any(|v| !v.is_finite())) {
            return domain("component means must be finite and of equal dimension");
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("mixture weights must be non-negative");
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("mixture weights sum to {total}"));
        }
        for f in &self.factors {
            if f.len() != n || f.iter().any(|r| r.len() != n) {
                return domain("covariance factor has wrong shape");
            }
            for i in 0..n {
                if !(f[i][i] > 0.0) || !f[i][i].is_finite() {
                    return domain("covariance factor diagonal must be positive");
                }
                if f[i][i + 1..].iter().any(|&v| v != 0.0) {
                    return domain("covariance factor must be lower triangular");
                }
                if f[i].iter().any(|v| !v.is_finite()) {
                    return domain("covariance factor must be finite");
                }
            }
        }
        Ok(())
    }

    /// Number of components `L`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn factors(&self) -> &[Vec<Vec<f64>>] {
        &self.factors
    }

    pub fn covariance(&self, l: usize) -> Vec<Vec<f64>> {
        let f = &self.factors[l];
        let n = f.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| f[i][k] * f[j][k]).sum()).collect())
            .collect()
    }

    /// Unconditioned mixture density on ℝⁿ.
    pub fn pdf(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let log_norm = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let mut z = vec![0.0; n];
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.factors)
            .filter(|((w, _), _)| **w > 0.0)
            .map(|((w, m), f)| {
                // forward substitution F z = x - m
                let mut log_det = 0.0;
                for i in 0..n {
                    let mut v = x[i] - m[i];
                    for k in 0..i {
                        v -= f[i][k] * z[k];
                    }
                    z[i] = v / f[i][i];
                    log_det += f[i][i].ln();
                }
                let quad: f64 = z.iter().map(|v| v * v).sum();
                w * (log_norm - log_det - 0.5 * quad).exp()
            })
            .sum()
    }
}

/// Box-conditioned draws from a mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmSample {
    points: Vec<f64>,
    dim: usize,
    pub acceptance_rate: f64,
}

impl GmmSample {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }
}

/// Attempts before the acceptance rate is judged.
const WARM_UP: u64 = 1000;
const MIN_ACCEPTANCE: f64 = 1e-3;

/// One box-conditioned draw; `None` once the acceptance rate has collapsed.
pub(crate) struct BoxSampler<'a> {
    params: &'a GmmParams,
    bounds: &'a DecisionBox,
    cumulative: Vec<f64>,
    pub attempts: u64,
    pub accepted: u64,
}

impl<'a> BoxSampler<'a> {
    pub fn new(params: &'a GmmParams, bounds: &'a DecisionBox) -> Self {
        let mut acc = 0.0;
        let cumulative = params
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self {
            params,
            bounds,
            cumulative,
            attempts: 0,
            accepted: 0,
        }
    }

    pub fn draw(&mut self, stream: &mut RngStream, out: &mut [f64]) -> Result<()> {
        let n = self.params.dim();
        let mut z = vec![0.0; n];
        loop {
            if self.attempts >= WARM_UP
                && (self.accepted as f64) < MIN_ACCEPTANCE * self.attempts as f64
            {
                return Err(Error::DegenerateSupport {
                    rate: self.accepted as f64 / self.attempts as f64,
                    attempts: self.attempts,
                });
            }
            self.attempts += 1;
            let u = stream.uniform() * self.cumulative[self.cumulative.len() - 1];
            let l = self
                .cumulative
                .partition_point(|&c| c <= u)
                .min(self.cumulative.len() - 1);
            let (m, f) = (&self.params.means[l], &self.params.factors[l]);
            for v in z.iter_mut() {
                *v = stream.standard_normal();
            }
            for i in 0..n {
                out[i] = m[i] + (0..=i).map(|k| f[i][k] * z[k]).sum::<f64>();
            }
            if self.bounds.contains(out) {
                self.accepted += 1;
                return Ok(());
            }
        }
    }
}

/// `count` draws from `p_θ` conditioned on `bounds`, by rejection.
pub fn sample_gmm(
    params: &GmmParams,
    count: usize,
    stream: &mut RngStream,
    bounds: &DecisionBox,
) -> Result<GmmSample> {
    if count == 0 {
        return domain("M must be at least 1");
    }
    if params.dim() != bounds.dim() {
        return domain("mixture and box dimensions differ");
    }
    let n = params.dim();
    let mut sampler = BoxSampler::new(params, bounds);
    let mut points = vec![0.0; count * n];
    for row in points.chunks_exact_mut(n) {
        sampler.draw(stream, row)?;
    }
    Ok(GmmSample {
        points,
        dim: n,
        acceptance_rate: sampler.accepted as f64 / sampler.attempts as f64,
    })
}
