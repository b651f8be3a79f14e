//! Penalty-method optimization of mixture parameters.
//!
//! The objective `∫ J p_θ` and the chance `∫ q_N p_θ` are estimated from `M`
//! box-conditioned draws. Draw `k` always consumes substream `k` of the
//! evaluation stream, so every estimate is a deterministic function of
//! `(θ, stream)` (common random numbers) and blocks can be summed in parallel
//! in a fixed order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, NelderMeadOptions};
use super::{GmmParams, MIN_ACCEPTANCE, WARM_UP};
use crate::error::{domain, Error, Result};
use crate::problem::{DecisionBox, Problem};
use crate::rng::{ids, RngStream};
use crate::sampling::ScenarioSampleSet;
use crate::satisfaction::SatisfactionCounter;

const BLOCK: usize = 256;
/// A single draw giving up after this many rejections signals collapsed support.
const MAX_ATTEMPTS_PER_DRAW: u64 = 10_000;
const INIT_SUBSTREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceStructure {
    #[default]
    Full,
    Diagonal,
}

#[derive(Clone, Debug)]
pub struct GmmSolveConfig {
    /// Monte Carlo draws `M` per estimate.
    pub mc_samples: usize,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub restarts: usize,
    /// Nelder–Mead iterations per penalty stage.
    pub max_iterations: usize,
    /// Accepted shortfall of the estimated chance below `1 − α`.
    pub tolerance: f64,
    /// Shortfall at which penalty escalation stops.
    pub stage_tolerance: f64,
    pub max_stages: usize,
    pub covariance: CovarianceStructure,
    /// Initial component standard deviation as a fraction of each box width.
    pub initial_scale: f64,
    /// Initial simplex edge in the unconstrained coordinates.
    pub step_scale: f64,
    /// Starting points used for the first restarts instead of random ones.
    pub warm_starts: Vec<GmmParams>,
    pub stream: RngStream,
}

impl Default for GmmSolveConfig {
    fn default() -> Self {
        Self {
            mc_samples: 4000,
            penalty_initial: 10.0,
            penalty_growth: 10.0,
            restarts: 4,
            max_iterations: 1500,
            tolerance: 0.005,
            stage_tolerance: 1e-4,
            max_stages: 6,
            covariance: CovarianceStructure::Full,
            initial_scale: 0.1,
            step_scale: 0.5,
            warm_starts: Vec::new(),
            stream: RngStream::new(0, ids::GMM),
        }
    }
}

impl GmmSolveConfig {
    pub fn check(&self) -> Result<()> {
        if self.mc_samples == 0 || self.restarts == 0 || self.max_iterations == 0 || self.max_stages == 0 {
            return domain("mc_samples, restarts, max_iterations and max_stages must be positive");
        }
        if !(self.penalty_initial > 0.0) || !(self.penalty_growth > 1.0) {
            return domain("penalty_initial must be positive and penalty_growth above 1");
        }
        if !(self.tolerance > 0.0) || !(self.stage_tolerance > 0.0) {
            return domain("tolerances must be positive");
        }
        if !(self.initial_scale > 0.0) || !(self.step_scale > 0.0) {
            return domain("initial_scale and step_scale must be positive");
        }
        Ok(())
    }
}

/// Unconstrained coordinates for mixtures of fixed shape over a box:
/// log-weights (normalized by softmax), box-sigmoid means and log factor
/// diagonals, followed by the raw strictly-lower factor entries for full
/// covariances. Decoded factor entries in row `i` are capped at the box width
/// along axis `i` in absolute value; wider components are nearly flat on the
/// box and only lower the acceptance rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    components: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    structure: CovarianceStructure,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Encoding {
    pub fn new(components: usize, bounds: &DecisionBox, structure: CovarianceStructure) -> Result<Self> {
        if components == 0 {
            return domain("L must be at least 1");
        }
        Ok(Self {
            components,
            lower: bounds.lower().to_vec(),
            upper: bounds.upper().to_vec(),
            structure,
        })
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn factor_len(&self) -> usize {
        let n = self.dim();
        match self.structure {
            CovarianceStructure::Full => n * (n + 1) / 2,
            CovarianceStructure::Diagonal => n,
        }
    }

    pub fn len(&self) -> usize {
        self.components * (1 + self.dim() + self.factor_len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, g: &GmmParams) -> Result<Vec<f64>> {
        let n = self.dim();
        if g.len() != self.components || g.dim() != n {
            return domain("mixture shape differs from the encoding");
        }
        let mut out = Vec::with_capacity(self.len());
        out.extend(g.weights().iter().map(|w| w.max(1e-300).ln()));
        for m in g.means() {
            for i in 0..n {
                let t = ((m[i] - self.lower[i]) / (self.upper[i] - self.lower[i])).clamp(1e-15, 1.0 - 1e-15);
                out.push((t / (1.0 - t)).ln());
            }
        }
        for f in g.factors() {
            out.extend((0..n).map(|i| f[i][i].ln()));
            if self.structure == CovarianceStructure::Full {
                for i in 1..n {
                    out.extend_from_slice(&f[i][..i]);
                }
            }
        }
        Ok(out)
    }

    pub fn decode(&self, z: &[f64]) -> Result<GmmParams> {
        if z.len() != self.len() {
            return domain("coordinate vector has the wrong length");
        }
        let (l, n) = (self.components, self.dim());
        let (logits, rest) = z.split_at(l);
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let (mean_part, factor_part) = rest.split_at(l * n);
        let means = mean_part
            .chunks_exact(n)
            .map(|c| {
                (0..n)
                    .map(|i| self.lower[i] + (self.upper[i] - self.lower[i]) * sigmoid(c[i]))
                    .collect()
            })
            .collect();
        let factors = factor_part
            .chunks_exact(self.factor_len())
            .map(|c| {
                let mut f = vec![vec![0.0; n]; n];
                for i in 0..n {
                    let width = self.upper[i] - self.lower[i];
                    f[i][i] = c[i].min(width.ln()).exp();
                }
                if self.structure == CovarianceStructure::Full {
                    let mut k = n;
                    for i in 1..n {
                        let width = self.upper[i] - self.lower[i];
                        for j in 0..i {
                            f[i][j] = c[k].clamp(-width, width);
                            k += 1;
                        }
                    }
                }
                f
            })
            .collect();
        GmmParams::new(weights, means, factors)
    }
}

/// Pre-drawn first attempts for every draw, plus the stream state to continue
/// from when a first attempt lands outside the box.
struct CrnDraws {
    dim: usize,
    first: Vec<f64>,
    rest: Vec<RngStream>,
}

impl CrnDraws {
    fn new(stream: &RngStream, count: usize, dim: usize) -> Self {
        let stride = dim + 1;
        let mut first = vec![0.0; count * stride];
        let mut rest = Vec::with_capacity(count);
        for (k, chunk) in first.chunks_exact_mut(stride).enumerate() {
            let mut s = stream.substream(k as u64);
            chunk[0] = s.uniform();
            for v in &mut chunk[1..] {
                *v = s.standard_normal();
            }
            rest.push(s);
        }
        Self { dim, first, rest }
    }

    fn len(&self) -> usize {
        self.rest.len()
    }
}

fn place(params: &GmmParams, cumulative: &[f64], u: f64, z: &[f64], out: &mut [f64]) {
    let last = cumulative.len() - 1;
    let l = cumulative.partition_point(|&c| c <= u * cumulative[last]).min(last);
    let (m, f) = (&params.means()[l], &params.factors()[l]);
    for i in 0..out.len() {
        out[i] = m[i] + (0..=i).map(|k| f[i][k] * z[k]).sum::<f64>();
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct BlockSums {
    cost: f64,
    satisfied: u64,
    attempts: u64,
}

/// Sums of cost and satisfied-scenario counts over all draws.
type CostFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

fn accumulate(
    params: &GmmParams,
    bounds: &DecisionBox,
    draws: &CrnDraws,
    cost: Option<CostFn<'_>>,
    counter: Option<&dyn SatisfactionCounter>,
) -> Result<BlockSums> {
    let n = draws.dim;
    let mut acc = 0.0;
    let cumulative: Vec<f64> = params
        .weights()
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    let blocks: Vec<Result<BlockSums>> = (0..draws.len().div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut sums = BlockSums::default();
            let mut x = vec![0.0; n];
            let mut z = vec![0.0; n];
            for k in b * BLOCK..((b + 1) * BLOCK).min(draws.len()) {
                let first = &draws.first[k * (n + 1)..(k + 1) * (n + 1)];
                place(params, &cumulative, first[0], &first[1..], &mut x);
                sums.attempts += 1;
                if !bounds.contains(&x) {
                    let mut s = draws.rest[k].clone();
                    let mut tries = 1;
                    loop {
                        if tries >= MAX_ATTEMPTS_PER_DRAW {
                            return Err(Error::DegenerateSupport {
                                rate: 1.0 / tries as f64,
                                attempts: tries,
                            });
                        }
                        let u = s.uniform();
                        for v in z.iter_mut() {
                            *v = s.standard_normal();
                        }
                        place(params, &cumulative, u, &z, &mut x);
                        tries += 1;
                        if bounds.contains(&x) {
                            break;
                        }
                    }
                    sums.attempts += tries - 1;
                }
                if let Some(c) = cost {
                    sums.cost += c(&x);
                }
                if let Some(q) = counter {
                    sums.satisfied += q.count(&x) as u64;
                }
            }
            Ok(sums)
        })
        .collect();
    let mut total = BlockSums::default();
    for b in blocks {
        let b = b?;
        total.cost += b.cost;
        total.satisfied += b.satisfied;
        total.attempts += b.attempts;
    }
    let accepted = draws.len() as u64;
    if total.attempts >= WARM_UP && (accepted as f64) < MIN_ACCEPTANCE * total.attempts as f64 {
        return Err(Error::DegenerateSupport {
            rate: accepted as f64 / total.attempts as f64,
            attempts: total.attempts,
        });
    }
    Ok(total)
}

fn check_params(params: &GmmParams, problem: &Problem, count: usize) -> Result<()> {
    if count == 0 {
        return domain("M must be at least 1");
    }
    if params.dim() != problem.n() {
        return domain("mixture dimension differs from the problem");
    }
    Ok(())
}

/// `(1/M) Σ_k J(x_k)` over box-conditioned draws.
pub fn estimate_objective(params: &GmmParams, problem: &Problem, count: usize, stream: &RngStream) -> Result<f64> {
    check_params(params, problem, count)?;
    let draws = CrnDraws::new(stream, count, problem.n());
    let cost = |x: &[f64]| problem.cost_at(x);
    let sums = accumulate(params, problem.bounds(), &draws, Some(&cost), None)?;
    Ok(sums.cost / count as f64)
}

/// `(1/M) Σ_k q_N(x_k)` over box-conditioned draws, `q_N` taken on `scenarios`.
pub fn estimate_chance(
    params: &GmmParams,
    problem: &Problem,
    scenarios: &ScenarioSampleSet,
    count: usize,
    stream: &RngStream,
) -> Result<f64> {
    check_params(params, problem, count)?;
    let draws = CrnDraws::new(stream, count, problem.n());
    let counter = problem.satisfaction_counter(scenarios, 0.0);
    let sums = accumulate(params, problem.bounds(), &draws, None, Some(counter.as_ref()))?;
    Ok(sums.satisfied as f64 / (count as f64 * scenarios.len() as f64))
}

/// A mixture together with its estimated objective and chance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmCandidate {
    pub params: GmmParams,
    pub objective: f64,
    pub chance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub warm_start: bool,
    pub initial_objective: f64,
    pub initial_chance: f64,
    pub objective: f64,
    pub chance: f64,
    pub feasible: bool,
    pub stages: usize,
    pub final_penalty: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSolution {
    pub params: GmmParams,
    pub objective: f64,
    pub chance: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

struct Evaluator<'a> {
    problem: &'a Problem,
    counter: Box<dyn SatisfactionCounter + 'a>,
    draws: CrnDraws,
    scenarios: usize,
    level: f64,
}

impl Evaluator<'_> {
    fn eval(&self, params: &GmmParams) -> Result<(f64, f64)> {
        let cost = |x: &[f64]| self.problem.cost_at(x);
        let sums = accumulate(
            params,
            self.problem.bounds(),
            &self.draws,
            Some(&cost),
            Some(self.counter.as_ref()),
        )?;
        let m = self.draws.len() as f64;
        Ok((sums.cost / m, sums.satisfied as f64 / (m * self.scenarios as f64)))
    }

    fn shortfall(&self, chance: f64) -> f64 {
        (self.level - chance).max(0.0)
    }

    fn penalized(&self, enc: &Encoding, z: &[f64], rho: f64) -> f64 {
        match enc.decode(z).and_then(|g| self.eval(&g)) {
            Ok((obj, chance)) => obj + rho * self.shortfall(chance).powi(2),
            Err(_) => f64::INFINITY,
        }
    }
}

fn random_start(bounds: &DecisionBox, components: usize, scale: f64, stream: &mut RngStream) -> Result<GmmParams> {
    let n = bounds.dim();
    let weights = vec![1.0 / components as f64; components];
    let means = (0..components)
        .map(|_| {
            (0..n)
                .map(|i| stream.uniform_range(bounds.lower()[i], bounds.upper()[i]))
                .collect()
        })
        .collect();
    let factors = (0..components)
        .map(|_| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| {
                            if i == k {
                                scale * (bounds.upper()[i] - bounds.lower()[i])
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    GmmParams::new(weights, means, factors)
}

fn run_restart(
    ev: &Evaluator<'_>,
    enc: &Encoding,
    start: &GmmParams,
    warm_start: bool,
    config: &GmmSolveConfig,
) -> Result<(GmmCandidate, RestartSummary)> {
    let z0 = enc.encode(start)?;
    let start = enc.decode(&z0)?;
    let (obj0, chance0) = ev.eval(&start)?;
    let steps = vec![config.step_scale; z0.len()];
    let opts = NelderMeadOptions {
        max_iterations: config.max_iterations,
        f_tol: 1e-9,
        x_tol: 1e-7,
    };
    let mut z = z0.clone();
    let mut rho = config.penalty_initial;
    let mut stages = 0;
    let mut evaluations = 1;
    loop {
        stages += 1;
        let from_current = ev.penalized(enc, &z, rho);
        let from_start = obj0 + rho * ev.shortfall(chance0).powi(2);
        let origin = if from_start < from_current { z0.clone() } else { z.clone() };
        let r = minimize(|v| ev.penalized(enc, v, rho), &origin, &steps, &opts);
        evaluations += r.evaluations + 1;
        z = r.x;
        let (_, chance) = ev.eval(&enc.decode(&z)?)?;
        if ev.shortfall(chance) <= config.stage_tolerance || stages >= config.max_stages {
            break;
        }
        rho *= config.penalty_growth;
    }
    let params = enc.decode(&z)?;
    let (objective, chance) = ev.eval(&params)?;
    let feasible = ev.shortfall(chance) <= config.tolerance;
    Ok((
        GmmCandidate {
            params,
            objective,
            chance,
        },
        RestartSummary {
            warm_start,
            initial_objective: obj0,
            initial_chance: chance0,
            objective,
            chance,
            feasible,
            stages,
            final_penalty: rho,
            evaluations,
        },
    ))
}

/// Best-of-restarts penalty solution of the mixture problem with `components`
/// kernels. Returns [`Error::GmmInfeasible`] with the least-infeasible
/// candidate when no restart reaches `1 − α − tolerance`.
pub fn solve_gmm(
    problem: &Problem,
    scenarios: &ScenarioSampleSet,
    components: usize,
    config: &GmmSolveConfig,
) -> Result<GmmSolution> {
    config.check()?;
    if scenarios.dim() != problem.s() || scenarios.is_empty() {
        return domain("scenarios do not match the problem");
    }
    let enc = Encoding::new(components, problem.bounds(), config.covariance)?;
    for w in &config.warm_starts {
        if w.len() != components || w.dim() != problem.n() {
            return domain("warm start has the wrong shape");
        }
    }
    let ev = Evaluator {
        problem,
        counter: problem.satisfaction_counter(scenarios, 0.0),
        draws: CrnDraws::new(&config.stream.substream(0), config.mc_samples, problem.n()),
        scenarios: scenarios.len(),
        level: 1.0 - problem.alpha(),
    };
    let total = config.restarts.max(config.warm_starts.len());
    let starts: Vec<(GmmParams, bool)> = (0..total)
        .map(|r| match config.warm_starts.get(r) {
            Some(w) => Ok((w.clone(), true)),
            None => {
                let mut s = config.stream.substream(INIT_SUBSTREAM_BASE + r as u64);
                random_start(problem.bounds(), components, config.initial_scale, &mut s).map(|g| (g, false))
            }
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<(GmmCandidate, RestartSummary)>> = starts
        .par_iter()
        .map(|(g, warm)| run_restart(&ev, &enc, g, *warm, config))
        .collect();
    let mut candidates = Vec::with_capacity(total);
    let mut summaries = Vec::with_capacity(total);
    for r in results {
        let (c, s) = r?;
        candidates.push(c);
        summaries.push(s);
    }
    let best_feasible = (0..total)
        .filter(|&r| summaries[r].feasible)
        .min_by(|&a, &b| candidates[a].objective.total_cmp(&candidates[b].objective));
    match best_feasible {
        Some(r) => {
            let c = candidates.swap_remove(r);
            Ok(GmmSolution {
                params: c.params,
                objective: c.objective,
                chance: c.chance,
                best_restart: r,
                restarts: summaries,
            })
        }
        None => {
            let r = (0..total)
                .max_by(|&a, &b| {
                    candidates[a]
                        .chance
                        .total_cmp(&candidates[b].chance)
                        .then(candidates[b].objective.total_cmp(&candidates[a].objective))
                })
                .expect("at least one restart");
            Err(Error::GmmInfeasible(Box::new(candidates.swap_remove(r))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::toy1d;
    use crate::satisfaction::exact_prob_toy1d;

    #[test]
    fn encoding_round_trip_full() {
        let b = DecisionBox::new(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap();
        let f1 = vec![vec![0.3, 0.0], vec![-0.2, 0.5]];
        let f2 = vec![vec![1.1, 0.0], vec![0.4, 0.05]];
        let g = GmmParams::new(
            vec![0.2, 0.8],
            vec![vec![0.1, 2.9], vec![-0.99, 0.5]],
            vec![f1, f2],
        )
        .unwrap();
        let enc = Encoding::new(2, &b, CovarianceStructure::Full).unwrap();
        let back = enc.decode(&enc.encode(&g).unwrap()).unwrap();
        for (a, c) in back.weights().iter().zip(g.weights()) {
            assert!((a - c).abs() < 1e-10);
        }
        for (a, c) in back.means().iter().flatten().zip(g.means().iter().flatten()) {
            assert!((a - c).abs() < 1e-10);
        }
        for (a, c) in back
            .factors()
            .iter()
            .flatten()
            .flatten()
            .zip(g.factors().iter().flatten().flatten())
        {
            assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_encoding_is_shorter() {
        let b = DecisionBox::cube(3, 0.0, 1.0).unwrap();
        assert_eq!(Encoding::new(2, &b, CovarianceStructure::Full).unwrap().len(), 2 * (1 + 3 + 6));
        assert_eq!(Encoding::new(2, &b, CovarianceStructure::Diagonal).unwrap().len(), 2 * (1 + 3 + 3));
    }

    #[test]
    fn tight_component_reproduces_point_values() {
        let p = toy1d();
        let g = GmmParams::isotropic(vec![1.0], vec![vec![0.5]], &[1e-4]).unwrap();
        let s = RngStream::new(4, ids::GMM);
        let obj = estimate_objective(&g, &p, 2000, &s).unwrap();
        assert!((obj - 0.79).abs() < 1e-3, "{obj}");
        let scen = crate::sampling::sample_scenarios(p.scenario_model(), 10_000, &mut RngStream::new(4, 2)).unwrap();
        let g0 = GmmParams::isotropic(vec![1.0], vec![vec![0.0]], &[1e-4]).unwrap();
        let c = estimate_chance(&g0, &p, &scen, 500, &s).unwrap();
        assert!((c - exact_prob_toy1d(0.0)).abs() < 0.02, "{c}");
    }

    #[test]
    fn estimates_are_common_random_numbers() {
        let p = toy1d();
        let g = GmmParams::isotropic(vec![0.4, 0.6], vec![vec![-0.3], vec![0.7]], &[0.3, 0.2]).unwrap();
        let s = RngStream::new(11, ids::GMM);
        assert_eq!(
            estimate_objective(&g, &p, 3000, &s).unwrap(),
            estimate_objective(&g, &p, 3000, &s).unwrap()
        );
    }
}
