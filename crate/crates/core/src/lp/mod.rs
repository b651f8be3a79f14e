//! The sample LP over discrete measures and the point-valued baseline.
//!
//! With decision samples `x_1..x_S`, costs `c_i = J(x_i)` and empirical
//! satisfaction probabilities `q_i`, the sample problem is
//!
//! ```text
//! min  cᵀμ   s.t.  Σ μ_i = 1,  qᵀμ >= 1 - α,  μ >= 0
//! ```
//!
//! Two rows means some optimal basic solution has at most two positive
//! weights. [`solve_sample_lp`] runs the revised simplex; [`pair_enumeration_oracle`]
//! enumerates every single point and every straddling pair and serves as an
//! independent check.

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sampling::DecisionSampleSet;
use crate::satisfaction::SatisfactionMatrix;
use simplex::{SimplexOutcome, StandardFormLp};

/// Feasibility slack when comparing a probability against `1 - α`.
const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    #[serde(default)]
    pub x: Vec<f64>,
    pub weight: f64,
}

/// Finitely supported probability measure on the decision samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    support: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Drops zero-weight atoms and checks the invariants.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let support: Vec<Atom> = atoms.into_iter().filter(|a| a.weight > 0.0).collect();
        let m = Self { support };
        m.check()?;
        Ok(m)
    }

    pub fn point_mass(index: usize, x: Vec<f64>) -> Self {
        Self {
            support: vec![Atom {
                index,
                x,
                weight: 1.0,
            }],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.support.is_empty() {
            return domain("measure has empty support");
        }
        if self.support.iter().any(|a| !(a.weight > 0.0) || !a.weight.is_finite()) {
            return domain("measure weights must be positive");
        }
        let total: f64 = self.support.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("measure weights sum to {total}"));
        }
        let mut idx: Vec<usize> = self.support.iter().map(|a| a.index).collect();
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return domain("measure support indices must be distinct");
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.support
    }

    pub fn support_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.support.iter().map(|a| a.index).collect();
        idx.sort_unstable();
        idx
    }

    /// Dense weight vector of length `len`.
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut mu = vec![0.0; len];
        for a in &self.support {
            mu[a.index] = a.weight;
        }
        mu
    }

    /// `Σ μ_i v_i` for a per-sample vector `v`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.support.iter().map(|a| a.weight * values[a.index]).sum()
    }

    /// Copies the decision coordinates of each atom from `points`.
    pub fn attach_points(&mut self, points: &DecisionSampleSet) {
        for a in &mut self.support {
            a.x = points.row(a.index).to_vec();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub measure: Option<DiscreteMeasure>,
    pub objective: Option<f64>,
    /// Chance constraint tight at the optimum.
    pub active_constraint: bool,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            measure: None,
            objective: None,
            active_constraint: false,
        }
    }

    fn from_measure(measure: DiscreteMeasure, costs: &[f64], q: &[f64], target: f64) -> Self {
        let objective = measure.expectation(costs);
        let level = measure.expectation(q);
        Self {
            status: LpStatus::Optimal,
            active_constraint: (level - target).abs() <= 1e-10,
            measure: Some(measure),
            objective: Some(objective),
        }
    }

    /// JSON document `{status, objective, support, alpha, tight}`.
    pub fn to_json(&self, alpha: f64) -> serde_json::Value {
        serde_json::json!({
            "status": self.status,
            "objective": self.objective,
            "support": self.measure.as_ref().map(|m| m.atoms().to_vec()).unwrap_or_default(),
            "alpha": alpha,
            "tight": self.active_constraint,
        })
    }
}

fn check_inputs(costs: &[f64], q: &[f64], alpha: f64) -> Result<()> {
    if costs.is_empty() || costs.len() != q.len() {
        return domain("costs and q must be non-empty and of equal length");
    }
    if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return domain("q entries must lie in [0, 1]");
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return domain("costs must be finite");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Globally optimal measure of the sample LP via the revised simplex.
///
/// Debug builds cross-check the objective against the pair oracle.
pub fn solve_sample_lp(costs: &[f64], q: &[f64], alpha: f64) -> Result<LpSolution> {
    check_inputs(costs, q, alpha)?;
    let s = costs.len();
    let target = 1.0 - alpha;

    // variables: μ_1..μ_S, surplus
    let mut row_sum = vec![1.0; s];
    row_sum.push(0.0);
    let mut row_chance = q.to_vec();
    row_chance.push(-1.0);
    let mut c = costs.to_vec();
    c.push(0.0);
    let lp = StandardFormLp {
        a: vec![row_sum, row_chance],
        b: vec![1.0, target],
        c,
    };

    let solution = match simplex::solve(&lp) {
        SimplexOutcome::Infeasible => LpSolution::infeasible(),
        SimplexOutcome::Unbounded => unreachable!("bounded feasible region"),
        SimplexOutcome::Optimal { x, .. } => {
            let atoms = x[..s]
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-14)
                .map(|(index, &weight)| Atom {
                    index,
                    x: Vec::new(),
                    weight,
                })
                .collect::<Vec<_>>();
            let total: f64 = atoms.iter().map(|a| a.weight).sum();
            let atoms = atoms
                .into_iter()
                .map(|a| Atom {
                    weight: a.weight / total,
                    ..a
                })
                .collect();
            LpSolution::from_measure(DiscreteMeasure::new(atoms)?, costs, q, target)
        }
    };

    if cfg!(debug_assertions) && s <= 4000 {
        let oracle = pair_enumeration_oracle(costs, q, alpha)?;
        debug_assert_eq!(oracle.status, solution.status, "simplex and pair oracle disagree on status");
        if let (Some(a), Some(b)) = (oracle.objective, solution.objective) {
            debug_assert!(
                (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                "simplex {b} vs pair oracle {a}"
            );
        }
    }
    Ok(solution)
}

/// Exhaustive `O(S²)` solver: best feasible single point or best straddling
/// pair mixed so the chance constraint is tight. Ties go to the
/// lexicographically smallest sorted support.
pub fn pair_enumeration_oracle(costs: &[f64], q: &[f64], alpha: f64) -> Result<LpSolution> {
    check_inputs(costs, q, alpha)?;
    let target = 1.0 - alpha;

    #[derive(Clone, Copy)]
    struct Candidate {
        objective: f64,
        support: [usize; 2],
        len: usize,
        // weights aligned with `support`
        weights: [f64; 2],
    }
    fn better(new: &Candidate, old: &Option<Candidate>) -> bool {
        match old {
            None => true,
            Some(o) => {
                let tie = 1e-12 * (1.0 + o.objective.abs());
                new.objective < o.objective - tie
                    || (new.objective <= o.objective + tie
                        && new.support[..new.len] < o.support[..o.len])
            }
        }
    }

    let mut best: Option<Candidate> = None;
    for i in 0..costs.len() {
        if q[i] >= target - PROB_TOL {
            let cand = Candidate {
                objective: costs[i],
                support: [i, usize::MAX],
                len: 1,
                weights: [1.0, 0.0],
            };
            if better(&cand, &best) {
                best = Some(cand);
            }
        }
    }
    let high: Vec<usize> = (0..q.len()).filter(|&i| q[i] > target + PROB_TOL).collect();
    let low: Vec<usize> = (0..q.len()).filter(|&j| q[j] < target - PROB_TOL).collect();
    for &i in &high {
        for &j in &low {
            // weight on j that makes the mixture exactly tight
            let lambda = (q[i] - target) / (q[i] - q[j]);
            let objective = (1.0 - lambda) * costs[i] + lambda * costs[j];
            let (support, weights) = if i < j {
                ([i, j], [1.0 - lambda, lambda])
            } else {
                ([j, i], [lambda, 1.0 - lambda])
            };
            let cand = Candidate {
                objective,
                support,
                len: 2,
                weights,
            };
            if better(&cand, &best) {
                best = Some(cand);
            }
        }
    }

    let Some(best) = best else {
        return Ok(LpSolution::infeasible());
    };
    let atoms = (0..best.len)
        .map(|k| Atom {
            index: best.support[k],
            x: Vec::new(),
            weight: best.weights[k],
        })
        .collect();
    Ok(LpSolution::from_measure(DiscreteMeasure::new(atoms)?, costs, q, target))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BaselineSolution {
    Optimal { index: usize, objective: f64 },
    Infeasible,
}

/// Best single sample whose empirical satisfaction is at least `1 - ε`;
/// ties go to the smallest index.
pub fn solve_ccp_baseline_q(costs: &[f64], q: &[f64], epsilon: f64) -> Result<BaselineSolution> {
    if costs.is_empty() || costs.len() != q.len() {
        return domain("costs and q must be non-empty and of equal length");
    }
    if !(0.0..1.0).contains(&epsilon) {
        return domain(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let target = 1.0 - epsilon;
    let mut best: Option<(usize, f64)> = None;
    for (i, (&c, &qi)) in costs.iter().zip(q).enumerate() {
        if qi >= target - PROB_TOL && best.is_none_or(|(_, b)| c < b) {
            best = Some((i, c));
        }
    }
    Ok(match best {
        Some((index, objective)) => BaselineSolution::Optimal { index, objective },
        None => BaselineSolution::Infeasible,
    })
}

/// [`solve_ccp_baseline_q`] on the row means of a satisfaction matrix built
/// with the desired margin γ.
pub fn solve_ccp_baseline(
    costs: &[f64],
    sat: &SatisfactionMatrix,
    epsilon: f64,
) -> Result<BaselineSolution> {
    if costs.len() != sat.rows() {
        return domain("costs length differs from the matrix row count");
    }
    solve_ccp_baseline_q(costs, sat.q(), epsilon)
}

/// Evaluation of the finite-sample feasibility bound
/// `1 - ⌈1/η⌉ ⌈2LD/γ⌉ⁿ exp(-2N(α - ε - β)²)` with `η` read as `β`.
/// Reported only; it certifies nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Raw right-hand side (may be negative or `-inf`).
    pub value: f64,
    /// `value` clamped into `[0, 1]`.
    pub clamped: f64,
    pub vacuous: bool,
    pub caveat: String,
}

#[allow(clippy::too_many_arguments)]
pub fn feasibility_bound_report(
    n: usize,
    lipschitz: f64,
    diameter: f64,
    samples: u64,
    epsilon: f64,
    beta: f64,
    alpha: f64,
    gamma: f64,
) -> Result<BoundReport> {
    if !(alpha > 0.0 && alpha < 1.0) || !(0.0..alpha).contains(&epsilon) {
        return domain("need 0 <= epsilon < alpha < 1");
    }
    if !(beta > 0.0 && beta < alpha - epsilon) {
        return domain("need 0 < beta < alpha - epsilon");
    }
    if !(gamma > 0.0) || !(lipschitz > 0.0) || !(diameter > 0.0) || n == 0 {
        return domain("need gamma, L, D > 0 and n >= 1");
    }
    let grid = (2.0 * lipschitz * diameter / gamma).ceil();
    let log_term = (1.0 / beta).ceil().ln() + n as f64 * grid.ln()
        - 2.0 * samples as f64 * (alpha - epsilon - beta).powi(2);
    let value = 1.0 - log_term.exp();
    Ok(BoundReport {
        value,
        clamped: value.clamp(0.0, 1.0),
        vacuous: value <= 0.0,
        caveat: "the grid granularity eta is taken equal to beta; \
                 this figure is informational and certifies nothing"
            .into(),
    })
}
