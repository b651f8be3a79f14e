//! The optimization-problem abstraction and the problem registry.
//!
//! A [`Problem`] bundles the cost `J(x)`, the vector constraint `h(x, δ)`, the
//! compact decision box, the scenario distribution for `δ`, and the risk level
//! `α`. The chance constraint is always joint: a scenario counts as satisfied
//! only when every component of `h(x, δ) + γ` is non-positive.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gmm::GmmParams;
use crate::lp::DiscreteMeasure;
use crate::sampling::{ScenarioModel, ScenarioSampleSet};
use crate::satisfaction::{ScanCounter, SatisfactionCounter};

/// Axis-aligned compact decision set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct DecisionBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for DecisionBox {
    type Error = crate::Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        DecisionBox::new(r.lower, r.upper)
    }
}

impl From<DecisionBox> for BoxRepr {
    fn from(b: DecisionBox) -> Self {
        BoxRepr {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl DecisionBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return domain("box bounds must be non-empty and of equal length");
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return domain(format!("box axis {i}: need finite lower < upper, got [{lo}, {hi}]"));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// Functional form of a problem. Implementations must be total on
/// `box × scenario support` and pure.
pub trait ProblemModel: Send + Sync {
    fn decision_dim(&self) -> usize;
    fn scenario_dim(&self) -> usize;
    fn constraint_dim(&self) -> usize;
    fn cost(&self, x: &[f64]) -> f64;
    fn constraint(&self, x: &[f64], delta: &[f64], out: &mut [f64]);

    /// Optional accelerated counter of satisfied scenarios. Must agree exactly
    /// with the scan over [`ProblemModel::constraint`].
    fn fast_counter<'a>(
        &'a self,
        _scenarios: &'a ScenarioSampleSet,
        _gamma: f64,
    ) -> Option<Box<dyn SatisfactionCounter + 'a>> {
        None
    }
}

#[derive(Clone)]
pub struct Problem {
    id: String,
    bounds: DecisionBox,
    alpha: f64,
    scenario_model: ScenarioModel,
    model: Arc<dyn ProblemModel>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("n", &self.n())
            .field("s", &self.s())
            .field("m", &self.m())
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        bounds: DecisionBox,
        alpha: f64,
        scenario_model: ScenarioModel,
        model: Arc<dyn ProblemModel>,
    ) -> Result<Self> {
        if bounds.dim() != model.decision_dim() {
            return domain("box dimension differs from the model's decision dimension");
        }
        if scenario_model.dim() != model.scenario_dim() {
            return domain("scenario model dimension differs from the model's scenario dimension");
        }
        if model.constraint_dim() == 0 {
            return domain("constraint dimension must be at least 1");
        }
        check_alpha(alpha)?;
        Ok(Self {
            id: id.into(),
            bounds,
            alpha,
            scenario_model,
            model,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.model.decision_dim()
    }

    pub fn s(&self) -> usize {
        self.model.scenario_dim()
    }

    pub fn m(&self) -> usize {
        self.model.constraint_dim()
    }

    pub fn bounds(&self) -> &DecisionBox {
        &self.bounds
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scenario_model(&self) -> &ScenarioModel {
        &self.scenario_model
    }

    pub fn model(&self) -> &Arc<dyn ProblemModel> {
        &self.model
    }

    /// `J(x)` for `x` inside the box.
    pub fn eval_cost(&self, x: &[f64]) -> Result<f64> {
        self.check_decision(x)?;
        Ok(self.model.cost(x))
    }

    /// `h(x, δ)` for `x` inside the box.
    pub fn eval_constraint(&self, x: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
        self.check_decision(x)?;
        if delta.len() != self.s() {
            return domain(format!("scenario has length {}, expected {}", delta.len(), self.s()));
        }
        let mut out = vec![0.0; self.m()];
        self.model.constraint(x, delta, &mut out);
        Ok(out)
    }

    /// Unchecked cost for hot loops whose inputs are known to be valid.
    pub(crate) fn cost_at(&self, x: &[f64]) -> f64 {
        self.model.cost(x)
    }

    pub(crate) fn satisfied_at(&self, x: &[f64], delta: &[f64], gamma: f64, buf: &mut [f64]) -> bool {
        self.model.constraint(x, delta, buf);
        is_satisfied(buf, gamma)
    }

    /// Counter of scenarios satisfied with margin `gamma`; uses the model's
    /// accelerated path when it has one.
    pub fn satisfaction_counter<'a>(
        &'a self,
        scenarios: &'a ScenarioSampleSet,
        gamma: f64,
    ) -> Box<dyn SatisfactionCounter + 'a> {
        self.model
            .fast_counter(scenarios, gamma)
            .unwrap_or_else(|| Box::new(ScanCounter::new(self, scenarios, gamma)))
    }

    fn check_decision(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return domain(format!("decision has length {}, expected {}", x.len(), self.n()));
        }
        if !self.bounds.contains(x) {
            return domain("decision lies outside the box");
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Joint indicator: every component of `hval + gamma` is `<= 0`.
pub fn is_satisfied(hval: &[f64], gamma: f64) -> bool {
    debug_assert!(gamma >= 0.0);
    hval.iter().all(|&h| h + gamma <= 0.0)
}

/// What a solver hands back: a point, a discrete measure, or a mixture density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyArtifact {
    Point { x: Vec<f64> },
    Discrete(DiscreteMeasure),
    Gmm(GmmParams),
}

impl PolicyArtifact {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyArtifact::Point { .. } => PolicyKind::Point,
            PolicyArtifact::Discrete(_) => PolicyKind::Discrete,
            PolicyArtifact::Gmm(_) => PolicyKind::Gmm,
        }
    }

    pub fn check(&self, bounds: &DecisionBox) -> Result<()> {
        match self {
            PolicyArtifact::Point { x } => {
                if !bounds.contains(x) {
                    return domain("point policy lies outside the box");
                }
            }
            PolicyArtifact::Discrete(m) => {
                m.check()?;
                if m.atoms().iter().any(|a| !bounds.contains(&a.x)) {
                    return domain("measure atom lies outside the box");
                }
            }
            PolicyArtifact::Gmm(g) => {
                g.check()?;
                if g.means().iter().any(|m| !bounds.contains(m)) {
                    return domain("mixture mean lies outside the box");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Point,
    Discrete,
    Gmm,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Point => "point",
            PolicyKind::Discrete => "discrete",
            PolicyKind::Gmm => "gmm",
        })
    }
}

/// `J(x) = -(x + 0.6)^2 + 2`, `h(x, δ) = x^2 + δ - 2`, `δ ~ N(0, 1)`, `x ∈ [-1, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Toy1d;

impl ProblemModel for Toy1d {
    fn decision_dim(&self) -> usize {
        1
    }

    fn scenario_dim(&self) -> usize {
        1
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    fn cost(&self, x: &[f64]) -> f64 {
        -(x[0] + 0.6).powi(2) + 2.0
    }

    fn constraint(&self, x: &[f64], delta: &[f64], out: &mut [f64]) {
        out[0] = x[0] * x[0] + delta[0] - 2.0;
    }

    fn fast_counter<'a>(
        &'a self,
        scenarios: &'a ScenarioSampleSet,
        gamma: f64,
    ) -> Option<Box<dyn SatisfactionCounter + 'a>> {
        Some(Box::new(Toy1dCounter::new(scenarios, gamma)))
    }
}

/// Sorted-scenario counter for the 1D benchmark. The satisfaction predicate
/// is monotone in δ, so a binary search with the exact same floating-point
/// expression reproduces the scan count.
struct Toy1dCounter {
    sorted: Vec<f64>,
    gamma: f64,
}

impl Toy1dCounter {
    fn new(scenarios: &ScenarioSampleSet, gamma: f64) -> Self {
        let mut sorted: Vec<f64> = scenarios.rows().map(|r| r[0]).collect();
        sorted.sort_by(f64::total_cmp);
        Self { sorted, gamma }
    }
}

impl SatisfactionCounter for Toy1dCounter {
    fn count(&self, x: &[f64]) -> usize {
        let x2 = x[0] * x[0];
        self.sorted.partition_point(|&d| x2 + d - 2.0 + self.gamma <= 0.0)
    }

    fn total(&self) -> usize {
        self.sorted.len()
    }
}

pub const TOY1D: &str = "toy1d";
pub const QUADROTOR: &str = "quadrotor";

pub fn toy1d() -> Problem {
    Problem::new(
        TOY1D,
        DecisionBox::new(vec![-1.0], vec![1.0]).expect("static box"),
        0.05,
        ScenarioModel::Normal {
            mean: 0.0,
            variance: 1.0,
        },
        Arc::new(Toy1d),
    )
    .expect("static problem")
}

/// Identifiers accepted by [`lookup`].
pub fn registered() -> &'static [(&'static str, &'static str)] {
    &[
        (TOY1D, "1D parabola with a Gaussian chance constraint, alpha = 0.05"),
        (
            QUADROTOR,
            "open-loop quadrotor with drag, mass/drag uncertainty and turbulence, alpha = 0.15",
        ),
    ]
}

pub fn lookup(id: &str) -> Result<Problem> {
    match id {
        TOY1D => Ok(toy1d()),
        QUADROTOR => crate::quadrotor::QuadrotorSpec::default().as_problem(),
        other => domain(format!("unknown problem '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_cost_values() {
        let p = toy1d();
        assert!((p.eval_cost(&[0.595]).unwrap() - 0.571975).abs() < 1e-12);
        assert!((p.eval_cost(&[0.595]).unwrap() - 0.572).abs() < 5e-4);
        assert_eq!(p.eval_cost(&[-0.6]).unwrap(), 2.0);
        assert!((p.eval_cost(&[1.0]).unwrap() + 0.56).abs() < 1e-12);
        assert!(p.eval_cost(&[1.5]).is_err());
        assert!(p.eval_cost(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn toy_constraint_values() {
        let p = toy1d();
        assert_eq!(p.eval_constraint(&[0.0], &[0.0]).unwrap(), vec![-2.0]);
        assert_eq!(p.eval_constraint(&[1.0], &[1.0]).unwrap(), vec![0.0]);
        let h = p.eval_constraint(&[0.595], &[0.0]).unwrap()[0];
        assert!((h + 1.645975).abs() < 1e-12);
        assert!(p.eval_constraint(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn indicator_convention() {
        assert!(is_satisfied(&[-2.0], 0.0));
        assert!(is_satisfied(&[0.0], 0.0));
        assert!(!is_satisfied(&[-0.005], 0.01));
        assert!(!is_satisfied(&[-1.0, 0.5], 0.0));
    }

    #[test]
    fn box_invariants() {
        assert!(DecisionBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(DecisionBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let b = DecisionBox::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(b.diameter(), 4.0);
        assert_eq!(b.volume(), 4.0);
    }

    #[test]
    fn alpha_must_be_open_unit() {
        assert!(toy1d().with_alpha(0.0).is_err());
        assert!(toy1d().with_alpha(1.0).is_err());
        assert!(toy1d().with_alpha(0.2).is_ok());
    }

    #[test]
    fn registry_has_both_problems() {
        assert!(lookup("toy1d").is_ok());
        let q = lookup("quadrotor").unwrap();
        assert_eq!((q.n(), q.s(), q.m()), (20, 42, 1));
        assert!((q.alpha() - 0.15).abs() < 1e-15);
        assert!(lookup("nope").is_err());
    }
}
