//! Out-of-sample Monte Carlo validation of policies.
//!
//! Every trial draws a decision from the policy and a fresh scenario, records
//! whether the constraint holds (margin 0) and the cost `J` of the decision.
//! Trials run in blocks of [`BLOCK`], block `b` consuming substream `b` of the
//! validation stream; violations are an integer count and cost sums are added
//! in block order, so reports do not depend on scheduling.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gmm::BoxSampler;
use crate::problem::{DecisionBox, PolicyArtifact, PolicyKind, Problem};
use crate::rng::{ids, RngStream};

pub const BLOCK: usize = 1024;
const Z95: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub problem: String,
    pub alpha: f64,
    pub policy_kind: PolicyKind,
    #[serde(rename = "M_val")]
    pub m_val: u64,
    pub violations: u64,
    pub violation_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Monte Carlo mean of `J` over the drawn decisions.
    pub expected_cost: f64,
    pub cost_stderr: f64,
    /// `Σ μ_i J(x_i)` for discrete measures, `J(x)` for points.
    pub exact_cost: Option<f64>,
    pub seed: u64,
}

impl ValidationReport {
    /// Exact cost when available, otherwise the Monte Carlo estimate.
    pub fn objective(&self) -> f64 {
        self.exact_cost.unwrap_or(self.expected_cost)
    }

    /// Standard error attached to [`ValidationReport::objective`].
    pub fn objective_stderr(&self) -> f64 {
        if self.exact_cost.is_some() {
            0.0
        } else {
            self.cost_stderr
        }
    }
}

/// Draws decisions from a policy: the point itself, a categorical draw over
/// the atoms, or a box-conditioned mixture draw.
struct Drawer<'a> {
    policy: &'a PolicyArtifact,
    cumulative: Vec<f64>,
    mixture: Option<BoxSampler<'a>>,
}

impl<'a> Drawer<'a> {
    fn new(policy: &'a PolicyArtifact, bounds: &'a DecisionBox) -> Self {
        let mut acc = 0.0;
        let cumulative = match policy {
            PolicyArtifact::Discrete(m) => m
                .atoms()
                .iter()
                .map(|a| {
                    acc += a.weight;
                    acc
                })
                .collect(),
            _ => Vec::new(),
        };
        let mixture = match policy {
            PolicyArtifact::Gmm(g) => Some(BoxSampler::new(g, bounds)),
            _ => None,
        };
        Self {
            policy,
            cumulative,
            mixture,
        }
    }

    fn draw(&mut self, rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
        match self.policy {
            PolicyArtifact::Point { x } => out.copy_from_slice(x),
            PolicyArtifact::Discrete(m) => {
                let last = self.cumulative.len() - 1;
                let u = rng.uniform() * self.cumulative[last];
                let i = self.cumulative.partition_point(|&c| c <= u).min(last);
                out.copy_from_slice(&m.atoms()[i].x);
            }
            PolicyArtifact::Gmm(_) => self.mixture.as_mut().expect("mixture sampler").draw(rng, out)?,
        }
        Ok(())
    }
}

fn check_policy(policy: &PolicyArtifact, problem: &Problem) -> Result<()> {
    let n = problem.n();
    let dims_ok = match policy {
        PolicyArtifact::Point { x } => x.len() == n,
        PolicyArtifact::Discrete(m) => m.atoms().iter().all(|a| a.x.len() == n),
        PolicyArtifact::Gmm(g) => g.dim() == n,
    };
    if !dims_ok {
        return domain("policy dimension differs from the problem (discrete atoms need coordinates)");
    }
    policy.check(problem.bounds())
}

/// `count` decisions drawn from `policy` on one stream.
pub fn policy_draws(
    policy: &PolicyArtifact,
    problem: &Problem,
    count: usize,
    stream: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    check_policy(policy, problem)?;
    let mut drawer = Drawer::new(policy, problem.bounds());
    (0..count)
        .map(|_| {
            let mut x = vec![0.0; problem.n()];
            drawer.draw(stream, &mut x).map(|_| x)
        })
        .collect()
}

#[derive(Default)]
struct Tally {
    violations: u64,
    cost: f64,
    cost_sq: f64,
}

/// Validates `policy` on `m_val` fresh trials drawn from `stream`, which must
/// be a validation stream (top id bit set).
pub fn validate_policy(
    policy: &PolicyArtifact,
    problem: &Problem,
    m_val: u64,
    stream: &RngStream,
) -> Result<ValidationReport> {
    if m_val == 0 {
        return domain("M_val must be at least 1");
    }
    if stream.stream_id() & ids::VALIDATION == 0 {
        return domain("validation requires a stream from the validation id range");
    }
    check_policy(policy, problem)?;
    let n = problem.n();
    let sampler = problem.scenario_model().compile()?;

    let blocks = (m_val as usize).div_ceil(BLOCK);
    let tallies: Vec<Result<Tally>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64);
            let mut drawer = Drawer::new(policy, problem.bounds());
            let mut tally = Tally::default();
            let mut x = vec![0.0; n];
            let mut delta = vec![0.0; problem.s()];
            let mut buf = vec![0.0; problem.m()];
            let end = ((b + 1) * BLOCK).min(m_val as usize);
            for _ in b * BLOCK..end {
                drawer.draw(&mut rng, &mut x)?;
                sampler.draw_into(&mut rng, &mut delta);
                if !problem.satisfied_at(&x, &delta, 0.0, &mut buf) {
                    tally.violations += 1;
                }
                let c = problem.cost_at(&x);
                tally.cost += c;
                tally.cost_sq += c * c;
            }
            Ok(tally)
        })
        .collect();

    let mut total = Tally::default();
    for t in tallies {
        let t = t?;
        total.violations += t.violations;
        total.cost += t.cost;
        total.cost_sq += t.cost_sq;
    }
    let m = m_val as f64;
    let mean = total.cost / m;
    let var = if m_val > 1 {
        ((total.cost_sq - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    let (ci_low, ci_high) = wilson_interval(total.violations, m_val);
    let exact_cost = match policy {
        PolicyArtifact::Point { x } => Some(problem.cost_at(x)),
        PolicyArtifact::Discrete(mu) => Some(mu.atoms().iter().map(|a| a.weight * problem.cost_at(&a.x)).sum()),
        PolicyArtifact::Gmm(_) => None,
    };
    Ok(ValidationReport {
        label: policy.kind().to_string(),
        problem: problem.id().to_string(),
        alpha: problem.alpha(),
        policy_kind: policy.kind(),
        m_val,
        violations: total.violations,
        violation_rate: total.violations as f64 / m,
        ci_low,
        ci_high,
        expected_cost: mean,
        cost_stderr: (var / m).sqrt(),
        exact_cost,
        seed: stream.seed(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub policy_kind: PolicyKind,
    pub objective: f64,
    pub objective_stderr: f64,
    pub violation_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Differences to the first row.
    pub delta_objective: f64,
    pub delta_violation: f64,
    /// Relative objective change to the best point policy, in percent.
    pub reduction_vs_point_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub problem: String,
    #[serde(rename = "M_val")]
    pub m_val: u64,
    pub rows: Vec<ComparisonRow>,
    /// Every measure objective is at most every point objective (Monte Carlo
    /// objectives get three standard errors of slack). `None` without both kinds.
    pub measure_le_point: Option<bool>,
}

pub const CSV_HEADER: &str = "label,kind,objective,objective_stderr,violation_rate,ci_low,ci_high,delta_objective,delta_violation,reduction_vs_point_pct";

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.label,
                r.policy_kind,
                r.objective,
                r.objective_stderr,
                r.violation_rate,
                r.ci_low,
                r.ci_high,
                r.delta_objective,
                r.delta_violation,
                r.reduction_vs_point_pct.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("problem {}  M_val {}\n", self.problem, self.m_val);
        let _ = writeln!(
            out,
            "{:<14} {:<9} {:>12} {:>10} {:>10} {:>21} {:>10}",
            "label", "kind", "objective", "stderr", "violation", "95% CI", "vs point"
        );
        for r in &self.rows {
            let ci = format!("[{:.4}, {:.4}]", r.ci_low, r.ci_high);
            let red = r
                .reduction_vs_point_pct
                .map(|v| format!("{v:+.2}%"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<14} {:<9} {:>12.6} {:>10.6} {:>10.4} {:>21} {:>10}",
                r.label, r.policy_kind, r.objective, r.objective_stderr, r.violation_rate, ci, red
            );
        }
        let flag = match self.measure_le_point {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "n/a",
        };
        let _ = writeln!(out, "measure objective <= point objective: {flag}");
        out
    }
}

/// Side-by-side table of reports on one problem with equal `M_val`.
pub fn compare_policies(reports: &[ValidationReport]) -> Result<ComparisonTable> {
    let Some(first) = reports.first() else {
        return domain("no reports to compare");
    };
    if reports.iter().any(|r| r.problem != first.problem || r.m_val != first.m_val) {
        return domain("reports must share the problem and M_val");
    }
    let best_point = reports
        .iter()
        .filter(|r| r.policy_kind == PolicyKind::Point)
        .map(ValidationReport::objective)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            label: r.label.clone(),
            policy_kind: r.policy_kind,
            objective: r.objective(),
            objective_stderr: r.objective_stderr(),
            violation_rate: r.violation_rate,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            delta_objective: r.objective() - first.objective(),
            delta_violation: r.violation_rate - first.violation_rate,
            reduction_vs_point_pct: best_point
                .filter(|p| *p != 0.0)
                .map(|p| 100.0 * (p - r.objective()) / p.abs()),
        })
        .collect();
    let points: Vec<&ComparisonRow> = rows.iter().filter(|r| r.policy_kind == PolicyKind::Point).collect();
    let measures: Vec<&ComparisonRow> = rows.iter().filter(|r| r.policy_kind != PolicyKind::Point).collect();
    let measure_le_point = (!points.is_empty() && !measures.is_empty()).then(|| {
        measures
            .iter()
            .all(|m| points.iter().all(|p| m.objective <= p.objective + 3.0 * m.objective_stderr))
    });
    Ok(ComparisonTable {
        problem: first.problem.clone(),
        m_val: first.m_val,
        rows,
        measure_le_point,
    })
}
