//! End-to-end runs: sample, solve, validate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DecisionSampling, Method, RunConfig};
use crate::error::{domain, Error, Result};
use crate::gmm::{solve_gmm, GmmParams, GmmSolveConfig, RestartSummary};
use crate::lp::{feasibility_bound_report, solve_ccp_baseline, solve_sample_lp, BaselineSolution, BoundReport, LpStatus};
use crate::problem::{lookup, PolicyArtifact, Problem, QUADROTOR};
use crate::quadrotor::{sample_waypoint_controls, QuadrotorSpec};
use crate::rng::{ids, RngStream};
use crate::sampling::{grid_decisions, sample_decisions_uniform, sample_scenarios, DecisionSampleSet, ScenarioSampleSet};
use crate::satisfaction::build_matrix;
use crate::validation::{validate_policy, ValidationReport};

/// Component spread of warm-start mixtures, as a fraction of each box side.
const WARM_START_SCALE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmDiagnostics {
    pub best_restart: Option<usize>,
    pub restarts: Vec<RestartSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub status: Status,
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub decision_sampling: DecisionSampling,
    #[serde(rename = "S")]
    pub decisions: usize,
    #[serde(rename = "N")]
    pub scenarios: usize,
    /// Objective on the solver's own data; for an infeasible mixture run,
    /// that of the best candidate.
    pub objective: Option<f64>,
    pub in_sample_chance: Option<f64>,
    /// Absent only when no candidate exists at all.
    pub policy: Option<PolicyArtifact>,
    pub lp: Option<serde_json::Value>,
    pub gmm: Option<GmmDiagnostics>,
    pub bound: Option<BoundReport>,
    pub validation: Option<ValidationReport>,
    pub quadrotor: Option<QuadrotorSpec>,
    pub config: RunConfig,
}

/// Registered problem with the config's overrides applied.
pub fn load_problem(cfg: &RunConfig) -> Result<(Problem, Option<QuadrotorSpec>)> {
    let (problem, spec) = if cfg.problem == QUADROTOR {
        let spec = match &cfg.scenario_file {
            Some(path) => QuadrotorSpec::load(path)?,
            None => QuadrotorSpec::default(),
        };
        (spec.as_problem()?, Some(spec))
    } else {
        if cfg.scenario_file.is_some() {
            return Err(Error::Config(format!("problem '{}' takes no scenario file", cfg.problem)));
        }
        (lookup(&cfg.problem).map_err(|e| Error::Config(e.to_string()))?, None)
    };
    let problem = match cfg.alpha {
        Some(a) => problem.with_alpha(a)?,
        None => problem,
    };
    Ok((problem, spec))
}

pub fn draw_decisions(
    cfg: &RunConfig,
    problem: &Problem,
    spec: Option<&QuadrotorSpec>,
    count: usize,
) -> Result<DecisionSampleSet> {
    let mut stream = RngStream::new(cfg.seed, ids::DECISIONS);
    match cfg.sampling_mode() {
        DecisionSampling::Grid => grid_decisions(problem.bounds(), cfg.grid_step),
        DecisionSampling::Uniform => sample_decisions_uniform(problem.bounds(), count, &mut stream),
        DecisionSampling::Waypoint => match spec {
            Some(spec) => sample_waypoint_controls(spec, count, &mut stream),
            None => Err(Error::Config("waypoint sampling needs the quadrotor problem".into())),
        },
    }
}

pub fn draw_scenarios(cfg: &RunConfig, problem: &Problem, count: usize) -> Result<ScenarioSampleSet> {
    sample_scenarios(
        problem.scenario_model(),
        count,
        &mut RngStream::new(cfg.seed, ids::SCENARIOS),
    )
}

/// `J` at every decision sample.
pub fn decision_costs(problem: &Problem, decisions: &DecisionSampleSet) -> Vec<f64> {
    decisions
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| problem.cost_at(x))
        .collect()
}

/// Mixture with one component per point, cycling through `points` to fill
/// `components`; a point's weight is split evenly over its copies.
pub fn mixture_from_points(points: &[(Vec<f64>, f64)], components: usize, sd: &[f64]) -> Result<GmmParams> {
    if points.is_empty() {
        return domain("no points to build a mixture from");
    }
    let n = points[0].0.len();
    let copies: Vec<usize> = (0..points.len())
        .map(|i| components / points.len() + usize::from(i < components % points.len()))
        .collect();
    let mut weights = Vec::with_capacity(components);
    let mut means = Vec::with_capacity(components);
    for l in 0..components {
        let i = l % points.len();
        weights.push(points[i].1 / copies[i] as f64);
        means.push(points[i].0.clone());
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return domain("warm-start weights must be positive");
    }
    for w in &mut weights {
        *w /= total;
    }
    let factor: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| if i == k { sd[i] } else { 0.0 }).collect())
        .collect();
    GmmParams::new(weights, means, vec![factor; components])
}

fn epsilon_of(cfg: &RunConfig, problem: &Problem) -> Result<f64> {
    let eps = cfg.epsilon.unwrap_or(problem.alpha());
    if eps > problem.alpha() {
        return Err(Error::Config(format!("epsilon {eps} exceeds alpha {}", problem.alpha())));
    }
    Ok(eps)
}

/// Runs the configured method. Infeasibility is reported through
/// [`SolveReport::status`], not as an error.
pub fn run_solve(cfg: &RunConfig) -> Result<SolveReport> {
    cfg.check()?;
    let (problem, spec) = load_problem(cfg)?;
    let epsilon = epsilon_of(cfg, &problem)?;
    let scenarios = draw_scenarios(cfg, &problem, cfg.n)?;
    let needs_samples = cfg.method != Method::Gmm || cfg.use_warm_start();
    let sampled = if needs_samples {
        let decisions = draw_decisions(cfg, &problem, spec.as_ref(), cfg.decision_count())?;
        let costs = decision_costs(&problem, &decisions);
        Some((decisions, costs))
    } else {
        None
    };

    let mut report = SolveReport {
        problem: problem.id().to_string(),
        method: cfg.method,
        seed: cfg.seed,
        status: Status::Infeasible,
        alpha: problem.alpha(),
        epsilon,
        gamma: cfg.gamma,
        decision_sampling: cfg.sampling_mode(),
        decisions: sampled.as_ref().map_or(0, |(d, _)| d.len()),
        scenarios: scenarios.len(),
        objective: None,
        in_sample_chance: None,
        policy: None,
        lp: None,
        gmm: None,
        bound: None,
        validation: None,
        quadrotor: spec.clone(),
        config: cfg.clone(),
    };

    match cfg.method {
        Method::Baseline => {
            let (decisions, costs) = sampled.as_ref().expect("sampled");
            let sat = build_matrix(&problem, decisions, &scenarios, cfg.gamma)?;
            if let BaselineSolution::Optimal { index, objective } = solve_ccp_baseline(costs, &sat, epsilon)? {
                report.status = Status::Optimal;
                report.objective = Some(objective);
                report.in_sample_chance = Some(sat.q()[index]);
                report.policy = Some(PolicyArtifact::Point {
                    x: decisions.row(index).to_vec(),
                });
            }
            if let (Some(l), Some(beta)) = (cfg.lipschitz, cfg.beta) {
                report.bound = Some(feasibility_bound_report(
                    problem.n(),
                    l,
                    problem.bounds().diameter(),
                    scenarios.len() as u64,
                    epsilon,
                    beta,
                    problem.alpha(),
                    cfg.gamma,
                )?);
            }
        }
        Method::SampleLp => {
            let (decisions, costs) = sampled.as_ref().expect("sampled");
            let sat = build_matrix(&problem, decisions, &scenarios, cfg.gamma)?;
            let sol = solve_sample_lp(costs, sat.q(), problem.alpha())?;
            let mut sol = sol;
            if let Some(m) = sol.measure.as_mut() {
                m.attach_points(decisions);
            }
            report.lp = Some(sol.to_json(problem.alpha()));
            if sol.status == LpStatus::Optimal {
                let m = sol.measure.clone().expect("optimal measure");
                report.status = Status::Optimal;
                report.objective = sol.objective;
                report.in_sample_chance = Some(m.expectation(sat.q()));
                report.policy = Some(PolicyArtifact::Discrete(m));
            }
        }
        Method::Gmm => {
            let bounds = problem.bounds();
            let mut gcfg = GmmSolveConfig {
                mc_samples: cfg.gmm_mc_samples(),
                penalty_initial: cfg.gmm_penalty_initial(),
                penalty_growth: cfg.penalty_growth,
                restarts: cfg.gmm_restarts(),
                max_iterations: cfg.gmm_max_iterations(),
                max_stages: cfg.gmm_max_stages(),
                covariance: cfg.covariance_structure(),
                step_scale: cfg.simplex_step(),
                stream: RngStream::new(cfg.seed, ids::GMM),
                ..Default::default()
            };
            if let Some((decisions, costs)) = &sampled {
                let sd: Vec<f64> = (0..problem.n())
                    .map(|i| WARM_START_SCALE * (bounds.upper()[i] - bounds.lower()[i]))
                    .collect();
                let sat = build_matrix(&problem, decisions, &scenarios, cfg.gamma)?;
                let lp = solve_sample_lp(costs, sat.q(), problem.alpha())?;
                if let Some(m) = &lp.measure {
                    let pts: Vec<(Vec<f64>, f64)> =
                        m.atoms().iter().map(|a| (decisions.row(a.index).to_vec(), a.weight)).collect();
                    gcfg.warm_starts.push(mixture_from_points(&pts, cfg.mixture_components(), &sd)?);
                }
                if let BaselineSolution::Optimal { index, .. } = solve_ccp_baseline(costs, &sat, epsilon)? {
                    let pts = vec![(decisions.row(index).to_vec(), 1.0)];
                    gcfg.warm_starts.push(mixture_from_points(&pts, cfg.mixture_components(), &sd)?);
                }
            }
            match solve_gmm(&problem, &scenarios, cfg.mixture_components(), &gcfg) {
                Ok(sol) => {
                    report.status = Status::Optimal;
                    report.objective = Some(sol.objective);
                    report.in_sample_chance = Some(sol.chance);
                    report.gmm = Some(GmmDiagnostics {
                        best_restart: Some(sol.best_restart),
                        restarts: sol.restarts,
                    });
                    report.policy = Some(PolicyArtifact::Gmm(sol.params));
                }
                Err(Error::GmmInfeasible(best)) => {
                    report.objective = Some(best.objective);
                    report.in_sample_chance = Some(best.chance);
                    report.gmm = Some(GmmDiagnostics {
                        best_restart: None,
                        restarts: Vec::new(),
                    });
                    report.policy = Some(PolicyArtifact::Gmm(best.params));
                }
                Err(e) => return Err(e),
            }
        }
    }

    if cfg.m_val > 0 && report.status == Status::Optimal {
        let policy = report.policy.as_ref().expect("optimal policy");
        report.validation = Some(validate_policy(
            policy,
            &problem,
            cfg.m_val,
            &RngStream::new(cfg.seed, ids::VALIDATION),
        )?);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub objective: Option<f64>,
    pub violation: Option<f64>,
}

pub const SWEEP_HEADER: &str = "S,N,seed,objective,violation";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.s, r.n, r.seed, cell(r.objective), cell(r.violation)));
    }
    out
}

/// Sample-LP runs over `s_values × n_values × seeds`. Per seed the decision
/// and scenario sets are drawn once at the largest size and smaller sizes use
/// prefixes, so the sets are nested. Grid sampling ignores `S`.
pub fn run_sweep(cfg: &RunConfig, s_values: &[usize], n_values: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    cfg.check()?;
    if s_values.is_empty() || n_values.is_empty() || seeds.is_empty() {
        return domain("sweep needs S values, N values and seeds");
    }
    if s_values.contains(&0) || n_values.contains(&0) {
        return domain("S and N values must be positive");
    }
    let (problem, spec) = load_problem(cfg)?;
    let s_max = *s_values.iter().max().expect("nonempty");
    let n_max = *n_values.iter().max().expect("nonempty");
    let mut rows = Vec::new();
    for &seed in seeds {
        let run = RunConfig { seed, ..cfg.clone() };
        let all_decisions = draw_decisions(&run, &problem, spec.as_ref(), s_max)?;
        let all_costs = decision_costs(&problem, &all_decisions);
        let all_scenarios = draw_scenarios(&run, &problem, n_max)?;
        for &s in s_values {
            let decisions = if all_decisions.len() < s_max {
                all_decisions.clone()
            } else {
                all_decisions.prefix(s)?
            };
            let costs = &all_costs[..decisions.len()];
            for &n in n_values {
                let scenarios = all_scenarios.prefix(n)?;
                let sat = build_matrix(&problem, &decisions, &scenarios, cfg.gamma)?;
                let sol = solve_sample_lp(costs, sat.q(), problem.alpha())?;
                let (objective, violation) = match sol.measure {
                    Some(mut m) => {
                        m.attach_points(&decisions);
                        let violation = if cfg.m_val > 0 {
                            let v = validate_policy(
                                &PolicyArtifact::Discrete(m),
                                &problem,
                                cfg.m_val,
                                &RngStream::new(seed, ids::VALIDATION),
                            )?;
                            Some(v.violation_rate)
                        } else {
                            None
                        };
                        (sol.objective, violation)
                    }
                    None => (None, None),
                };
                rows.push(SweepRow {
                    s,
                    n,
                    seed,
                    objective,
                    violation,
                });
            }
        }
    }
    rows.sort_by_key(|r| (s_values.iter().position(|&v| v == r.s), n_values.iter().position(|&v| v == r.n), r.seed));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_copies_split_weights() {
        let g = mixture_from_points(&[(vec![0.1], 0.25), (vec![0.6], 0.75)], 5, &[0.2]).unwrap();
        assert_eq!(g.len(), 5);
        let w = g.weights();
        assert!((w[0] + w[2] + w[4] - 0.25).abs() < 1e-12);
        assert!((w[1] + w[3] - 0.75).abs() < 1e-12);
        assert_eq!(g.means()[3], vec![0.6]);
    }

    #[test]
    fn epsilon_above_alpha_is_a_config_error() {
        let cfg = RunConfig {
            epsilon: Some(0.2),
            m_val: 0,
            ..Default::default()
        };
        assert!(matches!(run_solve(&cfg), Err(Error::Config(_))));
    }
}
