//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 infeasible,
//! 4 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::{load_problem, run_solve, run_sweep, sweep_csv, SolveReport, Status};
use crate::plot::policy_svg_1d;
use crate::problem::{registered, PolicyArtifact, Problem};
use crate::quadrotor::{trajectories_svg, PlottedPath, QuadrotorSpec};
use crate::rng::{ids, RngStream};
use crate::validation::{compare_policies, policy_draws, validate_policy, ValidationReport};

pub const OUT_ENV: &str = "CCMEASURE_OUT";
const DEFAULT_OUT: &str = "ccmeasure-out";

#[derive(Parser)]
#[command(name = "ccmeasure", version, about = "Chance-constrained programs over probability measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem instance and write policy, report and figure.
    Solve(RunFlags),
    /// Validate a stored policy on fresh scenarios.
    Validate(ValidateArgs),
    /// Sample-LP runs over lists of S and N values and several seeds.
    Sweep(SweepArgs),
    /// Compare validated reports in one table.
    Report(ReportArgs),
    /// List the registered problems.
    Problems,
}

#[derive(Args, Default)]
struct RunFlags {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// baseline, sample_lp or gmm
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// uniform, grid or waypoint
    #[arg(long)]
    decision_sampling: Option<String>,
    #[arg(long)]
    grid_step: Option<String>,
    #[arg(long = "S")]
    s: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    #[arg(long)]
    penalty_initial: Option<String>,
    #[arg(long)]
    penalty_growth: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    max_stages: Option<String>,
    /// full or diagonal
    #[arg(long)]
    covariance: Option<String>,
    #[arg(long)]
    step_scale: Option<String>,
    #[arg(long)]
    warm_start: Option<String>,
    /// Validation trials (0 skips validation).
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    plot_rollouts: Option<String>,
    /// Quadrotor scenario file (TOML).
    #[arg(long)]
    scenario_file: Option<String>,
    #[arg(long)]
    lipschitz: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Output directory (default: $CCMEASURE_OUT, then ./ccmeasure-out).
    #[arg(long)]
    out: Option<String>,
}

impl RunFlags {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        [
            ("problem", &self.problem),
            ("method", &self.method),
            ("seed", &self.seed),
            ("decision_sampling", &self.decision_sampling),
            ("grid_step", &self.grid_step),
            ("S", &self.s),
            ("N", &self.n),
            ("alpha", &self.alpha),
            ("epsilon", &self.epsilon),
            ("gamma", &self.gamma),
            ("L", &self.l),
            ("restarts", &self.restarts),
            ("mc_samples", &self.mc_samples),
            ("penalty_initial", &self.penalty_initial),
            ("penalty_growth", &self.penalty_growth),
            ("max_iterations", &self.max_iterations),
            ("max_stages", &self.max_stages),
            ("covariance", &self.covariance),
            ("step_scale", &self.step_scale),
            ("warm_start", &self.warm_start),
            ("M", &self.m),
            ("plot_rollouts", &self.plot_rollouts),
            ("scenario_file", &self.scenario_file),
            ("lipschitz", &self.lipschitz),
            ("beta", &self.beta),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }

    /// Defaults, then the config file, then flags; `skip` keys are left out.
    fn to_config(&self, skip: &[&str]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.pairs() {
            if !skip.contains(&k) {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ValidateArgs {
    /// Policy JSON, or a solve report containing one.
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    problem: String,
    #[arg(long = "M", default_value_t = 10_000)]
    m: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    scenario_file: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: RunFlags,
    /// Consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 20)]
    runs: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Solve reports (with validation) or validation reports.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, default_value_t = 200)]
    plot_rollouts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Rollouts of decisions drawn from `policy` under fresh scenarios.
pub fn policy_rollouts(
    spec: &QuadrotorSpec,
    problem: &Problem,
    policy: &PolicyArtifact,
    count: usize,
    seed: u64,
) -> Result<Vec<PlottedPath>> {
    let mut stream = RngStream::new(seed, ids::PLOT);
    let decisions = policy_draws(policy, problem, count, &mut stream)?;
    let sampler = problem.scenario_model().compile()?;
    Ok(decisions
        .iter()
        .map(|u| {
            let delta = sampler.draw(&mut stream);
            match spec.rollout(u, &delta) {
                Ok(tr) => PlottedPath {
                    feasible: spec.joint_margin(&tr) <= 0.0,
                    points: tr.positions().collect(),
                },
                Err(_) => PlottedPath {
                    points: Vec::new(),
                    feasible: false,
                },
            }
        })
        .collect())
}

fn figure(cfg: &RunConfig, report: &SolveReport, problem: &Problem) -> Result<Option<(String, String)>> {
    let Some(policy) = &report.policy else {
        return Ok(None);
    };
    if let Some(svg) = policy_svg_1d(problem, policy) {
        return Ok(Some(("measure.svg".into(), svg)));
    }
    if let Some(spec) = &report.quadrotor {
        let paths = policy_rollouts(spec, problem, policy, cfg.plot_rollouts, cfg.seed)?;
        return Ok(Some(("trajectories.svg".into(), trajectories_svg(spec, &paths))));
    }
    Ok(None)
}

fn cmd_solve(flags: &RunFlags) -> Result<i32> {
    let cfg = flags.to_config(&[])?;
    let report = run_solve(&cfg)?;
    let dir = out_dir(cfg.out.as_deref());
    if let Some(policy) = &report.policy {
        write(&dir, "policy.json", &json(policy))?;
    }
    write(&dir, "report.json", &json(&report))?;
    let (problem, _) = load_problem(&cfg)?;
    if let Some((name, svg)) = figure(&cfg, &report, &problem)? {
        write(&dir, &name, &svg)?;
    }
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    println!(
        "{} {:?} status={:?} objective={} chance={} violation={}",
        report.problem,
        report.method,
        report.status,
        fmt(report.objective),
        fmt(report.in_sample_chance),
        fmt(report.validation.as_ref().map(|v| v.violation_rate)),
    );
    Ok(match report.status {
        Status::Optimal => 0,
        Status::Infeasible => 3,
    })
}

fn read_policy(path: &Path) -> Result<PolicyArtifact> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("kind").is_some() {
        return Ok(serde_json::from_value(value)?);
    }
    match value.get("policy") {
        Some(p) if !p.is_null() => Ok(serde_json::from_value(p.clone())?),
        _ => Err(Error::Config(format!("{} holds no policy", path.display()))),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let mut cfg = RunConfig {
        problem: args.problem.clone(),
        ..Default::default()
    };
    if let Some(a) = &args.alpha {
        cfg.set("alpha", a)?;
    }
    if let Some(f) = &args.scenario_file {
        cfg.set("scenario_file", f)?;
    }
    let (problem, _) = load_problem(&cfg)?;
    let policy = read_policy(&args.policy)?;
    let mut report = validate_policy(&policy, &problem, args.m, &RngStream::new(args.seed, ids::VALIDATION))?;
    if let Some(l) = &args.label {
        report.label = l.clone();
    }
    let dir = out_dir(args.out.as_deref().map(Path::new));
    write(&dir, "validation.json", &json(&report))?;
    println!(
        "{} violation={:.6} [{:.6}, {:.6}] cost={:.6} +- {:.6}",
        report.label, report.violation_rate, report.ci_low, report.ci_high, report.expected_cost, report.cost_stderr
    );
    Ok(0)
}

fn parse_list(key: &str, value: Option<&String>, default: &[usize]) -> Result<Vec<usize>> {
    match value {
        None => Ok(default.to_vec()),
        Some(v) => v
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid list entry '{p}' for '{key}'")))
            })
            .collect(),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let mut cfg = args.flags.to_config(&["S", "N"])?;
    if cfg.decision_sampling.is_none() {
        cfg.set("decision_sampling", "uniform")?;
    }
    let s_values = parse_list("S", args.flags.s.as_ref(), &[50, 200, 800])?;
    let n_values = parse_list("N", args.flags.n.as_ref(), &[500, 2000])?;
    if args.runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    let seeds: Vec<u64> = (0..args.runs).map(|r| cfg.seed + r).collect();
    let rows = run_sweep(&cfg, &s_values, &n_values, &seeds)?;
    let dir = out_dir(cfg.out.as_deref());
    let path = write(&dir, "sweep.csv", &sweep_csv(&rows))?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(0)
}

/// A validation report plus, when read from a solve report, the policy and
/// quadrotor spec behind it.
fn read_report(path: &Path) -> Result<(ValidationReport, Option<SolveReport>)> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(solve) = serde_json::from_str::<SolveReport>(&text) {
        let mut v = solve
            .validation
            .clone()
            .ok_or_else(|| Error::Config(format!("{} has no validation section", path.display())))?;
        v.label = format!("{:?}", solve.method).to_lowercase();
        return Ok((v, Some(solve)));
    }
    serde_json::from_str::<ValidationReport>(&text)
        .map(|v| (v, None))
        .map_err(|e| Error::Config(format!("{}: not a report ({e})", path.display())))
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    if args.inputs.is_empty() {
        return Err(Error::Config("report needs at least one input".into()));
    }
    let mut reports = Vec::new();
    let mut solves = Vec::new();
    for p in &args.inputs {
        let (v, s) = read_report(p)?;
        reports.push(v);
        solves.push(s);
    }
    let table = compare_policies(&reports).map_err(|e| Error::Config(e.to_string()))?;
    let dir = out_dir(args.out.as_deref().map(Path::new));
    write(&dir, "comparison.csv", &table.to_csv())?;
    write(&dir, "comparison.json", &json(&table))?;
    let text = table.to_text();
    write(&dir, "comparison.txt", &text)?;
    print!("{text}");
    for (i, solve) in solves.iter().enumerate() {
        let Some(solve) = solve else { continue };
        let (Some(spec), Some(policy)) = (&solve.quadrotor, &solve.policy) else {
            continue;
        };
        let problem = spec.clone().as_problem()?.with_alpha(solve.alpha)?;
        let paths = policy_rollouts(spec, &problem, policy, args.plot_rollouts, args.seed)?;
        write(&dir, &format!("trajectories_{i}_{}.svg", reports[i].label), &trajectories_svg(spec, &paths))?;
    }
    Ok(0)
}

fn cmd_problems() -> i32 {
    for (id, about) in registered() {
        println!("{id:<10} {about}");
    }
    0
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(f) => cmd_solve(f),
        Command::Validate(a) => cmd_validate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Problems => Ok(cmd_problems()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
