use std::f64::consts::PI;
use std::sync::Arc;

use ccmeasure::config::RunConfig;
use ccmeasure::gmm::{
    estimate_chance, estimate_objective, sample_gmm, solve_gmm, CovarianceStructure, Encoding, GmmParams,
    GmmSolveConfig,
};
use ccmeasure::pipeline::run_solve;
use ccmeasure::problem::{toy1d, ProblemModel};
use ccmeasure::rng::{ids, RngStream};
use ccmeasure::sampling::{sample_scenarios, DecisionSampleSet, SampleOrigin, ScenarioModel, ScenarioSampleSet};
use ccmeasure::satisfaction::build_matrix;
use ccmeasure::{DecisionBox, Error, Problem};
use proptest::prelude::*;

fn single(mean: f64, sd: f64) -> GmmParams {
    GmmParams::isotropic(vec![1.0], vec![vec![mean]], &[sd]).unwrap()
}

fn gmm_stream(seed: u64) -> RngStream {
    RngStream::new(seed, ids::GMM)
}

fn toy_scenarios(n: usize, seed: u64) -> ScenarioSampleSet {
    let p = toy1d();
    sample_scenarios(p.scenario_model(), n, &mut RngStream::new(seed, ids::SCENARIOS)).unwrap()
}

struct Flat;

impl ProblemModel for Flat {
    fn decision_dim(&self) -> usize {
        2
    }
    fn scenario_dim(&self) -> usize {
        1
    }
    fn constraint_dim(&self) -> usize {
        1
    }
    fn cost(&self, _x: &[f64]) -> f64 {
        3.25
    }
    fn constraint(&self, x: &[f64], delta: &[f64], out: &mut [f64]) {
        out[0] = x[0] + delta[0];
    }
}

#[test]
fn density_values() {
    assert!((single(0.0, 1.0).pdf(&[0.0]) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    let g = GmmParams::isotropic(vec![0.5, 0.5], vec![vec![-0.7], vec![0.7]], &[0.3, 0.3]).unwrap();
    for x in [0.0, 0.2, 0.9, 2.5] {
        assert!((g.pdf(&[x]) - g.pdf(&[-x])).abs() < 1e-15);
    }
}

#[test]
fn density_integrates_to_one() {
    let g = GmmParams::new(
        vec![0.3, 0.7],
        vec![vec![-0.5, 0.2], vec![0.8, -0.4]],
        vec![
            vec![vec![0.6, 0.0], vec![0.2, 0.4]],
            vec![vec![0.3, 0.0], vec![-0.1, 0.5]],
        ],
    )
    .unwrap();
    let mut st = RngStream::new(1, ids::PLOT);
    let m = 1_000_000;
    let side = 12.0;
    let sum: f64 = (0..m)
        .map(|_| g.pdf(&[st.uniform_range(-side / 2.0, side / 2.0), st.uniform_range(-side / 2.0, side / 2.0)]))
        .sum();
    let integral = sum / m as f64 * side * side;
    assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
}

#[test]
fn box_conditioned_acceptance() {
    let b = DecisionBox::new(vec![-1.0], vec![1.0]).unwrap();
    let tight = sample_gmm(&single(0.0, 1e-3), 1000, &mut gmm_stream(0), &b).unwrap();
    assert_eq!(tight.acceptance_rate, 1.0);
    let edge = sample_gmm(&single(1.0, 0.01), 10_000, &mut gmm_stream(1), &b).unwrap();
    assert!((edge.acceptance_rate - 0.5).abs() < 0.05, "rate {}", edge.acceptance_rate);
    assert!(edge.rows().all(|r| b.contains(r)));
    let far = sample_gmm(&single(50.0, 0.01), 10, &mut gmm_stream(2), &b);
    assert!(matches!(far, Err(Error::DegenerateSupport { .. })));
}

#[test]
fn fixed_seed_reproduces_samples() {
    let b = DecisionBox::new(vec![-1.0], vec![1.0]).unwrap();
    let g = GmmParams::isotropic(vec![0.4, 0.6], vec![vec![-0.5], vec![0.5]], &[0.4, 0.2]).unwrap();
    let a = sample_gmm(&g, 500, &mut gmm_stream(3), &b).unwrap();
    let c = sample_gmm(&g, 500, &mut gmm_stream(3), &b).unwrap();
    assert_eq!(a, c);
}

#[test]
fn degenerate_component_reproduces_point_values() {
    let p = toy1d();
    let j = estimate_objective(&single(0.5, 1e-4), &p, 2000, &gmm_stream(0)).unwrap();
    assert!((j - 0.79).abs() < 1e-3, "objective {j}");
    let sc = toy_scenarios(10_000, 0);
    let c = estimate_chance(&single(0.0, 1e-4), &p, &sc, 2000, &gmm_stream(0)).unwrap();
    assert!((c - 0.97725).abs() < 0.02, "chance {c}");
}

#[test]
fn point_mass_limit_matches_satisfaction_rates() {
    let p = toy1d();
    let sc = toy_scenarios(2000, 4);
    for x in [-0.8, 0.1, 0.55, 0.9] {
        let pts = DecisionSampleSet::from_rows(vec![vec![x]], SampleOrigin::Provided).unwrap();
        let q = build_matrix(&p, &pts, &sc, 0.0).unwrap().q()[0];
        let c = estimate_chance(&single(x, 1e-7), &p, &sc, 500, &gmm_stream(1)).unwrap();
        assert!((c - q).abs() < 0.002, "x {x}: {c} vs {q}");
    }
}

#[test]
fn constant_cost_is_exact_and_violating_region_gives_zero() {
    let b = DecisionBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let p = Problem::new("flat", b, 0.1, ScenarioModel::Normal { mean: 0.0, variance: 1.0 }, Arc::new(Flat)).unwrap();
    let g = GmmParams::isotropic(vec![0.5, 0.5], vec![vec![0.2, 0.3], vec![0.7, 0.6]], &[0.3, 0.2]).unwrap();
    assert_eq!(estimate_objective(&g, &p, 3000, &gmm_stream(5)).unwrap(), 3.25);
    let hot = ScenarioSampleSet::from_rows(vec![vec![1.0]; 40]).unwrap();
    assert_eq!(estimate_chance(&g, &p, &hot, 3000, &gmm_stream(5)).unwrap(), 0.0);
}

#[test]
fn estimator_error_shrinks_like_root_m() {
    let p = toy1d();
    let g = GmmParams::isotropic(vec![0.5, 0.5], vec![vec![-0.4], vec![0.6]], &[0.3, 0.2]).unwrap();
    let sd = |m: usize| {
        let v: Vec<f64> = (0..200)
            .map(|s| estimate_objective(&g, &p, m, &gmm_stream(1000 + s)).unwrap())
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let ratio = sd(500) / sd(1000);
    // Sample sd ratio over 200 replicates has standard error near 0.1.
    assert!((ratio - 2f64.sqrt()).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn crn_estimates_are_deterministic() {
    let p = toy1d();
    let sc = toy_scenarios(500, 2);
    let g = GmmParams::isotropic(vec![0.2, 0.8], vec![vec![-0.1], vec![0.7]], &[0.5, 0.1]).unwrap();
    let s = gmm_stream(9);
    assert_eq!(
        estimate_chance(&g, &p, &sc, 777, &s).unwrap(),
        estimate_chance(&g, &p, &sc, 777, &s).unwrap()
    );
    assert_eq!(
        estimate_objective(&g, &p, 777, &s).unwrap(),
        estimate_objective(&g, &p, 777, &s).unwrap()
    );
}

#[test]
fn nearly_unconstrained_solution_reaches_minimum_cost() {
    let p = toy1d().with_alpha(0.999).unwrap();
    let sc = toy_scenarios(2000, 0);
    let sol = solve_gmm(&p, &sc, 6, &GmmSolveConfig::default()).unwrap();
    assert!((sol.objective + 0.56).abs() < 0.02, "objective {}", sol.objective);
}

#[test]
fn solution_meets_chance_level() {
    let p = toy1d();
    let sc = toy_scenarios(2000, 3);
    let cfg = GmmSolveConfig {
        mc_samples: 2000,
        ..Default::default()
    };
    let sol = solve_gmm(&p, &sc, 3, &cfg).unwrap();
    assert!(sol.chance >= 0.95 - 0.005);
    let again = estimate_chance(&sol.params, &p, &sc, 2000, &cfg.stream.substream(0)).unwrap();
    assert_eq!(again, sol.chance);
    assert_eq!(sol.restarts.len(), 4);
    assert!(sol.restarts[sol.best_restart].feasible);
}

#[test]
fn unreachable_level_reports_best_candidate() {
    let p = toy1d().with_alpha(0.01).unwrap();
    let sc = ScenarioSampleSet::from_rows((0..100).map(|j| vec![if j < 10 { 5.0 } else { 0.0 }]).collect()).unwrap();
    let cfg = GmmSolveConfig {
        mc_samples: 200,
        restarts: 2,
        max_iterations: 200,
        max_stages: 2,
        ..Default::default()
    };
    match solve_gmm(&p, &sc, 1, &cfg) {
        Err(Error::GmmInfeasible(best)) => {
            assert!(best.chance <= 0.9 + 1e-12);
            assert!(best.params.check().is_ok());
        }
        other => panic!("expected an infeasible result, got {other:?}"),
    }
}

#[test]
fn single_gaussian_is_sandwiched() {
    for seed in 0..20 {
        let run = |method: &str, l: Option<&str>| {
            let mut cfg = RunConfig::default();
            cfg.set("method", method).unwrap();
            cfg.set("seed", &seed.to_string()).unwrap();
            cfg.set("M", "0").unwrap();
            if let Some(l) = l {
                cfg.set("L", l).unwrap();
            }
            run_solve(&cfg).unwrap().objective.unwrap()
        };
        let lp = run("sample_lp", None);
        let point = run("baseline", None);
        let g = run("gmm", Some("1"));
        assert!(g >= lp - 0.02 && g <= point + 0.02, "seed {seed}: lp {lp} gmm {g} point {point}");
    }
}

fn mixture(n: usize, l: usize) -> impl Strategy<Value = GmmParams> {
    (
        prop::collection::vec(0.05f64..1.0, l),
        prop::collection::vec(prop::collection::vec(-0.95f64..0.95, n), l),
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, n * n), l),
    )
        .prop_map(move |(w, means, raw)| {
            let total: f64 = w.iter().sum();
            let factors = raw
                .iter()
                .map(|r| {
                    (0..n)
                        .map(|i| (0..n).map(|k| if k > i { 0.0 } else { r[i * n + k] - if k < i { 0.5 } else { 0.0 } }).collect())
                        .collect()
                })
                .collect();
            GmmParams::new(w.iter().map(|v| v / total).collect(), means, factors).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reparameterization_round_trip(g in (1usize..4, 1usize..4).prop_flat_map(|(n, l)| mixture(n, l))) {
        let b = DecisionBox::cube(g.dim(), -1.0, 1.0).unwrap();
        let enc = Encoding::new(g.len(), &b, CovarianceStructure::Full).unwrap();
        let z = enc.encode(&g).unwrap();
        prop_assert_eq!(z.len(), enc.len());
        let back = enc.decode(&z).unwrap();
        for (a, c) in back.weights().iter().zip(g.weights()) {
            prop_assert!((a - c).abs() < 1e-12);
        }
        for (a, c) in back.means().iter().flatten().zip(g.means().iter().flatten()) {
            prop_assert!((a - c).abs() < 1e-12);
        }
        for (a, c) in back.factors().iter().flatten().flatten().zip(g.factors().iter().flatten().flatten()) {
            prop_assert!((a - c).abs() < 1e-12);
        }
        prop_assert!((back.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoded_points_are_valid_mixtures(z in prop::collection::vec(-30.0f64..30.0, 2 * (1 + 2 + 3))) {
        let b = DecisionBox::cube(2, -1.0, 1.0).unwrap();
        let enc = Encoding::new(2, &b, CovarianceStructure::Full).unwrap();
        let g = enc.decode(&z).unwrap();
        prop_assert!(g.check().is_ok());
        prop_assert!(g.means().iter().all(|m| b.contains(m)));
    }
}
