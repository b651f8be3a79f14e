use ccmeasure::lp::{
    feasibility_bound_report, pair_enumeration_oracle, solve_ccp_baseline, solve_ccp_baseline_q, solve_sample_lp,
    BaselineSolution, LpStatus,
};
use ccmeasure::problem::toy1d;
use ccmeasure::rng::{ids, RngStream};
use ccmeasure::sampling::{grid_decisions, sample_scenarios, DecisionSampleSet, SampleOrigin, ScenarioSampleSet};
use ccmeasure::satisfaction::{build_matrix, exact_prob_toy1d, std_normal_cdf, weighted_satisfaction, SatisfactionMatrix};
use proptest::prelude::*;

/// Pair enumeration over the same instance in 30-digit arithmetic.
const EXACT_Q_OBJECTIVE: f64 = 0.569_941_446_741_783_9;

fn points(xs: &[f64]) -> DecisionSampleSet {
    DecisionSampleSet::from_rows(xs.iter().map(|&x| vec![x]).collect(), SampleOrigin::Provided).unwrap()
}

fn scenarios(ds: &[f64]) -> ScenarioSampleSet {
    ScenarioSampleSet::from_rows(ds.iter().map(|&d| vec![d]).collect()).unwrap()
}

fn toy_grid_exact() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = toy1d();
    let g = grid_decisions(p.bounds(), 0.02).unwrap();
    let xs: Vec<f64> = g.rows().map(|r| r[0]).collect();
    let costs = xs.iter().map(|&x| p.eval_cost(&[x]).unwrap()).collect();
    let q = xs.iter().map(|&x| exact_prob_toy1d(x)).collect();
    (xs, costs, q)
}

#[test]
fn matrix_examples() {
    let p = toy1d();
    let m = build_matrix(&p, &points(&[0.0]), &scenarios(&[0.0, 5.0]), 0.0).unwrap();
    assert!(m.get(0, 0) && !m.get(0, 1));
    assert_eq!(m.q(), &[0.5]);
    let m = build_matrix(&p, &points(&[-1.0, 0.0, 1.0]), &scenarios(&[0.0, 5.0, -3.0]), 1e6).unwrap();
    assert!(m.q().iter().all(|&q| q == 0.0));
    assert!(build_matrix(&p, &points(&[0.0]), &scenarios(&[0.0]), -1.0).is_err());
}

#[test]
fn matrix_binary_round_trip() {
    let p = toy1d();
    let mut st = RngStream::new(5, ids::SCENARIOS);
    let sc = sample_scenarios(p.scenario_model(), 77, &mut st).unwrap();
    let m = build_matrix(&p, &grid_decisions(p.bounds(), 0.1).unwrap(), &sc, 0.05).unwrap();
    let mut buf = Vec::new();
    m.write_to(&mut buf).unwrap();
    let back = SatisfactionMatrix::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.rows(), 21);
    assert_eq!(back.cols(), 77);
    assert_eq!(back.gamma(), 0.05);
    assert_eq!(back.q(), m.q());
    for i in 0..21 {
        for j in 0..77 {
            assert_eq!(back.get(i, j), m.get(i, j));
        }
    }
}

#[test]
fn fast_counter_matches_direct_evaluation() {
    let p = toy1d();
    let sc = sample_scenarios(p.scenario_model(), 3000, &mut RngStream::new(2, ids::SCENARIOS)).unwrap();
    let xs = grid_decisions(p.bounds(), 0.01).unwrap();
    for gamma in [0.0, 0.1] {
        let m = build_matrix(&p, &xs, &sc, gamma).unwrap();
        for (i, x) in xs.rows().enumerate() {
            let direct = sc
                .rows()
                .filter(|d| p.eval_constraint(x, d).unwrap()[0] + gamma <= 0.0)
                .count();
            assert_eq!(m.counts()[i] as usize, direct);
        }
    }
}

#[test]
fn empirical_rate_near_normal_cdf() {
    let p = toy1d();
    let sc = sample_scenarios(p.scenario_model(), 10_000, &mut RngStream::new(0, ids::SCENARIOS)).unwrap();
    let m = build_matrix(&p, &points(&[0.0]), &sc, 0.0).unwrap();
    assert!((m.q()[0] - 0.97725).abs() < 0.015);
}

#[test]
fn exact_probability_values() {
    assert!((exact_prob_toy1d(0.0) - 0.977_250).abs() < 1e-6);
    assert!((exact_prob_toy1d(0.5958) - 0.95).abs() < 1e-4);
    assert!(exact_prob_toy1d(12f64.sqrt()) < 1e-22);
    assert!((std_normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-10);
}

#[test]
fn weighted_satisfaction_examples() {
    assert_eq!(weighted_satisfaction(&[1.0, 1.0, 1.0], &[0.2, 0.3, 0.5]).unwrap(), 1.0);
    assert!((weighted_satisfaction(&[0.9, 1.0], &[0.5, 0.5]).unwrap() - 0.95).abs() < 1e-15);
    assert_eq!(weighted_satisfaction(&[0.3, 0.7, 0.1], &[0.0, 1.0, 0.0]).unwrap(), 0.7);
    assert!(weighted_satisfaction(&[0.3], &[0.5]).is_err());
}

#[test]
fn lp_examples_and_oracle() {
    for solve in [solve_sample_lp, pair_enumeration_oracle] {
        let a = solve(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0.05).unwrap();
        assert_eq!(a.objective, Some(1.0));
        assert_eq!(a.measure.as_ref().unwrap().dense(3), vec![0.0, 1.0, 0.0]);
        let b = solve(&[0.0, 10.0], &[0.9, 1.0], 0.05).unwrap();
        assert!((b.objective.unwrap() - 5.0).abs() < 1e-12);
        let w = b.measure.as_ref().unwrap().dense(2);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        assert!(b.active_constraint);
        let c = solve(&[5.0], &[0.5], 0.05).unwrap();
        assert_eq!(c.status, LpStatus::Infeasible);
        assert!(c.measure.is_none());
    }
}

#[test]
fn lp_rejects_bad_inputs() {
    assert!(solve_sample_lp(&[], &[], 0.05).is_err());
    assert!(solve_sample_lp(&[1.0], &[1.2], 0.05).is_err());
    assert!(solve_sample_lp(&[1.0, 2.0], &[1.0], 0.05).is_err());
    assert!(solve_sample_lp(&[1.0], &[1.0], 0.0).is_err());
    assert!(solve_sample_lp(&[f64::NAN], &[1.0], 0.1).is_err());
}

#[test]
fn random_instances_agree_with_oracle() {
    let mut st = RngStream::new(11, ids::DECISIONS);
    for _ in 0..100 {
        let costs: Vec<f64> = (0..50).map(|_| st.uniform()).collect();
        let q: Vec<f64> = (0..50).map(|_| st.uniform()).collect();
        let a = solve_sample_lp(&costs, &q, 0.3).unwrap();
        let b = pair_enumeration_oracle(&costs, &q, 0.3).unwrap();
        assert_eq!(a.status, b.status);
        if let (Some(x), Some(y)) = (a.objective, b.objective) {
            assert!((x - y).abs() < 1e-9);
            assert!(a.measure.unwrap().atoms().len() <= 2);
        }
    }
}

#[test]
fn exact_q_instance_beats_every_single_point() {
    let (xs, costs, q) = toy_grid_exact();
    let lp = solve_sample_lp(&costs, &q, 0.05).unwrap();
    let oracle = pair_enumeration_oracle(&costs, &q, 0.05).unwrap();
    let v = lp.objective.unwrap();
    assert!((v - oracle.objective.unwrap()).abs() < 1e-9);
    assert!((v - EXACT_Q_OBJECTIVE).abs() < 1e-9, "objective {v}");
    assert_eq!(lp.measure.unwrap().atoms().len(), 2);
    let best_point = costs
        .iter()
        .zip(&q)
        .filter(|(_, &qi)| qi >= 0.95)
        .map(|(&c, _)| c)
        .fold(f64::INFINITY, f64::min);
    assert!((best_point - 0.6076).abs() < 1e-12);
    assert!(v < best_point);
    match solve_ccp_baseline_q(&costs, &q, 0.05).unwrap() {
        BaselineSolution::Optimal { index, objective } => {
            assert!((xs[index] - 0.58).abs() < 1e-12);
            assert!((objective - 0.6076).abs() < 1e-12);
        }
        BaselineSolution::Infeasible => panic!("feasible instance"),
    }
}

#[test]
fn baseline_examples() {
    assert_eq!(
        solve_ccp_baseline_q(&[2.0, 1.0], &[0.99, 0.99], 0.05).unwrap(),
        BaselineSolution::Optimal { index: 1, objective: 1.0 }
    );
    assert_eq!(
        solve_ccp_baseline_q(&[2.0, 1.0], &[0.5, 0.9], 0.05).unwrap(),
        BaselineSolution::Infeasible
    );
    assert_eq!(
        solve_ccp_baseline_q(&[1.0, 1.0, 0.5], &[1.0, 1.0, 0.2], 0.0).unwrap(),
        BaselineSolution::Optimal { index: 0, objective: 1.0 }
    );
}

#[test]
fn fine_grid_baseline_reaches_analytic_optimum() {
    let p = toy1d();
    let g = grid_decisions(p.bounds(), 0.001).unwrap();
    let xs: Vec<f64> = g.rows().map(|r| r[0]).collect();
    let costs: Vec<f64> = xs.iter().map(|&x| p.eval_cost(&[x]).unwrap()).collect();
    let q: Vec<f64> = xs.iter().map(|&x| exact_prob_toy1d(x)).collect();
    let BaselineSolution::Optimal { index, objective } = solve_ccp_baseline_q(&costs, &q, 0.05).unwrap() else {
        panic!("feasible instance");
    };
    assert!((xs[index] - 0.5958).abs() < 0.002);
    assert!((objective - 0.572).abs() < 0.003);
}

#[test]
fn lp_never_worse_than_baseline_on_shared_data() {
    let p = toy1d();
    let g = grid_decisions(p.bounds(), 0.02).unwrap();
    let costs: Vec<f64> = g.rows().map(|x| p.eval_cost(x).unwrap()).collect();
    for seed in 0..10 {
        let sc = sample_scenarios(p.scenario_model(), 2000, &mut RngStream::new(seed, ids::SCENARIOS)).unwrap();
        let sat = build_matrix(&p, &g, &sc, 0.0).unwrap();
        let lp = solve_sample_lp(&costs, sat.q(), 0.05).unwrap();
        let BaselineSolution::Optimal { objective, .. } = solve_ccp_baseline(&costs, &sat, 0.05).unwrap() else {
            panic!("seed {seed}: baseline infeasible");
        };
        assert!(lp.objective.unwrap() <= objective);
    }
}

#[test]
fn bound_report_examples() {
    let r = feasibility_bound_report(1, 3.2, 2.0, 100_000, 0.03, 0.01, 0.05, 0.1).unwrap();
    // 1 - ceil(1/0.01) * ceil(2 * 3.2 * 2 / 0.1) * exp(-2e5 * 0.01^2)
    let expected = 1.0 - 100.0 * 128.0 * (-20.0f64).exp();
    assert!((r.value - expected).abs() < 1e-12);
    assert!(!r.vacuous);
    let zero = feasibility_bound_report(1, 3.2, 2.0, 0, 0.03, 0.01, 0.05, 0.1).unwrap();
    assert!(zero.vacuous && zero.clamped == 0.0);
    let big = feasibility_bound_report(1, 3.2, 2.0, 10_000_000, 0.03, 0.01, 0.05, 0.1).unwrap();
    assert!(big.value > 1.0 - 1e-12);
    assert!(feasibility_bound_report(1, 3.2, 2.0, 10, 0.06, 0.01, 0.05, 0.1).is_err());
    assert!(feasibility_bound_report(1, 3.2, 2.0, 10, 0.03, 0.03, 0.05, 0.1).is_err());
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..40).prop_flat_map(|s| {
        (
            prop::collection::vec(-10.0f64..10.0, s),
            prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], s),
            0.01f64..0.99,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lp_invariants((costs, q, alpha) in instance()) {
        let a = solve_sample_lp(&costs, &q, alpha).unwrap();
        let b = pair_enumeration_oracle(&costs, &q, alpha).unwrap();
        prop_assert_eq!(a.status, b.status);
        let feasible_point = costs.iter().zip(&q).filter(|(_, &qi)| qi >= 1.0 - alpha).map(|(&c, _)| c)
            .fold(f64::INFINITY, f64::min);
        match a.measure {
            Some(m) => {
                let w = m.dense(costs.len());
                prop_assert!(w.iter().all(|&v| v >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(weighted_satisfaction(&q, &w).unwrap() >= 1.0 - alpha - 1e-9);
                prop_assert!(m.atoms().len() <= 2);
                let v = a.objective.unwrap();
                prop_assert!((v - b.objective.unwrap()).abs() < 1e-9);
                prop_assert!(v <= feasible_point + 1e-12);
                prop_assert!(v >= costs.iter().copied().fold(f64::INFINITY, f64::min) - 1e-12);
            }
            None => prop_assert!(q.iter().all(|&qi| qi < 1.0 - alpha)),
        }
    }

    #[test]
    fn matrix_rates_are_row_means(xs in prop::collection::vec(-1.0f64..=1.0, 1..8),
                                 ds in prop::collection::vec(-4.0f64..4.0, 1..30),
                                 gamma in 0.0f64..0.5) {
        let m = build_matrix(&toy1d(), &points(&xs), &scenarios(&ds), gamma).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let k = ds.iter().filter(|&&d| x * x + d - 2.0 + gamma <= 0.0).count();
            prop_assert_eq!(m.counts()[i] as usize, k);
            prop_assert_eq!(m.q()[i], k as f64 / ds.len() as f64);
        }
    }
}
