//! Open-loop quadrotor with drag under mass, drag and turbulence uncertainty.
//!
//! State `x_t = [p_x, v_x, p_y, v_y]`, control `u_t = [u_x, u_y]`:
//!
//! ```text
//! x_{t+1} = A x_t + B(m) u_t + d(x_t, φ) + ω_t
//! ```
//!
//! with the double-integrator `A`, `B(m) = B / m` and per-axis drag
//! `d = −φ [Δt² |v| v / 2, Δt |v| v]`. The decision vector interleaves the
//! controls `(u_{0,x}, u_{0,y}, …, u_{T−1,x}, u_{T−1,y})`; the scenario vector is
//! `(m, φ, ω_0, …, ω_{T−1})`.

pub mod candidates;
pub mod polytope;
pub mod render;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use candidates::{nominal_controls, sample_waypoint_controls};
pub use polytope::Polytope;
pub use render::{trajectories_svg, PlottedPath};

use crate::error::{domain, Error, Result};
use crate::problem::{DecisionBox, Problem, ProblemModel, QUADROTOR};
use crate::rng::{ids, RngStream};
use crate::sampling::{sample_scenarios, ScenarioModel, ScenarioSampleSet};

/// `loc + scale * Beta(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledBeta {
    pub a: f64,
    pub b: f64,
    pub loc: f64,
    pub scale: f64,
}

impl ScaledBeta {
    pub fn mean(&self) -> f64 {
        self.loc + self.scale * self.a / (self.a + self.b)
    }

    fn model(&self) -> ScenarioModel {
        ScenarioModel::ScaledBeta {
            a: self.a,
            b: self.b,
            loc: self.loc,
            scale: self.scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrotorSpec {
    /// Number of control steps `T`.
    pub horizon: usize,
    pub dt: f64,
    pub x0: [f64; 4],
    pub alpha: f64,
    pub mass: ScaledBeta,
    pub drag: ScaledBeta,
    /// Diagonal of the turbulence covariance.
    pub noise_variance: [f64; 4],
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub obstacles: Vec<Polytope>,
    /// Symmetric bound on every control component.
    pub control_bound: f64,
    /// Weights of the displacement and effort terms.
    pub cost_weights: [f64; 2],
    /// Size of the fixed scenario set behind the expected cost.
    pub cost_scenarios: usize,
    pub cost_seed: u64,
    /// Extra room around start and goal for random path control points.
    pub waypoint_margin: f64,
}

impl Default for QuadrotorSpec {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 0.15,
            x0: [-0.5, 0.0, -0.5, 0.0],
            alpha: 0.15,
            mass: ScaledBeta {
                a: 2.0,
                b: 2.0,
                loc: 0.75,
                scale: 0.5,
            },
            drag: ScaledBeta {
                a: 2.0,
                b: 5.0,
                loc: 0.4,
                scale: 0.2,
            },
            noise_variance: [0.01, 0.75, 0.01, 0.75],
            goal_center: [10.0, 10.0],
            goal_radius: 2.0,
            obstacles: vec![
                Polytope::rectangle(3.0, 6.0, 0.0, 4.0).expect("static obstacle"),
                Polytope::rectangle(3.0, 6.0, 6.0, 10.0).expect("static obstacle"),
            ],
            control_bound: 200.0,
            cost_weights: [1.0, 0.1],
            cost_scenarios: 64,
            cost_seed: 0,
            waypoint_margin: 3.0,
        }
    }
}

/// States `x_0 … x_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<[f64; 4]>,
}

impl Trajectory {
    pub fn position(&self, t: usize) -> [f64; 2] {
        [self.states[t][0], self.states[t][2]]
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.states.iter().map(|s| [s[0], s[2]])
    }

    /// CSV with header `t,p_x,v_x,p_y,v_y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,p_x,v_x,p_y,v_y\n");
        for (t, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{t},{},{},{},{}\n", s[0], s[1], s[2], s[3]));
        }
        out
    }
}

impl QuadrotorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return domain("horizon must be at least 1");
        }
        if !(self.dt > 0.0) || !(self.goal_radius > 0.0) || !(self.control_bound > 0.0) {
            return domain("dt, goal_radius and control_bound must be positive");
        }
        if self.noise_variance.iter().any(|v| !(*v >= 0.0)) {
            return domain("noise variances must be non-negative");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain("alpha must lie in (0, 1)");
        }
        if self.cost_scenarios == 0 {
            return domain("cost_scenarios must be positive");
        }
        if self.cost_weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("cost weights must be non-negative");
        }
        if !(self.mass.loc > 0.0) || !(self.mass.scale >= 0.0) {
            return domain("mass support must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn decision_dim(&self) -> usize {
        2 * self.horizon
    }

    pub fn scenario_dim(&self) -> usize {
        2 + 4 * self.horizon
    }

    pub fn control_box(&self) -> DecisionBox {
        DecisionBox::cube(self.decision_dim(), -self.control_bound, self.control_bound).expect("validated bound")
    }

    /// `(m, φ, ω_0 … ω_{T−1})`. A zero noise variance is not a valid normal
    /// component, so such specs cannot be sampled through this model.
    pub fn scenario_model(&self) -> ScenarioModel {
        let noise = ScenarioModel::Product {
            components: self
                .noise_variance
                .iter()
                .map(|&variance| ScenarioModel::Normal { mean: 0.0, variance })
                .collect(),
        };
        ScenarioModel::Product {
            components: vec![
                self.mass.model(),
                self.drag.model(),
                ScenarioModel::Repeat {
                    component: Box::new(noise),
                    times: self.horizon,
                },
            ],
        }
    }

    fn step(&self, x: &mut [f64; 4], u: &[f64], m: f64, phi: f64, w: &[f64]) {
        let dt = self.dt;
        let (vx, vy) = (x[1], x[3]);
        let (dx, dy) = (phi * vx.abs() * vx, phi * vy.abs() * vy);
        x[0] += dt * vx + dt * dt / 2.0 * (u[0] / m - dx) + w[0];
        x[1] += dt * (u[0] / m - dx) + w[1];
        x[2] += dt * vy + dt * dt / 2.0 * (u[1] / m - dy) + w[2];
        x[3] += dt * (u[1] / m - dy) + w[3];
    }

    fn check_inputs(&self, u: &[f64], delta: &[f64]) -> Result<()> {
        if u.len() != self.decision_dim() || delta.len() != self.scenario_dim() {
            return domain("control or scenario vector has the wrong length");
        }
        if !(delta[0] > 0.0) {
            return domain("mass must be positive");
        }
        Ok(())
    }

    pub fn rollout(&self, u: &[f64], delta: &[f64]) -> Result<Trajectory> {
        self.check_inputs(u, delta)?;
        let (m, phi) = (delta[0], delta[1]);
        let mut x = self.x0;
        let mut states = Vec::with_capacity(self.horizon + 1);
        states.push(x);
        for t in 0..self.horizon {
            self.step(&mut x, &u[2 * t..2 * t + 2], m, phi, &delta[2 + 4 * t..6 + 4 * t]);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("state diverged at step {}", t + 1)));
            }
            states.push(x);
        }
        Ok(Trajectory { states })
    }

    fn goal_margin(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.goal_center[0]).hypot(p[1] - self.goal_center[1]) - self.goal_radius
    }

    fn avoid_margin(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.depth(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Scalar `h`: `<= 0` iff `p_T` is in the goal disc and no `p_t`,
    /// `1 <= t <= T−1`, lies strictly inside an obstacle.
    pub fn joint_margin(&self, traj: &Trajectory) -> f64 {
        let t_end = traj.states.len() - 1;
        (1..t_end)
            .map(|t| self.avoid_margin(traj.position(t)))
            .fold(self.goal_margin(traj.position(t_end)), f64::max)
    }

    /// `w_x ℓ^x + w_u ℓ^u` with `ℓ^x` the mean squared step displacement and
    /// `ℓ^u = (1/T) Σ |u_t|²`.
    pub fn trajectory_cost(&self, traj: &Trajectory, u: &[f64]) -> f64 {
        let t = self.horizon as f64;
        let lx = traj
            .states
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).powi(2) + (w[1][2] - w[0][2]).powi(2))
            .sum::<f64>()
            / t;
        let lu = u.iter().map(|v| v * v).sum::<f64>() / t;
        self.cost_weights[0] * lx + self.cost_weights[1] * lu
    }

    /// Allocation-free margin; `+∞` when the state diverges.
    fn margin_unchecked(&self, u: &[f64], delta: &[f64]) -> f64 {
        let (m, phi) = (delta[0], delta[1]);
        let mut x = self.x0;
        let mut worst = f64::NEG_INFINITY;
        for t in 0..self.horizon {
            self.step(&mut x, &u[2 * t..2 * t + 2], m, phi, &delta[2 + 4 * t..6 + 4 * t]);
            if t + 1 < self.horizon {
                worst = worst.max(self.avoid_margin([x[0], x[2]]));
            }
        }
        if x.iter().any(|v| !v.is_finite()) || worst.is_nan() {
            return f64::INFINITY;
        }
        worst.max(self.goal_margin([x[0], x[2]]))
    }

    fn cost_unchecked(&self, u: &[f64], delta: &[f64]) -> f64 {
        let (m, phi) = (delta[0], delta[1]);
        let mut x = self.x0;
        let mut lx = 0.0;
        for t in 0..self.horizon {
            let (px, py) = (x[0], x[2]);
            self.step(&mut x, &u[2 * t..2 * t + 2], m, phi, &delta[2 + 4 * t..6 + 4 * t]);
            lx += (x[0] - px).powi(2) + (x[2] - py).powi(2);
        }
        let t = self.horizon as f64;
        let lu = u.iter().map(|v| v * v).sum::<f64>() / t;
        let c = self.cost_weights[0] * lx / t + self.cost_weights[1] * lu;
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    /// Fixed scenario set behind the expected cost.
    pub fn cost_scenario_set(&self) -> Result<ScenarioSampleSet> {
        sample_scenarios(
            &self.scenario_model(),
            self.cost_scenarios,
            &mut RngStream::new(self.cost_seed, ids::COST_SCENARIOS),
        )
    }

    pub fn as_problem(&self) -> Result<Problem> {
        self.validate()?;
        let model = QuadrotorModel {
            cost_scenarios: self.cost_scenario_set()?,
            spec: self.clone(),
        };
        Problem::new(
            QUADROTOR,
            self.control_box(),
            self.alpha,
            self.scenario_model(),
            Arc::new(model),
        )
    }
}

pub struct QuadrotorModel {
    spec: QuadrotorSpec,
    cost_scenarios: ScenarioSampleSet,
}

impl QuadrotorModel {
    pub fn spec(&self) -> &QuadrotorSpec {
        &self.spec
    }
}

impl ProblemModel for QuadrotorModel {
    fn decision_dim(&self) -> usize {
        self.spec.decision_dim()
    }

    fn scenario_dim(&self) -> usize {
        self.spec.scenario_dim()
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    /// Mean trajectory cost over the fixed internal scenario set.
    fn cost(&self, x: &[f64]) -> f64 {
        self.cost_scenarios
            .rows()
            .map(|d| self.spec.cost_unchecked(x, d))
            .sum::<f64>()
            / self.cost_scenarios.len() as f64
    }

    fn constraint(&self, x: &[f64], delta: &[f64], out: &mut [f64]) {
        out[0] = self.spec.margin_unchecked(x, delta);
    }
}
