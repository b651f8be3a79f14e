//! Smooth candidate control trajectories.
//!
//! A candidate follows a cubic Bézier path from the start position to the goal
//! centre with two random control points, traversed with smoothstep timing
//! `s(τ) = 3τ² − 2τ³`. Controls invert the nominal dynamics (mean mass and
//! mean drag coefficient, no turbulence) at the path's sampled velocities.

use super::QuadrotorSpec;
use crate::error::{domain, Result};
use crate::rng::RngStream;
use crate::sampling::{DecisionSampleSet, SampleOrigin};

/// Draws before giving up on producing in-box candidates.
const MAX_DRAWS_PER_CANDIDATE: usize = 1000;

fn bezier(p: [[f64; 2]; 4], s: f64) -> ([f64; 2], [f64; 2]) {
    let r = 1.0 - s;
    let mut pos = [0.0; 2];
    let mut vel = [0.0; 2];
    for k in 0..2 {
        pos[k] = r * r * r * p[0][k] + 3.0 * r * r * s * p[1][k] + 3.0 * r * s * s * p[2][k] + s * s * s * p[3][k];
        vel[k] = 3.0 * r * r * (p[1][k] - p[0][k]) + 6.0 * r * s * (p[2][k] - p[1][k]) + 3.0 * s * s * (p[3][k] - p[2][k]);
    }
    (pos, vel)
}

/// Controls tracking the path through control points `c1`, `c2`.
pub fn nominal_controls(spec: &QuadrotorSpec, c1: [f64; 2], c2: [f64; 2]) -> Vec<f64> {
    let t_total = spec.horizon as f64;
    let points = [[spec.x0[0], spec.x0[2]], c1, c2, spec.goal_center];
    let (m, phi) = (spec.mass.mean(), spec.drag.mean());
    let velocity = |t: usize| {
        let tau = t as f64 / t_total;
        let s = 3.0 * tau * tau - 2.0 * tau * tau * tau;
        let ds = (6.0 * tau - 6.0 * tau * tau) / (t_total * spec.dt);
        let (_, dq) = bezier(points, s);
        [dq[0] * ds, dq[1] * ds]
    };
    let mut u = Vec::with_capacity(2 * spec.horizon);
    for t in 0..spec.horizon {
        let (v, next) = (velocity(t), velocity(t + 1));
        for k in 0..2 {
            let accel = (next[k] - v[k]) / spec.dt;
            u.push(m * (accel + phi * v[k].abs() * v[k]));
        }
    }
    u
}

/// `count` candidates; paths whose controls leave the control box are redrawn.
pub fn sample_waypoint_controls(
    spec: &QuadrotorSpec,
    count: usize,
    stream: &mut RngStream,
) -> Result<DecisionSampleSet> {
    if count == 0 {
        return domain("S must be at least 1");
    }
    let start = [spec.x0[0], spec.x0[2]];
    let lo = [
        start[0].min(spec.goal_center[0]) - spec.waypoint_margin,
        start[1].min(spec.goal_center[1]) - spec.waypoint_margin,
    ];
    let hi = [
        start[0].max(spec.goal_center[0]) + spec.waypoint_margin,
        start[1].max(spec.goal_center[1]) + spec.waypoint_margin,
    ];
    let mut rows = Vec::with_capacity(count);
    let mut draws = 0;
    while rows.len() < count {
        if draws >= MAX_DRAWS_PER_CANDIDATE * count {
            return domain("control bound too tight for waypoint candidates");
        }
        draws += 1;
        let mut point = || [stream.uniform_range(lo[0], hi[0]), stream.uniform_range(lo[1], hi[1])];
        let (c1, c2) = (point(), point());
        let u = nominal_controls(spec, c1, c2);
        if u.iter().all(|v| v.abs() <= spec.control_bound) {
            rows.push(u);
        }
    }
    DecisionSampleSet::from_rows(rows, SampleOrigin::Waypoint)
}
