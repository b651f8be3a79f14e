//! SVG rendering of sampled quadrotor paths.

use std::fmt::Write;

use super::QuadrotorSpec;

pub struct PlottedPath {
    pub points: Vec<[f64; 2]>,
    pub feasible: bool,
}

const SIZE: f64 = 600.0;
const FEASIBLE: &str = "#2b8cbe";
const VIOLATING: &str = "#e34a33";

/// One `<path>` per plotted rollout, obstacles as polygons, goal as a circle.
pub fn trajectories_svg(spec: &QuadrotorSpec, paths: &[PlottedPath]) -> String {
    let start = [spec.x0[0], spec.x0[2]];
    let mut lo = [start[0].min(spec.goal_center[0] - spec.goal_radius), start[1].min(spec.goal_center[1] - spec.goal_radius)];
    let mut hi = [start[0].max(spec.goal_center[0] + spec.goal_radius), start[1].max(spec.goal_center[1] + spec.goal_radius)];
    for v in spec.obstacles.iter().flat_map(|o| o.vertices()) {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let pad = 0.1 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let (x0, y0) = (lo[0] - pad, lo[1] - pad);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad;
    let scale = SIZE / span;
    // world y grows upwards; clamp far-off points to just outside the frame
    let map = |p: [f64; 2]| {
        let sx = ((p[0] - x0) * scale).clamp(-SIZE, 2.0 * SIZE);
        let sy = (SIZE - (p[1] - y0) * scale).clamp(-SIZE, 2.0 * SIZE);
        (sx, sy)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    for o in &spec.obstacles {
        let pts: Vec<String> = o
            .vertices()
            .iter()
            .map(|v| {
                let (a, b) = map(*v);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let _ = writeln!(svg, r##"<polygon points="{}" fill="#999999" stroke="black"/>"##, pts.join(" "));
    }
    let (gx, gy) = map(spec.goal_center);
    let _ = writeln!(
        svg,
        r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="{:.2}" fill="none" stroke="#31a354" stroke-width="2"/>"##,
        spec.goal_radius * scale
    );
    for path in paths {
        let mut d = String::new();
        for (i, p) in path.points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                break;
            }
            let (a, b) = map(*p);
            let _ = write!(d, "{}{a:.2},{b:.2}", if i == 0 { "M" } else { " L" });
        }
        let colour = if path.feasible { FEASIBLE } else { VIOLATING };
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{colour}" stroke-opacity="0.35" stroke-width="1"/>"#
        );
    }
    let (sx, sy) = map(start);
    let _ = writeln!(svg, r#"<circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="black"/>"#);
    svg.push_str("</svg>\n");
    svg
}
