//! SVG figures for one-dimensional problems: the policy on the decision
//! interval with the cost curve behind it.

use std::fmt::Write;

use crate::problem::{PolicyArtifact, Problem};

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 40.0;
const CURVE_POINTS: usize = 400;

/// Cost curve (grey), discrete atoms as stems with height ∝ weight, mixture
/// density as a filled curve, a point policy as a single full-height stem.
pub fn policy_svg_1d(problem: &Problem, policy: &PolicyArtifact) -> Option<String> {
    if problem.n() != 1 {
        return None;
    }
    let (lo, hi) = (problem.bounds().lower()[0], problem.bounds().upper()[0]);
    let xs: Vec<f64> = (0..=CURVE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / CURVE_POINTS as f64)
        .collect();
    let costs: Vec<f64> = xs.iter().map(|&x| problem.cost_at(&[x])).collect();
    let (cmin, cmax) = costs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let sx = |x: f64| MARGIN + (x - lo) / (hi - lo) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - v * (H - 2.0 * MARGIN);
    let norm = |c: f64| if cmax > cmin { (c - cmin) / (cmax - cmin) } else { 0.5 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        sx(lo),
        sy(0.0),
        sx(hi),
        sy(0.0)
    );
    let mut d = String::new();
    for (i, (x, c)) in xs.iter().zip(&costs).enumerate() {
        let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(*x), sy(norm(*c)));
    }
    let _ = writeln!(svg, r##"<path d="{d}" fill="none" stroke="#888888" stroke-dasharray="4 3"/>"##);

    match policy {
        PolicyArtifact::Point { x } => {
            let _ = writeln!(
                svg,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#e34a33" stroke-width="3"/>"##,
                sx(x[0]),
                sy(0.0),
                sy(1.0)
            );
        }
        PolicyArtifact::Discrete(m) => {
            let top = m.atoms().iter().map(|a| a.weight).fold(0.0, f64::max);
            for a in m.atoms() {
                let _ = writeln!(
                    svg,
                    r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#2b8cbe" stroke-width="3"/>"##,
                    sx(a.x[0]),
                    sy(0.0),
                    sy(a.weight / top)
                );
            }
        }
        PolicyArtifact::Gmm(g) => {
            let dens: Vec<f64> = xs.iter().map(|&x| g.pdf(&[x])).collect();
            let top = dens.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut d = format!("M{:.2},{:.2}", sx(lo), sy(0.0));
            for (x, v) in xs.iter().zip(&dens) {
                let _ = write!(d, " L{:.2},{:.2}", sx(*x), sy(v / top));
            }
            let _ = write!(d, " L{:.2},{:.2} Z", sx(hi), sy(0.0));
            let _ = writeln!(svg, r##"<path d="{d}" fill="#31a354" fill-opacity="0.4" stroke="#31a354"/>"##);
        }
    }
    for (x, label) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{label}</text>"#,
            sx(x),
            H - MARGIN / 3.0
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}
