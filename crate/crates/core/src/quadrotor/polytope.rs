//! Planar convex polytopes `{p : N p <= b}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "HalfSpaces")]
pub struct Polytope {
    normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
    vertices: Vec<[f64; 2]>,
}

#[derive(Clone, Serialize, Deserialize)]
struct HalfSpaces {
    normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
}

/// Accepted file forms: explicit half-spaces or an axis-aligned rectangle
/// `[x_min, x_max, y_min, y_max]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum PolytopeRepr {
    HalfSpaces(HalfSpaces),
    Rect { rect: [f64; 4] },
}

impl TryFrom<PolytopeRepr> for Polytope {
    type Error = Error;
    fn try_from(r: PolytopeRepr) -> Result<Self> {
        match r {
            PolytopeRepr::HalfSpaces(h) => Polytope::new(h.normals, h.offsets),
            PolytopeRepr::Rect { rect: [x0, x1, y0, y1] } => Polytope::rectangle(x0, x1, y0, y1),
        }
    }
}

impl From<Polytope> for HalfSpaces {
    fn from(p: Polytope) -> Self {
        HalfSpaces {
            normals: p.normals,
            offsets: p.offsets,
        }
    }
}

const VERTEX_TOL: f64 = 1e-9;

impl Polytope {
    /// Checks boundedness and a nonempty interior by enumerating vertices.
    pub fn new(normals: Vec<[f64; 2]>, offsets: Vec<f64>) -> Result<Self> {
        if normals.len() != offsets.len() || normals.len() < 3 {
            return domain("polytope needs at least 3 faces with one offset each");
        }
        if normals.iter().flatten().chain(&offsets).any(|v| !v.is_finite()) {
            return domain("polytope data must be finite");
        }
        if normals.iter().any(|n| n[0] == 0.0 && n[1] == 0.0) {
            return domain("polytope normals must be nonzero");
        }
        // bounded iff consecutive normal directions leave no gap of π or more
        let mut angles: Vec<f64> = normals.iter().map(|n| n[1].atan2(n[0])).collect();
        angles.sort_by(f64::total_cmp);
        let wrap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
        let widest = angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
        if widest >= std::f64::consts::PI - 1e-12 {
            return domain("polytope is unbounded");
        }

        let k = normals.len();
        let mut vertices: Vec<[f64; 2]> = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (normals[i], normals[j]);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-14 {
                    continue;
                }
                let p = [
                    (offsets[i] * b[1] - a[1] * offsets[j]) / det,
                    (a[0] * offsets[j] - offsets[i] * b[0]) / det,
                ];
                let scale = 1.0 + p[0].abs() + p[1].abs();
                let inside = normals
                    .iter()
                    .zip(&offsets)
                    .all(|(n, o)| n[0] * p[0] + n[1] * p[1] <= o + VERTEX_TOL * scale);
                if inside && !vertices.iter().any(|v| (v[0] - p[0]).abs() + (v[1] - p[1]).abs() < 1e-9 * scale) {
                    vertices.push(p);
                }
            }
        }
        if vertices.len() < 3 {
            return domain("polytope has an empty interior");
        }
        let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / vertices.len() as f64;
        let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / vertices.len() as f64;
        vertices.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).total_cmp(&(b[1] - cy).atan2(b[0] - cx)));
        let area: f64 = (0..vertices.len())
            .map(|i| {
                let (p, q) = (vertices[i], vertices[(i + 1) % vertices.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            / 2.0;
        if !(area > 1e-12) {
            return domain("polytope has an empty interior");
        }
        Ok(Self {
            normals,
            offsets,
            vertices,
        })
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return domain("rectangle bounds must be increasing");
        }
        Self::new(
            vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![x1, -x0, y1, -y0],
        )
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Vertices in counter-clockwise order.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// `min_k (b_k − n_k·p)`: positive strictly inside, negative outside.
    pub fn depth(&self, p: [f64; 2]) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, o)| o - n[0] * p[0] - n[1] * p[1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, o)| n[0] * p[0] + n[1] * p[1] <= *o)
    }
}
