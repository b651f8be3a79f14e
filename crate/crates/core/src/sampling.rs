//! Decision-space sampling (uniform draws, lattices) and scenario models.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::problem::DecisionBox;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    UniformRandom,
    Grid,
    /// Smooth control trajectories from random waypoint paths (quadrotor).
    Waypoint,
    /// Supplied by the caller.
    Provided,
}

/// `S` points of dimension `n`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionSampleSet {
    points: Vec<f64>,
    dim: usize,
    origin: SampleOrigin,
}

impl DecisionSampleSet {
    pub fn from_rows(rows: Vec<Vec<f64>>, origin: SampleOrigin) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || dim == 0 {
            return domain("decision sample set needs at least one non-empty row");
        }
        if rows.iter().any(|r| r.len() != dim) {
            return domain("decision rows have inconsistent dimension");
        }
        Ok(Self {
            points: rows.into_iter().flatten().collect(),
            dim,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> SampleOrigin {
        self.origin
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// First `count` rows; used for nested sample sizes.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return domain(format!("prefix {count} out of range 1..={}", self.len()));
        }
        Ok(Self {
            points: self.points[..count * self.dim].to_vec(),
            dim: self.dim,
            origin: self.origin,
        })
    }
}

/// `N` scenarios of dimension `s`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSampleSet {
    data: Vec<f64>,
    dim: usize,
}

impl ScenarioSampleSet {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return domain("scenario set needs N >= 1 rows of equal, non-zero width");
        }
        Ok(Self {
            data: rows.into_iter().flatten().collect(),
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return domain(format!("prefix {count} out of range 1..={}", self.len()));
        }
        Ok(Self {
            data: self.data[..count * self.dim].to_vec(),
            dim: self.dim,
        })
    }
}

pub fn sample_decisions_uniform(
    bounds: &DecisionBox,
    count: usize,
    stream: &mut RngStream,
) -> Result<DecisionSampleSet> {
    if count == 0 {
        return domain("S must be at least 1");
    }
    let dim = bounds.dim();
    let mut points = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for k in 0..dim {
            points.push(stream.uniform_range(bounds.lower()[k], bounds.upper()[k]));
        }
    }
    Ok(DecisionSampleSet {
        points,
        dim,
        origin: SampleOrigin::UniformRandom,
    })
}

/// Axis-aligned lattice with spacing `step`, both endpoints included.
///
/// The number of intervals per axis is `round(width / step)`; the step must
/// divide the width to within `1e-9` relative.
pub fn grid_decisions(bounds: &DecisionBox, step: f64) -> Result<DecisionSampleSet> {
    if !(step > 0.0) || !step.is_finite() {
        return domain(format!("grid step must be positive, got {step}"));
    }
    let mut axes = Vec::with_capacity(bounds.dim());
    for k in 0..bounds.dim() {
        let (lo, hi) = (bounds.lower()[k], bounds.upper()[k]);
        let width = hi - lo;
        let ratio = width / step;
        if ratio < 1.0 - 1e-9 {
            return domain(format!("grid step {step} exceeds box width {width}"));
        }
        let intervals = ratio.round();
        if (ratio - intervals).abs() > 1e-9 * ratio.max(1.0) {
            return domain(format!("grid step {step} does not divide box width {width}"));
        }
        let intervals = intervals as usize;
        let axis: Vec<f64> = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    hi
                } else {
                    lo + width * i as f64 / intervals as f64
                }
            })
            .collect();
        axes.push(axis);
    }

    let total: usize = axes.iter().map(Vec::len).product();
    let dim = axes.len();
    let mut points = Vec::with_capacity(total * dim);
    let mut counter = vec![0usize; dim];
    for _ in 0..total {
        for k in 0..dim {
            points.push(axes[k][counter[k]]);
        }
        // odometer, last axis fastest
        for k in (0..dim).rev() {
            counter[k] += 1;
            if counter[k] < axes[k].len() {
                break;
            }
            counter[k] = 0;
        }
    }
    Ok(DecisionSampleSet {
        points,
        dim,
        origin: SampleOrigin::Grid,
    })
}

/// Distribution of the uncertain parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioModel {
    Normal {
        mean: f64,
        variance: f64,
    },
    MultivariateNormal {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    /// `loc + scale * Beta(a, b)`.
    ScaledBeta {
        a: f64,
        b: f64,
        loc: f64,
        scale: f64,
    },
    /// Independent components, concatenated.
    Product {
        components: Vec<ScenarioModel>,
    },
    /// `times` independent copies of one component, concatenated.
    Repeat {
        component: Box<ScenarioModel>,
        times: usize,
    },
}

impl ScenarioModel {
    pub fn dim(&self) -> usize {
        match self {
            ScenarioModel::Normal { .. } | ScenarioModel::ScaledBeta { .. } => 1,
            ScenarioModel::MultivariateNormal { mean, .. } => mean.len(),
            ScenarioModel::Product { components } => components.iter().map(Self::dim).sum(),
            ScenarioModel::Repeat { component, times } => component.dim() * times,
        }
    }

    /// Validates parameters and precomputes factorizations.
    pub fn compile(&self) -> Result<ScenarioSampler> {
        let parts = match self {
            ScenarioModel::Normal { mean, variance } => {
                if !(*variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
                    return domain(format!("normal variance must be positive, got {variance}"));
                }
                vec![Compiled::Normal {
                    mean: *mean,
                    sd: variance.sqrt(),
                }]
            }
            ScenarioModel::MultivariateNormal { mean, covariance } => {
                let factor = cholesky(covariance)?;
                if factor.len() != mean.len() {
                    return domain("mean and covariance dimensions differ");
                }
                vec![Compiled::Mvn {
                    mean: mean.clone(),
                    factor,
                }]
            }
            ScenarioModel::ScaledBeta { a, b, loc, scale } => {
                if !(*a > 0.0) || !(*b > 0.0) {
                    return domain(format!("beta shapes must be positive, got ({a}, {b})"));
                }
                if !(*scale > 0.0) || !loc.is_finite() {
                    return domain(format!("beta scale must be positive, got {scale}"));
                }
                vec![Compiled::Beta {
                    a: *a,
                    b: *b,
                    loc: *loc,
                    scale: *scale,
                }]
            }
            ScenarioModel::Product { components } => {
                if components.is_empty() {
                    return domain("product model needs at least one component");
                }
                let mut parts = Vec::new();
                for c in components {
                    parts.extend(c.compile()?.parts);
                }
                parts
            }
            ScenarioModel::Repeat { component, times } => {
                if *times == 0 {
                    return domain("repeat count must be positive");
                }
                let one = component.compile()?.parts;
                let mut parts = Vec::with_capacity(one.len() * times);
                for _ in 0..*times {
                    parts.extend(one.iter().cloned());
                }
                parts
            }
        };
        Ok(ScenarioSampler {
            dim: self.dim(),
            parts,
        })
    }
}

#[derive(Clone, Debug)]
enum Compiled {
    Normal { mean: f64, sd: f64 },
    Mvn { mean: Vec<f64>, factor: Vec<Vec<f64>> },
    Beta { a: f64, b: f64, loc: f64, scale: f64 },
}

/// A validated scenario model ready to draw from.
#[derive(Clone, Debug)]
pub struct ScenarioSampler {
    dim: usize,
    parts: Vec<Compiled>,
}

impl ScenarioSampler {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn draw_into(&self, stream: &mut RngStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut at = 0;
        let mut z = Vec::new();
        for part in &self.parts {
            match part {
                Compiled::Normal { mean, sd } => {
                    out[at] = mean + sd * stream.standard_normal();
                    at += 1;
                }
                Compiled::Mvn { mean, factor } => {
                    let d = mean.len();
                    z.clear();
                    z.extend((0..d).map(|_| stream.standard_normal()));
                    for i in 0..d {
                        let mut v = mean[i];
                        for k in 0..=i {
                            v += factor[i][k] * z[k];
                        }
                        out[at + i] = v;
                    }
                    at += d;
                }
                Compiled::Beta { a, b, loc, scale } => {
                    out[at] = loc + scale * stream.beta(*a, *b);
                    at += 1;
                }
            }
        }
    }

    pub fn draw(&self, stream: &mut RngStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.draw_into(stream, &mut out);
        out
    }
}

pub fn sample_scenarios(
    model: &ScenarioModel,
    count: usize,
    stream: &mut RngStream,
) -> Result<ScenarioSampleSet> {
    if count == 0 {
        return domain("N must be at least 1");
    }
    let sampler = model.compile()?;
    let dim = sampler.dim();
    let mut data = vec![0.0; count * dim];
    for row in data.chunks_exact_mut(dim) {
        sampler.draw_into(stream, row);
    }
    Ok(ScenarioSampleSet { data, dim })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return domain("covariance must be a non-empty square matrix");
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                return domain("covariance must be symmetric");
            }
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::Domain(
                        "covariance must be positive definite".into(),
                    ));
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> DecisionBox {
        DecisionBox::new(vec![-1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn uniform_points_stay_in_box_and_reproduce() {
        let b = unit_box();
        let a = sample_decisions_uniform(&b, 4, &mut RngStream::new(7, 1)).unwrap();
        let c = sample_decisions_uniform(&b, 4, &mut RngStream::new(7, 1)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.len(), 4);
        assert!(a.rows().all(|r| b.contains(r)));
    }

    #[test]
    fn uniform_mean_is_centered() {
        let s = sample_decisions_uniform(&unit_box(), 100_000, &mut RngStream::new(1, 1)).unwrap();
        let mean = s.rows().map(|r| r[0]).sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn grid_counts() {
        let g = grid_decisions(&unit_box(), 0.02).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.row(0), &[-1.0]);
        assert_eq!(g.row(100), &[1.0]);
        assert!((g.row(79)[0] - 0.58).abs() < 1e-12);

        let g = grid_decisions(&unit_box(), 2.0).unwrap();
        assert_eq!(g.rows().map(|r| r[0]).collect::<Vec<_>>(), vec![-1.0, 1.0]);

        let sq = DecisionBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = grid_decisions(&sq, 0.5).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.row(1), &[0.0, 0.5]);
        assert_eq!(g.row(3), &[0.5, 0.0]);
    }

    #[test]
    fn grid_rejects_bad_steps() {
        assert!(grid_decisions(&unit_box(), 3.0).is_err());
        assert!(grid_decisions(&unit_box(), 0.3).is_err());
        assert!(grid_decisions(&unit_box(), 0.0).is_err());
    }

    #[test]
    fn fine_grid_has_integer_count() {
        assert_eq!(grid_decisions(&unit_box(), 0.001).unwrap().len(), 2001);
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn standard_normal_scenarios() {
        let model = ScenarioModel::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let s = sample_scenarios(&model, 100_000, &mut RngStream::new(2, 2)).unwrap();
        let xs: Vec<f64> = s.rows().map(|r| r[0]).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.015, "{m}");
        assert!((v - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn scaled_beta_means() {
        let mass = ScenarioModel::ScaledBeta {
            a: 2.0,
            b: 2.0,
            loc: 0.75,
            scale: 0.5,
        };
        let s = sample_scenarios(&mass, 100_000, &mut RngStream::new(3, 2)).unwrap();
        let xs: Vec<f64> = s.rows().map(|r| r[0]).collect();
        assert!((mean_var(&xs).0 - 1.0).abs() < 0.002);
        assert!(xs.iter().all(|&x| (0.75..=1.25).contains(&x)));

        let drag = ScenarioModel::ScaledBeta {
            a: 2.0,
            b: 5.0,
            loc: 0.4,
            scale: 0.2,
        };
        let s = sample_scenarios(&drag, 100_000, &mut RngStream::new(4, 2)).unwrap();
        let xs: Vec<f64> = s.rows().map(|r| r[0]).collect();
        assert!((mean_var(&xs).0 - (0.4 + 0.2 * 2.0 / 7.0)).abs() < 0.002);
    }

    #[test]
    fn mvn_covariance_is_reproduced() {
        let model = ScenarioModel::MultivariateNormal {
            mean: vec![1.0, -1.0],
            covariance: vec![vec![2.0, 0.6], vec![0.6, 0.5]],
        };
        let s = sample_scenarios(&model, 200_000, &mut RngStream::new(8, 2)).unwrap();
        let n = s.len() as f64;
        let m0 = s.rows().map(|r| r[0]).sum::<f64>() / n;
        let m1 = s.rows().map(|r| r[1]).sum::<f64>() / n;
        let c01 = s.rows().map(|r| (r[0] - m0) * (r[1] - m1)).sum::<f64>() / n;
        assert!((m0 - 1.0).abs() < 0.02 && (m1 + 1.0).abs() < 0.01);
        assert!((c01 - 0.6).abs() < 0.02, "{c01}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = [
            ScenarioModel::Normal {
                mean: 0.0,
                variance: 0.0,
            },
            ScenarioModel::ScaledBeta {
                a: 0.0,
                b: 1.0,
                loc: 0.0,
                scale: 1.0,
            },
            ScenarioModel::MultivariateNormal {
                mean: vec![0.0, 0.0],
                covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            },
        ];
        for m in &bad {
            assert!(sample_scenarios(m, 10, &mut RngStream::new(0, 0)).is_err());
        }
        assert!(sample_scenarios(&bad[0], 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn product_dimension_and_layout() {
        let model = ScenarioModel::Product {
            components: vec![
                ScenarioModel::ScaledBeta {
                    a: 2.0,
                    b: 2.0,
                    loc: 0.75,
                    scale: 0.5,
                },
                ScenarioModel::Repeat {
                    component: Box::new(ScenarioModel::Normal {
                        mean: 5.0,
                        variance: 1e-6,
                    }),
                    times: 3,
                },
            ],
        };
        assert_eq!(model.dim(), 4);
        let s = sample_scenarios(&model, 10, &mut RngStream::new(0, 0)).unwrap();
        for r in s.rows() {
            assert!((0.75..=1.25).contains(&r[0]));
            assert!(r[1..].iter().all(|v| (v - 5.0).abs() < 0.01));
        }
    }
}
