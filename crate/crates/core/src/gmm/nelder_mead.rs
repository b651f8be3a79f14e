//! Nelder–Mead direct search.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han above two
//! dimensions and the classic `(1, 2, 1/2, 1/2)` otherwise. The best vertex
//! never gets worse, so the result is never worse than the starting point.

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop when the spread of simplex values falls below this (absolute).
    pub f_tol: f64,
    /// ... and the simplex diameter falls below this (infinity norm).
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of sizes `steps`.
pub fn minimize<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0 && steps.len() == n);
    let nf = n as f64;
    let (reflect, expand, contract, shrink) = if n > 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evaluations);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // stable sort keeps the older vertex first on ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(reflect);
        let fr = eval(&xr, &mut evaluations);
        if fr < best {
            let xe = along(reflect * expand);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = along(reflect * contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + shrink * (v - a))
                .collect();
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            &NelderMeadOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 2.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &NelderMeadOptions {
                max_iterations: 5000,
                ..Default::default()
            },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn higher_dimension_uses_adaptive_coefficients() {
        let target: Vec<f64> = (0..8).map(|i| i as f64 * 0.3).collect();
        let r = minimize(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(),
            &[0.0; 8],
            &[1.0; 8],
            &NelderMeadOptions {
                max_iterations: 20_000,
                ..Default::default()
            },
        );
        assert!(r.value < 1e-8, "{}", r.value);
    }

    #[test]
    fn never_worse_than_start_even_on_nan() {
        let start = [0.3, 0.3, 0.3];
        let f = |x: &[f64]| {
            if x[0] > 0.31 {
                f64::NAN
            } else {
                x.iter().map(|v| v.abs()).sum::<f64>()
            }
        };
        let f0 = f(&start);
        let r = minimize(f, &start, &[0.2; 3], &NelderMeadOptions::default());
        assert!(r.value <= f0);
    }
}
