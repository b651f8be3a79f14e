//! Dense two-phase revised simplex for `min cᵀx  s.t.  A x = b, x >= 0`.
//!
//! Entering and leaving variables follow Bland's smallest-index rule, which
//! rules out cycling. The basis inverse is kept explicitly and updated with
//! an eta pivot; basic values are recomputed from `B⁻¹ b` after every pivot.

const PIVOT_TOL: f64 = 1e-12;
const COST_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct StandardFormLp {
    /// Row-major `m × n` constraint matrix.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimplexOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        iterations: usize,
    },
    Infeasible,
    Unbounded,
}

struct Tableau {
    m: usize,
    /// Columns of `[A | I]`; the last `m` are artificials.
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn column_in_basis(&self, j: usize) -> Vec<f64> {
        (0..self.m)
            .map(|i| (0..self.m).map(|k| self.binv[i][k] * self.cols[j][k]).sum())
            .collect()
    }

    fn pivot(&mut self, row: usize, entering: usize, u: &[f64]) {
        let p = u[row];
        for k in 0..self.m {
            self.binv[row][k] /= p;
        }
        for i in 0..self.m {
            if i != row && u[i] != 0.0 {
                let f = u[i];
                for k in 0..self.m {
                    self.binv[i][k] -= f * self.binv[row][k];
                }
            }
        }
        self.basis[row] = entering;
        self.xb = (0..self.m)
            .map(|i| (0..self.m).map(|k| self.binv[i][k] * self.b[k]).sum())
            .collect();
        // clip round-off below zero
        for v in &mut self.xb {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.iterations += 1;
    }

    /// Runs Bland's rule on `costs`; columns with `allowed[j] == false` never enter.
    /// Returns `false` when the objective is unbounded below.
    fn optimize(&mut self, costs: &[f64], allowed: &[bool]) -> bool {
        loop {
            let y: Vec<f64> = (0..self.m)
                .map(|k| (0..self.m).map(|i| costs[self.basis[i]] * self.binv[i][k]).sum())
                .collect();
            let entering = (0..self.cols.len()).find(|&j| {
                allowed[j]
                    && !self.basis.contains(&j)
                    && costs[j] - (0..self.m).map(|k| y[k] * self.cols[j][k]).sum::<f64>()
                        < -COST_TOL
            });
            let Some(entering) = entering else {
                return true;
            };
            let u = self.column_in_basis(entering);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if u[i] > PIVOT_TOL {
                    let ratio = self.xb[i] / u[i];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-15
                                || (ratio <= best + 1e-15 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return false;
            };
            self.pivot(row, entering, &u);
        }
    }
}

pub fn solve(lp: &StandardFormLp) -> SimplexOutcome {
    let m = lp.a.len();
    let n = lp.c.len();
    assert!(m > 0 && lp.b.len() == m && lp.a.iter().all(|r| r.len() == n));

    // b >= 0
    let mut rows = lp.a.clone();
    let mut b = lp.b.clone();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            rows[i].iter_mut().for_each(|v| *v = -*v);
        }
    }

    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        cols.push(e);
    }
    let mut t = Tableau {
        m,
        cols,
        b: b.clone(),
        basis: (n..n + m).collect(),
        binv: (0..m)
            .map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect(),
        xb: b,
        iterations: 0,
    };

    // Phase I: minimize the sum of artificials.
    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let all = vec![true; n + m];
    t.optimize(&phase1, &all);
    let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.xb[i]).sum();
    let scale = 1.0 + t.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeas > FEAS_TOL * scale {
        return SimplexOutcome::Infeasible;
    }

    // Drive zero-level artificials out where an original column can replace them.
    for row in 0..m {
        if t.basis[row] >= n {
            if let Some(j) = (0..n).find(|&j| {
                !t.basis.contains(&j) && t.column_in_basis(j)[row].abs() > 1e-9
            }) {
                let u = t.column_in_basis(j);
                t.pivot(row, j, &u);
            }
        }
    }

    // Phase II; artificials may stay basic at zero on redundant rows but never re-enter.
    let mut phase2 = lp.c.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    let allowed: Vec<bool> = (0..n + m).map(|j| j < n).collect();
    if !t.optimize(&phase2, &allowed) {
        return SimplexOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[i];
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    SimplexOutcome::Optimal {
        x,
        objective,
        iterations: t.iterations,
    }
}
