//! Indicator satisfaction matrix over (decision sample, scenario) pairs.
//!
//! Bit `(i, j)` is set iff every component of `h(x_i, δ_j) + γ` is `<= 0`.
//! Row means `q_i = count_i / N` are formed from integer counts, so they are
//! exact rationals independent of evaluation order.
//!
//! # Dump format
//!
//! Little-endian: magic `b"CCSM"`, `u32` version (1), `u64` S, `u64` N,
//! `f64` γ, then S rows of `ceil(N / 8)` bytes each. Scenario `j` of a row is
//! bit `j % 8` (least significant first) of byte `j / 8`; padding bits are 0.

use std::io::{Read, Write};

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};
use crate::problem::Problem;
use crate::sampling::{DecisionSampleSet, ScenarioSampleSet};

/// Counts how many scenarios of a fixed set a decision satisfies.
pub trait SatisfactionCounter: Send + Sync {
    fn count(&self, x: &[f64]) -> usize;
    fn total(&self) -> usize;

    fn fraction(&self, x: &[f64]) -> f64 {
        self.count(x) as f64 / self.total() as f64
    }
}

/// Reference counter: evaluates `h` on every scenario.
pub struct ScanCounter<'a> {
    problem: &'a Problem,
    scenarios: &'a ScenarioSampleSet,
    gamma: f64,
}

impl<'a> ScanCounter<'a> {
    pub fn new(problem: &'a Problem, scenarios: &'a ScenarioSampleSet, gamma: f64) -> Self {
        Self {
            problem,
            scenarios,
            gamma,
        }
    }
}

impl SatisfactionCounter for ScanCounter<'_> {
    fn count(&self, x: &[f64]) -> usize {
        let mut buf = vec![0.0; self.problem.m()];
        self.scenarios
            .rows()
            .filter(|d| self.problem.satisfied_at(x, d, self.gamma, &mut buf))
            .count()
    }

    fn total(&self) -> usize {
        self.scenarios.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SatisfactionMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    counts: Vec<u32>,
    q: Vec<f64>,
    gamma: f64,
}

impl SatisfactionMatrix {
    fn from_packed(rows: usize, cols: usize, gamma: f64, bits: Vec<u64>) -> Self {
        let words_per_row = cols.div_ceil(64);
        let counts: Vec<u32> = bits
            .chunks_exact(words_per_row)
            .map(|r| r.iter().map(|w| w.count_ones()).sum())
            .collect();
        let q = counts.iter().map(|&c| c as f64 / cols as f64).collect();
        Self {
            rows,
            cols,
            words_per_row,
            bits,
            counts,
            q,
            gamma,
        }
    }

    /// Number of decision samples `S`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of scenarios `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let w = self.bits[i * self.words_per_row + j / 64];
        (w >> (j % 64)) & 1 == 1
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Empirical satisfaction probability per decision sample.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(b"CCSM")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        w.write_all(&self.gamma.to_le_bytes())?;
        let row_bytes = self.cols.div_ceil(8);
        let mut buf = Vec::with_capacity(row_bytes);
        for row in self.bits.chunks_exact(self.words_per_row) {
            buf.clear();
            for word in row {
                buf.extend_from_slice(&word.to_le_bytes());
            }
            w.write_all(&buf[..row_bytes])?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CCSM" {
            return Err(Error::Config("not a satisfaction matrix dump".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(Error::Config("unsupported satisfaction dump version".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let cols = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let gamma = f64::from_le_bytes(b8);
        if rows == 0 || cols == 0 {
            return Err(Error::Config("empty satisfaction dump".into()));
        }
        let words_per_row = cols.div_ceil(64);
        let row_bytes = cols.div_ceil(8);
        let mut bits = Vec::with_capacity(rows * words_per_row);
        let mut raw = vec![0u8; words_per_row * 8];
        for _ in 0..rows {
            raw.iter_mut().for_each(|b| *b = 0);
            r.read_exact(&mut raw[..row_bytes])?;
            bits.extend(
                raw.chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))),
            );
        }
        Ok(Self::from_packed(rows, cols, gamma, bits))
    }
}

/// Evaluates the indicator on every (decision, scenario) pair. Rows are
/// filled in parallel; each row's count is an integer, so `q` does not depend
/// on scheduling.
pub fn build_matrix(
    problem: &Problem,
    decisions: &DecisionSampleSet,
    scenarios: &ScenarioSampleSet,
    gamma: f64,
) -> Result<SatisfactionMatrix> {
    if !(gamma >= 0.0) {
        return domain(format!("gamma must be non-negative, got {gamma}"));
    }
    if decisions.dim() != problem.n() {
        return domain("decision samples do not match the problem dimension");
    }
    if scenarios.dim() != problem.s() {
        return domain("scenarios do not match the problem's scenario dimension");
    }
    let rows = decisions.len();
    let cols = scenarios.len();
    let words_per_row = cols.div_ceil(64);
    let mut bits = vec![0u64; rows * words_per_row];
    bits.par_chunks_exact_mut(words_per_row)
        .zip(decisions.rows().collect::<Vec<_>>().into_par_iter())
        .for_each(|(row, x)| {
            let mut buf = vec![0.0; problem.m()];
            for (j, delta) in scenarios.rows().enumerate() {
                if problem.satisfied_at(x, delta, gamma, &mut buf) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
        });
    Ok(SatisfactionMatrix::from_packed(rows, cols, gamma, bits))
}

/// Standard normal CDF through the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact `Pr{x^2 + δ - 2 <= 0}` for `δ ~ N(0, 1)`, i.e. `Φ(2 - x^2)`.
pub fn exact_prob_toy1d(x: f64) -> f64 {
    std_normal_cdf(2.0 - x * x)
}

/// `Σ_i μ_i q_i`; `mu` must be a probability vector.
pub fn weighted_satisfaction(q: &[f64], mu: &[f64]) -> Result<f64> {
    if q.len() != mu.len() {
        return domain("q and mu lengths differ");
    }
    if mu.iter().any(|&w| !(w >= 0.0)) {
        return domain("weights must be non-negative");
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return domain(format!("weights sum to {total}, expected 1"));
    }
    Ok(q.iter().zip(mu).map(|(a, b)| a * b).sum())
}
