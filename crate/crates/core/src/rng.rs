//! Seeded, counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream: the 64-bit seed is expanded into the
//! cipher key and the stream id selects the ChaCha stream (nonce). Two streams
//! with the same seed and different ids never share state, so consumers can run
//! in parallel without coordination, and output is identical on every platform.
//!
//! Normal deviates use the Marsaglia polar method; gamma deviates use the
//! Marsaglia–Tsang squeeze built on those normals; beta deviates use the gamma
//! ratio `G_a / (G_a + G_b)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids reserved by the solvers. Validation ids live in a separate
/// half of the id space (top bit set) so they can never collide with these.
pub mod ids {
    pub const DECISIONS: u64 = 1;
    pub const SCENARIOS: u64 = 2;
    pub const GMM: u64 = 3;
    pub const COST_SCENARIOS: u64 = 4;
    pub const PLOT: u64 = 5;
    pub const VALIDATION: u64 = 1 << 63;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream for sub-task `index`, keeping the top bit of the parent id
    /// so validation children stay in the validation half.
    pub fn substream(&self, index: u64) -> RngStream {
        let top = self.stream_id & ids::VALIDATION;
        let mixed = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5EED)));
        RngStream::new(self.seed, top | (mixed & !ids::VALIDATION))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n` by rejection, `n > 0`.
    pub fn index(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    /// Gamma(shape, 1). Shapes below one use the `U^(1/a)` boost.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            let boost = self.uniform_open().powf(1.0 / shape);
            return self.gamma(shape + 1.0) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let mut x;
            let mut v;
            loop {
                x = self.standard_normal();
                v = 1.0 + c * x;
                if v > 0.0 {
                    break;
                }
            }
            v = v * v * v;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let ga = self.gamma(a);
        let gb = self.gamma(b);
        ga / (ga + gb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        let xs: Vec<u64> = (0..32).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..32).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 8);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn consuming_one_stream_leaves_another_untouched() {
        let mut lone = RngStream::new(3, 11);
        let expected: Vec<u64> = (0..8).map(|_| lone.next_u64()).collect();

        let mut other = RngStream::new(3, 12);
        for _ in 0..1000 {
            other.next_u64();
        }
        let mut again = RngStream::new(3, 11);
        let got: Vec<u64> = (0..8).map(|_| again.next_u64()).collect();
        assert_eq!(expected, got);
    }

    #[test]
    fn substreams_keep_validation_half() {
        let v = RngStream::new(1, ids::VALIDATION);
        for i in 0..64 {
            assert!(v.substream(i).stream_id() & ids::VALIDATION != 0);
        }
        let s = RngStream::new(1, ids::SCENARIOS);
        for i in 0..64 {
            assert_eq!(s.substream(i).stream_id() & ids::VALIDATION, 0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = RngStream::new(9, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.015, "{var}");
    }

    #[test]
    fn gamma_mean_matches_shape() {
        let mut r = RngStream::new(5, 0);
        for &shape in &[0.5, 2.0, 5.0] {
            let n = 100_000;
            let mean = (0..n).map(|_| r.gamma(shape)).sum::<f64>() / n as f64;
            // sd of the mean is sqrt(shape / n)
            assert!((mean - shape).abs() < 4.0 * (shape / n as f64).sqrt(), "{shape}: {mean}");
        }
    }

    #[test]
    fn index_is_in_range() {
        let mut r = RngStream::new(1, 1);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[r.index(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
