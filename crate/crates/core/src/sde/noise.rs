use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Counter-based source of Brownian increments.
///
/// Increment `k` of path `p` is a pure function of `(seed, p, k)`: the
/// ChaCha key is derived from the seed, the path index selects the stream
/// and the step index fixes the block counter. Each pair of standard
/// normals consumes exactly two 64-bit words (Box–Muller), so the word
/// position of a step does not depend on earlier draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn words_per_step(dimension: usize) -> u128 {
        // two u64 (four u32 words) per normal pair
        4 * dimension.div_ceil(2) as u128
    }

    fn rng_at(&self, path_index: u64, step: usize, dimension: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path_index);
        rng.set_word_pos(step as u128 * Self::words_per_step(dimension));
        rng
    }

    /// Brownian increments for `steps` steps of size `1/step_count`.
    pub fn path(&self, path_index: u64, step_count: u64, steps: usize, dimension: usize) -> NoisePath {
        let mut rng = self.rng_at(path_index, 0, dimension);
        let scale = (1.0 / step_count as f64).sqrt();
        let mut increments = vec![0.0; steps * dimension];
        for chunk in increments.chunks_exact_mut(dimension) {
            fill_normals(&mut rng, chunk, scale);
        }
        NoisePath { increments, dimension, step_count, seed: self.seed, path_index }
    }

    /// The single increment at `step`, generated without the preceding ones.
    pub fn increment(&self, path_index: u64, step_count: u64, step: usize, dimension: usize) -> Vec<f64> {
        let mut rng = self.rng_at(path_index, step, dimension);
        let mut out = vec![0.0; dimension];
        fill_normals(&mut rng, &mut out, (1.0 / step_count as f64).sqrt());
        out
    }
}

fn unit_open_closed(word: u64) -> f64 {
    // (0, 1]
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn fill_normals(rng: &mut ChaCha8Rng, out: &mut [f64], scale: f64) {
    let mut chunks = out.chunks_mut(2);
    for pair in &mut chunks {
        let u1 = unit_open_closed(rng.next_u64());
        let u2 = unit_open_closed(rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt() * scale;
        let (s, c) = (TAU * u2).sin_cos();
        pair[0] = r * c;
        if pair.len() > 1 {
            pair[1] = r * s;
        }
    }
}

/// Brownian increments `ΔW_k` of one path on a grid of spacing `1/step_count`,
/// stored row-major (`steps × dimension`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    increments: Vec<f64>,
    dimension: usize,
    step_count: u64,
    seed: u64,
    path_index: u64,
}

impl NoisePath {
    /// Wraps explicitly given increments (already scaled to the grid).
    pub fn from_increments(increments: Vec<Vec<f64>>, step_count: u64, seed: u64) -> Result<Self> {
        let dimension = increments.first().map_or(0, Vec::len);
        if dimension == 0 {
            return Err(Error::usage("noise path needs at least one non-empty increment"));
        }
        if increments.iter().any(|inc| inc.len() != dimension) {
            return Err(Error::usage("all noise increments must share one dimension"));
        }
        if step_count == 0 {
            return Err(Error::usage("step count must be positive"));
        }
        Ok(NoisePath { increments: increments.concat(), dimension, step_count, seed, path_index: 0 })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// Number of increments held.
    pub fn len(&self) -> usize {
        self.increments.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dimension..(step + 1) * self.dimension]
    }

    pub fn increments(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.dimension)
    }

    /// `W` at the end of the held increments.
    pub fn terminal_value(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dimension];
        for inc in self.increments() {
            for (t, v) in total.iter_mut().zip(inc) {
                *t += v;
            }
        }
        total
    }

    /// Block sums of `factor` consecutive increments. See [`coarsen_noise`].
    pub fn coarsen(&self, factor: u64) -> Result<NoisePath> {
        coarsen_noise(self, factor)
    }
}

/// Increments of the same Brownian path on a grid `factor` times coarser.
pub fn coarsen_noise(fine: &NoisePath, factor: u64) -> Result<NoisePath> {
    if factor == 0 {
        return Err(Error::usage("coarsening factor must be positive"));
    }
    let f = factor as usize;
    if fine.step_count % factor != 0 || fine.len() % f != 0 {
        return Err(Error::usage(format!(
            "coarsening factor {factor} does not divide step count {} with {} increments",
            fine.step_count,
            fine.len()
        )));
    }
    let d = fine.dimension;
    let mut increments = vec![0.0; fine.len() / f * d];
    for (coarse, block) in increments.chunks_exact_mut(d).zip(fine.increments.chunks_exact(f * d)) {
        for inc in block.chunks_exact(d) {
            for (c, v) in coarse.iter_mut().zip(inc) {
                *c += v;
            }
        }
    }
    Ok(NoisePath {
        increments,
        dimension: d,
        step_count: fine.step_count / factor,
        seed: fine.seed,
        path_index: fine.path_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_coarsening() {
        let fine = NoiseSource::new(3).path(0, 64, 64, 2);
        assert_eq!(coarsen_noise(&fine, 1).unwrap(), fine);
    }

    #[test]
    fn block_sum() {
        let fine = NoisePath::from_increments(vec![vec![0.1], vec![0.2]], 2, 0).unwrap();
        let coarse = coarsen_noise(&fine, 2).unwrap();
        assert_eq!(coarse.len(), 1);
        assert_eq!(coarse.increment(0), &[0.1 + 0.2]);
        assert_eq!(coarse.step_count(), 1);
    }

    #[test]
    fn non_dividing_factor_rejected() {
        let fine = NoiseSource::new(1).path(0, 12, 12, 1);
        assert!(matches!(coarsen_noise(&fine, 5), Err(Error::Usage(_))));
        assert!(matches!(coarsen_noise(&fine, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn random_access_matches_sequential() {
        let src = NoiseSource::new(99);
        for d in [1, 3, 4] {
            let path = src.path(7, 128, 50, d);
            for k in [0, 1, 17, 49] {
                assert_eq!(path.increment(k), src.increment(7, 128, k, d).as_slice());
            }
        }
    }

    #[test]
    fn paths_and_seeds_are_independent_streams() {
        let a = NoiseSource::new(5).path(0, 16, 16, 1);
        let b = NoiseSource::new(5).path(1, 16, 16, 1);
        let c = NoiseSource::new(6).path(0, 16, 16, 1);
        assert_ne!(a, b);
        assert_ne!(a.increment(0), c.increment(0));
    }

    #[test]
    fn increments_have_brownian_moments() {
        let n = 256u64;
        let path = NoiseSource::new(2024).path(0, n, 200_000, 1);
        let m = path.len() as f64;
        let mean = path.increments().map(|v| v[0]).sum::<f64>() / m;
        let var = path.increments().map(|v| (v[0] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let dt = 1.0 / n as f64;
        // sd(mean) = sqrt(dt / m), sd(var) ≈ dt sqrt(2 / m)
        assert!(mean.abs() < 5.0 * (dt / m).sqrt(), "mean {mean}");
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / m).sqrt(), "var {var}");
        let kurt = path.increments().map(|v| (v[0] - mean).powi(4)).sum::<f64>() / m / (var * var);
        assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
    }

    proptest! {
        #[test]
        fn coarsening_preserves_the_terminal_brownian_value(seed in any::<u64>(), log_factor in 0u32..5, d in 1usize..4) {
            let factor = 1u64 << log_factor;
            let fine = NoiseSource::new(seed).path(0, 64, 64, d);
            let coarse = coarsen_noise(&fine, factor).unwrap();
            prop_assert_eq!(coarse.len() as u64, 64 / factor);
            let wf = fine.terminal_value();
            let wc = coarse.terminal_value();
            for (a, b) in wf.iter().zip(&wc) {
                prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()) * 64.0);
            }
        }
    }
}
