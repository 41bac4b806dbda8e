use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::particles::{min_gap, MIN_GAP};

/// Deterministic source of test points: point `i` is a pure function of the
/// sampler's seed and `i`, so sweeps can be evaluated in any order.
pub trait Sampler: Sync {
    fn dimension(&self) -> usize;

    fn point(&self, index: u64) -> Vec<f64>;

    fn pair(&self, index: u64) -> (Vec<f64>, Vec<f64>);

    /// Length scale on which the coefficients vary near `x`; finite
    /// difference steps are taken relative to it.
    fn local_scale(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

fn stream(seed: u64, index: u64, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return u.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Stratified ordered configurations of `N` particles.
///
/// Every `strata + 1` consecutive indices cycle through a bulk stratum
/// (sorted uniform points in `[−N, N]`) and `strata` near-boundary strata
/// whose minimum gap is pinned at log-spaced levels from `min_level` to 1.
/// All configurations keep `l(x) ≥ min_level`.
#[derive(Debug, Clone)]
pub struct OrderedConfigSampler {
    particles: usize,
    seed: u64,
    strata: u64,
    min_level: f64,
    /// Perturbed pairs use separations `δ·l(x)` with
    /// `log10 δ ~ U(log10 min_separation, log10 0.4)`.
    min_separation: f64,
}

impl OrderedConfigSampler {
    pub fn new(particles: usize, seed: u64) -> Self {
        OrderedConfigSampler { particles, seed, strata: 7, min_level: 1e-3, min_separation: 1e-4 }
    }

    pub fn with_min_level(mut self, min_level: f64) -> Self {
        self.min_level = min_level;
        self
    }

    pub fn with_strata(mut self, strata: u64) -> Self {
        self.strata = strata.max(1);
        self
    }

    pub fn with_min_separation(mut self, min_separation: f64) -> Self {
        self.min_separation = min_separation;
        self
    }

    /// Minimum-gap level of near-boundary stratum `k` in `1..=strata`.
    fn level(&self, k: u64) -> f64 {
        if self.strata == 1 {
            return self.min_level;
        }
        let t = (k - 1) as f64 / (self.strata - 1) as f64;
        self.min_level.powf(1.0 - t)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, index: u64) -> Vec<f64> {
        let n = self.particles;
        let stratum = index % (self.strata + 1);
        if stratum == 0 {
            let half = n as f64;
            loop {
                let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-half..half)).collect();
                x.sort_by(f64::total_cmp);
                if x.windows(2).all(|w| w[1] - w[0] >= self.min_level) {
                    return x;
                }
            }
        }
        let level = self.level(stratum);
        let pinned = rng.random_range(0..n - 1);
        let mut gaps: Vec<f64> = (0..n - 1)
            .map(|_| {
                let e: f64 = -rng.random::<f64>().max(1e-300).ln();
                level + 0.5 * e
            })
            .collect();
        gaps[pinned] = level;
        let total: f64 = gaps.iter().sum();
        let mut x = Vec::with_capacity(n);
        let mut pos = rng.random_range(-1.0..1.0) - total / 2.0;
        x.push(pos);
        for g in gaps {
            pos += g;
            x.push(pos);
        }
        x
    }
}

impl Sampler for OrderedConfigSampler {
    fn dimension(&self) -> usize {
        self.particles
    }

    fn point(&self, index: u64) -> Vec<f64> {
        let mut rng = stream(self.seed, index, 1);
        self.draw(&mut rng, index)
    }

    fn pair(&self, index: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(self.seed, index, 2);
        let x = self.draw(&mut rng, index);
        if rng.random_bool(0.5) {
            let y = self.draw(&mut rng, index / 2 + 1);
            return (x, y);
        }
        let l = min_gap(&x).map(|g| g.min_gap).unwrap_or(1.0);
        let lo = self.min_separation.log10();
        let hi = 0.4f64.log10();
        let delta = 10f64.powf(rng.random_range(lo..hi)) * l;
        let u = random_direction(&mut rng, self.particles);
        // each gap moves by at most 2δ < l, so y stays ordered
        let y: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + delta * ui).collect();
        debug_assert!(y.windows(2).all(|w| w[1] - w[0] > MIN_GAP));
        (x, y)
    }

    fn local_scale(&self, x: &[f64]) -> f64 {
        min_gap(x).map(|g| g.min_gap).unwrap_or(1.0)
    }
}

/// Uniform points in the box `[−half_width, half_width]^d`; pairs are either
/// independent or a perturbation at a log-uniform distance.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    dimension: usize,
    half_width: f64,
    seed: u64,
}

impl BoxSampler {
    pub fn new(dimension: usize, half_width: f64, seed: u64) -> Self {
        BoxSampler { dimension, half_width, seed }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dimension).map(|_| rng.random_range(-self.half_width..=self.half_width)).collect()
    }
}

impl Sampler for BoxSampler {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn point(&self, index: u64) -> Vec<f64> {
        self.draw(&mut stream(self.seed, index, 3))
    }

    fn pair(&self, index: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(self.seed, index, 4);
        let x = self.draw(&mut rng);
        if rng.random_bool(0.5) {
            let y = self.draw(&mut rng);
            return (x, y);
        }
        let delta = 10f64.powf(rng.random_range(-4.0..0.0));
        let u = random_direction(&mut rng, self.dimension);
        let y = x.iter().zip(&u).map(|(xi, ui)| xi + delta * ui).collect();
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configurations_respect_the_minimum_level() {
        for n in [2, 3, 5, 8] {
            let s = OrderedConfigSampler::new(n, 17);
            let mut smallest = f64::INFINITY;
            for i in 0..2000 {
                let x = s.point(i);
                let g = min_gap(&x).unwrap();
                assert!(g.raw_min >= 1e-3 * (1.0 - 1e-12), "{x:?}");
                smallest = smallest.min(g.raw_min);
                let (a, b) = s.pair(i);
                assert!(min_gap(&a).unwrap().in_domain && min_gap(&b).unwrap().in_domain);
                assert_ne!(a, b);
            }
            // the lowest stratum is actually visited
            assert!(smallest < 1.01e-3);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = OrderedConfigSampler::new(4, 3);
        assert_eq!(s.point(12), s.point(12));
        assert_eq!(s.pair(5), s.pair(5));
        assert_ne!(s.point(12), OrderedConfigSampler::new(4, 4).point(12));
        let b = BoxSampler::new(2, 3.0, 9);
        assert_eq!(b.pair(1), b.pair(1));
        assert!(b.point(0).iter().all(|v| v.abs() <= 3.0));
    }
}
