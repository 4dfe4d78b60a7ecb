//! Counter-based seeding and Brownian increments.
//!
//! Every random stream is keyed by a tuple such as `(seed, path)` or
//! `(seed, path, step)` for nested simulations, so a path's draws never
//! depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a key tuple into a single 64-bit seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C909, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for the stream identified by `keys`.
pub fn stream(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(keys))
}

/// Brownian increments on a uniform time grid, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    dt: f64,
    n_factors: usize,
    data: Vec<f64>,
}

impl Increments {
    pub fn from_raw(dt: f64, n_factors: usize, data: Vec<f64>) -> Self {
        assert!(n_factors > 0 && data.len() % n_factors == 0);
        Self { dt, n_factors, data }
    }

    pub fn zeros(dt: f64, steps: usize, n_factors: usize) -> Self {
        Self::from_raw(dt, n_factors, vec![0.0; steps * n_factors])
    }

    /// Samples `steps` increments of length `dt`.
    ///
    /// Each increment is the sum of `substeps` independent draws on the
    /// finer grid `dt / substeps`; the fine draws depend only on
    /// `(keys, steps * substeps)`, so runs at `(steps, 2)` and `(2 * steps, 1)`
    /// share their Brownian path.
    pub fn sample(keys: &[u64], steps: usize, n_factors: usize, dt: f64, substeps: usize) -> Self {
        assert!(substeps > 0);
        let mut rng = stream(keys);
        let fine_sd = (dt / substeps as f64).sqrt();
        let mut data = vec![0.0; steps * n_factors];
        for step in 0..steps {
            let row = &mut data[step * n_factors..(step + 1) * n_factors];
            for _ in 0..substeps {
                for dw in row.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *dw += fine_sd * z;
                }
            }
        }
        Self { dt, n_factors, data }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.n_factors
    }

    pub fn step(&self, l: usize) -> &[f64] {
        &self.data[l * self.n_factors..(l + 1) * self.n_factors]
    }

    pub fn step_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.n_factors..(l + 1) * self.n_factors]
    }

    /// Brownian value `W_{t_l}` of one factor.
    pub fn brownian(&self, l: usize, factor: usize) -> f64 {
        (0..l).map(|m| self.step(m)[factor]).sum()
    }

    /// Sums groups of `k` consecutive increments.
    pub fn coarsen(&self, k: usize) -> Self {
        assert!(k > 0 && self.steps() % k == 0);
        let steps = self.steps() / k;
        let mut data = vec![0.0; steps * self.n_factors];
        for l in 0..self.steps() {
            let target = l / k;
            for (j, dw) in self.step(l).iter().enumerate() {
                data[target * self.n_factors + j] += dw;
            }
        }
        Self { dt: self.dt * k as f64, n_factors: self.n_factors, data }
    }

    /// The first `l` steps.
    pub fn prefix(&self, l: usize) -> Self {
        Self { dt: self.dt, n_factors: self.n_factors, data: self.data[..l * self.n_factors].to_vec() }
    }

    /// Keeps the first `l` steps and appends `tail`.
    pub fn splice(&self, l: usize, tail: &Increments) -> Self {
        assert_eq!(self.n_factors, tail.n_factors);
        let mut data = self.data[..l * self.n_factors].to_vec();
        data.extend_from_slice(&tail.data);
        Self { dt: self.dt, n_factors: self.n_factors, data }
    }
}
