//! Seeded random test functions.
//!
//! Seeds are expanded with SplitMix64 so that trial `t` of a run depends only on the run seed
//! and `t`, never on thread scheduling. Cell values are independent standard complex Gaussians
//! and the result is scaled to unit norm.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::error::{Result, UmfError};
use crate::funcspace::{FreqFn, GridSpec};
use crate::gf::GaloisField;

/// The first `count` outputs of SplitMix64 seeded with `seed`.
pub fn trial_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Unit-norm function on `grid`, Gaussian on `cells` and zero elsewhere.
pub fn gaussian_test_function(field: &GaloisField, grid: GridSpec, cells: &[usize], seed: u64) -> Result<FreqFn> {
    if cells.is_empty() {
        return Err(UmfError::Validation("test function support is empty".into()));
    }
    let mut f = FreqFn::zeros(field, grid)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let dim = f.dim();
    let values = f.values_mut();
    for &c in cells {
        if c >= dim {
            return Err(UmfError::Range { value: c as u64, bound: dim as u64 });
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        values[c] = Complex64::new(re, im);
    }
    let norm = f.norm_sq().sqrt();
    Ok(f.scale(Complex64::new(1.0 / norm, 0.0)))
}
