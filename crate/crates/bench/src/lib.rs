//! Shared fixtures for the benchmarks.

use umf_core::sampling::gaussian_test_function;
use umf_core::{GaloisField, GridSpec, TimeFn};

/// Seeded unit-norm function on a balanced grid of `q^digits` cells.
pub fn time_fn(field: &GaloisField, digits: i32, seed: u64) -> TimeFn {
    let grid = GridSpec::new(digits / 2, digits - digits / 2).expect("grid");
    let dim = grid.dim(field.q()).expect("dim");
    let cells: Vec<usize> = (0..dim).collect();
    let f = gaussian_test_function(field, grid, &cells, seed).expect("sample");
    TimeFn::from_values(field, grid, f.into_values()).expect("values")
}
