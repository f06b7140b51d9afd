//! Brute-force oracles built only from field arithmetic and the character.

use num_complex::Complex64;

use umf_core::extension::{builtin, synthesize};
use umf_core::frames::{analysis_coeff, covered_cells, covered_grid, lambda_enumerate, FrameOperator};
use umf_core::sampling::gaussian_test_function;
use umf_core::{chi_pair, total_energy, FieldParams, FreqFn, GaloisField, GridSpec, TimeFn};

fn sample_time(field: &GaloisField, grid: GridSpec, seed: u64) -> TimeFn {
    let cells: Vec<usize> = (0..grid.dim(field.q()).unwrap()).collect();
    let v = gaussian_test_function(field, grid, &cells, seed).unwrap().into_values();
    TimeFn::from_values(field, grid, v).unwrap()
}

#[test]
fn transform_matches_character_sum() {
    for params in [FieldParams::prime(2), FieldParams::prime(3), FieldParams::default_for(2, 2).unwrap()] {
        let field = GaloisField::new(params).unwrap();
        for (s, m) in [(0, 2), (1, 1), (2, 1), (1, 2)] {
            let grid = GridSpec::new(s, m).unwrap();
            let f = sample_time(&field, grid, (s * 7 + m) as u64);
            let fh = umf_core::transform_fast(&f).unwrap();
            let w = grid.cell_weight(field.q());
            for o in 0..fh.dim() {
                let xi = fh.cell_elem(o);
                let direct: Complex64 = (0..f.dim()).map(|i| f.values()[i] * chi_pair(&xi, &f.cell_elem(i)).unwrap().conj().value() * w).sum();
                assert!((direct - fh.values()[o]).norm() < 1e-12, "q={} grid=({s},{m}) cell {o}", field.q());
            }
        }
    }
}

#[test]
fn frame_operator_matches_coefficient_sums() {
    // the quadratic form of the assembled operator equals the sum of |<f, psi_{j,lambda}>|^2
    for nu in [0, 1] {
        let setup = builtin("shannon", &FieldParams::prime(2), nu, 1).unwrap();
        let sys = synthesize(&setup, Some((-1, 1))).unwrap();
        let grid = covered_grid(&sys).unwrap().unwrap();
        let cells = covered_cells(&sys, grid).unwrap();
        let op = FrameOperator::assemble(&sys, grid, &cells).unwrap();
        for seed in 0..3 {
            let x: FreqFn = gaussian_test_function(setup.field(), grid, &cells, seed).unwrap();
            let mut brute = 0.0;
            for psi in &sys.psi_hat {
                for j in sys.levels() {
                    let m = 2 + sys.lat.dilation_exp() * (j + 1) + grid.s;
                    for lam in lambda_enumerate(&sys.lat, m).unwrap() {
                        brute += analysis_coeff(&x, psi, j, &lam, &sys.lat).unwrap().norm_sqr();
                    }
                }
            }
            let form = op.quadratic_form(&x).unwrap();
            let total = total_energy(&x, &sys).unwrap();
            assert!((brute - total).abs() < 1e-10, "nu={nu}: {brute} vs {total}");
            assert!((form - total).abs() < 1e-10, "nu={nu}: {form} vs {total}");
        }
    }
}
