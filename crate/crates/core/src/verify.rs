//! Seeded verification runs over a setup, aggregated into a [`FrameReport`].
//!
//! Trials run in parallel; per-trial results are collected in trial order and reduced
//! sequentially, so a report depends only on the setup, the configuration and the seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmfError};
use crate::extension::{synthesize, uep_check, Setup};
use crate::frames::{
    covered_cells, covered_grid, frame_bounds_capped, level_comparable, level_energies, level_energy, level_energy_closed, telescoping_residual, WaveletSystem,
    FRAME_DIM_CAP,
};
use crate::funcspace::{FreqFn, GridSpec};
use crate::sampling::{gaussian_test_function, trial_seeds};

pub const REPORT_SCHEMA: u32 = 1;

/// Extra levels below the range at which low-pass energies are reported.
const DECAY_MARGIN: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub j_range: Option<(i32, i32)>,
    pub tol: f64,
    pub strict_uep: bool,
    pub dim_cap: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { trials: 100, seed: 0, j_range: None, tol: 1e-9, strict_uep: false, dim_cap: FRAME_DIM_CAP, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSummary {
    pub q: u32,
    pub nu: u32,
    pub r: u64,
    pub j_range: (i32, i32),
    pub grid: GridSpec,
    pub test_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UepSummary {
    pub pass: bool,
    pub max_residual: f64,
    pub strict: bool,
}

/// Lattice sum against the closed-form integral, per generator and level, over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyComparison {
    /// Cosets of the integer set in the translation set; without aliasing the lattice sum is
    /// this multiple of the integral.
    pub cosets: usize,
    pub comparable: usize,
    pub aliased: usize,
    /// Largest `|lattice sum - cosets * integral|` over comparable pairs.
    pub max_abs_residual: f64,
    /// Extremes of `lattice sum / integral` over all pairs with a nonzero integral.
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameReport {
    pub schema: u32,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Largest `|total_energy(f) / ||f||^2 - 1|` over the trials.
    pub parseval_residual: f64,
    /// `[j, largest |telescoping residual|]`
    pub telescoping_residuals: Vec<(i32, f64)>,
    /// `[j, mean wavelet energy at level j]`
    pub levels: Vec<(i32, f64)>,
    pub setup: SetupSummary,
    pub trials: usize,
    pub seed: u64,
    pub bounds_residual: f64,
    /// Largest `sum_lambda |<f, T_lambda psi_0>|^2 / ||f||^2`.
    pub bessel_max_ratio: Option<f64>,
    /// `[j, mean low-pass energy]` for decreasing `j`.
    pub low_pass_decay: Vec<(i32, f64)>,
    pub energy_comparison: EnergyComparison,
    pub uep: UepSummary,
}

impl FrameReport {
    /// True when the translation set is uniform and the trials certify Parseval.
    pub fn parseval_failure(&self, tol: f64) -> bool {
        self.setup.nu == 0 && self.parseval_residual > tol
    }
}

struct Trial {
    parseval: f64,
    levels: Vec<(i32, f64)>,
    telescoping: Vec<(i32, f64)>,
    bessel: f64,
    decay: Vec<(i32, f64)>,
    comparisons: Vec<(bool, f64, f64)>,
}

fn run_trial(f: &FreqFn, sys: &WaveletSystem) -> Result<Trial> {
    let norm = f.norm_sq();
    let levels = level_energies(f, sys)?;
    let total: f64 = levels.iter().map(|(_, e)| e).sum();
    let telescoping = sys.levels().map(|j| Ok((j, telescoping_residual(f, sys, j)?.abs()))).collect::<Result<_>>()?;
    let bessel = level_energy(f, &sys.psi0_hat, 0, &sys.lat)? / norm;
    let decay = (sys.j_range.0 - DECAY_MARGIN..=sys.j_range.1).rev().map(|j| Ok((j, level_energy(f, &sys.psi0_hat, j, &sys.lat)?))).collect::<Result<_>>()?;
    let mut comparisons = Vec::new();
    for psi in [&sys.psi0_hat].into_iter().chain(&sys.psi_hat) {
        for j in sys.levels() {
            comparisons.push((level_comparable(f, psi, j, &sys.lat)?, level_energy(f, psi, j, &sys.lat)?, level_energy_closed(f, psi, j, &sys.lat)?));
        }
    }
    Ok(Trial { parseval: (total / norm - 1.0).abs(), levels, telescoping, bessel, decay, comparisons })
}

fn mean_series(trials: &[Trial], pick: impl Fn(&Trial) -> &Vec<(i32, f64)>) -> Vec<(i32, f64)> {
    let Some(first) = trials.first() else { return vec![] };
    let n = trials.len() as f64;
    (0..pick(first).len()).map(|k| (pick(first)[k].0, trials.iter().map(|t| pick(t)[k].1).sum::<f64>() / n)).collect()
}

fn max_series(trials: &[Trial], pick: impl Fn(&Trial) -> &Vec<(i32, f64)>) -> Vec<(i32, f64)> {
    let Some(first) = trials.first() else { return vec![] };
    (0..pick(first).len()).map(|k| (pick(first)[k].0, trials.iter().map(|t| pick(t)[k].1).fold(0.0, f64::max))).collect()
}

/// Synthesizes the system, computes exact frame bounds on the covered test grid, and runs the
/// energy sub-checks on `trials` seeded unit-norm test functions.
pub fn verify(setup: &Setup, cfg: &VerifyConfig) -> Result<FrameReport> {
    if !(cfg.tol > 0.0) {
        return Err(UmfError::Validation("tolerance must be positive".into()));
    }
    match cfg.threads {
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| UmfError::Parameter(e.to_string()))?.install(|| verify_inner(setup, cfg))
        }
        None => verify_inner(setup, cfg),
    }
}

fn verify_inner(setup: &Setup, cfg: &VerifyConfig) -> Result<FrameReport> {
    let uep = uep_check(setup, cfg.strict_uep)?;
    let sys = synthesize(setup, cfg.j_range)?;
    let grid = covered_grid(&sys)?.ok_or_else(|| UmfError::Validation("no test function is seen by any level".into()))?;
    let cells = covered_cells(&sys, grid)?;
    let bounds = frame_bounds_capped(&sys, grid, cfg.dim_cap)?;

    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let trials: Vec<Trial> = seeds.par_iter().map(|&s| run_trial(&gaussian_test_function(setup.field(), grid, &cells, s)?, &sys)).collect::<Result<_>>()?;

    let cosets = sys.lat.cosets();
    let mut cmp = EnergyComparison { cosets, comparable: 0, aliased: 0, max_abs_residual: 0.0, ratio_min: None, ratio_max: None };
    for &(ok, lam, closed) in trials.iter().flat_map(|t| &t.comparisons) {
        if ok {
            cmp.comparable += 1;
            cmp.max_abs_residual = cmp.max_abs_residual.max((lam - cosets as f64 * closed).abs());
        } else {
            cmp.aliased += 1;
        }
        if closed > 0.0 {
            let r = lam / closed;
            cmp.ratio_min = Some(cmp.ratio_min.map_or(r, |m| m.min(r)));
            cmp.ratio_max = Some(cmp.ratio_max.map_or(r, |m| m.max(r)));
        }
    }

    Ok(FrameReport {
        schema: REPORT_SCHEMA,
        a: bounds.a,
        b: bounds.b,
        parseval_residual: trials.iter().map(|t| t.parseval).fold(0.0, f64::max),
        telescoping_residuals: max_series(&trials, |t| &t.telescoping),
        levels: mean_series(&trials, |t| &t.levels),
        setup: SetupSummary { q: setup.field().q(), nu: sys.lat.nu(), r: sys.lat.r(), j_range: sys.j_range, grid, test_dim: cells.len() },
        trials: cfg.trials,
        seed: cfg.seed,
        bounds_residual: bounds.residual,
        bessel_max_ratio: trials.iter().map(|t| t.bessel).reduce(f64::max),
        low_pass_decay: mean_series(&trials, |t| &t.decay),
        energy_comparison: cmp,
        uep: UepSummary { pass: uep.pass, max_residual: uep.max_residual, strict: cfg.strict_uep },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::builtin;
    use crate::gf::FieldParams;

    fn cfg(trials: usize, seed: u64) -> VerifyConfig {
        VerifyConfig { trials, seed, ..VerifyConfig::default() }
    }

    #[test]
    fn uniform_shannon_report() {
        let s = builtin("shannon", &FieldParams::prime(2), 0, 1).unwrap();
        let rep = verify(&s, &cfg(20, 3)).unwrap();
        assert!(rep.parseval_residual <= 1e-9);
        assert!((rep.a - 1.0).abs() <= 1e-9 && (rep.b - 1.0).abs() <= 1e-9);
        assert!(rep.telescoping_residuals.iter().all(|&(_, r)| r <= 1e-10));
        assert_eq!(rep.energy_comparison.aliased, 0);
        assert!(rep.energy_comparison.max_abs_residual <= 1e-10);
        assert!(rep.bessel_max_ratio.unwrap() <= 1.0 + 1e-12);
        assert!(!rep.parseval_failure(1e-9));
        assert!(rep.uep.pass);
    }

    #[test]
    fn reports_are_deterministic() {
        let s = builtin("shannon", &FieldParams::prime(2), 1, 3).unwrap();
        let a = serde_json::to_string(&verify(&s, &cfg(6, 11)).unwrap()).unwrap();
        let one_thread = VerifyConfig { threads: Some(1), ..cfg(6, 11) };
        let b = serde_json::to_string(&verify(&s, &one_thread).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&verify(&s, &cfg(6, 12)).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_trials_give_empty_sections() {
        let s = builtin("shannon", &FieldParams::prime(2), 0, 1).unwrap();
        let rep = verify(&s, &cfg(0, 1)).unwrap();
        assert!(rep.levels.is_empty() && rep.telescoping_residuals.is_empty() && rep.low_pass_decay.is_empty());
        assert_eq!(rep.parseval_residual, 0.0);
        assert_eq!(rep.bessel_max_ratio, None);
        let text = serde_json::to_string(&rep).unwrap();
        let back: FrameReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["surprise"] = serde_json::json!(0);
        assert!(serde_json::from_value::<FrameReport>(v).is_err());
    }

    #[test]
    fn tolerance_must_be_positive() {
        let s = builtin("shannon", &FieldParams::prime(2), 0, 1).unwrap();
        assert!(verify(&s, &VerifyConfig { tol: 0.0, ..cfg(1, 1) }).is_err());
    }
}
