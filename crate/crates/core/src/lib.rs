//! Nonuniform wavelet frames on local fields of positive characteristic `F_q((p))`.
//!
//! Functions are represented exactly on finite frequency grids, so every lattice sum,
//! extension-principle identity and frame bound is computed without truncation error beyond
//! floating point.

pub mod error;
pub mod extension;
pub mod frames;
pub mod funcspace;
pub mod gf;
pub mod localfield;
pub mod sampling;
pub mod verify;

pub use error::{Result, UmfError};
pub use extension::{builtin, oep_check, oep_normalize, synthesize, uep_check, validate_setup, OepWeight, Setup, SetupRepr};
pub use frames::{frame_bounds, lambda_enumerate, level_energy, level_energy_closed, total_energy, FrameBounds, LatticeParams, WaveletSystem};
pub use funcspace::{transform_fast, transform_naive, FreqFn, GridFn, GridFnRepr, GridSpec, TimeFn};
pub use gf::{FieldParams, FqElem, GaloisField};
pub use localfield::{chi, chi_pair, embed_n, sigma, KElem, UnitComplex};
pub use verify::{verify, FrameReport, VerifyConfig};
