//! Coupled two-ring frequency converter: analytic coupled-mode response,
//! transfer-matrix spectra, cascaded conversion, pair purity, pulse shaping
//! and parameter fitting.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmm;
pub mod cascade;
pub mod data;
pub mod error;
pub mod fdm;
pub mod fit;
pub mod io;
pub mod jsa;
pub mod numerics;
pub mod params;
pub mod presets;
pub mod shaping;
pub mod units;

pub use data::{IdlerSpectrum, MeasuredMap};
pub use error::{Error, Result};
pub use params::{CmmParams, FdmGeometry, HeaterModel, MziConfig, PumpConfig};
