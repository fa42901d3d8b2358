//! Monte Carlo ray-tracing model of the maximum achievable polarization
//! entanglement fidelity of a crossed-crystal type-I SPDC source.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod entanglement;
pub mod error;
pub mod harness;
pub mod raytrace;
pub mod spdc;

pub use error::{Error, Result};

pub mod consts {
    /// Speed of light in um/fs (numerically equal to nm/fs * 1e-3).
    pub const SPEED_OF_LIGHT_UM_PER_FS: f64 = 0.299_792_458;
    /// Speed of light in mm/fs.
    pub const SPEED_OF_LIGHT_MM_PER_FS: f64 = 2.997_924_58e-4;
}
