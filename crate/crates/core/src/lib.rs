//! Evaluation of 2D free-space wave fields radiated by point sources.
//!
//! The field is split into a time-local part handled by singular quadrature,
//! a near history evolved on a Fourier lattice, and a far history compressed
//! with a sum of exponentials.

pub mod blending;
pub mod driver;
pub mod error;
pub mod farhist;
pub mod local;
pub mod nearhist;
pub mod numerics;
pub mod nudft;
pub mod oracle;
pub mod params;
pub mod soe;
pub mod sources;

pub use error::{Error, Result};
pub use num_complex::Complex64;
