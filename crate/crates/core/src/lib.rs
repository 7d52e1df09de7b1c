//! Cyclostationary (FRESH) filtering for OFDM over powerline noise.
//!
//! The crate is `no_std` with `alloc`. It holds the signal models, the
//! closed-form filter design, filter application, adaptive tracking and the
//! coding chain. File formats, scenario orchestration and the command line
//! live in the `cyclofresh` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adaptive;
pub mod channel;
pub mod cyclic;
pub mod design;
mod error;
pub mod fec;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod ofdm;
pub mod rls;
pub mod runtime;
pub mod scaling;
pub mod signal;

pub use cyclic::{Averaging, CyclicSpectrum};
pub use error::{Error, Result};
pub use num_complex::Complex64;
