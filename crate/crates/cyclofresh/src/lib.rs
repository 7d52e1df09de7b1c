pub mod config;
pub mod formats;
pub mod scenario;

pub use cyclofresh_core as core;
