//! Experiment orchestration: configuration, optimum and power-law fits,
//! the pipelines behind each CLI subcommand, and their output files.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;

pub use config::RunConfig;
pub use experiments::*;
pub use fit::{extract_optimum, extract_optimum_points, fit_power_law, fit_sinusoid, Optimum, PowerLaw, SinusoidFit};
