//! Configuration, pipeline orchestration and report emission.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{RunConfig, SpeedSetting};
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use report::{Report, Stage, StageStatus, Timings};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KSPULSE_OUT";

/// Bundled example configuration (canonical tanh-quadratic pulse).
pub const EXAMPLE_CONFIG: &str = include_str!("example.toml");
