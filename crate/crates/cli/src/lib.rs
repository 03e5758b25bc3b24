//! Experiment harness for the `lsimab` simulator: named presets, flat
//! configuration files, replicated runs with CSV summaries, and SVG plots.

pub mod config;
pub mod error;
pub mod harness;
pub mod plot;
pub mod preset;

pub use config::Overrides;
pub use error::{HarnessError, Result};
pub use harness::{run_preset, run_preset_with, PointSummary, RepSummary};
pub use plot::render_plot;
pub use preset::{ExperimentPreset, GridPoint, Setting};
