//! Config parsing, experiment dispatch and deterministic output files.

mod config;
mod format;
mod run;

pub use config::{
    apply_override, load_config, read_config_value, zoo_family, ExperimentConfig, ExperimentKind, ModelSource, CONFIG_KEYS,
    MANIFEST_CONFIG_KEY,
};
pub use format::{fmt_f64, to_json};
pub use run::{curve_csv, run, validate, RunOptions, RunOutcome, RunStatus, ValidationReport};
