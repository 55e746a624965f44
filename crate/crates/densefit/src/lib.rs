//! File formats, the synthetic experiment harness and report writers for `densefit-core`.

pub mod io;
pub mod report;
pub mod scene;
pub mod suite;

pub use densefit_core;

pub use io::{load_model, read_iuv, save_model, write_iuv, IoError, ModelFile};
pub use report::{emit_report, load_report, Report};
pub use scene::{generate_scene, SceneConfig, SyntheticScene};
pub use suite::{run_suite, ExperimentConfig, MixSpec, ResultRow, SceneOutcome, Source, Sweep};
