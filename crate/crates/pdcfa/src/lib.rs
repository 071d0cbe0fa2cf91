//! Bundle loading, report files and the command-line driver around
//! [`pdcfa_core`].

pub mod bundle;
pub mod run;

pub use bundle::{load_bundle, Bundle, BundleError, Manifest};
pub use pdcfa_core as core;
pub use run::{run_bundle, write_reports, RunMeta, RunOptions, RunOutput};
