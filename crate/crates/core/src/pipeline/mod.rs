//! Batch orchestration behind the `tomo` CLI and its on-disk layout.
//!
//! A run directory holds:
//!
//! ```text
//! manifest.json
//! results.csv
//! truths/00000.tomo                                   u8  (nx, ny, nz)
//! conditions/n<photons>_r<repeat>/measurements/*.expected.tomo   f64 (cols, rows, angles)
//! conditions/n<photons>_r<repeat>/measurements/*.observed.tomo   u32 (cols, rows, angles)
//! conditions/n<photons>_r<repeat>/<method>/00000.tomo f32 (nx, ny, nz) + .json log
//! export/<mode>_n<photons>_r<repeat>/pairs.json
//! ```

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{
    cmd_evaluate, cmd_export, cmd_generate, cmd_reconstruct, cmd_simulate, cmd_sweep, BatchReport, ExportManifest,
    ResultRow, SweepReport,
};
pub use config::{ExportMode, Method, Phantom, RunConfig};
pub use manifest::{DatasetManifest, Split};

/// Process exit status for the CLI.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PARTIAL: i32 = 3;
}
