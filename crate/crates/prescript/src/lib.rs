//! File formats and command line for the prescriptive-network toolkit.
//!
//! Everything numerical lives in `prescript-core`; this crate adds the parts
//! that need an operating system. Files are written deterministically:
//! floats carry 17 significant digits (enough to round-trip every `f64`
//! exactly), JSON is compact with a fixed key order, and CSVs use fixed
//! headers, so identical inputs produce byte-identical outputs.

pub mod cli;
pub mod config_file;
pub mod csv_io;
pub mod error;
pub mod jsonfmt;
pub mod model_file;
pub mod report;
pub mod rules_file;
pub mod tree_file;

pub use error::{CliError, Result};
