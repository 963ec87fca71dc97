//! Batch runs of the throwcatch simulator: configuration in, CSV tables, SVG plots and a run
//! manifest out.

pub mod experiments;
pub mod output;
pub mod svg;
pub mod table;

pub use experiments::{load_config, run, RunRequest};
pub use output::{EmittedFile, RunManifest, MANIFEST};

use throwcatch::Error;

/// Process exit status for a failed run: 2 for invalid input, 3 for numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Domain(_) | Error::Unsupported(_) => 2,
        Error::Numerical(_) | Error::Invariant(_) => 3,
        _ => 1,
    }
}
