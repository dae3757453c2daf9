//! Norm-constrained feed-forward vector-to-vector regression with a
//! calibrated decomposition of the MAE test error into approximation,
//! estimation, and optimization parts, Monte-Carlo verification of the
//! underlying Rademacher-complexity identities, and a desk-scale image
//! de-noising experiment pipeline.

pub mod bounds;
pub mod config;
pub mod curves;
pub mod data;
pub mod error;
pub mod experiment;
pub mod network;
pub mod numerics;
pub mod rademacher;
pub mod suite;
pub mod training;

pub use error::{Error, Result};

use std::path::Path;

/// Writes a file via a temporary sibling and a rename, so readers never see a
/// partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
