//! IDX dataset files (the MNIST container format) from disk.

use std::fs;
use std::path::Path;

use lgv_core::data::{idx_batch, parse_idx_images, parse_idx_labels};
use lgv_core::model::Batch;

use crate::error::{LabError, Result};

/// Load an images/labels pair of IDX files into a batch with pixels in
/// `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Batch> {
    let images_bytes = fs::read(images_path).map_err(|e| LabError::io(images_path, e))?;
    let labels_bytes = fs::read(labels_path).map_err(|e| LabError::io(labels_path, e))?;
    let images = parse_idx_images(&images_bytes).map_err(|e| LabError::Format {
        path: images_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let labels = parse_idx_labels(&labels_bytes).map_err(|e| LabError::Format {
        path: labels_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    idx_batch(images, labels).map_err(|e| LabError::Format {
        path: images_path.to_path_buf(),
        reason: e.to_string(),
    })
}
