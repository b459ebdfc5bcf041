//! PDF text-layer extraction. Scanned or image-only pages are out of scope.

use std::path::Path;

use crate::error::{Error, Result};

pub fn extract(path: &Path) -> Result<String> {
    pdf_extract::extract_text(path).map_err(|e| Error::ExtractionFailed {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
