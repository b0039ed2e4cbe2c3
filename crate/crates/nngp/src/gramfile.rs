//! Gram matrix dumps: the little-endian layout of `GramMatrix::to_le_bytes`.

use std::fs;
use std::path::Path;

use nngp_core::GramMatrix;

use crate::{Error, Result};

pub fn write_gram(path: &Path, gram: &GramMatrix) -> Result<()> {
    fs::write(path, gram.to_le_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(GramMatrix::from_le_bytes(&bytes)?)
}
