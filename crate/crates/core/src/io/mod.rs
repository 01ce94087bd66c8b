//! Interchange formats: the PADACT01 binary activation dump, activation and
//! dataset CSVs, and JSON documents for PAD models and network weights.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::activation_model::ActivationSet;

mod csv_formats;
mod json;
mod padact;
pub mod reports;

pub use csv_formats::{read_activation_csv, read_dataset_csv, write_activation_csv, write_dataset_csv};
pub use json::{
    read_pad_model, read_weights, write_pad_model, write_weights, LayerDocument, PadModelDocument,
    WeightsDocument, FORMAT_VERSION,
};
pub use padact::{read_padact, write_padact, Flags, PADACT_MAGIC};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"PADACT01\"")]
    BadMagic([u8; 8]),

    #[error("file truncated: needed {needed} more bytes at offset {offset}")]
    TruncatedFile { offset: usize, needed: usize },

    #[error("flag mismatch: {0}")]
    FlagMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("CSV header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("unsupported document version {0}")]
    UnsupportedVersion(u64),

    #[error("sample ids must equal record positions for PADACT01 (record {position} has id {sample_id})")]
    NonPositionalIds { position: usize, sample_id: u64 },

    #[error(transparent)]
    Invalid(#[from] crate::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads an activation set, choosing CSV for `.csv` files and PADACT01
/// otherwise. CSV sets take their layer name from the file stem.
pub fn read_activation_file(path: &Path) -> FormatResult<ActivationSet> {
    let reader = BufReader::new(File::open(path)?);
    if is_csv(path) {
        let layer = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        read_activation_csv(reader, layer)
    } else {
        read_padact(reader)
    }
}

/// Serialises an activation set into memory in the format implied by `path`.
pub fn encode_activation_file(path: &Path, set: &ActivationSet) -> FormatResult<Vec<u8>> {
    let mut buf = Vec::new();
    if is_csv(path) {
        write_activation_csv(&mut buf, set)?;
    } else {
        write_padact(&mut buf, set)?;
    }
    Ok(buf)
}

pub fn write_activation_file(path: &Path, set: &ActivationSet) -> FormatResult<()> {
    let bytes = encode_activation_file(path, set)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}
