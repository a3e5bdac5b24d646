pub mod embed;
pub mod ingest;
pub mod report;
pub mod simulate;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub(crate) fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Partial(format!("cannot write {}: {e}", path.display()))
}

/// Writes through a buffered file, mapping failures to a partial-failure error.
pub(crate) fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| output_error(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| output_error(path, e))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n")
    })
}
