//! CSV import: 500 rows of 1024 integers (row-major frame), no header.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{Label, PressureFrame, PressureSnippet, SnippetMeta, FRAMES, FRAME_CELLS};
use crate::{Error, Result};

/// Parses CSV frames. Row numbers in errors are 1-based.
pub fn read_csv_frames<R: Read>(source: R) -> Result<Vec<PressureFrame>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut frames = Vec::with_capacity(FRAMES);
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.len() != FRAME_CELLS {
            return Err(Error::Csv {
                row,
                message: format!("{} columns, expected {FRAME_CELLS}", record.len()),
            });
        }
        let mut values = [0u8; FRAME_CELLS];
        for (col, field) in record.iter().enumerate() {
            values[col] = field.parse::<u8>().map_err(|_| Error::Csv {
                row,
                message: format!("column {}: {field:?} is not an integer in 0..=255", col + 1),
            })?;
        }
        frames.push(PressureFrame::from_values(values));
    }
    if frames.len() != FRAMES {
        return Err(Error::Csv {
            row: frames.len(),
            message: format!("{} rows, expected {FRAMES}", frames.len()),
        });
    }
    Ok(frames)
}

pub fn import_csv(path: &Path, meta: SnippetMeta, label: Label) -> Result<PressureSnippet> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let frames = read_csv_frames(std::io::BufReader::new(file))?;
    PressureSnippet::new(meta, label, frames)
}
