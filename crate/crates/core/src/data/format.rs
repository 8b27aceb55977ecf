//! Canonical `PMAT` snippet file.
//!
//! ```text
//! offset size
//!  0     4    magic "PMAT"
//!  4     2    version, u16 LE (= 1)
//!  6     2    frame count, u16 LE (= 500)
//!  8     1    rows (= 32)
//!  9     1    cols (= 32)
//! 10     1    label (0 = FM-, 1 = FM+)
//! 11    21    reserved, zero
//! 32     …    frame_count * rows * cols u8, frame-major, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Label, PressureFrame, PressureSnippet, SnippetMeta, FRAMES, FRAME_CELLS, GRID};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PMAT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

pub fn write_snippet<W: Write>(snippet: &PressureSnippet, mut sink: W) -> Result<()> {
    if snippet.frames.len() != FRAMES {
        return Err(Error::FrameCount(snippet.frames.len()));
    }
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&(FRAMES as u16).to_le_bytes());
    header[8] = GRID as u8;
    header[9] = GRID as u8;
    header[10] = snippet.label.to_byte();
    sink.write_all(&header)?;
    for frame in &snippet.frames {
        sink.write_all(frame.as_slice())?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads label and frames; identity comes from the manifest.
pub fn read_frames<R: Read>(mut source: R) -> Result<(Label, Vec<PressureFrame>)> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut source, &mut header)?;
    if got < 4 || header[0..4] != MAGIC {
        if got >= 4 {
            return Err(Error::BadMagic(header[0..4].try_into().unwrap()));
        }
        return Err(Error::TruncatedHeader(got));
    }
    if got < HEADER_LEN {
        return Err(Error::TruncatedHeader(got));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let frame_count = u16::from_le_bytes([header[6], header[7]]) as usize;
    if frame_count != FRAMES {
        return Err(Error::FrameCount(frame_count));
    }
    let (rows, cols) = (header[8] as usize, header[9] as usize);
    if rows != GRID || cols != GRID {
        return Err(Error::Geometry { rows, cols });
    }
    let label = Label::from_byte(header[10])?;
    if header[11..].iter().any(|&b| b != 0) {
        return Err(Error::ReservedBytes);
    }

    let expected = FRAMES * FRAME_CELLS;
    let mut payload = vec![0u8; expected];
    let found = read_up_to(&mut source, &mut payload)?;
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    let mut probe = [0u8; 1];
    if read_up_to(&mut source, &mut probe)? != 0 {
        return Err(Error::TrailingBytes);
    }
    let frames = payload
        .chunks_exact(FRAME_CELLS)
        .map(PressureFrame::from_slice)
        .collect::<Result<Vec<_>>>()?;
    Ok((label, frames))
}

pub fn read_snippet<R: Read>(source: R, meta: SnippetMeta) -> Result<PressureSnippet> {
    let (label, frames) = read_frames(source)?;
    PressureSnippet::new(meta, label, frames)
}

pub fn write_snippet_file(snippet: &PressureSnippet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_snippet(snippet, BufWriter::new(file))
}

pub fn read_snippet_file(path: &Path, meta: SnippetMeta) -> Result<PressureSnippet> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_snippet(BufReader::new(file), meta)
}

fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
