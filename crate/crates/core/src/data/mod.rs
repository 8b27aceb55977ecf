//! Snippet and dataset model.
//!
//! A [`PressureSnippet`] is one labelled 5 s recording: 500 frames of a 32×32
//! grid of 8-bit sensor readings sampled at 100 Hz, plus the identity of the
//! infant and session it came from.

mod format;
mod import;
mod manifest;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use format::{
    read_frames, read_snippet, read_snippet_file, write_snippet, write_snippet_file, HEADER_LEN, MAGIC, VERSION,
};
pub use import::{import_csv, read_csv_frames};
pub use manifest::{load_dataset, write_manifest, Manifest, ManifestEntry};
pub use synth::{generate_frames, generate_synthetic, synth_dataset, BlobSpec, Regime, SynthDatasetSpec, SynthSpec};

/// Rows and columns of the sensor grid.
pub const GRID: usize = 32;
/// Sensor cells per frame.
pub const FRAME_CELLS: usize = GRID * GRID;
/// Frames per snippet (5 s at 100 Hz).
pub const FRAMES: usize = 500;
/// Sampling rate in Hz.
pub const SAMPLE_RATE: f64 = 100.0;

/// One 32×32 frame of raw 8-bit sensor readings, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct PressureFrame {
    values: [u8; FRAME_CELLS],
}

impl PressureFrame {
    pub fn zeros() -> Self {
        Self {
            values: [0; FRAME_CELLS],
        }
    }

    pub fn from_values(values: [u8; FRAME_CELLS]) -> Self {
        Self { values }
    }

    pub fn from_slice(values: &[u8]) -> Result<Self> {
        let values: [u8; FRAME_CELLS] = values
            .try_into()
            .map_err(|_| Error::Shape(format!("frame has {} values, expected {FRAME_CELLS}", values.len())))?;
        Ok(Self { values })
    }

    /// Reading at 0-based `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * GRID + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.values[row * GRID + col] = value;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.values
    }

    /// Frame promoted to reals, row-major.
    pub fn to_f64(&self) -> [f64; FRAME_CELLS] {
        self.values.map(f64::from)
    }
}

impl fmt::Debug for PressureFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let active = self.values.iter().filter(|&&v| v > 0).count();
        f.debug_struct("PressureFrame").field("active_cells", &active).finish()
    }
}

/// Ground-truth class. FM+ is the positive class everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "FM-", alias = "FM−")]
    FmMinus,
    #[serde(rename = "FM+")]
    FmPlus,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::FmPlus
    }

    /// 1.0 for FM+, 0.0 for FM−.
    pub fn as_target(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::FmPlus => "FM+",
            Label::FmMinus => "FM-",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Label::FmMinus => 0,
            Label::FmPlus => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Label::FmMinus),
            1 => Ok(Label::FmPlus),
            other => Err(Error::InvalidLabel(format!("byte {other}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "FM+" => Ok(Label::FmPlus),
            "FM-" | "FM−" => Ok(Label::FmMinus),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// Recording session. T1 is pre-fidgety, T5–T7 fidgety age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    T1,
    T5,
    T6,
    T7,
}

impl Session {
    pub fn is_fidgety_period(self) -> bool {
        self != Session::T1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Session::T1 => "T1",
            Session::T5 => "T5",
            Session::T6 => "T6",
            Session::T7 => "T7",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "T1" => Ok(Session::T1),
            "T5" => Ok(Session::T5),
            "T6" => Ok(Session::T6),
            "T7" => Ok(Session::T7),
            other => Err(Error::InvalidSession(other.to_string())),
        }
    }
}

/// Identity of a snippet; stored in the manifest, not in the binary file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetMeta {
    pub snippet_id: String,
    pub infant_id: String,
    pub session: Session,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PressureSnippet {
    pub meta: SnippetMeta,
    pub label: Label,
    pub frames: Vec<PressureFrame>,
}

impl PressureSnippet {
    pub fn new(meta: SnippetMeta, label: Label, frames: Vec<PressureFrame>) -> Result<Self> {
        if frames.len() != FRAMES {
            return Err(Error::FrameCount(frames.len()));
        }
        Ok(Self { meta, label, frames })
    }

    pub fn id(&self) -> &str {
        &self.meta.snippet_id
    }

    pub fn infant_id(&self) -> &str {
        &self.meta.infant_id
    }
}

/// Counts recorded alongside a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub snippets: usize,
    pub fm_plus: usize,
    pub fm_minus: usize,
    pub per_infant: BTreeMap<String, usize>,
    pub per_session: BTreeMap<String, usize>,
}

impl DatasetCounts {
    pub fn infants(&self) -> usize {
        self.per_infant.len()
    }

    fn tally<'a>(items: impl IntoIterator<Item = (&'a SnippetMeta, Label)>) -> Self {
        let mut c = DatasetCounts::default();
        for (meta, label) in items {
            c.snippets += 1;
            match label {
                Label::FmPlus => c.fm_plus += 1,
                Label::FmMinus => c.fm_minus += 1,
            }
            *c.per_infant.entry(meta.infant_id.clone()).or_default() += 1;
            *c.per_session.entry(meta.session.to_string()).or_default() += 1;
        }
        c
    }
}

impl fmt::Display for DatasetCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "snippets={} FM+={} FM-={} infants={}",
            self.snippets,
            self.fm_plus,
            self.fm_minus,
            self.infants()
        )
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub snippets: Vec<PressureSnippet>,
    pub source: Option<PathBuf>,
    pub counts: DatasetCounts,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate snippet ids.
    pub fn new(snippets: Vec<PressureSnippet>, source: Option<PathBuf>) -> Result<Self> {
        check_unique_ids(snippets.iter().map(|s| s.id()))?;
        let counts = DatasetCounts::tally(snippets.iter().map(|s| (&s.meta, s.label)));
        Ok(Self {
            snippets,
            source,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    /// Recounts the snippets and compares with the stored counts.
    pub fn verify_counts(&self) -> Result<()> {
        let recount = DatasetCounts::tally(self.snippets.iter().map(|s| (&s.meta, s.label)));
        if recount != self.counts {
            return Err(Error::CountMismatch(format!(
                "stored {} vs recount {}",
                self.counts, recount
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}
