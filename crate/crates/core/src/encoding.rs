//! Motion encoding: 500 frames of 32×32 pressure → 500×6 signals in [0, 1].
//!
//! Per frame the grid is cropped to rows 1–29 and columns 4–29 (1-based) and
//! split into a 12×26 upper region (head/shoulders) and a 17×26 lower region
//! (hips). For each region the center of pressure `(x, y)` (x along rows,
//! y along columns, 1-based within the region) and the mean pressure `p` are
//! computed. Each of the six resulting channels is smoothed with a centered
//! 5-frame moving average, then position and pressure channels are min–max
//! normalized with a shared denominator per group.

use serde::{Deserialize, Serialize};

use crate::data::{PressureFrame, PressureSnippet, FRAME_CELLS, GRID};

/// First cropped row (0-based) of the original grid.
pub const CROP_ROW0: usize = 0;
/// First cropped column (0-based); column 4 in 1-based terms.
pub const CROP_COL0: usize = 3;
pub const CROP_ROWS: usize = 29;
pub const CROP_COLS: usize = 26;
pub const TOP_ROWS: usize = 12;
pub const BOTTOM_ROWS: usize = CROP_ROWS - TOP_ROWS;
pub const SMOOTHING_WINDOW: usize = 5;

pub const CHANNELS: usize = 6;
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["x_t", "y_t", "p_t", "x_b", "y_b", "p_b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Top,
    Bottom,
}

impl Region {
    pub fn rows(self) -> usize {
        match self {
            Region::Top => TOP_ROWS,
            Region::Bottom => BOTTOM_ROWS,
        }
    }

    /// 0-based original-grid row of this region's first row.
    pub fn row_offset(self) -> usize {
        match self {
            Region::Top => CROP_ROW0,
            Region::Bottom => CROP_ROW0 + TOP_ROWS,
        }
    }
}

/// One region of a cropped frame, promoted to reals.
#[derive(Debug, Clone, PartialEq)]
pub struct CroppedFrame {
    pub region: Region,
    values: Vec<f64>,
}

impl CroppedFrame {
    pub fn rows(&self) -> usize {
        self.region.rows()
    }

    pub fn cols(&self) -> usize {
        CROP_COLS
    }

    /// Value at 1-based `(i, j)` within the region.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * CROP_COLS + (j - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn crop_and_split(frame: &PressureFrame) -> (CroppedFrame, CroppedFrame) {
    crop_and_split_real(&frame.to_f64())
}

/// [`crop_and_split`] on a real-valued row-major 32×32 grid.
pub fn crop_and_split_real(grid: &[f64; FRAME_CELLS]) -> (CroppedFrame, CroppedFrame) {
    let extract = |region: Region| {
        let mut values = Vec::with_capacity(region.rows() * CROP_COLS);
        for r in 0..region.rows() {
            let row = region.row_offset() + r;
            values.extend_from_slice(&grid[row * GRID + CROP_COL0..row * GRID + CROP_COL0 + CROP_COLS]);
        }
        CroppedFrame { region, values }
    };
    (extract(Region::Top), extract(Region::Bottom))
}

/// Center of pressure and mean pressure of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cop {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

/// Pressure-weighted mean row `x` and column `y` (1-based) plus mean pressure.
/// A region without pressure reports its geometric center and `p = 0`.
pub fn center_of_pressure(region: &CroppedFrame) -> Cop {
    center_from(region, (0, 0))
}

/// Like [`center_of_pressure`] with positions counted from `origin`
/// (0-based row and column), so the origin itself has weight 1.
fn center_from(region: &CroppedFrame, origin: (usize, usize)) -> Cop {
    let (m, n) = (region.rows(), region.cols());
    let (r0, c0) = (origin.0 as f64, origin.1 as f64);
    let mut total = 0.0;
    let mut row_moment = 0.0;
    let mut col_moment = 0.0;
    for (i, row) in region.values.chunks_exact(n).enumerate() {
        let mut row_sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            row_sum += v;
            col_moment += ((j + 1) as f64 - c0) * v;
        }
        total += row_sum;
        row_moment += ((i + 1) as f64 - r0) * row_sum;
    }
    if total == 0.0 {
        return Cop {
            x: (m as f64 + 1.0) / 2.0 - r0,
            y: (n as f64 + 1.0) / 2.0 - c0,
            p: 0.0,
        };
    }
    Cop {
        x: row_moment / total,
        y: col_moment / total,
        p: total / (m * n) as f64,
    }
}

/// First row and column (0-based) holding pressure in any of `regions`.
fn occupied_origin<'a>(regions: impl Iterator<Item = &'a CroppedFrame>) -> (usize, usize) {
    let mut origin = (usize::MAX, usize::MAX);
    for region in regions {
        let n = region.cols();
        for (k, _) in region.values.iter().enumerate().filter(|(_, &v)| v != 0.0) {
            origin.0 = origin.0.min(k / n);
            origin.1 = origin.1.min(k % n);
        }
    }
    if origin.0 == usize::MAX {
        (0, 0)
    } else {
        origin
    }
}

/// Centered moving average; the window is truncated at the ends so the
/// output has the input's length.
///
/// # Panics
///
/// If `window` is even or zero.
pub fn moving_average(signal: &[f64], window: usize) -> Vec<f64> {
    assert!(window % 2 == 1, "moving average window must be odd, got {window}");
    let half = window / 2;
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let span = &signal[lo..=hi];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// Six unnormalized channels in [`CHANNEL_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignals {
    pub channels: [Vec<f64>; CHANNELS],
}

impl RawSignals {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_cops(track: &[[Cop; 2]]) -> Self {
        let mut channels: [Vec<f64>; CHANNELS] = Default::default();
        for c in channels.iter_mut() {
            c.reserve(track.len());
        }
        for [top, bottom] in track {
            for (k, v) in [top.x, top.y, top.p, bottom.x, bottom.y, bottom.p]
                .into_iter()
                .enumerate()
            {
                channels[k].push(v);
            }
        }
        Self { channels }
    }

    pub fn smoothed(&self, window: usize) -> Self {
        Self {
            channels: self.channels.each_ref().map(|c| moving_average(c, window)),
        }
    }
}

/// Frame-major matrix of normalized signals, one `[f64; 6]` row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSignals {
    rows: Vec<[f64; CHANNELS]>,
}

impl MotionSignals {
    pub fn from_rows(rows: Vec<[f64; CHANNELS]>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; CHANNELS]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    /// Values flattened frame-major (frame 0's six channels, then frame 1's, ...).
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    pub fn to_raw(&self) -> RawSignals {
        RawSignals {
            channels: std::array::from_fn(|c| self.channel(c)),
        }
    }
}

fn range(s: &[f64]) -> (f64, f64) {
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max - min)
}

/// Min–max normalization. Positions (x_t, y_t, x_b, y_b) share the largest of
/// their four ranges as denominator; pressures (p_t, p_b) share the larger of
/// theirs. A zero denominator maps the whole group to zeros.
pub fn normalize(raw: &RawSignals) -> MotionSignals {
    const POSITION: [usize; 4] = [0, 1, 3, 4];
    const PRESSURE: [usize; 2] = [2, 5];
    let stats = raw.channels.each_ref().map(|c| range(c));
    let group_span = |idx: &[usize]| idx.iter().map(|&c| stats[c].1).fold(0.0, f64::max);
    let pos_span = group_span(&POSITION);
    let pres_span = group_span(&PRESSURE);

    let rows = (0..raw.len())
        .map(|t| {
            std::array::from_fn(|c| {
                let span = if PRESSURE.contains(&c) { pres_span } else { pos_span };
                if span > 0.0 {
                    (raw.channels[c][t] - stats[c].0) / span
                } else {
                    0.0
                }
            })
        })
        .collect();
    MotionSignals { rows }
}

/// Per-frame centers of pressure `[top, bottom]`, before smoothing.
pub fn cop_track(snippet: &PressureSnippet) -> Vec<[Cop; 2]> {
    snippet.frames.iter().map(frame_cops).collect()
}

fn frame_cops(frame: &PressureFrame) -> [Cop; 2] {
    let (top, bottom) = crop_and_split(frame);
    [center_of_pressure(&top), center_of_pressure(&bottom)]
}

/// Full pipeline from raw frames to normalized signals.
///
/// Positions are measured from each region's first occupied row and column
/// over the whole snippet. The offset cancels in normalization, and it makes
/// an integer shift of the pressure pattern leave the result bit-identical.
pub fn encode(snippet: &PressureSnippet) -> MotionSignals {
    encode_regions(snippet.frames.iter().map(crop_and_split).collect())
}

/// [`encode`] for real-valued frames (each row-major 32×32).
pub fn encode_real(frames: &[[f64; FRAME_CELLS]]) -> MotionSignals {
    encode_regions(frames.iter().map(crop_and_split_real).collect())
}

fn encode_regions(regions: Vec<(CroppedFrame, CroppedFrame)>) -> MotionSignals {
    let top = occupied_origin(regions.iter().map(|r| &r.0));
    let bottom = occupied_origin(regions.iter().map(|r| &r.1));
    let track: Vec<[Cop; 2]> = regions
        .iter()
        .map(|(t, b)| [center_from(t, top), center_from(b, bottom)])
        .collect();
    normalize(&RawSignals::from_cops(&track).smoothed(SMOOTHING_WINDOW))
}

/// Overlay point in original 1-based grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayPoint {
    pub frame: usize,
    pub top_row: f64,
    pub top_col: f64,
    pub bottom_row: f64,
    pub bottom_col: f64,
}

/// Per-frame CoP positions mapped back onto the 32×32 grid for plotting.
pub fn overlay(snippet: &PressureSnippet) -> Vec<OverlayPoint> {
    let col_shift = CROP_COL0 as f64;
    cop_track(snippet)
        .iter()
        .enumerate()
        .map(|(frame, [t, b])| OverlayPoint {
            frame,
            top_row: t.x + Region::Top.row_offset() as f64,
            top_col: t.y + col_shift,
            bottom_row: b.x + Region::Bottom.row_offset() as f64,
            bottom_col: b.y + col_shift,
        })
        .collect()
}
