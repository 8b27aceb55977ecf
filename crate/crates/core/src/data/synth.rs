//! Synthetic snippets: truncated Gaussian pressure blobs whose centers
//! oscillate sinusoidally, quantized to 8 bits.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, PressureFrame, PressureSnippet, Session, SnippetMeta, FRAMES, FRAME_CELLS, GRID, SAMPLE_RATE};
use crate::{Error, Result};

/// One pressure mass. Coordinates are 1-based rows/cols of the 32×32 grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    /// Resting center, `[row, col]`.
    pub center: [f64; 2],
    /// Truncation radius in grid units; 0 makes a single-cell point mass.
    pub radius: f64,
    /// Oscillation amplitude along `[row, col]`.
    #[serde(default)]
    pub amplitude: [f64; 2],
    /// Oscillation frequency in Hz.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
    /// Peak multiplier applied on top of the spec's pressure scale.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Parameters of one synthetic snippet. Typically two blobs: shoulders/head
/// in the upper region and hips in the lower one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub blobs: Vec<BlobSpec>,
    /// Peak pressure in device units.
    pub pressure_scale: f64,
    /// Uniform noise amplitude in device units, added to every cell.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
}

const CROP_ROWS: (f64, f64) = (1.0, 29.0);
const CROP_COLS: (f64, f64) = (4.0, 29.0);

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pressure_scale.is_finite() && self.pressure_scale >= 0.0) {
            return Err(Error::SynthSpec("pressure_scale must be finite and nonnegative".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::SynthSpec("noise must be finite and nonnegative".into()));
        }
        for (k, b) in self.blobs.iter().enumerate() {
            let [r, c] = b.center;
            if !(CROP_ROWS.0..=CROP_ROWS.1).contains(&r) || !(CROP_COLS.0..=CROP_COLS.1).contains(&c) {
                return Err(Error::SynthSpec(format!(
                    "blob {k}: center ({r}, {c}) outside crop window rows 1..29, cols 4..29"
                )));
            }
            if !(b.frequency > 0.0 && b.frequency < SAMPLE_RATE / 2.0) {
                return Err(Error::SynthSpec(format!(
                    "blob {k}: frequency {} outside (0, 50) Hz",
                    b.frequency
                )));
            }
            if !(b.radius.is_finite() && b.radius >= 0.0) {
                return Err(Error::SynthSpec(format!("blob {k}: radius must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Renders the 500 frames of `spec`. Pure function of the spec, seed included.
pub fn generate_frames(spec: &SynthSpec) -> Result<Vec<PressureFrame>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::with_capacity(FRAMES);
    let mut field = [0.0f64; FRAME_CELLS];
    for k in 0..FRAMES {
        let t = k as f64 / SAMPLE_RATE;
        field.fill(0.0);
        for blob in &spec.blobs {
            let s = (2.0 * PI * blob.frequency * t + blob.phase).sin();
            let cr = blob.center[0] + blob.amplitude[0] * s;
            let cc = blob.center[1] + blob.amplitude[1] * s;
            let peak = spec.pressure_scale * blob.weight;
            stamp_blob(&mut field, cr, cc, blob.radius, peak);
        }
        let mut values = [0u8; FRAME_CELLS];
        for (v, &p) in values.iter_mut().zip(field.iter()) {
            let noisy = if spec.noise > 0.0 {
                p + rng.gen_range(-spec.noise..=spec.noise)
            } else {
                p
            };
            *v = noisy.round().clamp(0.0, 255.0) as u8;
        }
        frames.push(PressureFrame::from_values(values));
    }
    Ok(frames)
}

fn stamp_blob(field: &mut [f64; FRAME_CELLS], cr: f64, cc: f64, radius: f64, peak: f64) {
    if radius == 0.0 {
        let (r, c) = (cr.round(), cc.round());
        if (1.0..=GRID as f64).contains(&r) && (1.0..=GRID as f64).contains(&c) {
            field[(r as usize - 1) * GRID + (c as usize - 1)] += peak;
        }
        return;
    }
    let sigma2 = (radius / 2.0).powi(2);
    let r_lo = (cr - radius).ceil().max(1.0) as usize;
    let r_hi = (cr + radius).floor().min(GRID as f64) as usize;
    let c_lo = (cc - radius).ceil().max(1.0) as usize;
    let c_hi = (cc + radius).floor().min(GRID as f64) as usize;
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
            if d2 <= radius * radius {
                field[(r - 1) * GRID + (c - 1)] += peak * (-d2 / (2.0 * sigma2)).exp();
            }
        }
    }
}

pub fn generate_synthetic(spec: &SynthSpec, meta: SnippetMeta, label: Label) -> Result<PressureSnippet> {
    PressureSnippet::new(meta, label, generate_frames(spec)?)
}

/// Motion regime: ranges sampled uniformly per snippet and blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// Hz, `[low, high]`.
    pub frequency: [f64; 2],
    /// Grid units, `[low, high]`.
    pub amplitude: [f64; 2],
}

/// A whole synthetic cohort: each infant contributes FM− snippets (session
/// T1, slow large motion) and FM+ snippets (T5–T7, fast small motion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetSpec {
    pub infants: usize,
    pub snippets_per_class: usize,
    pub fm_minus: Regime,
    pub fm_plus: Regime,
    #[serde(default = "default_noise")]
    pub noise: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    2.0
}

impl Default for SynthDatasetSpec {
    fn default() -> Self {
        Self {
            infants: 20,
            snippets_per_class: 5,
            fm_minus: Regime {
                frequency: [0.5, 1.5],
                amplitude: [2.0, 3.0],
            },
            fm_plus: Regime {
                frequency: [4.0, 7.0],
                amplitude: [0.5, 1.0],
            },
            noise: default_noise(),
            seed: 2023,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Generates the cohort described by `spec`, ordered by infant then class.
pub fn synth_dataset(spec: &SynthDatasetSpec) -> Result<Vec<PressureSnippet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.infants * spec.snippets_per_class * 2);
    for infant in 0..spec.infants {
        let infant_id = format!("infant-{infant:02}");
        let head = (
            [rng.gen_range(5.5..7.5), rng.gen_range(14.0..19.0)],
            rng.gen_range(3.0..4.0),
        );
        let hips = (
            [rng.gen_range(19.0..23.0), rng.gen_range(14.0..19.0)],
            rng.gen_range(4.0..5.0),
        );
        let scale = rng.gen_range(150.0..230.0);
        for (label, regime) in [(Label::FmMinus, &spec.fm_minus), (Label::FmPlus, &spec.fm_plus)] {
            for k in 0..spec.snippets_per_class {
                let blobs = [head, hips]
                    .iter()
                    .map(|&(center, radius)| {
                        let a = uniform(&mut rng, regime.amplitude);
                        let theta = rng.gen_range(0.0..PI);
                        BlobSpec {
                            center,
                            radius,
                            amplitude: [a * theta.cos(), a * theta.sin()],
                            frequency: uniform(&mut rng, regime.frequency),
                            phase: rng.gen_range(0.0..2.0 * PI),
                            weight: 1.0,
                        }
                    })
                    .collect();
                let snippet_spec = SynthSpec {
                    blobs,
                    pressure_scale: scale,
                    noise: spec.noise,
                    seed: rng.gen(),
                };
                let session = match label {
                    Label::FmMinus => Session::T1,
                    Label::FmPlus => [Session::T5, Session::T6, Session::T7][k % 3],
                };
                let meta = SnippetMeta {
                    snippet_id: format!(
                        "{infant_id}-{}-{k:02}",
                        if label.is_positive() { "fmplus" } else { "fmminus" }
                    ),
                    infant_id: infant_id.clone(),
                    session,
                };
                out.push(generate_synthetic(&snippet_spec, meta, label)?);
            }
        }
    }
    Ok(out)
}
