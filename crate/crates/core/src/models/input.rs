use serde::{Deserialize, Serialize};

use crate::data::FRAMES;
use crate::encoding::{MotionSignals, CHANNELS};
use crate::features::{extract_features, FeatureVariant};
use crate::{Error, Result};

/// Step counts accepted by [`reshape_for_lstm`].
pub const LSTM_STEPS: [usize; 3] = [25, 50, 100];

/// The representation a model family consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelInput {
    Features(FeatureVariant),
    /// The full `500 × 6` signal matrix.
    Sequence,
    /// `steps × (3000 / steps)` blocks of consecutive frames.
    Reshaped(usize),
}

impl ModelInput {
    pub fn sample_shape(self) -> Vec<usize> {
        match self {
            ModelInput::Features(v) => vec![v.count()],
            ModelInput::Sequence => vec![FRAMES, CHANNELS],
            ModelInput::Reshaped(steps) => vec![steps, FRAMES * CHANNELS / steps],
        }
    }

    /// Flat per-sample input vector.
    pub fn prepare(self, signals: &MotionSignals) -> Result<Vec<f64>> {
        match self {
            ModelInput::Features(v) => Ok(extract_features(signals, v)?.values),
            ModelInput::Sequence => {
                if signals.len() != FRAMES {
                    return Err(Error::Shape(format!("expected {FRAMES} frames, got {}", signals.len())));
                }
                Ok(signals.flat())
            }
            ModelInput::Reshaped(steps) => reshape_for_lstm(signals, steps),
        }
    }
}

/// Groups consecutive frames into `steps` step vectors, frame-major.
///
/// Because frames are already stored frame-major, step `s` is exactly the
/// slice of frames `s·(500/steps) .. (s+1)·(500/steps)` laid end to end.
pub fn reshape_for_lstm(signals: &MotionSignals, steps: usize) -> Result<Vec<f64>> {
    if !LSTM_STEPS.contains(&steps) {
        return Err(Error::InvalidArgument(format!(
            "LSTM step count must be one of {LSTM_STEPS:?}, got {steps}"
        )));
    }
    if !signals.len().is_multiple_of(steps) {
        return Err(Error::Shape(format!(
            "{} frames do not split into {steps} steps",
            signals.len()
        )));
    }
    Ok(signals.flat())
}
