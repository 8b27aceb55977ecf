//! Statistical features for the SVM and feed-forward models.
//!
//! Layout: `[mean, std]` per channel in `x_t, y_t, p_t, x_b, y_b, p_b` order
//! (12 values), followed for [`FeatureVariant::Full24`] by `[mean, std]` of
//! each channel's first difference (12 more). Standard deviations are
//! population (1/N).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::{MotionSignals, CHANNELS, CHANNEL_NAMES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureVariant {
    Base12,
    Full24,
}

impl FeatureVariant {
    pub fn count(self) -> usize {
        match self {
            FeatureVariant::Base12 => 12,
            FeatureVariant::Full24 => 24,
        }
    }

    /// Column names, e.g. `x_t_mean`, `x_t_std`, ..., `dp_b_std`.
    pub fn names(self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.count());
        for c in CHANNEL_NAMES {
            names.push(format!("{c}_mean"));
            names.push(format!("{c}_std"));
        }
        if self == FeatureVariant::Full24 {
            for c in CHANNEL_NAMES {
                names.push(format!("d{c}_mean"));
                names.push(format!("d{c}_std"));
            }
        }
        names
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureVariant::Base12 => "base12",
            FeatureVariant::Full24 => "full24",
        })
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "base12" | "12" => Ok(FeatureVariant::Base12),
            "full24" | "24" => Ok(FeatureVariant::Full24),
            other => Err(Error::InvalidArgument(format!("feature variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub variant: FeatureVariant,
    pub values: Vec<f64>,
}

/// `d[k] = s[k+1] - s[k]`, per frame (no division by the sampling interval).
pub fn first_difference(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "first difference needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    Ok(signal.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn extract_features(signals: &MotionSignals, variant: FeatureVariant) -> Result<FeatureVector> {
    if signals.is_empty() {
        return Err(Error::Empty("motion signals"));
    }
    let channels: Vec<Vec<f64>> = (0..CHANNELS).map(|c| signals.channel(c)).collect();
    let mut values = Vec::with_capacity(variant.count());
    for ch in &channels {
        let (m, s) = mean_std(ch);
        values.extend([m, s]);
    }
    if variant == FeatureVariant::Full24 {
        for ch in &channels {
            let (m, s) = mean_std(&first_difference(ch)?);
            values.extend([m, s]);
        }
    }
    Ok(FeatureVector { variant, values })
}
