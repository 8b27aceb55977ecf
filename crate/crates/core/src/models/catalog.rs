use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{KernelKind, ModelInput};
use crate::features::FeatureVariant;
use crate::nn::{CellActivation, LayerSpec, NetworkSpec};
use crate::{Error, Result};

pub const DROPOUT_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Svm,
    Ffn,
    Cnn,
    Lstm,
}

macro_rules! arch_names {
    ($($variant:ident => $name:literal,)*) => {
        /// The catalogued classifier architectures, in report row order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum ArchName {
            $($variant,)*
        }

        impl ArchName {
            pub const ALL: [ArchName; 28] = [$(ArchName::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(ArchName::$variant => $name,)*
                }
            }
        }

        impl FromStr for ArchName {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(ArchName::$variant),)*
                    other => Err(Error::UnknownArchitecture(other.to_string())),
                }
            }
        }
    };
}

arch_names! {
    S1Rbf => "S1.RBF",
    S1P1 => "S1.P1",
    S1P2 => "S1.P2",
    S1P3 => "S1.P3",
    S2Rbf => "S2.RBF",
    S2P1 => "S2.P1",
    S2P2 => "S2.P2",
    S2P3 => "S2.P3",
    F1_1 => "F1.1",
    F1_2 => "F1.2",
    F1_3 => "F1.3",
    F2 => "F2",
    C1F1_1 => "C1F1.1",
    C1F1_2 => "C1F1.2",
    C1F1_3 => "C1F1.3",
    C1F1_4 => "C1F1.4",
    C1F2 => "C1F2",
    C2F1 => "C2F1",
    C3F1_1 => "C3F1.1",
    C3F1_2 => "C3F1.2",
    C3F2 => "C3F2",
    L1F1_1 => "L1F1.1",
    L1F1_2 => "L1F1.2",
    L1F1_3 => "L1F1.3",
    L1F1_4 => "L1F1.4",
    L1F2 => "L1F2",
    L2F2_1 => "L2F2.1",
    L2F2_2 => "L2F2.2",
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ArchName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ArchName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Convolution stages: (filters, kernel length).
const CONV_4_7: (usize, usize) = (4, 7);
const CONV_16_13: (usize, usize) = (16, 13);
const CONV_64_21: (usize, usize) = (64, 21);

enum Layout {
    Svm(FeatureVariant, KernelKind),
    Ffn(FeatureVariant, &'static [usize]),
    Cnn(&'static [(usize, usize)], &'static [usize]),
    Lstm(usize, &'static [usize], &'static [usize]),
}

impl ArchName {
    fn layout(self) -> Layout {
        use ArchName::*;
        use FeatureVariant::{Base12, Full24};
        let poly = |degree| KernelKind::Polynomial { degree };
        match self {
            S1Rbf => Layout::Svm(Base12, KernelKind::Rbf),
            S1P1 => Layout::Svm(Base12, poly(1)),
            S1P2 => Layout::Svm(Base12, poly(2)),
            S1P3 => Layout::Svm(Base12, poly(3)),
            S2Rbf => Layout::Svm(Full24, KernelKind::Rbf),
            S2P1 => Layout::Svm(Full24, poly(1)),
            S2P2 => Layout::Svm(Full24, poly(2)),
            S2P3 => Layout::Svm(Full24, poly(3)),
            F1_1 => Layout::Ffn(Base12, &[100]),
            F1_2 => Layout::Ffn(Full24, &[100]),
            F1_3 => Layout::Ffn(Full24, &[200]),
            F2 => Layout::Ffn(Full24, &[200, 100]),
            C1F1_1 => Layout::Cnn(&[CONV_4_7], &[100]),
            C1F1_2 => Layout::Cnn(&[CONV_16_13], &[100]),
            C1F1_3 => Layout::Cnn(&[CONV_64_21], &[100]),
            C1F1_4 => Layout::Cnn(&[CONV_64_21], &[200]),
            C1F2 => Layout::Cnn(&[CONV_64_21], &[200, 100]),
            C2F1 => Layout::Cnn(&[CONV_4_7, CONV_16_13], &[100]),
            C3F1_1 => Layout::Cnn(&[CONV_4_7, CONV_16_13, CONV_64_21], &[100]),
            C3F1_2 => Layout::Cnn(&[CONV_4_7, CONV_16_13, CONV_64_21], &[200]),
            C3F2 => Layout::Cnn(&[CONV_4_7, CONV_16_13, CONV_64_21], &[200, 100]),
            L1F1_1 => Layout::Lstm(25, &[64], &[100]),
            L1F1_2 => Layout::Lstm(50, &[64], &[100]),
            L1F1_3 => Layout::Lstm(100, &[64], &[100]),
            L1F1_4 => Layout::Lstm(50, &[64], &[200]),
            L1F2 => Layout::Lstm(50, &[64], &[200, 100]),
            L2F2_1 => Layout::Lstm(50, &[64, 32], &[200, 100]),
            L2F2_2 => Layout::Lstm(50, &[128, 64], &[200, 100]),
        }
    }

    pub fn family(self) -> Family {
        match self.layout() {
            Layout::Svm(..) => Family::Svm,
            Layout::Ffn(..) => Family::Ffn,
            Layout::Cnn(..) => Family::Cnn,
            Layout::Lstm(..) => Family::Lstm,
        }
    }

    pub fn is_svm(self) -> bool {
        self.family() == Family::Svm
    }

    /// What the model consumes, derived from a snippet's motion signals.
    pub fn input(self) -> ModelInput {
        match self.layout() {
            Layout::Svm(v, _) | Layout::Ffn(v, _) => ModelInput::Features(v),
            Layout::Cnn(..) => ModelInput::Sequence,
            Layout::Lstm(steps, ..) => ModelInput::Reshaped(steps),
        }
    }

    pub fn kernel(self) -> Option<KernelKind> {
        match self.layout() {
            Layout::Svm(_, k) => Some(k),
            _ => None,
        }
    }
}

/// Dense/conv/LSTM block followed by its activation, batch norm and dropout.
fn block(layers: &mut Vec<LayerSpec>, core: LayerSpec, features: usize) {
    layers.push(core);
    if !matches!(core, LayerSpec::Lstm { .. }) {
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::BatchNorm { features });
    layers.push(LayerSpec::Dropout { rate: DROPOUT_RATE });
}

fn dense_head(layers: &mut Vec<LayerSpec>, mut width: usize, hidden: &[usize]) {
    for &units in hidden {
        block(layers, LayerSpec::Dense { inputs: width, units }, units);
        width = units;
    }
    layers.push(LayerSpec::Dense {
        inputs: width,
        units: 1,
    });
    layers.push(LayerSpec::Sigmoid);
}

/// Layer stack of a network architecture, with ReLU cell activations in
/// LSTM layers.
pub fn build_architecture(name: ArchName) -> Result<NetworkSpec> {
    build_architecture_with(name, CellActivation::Relu)
}

pub fn build_architecture_with(name: ArchName, activation: CellActivation) -> Result<NetworkSpec> {
    let mut layers = Vec::new();
    let input_shape = name.input().sample_shape();
    match name.layout() {
        Layout::Svm(..) => {
            return Err(Error::InvalidArgument(format!("{name} is a kernel SVM, not a network")));
        }
        Layout::Ffn(variant, hidden) => dense_head(&mut layers, variant.count(), hidden),
        Layout::Cnn(convs, hidden) => {
            let mut channels = crate::encoding::CHANNELS;
            for &(filters, kernel) in convs {
                let conv = LayerSpec::Conv1d {
                    in_channels: channels,
                    filters,
                    kernel,
                };
                block(&mut layers, conv, filters);
                channels = filters;
            }
            layers.push(LayerSpec::GlobalAvgPool);
            dense_head(&mut layers, channels, hidden);
        }
        Layout::Lstm(_, cells, hidden) => {
            let mut width = input_shape[1];
            for (i, &units) in cells.iter().enumerate() {
                let lstm = LayerSpec::Lstm {
                    inputs: width,
                    units,
                    return_sequences: i + 1 < cells.len(),
                    activation,
                };
                block(&mut layers, lstm, units);
                width = units;
            }
            dense_head(&mut layers, width, hidden);
        }
    }
    Ok(NetworkSpec {
        name: name.to_string(),
        input_shape,
        layers,
    })
}
