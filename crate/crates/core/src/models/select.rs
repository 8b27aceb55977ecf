use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{svm_train, Kernel, KernelKind, SvmConfig, SvmModel};
use crate::data::Label;
use crate::nn::{train, NetworkSpec, SampleSet, TrainConfig, TrainedNet};
use crate::par::{self, Execution};
use crate::{Error, Result};

pub const C_GRID: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];
pub const GAMMA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const NETWORK_RUNS: usize = 20;

/// Validation score used to pick an SVM grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmSelection {
    #[default]
    Accuracy,
    BalancedAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MaxAccuracy,
    MaxBalancedAccuracy,
    MinLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionLog {
    pub criterion: Criterion,
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<M> {
    pub model: M,
    pub log: SelectionLog,
}

/// The grid in C-major order.
pub fn svm_grid() -> Vec<(f64, f64)> {
    C_GRID
        .iter()
        .flat_map(|&c| GAMMA_GRID.iter().map(move |&g| (c, g)))
        .collect()
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_max_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] || scores[best].is_nan() && !s.is_nan() {
            best = i;
        }
    }
    best
}

/// Index of the lowest loss; ties go to the lowest index, NaN never wins
/// over a number.
pub fn select_min_loss(losses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] || losses[best].is_nan() && !l.is_nan() {
            best = i;
        }
    }
    best
}

fn is_positive(target: f64) -> bool {
    target > 0.5
}

/// Plain or balanced accuracy of `predicted` against the set's targets.
/// Balanced accuracy averages only the class rates that are defined.
fn score(predicted: &[Label], set: &SampleSet, metric: SvmSelection) -> f64 {
    let mut counts = [[0usize; 2]; 2];
    for (p, &t) in predicted.iter().zip(set.targets()) {
        counts[is_positive(t) as usize][p.is_positive() as usize] += 1;
    }
    let correct = counts[0][0] + counts[1][1];
    match metric {
        SvmSelection::Accuracy => correct as f64 / predicted.len() as f64,
        SvmSelection::BalancedAccuracy => {
            let rates: Vec<f64> = (0..2)
                .filter(|&c| counts[c][0] + counts[c][1] > 0)
                .map(|c| counts[c][c] as f64 / (counts[c][0] + counts[c][1]) as f64)
                .collect();
            rates.iter().sum::<f64>() / rates.len() as f64
        }
    }
}

/// Trains every `(C, γ)` cell on `fit` and keeps the best on `val`.
pub fn svm_grid_search(
    fit: &SampleSet,
    val: &SampleSet,
    kind: KernelKind,
    config: &SvmConfig,
    selection: SvmSelection,
    exec: Execution,
) -> Result<SelectionResult<SvmModel>> {
    if val.is_empty() {
        return Err(Error::Empty("validation portion"));
    }
    let grid = svm_grid();
    let mut models = par::try_map_range(exec, grid.len(), |i| {
        let (c, gamma) = grid[i];
        let model = svm_train(fit, c, Kernel::new(kind, gamma)?, config)?;
        let predicted: Vec<Label> = (0..val.len()).map(|k| model.predict(val.input(k))).collect();
        Ok::<_, Error>((model, score(&predicted, val, selection)))
    })?;
    let scores: Vec<f64> = models.iter().map(|(_, s)| *s).collect();
    let chosen = select_max_score(&scores);
    let candidates = grid
        .iter()
        .zip(&scores)
        .map(|(&(c, g), &score)| Candidate {
            id: format!("C={c} gamma={g}"),
            score,
        })
        .collect();
    Ok(SelectionResult {
        model: models.swap_remove(chosen).0,
        log: SelectionLog {
            criterion: match selection {
                SvmSelection::Accuracy => Criterion::MaxAccuracy,
                SvmSelection::BalancedAccuracy => Criterion::MaxBalancedAccuracy,
            },
            candidates,
            chosen,
        },
    })
}

/// Keeps the candidate network with the lowest validation loss.
pub fn select_network(mut runs: Vec<TrainedNet>) -> Result<SelectionResult<TrainedNet>> {
    if runs.is_empty() {
        return Err(Error::Empty("network runs"));
    }
    let losses: Vec<f64> = runs.iter().map(|r| r.validation_loss).collect();
    let chosen = select_min_loss(&losses);
    let candidates = runs
        .iter()
        .map(|r| Candidate {
            id: format!("seed={}", r.seed),
            score: r.validation_loss,
        })
        .collect();
    Ok(SelectionResult {
        model: runs.swap_remove(chosen),
        log: SelectionLog {
            criterion: Criterion::MinLoss,
            candidates,
            chosen,
        },
    })
}

/// Trains `runs` networks with seeds `base_seed + i` and keeps the one
/// with the lowest validation loss.
pub fn select_best_network(
    spec: &NetworkSpec,
    fit: &SampleSet,
    val: &SampleSet,
    config: &TrainConfig,
    base_seed: u64,
    runs: usize,
    exec: Execution,
) -> Result<SelectionResult<TrainedNet>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("at least one training run is required".into()));
    }
    let trained = par::try_map_range(exec, runs, |i| {
        let cfg = TrainConfig {
            seed: base_seed.wrapping_add(i as u64),
            ..config.clone()
        };
        train(spec, fit, val, &cfg)
    })?;
    select_network(trained)
}

/// A fitted classifier of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(SvmModel),
    Network(TrainedNet),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Probability for networks, signed margin for SVMs.
    pub score: f64,
    pub label: Label,
}

pub fn class_from_probability(p: f64) -> Label {
    if p >= 0.5 {
        Label::FmPlus
    } else {
        Label::FmMinus
    }
}

pub fn class_from_margin(m: f64) -> Label {
    if m >= 0.0 {
        Label::FmPlus
    } else {
        Label::FmMinus
    }
}

/// Predicts one prepared input vector.
pub fn predict(model: &TrainedModel, input: &[f64]) -> Result<Prediction> {
    Ok(predict_batch(model, &[input])?[0])
}

/// Predicts a batch of prepared input vectors.
pub fn predict_batch(model: &TrainedModel, inputs: &[&[f64]]) -> Result<Vec<Prediction>> {
    match model {
        TrainedModel::Svm(svm) => {
            let dim = svm
                .standardizer
                .as_ref()
                .map(|s| s.mean.len())
                .or_else(|| svm.support_vectors.first().map(Vec::len));
            inputs
                .iter()
                .map(|x| {
                    if dim.is_some_and(|d| d != x.len()) {
                        return Err(Error::Shape(format!(
                            "SVM expects {} features, got {}",
                            dim.unwrap(),
                            x.len()
                        )));
                    }
                    let score = svm.decision(x);
                    Ok(Prediction {
                        score,
                        label: class_from_margin(score),
                    })
                })
                .collect()
        }
        TrainedModel::Network(net) => {
            let spec = net.network.spec();
            let mut set = SampleSet::new(spec.input_shape.clone());
            for x in inputs {
                set.push(x, 0.0)?;
            }
            let mut out = Vec::with_capacity(inputs.len());
            let idx: Vec<usize> = (0..set.len()).collect();
            for chunk in idx.chunks(128) {
                let (x, _) = set.batch(chunk);
                out.extend(net.network.predict_proba(&x)?.into_iter().map(|p| Prediction {
                    score: p,
                    label: class_from_probability(p),
                }));
            }
            Ok(out)
        }
    }
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::Svm(m) => m.save(path),
            TrainedModel::Network(m) => m.save(path),
        }
    }

    /// Loads either model kind, dispatching on the header's format tag.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFormat("missing header line".into()))?;
        #[derive(Deserialize)]
        struct Tag {
            format: String,
        }
        let tag: Tag = serde_json::from_slice(&bytes[..end])?;
        match tag.format.as_str() {
            "pmat-svm" => Ok(TrainedModel::Svm(SvmModel::read_from(&bytes[..])?)),
            "pmat-net" => Ok(TrainedModel::Network(TrainedNet::read_from(&bytes[..])?)),
            other => Err(Error::ModelFormat(format!("unknown model format {other:?}"))),
        }
    }
}
