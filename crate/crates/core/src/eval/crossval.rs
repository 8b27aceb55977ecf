use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ci95_mean, confusion, grouped_kfold, holdout_split, mean, Fold, Metrics};
use crate::data::{Dataset, Label};
use crate::encoding::encode;
use crate::models::{
    build_architecture_with, predict_batch, select_best_network, svm_grid_search, ArchName, SelectionLog, SvmConfig,
    SvmSelection, TrainedModel, NETWORK_RUNS,
};
use crate::nn::{CellActivation, SampleSet, TrainConfig};
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    /// Seeded training runs per fold for networks.
    pub repeats: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub svm: SvmConfig,
    pub svm_selection: SvmSelection,
    pub lstm_activation: CellActivation,
    /// Results do not depend on it, so reports leave it out.
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: NETWORK_RUNS,
            seed: 2023,
            train: TrainConfig::default(),
            svm: SvmConfig::default(),
            svm_selection: SvmSelection::default(),
            lstm_activation: CellActivation::default(),
            execution: Execution::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 || self.repeats == 0 {
            return Err(Error::InvalidArgument("folds and repeats must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Base seed of the network runs in `fold`.
    pub fn fold_seed(&self, fold: usize) -> u64 {
        self.seed.wrapping_add(1000 * (fold as u64 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub snippets: usize,
    pub fm_plus: usize,
    pub fm_minus: usize,
}

impl ClassCounts {
    fn of(labels: &[Label]) -> Self {
        let fm_plus = labels.iter().filter(|l| l.is_positive()).count();
        Self {
            snippets: labels.len(),
            fm_plus,
            fm_minus: labels.len() - fm_plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub infants: Fold,
    pub fit: ClassCounts,
    pub validation: ClassCounts,
    pub test: ClassCounts,
    pub metrics: Metrics,
    pub selection: SelectionLog,
}

/// Fold values of one metric with their mean and 95% interval. Undefined
/// when any fold's value is undefined; the interval needs two folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub values: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub ci95: Option<(f64, f64)>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        let defined: Option<Vec<f64>> = values.iter().copied().collect();
        let (mean, ci95) = match defined {
            Some(v) if !v.is_empty() => (Some(mean(&v)), ci95_mean(&v).ok()),
            _ => (None, None),
        };
        Self { values, mean, ci95 }
    }

    /// Fold values when all are defined.
    pub fn defined(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub architecture: ArchName,
    pub config: CvConfig,
    pub resubstitution: bool,
    pub folds: Vec<FoldReport>,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub balanced_accuracy: MetricSummary,
}

impl CvReport {
    pub fn from_folds(architecture: ArchName, config: CvConfig, resubstitution: bool, folds: Vec<FoldReport>) -> Self {
        let collect =
            |f: fn(&Metrics) -> Option<f64>| MetricSummary::from_values(folds.iter().map(|r| f(&r.metrics)).collect());
        Self {
            architecture,
            sensitivity: collect(|m| m.tpr),
            specificity: collect(|m| m.tnr),
            balanced_accuracy: collect(|m| m.ba),
            config,
            resubstitution,
            folds,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Model inputs for every snippet, in dataset order.
pub fn prepare_inputs(dataset: &Dataset, arch: ArchName, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let input = arch.input();
    par::map(exec, &dataset.snippets, |s| input.prepare(&encode(s)))
        .into_iter()
        .collect()
}

fn subset(arch: ArchName, inputs: &[Vec<f64>], labels: &[Label], members: &[usize]) -> Result<SampleSet> {
    let mut set = SampleSet::new(arch.input().sample_shape());
    for &i in members {
        set.push(&inputs[i], labels[i].as_target())?;
    }
    Ok(set)
}

/// The family's selection protocol: the SVM grid or the best of
/// `config.repeats` seeded network runs, judged on `val`.
fn select_model(
    arch: ArchName,
    config: &CvConfig,
    fit: &SampleSet,
    val: &SampleSet,
    base_seed: u64,
) -> Result<(TrainedModel, SelectionLog)> {
    Ok(match arch.kernel() {
        Some(kind) => {
            let sel = svm_grid_search(fit, val, kind, &config.svm, config.svm_selection, config.execution)?;
            (TrainedModel::Svm(sel.model), sel.log)
        }
        None => {
            let spec = build_architecture_with(arch, config.lstm_activation)?;
            let sel = select_best_network(
                &spec,
                fit,
                val,
                &config.train,
                base_seed,
                config.repeats,
                config.execution,
            )?;
            (TrainedModel::Network(sel.model), sel.log)
        }
    })
}

/// Fits the family's selection protocol on one fold and scores its test set.
pub fn run_fold(
    arch: ArchName,
    config: &CvConfig,
    fold: &Fold,
    infant_of: &[&str],
    inputs: &[Vec<f64>],
    labels: &[Label],
) -> Result<FoldReport> {
    let members = |ids: &[String]| -> Vec<usize> {
        let ids: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        (0..infant_of.len()).filter(|&i| ids.contains(infant_of[i])).collect()
    };
    let (fit_idx, val_idx, test_idx) = (members(&fold.fit), members(&fold.validation), members(&fold.test));
    let fit = subset(arch, inputs, labels, &fit_idx)?;
    let val = subset(arch, inputs, labels, &val_idx)?;
    let counts = |idx: &[usize]| ClassCounts::of(&idx.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    if test_idx.is_empty() {
        return Err(Error::Empty("test portion"));
    }

    let (model, selection) = select_model(arch, config, &fit, &val, config.fold_seed(fold.index))?;
    let test_inputs: Vec<&[f64]> = test_idx.iter().map(|&i| &inputs[i][..]).collect();
    let predicted: Vec<Label> = predict_batch(&model, &test_inputs)?
        .into_iter()
        .map(|p| p.label)
        .collect();
    let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    Ok(FoldReport {
        fold: fold.index,
        infants: fold.clone(),
        fit: counts(&fit_idx),
        validation: counts(&val_idx),
        test: counts(&test_idx),
        metrics: confusion(&predicted, &truth)?,
        selection,
    })
}

/// Infant-grouped cross-validation of one architecture.
pub fn run_crossval(dataset: &Dataset, arch: ArchName, config: &CvConfig) -> Result<CvReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let infants: Vec<&String> = dataset.counts.per_infant.keys().collect();
    let plan = grouped_kfold(&infants, config.folds, config.seed, config.train.validation_fraction)?;
    plan.check()?;
    let inputs = prepare_inputs(dataset, arch, config.execution)?;
    let labels: Vec<Label> = dataset.snippets.iter().map(|s| s.label).collect();
    let infant_of: Vec<&str> = dataset.snippets.iter().map(|s| s.infant_id()).collect();
    let folds = par::try_map_range(config.execution, plan.folds.len(), |f| {
        run_fold(arch, config, &plan.folds[f], &infant_of, &inputs, &labels).map_err(|e| Error::Fold {
            fold: f,
            source: Box::new(e),
        })
    })?;
    Ok(CvReport::from_folds(arch, config.clone(), plan.resubstitution, folds))
}

/// A model fitted on a whole dataset with an infant-level validation split.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: TrainedModel,
    pub selection: SelectionLog,
    pub fit_infants: Vec<String>,
    pub validation_infants: Vec<String>,
    pub fit: ClassCounts,
    pub validation: ClassCounts,
}

/// Trains a deployable model on every snippet of `dataset`, holding out a
/// validation group of infants for early stopping and model selection.
pub fn fit_model(dataset: &Dataset, arch: ArchName, config: &CvConfig) -> Result<FittedModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let infants: Vec<&String> = dataset.counts.per_infant.keys().collect();
    let (fit_infants, validation_infants) = holdout_split(&infants, config.seed, config.train.validation_fraction)?;
    let inputs = prepare_inputs(dataset, arch, config.execution)?;
    let labels: Vec<Label> = dataset.snippets.iter().map(|s| s.label).collect();
    let members = |ids: &[String]| -> Vec<usize> {
        let ids: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        (0..dataset.len())
            .filter(|&i| ids.contains(dataset.snippets[i].infant_id()))
            .collect()
    };
    let (fit_idx, val_idx) = (members(&fit_infants), members(&validation_infants));
    let fit = subset(arch, &inputs, &labels, &fit_idx)?;
    let val = subset(arch, &inputs, &labels, &val_idx)?;
    let (model, selection) = select_model(arch, config, &fit, &val, config.seed)?;
    let counts = |idx: &[usize]| ClassCounts::of(&idx.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    Ok(FittedModel {
        model,
        selection,
        fit: counts(&fit_idx),
        validation: counts(&val_idx),
        fit_infants,
        validation_infants,
    })
}

/// Test-set label totals per fold, keyed by fold index.
pub fn test_totals(report: &CvReport) -> BTreeMap<usize, ClassCounts> {
    report.folds.iter().map(|f| (f.fold, f.test)).collect()
}
