use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Infant roles for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub test: Vec<String>,
    pub fit: Vec<String>,
    pub validation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
    /// `k = 1`: every infant plays every role (resubstitution smoke run).
    pub resubstitution: bool,
}

/// Number of validation infants drawn from `remaining` non-test infants.
pub fn validation_count(remaining: usize, fraction: f64) -> usize {
    ((remaining as f64 * fraction).round() as usize).max(1)
}

/// Infant-grouped k-fold plan.
///
/// Sorted infant ids are shuffled with `seed` and dealt round-robin into
/// `k` test groups. For each fold the other infants are reshuffled on a
/// fold-specific stream; the first `validation_count` become validation,
/// the rest fit. `k = 1` is a resubstitution smoke plan.
pub fn grouped_kfold<S: AsRef<str>>(infants: &[S], k: usize, seed: u64, validation_fraction: f64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidArgument("fold count must be at least 1".into()));
    }
    let mut ids: Vec<String> = infants
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} infants cannot fill {k} folds",
            ids.len()
        )));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument("validation fraction must be in (0, 1)".into()));
    }
    if k == 1 {
        return Ok(FoldPlan {
            k,
            seed,
            folds: vec![Fold {
                index: 0,
                test: ids.clone(),
                fit: ids.clone(),
                validation: ids,
            }],
            resubstitution: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut groups = vec![Vec::new(); k];
    for (i, id) in ids.iter().enumerate() {
        groups[i % k].push(id.clone());
    }
    let mut folds = Vec::with_capacity(k);
    for (index, test) in groups.iter().enumerate() {
        let mut rest: Vec<String> = groups
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != index)
            .flat_map(|(_, members)| members.iter().cloned())
            .collect();
        rest.sort();
        let n_val = validation_count(rest.len(), validation_fraction);
        if rest.len() <= n_val {
            return Err(Error::InvalidArgument(format!(
                "fold {index}: {} non-test infants cannot provide both fit and validation infants",
                rest.len()
            )));
        }
        let mut fold_rng = ChaCha8Rng::seed_from_u64(seed);
        fold_rng.set_stream(index as u64 + 1);
        rest.shuffle(&mut fold_rng);
        let fit = rest.split_off(n_val);
        folds.push(Fold {
            index,
            test: test.clone(),
            fit,
            validation: rest,
        });
    }
    let plan = FoldPlan {
        k,
        seed,
        folds,
        resubstitution: false,
    };
    plan.check()?;
    Ok(plan)
}

/// Splits infants into fit and validation groups for training a deployable
/// model on a whole dataset: sorted ids shuffled with `seed`, the first
/// `validation_count` become validation.
pub fn holdout_split<S: AsRef<str>>(
    infants: &[S],
    seed: u64,
    validation_fraction: f64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument("validation fraction must be in (0, 1)".into()));
    }
    let mut ids: Vec<String> = infants
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_val = validation_count(ids.len(), validation_fraction);
    if ids.len() <= n_val {
        return Err(Error::InvalidArgument(format!(
            "{} infants cannot provide both fit and validation infants",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fit = ids.split_off(n_val);
    Ok((fit, ids))
}

impl FoldPlan {
    /// Verifies group integrity: roles disjoint within each fold, and each
    /// infant a test infant exactly once.
    pub fn check(&self) -> Result<()> {
        if self.resubstitution {
            return Ok(());
        }
        let mut tested = BTreeSet::new();
        for f in &self.folds {
            let test: BTreeSet<_> = f.test.iter().collect();
            let fit: BTreeSet<_> = f.fit.iter().collect();
            let val: BTreeSet<_> = f.validation.iter().collect();
            if !test.is_disjoint(&fit) || !test.is_disjoint(&val) || !fit.is_disjoint(&val) {
                return Err(Error::InvalidArgument(format!(
                    "fold {}: an infant appears in two roles",
                    f.index
                )));
            }
            for id in &f.test {
                if !tested.insert(id) {
                    return Err(Error::InvalidArgument(format!("infant {id} is tested twice")));
                }
            }
        }
        Ok(())
    }
}
