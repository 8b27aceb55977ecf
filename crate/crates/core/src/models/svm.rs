//! Soft-margin kernel SVM trained by sequential minimal optimization with
//! second-order working-set selection.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Kernel;
use crate::data::Label;
use crate::nn::SampleSet;
use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    /// Iteration cap is `max_passes · n²`, at least one million.
    pub max_passes: usize,
    /// z-score features with training-set statistics.
    pub standardize: bool,
    /// Offset of the polynomial kernel.
    pub coef0: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_passes: 10,
            standardize: true,
            coef0: 0.0,
        }
    }
}

/// Per-feature `(x − mean) / std`, with zero deviations treated as one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(set: &SampleSet) -> Self {
        let d = set.sample_shape().iter().product();
        let n = set.len() as f64;
        let mut mean = vec![0.0; d];
        for i in 0..set.len() {
            for (m, v) in mean.iter_mut().zip(set.input(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..set.len() {
            for ((s, v), m) in var.iter_mut().zip(set.input(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub standardizer: Option<Standardizer>,
    /// Support vectors in the (possibly standardized) training space.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    /// Training-set index of each support vector.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    /// Signed margin; FM+ iff non-negative.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let z;
        let x = match &self.standardizer {
            Some(s) => {
                z = s.apply(x);
                &z[..]
            }
            None => x,
        };
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision(x) >= 0.0 {
            Label::FmPlus
        } else {
            Label::FmMinus
        }
    }

    /// Full dual vector `α` over the `n` training points.
    pub fn alphas(&self, n: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; n];
        for (&i, &a) in self.support_indices.iter().zip(&self.dual_coef) {
            alpha[i] = a.abs();
        }
        alpha
    }
}

fn sign(target: f64) -> f64 {
    if target > 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Objective `½ αᵀQα − Σα` of the dual, minimised by training.
pub fn dual_objective(set: &SampleSet, kernel: &Kernel, alpha: &[f64]) -> f64 {
    let n = set.len();
    let y: Vec<f64> = set.targets().iter().map(|&t| sign(t)).collect();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel.eval(set.input(i), set.input(j));
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Trains on `set` (targets 1 = FM+, 0 = FM−). With `config.standardize`
/// the kernel sees z-scored features and the model stores the transform.
pub fn svm_train(set: &SampleSet, c: f64, kernel: Kernel, config: &SvmConfig) -> Result<SvmModel> {
    kernel.kind.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let n = set.len();
    if n == 0 {
        return Err(Error::Empty("SVM training set"));
    }
    let y: Vec<f64> = set.targets().iter().map(|&t| sign(t)).collect();
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let standardizer = config.standardize.then(|| Standardizer::fit(set));
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| match &standardizer {
            Some(s) => s.apply(set.input(i)),
            None => set.input(i).to_vec(),
        })
        .collect();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = kernel.eval(&x[i], &x[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let k = |i: usize, j: usize| gram[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = (config.max_passes.max(1) * n * n).max(1_000_000);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violating index in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let allowed = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if allowed && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let allowed = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
                if !allowed {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let b = gmax + v;
                if b > 0.0 {
                    let a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= config.tolerance => (i, j),
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let quad = (k(i, i) + k(j, j) + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k(i, i) + k(j, j) - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    // Bias from free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    let mut support_indices = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coef.push(alpha[t] * y[t]);
            support_indices.push(t);
        }
    }
    Ok(SvmModel {
        kernel: Kernel {
            coef0: config.coef0,
            ..kernel
        },
        c,
        standardizer,
        support_vectors,
        dual_coef,
        support_indices,
        bias: -rho,
        iterations,
        converged,
    })
}

const SVM_FORMAT: &str = "pmat-svm";

#[derive(Serialize, Deserialize)]
struct SvmHeader {
    format: String,
    version: u32,
    kernel: Kernel,
    c: f64,
    bias: f64,
    standardizer: Option<Standardizer>,
    support_indices: Vec<usize>,
    dimension: usize,
    iterations: usize,
    converged: bool,
}

impl SvmModel {
    /// One JSON header line, then the support-vector matrix and the dual
    /// coefficients as little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        let dimension = self.support_vectors.first().map_or(0, Vec::len);
        let header = SvmHeader {
            format: SVM_FORMAT.into(),
            version: 1,
            kernel: self.kernel,
            c: self.c,
            bias: self.bias,
            standardizer: self.standardizer.clone(),
            support_indices: self.support_indices.clone(),
            dimension,
            iterations: self.iterations,
            converged: self.converged,
        };
        serde_json::to_writer(&mut sink, &header)?;
        sink.write_all(b"\n")?;
        for sv in &self.support_vectors {
            crate::nn::write_f64s(&mut sink, sv)?;
        }
        crate::nn::write_f64s(&mut sink, &self.dual_coef)?;
        Ok(())
    }

    pub fn read_from<R: Read>(source: R) -> Result<Self> {
        let mut source = BufReader::new(source);
        let header: SvmHeader = serde_json::from_str(&crate::nn::read_header_line(&mut source)?)?;
        if header.format != SVM_FORMAT || header.version != 1 {
            return Err(Error::ModelFormat(format!(
                "not an SVM file ({} v{})",
                header.format, header.version
            )));
        }
        let n_sv = header.support_indices.len();
        let mut support_vectors = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            support_vectors.push(crate::nn::read_f64s(&mut source, header.dimension)?);
        }
        let dual_coef = crate::nn::read_f64s(&mut source, n_sv)?;
        let mut rest = Vec::new();
        source.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::ModelFormat("trailing bytes after payload".into()));
        }
        Ok(Self {
            kernel: header.kernel,
            c: header.c,
            standardizer: header.standardizer,
            support_vectors,
            dual_coef,
            support_indices: header.support_indices,
            bias: header.bias,
            iterations: header.iterations,
            converged: header.converged,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(file)
    }
}
