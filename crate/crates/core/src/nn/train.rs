use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, bce_loss, AdamState, Network, NetworkSpec, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            batch_size: 4,
            patience: 10,
            validation_fraction: 1.0 / 6.0,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.epsilon]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        let betas = [self.beta1, self.beta2].iter().all(|b| (0.0..1.0).contains(b));
        if !positive || !betas {
            return Err(Error::InvalidArgument("optimizer settings out of range".into()));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, patience and max_epochs must be positive".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument("validation_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Inputs of identical per-sample shape with binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    sample_shape: Vec<usize>,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl SampleSet {
    pub fn new(sample_shape: Vec<usize>) -> Self {
        Self {
            sample_shape,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], target: f64) -> Result<()> {
        let n: usize = self.sample_shape.iter().product();
        if input.len() != n {
            return Err(Error::Shape(format!(
                "sample of {} values for shape {:?}",
                input.len(),
                self.sample_shape
            )));
        }
        self.inputs.extend_from_slice(input);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn input(&self, index: usize) -> &[f64] {
        let n: usize = self.sample_shape.iter().product();
        &self.inputs[index * n..(index + 1) * n]
    }

    /// Stacks the selected samples into one batch tensor.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<f64>) {
        let n: usize = self.sample_shape.iter().product();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.input(i));
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        (Tensor::from_parts(shape, data), targets)
    }

    pub fn all(&self) -> (Tensor, Vec<f64>) {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based stopping on strictly improving validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Records the loss for `epoch`. Non-finite losses never count as an
    /// improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::NoImprovement
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// A trained network with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet {
    pub network: Network,
    pub architecture: String,
    /// Validation loss of the restored epoch.
    pub validation_loss: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub seed: u64,
    pub config: TrainConfig,
    /// Mini-batches whose gradient was non-finite and therefore skipped.
    pub skipped_steps: usize,
}

/// Mean inference loss over the whole set.
pub fn evaluate_loss(net: &Network, set: &SampleSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut probs = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(128) {
        let (x, _) = set.batch(chunk);
        probs.extend(net.predict_proba(&x)?);
    }
    Ok(bce_loss(&probs, set.targets()))
}

/// Trains a freshly initialised network seeded by `config.seed`.
pub fn train(spec: &NetworkSpec, fit: &SampleSet, val: &SampleSet, config: &TrainConfig) -> Result<TrainedNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = Network::new(spec.clone(), &mut rng)?;
    train_from(net, fit, val, config, rng)
}

/// Trains starting from the given weights.
pub fn train_with_init(net: Network, fit: &SampleSet, val: &SampleSet, config: &TrainConfig) -> Result<TrainedNet> {
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_from(net, fit, val, config, rng)
}

fn train_from(
    mut net: Network,
    fit: &SampleSet,
    val: &SampleSet,
    config: &TrainConfig,
    mut rng: ChaCha8Rng,
) -> Result<TrainedNet> {
    config.validate()?;
    if fit.is_empty() {
        return Err(Error::Empty("fit portion"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation portion"));
    }
    let mut adam = AdamState::new(net.params().len());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<Network> = None;
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut epochs_run = 0;
    let mut skipped_steps = 0;
    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let (x, y) = fit.batch(chunk);
            let (_, grads, tape) = net.loss_and_grad(&x, &y, &mut rng)?;
            if grads.iter().any(|g| !g.is_finite()) {
                skipped_steps += 1;
                continue;
            }
            adam_step(net.params_mut(), &grads, &mut adam, config);
            net.apply_batch_stats(&tape);
        }
        let loss = evaluate_loss(&net, val)?;
        match stopper.observe(epoch, loss) {
            StopDecision::Improved => best = Some(net.clone()),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => break,
        }
    }
    let (network, validation_loss, best_epoch) = match best {
        Some(b) => (b, stopper.best(), stopper.best_epoch()),
        None => (net, f64::MAX, epochs_run),
    };
    Ok(TrainedNet {
        architecture: network.spec().name.clone(),
        network,
        validation_loss,
        epochs_run,
        best_epoch,
        seed: config.seed,
        config: config.clone(),
        skipped_steps,
    })
}

const NET_FORMAT: &str = "pmat-net";

#[derive(Serialize, Deserialize)]
struct NetHeader {
    format: String,
    version: u32,
    architecture: String,
    seed: u64,
    config: TrainConfig,
    epochs_run: usize,
    best_epoch: usize,
    validation_loss: f64,
    skipped_steps: usize,
    param_count: usize,
    state_count: usize,
    spec: NetworkSpec,
}

pub(crate) fn write_f64s<W: Write>(sink: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(source: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    source
        .read_exact(&mut buf)
        .map_err(|_| Error::ModelFormat(format!("payload shorter than {n} values")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Reads the single JSON header line of a model file.
pub(crate) fn read_header_line<R: BufRead>(source: &mut R) -> Result<String> {
    let mut line = Vec::new();
    source.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::ModelFormat("missing header line".into()));
    }
    line.pop();
    String::from_utf8(line).map_err(|_| Error::ModelFormat("header is not UTF-8".into()))
}

impl TrainedNet {
    /// One JSON header line, then parameters and running statistics as
    /// little-endian `f64` in layer order.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        let header = NetHeader {
            format: NET_FORMAT.into(),
            version: 1,
            architecture: self.architecture.clone(),
            seed: self.seed,
            config: self.config.clone(),
            epochs_run: self.epochs_run,
            best_epoch: self.best_epoch,
            validation_loss: self.validation_loss,
            skipped_steps: self.skipped_steps,
            param_count: self.network.params().len(),
            state_count: self.network.state().len(),
            spec: self.network.spec().clone(),
        };
        serde_json::to_writer(&mut sink, &header)?;
        sink.write_all(b"\n")?;
        write_f64s(&mut sink, self.network.params())?;
        write_f64s(&mut sink, self.network.state())?;
        Ok(())
    }

    pub fn read_from<R: Read>(source: R) -> Result<Self> {
        let mut source = BufReader::new(source);
        let header: NetHeader = serde_json::from_str(&read_header_line(&mut source)?)?;
        if header.format != NET_FORMAT || header.version != 1 {
            return Err(Error::ModelFormat(format!(
                "not a network file ({} v{})",
                header.format, header.version
            )));
        }
        let params = read_f64s(&mut source, header.param_count)?;
        let state = read_f64s(&mut source, header.state_count)?;
        let mut rest = Vec::new();
        source.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::ModelFormat("trailing bytes after payload".into()));
        }
        Ok(Self {
            network: Network::from_parts(header.spec, params, state)?,
            architecture: header.architecture,
            validation_loss: header.validation_loss,
            epochs_run: header.epochs_run,
            best_epoch: header.best_epoch,
            seed: header.seed,
            config: header.config,
            skipped_steps: header.skipped_steps,
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
