use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::layer::{self, Cache, LayerSpec};
use super::{bce_grad, bce_loss, Tensor};
use crate::{Error, Result};

/// Structural description of a network: per-sample input shape and the
/// ordered layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Per-sample shapes after each layer; the first entry is the input.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Trainable weights excluding batch-norm gain and shift.
    pub fn weight_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !matches!(l, LayerSpec::BatchNorm { .. }))
            .map(LayerSpec::param_count)
            .sum()
    }

    pub fn state_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::state_count).sum()
    }

    pub fn sample_len(&self) -> usize {
        self.input_shape.iter().product()
    }
}

/// Recorded intermediates of one training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    batch: usize,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// A network spec with its flat parameter and state vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<f64>,
    state: Vec<f64>,
    offsets: Vec<(usize, usize)>,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        for (layer, &(p, s)) in net.spec.layers.iter().zip(&net.offsets) {
            let (np, ns) = (layer.param_count(), layer.state_count());
            layer.init_params(&mut net.params[p..p + np], &mut net.state[s..s + ns], rng);
        }
        Ok(net)
    }

    /// All weights zero; batch-norm gain 1 and running variance 1.
    pub fn zeroed(spec: NetworkSpec) -> Result<Self> {
        spec.shapes()?;
        let mut offsets = Vec::with_capacity(spec.layers.len());
        let (mut p, mut s) = (0, 0);
        for layer in &spec.layers {
            offsets.push((p, s));
            p += layer.param_count();
            s += layer.state_count();
        }
        let mut params = vec![0.0; p];
        let mut state = vec![0.0; s];
        for (layer, &(po, so)) in spec.layers.iter().zip(&offsets) {
            if let LayerSpec::BatchNorm { features } = *layer {
                params[po..po + features].fill(1.0);
                state[so + features..so + 2 * features].fill(1.0);
            }
        }
        Ok(Self {
            spec,
            params,
            state,
            offsets,
        })
    }

    pub fn from_parts(spec: NetworkSpec, params: Vec<f64>, state: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        if params.len() != net.params.len() || state.len() != net.state.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} parameters and {} state values, got {} and {}",
                net.params.len(),
                net.state.len(),
                params.len(),
                state.len()
            )));
        }
        net.params = params;
        net.state = state;
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [f64] {
        &mut self.state
    }

    /// Parameter slice of layer `index`.
    pub fn layer_params(&self, index: usize) -> &[f64] {
        let p = self.offsets[index].0;
        &self.params[p..p + self.spec.layers[index].param_count()]
    }

    pub fn layer_params_mut(&mut self, index: usize) -> &mut [f64] {
        let p = self.offsets[index].0;
        let n = self.spec.layers[index].param_count();
        &mut self.params[p..p + n]
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let shape = batch.shape();
        if shape.len() != self.spec.input_shape.len() + 1 || shape[1..] != self.spec.input_shape[..] {
            return Err(Error::Shape(format!(
                "{}: batch shape {shape:?} does not match input {:?}",
                self.spec.name, self.spec.input_shape
            )));
        }
        Ok(())
    }

    fn run(&self, batch: Tensor, mut rng: Option<&mut dyn RngCore>) -> (Tensor, Vec<Cache>) {
        let mut x = batch;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        for (layer, &(p, s)) in self.spec.layers.iter().zip(&self.offsets) {
            let params = &self.params[p..p + layer.param_count()];
            let state = &self.state[s..s + layer.state_count()];
            let r: Option<&mut dyn RngCore> = match rng {
                Some(ref mut r) => Some(&mut **r),
                None => None,
            };
            let (y, cache) = layer::forward(layer, params, state, x, r);
            caches.push(cache);
            x = y;
        }
        (x, caches)
    }

    /// Inference: dropout disabled, batch norm uses running statistics.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        Ok(self.run(batch.clone(), None).0)
    }

    /// Per-sample output probabilities at inference.
    pub fn predict_proba(&self, batch: &Tensor) -> Result<Vec<f64>> {
        Ok(self.infer(batch)?.into_data())
    }

    /// Training-mode forward pass. Does not touch running statistics; see
    /// [`Network::apply_batch_stats`].
    pub fn forward_train(&self, batch: &Tensor, rng: &mut dyn RngCore) -> Result<(Tensor, Tape)> {
        self.check_batch(batch)?;
        let (y, caches) = self.run(batch.clone(), Some(rng));
        Ok((
            y,
            Tape {
                caches,
                batch: batch.batch(),
            },
        ))
    }

    /// Gradient of the scalar objective with respect to every parameter,
    /// given its gradient with respect to the network output.
    pub fn backward(&self, tape: &Tape, grad_output: Tensor) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let mut dy = grad_output;
        for ((layer, &(p, _)), cache) in self.spec.layers.iter().zip(&self.offsets).zip(&tape.caches).rev() {
            let n = layer.param_count();
            dy = layer::backward(layer, &self.params[p..p + n], cache, dy, &mut grads[p..p + n]);
        }
        grads
    }

    /// Folds the batch statistics recorded in `tape` into the running
    /// batch-norm statistics.
    pub fn apply_batch_stats(&mut self, tape: &Tape) {
        for ((layer, &(_, s)), cache) in self.spec.layers.iter().zip(&self.offsets).zip(&tape.caches) {
            let n = layer.state_count();
            layer::update_running_stats(layer, &mut self.state[s..s + n], cache);
        }
    }

    /// Training-mode loss and parameter gradients for one mini-batch.
    pub fn loss_and_grad(
        &self,
        batch: &Tensor,
        labels: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<(f64, Vec<f64>, Tape)> {
        let (out, tape) = self.forward_train(batch, rng)?;
        if out.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} outputs for {} labels",
                out.len(),
                labels.len()
            )));
        }
        let loss = bce_loss(out.data(), labels);
        let grad = Tensor::from_parts(out.shape().to_vec(), bce_grad(out.data(), labels));
        let grads = self.backward(&tape, grad);
        Ok((loss, grads, tape))
    }
}
