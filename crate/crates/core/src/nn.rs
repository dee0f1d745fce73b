//! Dense feedforward network with reverse-mode gradients and plain SGD.
//!
//! This is the shared tower of the Siamese architecture: a stack of affine
//! layers with ReLU activations and a linear output layer, plus a scalar
//! `log_alpha` whose exponential scales the network's pairwise distance
//! output. Weights are row-major `(out_dim, in_dim)` and everything is `f64`
//! so gradient checks against finite differences are meaningful.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{axpy, dot};
use crate::persist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Row-major (out_dim, in_dim).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// The tower `f` of the Siamese pair: weights, biases, and the log of the
/// trainable distance scale (alpha = exp(log_alpha), positive by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub log_alpha: f64,
    /// Seed used at initialization, carried along for provenance.
    pub seed: u64,
}

/// Per-layer gradients, shape-congruent with the model they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_log_alpha: f64,
}

impl GradientSet {
    pub fn zeros_like(model: &MlpModel) -> Self {
        GradientSet {
            d_weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: model.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            d_log_alpha: 0.0,
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.d_weights {
            w.fill(0.0);
        }
        for b in &mut self.d_biases {
            b.fill(0.0);
        }
        self.d_log_alpha = 0.0;
    }

    /// self += coeff * other
    pub fn accumulate(&mut self, other: &GradientSet, coeff: f64) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            axpy(coeff, b, a);
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            axpy(coeff, b, a);
        }
        self.d_log_alpha += coeff * other.d_log_alpha;
    }

    pub fn is_all_zero(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|&x| x == 0.0))
            && self.d_biases.iter().all(|b| b.iter().all(|&x| x == 0.0))
            && self.d_log_alpha == 0.0
    }
}

/// Activation record from one forward pass; everything backprop needs.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input, `activations[i]` the output of layer i-1.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation values of each layer.
    pub preacts: Vec<Vec<f64>>,
}

/// Plain SGD with l2 weight decay on the weight matrices only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-3,
            l2_lambda: 1e-6,
            batch_size: 256,
            epochs: 100,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.l2_lambda < 0.0 {
            return Err(Error::InvalidConfig("l2_lambda must be >= 0".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch_size must be >= 2 for pairwise losses".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// He-style fan-in uniform init for a ReLU stack: weights ~ U(-sqrt(6/fan_in), +),
/// biases zero, log_alpha zero. Deterministic for a given seed.
pub fn init_model(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least an input and an output dimension".into(),
        ));
    }
    if let Some(&d) = layer_dims.iter().find(|&&d| d == 0) {
        return Err(Error::InvalidConfig(format!("layer dimension {d} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = layer_dims.len() - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (in_dim, out_dim) = (layer_dims[i], layer_dims[i + 1]);
        let limit = (6.0 / in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let weights: Vec<f64> = (0..in_dim * out_dim).map(|_| dist.sample(&mut rng)).collect();
        let activation = if i + 1 == n_layers { Activation::Linear } else { Activation::Relu };
        layers.push(Layer {
            in_dim,
            out_dim,
            activation,
            weights,
            biases: vec![0.0; out_dim],
        });
    }
    Ok(MlpModel { layers, log_alpha: 0.0, seed })
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum::<usize>() + 1
    }

    /// Forward pass returning the output and the activation tape.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut preacts = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut z = vec![0.0; layer.out_dim];
            for o in 0..layer.out_dim {
                z[o] = dot(layer.row(o), prev) + layer.biases[o];
            }
            let a = match layer.activation {
                Activation::Relu => z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
                Activation::Linear => z.clone(),
            };
            preacts.push(z);
            activations.push(a);
        }
        let y = activations.last().unwrap().clone();
        Ok((y, Tape { activations, preacts }))
    }

    /// Forward pass without a tape, for inference.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.out_dim];
            for o in 0..layer.out_dim {
                let v = dot(layer.row(o), &cur) + layer.biases[o];
                next[o] = match layer.activation {
                    Activation::Relu => {
                        if v > 0.0 {
                            v
                        } else {
                            0.0
                        }
                    }
                    Activation::Linear => v,
                };
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Reverse-mode gradients of a scalar loss given d(loss)/d(output).
    ///
    /// The ReLU subgradient at exactly zero is taken as zero. `d_log_alpha`
    /// is left at zero; the loss functions own that term.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.backward_into(tape, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but accumulates into `grads`.
    pub fn backward_into(&self, tape: &Tape, upstream: &[f64], grads: &mut GradientSet) -> Result<()> {
        if tape.activations.len() != self.layers.len() + 1 || tape.preacts.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("tape does not match model depth".into()));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream has {} entries, model output is {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &tape.preacts[i];
            if z.len() != layer.out_dim || tape.activations[i].len() != layer.in_dim {
                return Err(Error::ShapeMismatch(format!("tape shape differs from layer {i}")));
            }
            if layer.activation == Activation::Relu {
                for (d, &zv) in delta.iter_mut().zip(z) {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let prev = &tape.activations[i];
            let dw = &mut grads.d_weights[i];
            for o in 0..layer.out_dim {
                axpy(delta[o], prev, &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim]);
            }
            axpy(1.0, &delta, &mut grads.d_biases[i]);
            if i > 0 {
                let mut prev_delta = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    axpy(delta[o], layer.row(o), &mut prev_delta);
                }
                delta = prev_delta;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        persist::write_u32(w, CHECKPOINT_VERSION)?;
        persist::write_u64(w, self.seed)?;
        persist::write_f64(w, self.log_alpha)?;
        persist::write_u32(w, self.layers.len() as u32)?;
        for layer in &self.layers {
            persist::write_u32(w, layer.in_dim as u32)?;
            persist::write_u32(w, layer.out_dim as u32)?;
            persist::write_u8(w, match layer.activation {
                Activation::Relu => 0,
                Activation::Linear => 1,
            })?;
            persist::write_f64_slice(w, &layer.weights)?;
            persist::write_f64_slice(w, &layer.biases)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MlpModel> {
        let mut r = BufReader::new(File::open(path)?);
        persist::expect_magic(&mut r, CHECKPOINT_MAGIC)?;
        let version = persist::read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let seed = persist::read_u64(&mut r)?;
        let log_alpha = persist::read_f64(&mut r)?;
        let n_layers = persist::read_u32(&mut r)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        let mut prev_out = None;
        for i in 0..n_layers {
            let in_dim = persist::read_u32(&mut r)? as usize;
            let out_dim = persist::read_u32(&mut r)? as usize;
            if in_dim == 0 || out_dim == 0 {
                return Err(Error::Format(format!("layer {i} has a zero dimension")));
            }
            if let Some(p) = prev_out {
                if p != in_dim {
                    return Err(Error::Format(format!(
                        "layer {i} in_dim {in_dim} breaks the chain from {p}"
                    )));
                }
            }
            prev_out = Some(out_dim);
            let activation = match persist::read_u8(&mut r)? {
                0 => Activation::Relu,
                1 => Activation::Linear,
                other => return Err(Error::Format(format!("unknown activation tag {other}"))),
            };
            let weights = persist::read_f64_vec(&mut r, in_dim * out_dim)?;
            let biases = persist::read_f64_vec(&mut r, out_dim)?;
            layers.push(Layer { in_dim, out_dim, activation, weights, biases });
        }
        Ok(MlpModel { layers, log_alpha, seed })
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CSICHKP1";
const CHECKPOINT_VERSION: u32 = 1;

/// One SGD update: `W <- W - lr * (dW + l2 * W)`. Biases and log_alpha carry
/// no decay term.
pub fn sgd_step(model: &mut MlpModel, grads: &GradientSet, cfg: &SgdConfig) -> Result<()> {
    if grads.d_weights.len() != model.layers.len() {
        return Err(Error::ShapeMismatch("gradient set does not match model depth".into()));
    }
    let lr = cfg.learning_rate;
    for (layer, (dw, db)) in model
        .layers
        .iter_mut()
        .zip(grads.d_weights.iter().zip(&grads.d_biases))
    {
        if dw.len() != layer.weights.len() || db.len() != layer.biases.len() {
            return Err(Error::ShapeMismatch("gradient tensor shape differs from layer".into()));
        }
        for (w, g) in layer.weights.iter_mut().zip(dw) {
            *w -= lr * (g + cfg.l2_lambda * *w);
        }
        for (b, g) in layer.biases.iter_mut().zip(db) {
            *b -= lr * g;
        }
    }
    model.log_alpha -= lr * grads.d_log_alpha;
    Ok(())
}
