//! Pairwise distance-matching objective, anchor regression terms, and the
//! training loop for all three supervision regimes.
//!
//! Training a weight-shared tower on all pairs of a batch minimizes
//!
//! ```text
//! sum_{n<m} w_{n,m} * (||x_n - x_m|| - alpha * ||f(x_n) - f(x_m)||)^2
//! ```
//!
//! with `w_{n,m} = ||x_n - x_m||^{-1}` so dissimilar pairs are de-weighted.
//! Every norm is replaced by the smooth approximation
//! `sqrt(||v||^2 + epsilon)`, which keeps the gradient defined at coincident
//! points and the weights bounded by `epsilon^{-1/2}`.
//!
//! Anchored samples additionally contribute `||f(x_n) - y_n||^2` regression
//! terms against known positions. The distance scale `alpha` is trained only
//! in the semisupervised regime, where it reconciles feature-space distance
//! units with position-space units; in the other regimes it stays frozen
//! (the tower can absorb any fixed scale).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math::axpy;
use crate::nn::{sgd_step, GradientSet, MlpModel, SgdConfig, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supervised,
    Semisupervised,
    Unsupervised,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Supervised => write!(f, "supervised"),
            Regime::Semisupervised => write!(f, "semisupervised"),
            Regime::Unsupervised => write!(f, "unsupervised"),
        }
    }
}

/// Loss term weights. Both terms are normalized means (over anchored samples
/// and over pairs) so the lambdas stay scale-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub epsilon: f64,
    pub anchor_weight: f64,
    pub pairwise_weight: f64,
    pub regime: Regime,
}

impl LossConfig {
    pub fn supervised() -> LossConfig {
        LossConfig {
            epsilon: 1e-6,
            anchor_weight: 1.0,
            pairwise_weight: 0.0,
            regime: Regime::Supervised,
        }
    }

    pub fn semisupervised() -> LossConfig {
        LossConfig {
            epsilon: 1e-6,
            anchor_weight: 1.0,
            pairwise_weight: 1.0,
            regime: Regime::Semisupervised,
        }
    }

    pub fn unsupervised() -> LossConfig {
        LossConfig {
            epsilon: 1e-6,
            anchor_weight: 0.0,
            pairwise_weight: 1.0,
            regime: Regime::Unsupervised,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        if self.anchor_weight < 0.0 || self.pairwise_weight < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        if self.regime == Regime::Unsupervised && self.anchor_weight > 0.0 {
            return Err(Error::InvalidConfig(
                "unsupervised training cannot carry an anchor term".into(),
            ));
        }
        Ok(())
    }

    fn alpha_trainable(&self) -> bool {
        self.regime == Regime::Semisupervised
    }
}

/// Smooth norm `sqrt(sum v_i^2 + epsilon)`, differentiable everywhere.
#[inline]
pub fn smooth_norm(v: &[f64], epsilon: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() + epsilon).sqrt()
}

/// Gradient of [`smooth_norm`]: `v / smooth_norm(v)`.
pub fn smooth_norm_grad(v: &[f64], epsilon: f64) -> Vec<f64> {
    let n = smooth_norm(v, epsilon);
    v.iter().map(|x| x / n).collect()
}

/// Sammon pair weight `1 / smooth_norm(x_n - x_m)`, bounded by eps^-1/2.
pub fn sammon_weight(x_n: &[f64], x_m: &[f64], epsilon: f64) -> f64 {
    let diff: Vec<f64> = x_n.iter().zip(x_m).map(|(a, b)| a - b).collect();
    1.0 / smooth_norm(&diff, epsilon)
}

/// A mini-batch over dataset indices; the pair set is all unordered pairs
/// within it.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    indices: Vec<usize>,
}

impl PairBatch {
    pub fn new(indices: Vec<usize>) -> Result<PairBatch> {
        if indices.len() < 2 {
            return Err(Error::InvalidBatch(format!(
                "pairwise batch needs >= 2 samples, got {}",
                indices.len()
            )));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidBatch("batch indices must be distinct".into()));
        }
        Ok(PairBatch { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.len() * (self.len() - 1) / 2
    }
}

/// Distance-matching terms evaluated on already-computed outputs.
///
/// `target` yields the smoothed high-dimensional distance for a local pair
/// (i, j), i < j. Returns the mean pair loss, per-output gradients, and the
/// gradient with respect to alpha. Shared by the Siamese loss (outputs come
/// from the tower) and the nonparametric optimizer (outputs are the free
/// embedding points).
pub(crate) fn pairwise_output_terms(
    target: &mut dyn FnMut(usize, usize) -> f64,
    outputs: &[Vec<f64>],
    alpha: f64,
    epsilon: f64,
) -> (f64, Vec<Vec<f64>>, f64) {
    let m = outputs.len();
    let dim = outputs.first().map_or(0, |o| o.len());
    let num_pairs = (m * (m - 1) / 2).max(1) as f64;
    let mut loss = 0.0;
    let mut d_outputs = vec![vec![0.0; dim]; m];
    let mut d_alpha = 0.0;
    let mut diff = vec![0.0; dim];
    for i in 0..m {
        for j in (i + 1)..m {
            for (d, (a, b)) in diff.iter_mut().zip(outputs[i].iter().zip(&outputs[j])) {
                *d = a - b;
            }
            let u = smooth_norm(&diff, epsilon);
            let t = target(i, j);
            let w = 1.0 / t;
            let r = t - alpha * u;
            loss += w * r * r;
            // d(w*r^2)/d y_i = -2*w*r*alpha * (y_i - y_j)/u
            let scale = -2.0 * w * r * alpha / (u * num_pairs);
            for d in 0..dim {
                let g = scale * diff[d];
                d_outputs[i][d] += g;
                d_outputs[j][d] -= g;
            }
            d_alpha += -2.0 * w * r * u / num_pairs;
        }
    }
    (loss / num_pairs, d_outputs, d_alpha)
}

fn forward_batch(model: &MlpModel, indices: &[usize], data: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<Tape>)> {
    let mut outputs = Vec::with_capacity(indices.len());
    let mut tapes = Vec::with_capacity(indices.len());
    for &idx in indices {
        let x = data
            .features
            .get(idx)
            .ok_or_else(|| Error::InvalidBatch(format!("index {idx} out of range")))?;
        let (y, tape) = model.forward(&x.values)?;
        outputs.push(y);
        tapes.push(tape);
    }
    Ok((outputs, tapes))
}

fn smoothed_feature_distance(data: &Dataset, a: usize, b: usize, epsilon: f64) -> f64 {
    let xa = &data.features[a].values;
    let xb = &data.features[b].values;
    let mut s = 0.0;
    for (p, q) in xa.iter().zip(xb) {
        let d = p - q;
        s += d * d;
    }
    (s + epsilon).sqrt()
}

/// Mean weighted distance-matching loss over all pairs in the batch, with
/// gradients for the tower and (in the semisupervised regime) `log_alpha`.
pub fn pairwise_loss(
    model: &MlpModel,
    batch: &PairBatch,
    data: &Dataset,
    cfg: &LossConfig,
) -> Result<(f64, GradientSet)> {
    cfg.validate()?;
    let (outputs, tapes) = forward_batch(model, batch.indices(), data)?;
    let alpha = model.alpha();
    let idx = batch.indices();
    let mut target = |i: usize, j: usize| smoothed_feature_distance(data, idx[i], idx[j], cfg.epsilon);
    let (loss, d_outputs, d_alpha) = pairwise_output_terms(&mut target, &outputs, alpha, cfg.epsilon);
    let mut grads = GradientSet::zeros_like(model);
    for (tape, upstream) in tapes.iter().zip(&d_outputs) {
        model.backward_into(tape, upstream, &mut grads)?;
    }
    if cfg.alpha_trainable() {
        grads.d_log_alpha = d_alpha * alpha;
    }
    Ok((loss, grads))
}

/// Mean squared position error over the anchored samples of the batch.
///
/// The third return value says whether the batch contained any anchor at
/// all; a batch without anchors contributes nothing and is not an error.
pub fn anchor_loss(
    model: &MlpModel,
    batch: &PairBatch,
    data: &Dataset,
    cfg: &LossConfig,
) -> Result<(f64, GradientSet, bool)> {
    cfg.validate()?;
    let mut grads = GradientSet::zeros_like(model);
    let anchored: Vec<usize> = batch
        .indices()
        .iter()
        .copied()
        .filter(|&i| *data.anchored.get(i).unwrap_or(&false))
        .collect();
    if anchored.is_empty() {
        return Ok((0.0, grads, false));
    }
    let count = anchored.len() as f64;
    let mut loss = 0.0;
    for &idx in &anchored {
        let target = data.positions[idx]
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("anchored sample {idx} has no position")))?;
        let (y, tape) = model.forward(&data.features[idx].values)?;
        if y.len() != target.dim() {
            return Err(Error::ShapeMismatch(format!(
                "model outputs {} dims, anchor has {}",
                y.len(),
                target.dim()
            )));
        }
        let mut upstream = vec![0.0; y.len()];
        for d in 0..y.len() {
            let r = y[d] - target.coords[d];
            loss += r * r;
            upstream[d] = 2.0 * r / count;
        }
        model.backward_into(&tape, &upstream, &mut grads)?;
    }
    Ok((loss / count, grads, true))
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub anchor_loss: f64,
    pub pairwise_loss: f64,
    pub alpha: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,anchor_loss,pairwise_loss,alpha,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                e.epoch, e.anchor_loss, e.pairwise_loss, e.alpha, e.seconds
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn final_alpha(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.alpha)
    }
}

/// One combined batch update: a single forward per sample feeds both loss
/// terms, upstream gradients are summed, and one backward pass per sample
/// accumulates into `grads`.
fn batch_step(
    model: &MlpModel,
    indices: &[usize],
    data: &Dataset,
    cfg: &LossConfig,
    grads: &mut GradientSet,
) -> Result<(f64, f64)> {
    let (outputs, tapes) = forward_batch(model, indices, data)?;
    let dim = model.output_dim();
    let mut upstreams = vec![vec![0.0; dim]; indices.len()];
    let mut loss_anchor = 0.0;
    let mut loss_pairwise = 0.0;
    let mut d_alpha = 0.0;

    if cfg.anchor_weight > 0.0 {
        let anchored: Vec<usize> = (0..indices.len())
            .filter(|&i| data.anchored[indices[i]])
            .collect();
        if !anchored.is_empty() {
            let count = anchored.len() as f64;
            for &i in &anchored {
                let target = data.positions[indices[i]]
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("anchored sample has no position".into()))?;
                for d in 0..dim {
                    let r = outputs[i][d] - target.coords[d];
                    loss_anchor += r * r / count;
                    upstreams[i][d] += cfg.anchor_weight * 2.0 * r / count;
                }
            }
        }
    }

    if cfg.pairwise_weight > 0.0 && indices.len() >= 2 {
        let alpha = model.alpha();
        let mut target =
            |i: usize, j: usize| smoothed_feature_distance(data, indices[i], indices[j], cfg.epsilon);
        let (lp, d_outputs, da) = pairwise_output_terms(&mut target, &outputs, alpha, cfg.epsilon);
        loss_pairwise = lp;
        d_alpha = da;
        for (u, d) in upstreams.iter_mut().zip(&d_outputs) {
            axpy(cfg.pairwise_weight, d, u);
        }
    }

    for (tape, upstream) in tapes.iter().zip(&upstreams) {
        model.backward_into(tape, upstream, grads)?;
    }
    if cfg.alpha_trainable() {
        grads.d_log_alpha += cfg.pairwise_weight * d_alpha * model.alpha();
    }
    Ok((loss_anchor, loss_pairwise))
}

/// Trains the tower with SGD over shuffled mini-batches. The total batch loss
/// is `anchor_weight * anchor + pairwise_weight * pairwise`; `log_alpha`
/// receives gradient only in the semisupervised regime.
pub fn train(
    model: &MlpModel,
    data: &Dataset,
    loss_cfg: &LossConfig,
    sgd_cfg: &SgdConfig,
) -> Result<(MlpModel, TrainLog)> {
    loss_cfg.validate()?;
    sgd_cfg.validate()?;
    data.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidInput("training needs at least two samples".into()));
    }
    if model.input_dim() != data.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "model takes {} inputs, dataset features have {}",
            model.input_dim(),
            data.feature_dim
        )));
    }
    if loss_cfg.anchor_weight > 0.0 {
        if data.num_anchored() == 0 {
            return Err(Error::InvalidConfig(
                "anchor_weight > 0 but the dataset has no anchored samples".into(),
            ));
        }
        if model.output_dim() != data.position_dim {
            return Err(Error::ShapeMismatch(format!(
                "model outputs {} dims, anchors have {}",
                model.output_dim(),
                data.position_dim
            )));
        }
    }
    if loss_cfg.regime == Regime::Supervised && data.num_anchored() != data.len() {
        return Err(Error::InvalidInput(
            "supervised training expects every sample to be anchored".into(),
        ));
    }

    let mut model = model.clone();
    let mut log = TrainLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(sgd_cfg.seed);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut grads = GradientSet::zeros_like(&model);

    for epoch in 0..sgd_cfg.epochs {
        let started = Instant::now();
        indices.shuffle(&mut rng);
        let mut anchor_sum = 0.0;
        let mut pairwise_sum = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(sgd_cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // a trailing singleton has no pairs
            }
            grads.zero();
            let (la, lp) = batch_step(&model, chunk, data, loss_cfg, &mut grads)?;
            sgd_step(&mut model, &grads, sgd_cfg)?;
            anchor_sum += la;
            pairwise_sum += lp;
            batches += 1;
        }
        let b = batches.max(1) as f64;
        log.epochs.push(EpochStats {
            epoch,
            anchor_loss: anchor_sum / b,
            pairwise_loss: pairwise_sum / b,
            alpha: model.alpha(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, log))
}
