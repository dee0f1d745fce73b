//! Embedding- and positioning-quality metrics: mean distance error, Kruskal's
//! stress, trustworthiness, and continuity, with exact rank bookkeeping.
//!
//! Rank conventions used throughout:
//! - distances compare as squared Euclidean (monotone equivalent),
//! - self-distances are excluded,
//! - ties break by ascending sample index, so results are deterministic
//!   across platforms.
//!
//! Kruskal's stress uses the least-squares optimal scale
//! `beta = sum(delta*d) / sum(d^2)`, which keeps the score inside [0, 1] and
//! invariant to uniform rescaling of the embedding.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::Position;

/// Which space supplies the reference neighborhoods for TW/CT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankReference {
    /// Ground-truth positions (default: compares predictions to geometry).
    Positions,
    /// Raw channel features (pure chart diagnostics).
    Features,
}

/// Metric bundle in the fixed export order MDE, KS, TW@K..., CT@K....
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Absent for unsupervised evaluation, where absolute error is undefined.
    pub mde: Option<f64>,
    pub ks: f64,
    pub tw: BTreeMap<usize, f64>,
    pub ct: BTreeMap<usize, f64>,
    pub k_values: Vec<usize>,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        if let Some(m) = self.mde {
            let _ = writeln!(out, "mde_m,{m}");
        }
        let _ = writeln!(out, "ks,{}", self.ks);
        for k in &self.k_values {
            let _ = writeln!(out, "tw@{k},{}", self.tw[k]);
        }
        for k in &self.k_values {
            let _ = writeln!(out, "ct@{k},{}", self.ct[k]);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        if let Some(m) = self.mde {
            rows.push(("MDE [m]".into(), format!("{m:.3}")));
        }
        rows.push(("KS".into(), format!("{:.4}", self.ks)));
        for k in &self.k_values {
            rows.push((format!("TW K={k}"), format!("{:.4}", self.tw[k])));
        }
        for k in &self.k_values {
            rows.push((format!("CT K={k}"), format!("{:.4}", self.ct[k])));
        }
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<width$}  {value}");
        }
        out
    }
}

/// Mean Euclidean distance between predictions and ground truth, exact.
pub fn mde(pred: &[Position], truth: &[Position]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("mde needs at least one sample".into()));
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.dim() != t.dim() {
            return Err(Error::ShapeMismatch("prediction/truth dimension mismatch".into()));
        }
        acc += p.distance(t);
    }
    Ok(acc / pred.len() as f64)
}

/// Kruskal's stress between reference and embedded pairwise distances with
/// the optimal scale beta. Zero means geometry is perfectly preserved up to
/// a similarity transform.
pub fn kruskal_stress(reference: &[Position], embedded: &[Position]) -> Result<f64> {
    let n = reference.len();
    if n != embedded.len() {
        return Err(Error::ShapeMismatch("point sets differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput("stress needs at least two points".into()));
    }
    let mut sum_dd = 0.0; // sum delta * d
    let mut sum_d2 = 0.0;
    let mut sum_delta2 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = reference[i].distance(&reference[j]);
            let d = embedded[i].distance(&embedded[j]);
            sum_dd += delta * d;
            sum_d2 += d * d;
            sum_delta2 += delta * delta;
        }
    }
    if sum_delta2 == 0.0 {
        return Err(Error::DegenerateInput("all reference points coincide".into()));
    }
    let beta = if sum_d2 > 0.0 { sum_dd / sum_d2 } else { 0.0 };
    let mut residual = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = reference[i].distance(&reference[j]);
            let d = embedded[i].distance(&embedded[j]);
            let r = delta - beta * d;
            residual += r * r;
        }
    }
    Ok((residual / sum_delta2).sqrt())
}

/// For each point, every other index ordered by (squared distance, index).
fn neighbor_orders(points: &[Position]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut orders = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (points[i].squared_distance(&points[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        orders.push(others.into_iter().map(|(_, j)| j).collect());
    }
    orders
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("K = {k} out of range for {n} points")));
    }
    // the normalizer N*K*(2N - 3K - 1) must stay positive
    if 3 * k + 1 >= 2 * n {
        return Err(Error::InvalidConfig(format!(
            "K = {k} violates K < (2N - 1)/3 for N = {n}"
        )));
    }
    Ok(())
}

fn rank_penalty_sum(ref_orders: &[Vec<usize>], emb_orders: &[Vec<usize>], k: usize) -> f64 {
    let n = ref_orders.len();
    let mut total = 0usize;
    let mut ref_rank = vec![0usize; n];
    let mut in_ref_knn = vec![false; n];
    for i in 0..n {
        for (pos, &j) in ref_orders[i].iter().enumerate() {
            ref_rank[j] = pos + 1; // rank 1 = nearest
            in_ref_knn[j] = pos < k;
        }
        // penalize points that entered the embedded K-neighborhood
        for &j in emb_orders[i].iter().take(k) {
            if !in_ref_knn[j] {
                total += ref_rank[j] - k;
            }
        }
        for &j in &ref_orders[i] {
            in_ref_knn[j] = false;
        }
    }
    total as f64
}

/// Trustworthiness TW(K): 1 minus the normalized rank penalty of false
/// neighbors that the embedding introduced.
pub fn trustworthiness(reference: &[Position], embedded: &[Position], k: usize) -> Result<f64> {
    let n = reference.len();
    if n != embedded.len() {
        return Err(Error::ShapeMismatch("point sets differ in length".into()));
    }
    check_k(n, k)?;
    let ref_orders = neighbor_orders(reference);
    let emb_orders = neighbor_orders(embedded);
    let penalty = rank_penalty_sum(&ref_orders, &emb_orders, k);
    let normalizer = (n * k * (2 * n - 3 * k - 1)) as f64;
    Ok(1.0 - 2.0 / normalizer * penalty)
}

/// Continuity CT(K): the mirror image of trustworthiness, penalizing true
/// neighbors the embedding pushed away.
pub fn continuity(reference: &[Position], embedded: &[Position], k: usize) -> Result<f64> {
    trustworthiness(embedded, reference, k)
}

/// Evaluates predicted points against a dataset with ground truth.
///
/// `include_mde = false` is the unsupervised protocol, where the chart has no
/// absolute frame and MDE is omitted from the report.
pub fn evaluate_points(
    pred: &[Position],
    data: &Dataset,
    k_values: &[usize],
    include_mde: bool,
    rank_reference: RankReference,
) -> Result<MetricReport> {
    if !data.has_full_ground_truth() {
        return Err(Error::InvalidInput(
            "evaluation dataset is missing ground-truth positions".into(),
        ));
    }
    if pred.len() != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} samples",
            pred.len(),
            data.len()
        )));
    }
    let truth: Vec<Position> = data.positions.iter().map(|p| p.clone().unwrap()).collect();
    let mde_value = if include_mde { Some(mde(pred, &truth)?) } else { None };
    let ks = kruskal_stress(&truth, pred)?;
    let reference: Vec<Position> = match rank_reference {
        RankReference::Positions => truth,
        RankReference::Features => data
            .features
            .iter()
            .map(|f| Position { coords: f.values.clone() })
            .collect(),
    };
    let mut tw = BTreeMap::new();
    let mut ct = BTreeMap::new();
    for &k in k_values {
        tw.insert(k, trustworthiness(&reference, pred, k)?);
        ct.insert(k, continuity(&reference, pred, k)?);
    }
    Ok(MetricReport { mde: mde_value, ks, tw, ct, k_values: k_values.to_vec() })
}

/// Runs the model over the dataset features and evaluates the predictions.
pub fn evaluate_model(
    model: &MlpModel,
    data: &Dataset,
    k_values: &[usize],
    include_mde: bool,
    rank_reference: RankReference,
) -> Result<MetricReport> {
    let pred = predict_all(model, data)?;
    evaluate_points(&pred, data, k_values, include_mde, rank_reference)
}

pub fn predict_all(model: &MlpModel, data: &Dataset) -> Result<Vec<Position>> {
    data.features
        .iter()
        .map(|f| model.predict(&f.values).map(|coords| Position { coords }))
        .collect()
}
