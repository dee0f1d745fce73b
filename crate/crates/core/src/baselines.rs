//! Reference methods: classical nonparametric Sammon's mapping and the plain
//! regression network, both sharing the Siamese machinery underneath.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math::euclidean;
use crate::nn::{MlpModel, SgdConfig};
use crate::siamese::{pairwise_output_terms, train, LossConfig, TrainLog};
use crate::Position;

/// Free low-dimensional points, one row per dataset sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub points: Vec<Position>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// CSV of (index, y_1..y_D'), which doubles as the persisted artifact;
    /// Rust prints shortest round-trip floats, so load_csv is exact.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "index")?;
        for d in 0..self.dim() {
            write!(w, ",y{d}")?;
        }
        writeln!(w)?;
        for (i, p) in self.points.iter().enumerate() {
            write!(w, "{i}")?;
            for c in &p.coords {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Embedding> {
        let r = BufReader::new(File::open(path)?);
        let mut points = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            if ln == 0 || line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            fields.next(); // index
            let coords = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(Position { coords });
        }
        Ok(Embedding { points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SammonConfig {
    pub iters: usize,
    /// Step size relative to the mean pairwise feature distance.
    pub lr: f64,
    pub momentum: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SammonConfig {
    fn default() -> Self {
        SammonConfig { iters: 500, lr: 0.1, momentum: 0.8, epsilon: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SammonResult {
    pub embedding: Embedding,
    /// Mean pair loss per iteration.
    pub losses: Vec<f64>,
    /// Best loss seen up to each iteration (non-increasing).
    pub best_losses: Vec<f64>,
}

/// Deterministic top-k principal directions by power iteration with
/// deflation. Returns the directions and the data mean.
fn principal_directions(rows: &[&[f64]], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len();
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(*r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for r in rows {
        for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in 0..dim {
                cov[i * dim + j] += ci * centered[j];
            }
        }
    }
    for c in &mut cov {
        *c /= n as f64;
    }

    // Power iteration, re-orthogonalized against the directions already
    // found. Repeated eigenvalues (a symmetric point cloud) can annihilate a
    // start vector, so fall back through the standard basis until one
    // survives.
    let orthogonalize = |v: &mut Vec<f64>, dirs: &[Vec<f64>]| {
        for d in dirs {
            let proj: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
            for (vi, di) in v.iter_mut().zip(d) {
                *vi -= proj * di;
            }
        }
    };
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut accepted = vec![0.0; dim];
        'starts: for attempt in 0..=dim {
            let mut v = if attempt == 0 {
                vec![1.0 / (dim as f64).sqrt(); dim]
            } else {
                let mut e = vec![0.0; dim];
                e[attempt - 1] = 1.0;
                e
            };
            orthogonalize(&mut v, &dirs);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            for vi in &mut v {
                *vi /= norm;
            }
            let mut tmp = vec![0.0; dim];
            for _ in 0..300 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for j in 0..dim {
                        acc += cov[i * dim + j] * v[j];
                    }
                    tmp[i] = acc;
                }
                orthogonalize(&mut tmp, &dirs);
                let norm = tmp.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-200 {
                    continue 'starts; // this start carries no variance
                }
                for (vi, ti) in v.iter_mut().zip(&tmp) {
                    *vi = ti / norm;
                }
            }
            accepted = v;
            break;
        }
        // an all-zero direction is the correct degenerate answer when the
        // data has run out of variance
        dirs.push(accepted);
    }
    (dirs, mean)
}

/// Classical Sammon's mapping: gradient descent with momentum over the free
/// low-dimensional points, initialized from the top principal components of
/// the features scaled to match the mean pairwise feature distance. Returns
/// the embedding with the lowest recorded loss.
pub fn sammon_nonparametric(data: &Dataset, d_prime: usize, cfg: &SammonConfig) -> Result<SammonResult> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidInput("Sammon's mapping needs at least two samples".into()));
    }
    if d_prime == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    let rows: Vec<&[f64]> = data.features.iter().map(|f| f.values.as_slice()).collect();

    // PCA init
    let (dirs, mean) = principal_directions(&rows, d_prime);
    let mut points: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            dirs.iter()
                .map(|v| r.iter().zip(v).zip(&mean).map(|((x, vi), m)| (x - m) * vi).sum())
                .collect()
        })
        .collect();

    // condensed smoothed target distances, computed once
    let mut targets = vec![0.0; n * (n - 1) / 2];
    let mut idx = 0;
    let mut target_sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for (a, b) in rows[i].iter().zip(rows[j]) {
                let d = a - b;
                s += d * d;
            }
            let t = (s + cfg.epsilon).sqrt();
            targets[idx] = t;
            target_sum += t;
            idx += 1;
        }
    }
    let num_pairs = targets.len();
    let mean_target = target_sum / num_pairs as f64;

    // rescale the init so embedding distances start on the target scale
    let mut emb_sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            emb_sum += euclidean(&points[i], &points[j]);
        }
    }
    let mean_emb = emb_sum / num_pairs as f64;
    if mean_emb > 0.0 {
        let s = mean_target / mean_emb;
        for p in &mut points {
            for c in p.iter_mut() {
                *c *= s;
            }
        }
    }

    let pair_index = |i: usize, j: usize| -> usize {
        // condensed index for i < j
        i * n - i * (i + 1) / 2 + (j - i - 1)
    };

    let step_scale = cfg.lr * mean_target * n as f64 / 2.0;
    let mut velocity = vec![vec![0.0; d_prime]; n];
    let mut losses = Vec::with_capacity(cfg.iters);
    let mut best_losses = Vec::with_capacity(cfg.iters);
    let mut best_loss = f64::INFINITY;
    let mut best_points = points.clone();

    for _ in 0..cfg.iters {
        let mut target_fn = |i: usize, j: usize| targets[pair_index(i, j)];
        let (loss, d_points, _) = pairwise_output_terms(&mut target_fn, &points, 1.0, cfg.epsilon);
        if loss < best_loss {
            best_loss = loss;
            best_points = points.clone();
        }
        losses.push(loss);
        best_losses.push(best_loss);
        for ((p, v), g) in points.iter_mut().zip(&mut velocity).zip(&d_points) {
            for d in 0..d_prime {
                v[d] = cfg.momentum * v[d] - step_scale * g[d];
                p[d] += v[d];
            }
        }
    }
    // score the final iterate too
    let mut target_fn = |i: usize, j: usize| targets[pair_index(i, j)];
    let (final_loss, _, _) = pairwise_output_terms(&mut target_fn, &points, 1.0, cfg.epsilon);
    if final_loss < best_loss {
        best_loss = final_loss;
        best_points = points;
    }
    losses.push(final_loss);
    best_losses.push(best_loss);

    Ok(SammonResult {
        embedding: Embedding {
            points: best_points.into_iter().map(|coords| Position { coords }).collect(),
        },
        losses,
        best_losses,
    })
}

/// The plain regression baseline: the Siamese trainer in the supervised
/// regime with the pairwise term switched off. Kept as a named entry point
/// so experiment configs read naturally.
pub fn train_fcnn(model: &MlpModel, data: &Dataset, sgd_cfg: &SgdConfig) -> Result<(MlpModel, TrainLog)> {
    if data.num_anchored() != data.len() {
        return Err(Error::InvalidInput(
            "the regression baseline needs a position for every sample".into(),
        ));
    }
    train(model, data, &LossConfig::supervised(), sgd_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::math::euclidean;
    use crate::metrics::kruskal_stress;
    use crate::nn::init_model;
    use crate::siamese::smooth_norm;
    use crate::sim::SceneConfig;

    fn dataset_from_features(rows: Vec<Vec<f64>>, positions: Option<Vec<Vec<f64>>>) -> Dataset {
        let d = rows[0].len();
        let dp = positions.as_ref().map_or(2, |p| p[0].len());
        let mut ds = Dataset::new(SceneConfig::default(), 1.0, d, dp);
        for (i, f) in rows.into_iter().enumerate() {
            let pos = positions.as_ref().map(|p| Position { coords: p[i].clone() });
            let anchored = pos.is_some();
            ds.push(FeatureVector { values: f }, pos, anchored, None);
        }
        ds
    }

    fn zero_padded_square_corners() -> Vec<Vec<f64>> {
        let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        corners
            .iter()
            .map(|c| {
                let mut v = vec![0.0; 10];
                v[0] = c[0];
                v[1] = c[1];
                v
            })
            .collect()
    }

    /// The unit square embeds isometrically in 2-D, so the solver must
    /// recover it almost exactly.
    #[test]
    fn recovers_unit_square_from_padded_features() {
        let ds = dataset_from_features(zero_padded_square_corners(), None);
        let cfg = SammonConfig { iters: 2000, ..SammonConfig::default() };
        let result = sammon_nonparametric(&ds, 2, &cfg).unwrap();
        let truth: Vec<Position> = zero_padded_square_corners()
            .iter()
            .map(|v| Position::xy(v[0], v[1]))
            .collect();
        let ks = kruskal_stress(&truth, &result.embedding.points).unwrap();
        assert!(ks < 0.01, "stress {ks}");
    }

    #[test]
    fn two_points_reach_near_zero_loss() {
        let ds = dataset_from_features(vec![vec![0.0, 0.0, 0.0], vec![2.0, 1.0, 2.0]], None);
        let result = sammon_nonparametric(&ds, 2, &SammonConfig::default()).unwrap();
        assert!(*result.best_losses.last().unwrap() < 1e-6);
        let d_emb = result.embedding.points[0].distance(&result.embedding.points[1]);
        assert!((d_emb - 3.0).abs() < 1e-2, "pair distance {d_emb}");
    }

    #[test]
    fn sammon_is_deterministic() {
        let ds = dataset_from_features(
            vec![
                vec![0.0, 0.1, 0.9],
                vec![1.0, -0.4, 0.2],
                vec![0.5, 0.5, -0.5],
                vec![-1.0, 0.3, 0.0],
            ],
            None,
        );
        let cfg = SammonConfig { iters: 200, ..SammonConfig::default() };
        let a = sammon_nonparametric(&ds, 2, &cfg).unwrap();
        let b = sammon_nonparametric(&ds, 2, &cfg).unwrap();
        assert_eq!(a.embedding, b.embedding);
    }

    #[test]
    fn best_loss_sequence_is_non_increasing() {
        let ds = dataset_from_features(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.2],
                vec![0.2, 1.1],
                vec![0.9, 0.9],
                vec![0.5, -0.5],
            ],
            None,
        );
        let cfg = SammonConfig { iters: 300, ..SammonConfig::default() };
        let result = sammon_nonparametric(&ds, 2, &cfg).unwrap();
        assert!(result.best_losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_tiny_inputs() {
        let ds = dataset_from_features(vec![vec![1.0, 2.0]], None);
        assert!(matches!(
            sammon_nonparametric(&ds, 2, &SammonConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    /// The distance-matching objective evaluated through the Siamese
    /// machinery must agree with a direct evaluation of the weighted
    /// stress sum on the same points.
    #[test]
    fn loss_agrees_with_direct_weighted_stress() {
        let feats = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.5, -0.5, 0.0],
            vec![0.3, 2.0, 0.7],
            vec![-0.8, 0.1, 0.4],
        ];
        let ds = dataset_from_features(feats.clone(), None);
        let cfg = SammonConfig { iters: 50, ..SammonConfig::default() };
        let result = sammon_nonparametric(&ds, 2, &cfg).unwrap();
        let pts: Vec<Vec<f64>> = result.embedding.points.iter().map(|p| p.coords.clone()).collect();

        // independent evaluation of sum_{n<m} w*(t - d)^2 with smoothed norms
        let n = feats.len();
        let eps = cfg.epsilon;
        let mut direct = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let diff: Vec<f64> = feats[i].iter().zip(&feats[j]).map(|(a, b)| a - b).collect();
                let t = smooth_norm(&diff, eps);
                let dy: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
                let d = smooth_norm(&dy, eps);
                direct += (t - d) * (t - d) / t;
                pairs += 1.0;
            }
        }
        let direct_mean = direct / pairs;

        let mut target_fn = |i: usize, j: usize| {
            let diff: Vec<f64> = feats[i].iter().zip(&feats[j]).map(|(a, b)| a - b).collect();
            smooth_norm(&diff, eps)
        };
        let (machinery, _, _) = pairwise_output_terms(&mut target_fn, &pts, 1.0, eps);
        let rel = (machinery - direct_mean).abs() / direct_mean.abs().max(1e-300);
        assert!(rel < 1e-10, "relative gap {rel}");
    }

    #[test]
    fn fcnn_delegates_bit_identically() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let feats: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let poss: Vec<Vec<f64>> = feats.iter().map(|f| vec![f[0] + f[1], f[2]]).collect();
        let ds = dataset_from_features(feats, Some(poss));
        let model = init_model(&[3, 6, 2], 21).unwrap();
        let sgd = SgdConfig { epochs: 5, batch_size: 4, learning_rate: 0.01, ..SgdConfig::default() };
        let (a, _) = train_fcnn(&model, &ds, &sgd).unwrap();
        let (b, _) = train(&model, &ds, &LossConfig::supervised(), &sgd).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fcnn_rejects_unanchored_samples() {
        let ds = dataset_from_features(vec![vec![0.0, 1.0], vec![1.0, 0.0]], None);
        let model = init_model(&[2, 2], 0).unwrap();
        assert!(matches!(
            train_fcnn(&model, &ds, &SgdConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    /// Memorization check: a roomy model driven long enough pins 10 samples
    /// to their targets.
    #[test]
    fn fcnn_memorizes_small_dataset() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let feats: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let poss: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let ds = dataset_from_features(feats, Some(poss.clone()));
        let model = init_model(&[4, 64, 32, 2], 3).unwrap();
        let sgd = SgdConfig {
            epochs: 800,
            batch_size: 10,
            learning_rate: 0.02,
            l2_lambda: 0.0,
            seed: 1,
        };
        let (trained, _) = train_fcnn(&model, &ds, &sgd).unwrap();
        let mut err = 0.0;
        for (f, p) in ds.features.iter().zip(&poss) {
            let y = trained.predict(&f.values).unwrap();
            err += euclidean(&y, p);
        }
        err /= 10.0;
        assert!(err < 0.1, "training MDE {err}");
    }
}
