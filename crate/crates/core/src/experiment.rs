//! Config-driven experiment orchestration: dataset generation, training
//! dispatch, evaluation, and the reproduction suites behind the CLI.
//!
//! Every experiment is fully determined by an [`ExperimentConfig`]; the
//! resolved config is dumped as JSON next to every artifact so a run can be
//! repeated byte-for-byte. Anchor subsampling happens at generation time and
//! is stored in the dataset file, so a semisupervised run and a
//! supervised-on-the-anchors-only run share the exact same annotated subset.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{sammon_nonparametric, train_fcnn, Embedding, SammonConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{csi_to_features, FeatureConfig, PIPELINE_VERSION};
use crate::metrics::{evaluate_points, MetricReport, RankReference};
use crate::nn::{init_model, MlpModel, SgdConfig};
use crate::siamese::{train, LossConfig, Regime, TrainLog};
use crate::sim::{
    gen_t_intersection_traces, make_scene, place_square_ring, place_uniform, synth_csi, SceneConfig,
};
use crate::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Siamese,
    Fcnn,
    Sammon,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Siamese => write!(f, "siamese"),
            Method::Fcnn => write!(f, "fcnn"),
            Method::Sammon => write!(f, "sammon"),
        }
    }
}

/// How UEs are laid out for the train/test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SceneMode {
    /// Uniform random training UEs; test set is half uniform, half on a
    /// centered square ring for visualization.
    Random {
        num_train: usize,
        num_test_uniform: usize,
        num_test_ring: usize,
    },
    /// Vehicles passing through the T-intersection; every sample carries a
    /// trace id.
    TIntersection {
        num_train_traces: usize,
        num_test_traces: usize,
        speed_mps: f64,
        dt_seconds: f64,
    },
}

impl Default for SceneMode {
    fn default() -> Self {
        SceneMode::Random { num_train: 2000, num_test_uniform: 200, num_test_ring: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub pipeline: FeatureConfig,
    pub mode: SceneMode,
    pub method: Method,
    pub regime: Regime,
    /// Fraction of training samples whose positions are visible as anchors.
    pub anchor_fraction: f64,
    pub loss: LossConfig,
    pub sgd: SgdConfig,
    pub sammon: SammonConfig,
    /// Hidden layer widths of the tower; input/output dims come from data.
    pub hidden_dims: Vec<usize>,
    pub k_values: Vec<usize>,
    pub rank_reference: RankReference,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Baseline config for a method/regime pair; every derived RNG stream is
    /// seeded from `seed`.
    pub fn new(method: Method, regime: Regime, seed: u64) -> ExperimentConfig {
        let loss = match regime {
            Regime::Supervised => LossConfig::supervised(),
            Regime::Semisupervised => LossConfig::semisupervised(),
            Regime::Unsupervised => LossConfig::unsupervised(),
        };
        let anchor_fraction = match regime {
            Regime::Semisupervised => 0.1,
            _ => 1.0,
        };
        ExperimentConfig {
            scene: SceneConfig { seed, ..SceneConfig::default() },
            pipeline: FeatureConfig::default(),
            mode: SceneMode::default(),
            method,
            regime,
            anchor_fraction,
            loss,
            sgd: SgdConfig { seed, ..SgdConfig::default() },
            sammon: SammonConfig { seed, ..SammonConfig::default() },
            hidden_dims: vec![512, 256, 128, 64, 32],
            k_values: vec![1, 40, 80],
            rank_reference: RankReference::Positions,
            output_dir: PathBuf::from("runs/experiment"),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.loss.validate()?;
        self.sgd.validate()?;
        if self.loss.regime != self.regime {
            return Err(Error::InvalidConfig(format!(
                "loss regime {} disagrees with experiment regime {}",
                self.loss.regime, self.regime
            )));
        }
        if self.method == Method::Sammon && self.regime != Regime::Unsupervised {
            return Err(Error::InvalidConfig(
                "nonparametric Sammon's mapping is unsupervised only".into(),
            ));
        }
        if self.method == Method::Fcnn && self.regime != Regime::Supervised {
            return Err(Error::InvalidConfig("the regression baseline is supervised only".into()));
        }
        if !(0.0..=1.0).contains(&self.anchor_fraction) {
            return Err(Error::InvalidConfig("anchor_fraction must lie in [0, 1]".into()));
        }
        if self.regime == Regime::Semisupervised
            && !(self.anchor_fraction > 0.0 && self.anchor_fraction < 1.0)
        {
            // all anchors on traces is the one sanctioned exception
            if !(matches!(self.mode, SceneMode::TIntersection { .. }) && self.anchor_fraction == 1.0)
            {
                return Err(Error::InvalidConfig(
                    "semisupervised runs need anchor_fraction in (0, 1)".into(),
                ));
            }
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn layer_dims(&self, feature_dim: usize, position_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(feature_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(position_dim);
        dims
    }
}

pub const TRAIN_DATASET_FILE: &str = "train.ds";
pub const TEST_DATASET_FILE: &str = "test.ds";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";

/// Applies a fresh seeded anchor subsample to a dataset: round(fraction * N)
/// samples keep their positions visible during training.
pub fn assign_anchors(data: &mut Dataset, fraction: f64, seed: u64) {
    let n = data.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    for a in data.anchored.iter_mut() {
        *a = false;
    }
    for &i in idx.iter().take(k) {
        data.anchored[i] = data.positions[i].is_some();
    }
}

fn features_for_positions(
    scene: &crate::sim::Scene,
    sigma: f64,
    positions: &[Position],
    trace_ids: Option<&[u32]>,
) -> Result<Dataset> {
    let feature_dim = scene.config.num_antennas * scene.config.num_subcarriers;
    let mut ds = Dataset::new(scene.config.clone(), sigma, feature_dim, 2);
    for (i, p) in positions.iter().enumerate() {
        let h = synth_csi(scene, p)?;
        let x = csi_to_features(&h, sigma)?;
        ds.push(x, Some(p.clone()), false, trace_ids.map(|t| t[i]));
    }
    Ok(ds)
}

/// Builds the train/test datasets in memory. Anchors on the training set
/// follow `cfg.anchor_fraction`; the test set carries ground truth only.
pub fn generate_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let scene = make_scene(cfg.scene.clone())?;
    let sigma = cfg.pipeline.sigma;
    let (mut train_ds, test_ds) = match &cfg.mode {
        SceneMode::Random { num_train, num_test_uniform, num_test_ring } => {
            let train_pos = place_uniform(&scene.config, *num_train, cfg.seed.wrapping_add(1));
            let mut test_pos = place_uniform(&scene.config, *num_test_uniform, cfg.seed.wrapping_add(2));
            if *num_test_ring > 0 {
                test_pos.extend(place_square_ring(&scene.config, *num_test_ring)?);
            }
            (
                features_for_positions(&scene, sigma, &train_pos, None)?,
                features_for_positions(&scene, sigma, &test_pos, None)?,
            )
        }
        SceneMode::TIntersection { num_train_traces, num_test_traces, speed_mps, dt_seconds } => {
            let build = |count: usize, seed: u64| -> Result<Dataset> {
                let traces =
                    gen_t_intersection_traces(&scene.config, count, *speed_mps, *dt_seconds, seed)?;
                let mut positions = Vec::new();
                let mut ids = Vec::new();
                for (tid, tr) in traces.iter().enumerate() {
                    for (_, p) in &tr.samples {
                        positions.push(p.clone());
                        ids.push(tid as u32);
                    }
                }
                features_for_positions(&scene, sigma, &positions, Some(&ids))
            };
            (
                build(*num_train_traces, cfg.seed.wrapping_add(1))?,
                build(*num_test_traces, cfg.seed.wrapping_add(2))?,
            )
        }
    };
    assign_anchors(&mut train_ds, cfg.anchor_fraction, cfg.seed.wrapping_add(3));
    Ok((train_ds, test_ds))
}

/// Generates and persists the datasets (plus optional CSV exports) under the
/// config's output directory.
pub fn cmd_generate(cfg: &ExperimentConfig, export_csv: bool) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&cfg.output_dir)?;
    cfg.save_json(&cfg.output_dir.join(CONFIG_FILE))?;
    let (train_ds, test_ds) = generate_datasets(cfg)?;
    let train_path = cfg.output_dir.join(TRAIN_DATASET_FILE);
    let test_path = cfg.output_dir.join(TEST_DATASET_FILE);
    train_ds.save(&train_path)?;
    test_ds.save(&test_path)?;
    if export_csv {
        train_ds.export_csv(&cfg.output_dir.join("train.csv"))?;
        test_ds.export_csv(&cfg.output_dir.join("test.csv"))?;
    }
    Ok((train_path, test_path))
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub enum Artifact {
    Model { path: PathBuf, model: MlpModel, log: TrainLog },
    Embedding { path: PathBuf, embedding: Embedding },
}

fn load_checked_dataset(cfg: &ExperimentConfig, path: &Path) -> Result<Dataset> {
    let ds = Dataset::load(path)?;
    if ds.pipeline_version != PIPELINE_VERSION {
        return Err(Error::StaleDataset(format!(
            "dataset pipeline version {} does not match current {}",
            ds.pipeline_version, PIPELINE_VERSION
        )));
    }
    if ds.sigma != cfg.pipeline.sigma {
        return Err(Error::StaleDataset(format!(
            "dataset was generated with sigma {}, config wants {}",
            ds.sigma, cfg.pipeline.sigma
        )));
    }
    Ok(ds)
}

/// Trains per the configured method and writes the checkpoint (or embedding)
/// and the training log into the output directory.
pub fn cmd_train(cfg: &ExperimentConfig, train_path: &Path) -> Result<Artifact> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    cfg.save_json(&cfg.output_dir.join(CONFIG_FILE))?;
    let data = load_checked_dataset(cfg, train_path)?;

    match cfg.method {
        Method::Sammon => {
            let result = sammon_nonparametric(&data, 2, &cfg.sammon)?;
            let path = cfg.output_dir.join(EMBEDDING_FILE);
            result.embedding.save_csv(&path)?;
            let mut curve = String::from("iter,loss,best_loss\n");
            for (i, (l, b)) in result.losses.iter().zip(&result.best_losses).enumerate() {
                curve.push_str(&format!("{i},{l},{b}\n"));
            }
            fs::write(cfg.output_dir.join(TRAIN_LOG_FILE), curve)?;
            Ok(Artifact::Embedding { path, embedding: result.embedding })
        }
        Method::Fcnn | Method::Siamese => {
            let training_data = match cfg.regime {
                // supervised runs see only the anchored subset, which is the
                // whole set at anchor_fraction = 1 and the labels-only
                // ablation below it
                Regime::Supervised => data.anchored_subset(),
                Regime::Semisupervised => data,
                Regime::Unsupervised => data.without_anchors(),
            };
            if training_data.is_empty() {
                return Err(Error::InvalidInput("no training samples after regime filtering".into()));
            }
            let dims = cfg.layer_dims(training_data.feature_dim, training_data.position_dim);
            let model = init_model(&dims, cfg.seed)?;
            let (trained, log) = match cfg.method {
                Method::Fcnn => train_fcnn(&model, &training_data, &cfg.sgd)?,
                _ => train(&model, &training_data, &cfg.loss, &cfg.sgd)?,
            };
            let path = cfg.output_dir.join(CHECKPOINT_FILE);
            trained.save(&path)?;
            log.save_csv(&cfg.output_dir.join(TRAIN_LOG_FILE))?;
            Ok(Artifact::Model { path, model: trained, log })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    Train,
    Test,
}

impl std::fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalSplit::Train => write!(f, "train"),
            EvalSplit::Test => write!(f, "test"),
        }
    }
}

/// Evaluates a trained artifact against a dataset and writes the metric
/// report (CSV and aligned text) plus a scatter export for plotting.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    artifact: &Artifact,
    dataset_path: &Path,
    split: EvalSplit,
) -> Result<MetricReport> {
    let data = load_checked_dataset(cfg, dataset_path)?;
    let pred: Vec<Position> = match artifact {
        Artifact::Model { model, .. } => data
            .features
            .iter()
            .map(|f| model.predict(&f.values).map(|coords| Position { coords }))
            .collect::<Result<_>>()?,
        Artifact::Embedding { embedding, .. } => {
            if split == EvalSplit::Test {
                return Err(Error::Unsupported(
                    "nonparametric Sammon's mapping embeds only its training samples; \
                     it cannot place unseen test points"
                        .into(),
                ));
            }
            if embedding.len() != data.len() {
                return Err(Error::ShapeMismatch(format!(
                    "embedding has {} rows, dataset has {}",
                    embedding.len(),
                    data.len()
                )));
            }
            embedding.points.clone()
        }
    };
    let include_mde = cfg.regime != Regime::Unsupervised;
    let report = evaluate_points(&pred, &data, &cfg.k_values, include_mde, cfg.rank_reference)?;

    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join(format!("report_{split}.csv")), report.to_csv())?;
    fs::write(cfg.output_dir.join(format!("report_{split}.txt")), report.to_table())?;
    write_scatter(&cfg.output_dir.join(format!("scatter_{split}.csv")), &data, &pred)?;
    Ok(report)
}

fn write_scatter(path: &Path, data: &Dataset, pred: &[Position]) -> Result<()> {
    let has_traces = data.trace_ids.iter().any(|t| t.is_some());
    let mut out = String::from(if has_traces {
        "true_x,true_y,pred_x,pred_y,trace_id\n"
    } else {
        "true_x,true_y,pred_x,pred_y\n"
    });
    for i in 0..data.len() {
        let t = data.positions[i].as_ref().expect("checked ground truth");
        out.push_str(&format!(
            "{},{},{},{}",
            t.coords[0], t.coords[1], pred[i].coords[0], pred[i].coords[1]
        ));
        if has_traces {
            match data.trace_ids[i] {
                Some(id) => out.push_str(&format!(",{id}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reproduction suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Shrinks dataset sizes and epochs for smoke runs.
    pub quick: bool,
}

/// One consolidated row of a suite summary.
#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub scene: String,
    pub method: Method,
    pub regime: Regime,
    pub split: EvalSplit,
    pub report: MetricReport,
}

pub struct SuiteOutcome {
    pub rows: Vec<SuiteRow>,
    pub table: String,
}

fn summary_table(rows: &[SuiteRow], k_values: &[usize]) -> String {
    let mut header = vec![
        "scene".to_string(),
        "method".to_string(),
        "regime".to_string(),
        "split".to_string(),
        "MDE[m]".to_string(),
        "KS".to_string(),
    ];
    for k in k_values {
        header.push(format!("TW@{k}"));
    }
    for k in k_values {
        header.push(format!("CT@{k}"));
    }
    let mut cells: Vec<Vec<String>> = vec![header];
    for row in rows {
        let mut line = vec![
            row.scene.clone(),
            row.method.to_string(),
            row.regime.to_string(),
            row.split.to_string(),
            row.report.mde.map_or("-".into(), |m| format!("{m:.2}")),
            format!("{:.4}", row.report.ks),
        ];
        for k in k_values {
            line.push(format!("{:.4}", row.report.tw[k]));
        }
        for k in k_values {
            line.push(format!("{:.4}", row.report.ct[k]));
        }
        cells.push(line);
    }
    let cols = cells[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (ri, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:<w$}", w = widths[c]));
        }
        out.push('\n');
        if ri == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
            out.push('\n');
        }
    }
    out
}

fn summary_csv(rows: &[SuiteRow], k_values: &[usize]) -> String {
    let mut out = String::from("scene,method,regime,split,mde_m,ks");
    for k in k_values {
        out.push_str(&format!(",tw@{k}"));
    }
    for k in k_values {
        out.push_str(&format!(",ct@{k}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            row.scene,
            row.method,
            row.regime,
            row.split,
            row.report.mde.map_or(String::new(), |m| m.to_string()),
            row.report.ks
        ));
        for k in k_values {
            out.push_str(&format!(",{}", row.report.tw[k]));
        }
        for k in k_values {
            out.push_str(&format!(",{}", row.report.ct[k]));
        }
        out.push('\n');
    }
    out
}

/// Per-method training defaults used by the suites. Tuned on the default
/// scene so each cell finishes in minutes on a desktop.
pub fn suite_sgd(method: Method, regime: Regime, quick: bool) -> SgdConfig {
    let mut sgd = match (method, regime) {
        (Method::Sammon, _) => SgdConfig::default(),
        (_, Regime::Supervised) => SgdConfig {
            learning_rate: 3e-5,
            l2_lambda: 1e-4,
            batch_size: 64,
            epochs: 320,
            seed: 0,
        },
        (_, Regime::Semisupervised) => SgdConfig {
            learning_rate: 3e-5,
            l2_lambda: 1e-4,
            batch_size: 128,
            epochs: 320,
            seed: 0,
        },
        (_, Regime::Unsupervised) => SgdConfig {
            learning_rate: 1e-4,
            l2_lambda: 1e-4,
            batch_size: 256,
            epochs: 160,
            seed: 0,
        },
    };
    if quick {
        sgd.epochs = (sgd.epochs / 8).max(10);
    }
    sgd
}

fn scene_for(nlos: bool, seed: u64) -> SceneConfig {
    SceneConfig { los: !nlos, seed, ..SceneConfig::default() }
}

struct SuiteCell {
    name: String,
    cfg: ExperimentConfig,
    splits: Vec<EvalSplit>,
}

fn cell_config(
    opts: &SuiteOptions,
    name: &str,
    scene: SceneConfig,
    method: Method,
    regime: Regime,
    anchor_fraction: f64,
    mode: SceneMode,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(method, regime, opts.seed);
    cfg.scene = scene;
    cfg.mode = mode;
    cfg.anchor_fraction = anchor_fraction;
    cfg.sgd = suite_sgd(method, regime, opts.quick);
    cfg.sgd.seed = opts.seed;
    cfg.sammon.seed = opts.seed;
    if opts.quick {
        cfg.k_values = vec![1, 10, 20];
    }
    cfg.output_dir = opts.output_dir.join(name);
    cfg
}

fn random_mode(opts: &SuiteOptions) -> SceneMode {
    if opts.quick {
        SceneMode::Random { num_train: 300, num_test_uniform: 40, num_test_ring: 40 }
    } else {
        SceneMode::default()
    }
}

fn trace_mode(opts: &SuiteOptions) -> SceneMode {
    let traces = if opts.quick { 6 } else { 20 };
    SceneMode::TIntersection {
        num_train_traces: traces,
        num_test_traces: traces,
        speed_mps: 10.0,
        dt_seconds: 0.25,
    }
}

fn full_grid_cells(opts: &SuiteOptions) -> Vec<SuiteCell> {
    let mut cells = Vec::new();
    for nlos in [false, true] {
        let scene_name = if nlos { "nlos" } else { "los" };
        let scene = scene_for(nlos, opts.seed);
        let mode = random_mode(opts);
        cells.push(SuiteCell {
            name: format!("{scene_name}_siamese_supervised"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_siamese_supervised"),
                scene.clone(),
                Method::Siamese,
                Regime::Supervised,
                1.0,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_fcnn_supervised"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_fcnn_supervised"),
                scene.clone(),
                Method::Fcnn,
                Regime::Supervised,
                1.0,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_siamese_semisupervised"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_siamese_semisupervised"),
                scene.clone(),
                Method::Siamese,
                Regime::Semisupervised,
                0.1,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_siamese_unsupervised"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_siamese_unsupervised"),
                scene.clone(),
                Method::Siamese,
                Regime::Unsupervised,
                1.0,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Train, EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_sammon_unsupervised"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_sammon_unsupervised"),
                scene,
                Method::Sammon,
                Regime::Unsupervised,
                1.0,
                mode,
            ),
            splits: vec![EvalSplit::Train],
        });
    }
    cells
}

fn label_ablation_cells(opts: &SuiteOptions) -> Vec<SuiteCell> {
    let mut cells = Vec::new();
    for nlos in [false, true] {
        let scene_name = if nlos { "nlos" } else { "los" };
        let scene = scene_for(nlos, opts.seed);
        let mode = random_mode(opts);
        cells.push(SuiteCell {
            name: format!("{scene_name}_fcnn_10pct"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_fcnn_10pct"),
                scene.clone(),
                Method::Fcnn,
                Regime::Supervised,
                0.1,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_siamese_10pct"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_siamese_10pct"),
                scene.clone(),
                Method::Siamese,
                Regime::Supervised,
                0.1,
                mode.clone(),
            ),
            splits: vec![EvalSplit::Test],
        });
        cells.push(SuiteCell {
            name: format!("{scene_name}_siamese_semisupervised_10pct"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_siamese_semisupervised_10pct"),
                scene,
                Method::Siamese,
                Regime::Semisupervised,
                0.1,
                mode,
            ),
            splits: vec![EvalSplit::Test],
        });
    }
    cells
}

fn t_intersection_cells(opts: &SuiteOptions) -> Vec<SuiteCell> {
    let mut cells = Vec::new();
    for nlos in [false, true] {
        let scene_name = if nlos { "nlos" } else { "los" };
        let scene = scene_for(nlos, opts.seed);
        cells.push(SuiteCell {
            name: format!("{scene_name}_t_intersection"),
            cfg: cell_config(
                opts,
                &format!("{scene_name}_t_intersection"),
                scene,
                Method::Siamese,
                Regime::Semisupervised,
                1.0,
                trace_mode(opts),
            ),
            splits: vec![EvalSplit::Test],
        });
    }
    cells
}

/// Runs a named suite end to end (generate, train, evaluate per cell) and
/// writes one consolidated comparison table.
pub fn cmd_reproduce(suite: &str, opts: &SuiteOptions) -> Result<SuiteOutcome> {
    let cells = match suite {
        "full-grid" => full_grid_cells(opts),
        "label-ablation" => label_ablation_cells(opts),
        "t-intersection" => t_intersection_cells(opts),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown suite '{other}' (expected full-grid, label-ablation, or t-intersection)"
            )))
        }
    };

    let mut rows = Vec::new();
    let mut k_values = vec![1, 40, 80];
    for cell in &cells {
        let cfg = &cell.cfg;
        k_values = cfg.k_values.clone();
        let (train_path, test_path) = cmd_generate(cfg, false)?;
        let artifact = cmd_train(cfg, &train_path)?;
        for &split in &cell.splits {
            let path = match split {
                EvalSplit::Train => &train_path,
                EvalSplit::Test => &test_path,
            };
            let report = cmd_evaluate(cfg, &artifact, path, split)?;
            rows.push(SuiteRow {
                scene: cell.name.split('_').next().unwrap_or("?").to_string(),
                method: cfg.method,
                regime: cfg.regime,
                split,
                report,
            });
        }
    }

    let table = summary_table(&rows, &k_values);
    fs::create_dir_all(&opts.output_dir)?;
    fs::write(opts.output_dir.join("summary.txt"), &table)?;
    fs::write(opts.output_dir.join("summary.csv"), summary_csv(&rows, &k_values))?;
    Ok(SuiteOutcome { rows, table })
}
