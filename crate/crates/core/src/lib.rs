//! Position-revealing embeddings from wireless channel state information.
//!
//! A basestation that decodes uplink pilots sees a complex channel matrix per
//! transmission. This crate turns those matrices into beamspace/delay feature
//! vectors and trains a weight-shared (Siamese) tower that maps features into
//! a low-dimensional space, in three regimes:
//!
//! - **supervised**: every training sample carries its true position and the
//!   tower is a plain regression network;
//! - **semisupervised**: only a subset is annotated; anchor terms pin those
//!   samples while a distance-matching term over all pairs exploits the rest,
//!   with a trainable scale reconciling the two units;
//! - **unsupervised**: no positions at all; the tower learns a channel chart
//!   that preserves neighborhoods but not absolute coordinates.
//!
//! The crate also ships a geometric multipath channel simulator to generate
//! data, classical nonparametric Sammon's mapping and a plain regression
//! network as baselines, the usual embedding quality metrics (MDE, Kruskal's
//! stress, trustworthiness, continuity), and a config-driven experiment
//! runner used by the `csichart` CLI.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod math;
pub mod metrics;
pub mod nn;
mod persist;
pub mod siamese;
pub mod sim;

pub use baselines::{sammon_nonparametric, train_fcnn, Embedding, SammonConfig};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Method, SceneMode};
pub use features::{csi_to_features, FeatureVector};
pub use metrics::{MetricReport, RankReference};
pub use nn::{init_model, sgd_step, GradientSet, MlpModel, SgdConfig};
pub use siamese::{train, LossConfig, PairBatch, Regime, TrainLog};
pub use sim::{make_scene, place_square_ring, place_uniform, synth_csi, CsiMatrix, Scene, SceneConfig};

/// A point in the embedding/position space, in meters for physical positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub coords: Vec<f64>,
}

impl Position {
    pub fn xy(x: f64, y: f64) -> Position {
        Position { coords: vec![x, y] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.squared_distance(other).sqrt()
    }

    pub fn squared_distance(&self, other: &Position) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}
