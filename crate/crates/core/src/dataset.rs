//! Aligned sample collection (features, optional positions, anchor mask,
//! optional trace ids) with a versioned binary container and a CSV export.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, PIPELINE_VERSION};
use crate::persist;
use crate::sim::SceneConfig;
use crate::Position;

const DATASET_MAGIC: &[u8; 8] = b"CSIDSET1";
const DATASET_VERSION: u32 = 1;

/// Header stored with every dataset file; fixing `pipeline_version` lets the
/// trainer refuse features produced under a different convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub scene: SceneConfig,
    pub sigma: f64,
    pub pipeline_version: u32,
    pub feature_dim: usize,
    pub position_dim: usize,
    pub num_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scene: SceneConfig,
    pub sigma: f64,
    pub pipeline_version: u32,
    pub feature_dim: usize,
    pub position_dim: usize,
    pub features: Vec<FeatureVector>,
    pub positions: Vec<Option<Position>>,
    pub anchored: Vec<bool>,
    pub trace_ids: Vec<Option<u32>>,
}

impl Dataset {
    pub fn new(scene: SceneConfig, sigma: f64, feature_dim: usize, position_dim: usize) -> Dataset {
        Dataset {
            scene,
            sigma,
            pipeline_version: PIPELINE_VERSION,
            feature_dim,
            position_dim,
            features: Vec::new(),
            positions: Vec::new(),
            anchored: Vec::new(),
            trace_ids: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        features: FeatureVector,
        position: Option<Position>,
        anchored: bool,
        trace_id: Option<u32>,
    ) {
        self.features.push(features);
        self.positions.push(position);
        self.anchored.push(anchored);
        self.trace_ids.push(trace_id);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn anchored_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.anchored[i]).collect()
    }

    pub fn num_anchored(&self) -> usize {
        self.anchored.iter().filter(|&&a| a).count()
    }

    pub fn has_full_ground_truth(&self) -> bool {
        self.positions.iter().all(|p| p.is_some())
    }

    /// Sub-dataset of the anchored samples only (the 10%-labels ablation
    /// trains a fully supervised model on exactly this subset).
    pub fn anchored_subset(&self) -> Dataset {
        let mut out = Dataset::new(self.scene.clone(), self.sigma, self.feature_dim, self.position_dim);
        for i in self.anchored_indices() {
            out.push(
                self.features[i].clone(),
                self.positions[i].clone(),
                true,
                self.trace_ids[i],
            );
        }
        out
    }

    /// Copy with the anchor mask cleared, for channel-charting runs.
    pub fn without_anchors(&self) -> Dataset {
        let mut out = self.clone();
        out.anchored.iter_mut().for_each(|a| *a = false);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.positions.len() != n || self.anchored.len() != n || self.trace_ids.len() != n {
            return Err(Error::ShapeMismatch("dataset columns have differing lengths".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.len() != self.feature_dim {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} features, expected {}",
                    f.len(),
                    self.feature_dim
                )));
            }
        }
        for (i, p) in self.positions.iter().enumerate() {
            if let Some(p) = p {
                if p.dim() != self.position_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "sample {i} position has dim {}, expected {}",
                        p.dim(),
                        self.position_dim
                    )));
                }
            } else if self.anchored[i] {
                return Err(Error::InvalidInput(format!("sample {i} is anchored but has no position")));
            }
        }
        Ok(())
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            scene: self.scene.clone(),
            sigma: self.sigma,
            pipeline_version: self.pipeline_version,
            feature_dim: self.feature_dim,
            position_dim: self.position_dim,
            num_samples: self.len(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(DATASET_MAGIC)?;
        persist::write_u32(&mut w, DATASET_VERSION)?;
        let header = serde_json::to_vec(&self.header())?;
        persist::write_bytes(&mut w, &header)?;
        for i in 0..self.len() {
            persist::write_f64_slice(&mut w, &self.features[i].values)?;
            match &self.positions[i] {
                Some(p) => {
                    persist::write_u8(&mut w, 1)?;
                    persist::write_f64_slice(&mut w, &p.coords)?;
                }
                None => persist::write_u8(&mut w, 0)?,
            }
            persist::write_u8(&mut w, self.anchored[i] as u8)?;
            match self.trace_ids[i] {
                Some(id) => {
                    persist::write_u8(&mut w, 1)?;
                    persist::write_u32(&mut w, id)?;
                }
                None => persist::write_u8(&mut w, 0)?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut r = BufReader::new(File::open(path)?);
        persist::expect_magic(&mut r, DATASET_MAGIC)?;
        let version = persist::read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let header_bytes = persist::read_bytes(&mut r, 16 << 20)?;
        let header: DatasetHeader = serde_json::from_slice(&header_bytes)?;
        let mut ds = Dataset::new(header.scene, header.sigma, header.feature_dim, header.position_dim);
        ds.pipeline_version = header.pipeline_version;
        for _ in 0..header.num_samples {
            let values = persist::read_f64_vec(&mut r, header.feature_dim)?;
            let position = if persist::read_u8(&mut r)? == 1 {
                Some(Position { coords: persist::read_f64_vec(&mut r, header.position_dim)? })
            } else {
                None
            };
            let anchored = persist::read_u8(&mut r)? == 1;
            let trace_id = if persist::read_u8(&mut r)? == 1 {
                Some(persist::read_u32(&mut r)?)
            } else {
                None
            };
            ds.push(FeatureVector { values }, position, anchored, trace_id);
        }
        ds.validate()?;
        Ok(ds)
    }

    /// Plain-text export for inspection: one row per sample with position,
    /// anchor flag, trace id, and the feature entries.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "index")?;
        for d in 0..self.position_dim {
            write!(w, ",pos_{d}")?;
        }
        write!(w, ",anchored,trace_id")?;
        for d in 0..self.feature_dim {
            write!(w, ",f{d}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{i}")?;
            match &self.positions[i] {
                Some(p) => {
                    for c in &p.coords {
                        write!(w, ",{c}")?;
                    }
                }
                None => {
                    for _ in 0..self.position_dim {
                        write!(w, ",")?;
                    }
                }
            }
            write!(w, ",{}", self.anchored[i] as u8)?;
            match self.trace_ids[i] {
                Some(id) => write!(w, ",{id}")?,
                None => write!(w, ",")?,
            }
            for v in &self.features[i].values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> Dataset {
        let mut ds = Dataset::new(SceneConfig::default(), 1.0, 3, 2);
        ds.push(
            FeatureVector { values: vec![1.0, 2.0, 3.0] },
            Some(Position::xy(0.5, -0.5)),
            true,
            None,
        );
        ds.push(FeatureVector { values: vec![4.0, 5.0, 6.0] }, None, false, Some(7));
        ds.push(
            FeatureVector { values: vec![0.25, 0.125, -0.0] },
            Some(Position::xy(1.0, 2.0)),
            false,
            Some(7),
        );
        ds
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("csichart-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("toy.ds");
        let ds = toy_dataset();
        ds.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(ds, loaded);
        let path2 = dir.join("toy2.ds");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn anchored_without_position_is_rejected() {
        let mut ds = toy_dataset();
        ds.anchored[1] = true;
        assert!(matches!(ds.validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn anchored_subset_keeps_only_anchors() {
        let ds = toy_dataset();
        let sub = ds.anchored_subset();
        assert_eq!(sub.len(), 1);
        assert!(sub.anchored[0]);
        assert_eq!(sub.features[0], ds.features[0]);
    }

    #[test]
    fn csv_export_has_one_row_per_sample() {
        let dir = std::env::temp_dir().join(format!("csichart-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("toy.csv");
        let ds = toy_dataset();
        ds.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + ds.len());
        assert!(text.lines().next().unwrap().starts_with("index,pos_0,pos_1,anchored,trace_id,f0"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
