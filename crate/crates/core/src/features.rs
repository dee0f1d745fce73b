//! CSI-to-feature transform: feature scaling, 2-D DFT to the beamspace/delay
//! domain, entry-wise magnitude, and subcarrier stacking.
//!
//! The DFT is the unnormalized forward transform
//!
//! ```text
//! X[p,q] = sum_{b,k} h[b,k] * exp(-j*2*pi*(p*b/B + q*k/S))
//! ```
//!
//! and the feature vector stacks `|X|` column-major over the S transformed
//! subcarrier columns: `x[q*B + p] = |X[p,q]|`. Taking magnitudes discards
//! the global carrier phase, which is uninformative about position.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::CsiMatrix;

/// Bumped whenever sigma semantics, the DFT convention, or the stacking order
/// change; persisted datasets carry it so stale files are rejected.
pub const PIPELINE_VERSION: u32 = 1;

/// Feature pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Exponent of the norm normalization; 1.0 removes absolute path-loss
    /// scale (unit mean energy per entry), 0.0 leaves the CSI untouched.
    pub sigma: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { sigma: 1.0 }
    }
}

/// Real nonnegative channel feature vector of length B*S.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Rescales CSI by `(B*S)^(sigma/2) / ||h||_F^sigma`.
pub fn feature_scale(h: &CsiMatrix, sigma: f64) -> Result<CsiMatrix> {
    let fro = h.frobenius_norm();
    if fro == 0.0 {
        return Err(Error::DegenerateInput("all-zero CSI matrix".into()));
    }
    let entries_count = (h.num_antennas * h.num_subcarriers) as f64;
    let factor = entries_count.powf(sigma / 2.0) / fro.powf(sigma);
    Ok(CsiMatrix {
        num_antennas: h.num_antennas,
        num_subcarriers: h.num_subcarriers,
        entries: h.entries.iter().map(|e| e * factor).collect(),
        ue_position: h.ue_position.clone(),
    })
}

/// Unnormalized 2-D DFT over antennas (rows) and subcarriers (columns),
/// evaluated as a row pass followed by a column pass.
pub fn dft2(h: &CsiMatrix) -> Vec<Complex64> {
    let b_count = h.num_antennas;
    let s_count = h.num_subcarriers;
    let twiddle = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(1.0, -std::f64::consts::TAU * i as f64 / n as f64))
            .collect()
    };
    let wb = twiddle(b_count);
    let ws = twiddle(s_count);

    // transform along antennas for each subcarrier column
    let mut stage = vec![Complex64::new(0.0, 0.0); b_count * s_count];
    for q in 0..s_count {
        for p in 0..b_count {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..b_count {
                acc += h.entries[b * s_count + q] * wb[(p * b) % b_count];
            }
            stage[p * s_count + q] = acc;
        }
    }
    // then along subcarriers for each beam row
    let mut out = vec![Complex64::new(0.0, 0.0); b_count * s_count];
    for p in 0..b_count {
        for q in 0..s_count {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..s_count {
                acc += stage[p * s_count + k] * ws[(q * k) % s_count];
            }
            out[p * s_count + q] = acc;
        }
    }
    out
}

/// Full pipeline: scale, transform to beamspace/delay, take magnitudes, stack
/// column-major over subcarriers.
pub fn csi_to_features(h: &CsiMatrix, sigma: f64) -> Result<FeatureVector> {
    let scaled = feature_scale(h, sigma)?;
    let spectrum = dft2(&scaled);
    let b_count = h.num_antennas;
    let s_count = h.num_subcarriers;
    let mut values = vec![0.0; b_count * s_count];
    for p in 0..b_count {
        for q in 0..s_count {
            values[q * b_count + p] = spectrum[p * s_count + q].norm();
        }
    }
    Ok(FeatureVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_scene, place_uniform, synth_csi, SceneConfig};
    use crate::Position;

    fn matrix(b: usize, s: usize, entries: Vec<Complex64>) -> CsiMatrix {
        CsiMatrix { num_antennas: b, num_subcarriers: s, entries, ue_position: None }
    }

    /// Brute-force double-sum DFT, the independent oracle for dft2.
    fn dft2_naive(h: &CsiMatrix) -> Vec<Complex64> {
        let (bc, sc) = (h.num_antennas, h.num_subcarriers);
        let mut out = vec![Complex64::new(0.0, 0.0); bc * sc];
        for p in 0..bc {
            for q in 0..sc {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..bc {
                    for k in 0..sc {
                        let phase = -std::f64::consts::TAU
                            * (p as f64 * b as f64 / bc as f64 + q as f64 * k as f64 / sc as f64);
                        acc += h.entries[b * sc + k] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[p * sc + q] = acc;
            }
        }
        out
    }

    fn random_matrix(b: usize, s: usize, seed: u64) -> CsiMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..b * s)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        matrix(b, s, entries)
    }

    #[test]
    fn feature_scale_fixed_point_and_invariance() {
        // ||h||_F = sqrt(B*S) is the fixed point of sigma = 1
        let h = matrix(2, 2, vec![Complex64::new(1.0, 0.0); 4]);
        let scaled = feature_scale(&h, 1.0).unwrap();
        for (a, b) in scaled.entries.iter().zip(&h.entries) {
            assert!((a - b).norm() < 1e-12);
        }

        // scale invariance
        let h = random_matrix(4, 3, 5);
        let mut h10 = h.clone();
        for e in &mut h10.entries {
            *e *= 10.0;
        }
        let a = feature_scale(&h, 1.0).unwrap();
        let b = feature_scale(&h10, 1.0).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x - y).norm() < 1e-12);
        }

        // sigma = 0 is the identity
        let c = feature_scale(&h, 0.0).unwrap();
        assert_eq!(c.entries, h.entries);
    }

    #[test]
    fn feature_scale_rejects_zero_matrix() {
        let h = matrix(2, 2, vec![Complex64::new(0.0, 0.0); 4]);
        assert!(matches!(feature_scale(&h, 1.0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn dft2_matches_double_sum_oracle() {
        for seed in 0..6 {
            let h = random_matrix(8, 4, seed);
            let fast = dft2(&h);
            let slow = dft2_naive(&h);
            let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() / scale < 1e-10);
            }
        }
    }

    #[test]
    fn constant_csi_concentrates_at_dc() {
        let h = matrix(32, 8, vec![Complex64::new(1.0, 0.0); 256]);
        let x = csi_to_features(&h, 0.0).unwrap();
        assert!((x.values[0] - 256.0).abs() < 1e-9);
        assert!(x.values[1..].iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn impulse_csi_has_flat_spectrum() {
        let mut entries = vec![Complex64::new(0.0, 0.0); 256];
        entries[0] = Complex64::new(1.0, 0.0);
        let h = matrix(32, 8, entries);
        let x = csi_to_features(&h, 0.0).unwrap();
        assert!(x.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    /// Parseval for the unnormalized DFT: ||X||^2 = B*S*||h||^2. With
    /// sigma = 1 scaling, ||h_scaled||^2 = B*S, so ||x||^2 = (B*S)^2. The
    /// double-sum oracle confirms the constant on every instance.
    #[test]
    fn feature_energy_matches_parseval_constant() {
        for seed in 10..15 {
            let h = random_matrix(8, 4, seed);
            let x = csi_to_features(&h, 1.0).unwrap();
            let energy: f64 = x.values.iter().map(|v| v * v).sum();
            let d = (h.num_antennas * h.num_subcarriers) as f64;
            assert!(
                (energy - d * d).abs() / (d * d) < 1e-10,
                "energy {energy} vs {}",
                d * d
            );

            let oracle: f64 = dft2_naive(&feature_scale(&h, 1.0).unwrap())
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            assert!((energy - oracle).abs() / oracle < 1e-10);
        }
    }

    #[test]
    fn features_invariant_to_power_and_phase() {
        let scene = make_scene(SceneConfig::default()).unwrap();
        let p = place_uniform(&scene.config, 1, 3).remove(0);
        let h = synth_csi(&scene, &p).unwrap();
        let x = csi_to_features(&h, 1.0).unwrap();

        let mut boosted = h.clone();
        for e in &mut boosted.entries {
            *e *= 3.7;
        }
        let xb = csi_to_features(&boosted, 1.0).unwrap();
        for (a, b) in x.values.iter().zip(&xb.values) {
            assert!((a - b).abs() < 1e-9);
        }

        let rot = Complex64::from_polar(1.0, 1.234);
        let mut rotated = h.clone();
        for e in &mut rotated.entries {
            *e *= rot;
        }
        let xr = csi_to_features(&rotated, 1.0).unwrap();
        for (a, b) in x.values.iter().zip(&xr.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn feature_vectors_are_nonnegative_and_sized() {
        let scene = make_scene(SceneConfig::default()).unwrap();
        let h = synth_csi(&scene, &Position::xy(20.0, 35.0)).unwrap();
        let x = csi_to_features(&h, 1.0).unwrap();
        assert_eq!(x.len(), 256);
        assert!(x.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }
}
