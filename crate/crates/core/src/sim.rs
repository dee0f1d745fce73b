//! Synthetic multipath MIMO-OFDM channel generator with spatial consistency,
//! plus UE placement and vehicle trajectory generators.
//!
//! The propagation model is a single-bounce geometric scatterer field: a scene
//! draws a fixed set of scatterers once, and every UE transmission sees the
//! same field, so CSI is a deterministic function of UE position. LoS scenes
//! add the direct basestation path on top of the scattered paths; NLoS scenes
//! carry scattered paths only.
//!
//! Channel entries follow
//!
//! ```text
//! h[b,k] = sum_p g_p * exp(-j*2*pi*spacing*b*u_p) * exp(-j*2*pi*f_k*tau_p)
//! ```
//!
//! where `u_p` is the direction cosine of path p along the array axis, `tau_p`
//! its propagation delay, and `g_p` its complex amplitude (free-space
//! `lambda/(4*pi*d)` times the scatterer reflection gain for bounced paths).

use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Position;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn expanded(&self, margin_frac: f64) -> Rect {
        let mx = self.width() * margin_frac;
        let my = self.height() * margin_frac;
        Rect {
            x_min: self.x_min - mx,
            x_max: self.x_max + mx,
            y_min: self.y_min - my,
            y_max: self.y_max + my,
        }
    }
}

/// Scene geometry and radio parameters.
///
/// The uniform linear array sits at `bs_position` with its axis along x, so a
/// path arriving from straight ahead (equal x) hits all antennas in phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub bs_position: [f64; 3],
    pub ue_height: f64,
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    pub carrier_freq: f64,
    pub bandwidth: f64,
    /// Antenna spacing as a fraction of the carrier wavelength.
    pub antenna_spacing: f64,
    pub tx_power_dbm: f64,
    pub num_scatterers: usize,
    pub los: bool,
    pub area: Rect,
    /// Per-entry complex Gaussian noise at this SNR; `None` means noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            bs_position: [0.0, 0.0, 30.0],
            ue_height: 2.5,
            num_antennas: 32,
            num_subcarriers: 8,
            carrier_freq: 2.68e9,
            bandwidth: 20e6,
            antenna_spacing: 0.5,
            tx_power_dbm: 20.0,
            num_scatterers: 200,
            los: true,
            area: Rect { x_min: -100.0, x_max: 100.0, y_min: -100.0, y_max: 100.0 },
            snr_db: None,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 || self.num_subcarriers == 0 {
            return Err(Error::InvalidConfig("need at least one antenna and one subcarrier".into()));
        }
        if !(self.carrier_freq > self.bandwidth && self.bandwidth > 0.0) {
            return Err(Error::InvalidConfig("need carrier_freq > bandwidth > 0".into()));
        }
        if !(self.area.width() > 0.0 && self.area.height() > 0.0) {
            return Err(Error::InvalidConfig("area is degenerate".into()));
        }
        if self.num_scatterers == 0 && !self.los {
            return Err(Error::InvalidConfig(
                "NLoS scene with zero scatterers has an all-zero channel".into(),
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Subcarrier frequencies spread uniformly over the bandwidth.
    pub fn subcarrier_freqs(&self) -> Vec<f64> {
        let s = self.num_subcarriers;
        (0..s)
            .map(|k| self.carrier_freq - self.bandwidth / 2.0 + k as f64 * self.bandwidth / s as f64)
            .collect()
    }
}

/// Fixed scatterer field; identical for every UE in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererMap {
    pub positions: Vec<[f64; 3]>,
    pub gains: Vec<Complex64>,
}

/// A validated scene: config plus its frozen scatterer field.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub scatterers: ScattererMap,
}

/// Complex B x S channel estimate for one UE transmission (row-major, rows =
/// antennas).
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    pub entries: Vec<Complex64>,
    pub ue_position: Option<Position>,
}

impl CsiMatrix {
    #[inline]
    pub fn get(&self, b: usize, k: usize) -> Complex64 {
        self.entries[b * self.num_subcarriers + k]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Draws the scatterer field for a scene. Scatterers fall uniformly in a 25%
/// expanded bounding box around the area, at heights up to twice the BS
/// height; reflection gains have Rayleigh magnitude with unit mean and
/// uniform phase.
pub fn make_scene(config: SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bbox = config.area.expanded(0.25);
    let ux = Uniform::new(bbox.x_min, bbox.x_max);
    let uy = Uniform::new(bbox.y_min, bbox.y_max);
    let uz = Uniform::new(0.0, (2.0 * config.bs_position[2]).max(1.0));
    // Rayleigh magnitude by inverse CDF, scaled for unit mean:
    // X = sigma * sqrt(-2 ln U) with E[X] = sigma * sqrt(pi/2).
    let rayleigh_sigma = (2.0 / std::f64::consts::PI).sqrt();
    let uphase = Uniform::new(0.0, std::f64::consts::TAU);

    let mut positions = Vec::with_capacity(config.num_scatterers);
    let mut gains = Vec::with_capacity(config.num_scatterers);
    for _ in 0..config.num_scatterers {
        positions.push([ux.sample(&mut rng), uy.sample(&mut rng), uz.sample(&mut rng)]);
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let mag = rayleigh_sigma * (-2.0 * u.ln()).sqrt();
        let phase = uphase.sample(&mut rng);
        gains.push(Complex64::from_polar(mag, phase));
    }
    Ok(Scene { config, scatterers: ScattererMap { positions, gains } })
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

struct PathComponent {
    gain: Complex64,
    /// Direction cosine along the array axis at the BS.
    axial_cos: f64,
    delay: f64,
}

/// Synthesizes the CSI matrix seen at the BS for a UE at planar position
/// `ue` (height taken from the scene config).
pub fn synth_csi(scene: &Scene, ue: &Position) -> Result<CsiMatrix> {
    let cfg = &scene.config;
    if ue.dim() < 2 {
        return Err(Error::ShapeMismatch("UE position needs at least x and y".into()));
    }
    let ue3 = [ue.coords[0], ue.coords[1], cfg.ue_height];
    let bs = cfg.bs_position;
    let lambda = cfg.wavelength();
    let tx_amp = 10f64.powf((cfg.tx_power_dbm - 30.0) / 20.0);

    let mut paths = Vec::with_capacity(scene.scatterers.positions.len() + 1);
    if cfg.los {
        let v = sub3(ue3, bs);
        let d = norm3(v);
        if d < 1e-9 {
            return Err(Error::Singularity("UE coincides with the BS".into()));
        }
        paths.push(PathComponent {
            gain: Complex64::new(tx_amp * lambda / (4.0 * std::f64::consts::PI * d), 0.0),
            axial_cos: v[0] / d,
            delay: d / SPEED_OF_LIGHT,
        });
    }
    for (s, g) in scene.scatterers.positions.iter().zip(&scene.scatterers.gains) {
        let bs_to_s = sub3(*s, bs);
        let d1 = norm3(bs_to_s);
        let d2 = norm3(sub3(ue3, *s));
        let d_total = d1 + d2;
        if d1 < 1e-9 || d_total < 1e-9 {
            return Err(Error::Singularity("scatterer coincides with the BS".into()));
        }
        paths.push(PathComponent {
            gain: g * (tx_amp * lambda / (4.0 * std::f64::consts::PI * d_total)),
            axial_cos: bs_to_s[0] / d1,
            delay: d_total / SPEED_OF_LIGHT,
        });
    }

    let b_count = cfg.num_antennas;
    let s_count = cfg.num_subcarriers;
    let freqs = cfg.subcarrier_freqs();
    let mut entries = vec![Complex64::new(0.0, 0.0); b_count * s_count];
    let mut steering = vec![Complex64::new(0.0, 0.0); b_count];
    let mut tones = vec![Complex64::new(0.0, 0.0); s_count];
    for p in &paths {
        let step = Complex64::from_polar(1.0, -std::f64::consts::TAU * cfg.antenna_spacing * p.axial_cos);
        let mut acc = Complex64::new(1.0, 0.0);
        for sbuf in steering.iter_mut() {
            *sbuf = acc;
            acc *= step;
        }
        for (k, f) in freqs.iter().enumerate() {
            // phase = -2*pi*f*tau, reduced mod 1 cycle before the trig call
            let cycles = f * p.delay;
            let frac = cycles - cycles.floor();
            tones[k] = p.gain * Complex64::from_polar(1.0, -std::f64::consts::TAU * frac);
        }
        for (b, st) in steering.iter().enumerate() {
            let row = &mut entries[b * s_count..(b + 1) * s_count];
            for (e, t) in row.iter_mut().zip(&tones) {
                *e += st * t;
            }
        }
    }

    if let Some(snr_db) = cfg.snr_db {
        let mean_power = entries.iter().map(|c| c.norm_sqr()).sum::<f64>() / entries.len() as f64;
        let noise_var = mean_power * 10f64.powf(-snr_db / 10.0);
        let sigma = (noise_var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_position_seed(cfg.seed, ue));
        let normal = Normal::new(0.0, 1.0).unwrap();
        for e in &mut entries {
            *e += Complex64::new(sigma * normal.sample(&mut rng), sigma * normal.sample(&mut rng));
        }
    }

    Ok(CsiMatrix {
        num_antennas: b_count,
        num_subcarriers: s_count,
        entries,
        ue_position: Some(ue.clone()),
    })
}

/// Noise must be a pure function of (scene, position) so repeated calls agree.
fn mix_position_seed(seed: u64, ue: &Position) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for c in &ue.coords {
        h ^= c.to_bits();
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// `n` i.i.d. uniform planar positions in the scene area.
pub fn place_uniform(scene: &SceneConfig, n: usize, seed: u64) -> Vec<Position> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ux = Uniform::new(scene.area.x_min, scene.area.x_max);
    let uy = Uniform::new(scene.area.y_min, scene.area.y_max);
    (0..n)
        .map(|_| Position::xy(ux.sample(&mut rng), uy.sample(&mut rng)))
        .collect()
}

/// `n` points evenly spaced along the perimeter of a centered square whose
/// side is half the (smaller) area side, starting at the lower-left corner
/// and walking counterclockwise.
pub fn place_square_ring(scene: &SceneConfig, n: usize) -> Result<Vec<Position>> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("square ring needs n >= 4, got {n}")));
    }
    let (cx, cy) = scene.area.center();
    let side = scene.area.width().min(scene.area.height()) / 2.0;
    let half = side / 2.0;
    let perimeter = 4.0 * side;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = i as f64 * perimeter / n as f64;
        let (x, y);
        if s < side {
            x = cx - half + s;
            y = cy - half;
        } else if s < 2.0 * side {
            s -= side;
            x = cx + half;
            y = cy - half + s;
        } else if s < 3.0 * side {
            s -= 2.0 * side;
            x = cx + half - s;
            y = cy + half;
        } else {
            s -= 3.0 * side;
            x = cx - half;
            y = cy + half - s;
        }
        out.push(Position::xy(x, y));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// T-intersection traces
// ---------------------------------------------------------------------------

/// One vehicle trajectory: strictly increasing timestamps, consecutive
/// positions no farther apart than speed * dt.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<(f64, Position)>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest consecutive step distance, for the finite-velocity check.
    pub fn max_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].1.distance(&w[1].1))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    West,
    East,
    South,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::West, Arm::East, Arm::South];

    /// Unit travel direction when entering the junction from this arm.
    fn inbound_dir(self) -> [f64; 2] {
        match self {
            Arm::West => [1.0, 0.0],
            Arm::East => [-1.0, 0.0],
            Arm::South => [0.0, 1.0],
        }
    }
}

/// Road geometry of the T-intersection: a through road along x plus a stem
/// to the south edge, centered on the scene area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadLayout {
    pub junction: [f64; 2],
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub half_width: f64,
    pub turn_radius: f64,
}

impl RoadLayout {
    pub fn for_scene(scene: &SceneConfig) -> RoadLayout {
        let (cx, cy) = scene.area.center();
        RoadLayout {
            junction: [cx, cy],
            x_min: scene.area.x_min,
            x_max: scene.area.x_max,
            y_min: scene.area.y_min,
            half_width: 4.0,
            turn_radius: 6.0,
        }
    }

    fn edge_point(&self, arm: Arm) -> [f64; 2] {
        match arm {
            Arm::West => [self.x_min, self.junction[1]],
            Arm::East => [self.x_max, self.junction[1]],
            Arm::South => [self.junction[0], self.y_min],
        }
    }

    /// Distance from a point to the nearest arm centerline.
    pub fn distance_to_centerline(&self, p: &Position) -> f64 {
        let (x, y) = (p.coords[0], p.coords[1]);
        let [jx, jy] = self.junction;
        let d_through = if x < self.x_min {
            ((x - self.x_min).powi(2) + (y - jy).powi(2)).sqrt()
        } else if x > self.x_max {
            ((x - self.x_max).powi(2) + (y - jy).powi(2)).sqrt()
        } else {
            (y - jy).abs()
        };
        let d_stem = if y > jy {
            ((x - jx).powi(2) + (y - jy).powi(2)).sqrt()
        } else if y < self.y_min {
            ((x - jx).powi(2) + (y - self.y_min).powi(2)).sqrt()
        } else {
            (x - jx).abs()
        };
        d_through.min(d_stem)
    }
}

enum PathSeg {
    Line { a: [f64; 2], b: [f64; 2] },
    /// Circular arc walked from angle a0 by `sweep` radians (signed, ccw > 0).
    Arc { center: [f64; 2], radius: f64, a0: f64, sweep: f64 },
}

impl PathSeg {
    fn length(&self) -> f64 {
        match self {
            PathSeg::Line { a, b } => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
            PathSeg::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn point_at(&self, s: f64) -> [f64; 2] {
        match self {
            PathSeg::Line { a, b } => {
                let len = self.length();
                let t = if len > 0.0 { s / len } else { 0.0 };
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            }
            PathSeg::Arc { center, radius, a0, sweep } => {
                let ang = a0 + sweep.signum() * s / radius;
                [center[0] + radius * ang.cos(), center[1] + radius * ang.sin()]
            }
        }
    }
}

fn rot_left(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Builds the lane path for an (entry, exit) pair at a constant signed lateral
/// offset from the centerline (positive = left of travel).
fn lane_path(layout: &RoadLayout, entry: Arm, exit: Arm, offset: f64) -> Vec<PathSeg> {
    let u = entry.inbound_dir();
    let w = [-exit.inbound_dir()[0], -exit.inbound_dir()[1]]; // outbound travel dir
    let start = layout.edge_point(entry);
    let end = layout.edge_point(exit);
    let [jx, jy] = layout.junction;
    let left_u = rot_left(u);
    let left_w = rot_left(w);

    if u == w {
        // straight through
        return vec![PathSeg::Line {
            a: [start[0] + offset * left_u[0], start[1] + offset * left_u[1]],
            b: [end[0] + offset * left_u[0], end[1] + offset * left_u[1]],
        }];
    }

    let r = layout.turn_radius;
    let cross = u[0] * w[1] - u[1] * w[0];
    // Arc center sits at distance r from both centerlines, on the turn side.
    let n_u = if cross > 0.0 { left_u } else { [-left_u[0], -left_u[1]] };
    let tangent_in = [jx - r * u[0], jy - r * u[1]];
    let tangent_out = [jx + r * w[0], jy + r * w[1]];
    let center = [tangent_in[0] + r * n_u[0], tangent_in[1] + r * n_u[1]];
    // Offsetting left grows a right turn's radius and shrinks a left turn's.
    let r_off = if cross > 0.0 { r - offset } else { r + offset };

    let a_in = [tangent_in[0] + offset * left_u[0], tangent_in[1] + offset * left_u[1]];
    let a_out = [tangent_out[0] + offset * left_w[0], tangent_out[1] + offset * left_w[1]];
    let a0 = (a_in[1] - center[1]).atan2(a_in[0] - center[0]);
    let sweep = if cross > 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        -std::f64::consts::FRAC_PI_2
    };

    vec![
        PathSeg::Line {
            a: [start[0] + offset * left_u[0], start[1] + offset * left_u[1]],
            b: a_in,
        },
        PathSeg::Arc { center, radius: r_off, a0, sweep },
        PathSeg::Line {
            a: a_out,
            b: [end[0] + offset * left_w[0], end[1] + offset * left_w[1]],
        },
    ]
}

/// Walks a lane path at constant speed, sampling every `dt` seconds. All
/// consecutive samples are exactly `speed * dt` apart along the path (so
/// chord distances never exceed it).
pub fn gen_trace(
    layout: &RoadLayout,
    entry: Arm,
    exit: Arm,
    lane_offset: f64,
    speed: f64,
    dt: f64,
) -> Result<Trace> {
    if entry == exit {
        return Err(Error::InvalidConfig("trace cannot exit on its entry arm".into()));
    }
    if !(speed > 0.0 && dt > 0.0) {
        return Err(Error::InvalidConfig("speed and dt must be positive".into()));
    }
    let segs = lane_path(layout, entry, exit, lane_offset);
    let total: f64 = segs.iter().map(|s| s.length()).sum();
    let step = speed * dt;
    let mut samples = Vec::new();
    let mut s = 0.0;
    let mut i = 0;
    while s <= total + 1e-9 {
        let mut local = s;
        let mut seg_idx = 0;
        while seg_idx + 1 < segs.len() && local > segs[seg_idx].length() {
            local -= segs[seg_idx].length();
            seg_idx += 1;
        }
        let local = local.min(segs[seg_idx].length());
        let p = segs[seg_idx].point_at(local);
        samples.push((i as f64 * dt, Position::xy(p[0], p[1])));
        s += step;
        i += 1;
    }
    Ok(Trace { samples })
}

/// Random traces through the T-intersection: entry arm, permitted exit arm,
/// and lane offset drawn per trace.
pub fn gen_t_intersection_traces(
    scene: &SceneConfig,
    num_traces: usize,
    speed: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<Trace>> {
    if num_traces == 0 {
        return Err(Error::InvalidConfig("need at least one trace".into()));
    }
    let layout = RoadLayout::for_scene(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset_dist = Uniform::new_inclusive(-2.0, 2.0);
    let mut traces = Vec::with_capacity(num_traces);
    for _ in 0..num_traces {
        let entry = Arm::ALL[rng.gen_range(0..3)];
        let exits: Vec<Arm> = Arm::ALL.iter().copied().filter(|&a| a != entry).collect();
        let exit = exits[rng.gen_range(0..2)];
        let offset = offset_dist.sample(&mut rng);
        traces.push(gen_trace(&layout, entry, exit, offset, speed, dt)?);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn los_only_scene() -> Scene {
        let cfg = SceneConfig { num_scatterers: 0, los: true, ..SceneConfig::default() };
        make_scene(cfg).unwrap()
    }

    #[test]
    fn make_scene_validates_degenerate_nlos() {
        let cfg = SceneConfig { num_scatterers: 0, los: false, ..SceneConfig::default() };
        assert!(matches!(make_scene(cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn make_scene_zero_scatterer_los_is_fine() {
        let scene = los_only_scene();
        assert!(scene.scatterers.positions.is_empty());
    }

    #[test]
    fn make_scene_is_deterministic() {
        let cfg = SceneConfig { seed: 42, ..SceneConfig::default() };
        let a = make_scene(cfg.clone()).unwrap();
        let b = make_scene(cfg).unwrap();
        assert_eq!(a.scatterers, b.scatterers);
    }

    #[test]
    fn broadside_ue_has_equal_phase_across_antennas() {
        let scene = los_only_scene();
        // straight ahead of the array: same x as the BS
        let h = synth_csi(&scene, &Position::xy(0.0, 80.0)).unwrap();
        for k in 0..h.num_subcarriers {
            let first = h.get(0, k);
            for b in 1..h.num_antennas {
                let e = h.get(b, k);
                assert!((e - first).norm() < 1e-10 * first.norm());
            }
        }
    }

    #[test]
    fn los_amplitude_follows_inverse_distance() {
        let mut cfg = SceneConfig {
            num_scatterers: 0,
            los: true,
            num_subcarriers: 1,
            ue_height: 30.0, // same height as the BS so planar distance is exact
            ..SceneConfig::default()
        };
        cfg.area.y_max = 200.0;
        let scene = make_scene(cfg).unwrap();
        let near = synth_csi(&scene, &Position::xy(0.0, 50.0)).unwrap();
        let far = synth_csi(&scene, &Position::xy(0.0, 100.0)).unwrap();
        let ratio = near.get(0, 0).norm() / far.get(0, 0).norm();
        assert!((ratio - 2.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn synth_csi_is_deterministic_and_spatially_consistent() {
        let scene = make_scene(SceneConfig::default()).unwrap();
        let p = Position::xy(12.3, -45.6);
        let a = synth_csi(&scene, &p).unwrap();
        let b = synth_csi(&scene, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_csi_is_still_deterministic() {
        let cfg = SceneConfig { snr_db: Some(20.0), ..SceneConfig::default() };
        let scene = make_scene(cfg).unwrap();
        let p = Position::xy(5.0, 5.0);
        assert_eq!(synth_csi(&scene, &p).unwrap(), synth_csi(&scene, &p).unwrap());
        let q = Position::xy(5.0, 5.000001);
        assert_ne!(synth_csi(&scene, &p).unwrap(), synth_csi(&scene, &q).unwrap());
    }

    #[test]
    fn ue_at_bs_is_singular() {
        let mut cfg = SceneConfig { num_scatterers: 0, los: true, ..SceneConfig::default() };
        cfg.ue_height = cfg.bs_position[2];
        let scene = make_scene(cfg).unwrap();
        let at_bs = Position::xy(0.0, 0.0);
        assert!(matches!(synth_csi(&scene, &at_bs), Err(Error::Singularity(_))));
    }

    /// Relative CSI change decays to zero with the displacement. The probe
    /// steps stay a decade apart and strictly below the carrier wavelength
    /// (0.112 m) past the first, where per-path phases no longer wrap.
    #[test]
    fn csi_shrinks_continuously_in_los() {
        let scene = make_scene(SceneConfig { seed: 3, ..SceneConfig::default() }).unwrap();
        let points = place_uniform(&scene.config, 100, 99);
        let mut means = Vec::new();
        for delta in [1.0, 0.01, 1e-4] {
            let mut acc = 0.0;
            for p in &points {
                let h0 = synth_csi(&scene, p).unwrap();
                let shifted = Position::xy(p.coords[0] + delta, p.coords[1]);
                let h1 = synth_csi(&scene, &shifted).unwrap();
                let num: f64 = h0
                    .entries
                    .iter()
                    .zip(&h1.entries)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                acc += num / h0.frobenius_norm();
            }
            means.push(acc / points.len() as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "relative diffs {means:?}");
    }

    #[test]
    fn place_uniform_stays_inside_area() {
        let cfg = SceneConfig::default();
        let pts = place_uniform(&cfg, 2000, 7);
        assert_eq!(pts.len(), 2000);
        assert!(pts.iter().all(|p| cfg.area.contains(p.coords[0], p.coords[1])));
        let single = place_uniform(&cfg, 1, 1);
        assert_eq!(single.len(), 1);
        assert!(cfg.area.contains(single[0].coords[0], single[0].coords[1]));
        assert_eq!(place_uniform(&cfg, 50, 5), place_uniform(&cfg, 50, 5));
    }

    #[test]
    fn square_ring_corners_and_spacing() {
        let cfg = SceneConfig::default();
        let corners = place_square_ring(&cfg, 4).unwrap();
        let expect = [(-50.0, -50.0), (50.0, -50.0), (50.0, 50.0), (-50.0, 50.0)];
        for (p, (x, y)) in corners.iter().zip(expect) {
            assert!((p.coords[0] - x).abs() < 1e-12 && (p.coords[1] - y).abs() < 1e-12);
        }

        let ring = place_square_ring(&cfg, 200).unwrap();
        assert_eq!(ring.len(), 200);
        // perimeter arc-length spacing is constant: 400 m / 200 points
        for w in ring.windows(2) {
            let d = w[0].distance(&w[1]);
            assert!((d - 2.0).abs() < 1e-9, "gap {d}");
        }

        assert!(matches!(place_square_ring(&cfg, 3), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn straight_trace_has_exact_gaps() {
        let cfg = SceneConfig::default();
        let layout = RoadLayout::for_scene(&cfg);
        let tr = gen_trace(&layout, Arm::West, Arm::East, 0.0, 10.0, 0.1).unwrap();
        for w in tr.samples.windows(2) {
            let d = w[0].1.distance(&w[1].1);
            assert!((d - 1.0).abs() < 1e-9, "gap {d}");
        }
    }

    #[test]
    fn traces_stay_on_roads_and_respect_speed() {
        let cfg = SceneConfig::default();
        let layout = RoadLayout::for_scene(&cfg);
        let traces = gen_t_intersection_traces(&cfg, 20, 10.0, 0.1, 11).unwrap();
        assert_eq!(traces.len(), 20);
        for tr in &traces {
            assert!(tr.len() > 2);
            assert!(tr.max_step() <= 10.0 * 0.1 + 1e-9);
            for (t, p) in &tr.samples {
                assert!(*t >= 0.0);
                assert!(layout.distance_to_centerline(p) <= layout.half_width + 1e-9);
            }
            for w in tr.samples.windows(2) {
                assert!(w[1].0 > w[0].0);
            }
        }
        let again = gen_t_intersection_traces(&cfg, 20, 10.0, 0.1, 11).unwrap();
        assert_eq!(traces, again);
    }

    #[test]
    fn turning_traces_cover_all_arms() {
        let cfg = SceneConfig::default();
        let layout = RoadLayout::for_scene(&cfg);
        for (entry, exit) in [
            (Arm::West, Arm::South),
            (Arm::East, Arm::South),
            (Arm::South, Arm::West),
            (Arm::South, Arm::East),
            (Arm::East, Arm::West),
        ] {
            let tr = gen_trace(&layout, entry, exit, 1.5, 8.0, 0.25).unwrap();
            assert!(tr.max_step() <= 2.0 + 1e-9);
            for (_, p) in &tr.samples {
                assert!(
                    layout.distance_to_centerline(p) <= layout.half_width,
                    "{entry:?}->{exit:?} strayed to {p:?}"
                );
            }
        }
        assert!(gen_trace(&layout, Arm::West, Arm::West, 0.0, 1.0, 1.0).is_err());
    }
}
