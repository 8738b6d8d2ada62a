//! Digital plant-stem phantom and measurement simulation.
//!
//! The phantom is a static stem cross-section (outer wall ring, textured
//! interior, empty exterior) with a handful of circular contrast-agent
//! regions whose radius and intensity grow linearly from zero at the first
//! frame to their peak at the last frame.
//!
//! Measurements are simulated on a supersampled grid with a finer detector
//! array, then binned back down, so the simulation operator never equals
//! the reconstruction operator; Gaussian noise is added after binning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::projector::{radon_forward, Geometry};
use crate::types::{Image2D, Sinogram, SinogramStack, VolumeStack};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PhantomConfig {
    /// Image side length N (square frames).
    pub side: usize,
    /// Number of time frames T.
    pub frames: usize,
    /// Number of contrast-agent spreading points.
    pub spread_points: usize,
    pub seed: u64,
    /// Attenuation of the stem interior tissue.
    pub background_level: f64,
    /// Attenuation of the outer wall ring.
    pub ring_level: f64,
    /// Peak additive attenuation of the contrast agent (reached at the last
    /// frame).
    pub agent_peak: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            side: 256,
            frames: 34,
            spread_points: 5,
            seed: 1,
            background_level: 0.25,
            ring_level: 0.5,
            agent_peak: 0.5,
        }
    }
}

impl PhantomConfig {
    /// Desk-scale preset used throughout the test pipeline.
    pub fn desk() -> Self {
        Self {
            side: 64,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NoiseModel {
    /// Noise std = sigma_rel * max|clean sinogram|.
    RelativeStd,
    /// Noise variance = sigma_rel * (max|clean sinogram|)^2.
    RelativeVariance,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    pub sigma_rel: f64,
    pub seed: u64,
    pub model: NoiseModel,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_rel: 0.01,
            seed: 2,
            model: NoiseModel::RelativeStd,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimulationConfig {
    /// Pixel subdivision factor for the simulation grid.
    pub supersample: usize,
    /// Adjacent fine detector bins averaged into one output bin.
    pub bin_factor: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            supersample: 2,
            bin_factor: 2,
        }
    }
}

/// A contrast-agent spreading point: center in pixel coordinates and the
/// radius reached at the final frame.
#[derive(Debug, Clone, Copy)]
pub struct AgentRegion {
    pub center_row: f64,
    pub center_col: f64,
    pub max_radius: f64,
}

// Distinct deterministic streams for the independent random ingredients.
fn texture_rng(cfg: &PhantomConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1))
}

fn agent_rng(cfg: &PhantomConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(2))
}

/// The agent spreading points of a phantom configuration (deterministic in
/// the seed). Centers stay far enough inside the stem that the fully grown
/// regions never touch the wall.
pub fn agent_regions(cfg: &PhantomConfig) -> Vec<AgentRegion> {
    let n = cfg.side as f64;
    let c = (n - 1.0) / 2.0;
    let mut rng = agent_rng(cfg);
    let ring_dist = 0.22 * n;
    let max_radius = 0.09 * n;
    (0..cfg.spread_points)
        .map(|i| {
            let base = 2.0 * std::f64::consts::PI * i as f64 / cfg.spread_points as f64;
            let jitter: f64 = rng.gen_range(-0.25..0.25);
            let radial: f64 = rng.gen_range(0.75..1.15);
            let ang = base + jitter;
            AgentRegion {
                center_row: c + ring_dist * radial * ang.sin(),
                center_col: c + ring_dist * radial * ang.cos(),
                max_radius,
            }
        })
        .collect()
}

/// Boolean mask (row-major) of the union of fully grown agent regions,
/// including the half-pixel anti-aliased rim of the rendered disks.
pub fn agent_region_mask(cfg: &PhantomConfig) -> Vec<bool> {
    let n = cfg.side;
    let regions = agent_regions(cfg);
    let mut mask = vec![false; n * n];
    for (idx, m) in mask.iter_mut().enumerate() {
        let (row, col) = ((idx / n) as f64, (idx % n) as f64);
        *m = regions.iter().any(|r| {
            let d = ((row - r.center_row).powi(2) + (col - r.center_col).powi(2)).sqrt();
            d <= r.max_radius + 0.5
        });
    }
    mask
}

// Pixel coverage of a disk edge, one-pixel linear ramp.
#[inline]
fn coverage(dist: f64, radius: f64) -> f64 {
    (radius - dist + 0.5).clamp(0.0, 1.0)
}

/// Generate the dynamic stem phantom.
pub fn make_stem_phantom(cfg: &PhantomConfig) -> Result<VolumeStack> {
    if cfg.side < 16 {
        return Err(Error::InvalidArgument(
            "phantom side too small to place spreading points".into(),
        ));
    }
    if cfg.frames == 0 || cfg.spread_points == 0 {
        return Err(Error::InvalidArgument(
            "phantom needs frames >= 1 and spread_points >= 1".into(),
        ));
    }
    let n = cfg.side;
    let nf = n as f64;
    let c = (nf - 1.0) / 2.0;
    let outer = 0.46 * nf;
    let inner = 0.40 * nf;

    // Smooth tissue texture: a fixed set of random bumps, identical in all
    // frames.
    let mut rng = texture_rng(cfg);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..30)
        .map(|_| {
            let row = rng.gen_range(0.15 * nf..0.85 * nf);
            let col = rng.gen_range(0.15 * nf..0.85 * nf);
            let sigma = rng.gen_range(0.03 * nf..0.09 * nf);
            let amp = rng.gen_range(-0.15..0.15);
            (row, col, sigma, amp)
        })
        .collect();

    let mut background = vec![0.0; n * n];
    for (idx, px) in background.iter_mut().enumerate() {
        let (row, col) = ((idx / n) as f64, (idx % n) as f64);
        let d = ((row - c).powi(2) + (col - c).powi(2)).sqrt();
        let in_outer = coverage(d, outer);
        if in_outer == 0.0 {
            continue;
        }
        let in_inner = coverage(d, inner);
        let mut texture = 0.0;
        if in_inner > 0.0 {
            for &(br, bc, bs, ba) in &bumps {
                let d2 = (row - br).powi(2) + (col - bc).powi(2);
                texture += ba * (-d2 / (2.0 * bs * bs)).exp();
            }
            texture = texture.clamp(-0.5, 0.5);
        }
        let tissue = cfg.background_level * (1.0 + texture);
        // Smooth blend wall <-> tissue at the inner edge, wall -> air at the
        // outer edge.
        *px = in_outer * (in_inner * tissue + (1.0 - in_inner) * cfg.ring_level);
    }

    let regions = agent_regions(cfg);
    let mut data = Vec::with_capacity(n * n * cfg.frames);
    for t in 0..cfg.frames {
        let frac = if cfg.frames == 1 {
            1.0
        } else {
            t as f64 / (cfg.frames - 1) as f64
        };
        let mut frame = background.clone();
        if frac > 0.0 {
            let level = cfg.agent_peak * frac;
            for r in &regions {
                let radius = r.max_radius * frac;
                let r0 = (r.center_row - radius - 1.0).floor().max(0.0) as usize;
                let r1 = ((r.center_row + radius + 1.0).ceil() as usize).min(n - 1);
                let c0 = (r.center_col - radius - 1.0).floor().max(0.0) as usize;
                let c1 = ((r.center_col + radius + 1.0).ceil() as usize).min(n - 1);
                for row in r0..=r1 {
                    for col in c0..=c1 {
                        let d = ((row as f64 - r.center_row).powi(2)
                            + (col as f64 - r.center_col).powi(2))
                        .sqrt();
                        frame[row * n + col] += level * coverage(d, radius);
                    }
                }
            }
        }
        data.extend_from_slice(&frame);
    }
    VolumeStack::new(n, n, cfg.frames, data)
}

/// Nearest-neighbor pixel subdivision by `factor` per axis, so the truth is
/// identical at both scales and only the operators differ.
fn upsample(frame: &[f64], n: usize, factor: usize) -> Vec<f64> {
    let m = n * factor;
    let mut out = vec![0.0; m * m];
    for row in 0..m {
        let src_row = row / factor;
        for col in 0..m {
            out[row * m + col] = frame[src_row * n + col / factor];
        }
    }
    out
}

/// Simulate noisy measurements of a truth stack through `geometry`.
///
/// Each frame is projected on a `supersample`-times finer grid with a
/// matching finer detector array, binned by averaging `bin_factor` adjacent
/// bins, and finally corrupted by additive Gaussian noise whose scale is
/// relative to the peak of the clean binned stack. Noise is added after
/// binning so its level is known exactly.
pub fn simulate_measurements(
    truth: &VolumeStack,
    geometry: &Geometry,
    sim: &SimulationConfig,
    noise: &NoiseConfig,
) -> Result<SinogramStack> {
    if truth.width() != truth.height() || truth.width() != geometry.image_size {
        return Err(Error::ShapeMismatch(format!(
            "truth frames {}x{} do not match geometry size {}",
            truth.width(),
            truth.height(),
            geometry.image_size
        )));
    }
    if sim.supersample == 0 || sim.bin_factor == 0 {
        return Err(Error::InvalidArgument(
            "supersample and bin_factor must be positive".into(),
        ));
    }
    let fine_det = geometry.detectors * sim.supersample;
    if fine_det % sim.bin_factor != 0 {
        return Err(Error::ShapeMismatch(format!(
            "supersampled detector count {fine_det} not divisible by bin factor {}",
            sim.bin_factor
        )));
    }
    if noise.sigma_rel < 0.0 {
        return Err(Error::InvalidArgument("sigma_rel must be >= 0".into()));
    }
    let out_det = fine_det / sim.bin_factor;
    let s = sim.supersample;
    let n = geometry.image_size;
    // Fine geometry expressed in fine pixel units: one coarse pixel is s
    // fine pixels, so the detector spacing keeps its numeric value.
    let fine_geom = Geometry::new(
        n * s,
        fine_det,
        geometry.detector_spacing,
        geometry.angles.clone(),
    )?;

    let clean: Vec<Vec<f64>> = (0..truth.frames())
        .into_par_iter()
        .map(|t| {
            let fine = upsample(truth.frame(t), n, s);
            let img = Image2D::new(n * s, n * s, fine).expect("fine frame");
            let sino = radon_forward(&img, &fine_geom).expect("fine projection");
            // Line integrals back to coarse units, then detector binning.
            let scale = 1.0 / s as f64;
            let p = geometry.angles.len();
            let mut out = vec![0.0; p * out_det];
            for ai in 0..p {
                let row = sino.row(ai);
                for d in 0..out_det {
                    let mut acc = 0.0;
                    for b in 0..sim.bin_factor {
                        acc += row[d * sim.bin_factor + b];
                    }
                    out[ai * out_det + d] = acc * scale / sim.bin_factor as f64;
                }
            }
            out
        })
        .collect();

    let peak = clean
        .iter()
        .flat_map(|f| f.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let sigma = match noise.model {
        NoiseModel::RelativeStd => noise.sigma_rel * peak,
        NoiseModel::RelativeVariance => (noise.sigma_rel).sqrt() * peak,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut sinos = Vec::with_capacity(truth.frames());
    for frame in clean {
        let data = if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::Numeric(format!("noise model: {e}")))?;
            frame.iter().map(|&v| v + normal.sample(&mut rng)).collect()
        } else {
            frame
        };
        sinos.push(Sinogram::new(geometry.angles.clone(), out_det, data)?);
    }
    SinogramStack::new(sinos)
}

/// Read a sinogram stack from the stack file format (see [`crate::io`]).
pub fn ingest_sinogram_stack(
    path: impl AsRef<std::path::Path>,
) -> Result<(SinogramStack, crate::io::StackHeader)> {
    crate::io::read_sinogram_stack(path)
}

/// Keep an evenly spaced subset of `keep` angles out of the original set.
pub fn downsample_angles(stack: &SinogramStack, keep: usize) -> Result<SinogramStack> {
    let p = stack.angles().len();
    if keep == 0 || keep > p {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {keep} of {p} angles"
        )));
    }
    if p % keep != 0 {
        return Err(Error::InvalidArgument(format!(
            "{keep} angles is not an even subset of {p}"
        )));
    }
    let step = p / keep;
    let det = stack.detectors();
    let sinos = stack
        .frames_iter()
        .map(|s| {
            let angles: Vec<f64> = s.angles().iter().step_by(step).cloned().collect();
            let mut data = Vec::with_capacity(keep * det);
            for ai in (0..p).step_by(step) {
                data.extend_from_slice(s.row(ai));
            }
            Sinogram::new(angles, det, data)
        })
        .collect::<Result<Vec<_>>>()?;
    SinogramStack::new(sinos)
}
