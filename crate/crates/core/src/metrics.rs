//! Quantitative image-quality metrics: relative l2 error, PSNR, and the
//! Haar-wavelet perceptual similarity index (HPSI).

use crate::error::{Error, Result};
use crate::types::{Image2D, VolumeStack};

/// PSNR reported for numerically identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Relative l2 error `||recon - reference|| / ||reference||`.
pub fn rel_l2_error(recon: &[f64], reference: &[f64]) -> Result<f64> {
    if recon.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "rel_l2: {} vs {} samples",
            recon.len(),
            reference.len()
        )));
    }
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "rel_l2 undefined for an all-zero reference".into(),
        ));
    }
    let num: f64 = recon
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

/// Peak signal-to-noise ratio in dB; `peak` defaults to `max(reference)`.
/// Identical inputs return [`PSNR_CAP_DB`].
pub fn psnr(recon: &[f64], reference: &[f64], peak: Option<f64>) -> Result<f64> {
    if recon.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "psnr: {} vs {} samples",
            recon.len(),
            reference.len()
        )));
    }
    let peak = peak.unwrap_or_else(|| reference.iter().fold(f64::MIN, |m, &v| m.max(v)));
    let mse: f64 = recon
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / recon.len() as f64;
    if mse == 0.0 || peak <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// HPSI constants; defaults follow the index's defining publication
/// (similarity constant 30 and logistic gain 4.2 on an 8-bit value range,
/// with 2x mean subsampling).
#[derive(Debug, Clone, Copy)]
pub struct HpsiConfig {
    pub c: f64,
    pub alpha: f64,
    pub subsample: bool,
}

impl Default for HpsiConfig {
    fn default() -> Self {
        Self {
            c: 30.0,
            alpha: 4.2,
            subsample: true,
        }
    }
}

// 'same' 2D convolution with zero padding; filters are small.
fn conv2_same(img: &[f64], h: usize, w: usize, ker: &[f64], kh: usize, kw: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let (oh, ow) = (kh / 2, kw / 2);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for i in 0..kh {
                let rr = r as isize + i as isize - oh as isize;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for j in 0..kw {
                    let cc = c as isize + j as isize - ow as isize;
                    if cc < 0 || cc >= w as isize {
                        continue;
                    }
                    acc += ker[i * kw + j] * img[rr as usize * w + cc as usize];
                }
            }
            out[r * w + c] = acc;
        }
    }
    out
}

// Haar analysis filter at scale k: 2^k x 2^k entries of magnitude 2^-k,
// negative in the top half. Its transpose detects the other orientation.
fn haar_filter(scale: u32) -> (Vec<f64>, usize) {
    let m = 1usize << scale;
    let v = 2f64.powi(-(scale as i32));
    let mut ker = vec![v; m * m];
    for r in 0..m / 2 {
        for c in 0..m {
            ker[r * m + c] = -v;
        }
    }
    (ker, m)
}

fn transpose(ker: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[c * m + r] = ker[r * m + c];
        }
    }
    out
}

fn subsample2(img: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    // 2x2 mean filter followed by dyadic decimation.
    let (nh, nw) = (h / 2, w / 2);
    let mut out = vec![0.0; nh * nw];
    for r in 0..nh {
        for c in 0..nw {
            let (r2, c2) = (2 * r, 2 * c);
            out[r * nw + c] = 0.25
                * (img[r2 * w + c2]
                    + img[r2 * w + c2 + 1]
                    + img[(r2 + 1) * w + c2]
                    + img[(r2 + 1) * w + c2 + 1]);
        }
    }
    (out, nh, nw)
}

/// Haar-wavelet perceptual similarity in [0, 1]; 1 on identical inputs and
/// symmetric in its arguments. Local similarity comes from the two finest
/// Haar scales (horizontal and vertical orientations), weighting from the
/// third scale, followed by the logistic mapping and its inverse.
pub fn hpsi(a: &Image2D, b: &Image2D) -> Result<f64> {
    hpsi_with(a, b, &HpsiConfig::default())
}

pub fn hpsi_with(a: &Image2D, b: &Image2D, cfg: &HpsiConfig) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "hpsi: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    // Rescale both images jointly to the 8-bit range the constants assume;
    // the joint range keeps the score symmetric.
    let lo = a
        .data()
        .iter()
        .chain(b.data())
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = a
        .data()
        .iter()
        .chain(b.data())
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if hi == lo {
        return Ok(1.0); // both images are the same constant
    }
    let scale = 255.0 / (hi - lo);
    let fa: Vec<f64> = a.data().iter().map(|&v| (v - lo) * scale).collect();
    let fb: Vec<f64> = b.data().iter().map(|&v| (v - lo) * scale).collect();
    let (mut fa, mut fb) = (fa, fb);
    let (mut h, mut w) = (a.height(), a.width());
    if cfg.subsample && h >= 16 && w >= 16 {
        let (sa, nh, nw) = subsample2(&fa, h, w);
        let (sb, _, _) = subsample2(&fb, h, w);
        fa = sa;
        fb = sb;
        h = nh;
        w = nw;
    }

    let sigmoid = |x: f64| 1.0 / (1.0 + (-cfg.alpha * x).exp());
    let logit = |v: f64| (v / (1.0 - v)).ln() / cfg.alpha;

    let mut num = 0.0;
    let mut den = 0.0;
    for orientation in 0..2 {
        let mut coeffs_a = Vec::new();
        let mut coeffs_b = Vec::new();
        for scale in 1..=3u32 {
            let (ker0, m) = haar_filter(scale);
            let ker = if orientation == 0 {
                ker0
            } else {
                transpose(&ker0, m)
            };
            coeffs_a.push(conv2_same(&fa, h, w, &ker, m, m));
            coeffs_b.push(conv2_same(&fb, h, w, &ker, m, m));
        }
        for px in 0..h * w {
            let mut sim = 0.0;
            for s in 0..2 {
                let (ca, cb) = (coeffs_a[s][px].abs(), coeffs_b[s][px].abs());
                sim += (2.0 * ca * cb + cfg.c) / (ca * ca + cb * cb + cfg.c);
            }
            let ls = sigmoid(sim / 2.0);
            let weight = coeffs_a[2][px].abs().max(coeffs_b[2][px].abs());
            num += ls * weight;
            den += weight;
        }
    }
    if den == 0.0 {
        return Ok(1.0); // no structure anywhere; images are equal constants
    }
    let v = logit(num / den);
    Ok((v * v).clamp(0.0, 1.0))
}

/// Per-frame metric triple.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FrameMetrics {
    pub rel_l2: f64,
    pub psnr: f64,
    pub hpsi: f64,
}

/// Metrics for a reconstruction against a reference stack. The stack-level
/// `rel_l2` and `psnr` pool all voxels; `hpsi` is the mean of the per-frame
/// scores.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub rel_l2: f64,
    pub psnr: f64,
    pub hpsi: f64,
    pub per_frame: Vec<FrameMetrics>,
}

impl MetricsReport {
    /// Mean of the first and last frame's metrics (the reporting mode used
    /// for measured data where only those frames have dense references).
    pub fn mean_first_last(&self) -> FrameMetrics {
        let a = self.per_frame.first().expect("at least one frame");
        let b = self.per_frame.last().expect("at least one frame");
        FrameMetrics {
            rel_l2: 0.5 * (a.rel_l2 + b.rel_l2),
            psnr: 0.5 * (a.psnr + b.psnr),
            hpsi: 0.5 * (a.hpsi + b.hpsi),
        }
    }
}

pub fn stack_metrics(recon: &VolumeStack, reference: &VolumeStack) -> Result<MetricsReport> {
    if recon.width() != reference.width()
        || recon.height() != reference.height()
        || recon.frames() != reference.frames()
    {
        return Err(Error::ShapeMismatch(
            "metrics: stacks have different shapes".into(),
        ));
    }
    let peak = reference.data().iter().fold(f64::MIN, |m, &v| m.max(v));
    let mut per_frame = Vec::with_capacity(recon.frames());
    for t in 0..recon.frames() {
        per_frame.push(FrameMetrics {
            rel_l2: rel_l2_error(recon.frame(t), reference.frame(t))?,
            psnr: psnr(recon.frame(t), reference.frame(t), Some(peak))?,
            hpsi: hpsi(&recon.frame_image(t), &reference.frame_image(t))?,
        });
    }
    let hpsi_mean = per_frame.iter().map(|m| m.hpsi).sum::<f64>() / per_frame.len() as f64;
    Ok(MetricsReport {
        rel_l2: rel_l2_error(recon.data(), reference.data())?,
        psnr: psnr(recon.data(), reference.data(), Some(peak))?,
        hpsi: hpsi_mean,
        per_frame,
    })
}
