//! Orthonormal multilevel 2D Haar wavelet transform (separable, normalized
//! filters). The transform is its own inverse-transpose: `W' W = I`.

use super::{CoefficientSet, SubbandIndex, WaveletBand};
use crate::error::{Error, Result};
use crate::linop::LinearMap;
use crate::types::Image2D;

#[derive(Debug, Clone, Copy)]
pub struct WaveletConfig {
    pub levels: u32,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self { levels: 4 }
    }
}

const SQRT1_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn haar_pair_forward(seg: &mut [f64], tmp: &mut [f64]) {
    let half = seg.len() / 2;
    for i in 0..half {
        let a = seg[2 * i];
        let b = seg[2 * i + 1];
        tmp[i] = (a + b) * SQRT1_2;
        tmp[half + i] = (a - b) * SQRT1_2;
    }
    seg.copy_from_slice(&tmp[..seg.len()]);
}

fn haar_pair_inverse(seg: &mut [f64], tmp: &mut [f64]) {
    let half = seg.len() / 2;
    for i in 0..half {
        let lo = seg[i];
        let hi = seg[half + i];
        tmp[2 * i] = (lo + hi) * SQRT1_2;
        tmp[2 * i + 1] = (lo - hi) * SQRT1_2;
    }
    seg.copy_from_slice(&tmp[..seg.len()]);
}

fn check_sides(width: usize, height: usize, levels: u32) -> Result<()> {
    let m = 1usize << levels;
    if width % m != 0 || height % m != 0 {
        return Err(Error::InvalidArgument(format!(
            "image {width}x{height} not divisible by 2^{levels}; pad or crop to a multiple of {m}"
        )));
    }
    Ok(())
}

/// Multilevel forward transform on a row-major buffer, in place, producing
/// the nested [LL | detail] layout.
fn forward_inplace(data: &mut [f64], width: usize, height: usize, levels: u32) {
    let mut tmp = vec![0.0; width.max(height)];
    let mut col = vec![0.0; height];
    let (mut bw, mut bh) = (width, height);
    for _ in 0..levels {
        for r in 0..bh {
            haar_pair_forward(&mut data[r * width..r * width + bw], &mut tmp);
        }
        for c in 0..bw {
            for r in 0..bh {
                col[r] = data[r * width + c];
            }
            haar_pair_forward(&mut col[..bh], &mut tmp);
            for r in 0..bh {
                data[r * width + c] = col[r];
            }
        }
        bw /= 2;
        bh /= 2;
    }
}

fn inverse_inplace(data: &mut [f64], width: usize, height: usize, levels: u32) {
    let mut tmp = vec![0.0; width.max(height)];
    let mut col = vec![0.0; height];
    for level in (0..levels).rev() {
        let bw = width >> level;
        let bh = height >> level;
        for c in 0..bw {
            for r in 0..bh {
                col[r] = data[r * width + c];
            }
            haar_pair_inverse(&mut col[..bh], &mut tmp);
            for r in 0..bh {
                data[r * width + c] = col[r];
            }
        }
        for r in 0..bh {
            haar_pair_inverse(&mut data[r * width..r * width + bw], &mut tmp);
        }
    }
}

/// Orthonormal 2D Haar decomposition into subbands.
pub fn haar_forward(x: &Image2D, cfg: &WaveletConfig) -> Result<CoefficientSet> {
    check_sides(x.width(), x.height(), cfg.levels)?;
    let (w, h) = (x.width(), x.height());
    let mut data = x.data().to_vec();
    forward_inplace(&mut data, w, h, cfg.levels);

    let copy_block = |data: &[f64], r0: usize, c0: usize, bh: usize, bw: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(bh * bw);
        for r in r0..r0 + bh {
            out.extend_from_slice(&data[r * w + c0..r * w + c0 + bw]);
        }
        out
    };

    let mut subbands = Vec::new();
    let (lw, lh) = (w >> cfg.levels, h >> cfg.levels);
    subbands.push((SubbandIndex::Lowpass, copy_block(&data, 0, 0, lh, lw)));
    // Level 1 is the finest detail scale.
    for level in 1..=cfg.levels {
        let bw = w >> level;
        let bh = h >> level;
        subbands.push((
            SubbandIndex::Wavelet {
                level,
                band: WaveletBand::Horizontal,
            },
            copy_block(&data, 0, bw, bh, bw),
        ));
        subbands.push((
            SubbandIndex::Wavelet {
                level,
                band: WaveletBand::Vertical,
            },
            copy_block(&data, bh, 0, bh, bw),
        ));
        subbands.push((
            SubbandIndex::Wavelet {
                level,
                band: WaveletBand::Diagonal,
            },
            copy_block(&data, bh, bw, bh, bw),
        ));
    }
    CoefficientSet::new(subbands)
}

/// Perfect-reconstruction inverse of [`haar_forward`].
pub fn haar_inverse(c: &CoefficientSet, cfg: &WaveletConfig) -> Result<Image2D> {
    // Recover block sizes from the lowpass band (square blocks only when the
    // original image was square; rectangular shapes carry their aspect in
    // the band lengths).
    let (first_idx, low) = &c.subbands()[0];
    if *first_idx != SubbandIndex::Lowpass {
        return Err(Error::ShapeMismatch("first subband must be lowpass".into()));
    }
    let expected = 1 + 3 * cfg.levels as usize;
    if c.subband_count() != expected {
        return Err(Error::ShapeMismatch(format!(
            "expected {expected} subbands for {} levels, got {}",
            cfg.levels,
            c.subband_count()
        )));
    }
    // Finest detail bands determine the full size.
    let finest_len = c.subbands()[1].1.len();
    let total = finest_len * 4;
    let ratio = total / low.len();
    let _ = ratio;
    // Assume square aspect unless bands say otherwise; reconstruct sizes
    // from the level-1 band (half resolution per axis).
    let half_side = (finest_len as f64).sqrt().round() as usize;
    let (w, h) = if half_side * half_side == finest_len {
        (half_side * 2, half_side * 2)
    } else {
        return Err(Error::ShapeMismatch(
            "non-square coefficient layout; reconstruct via HaarMap instead".into(),
        ));
    };
    check_sides(w, h, cfg.levels)?;

    let mut data = vec![0.0; w * h];
    let mut place_block = |src: &[f64], r0: usize, c0: usize, bh: usize, bw: usize| {
        for r in 0..bh {
            data[(r0 + r) * w + c0..(r0 + r) * w + c0 + bw]
                .copy_from_slice(&src[r * bw..(r + 1) * bw]);
        }
    };

    let (lw, lh) = (w >> cfg.levels, h >> cfg.levels);
    place_block(low, 0, 0, lh, lw);
    for (idx, band) in c.subbands().iter().skip(1) {
        let (level, kind) = match idx {
            SubbandIndex::Wavelet { level, band } => (*level, *band),
            _ => {
                return Err(Error::ShapeMismatch(
                    "unexpected subband kind in Haar coefficient set".into(),
                ))
            }
        };
        let bw = w >> level;
        let bh = h >> level;
        if band.len() != bw * bh {
            return Err(Error::ShapeMismatch(format!(
                "level {level} band has {} coefficients, expected {}",
                band.len(),
                bw * bh
            )));
        }
        let (r0, c0) = match kind {
            WaveletBand::Horizontal => (0, bw),
            WaveletBand::Vertical => (bh, 0),
            WaveletBand::Diagonal => (bh, bw),
        };
        place_block(band, r0, c0, bh, bw);
    }

    inverse_inplace(&mut data, w, h, cfg.levels);
    Image2D::new(w, h, data)
}

/// The Haar transform as a flat linear operator (nested Mallat layout);
/// orthonormal, so the adjoint is the inverse transform.
#[derive(Debug, Clone)]
pub struct HaarMap {
    width: usize,
    height: usize,
    levels: u32,
}

impl HaarMap {
    pub fn new(width: usize, height: usize, levels: u32) -> Result<Self> {
        check_sides(width, height, levels)?;
        Ok(Self {
            width,
            height,
            levels,
        })
    }
}

impl LinearMap for HaarMap {
    fn input_len(&self) -> usize {
        self.width * self.height
    }
    fn output_len(&self) -> usize {
        self.width * self.height
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "haar input length");
        let mut data = x.to_vec();
        forward_inplace(&mut data, self.width, self.height, self.levels);
        data
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.output_len(), "haar adjoint input length");
        let mut data = y.to_vec();
        inverse_inplace(&mut data, self.width, self.height, self.levels);
        data
    }
}
