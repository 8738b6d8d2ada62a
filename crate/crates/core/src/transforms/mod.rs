//! Multiscale sparsifying transforms: cone/pyramid-adapted shearlet filter
//! banks (2D and 3D) and orthonormal 2D Haar wavelets.

mod haar;
mod shearlet;

pub use haar::{haar_forward, haar_inverse, HaarMap, WaveletConfig};
pub use shearlet::{build_shearlet_system, ShearletSystem};

use crate::error::{Error, Result};

/// Identifies one subband of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubbandIndex {
    /// The low-frequency scaling band.
    Lowpass,
    /// A directional shearlet band. `axis` is the principal frequency axis
    /// of the cone/pyramid the band belongs to (seam bands are canonicalized
    /// to the lowest such axis); `shear` holds the shear offsets along the
    /// remaining axes in ascending order (one entry used in 2D).
    Shearlet { scale: u32, axis: u8, shear: [i32; 2] },
    /// A separable wavelet detail band.
    Wavelet { level: u32, band: WaveletBand },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WaveletBand {
    Horizontal,
    Vertical,
    Diagonal,
}

/// Subband-indexed transform coefficients. Every subband is stored at full
/// spatial resolution (undecimated transforms), so the total coefficient
/// count is `subbands * input size`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    subbands: Vec<(SubbandIndex, Vec<f64>)>,
}

impl CoefficientSet {
    pub fn new(subbands: Vec<(SubbandIndex, Vec<f64>)>) -> Result<Self> {
        if subbands.is_empty() {
            return Err(Error::InvalidArgument(
                "coefficient set needs at least one subband".into(),
            ));
        }
        Ok(Self { subbands })
    }

    pub fn subband_count(&self) -> usize {
        self.subbands.len()
    }

    pub fn subbands(&self) -> &[(SubbandIndex, Vec<f64>)] {
        &self.subbands
    }

    pub fn total_len(&self) -> usize {
        self.subbands.iter().map(|(_, d)| d.len()).sum()
    }

    /// Concatenate all subbands in system order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len());
        for (_, d) in &self.subbands {
            out.extend_from_slice(d);
        }
        out
    }

    /// Fraction of coefficients with magnitude above `kappa`.
    pub fn sparsity_level(&self, kappa: f64) -> f64 {
        let total = self.total_len();
        let count: usize = self
            .subbands
            .iter()
            .map(|(_, d)| d.iter().filter(|v| v.abs() > kappa).count())
            .sum();
        count as f64 / total as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.subbands
            .iter()
            .map(|(_, d)| d.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }
}
