//! Small n-dimensional FFT helper on top of rustfft: per-axis passes over a
//! flat row-major buffer. Used by the shearlet banks and the ramp filter.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) type C64 = Complex<f64>;

/// Planned forward/inverse FFTs for a fixed row-major shape.
pub(crate) struct NdFft {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = shape
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inv = shape
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        Self {
            shape: shape.to_vec(),
            fwd,
            inv,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [C64]) {
        for axis in 0..self.shape.len() {
            self.axis_pass(buf, axis, true);
        }
    }

    /// Unnormalized inverse transform, in place. Dividing by `len()` after a
    /// forward/inverse pair recovers the input.
    pub fn inverse(&self, buf: &mut [C64]) {
        for axis in 0..self.shape.len() {
            self.axis_pass(buf, axis, false);
        }
    }

    fn axis_pass(&self, buf: &mut [C64], axis: usize, forward: bool) {
        debug_assert_eq!(buf.len(), self.len());
        let n = self.shape[axis];
        let stride: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let fft = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };
        let mut scratch = vec![C64::default(); fft.get_inplace_scratch_len()];

        if stride == 1 {
            for chunk in buf.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            let _ = outer; // chunks cover outer * n elements exactly
            return;
        }

        // Strided lines: gather a batch of adjacent lines into a contiguous
        // tile so inner reads stay cache friendly, transform, scatter back.
        let batch = stride.min(64);
        let mut tile = vec![C64::default(); batch * n];
        for o in 0..outer {
            let base = o * n * stride;
            let mut start = 0;
            while start < stride {
                let b = batch.min(stride - start);
                for i in 0..n {
                    let src = base + i * stride + start;
                    for l in 0..b {
                        tile[l * n + i] = buf[src + l];
                    }
                }
                for l in 0..b {
                    fft.process_with_scratch(&mut tile[l * n..(l + 1) * n], &mut scratch);
                }
                for i in 0..n {
                    let dst = base + i * stride + start;
                    for l in 0..b {
                        buf[dst + l] = tile[l * n + i];
                    }
                }
                start += b;
            }
        }
    }
}

pub(crate) fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Real part after an inverse pass, scaled by `1/len` so the forward/inverse
/// pair is the true inverse.
#[cfg(test)]
pub(crate) fn real_scaled(buf: &[C64], len: usize) -> Vec<f64> {
    let s = 1.0 / len as f64;
    buf.iter().map(|c| c.re * s).collect()
}
