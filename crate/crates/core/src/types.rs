//! Core value types: images, space-time volumes and sinograms.
//!
//! All pixel data is stored as flat `f64` vectors with explicit shape
//! metadata. Stacks are frame-major so that a single-frame stack is
//! layout-identical to the static case.

use crate::error::{Error, Result};

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} contains non-finite values"
        )));
    }
    Ok(())
}

/// A single 2D attenuation image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image sides must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "image data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        check_finite(&data, "image")?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.data[row * self.width + col]
    }
}

/// A T-frame stack of equally sized images; the unknown of the dynamic
/// problem. Data is frame-major, each frame row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeStack {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f64>,
}

impl VolumeStack {
    pub fn new(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || frames == 0 {
            return Err(Error::InvalidArgument(
                "volume dimensions must be positive".into(),
            ));
        }
        if data.len() != width * height * frames {
            return Err(Error::ShapeMismatch(format!(
                "volume data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                frames
            )));
        }
        check_finite(&data, "volume")?;
        Ok(Self {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            data: vec![0.0; width * height * frames],
        }
    }

    pub fn from_frames(frames: Vec<Image2D>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("volume needs at least one frame".into()))?;
        let (w, h) = (first.width(), first.height());
        let mut data = Vec::with_capacity(w * h * frames.len());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h {
                return Err(Error::ShapeMismatch(format!(
                    "frame {i} has size {}x{}, expected {}x{}",
                    f.width(),
                    f.height(),
                    w,
                    h
                )));
            }
            data.extend_from_slice(f.data());
        }
        let t = frames.len();
        VolumeStack::new(w, h, t, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn frame_image(&self, t: usize) -> Image2D {
        Image2D {
            width: self.width,
            height: self.height,
            data: self.frame(t).to_vec(),
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// One frame of measurements: line integrals for every (angle, detector)
/// pair, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    detectors: usize,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, detectors: usize, data: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || detectors == 0 {
            return Err(Error::InvalidArgument(
                "sinogram needs at least one angle and one detector".into(),
            ));
        }
        if !angles.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "angles must be strictly increasing".into(),
            ));
        }
        check_finite(&angles, "angles")?;
        if data.len() != angles.len() * detectors {
            return Err(Error::ShapeMismatch(format!(
                "sinogram data length {} != {} angles x {} detectors",
                data.len(),
                angles.len(),
                detectors
            )));
        }
        check_finite(&data, "sinogram")?;
        Ok(Self {
            angles,
            detectors,
            data,
        })
    }

    pub fn zeros(angles: Vec<f64>, detectors: usize) -> Result<Self> {
        let n = angles.len() * detectors;
        Sinogram::new(angles, detectors, vec![0.0; n])
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    /// Detector row for one angle index.
    pub fn row(&self, angle_idx: usize) -> &[f64] {
        &self.data[angle_idx * self.detectors..(angle_idx + 1) * self.detectors]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Per-frame sinograms sharing one acquisition geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramStack {
    sinos: Vec<Sinogram>,
}

impl SinogramStack {
    pub fn new(sinos: Vec<Sinogram>) -> Result<Self> {
        let first = sinos
            .first()
            .ok_or_else(|| Error::InvalidArgument("sinogram stack needs at least one frame".into()))?;
        let (angles, det) = (first.angles().to_vec(), first.detectors());
        for (i, s) in sinos.iter().enumerate() {
            if s.angles() != angles.as_slice() || s.detectors() != det {
                return Err(Error::ShapeMismatch(format!(
                    "sinogram frame {i} geometry differs from frame 0"
                )));
            }
        }
        Ok(Self { sinos })
    }

    pub fn frames(&self) -> usize {
        self.sinos.len()
    }

    pub fn angles(&self) -> &[f64] {
        self.sinos[0].angles()
    }

    pub fn detectors(&self) -> usize {
        self.sinos[0].detectors()
    }

    pub fn frame(&self, t: usize) -> &Sinogram {
        &self.sinos[t]
    }

    pub fn frames_iter(&self) -> impl Iterator<Item = &Sinogram> {
        self.sinos.iter()
    }

    pub fn into_frames(self) -> Vec<Sinogram> {
        self.sinos
    }

    pub fn frame_len(&self) -> usize {
        self.angles().len() * self.detectors()
    }

    /// Concatenate all frames into one flat vector (frame-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frame_len() * self.frames());
        for s in &self.sinos {
            out.extend_from_slice(s.data());
        }
        out
    }

    /// Rebuild a stack from a flat vector using this stack's geometry.
    pub fn from_flat_like(&self, flat: &[f64]) -> Result<SinogramStack> {
        let n = self.frame_len();
        if flat.len() != n * self.frames() {
            return Err(Error::ShapeMismatch(format!(
                "flat length {} != {} frames x {}",
                flat.len(),
                self.frames(),
                n
            )));
        }
        let sinos = (0..self.frames())
            .map(|t| {
                Sinogram::new(
                    self.angles().to_vec(),
                    self.detectors(),
                    flat[t * n..(t + 1) * n].to_vec(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        SinogramStack::new(sinos)
    }

    /// Scale every sample by a constant (used when pairing data with a
    /// normalized forward operator).
    pub fn scaled(&self, factor: f64) -> Result<SinogramStack> {
        let sinos = self
            .sinos
            .iter()
            .map(|s| {
                Sinogram::new(
                    s.angles().to_vec(),
                    s.detectors(),
                    s.data().iter().map(|v| v * factor).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        SinogramStack::new(sinos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_length() {
        assert!(Image2D::new(4, 4, vec![0.0; 15]).is_err());
        assert!(Image2D::new(4, 4, vec![0.0; 16]).is_ok());
    }

    #[test]
    fn image_rejects_non_finite() {
        let mut d = vec![0.0; 16];
        d[3] = f64::NAN;
        assert!(Image2D::new(4, 4, d).is_err());
    }

    #[test]
    fn volume_frame_major_layout() {
        let mut v = VolumeStack::zeros(2, 2, 3);
        v.frame_mut(1)[0] = 7.0;
        assert_eq!(v.data()[4], 7.0);
        assert_eq!(v.frame(0), &[0.0; 4]);
    }

    #[test]
    fn single_frame_stack_matches_static_layout() {
        let img = Image2D::new(3, 2, (0..6).map(|i| i as f64).collect()).unwrap();
        let v = VolumeStack::from_frames(vec![img.clone()]).unwrap();
        assert_eq!(v.data(), img.data());
    }

    #[test]
    fn sinogram_requires_increasing_angles() {
        assert!(Sinogram::new(vec![0.0, 0.5, 0.4], 2, vec![0.0; 6]).is_err());
        assert!(Sinogram::new(vec![0.0, 0.5, 1.0], 2, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn stack_rejects_mismatched_frames() {
        let a = Sinogram::zeros(vec![0.0, 1.0], 3).unwrap();
        let b = Sinogram::zeros(vec![0.0, 1.1], 3).unwrap();
        assert!(SinogramStack::new(vec![a.clone(), b]).is_err());
        assert!(SinogramStack::new(vec![a.clone(), a]).is_ok());
    }

    #[test]
    fn stack_flat_round_trip() {
        let a = Sinogram::new(vec![0.0, 1.0], 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Sinogram::new(vec![0.0, 1.0], 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let st = SinogramStack::new(vec![a, b]).unwrap();
        let flat = st.to_flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let back = st.from_flat_like(&flat).unwrap();
        assert_eq!(back, st);
    }
}
