//! Discrete parallel-beam Radon forward/adjoint operators, the
//! block-diagonal operator over time frames, and filtered back-projection.
//!
//! The projection model is ray-driven with linear interpolation along the
//! ray's major axis (Joseph's method); pixels have unit side length. The
//! adjoint scatters exactly the same interpolation weights, so the pair is
//! adjoint by construction rather than approximately.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{to_complex, NdFft};
use crate::linop::LinearMap;
use crate::types::{Image2D, Sinogram, SinogramStack, VolumeStack};

/// Parallel-beam acquisition geometry for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub image_size: usize,
    pub detectors: usize,
    pub detector_spacing: f64,
    pub angles: Vec<f64>,
}

impl Geometry {
    pub fn new(
        image_size: usize,
        detectors: usize,
        detector_spacing: f64,
        angles: Vec<f64>,
    ) -> Result<Self> {
        if image_size == 0 || detectors == 0 {
            return Err(Error::InvalidArgument(
                "geometry sizes must be positive".into(),
            ));
        }
        if detector_spacing <= 0.0 || !detector_spacing.is_finite() {
            return Err(Error::InvalidArgument(
                "detector spacing must be positive".into(),
            ));
        }
        if angles.is_empty() {
            return Err(Error::InvalidArgument("geometry needs angles".into()));
        }
        if !angles.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "angles must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            image_size,
            detectors,
            detector_spacing,
            angles,
        })
    }

    /// Default parallel-beam setup: `projections` angles evenly spaced over
    /// [0, pi), detector count covering the image diagonal at unit spacing.
    pub fn parallel(image_size: usize, projections: usize) -> Result<Self> {
        let detectors = ((image_size as f64) * std::f64::consts::SQRT_2).ceil() as usize;
        let angles = (0..projections)
            .map(|k| std::f64::consts::PI * k as f64 / projections as f64)
            .collect();
        Geometry::new(image_size, detectors, 1.0, angles)
    }

    /// Whether the detector array spans the image diagonal; callers may warn
    /// when it does not.
    pub fn covers_diagonal(&self) -> bool {
        self.detectors as f64 * self.detector_spacing
            >= (self.image_size as f64) * std::f64::consts::SQRT_2
    }

    pub fn projections(&self) -> usize {
        self.angles.len()
    }

    pub fn sinogram_len(&self) -> usize {
        self.angles.len() * self.detectors
    }

    pub fn image_len(&self) -> usize {
        self.image_size * self.image_size
    }
}

/// Per-frame geometries of the dynamic problem. In this toolkit all frames
/// share one geometry (the acquisition samples the same angles at every
/// time instance), but the block operators accept any per-frame list.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGeometry {
    geoms: Vec<Geometry>,
}

impl DynamicGeometry {
    pub fn new(geoms: Vec<Geometry>) -> Result<Self> {
        if geoms.is_empty() {
            return Err(Error::InvalidArgument(
                "dynamic geometry needs at least one frame".into(),
            ));
        }
        Ok(Self { geoms })
    }

    pub fn uniform(geom: Geometry, frames: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::InvalidArgument("frames must be positive".into()));
        }
        Ok(Self {
            geoms: vec![geom; frames],
        })
    }

    pub fn frames(&self) -> usize {
        self.geoms.len()
    }

    pub fn frame(&self, t: usize) -> &Geometry {
        &self.geoms[t]
    }
}

// One ray's footprint: visits (row, col, weight) pairs of the interpolation
// stencil. `theta` enters via its sine/cosine; `t` is the signed detector
// coordinate in pixel units.
#[inline]
fn visit_ray<F: FnMut(usize, usize, f64)>(
    n: usize,
    sin_t: f64,
    cos_t: f64,
    t: f64,
    mut visit: F,
) {
    let c = (n as f64 - 1.0) / 2.0;
    if sin_t.abs() >= cos_t.abs() {
        // March over columns, interpolate across rows. Segment length per
        // unit column step is 1/|sin theta|.
        let w = 1.0 / sin_t.abs();
        for col in 0..n {
            let x = col as f64 - c;
            let y = (t - x * cos_t) / sin_t;
            let r = y + c;
            let r0 = r.floor();
            let frac = r - r0;
            let r0 = r0 as isize;
            if r0 >= 0 && (r0 as usize) < n {
                visit(r0 as usize, col, (1.0 - frac) * w);
            }
            let r1 = r0 + 1;
            if frac > 0.0 && r1 >= 0 && (r1 as usize) < n {
                visit(r1 as usize, col, frac * w);
            }
        }
    } else {
        let w = 1.0 / cos_t.abs();
        for row in 0..n {
            let y = row as f64 - c;
            let x = (t - y * sin_t) / cos_t;
            let cc = x + c;
            let c0 = cc.floor();
            let frac = cc - c0;
            let c0 = c0 as isize;
            if c0 >= 0 && (c0 as usize) < n {
                visit(row, c0 as usize, (1.0 - frac) * w);
            }
            let c1 = c0 + 1;
            if frac > 0.0 && c1 >= 0 && (c1 as usize) < n {
                visit(row, c1 as usize, frac * w);
            }
        }
    }
}

/// Matrix-free discrete Radon transform for one frame.
#[derive(Debug, Clone)]
pub struct Projector {
    geom: Geometry,
}

impl Projector {
    pub fn new(geom: Geometry) -> Self {
        Self { geom }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn detector_coord(&self, d: usize) -> f64 {
        let dc = (self.geom.detectors as f64 - 1.0) / 2.0;
        (d as f64 - dc) * self.geom.detector_spacing
    }

    fn forward_into(&self, image: &[f64], sino: &mut [f64]) {
        let n = self.geom.image_size;
        let det = self.geom.detectors;
        sino.par_chunks_mut(det)
            .zip(self.geom.angles.par_iter())
            .for_each(|(row_out, &theta)| {
                let (sin_t, cos_t) = theta.sin_cos();
                for (d, out) in row_out.iter_mut().enumerate() {
                    let t = self.detector_coord(d);
                    let mut acc = 0.0;
                    visit_ray(n, sin_t, cos_t, t, |r, c, w| {
                        acc += w * image[r * n + c];
                    });
                    *out = acc;
                }
            });
    }

    fn adjoint_into(&self, sino: &[f64], image: &mut [f64]) {
        let n = self.geom.image_size;
        let det = self.geom.detectors;
        // Fixed-size angle chunks keep the accumulation order independent of
        // scheduling, so results are bitwise reproducible.
        const CHUNK: usize = 8;
        let partials: Vec<Vec<f64>> = self
            .geom
            .angles
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, thetas)| {
                let mut part = vec![0.0; n * n];
                for (k, &theta) in thetas.iter().enumerate() {
                    let ai = ci * CHUNK + k;
                    let (sin_t, cos_t) = theta.sin_cos();
                    for d in 0..det {
                        let val = sino[ai * det + d];
                        if val == 0.0 {
                            continue;
                        }
                        let t = self.detector_coord(d);
                        visit_ray(n, sin_t, cos_t, t, |r, c, w| {
                            part[r * n + c] += w * val;
                        });
                    }
                }
                part
            })
            .collect();
        for part in partials {
            for (o, p) in image.iter_mut().zip(&part) {
                *o += p;
            }
        }
    }
}

impl LinearMap for Projector {
    fn input_len(&self) -> usize {
        self.geom.image_len()
    }
    fn output_len(&self) -> usize {
        self.geom.sinogram_len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "projector input length");
        let mut out = vec![0.0; self.output_len()];
        self.forward_into(x, &mut out);
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.output_len(), "projector adjoint input length");
        let mut out = vec![0.0; self.input_len()];
        self.adjoint_into(y, &mut out);
        out
    }
}

/// Block-diagonal Radon operator over all time frames: frame tau of the
/// output depends only on frame tau of the input.
#[derive(Debug, Clone)]
pub struct BlockProjector {
    projs: Vec<Projector>,
}

impl BlockProjector {
    pub fn new(geom: &DynamicGeometry) -> Self {
        Self {
            projs: geom.geoms.iter().cloned().map(Projector::new).collect(),
        }
    }

    pub fn frames(&self) -> usize {
        self.projs.len()
    }

    pub fn frame(&self, t: usize) -> &Projector {
        &self.projs[t]
    }
}

impl LinearMap for BlockProjector {
    fn input_len(&self) -> usize {
        self.projs.iter().map(|p| p.input_len()).sum()
    }
    fn output_len(&self) -> usize {
        self.projs.iter().map(|p| p.output_len()).sum()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_len(), "block projector input length");
        let ni = self.projs[0].input_len();
        let no = self.projs[0].output_len();
        let mut out = vec![0.0; self.output_len()];
        out.par_chunks_mut(no)
            .zip(x.par_chunks(ni))
            .zip(self.projs.par_iter())
            .for_each(|((dst, src), p)| p.forward_into(src, dst));
        out
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.output_len(), "block projector adjoint length");
        let ni = self.projs[0].input_len();
        let no = self.projs[0].output_len();
        let mut out = vec![0.0; self.input_len()];
        out.par_chunks_mut(ni)
            .zip(y.par_chunks(no))
            .zip(self.projs.par_iter())
            .for_each(|((dst, src), p)| p.adjoint_into(src, dst));
        out
    }
}

/// Project one image through the given geometry.
pub fn radon_forward(image: &Image2D, geom: &Geometry) -> Result<Sinogram> {
    if image.width() != geom.image_size || image.height() != geom.image_size {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} does not match geometry size {}",
            image.width(),
            image.height(),
            geom.image_size
        )));
    }
    let p = Projector::new(geom.clone());
    Sinogram::new(geom.angles.clone(), geom.detectors, p.apply(image.data()))
}

/// Exact adjoint of [`radon_forward`] (back-projection with the same
/// interpolation weights).
pub fn radon_adjoint(sino: &Sinogram, geom: &Geometry) -> Result<Image2D> {
    if sino.angles() != geom.angles.as_slice() || sino.detectors() != geom.detectors {
        return Err(Error::ShapeMismatch(
            "sinogram does not match geometry".into(),
        ));
    }
    let p = Projector::new(geom.clone());
    Image2D::new(
        geom.image_size,
        geom.image_size,
        p.apply_adjoint(sino.data()),
    )
}

/// Apply the per-frame Radon transform to every frame of a stack.
pub fn block_forward(stack: &VolumeStack, geom: &DynamicGeometry) -> Result<SinogramStack> {
    if stack.frames() != geom.frames() {
        return Err(Error::ShapeMismatch(format!(
            "stack has {} frames, geometry {}",
            stack.frames(),
            geom.frames()
        )));
    }
    let sinos = (0..stack.frames())
        .map(|t| radon_forward(&stack.frame_image(t), geom.frame(t)))
        .collect::<Result<Vec<_>>>()?;
    SinogramStack::new(sinos)
}

/// Frame-wise back-projection; mirror of [`block_forward`].
pub fn block_adjoint(sinos: &SinogramStack, geom: &DynamicGeometry) -> Result<VolumeStack> {
    if sinos.frames() != geom.frames() {
        return Err(Error::ShapeMismatch(format!(
            "sinogram stack has {} frames, geometry {}",
            sinos.frames(),
            geom.frames()
        )));
    }
    let frames = (0..sinos.frames())
        .map(|t| radon_adjoint(sinos.frame(t), geom.frame(t)))
        .collect::<Result<Vec<_>>>()?;
    VolumeStack::from_frames(frames)
}

/// Ramp-filtered back-projection (Ram-Lak filter applied in the frequency
/// domain on rows zero-padded to the next power of two >= 2D).
///
/// The output is scaled by pi / (number of angles), which makes the
/// dense-angle reconstruction quantitatively match the input for angles
/// covering either [0, pi) or [0, 2pi). Values are not clamped.
pub fn fbp_reconstruct(sino: &Sinogram, geom: &Geometry) -> Result<Image2D> {
    if sino.angles() != geom.angles.as_slice() || sino.detectors() != geom.detectors {
        return Err(Error::ShapeMismatch(
            "sinogram does not match geometry".into(),
        ));
    }
    let p = geom.angles.len();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "insufficient angular sampling for FBP".into(),
        ));
    }
    let det = geom.detectors;
    let len = (2 * det).next_power_of_two();
    let fft = NdFft::new(&[len]);
    let spacing = geom.detector_spacing;

    // Ram-Lak response |f| with f in cycles per sample.
    let ramp: Vec<f64> = (0..len)
        .map(|k| (k.min(len - k) as f64) / len as f64)
        .collect();

    let filtered: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|ai| {
            let mut buf = to_complex(sino.row(ai));
            buf.resize(len, Default::default());
            fft.forward(&mut buf);
            for (b, r) in buf.iter_mut().zip(&ramp) {
                *b *= *r;
            }
            fft.inverse(&mut buf);
            let scale = 1.0 / (len as f64 * spacing);
            buf[..det].iter().map(|c| c.re * scale).collect()
        })
        .collect();

    let n = geom.image_size;
    let c = (n as f64 - 1.0) / 2.0;
    let dc = (det as f64 - 1.0) / 2.0;
    let trig: Vec<(f64, f64)> = geom.angles.iter().map(|t| t.sin_cos()).collect();
    let norm = std::f64::consts::PI / p as f64;

    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(row, line)| {
        let y = row as f64 - c;
        for (col, out) in line.iter_mut().enumerate() {
            let x = col as f64 - c;
            let mut acc = 0.0;
            for (q, &(sin_t, cos_t)) in filtered.iter().zip(&trig) {
                let t = x * cos_t + y * sin_t;
                let u = t / spacing + dc;
                let u0 = u.floor();
                let frac = u - u0;
                let u0 = u0 as isize;
                if u0 >= 0 && (u0 as usize) < det {
                    acc += (1.0 - frac) * q[u0 as usize];
                }
                let u1 = u0 + 1;
                if u1 >= 0 && (u1 as usize) < det {
                    acc += frac * q[u1 as usize];
                }
            }
            *out = acc * norm;
        }
    });

    Image2D::new(n, n, data)
}
