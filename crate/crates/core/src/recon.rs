//! End-to-end reconstruction drivers: method dispatch, operator
//! normalization, data scaling, and temporal inflation for the 3D method on
//! short stacks.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linop::{normalize_map, BlockDiagMap};
use crate::projector::{fbp_reconstruct, BlockProjector, DynamicGeometry, Geometry, Projector};
use crate::solver::{
    a_priori_sparsity, combine_frames, inflate_sinogram_frames, run_cwds_pdfp, CombineMode,
    CwdsConfig, PdfpConfig, SolveReport,
};
use crate::transforms::{HaarMap, ShearletSystem};
use crate::types::{SinogramStack, VolumeStack};

/// Minimum temporal extent of the 3D shearlet system.
pub const MIN_3D_FRAMES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fbp,
    Haar,
    Sh2d,
    Sh3d,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fbp => "fbp",
            Method::Haar => "haar",
            Method::Sh2d => "sh2d",
            Method::Sh3d => "sh3d",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbp" => Ok(Method::Fbp),
            "haar" => Ok(Method::Haar),
            "sh2d" => Ok(Method::Sh2d),
            "sh3d" => Ok(Method::Sh3d),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?}; expected fbp|haar|sh2d|sh3d"
            ))),
        }
    }
}

/// Solver parameters for one reconstruction.
#[derive(Debug, Clone)]
pub struct ReconParams {
    pub pdfp: PdfpConfig,
    pub cwds: CwdsConfig,
    /// How replicated frames are merged after 3D reconstruction of an
    /// inflated stack.
    pub combine: CombineMode,
    /// Seed for the power-iteration start vectors used in normalization.
    pub seed: u64,
    /// Wavelet levels for the Haar method.
    pub haar_levels: u32,
    /// Scales of the 2D / 3D shearlet systems.
    pub sh2d_scales: usize,
    pub sh3d_scales: usize,
}

/// Per-method solver defaults for the digital phantom (target sparsity,
/// controller step factor, count threshold, initial threshold factor).
pub fn default_params(method: Method) -> ReconParams {
    let cwds = match method {
        Method::Haar => CwdsConfig::new(0.30, 10.0, 1e-6, 1.0),
        Method::Sh2d => CwdsConfig::new(0.77, 50.0, 1e-5, 1.0),
        // Also used for fbp, where the solver parameters are ignored.
        Method::Sh3d | Method::Fbp => CwdsConfig::new(0.73, 10.0, 1e-6, 1.0),
    };
    ReconParams {
        pdfp: PdfpConfig::default(),
        cwds,
        combine: CombineMode::Average,
        seed: 1,
        haar_levels: 4,
        sh2d_scales: 3,
        sh3d_scales: 2,
    }
}

/// Note attached to the report when a short stack was inflated for the 3D
/// method.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InflationNote {
    pub original_frames: usize,
    pub inflated_frames: usize,
    pub combine: CombineMode,
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub stack: VolumeStack,
    pub report: Option<SolveReport>,
    pub inflation: Option<InflationNote>,
}

/// Compute the a-priori sparsity of a reference stack under the transform
/// the given method uses (ground truth, or a dense-angle reconstruction).
pub fn a_priori_sparsity_for(
    method: Method,
    reference: &VolumeStack,
    kappa: f64,
    haar_levels: u32,
    sh_scales: usize,
) -> Result<f64> {
    let t = reference.frames();
    match method {
        Method::Fbp => Err(Error::InvalidArgument(
            "fbp has no sparsity target".into(),
        )),
        Method::Haar => {
            let w = HaarMap::new(reference.width(), reference.height(), haar_levels)?;
            let block = BlockDiagMap::new(w, t);
            Ok(a_priori_sparsity(reference.data(), &block, kappa))
        }
        Method::Sh2d => {
            let sh = ShearletSystem::new_2d(reference.width(), reference.height(), sh_scales)?;
            let block = BlockDiagMap::new(sh, t);
            Ok(a_priori_sparsity(reference.data(), &block, kappa))
        }
        Method::Sh3d => {
            let reference = if t < MIN_3D_FRAMES {
                crate::solver::inflate_frames(reference, t * MIN_3D_FRAMES.div_ceil(t))?
            } else {
                reference.clone()
            };
            let sh = ShearletSystem::new_3d(
                reference.width(),
                reference.height(),
                reference.frames(),
                sh_scales,
            )?;
            Ok(a_priori_sparsity(reference.data(), &sh, kappa))
        }
    }
}

/// Reconstruct a sinogram stack with the chosen method.
pub fn reconstruct(
    y: &SinogramStack,
    geometry: &Geometry,
    method: Method,
    params: &ReconParams,
) -> Result<ReconOutput> {
    if y.angles() != geometry.angles.as_slice() || y.detectors() != geometry.detectors {
        return Err(Error::ShapeMismatch(
            "sinogram stack does not match geometry".into(),
        ));
    }
    let side = geometry.image_size;
    match method {
        Method::Fbp => {
            let frames = y
                .frames_iter()
                .map(|s| fbp_reconstruct(s, geometry))
                .collect::<Result<Vec<_>>>()?;
            Ok(ReconOutput {
                stack: VolumeStack::from_frames(frames)?,
                report: None,
                inflation: None,
            })
        }
        Method::Haar | Method::Sh2d => {
            let proj = normalize_map(Projector::new(geometry.clone()), params.seed)?;
            let scale = proj.scale();
            let y_scaled = y.scaled(scale)?;
            let a = BlockDiagMap::new(&proj, y.frames());
            let (stack, report) = match method {
                Method::Haar => {
                    let w = HaarMap::new(side, side, params.haar_levels)?;
                    let sh = BlockDiagMap::new(w, y.frames());
                    run_cwds_pdfp(&y_scaled, &a, &sh, &params.pdfp, &params.cwds, side)?
                }
                _ => {
                    let s = ShearletSystem::new_2d(side, side, params.sh2d_scales)?;
                    let sh = BlockDiagMap::new(s, y.frames());
                    run_cwds_pdfp(&y_scaled, &a, &sh, &params.pdfp, &params.cwds, side)?
                }
            };
            Ok(ReconOutput {
                stack,
                report: Some(report),
                inflation: None,
            })
        }
        Method::Sh3d => {
            let original_frames = y.frames();
            let (y_used, inflation) = if original_frames < MIN_3D_FRAMES {
                let target = original_frames * MIN_3D_FRAMES.div_ceil(original_frames);
                (
                    inflate_sinogram_frames(y, target)?,
                    Some(InflationNote {
                        original_frames,
                        inflated_frames: target,
                        combine: params.combine,
                    }),
                )
            } else {
                (y.clone(), None)
            };
            let t = y_used.frames();
            let geoms = DynamicGeometry::uniform(geometry.clone(), t)?;
            let block = normalize_map(BlockProjector::new(&geoms), params.seed)?;
            let scale = block.scale();
            let y_scaled = y_used.scaled(scale)?;
            let sh = ShearletSystem::new_3d(side, side, t, params.sh3d_scales)?;
            let (stack, report) =
                run_cwds_pdfp(&y_scaled, &block, &sh, &params.pdfp, &params.cwds, side)?;
            let stack = match &inflation {
                Some(note) => combine_frames(&stack, note.original_frames, note.combine)?,
                None => stack,
            };
            Ok(ReconOutput {
                stack,
                report: Some(report),
                inflation,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_stem_phantom, simulate_measurements, NoiseConfig, PhantomConfig, SimulationConfig};

    fn tiny_problem(frames: usize, p: usize) -> (VolumeStack, SinogramStack, Geometry) {
        let cfg = PhantomConfig {
            side: 32,
            frames,
            ..PhantomConfig::desk()
        };
        let truth = make_stem_phantom(&cfg).unwrap();
        let geom = Geometry::parallel(cfg.side, p).unwrap();
        let y = simulate_measurements(
            &truth,
            &geom,
            &SimulationConfig::default(),
            &NoiseConfig::default(),
        )
        .unwrap();
        (truth, y, geom)
    }

    #[test]
    fn fbp_path_has_no_report() {
        let (_, y, geom) = tiny_problem(2, 12);
        let out = reconstruct(&y, &geom, Method::Fbp, &default_params(Method::Fbp)).unwrap();
        assert!(out.report.is_none());
        assert_eq!(out.stack.frames(), 2);
    }

    #[test]
    fn haar_path_runs_and_is_nonnegative() {
        let (_, y, geom) = tiny_problem(2, 12);
        let mut params = default_params(Method::Haar);
        params.pdfp.max_iters = 15;
        params.haar_levels = 3;
        let out = reconstruct(&y, &geom, Method::Haar, &params).unwrap();
        let report = out.report.unwrap();
        assert_eq!(report.objective_trace.len(), report.iterations + 1);
        assert!(out.stack.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sh3d_inflates_short_stacks() {
        // Spatial axes must also satisfy the 33-sample minimum.
        let cfg = PhantomConfig {
            side: 33,
            frames: 17,
            ..PhantomConfig::desk()
        };
        let truth = make_stem_phantom(&cfg).unwrap();
        let geom = Geometry::parallel(cfg.side, 6).unwrap();
        let y = simulate_measurements(
            &truth,
            &geom,
            &SimulationConfig::default(),
            &NoiseConfig::default(),
        )
        .unwrap();
        let mut params = default_params(Method::Sh3d);
        params.pdfp.max_iters = 2;
        params.pdfp.record_objective = false;
        let out = reconstruct(&y, &geom, Method::Sh3d, &params).unwrap();
        let note = out.inflation.unwrap();
        assert_eq!(note.original_frames, 17);
        assert_eq!(note.inflated_frames, 34);
        assert_eq!(out.stack.frames(), 17);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("sh3d".parse::<Method>().unwrap(), Method::Sh3d);
        assert!("nope".parse::<Method>().is_err());
    }
}
