//! Bit-exact file formats: the stack container for volumes and sinograms,
//! 16-bit PGM image export, and the metrics CSV schema.
//!
//! A stack file is a single JSON header line (UTF-8, newline-terminated)
//! followed by the raw little-endian `f64` payload: frame-major volumes,
//! angle-major sinogram frames. The header carries enough provenance
//! (command, config, seeds, config hash) to re-derive the file byte for
//! byte.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::projector::Geometry;
use crate::types::{Image2D, Sinogram, SinogramStack, VolumeStack};

pub const STACK_MAGIC: &str = "DYNCT-STACK";
pub const STACK_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    Volume,
    Sinogram,
}

/// Reproducibility note embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// The subcommand that produced the file.
    pub command: String,
    /// SHA-256 of the canonical JSON encoding of `config`.
    pub config_hash: String,
    /// Full configuration needed to re-derive the file.
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let config_hash = config_hash(&config);
        Self {
            command: command.to_string(),
            config_hash,
            config,
        }
    }
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The single-line header of a stack file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackHeader {
    pub magic: String,
    pub version: u32,
    pub dtype: String,
    pub kind: StackKind,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub frames: usize,
    pub detectors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_spacing: Option<f64>,
    /// Reconstruction grid side associated with a sinogram stack.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn write_file(path: &Path, header: &StackHeader, payload: &[f64]) -> Result<()> {
    let bytes = encode(header, payload);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Serialize a stack file to bytes (used by `verify` for byte comparison).
pub fn encode(header: &StackHeader, payload: &[f64]) -> Vec<u8> {
    let mut out = serde_json::to_string(header)
        .expect("header serializes")
        .into_bytes();
    out.push(b'\n');
    out.reserve(payload.len() * 8);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_volume(stack: &VolumeStack, provenance: Option<Provenance>) -> (StackHeader, Vec<u8>) {
    let header = StackHeader {
        magic: STACK_MAGIC.to_string(),
        version: STACK_VERSION,
        dtype: "f64le".to_string(),
        kind: StackKind::Volume,
        width: Some(stack.width()),
        height: Some(stack.height()),
        frames: stack.frames(),
        detectors: None,
        detector_spacing: None,
        image_size: None,
        angles: None,
        provenance,
    };
    let bytes = encode(&header, stack.data());
    (header, bytes)
}

pub fn encode_sinogram(
    stack: &SinogramStack,
    geometry_hint: Option<&Geometry>,
    provenance: Option<Provenance>,
) -> (StackHeader, Vec<u8>) {
    let header = StackHeader {
        magic: STACK_MAGIC.to_string(),
        version: STACK_VERSION,
        dtype: "f64le".to_string(),
        kind: StackKind::Sinogram,
        width: None,
        height: None,
        frames: stack.frames(),
        detectors: Some(stack.detectors()),
        detector_spacing: geometry_hint.map(|g| g.detector_spacing),
        image_size: geometry_hint.map(|g| g.image_size),
        angles: Some(stack.angles().to_vec()),
        provenance,
    };
    let bytes = encode(&header, &stack.to_flat());
    (header, bytes)
}

pub fn write_volume_stack(
    path: impl AsRef<Path>,
    stack: &VolumeStack,
    provenance: Option<Provenance>,
) -> Result<()> {
    let (header, _) = encode_volume(stack, provenance);
    write_file(path.as_ref(), &header, stack.data())
}

pub fn write_sinogram_stack(
    path: impl AsRef<Path>,
    stack: &SinogramStack,
    geometry_hint: Option<&Geometry>,
    provenance: Option<Provenance>,
) -> Result<()> {
    let (header, _) = encode_sinogram(stack, geometry_hint, provenance);
    write_file(path.as_ref(), &header, &stack.to_flat())
}

fn read_raw(path: &Path) -> Result<(StackHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or(Error::Parse {
        path: path.to_path_buf(),
        offset: bytes.len() as u64,
        msg: "missing header newline".into(),
    })?;
    let header: StackHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            offset: e.column() as u64,
            msg: format!("bad header: {e}"),
        })?;
    if header.magic != STACK_MAGIC {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("bad magic {:?}", header.magic),
        });
    }
    if header.version != STACK_VERSION {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("unsupported version {}", header.version),
        });
    }
    if header.dtype != "f64le" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("unsupported dtype {:?}", header.dtype),
        });
    }
    let payload = &bytes[newline + 1..];
    if payload.len() % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: (newline + 1 + payload.len() - payload.len() % 8) as u64,
            msg: "payload length not a multiple of 8".into(),
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, data))
}

pub fn read_volume_stack(path: impl AsRef<Path>) -> Result<(VolumeStack, StackHeader)> {
    let path = path.as_ref();
    let (header, data) = read_raw(path)?;
    if header.kind != StackKind::Volume {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: "expected a volume stack".into(),
        });
    }
    let (w, h) = match (header.width, header.height) {
        (Some(w), Some(h)) => (w, h),
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: 0,
                msg: "volume header lacks width/height".into(),
            })
        }
    };
    let expected = w * h * header.frames;
    if data.len() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("payload has {} samples, header implies {expected}", data.len()),
        });
    }
    Ok((VolumeStack::new(w, h, header.frames, data)?, header))
}

pub fn read_sinogram_stack(path: impl AsRef<Path>) -> Result<(SinogramStack, StackHeader)> {
    let path = path.as_ref();
    let (header, data) = read_raw(path)?;
    if header.kind != StackKind::Sinogram {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: "expected a sinogram stack".into(),
        });
    }
    let (det, angles) = match (header.detectors, header.angles.clone()) {
        (Some(d), Some(a)) => (d, a),
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: 0,
                msg: "sinogram header lacks detectors/angles".into(),
            })
        }
    };
    let frame_len = det * angles.len();
    let expected = frame_len * header.frames;
    if data.len() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("payload has {} samples, header implies {expected}", data.len()),
        });
    }
    let sinos = (0..header.frames)
        .map(|t| {
            Sinogram::new(
                angles.clone(),
                det,
                data[t * frame_len..(t + 1) * frame_len].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((SinogramStack::new(sinos)?, header))
}

/// Reconstruct the geometry a sinogram file was produced for, if the header
/// carries the grid hint.
pub fn geometry_from_header(header: &StackHeader) -> Result<Geometry> {
    let angles = header
        .angles
        .clone()
        .ok_or_else(|| Error::InvalidArgument("header lacks angles".into()))?;
    Geometry::new(
        header
            .image_size
            .ok_or_else(|| Error::InvalidArgument("header lacks image_size".into()))?,
        header
            .detectors
            .ok_or_else(|| Error::InvalidArgument("header lacks detectors".into()))?,
        header.detector_spacing.unwrap_or(1.0),
        angles,
    )
}

/// Write a binary 16-bit PGM (P5, maxval 65535, big-endian samples) with
/// linear windowing: `window.0` maps to 0 and `window.1` to 65535.
pub fn write_pgm16(path: impl AsRef<Path>, image: &Image2D, window: (f64, f64)) -> Result<()> {
    let path = path.as_ref();
    if !(window.1 > window.0) {
        return Err(Error::InvalidArgument(
            "window upper bound must exceed lower bound".into(),
        ));
    }
    let mut out = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    let scale = 65535.0 / (window.1 - window.0);
    for &v in image.data() {
        let q = ((v - window.0) * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One row of the metrics CSV. `frame` is a 0-based frame index rendered as
/// an integer, or the literal `mean_first_last`.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: String,
    pub projections: usize,
    pub frame: String,
    pub rel_l2: f64,
    pub psnr: f64,
    pub hpsi: f64,
}

pub const METRICS_CSV_HEADER: &str = "method,projections,frame,rel_l2,psnr,hpsi";

/// Render the metrics CSV. Fields never contain commas or quotes (methods
/// are fixed identifiers, numbers use the shortest round-trip decimal
/// form), so no quoting is needed.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.projections, r.frame, r.rel_l2, r.psnr, r.hpsi
        ));
    }
    out
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, metrics_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stk");
        let mut stack = VolumeStack::zeros(3, 2, 2);
        for (i, v) in stack.data_mut().iter_mut().enumerate() {
            *v = (i as f64).sin() * 1e-7 + i as f64;
        }
        let prov = Provenance::new("simulate", serde_json::json!({"seed": 1}));
        write_volume_stack(&path, &stack, Some(prov.clone())).unwrap();
        let (back, header) = read_volume_stack(&path).unwrap();
        assert_eq!(back, stack);
        assert_eq!(header.provenance.unwrap(), prov);

        // Writing again produces identical bytes.
        let path2 = dir.path().join("v2.stk");
        write_volume_stack(&path2, &stack, Some(Provenance::new("simulate", serde_json::json!({"seed": 1})))).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn sinogram_round_trip_with_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.stk");
        let geom = Geometry::parallel(16, 5).unwrap();
        let data: Vec<f64> = (0..geom.sinogram_len()).map(|i| i as f64 / 7.0).collect();
        let sino = Sinogram::new(geom.angles.clone(), geom.detectors, data).unwrap();
        let stack = SinogramStack::new(vec![sino.clone(), sino]).unwrap();
        write_sinogram_stack(&path, &stack, Some(&geom), None).unwrap();
        let (back, header) = read_sinogram_stack(&path).unwrap();
        assert_eq!(back, stack);
        let geom_back = geometry_from_header(&header).unwrap();
        assert_eq!(geom_back, geom);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.stk");
        fs::write(&path, b"{not json}\n").unwrap();
        match read_volume_stack(&path).unwrap_err() {
            Error::Parse { msg, .. } => assert!(msg.contains("bad header")),
            other => panic!("unexpected error {other:?}"),
        }
        fs::write(&path, b"no newline at all").unwrap();
        assert!(read_volume_stack(&path).is_err());
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.stk");
        write_volume_stack(&path, &VolumeStack::zeros(2, 2, 1), None).unwrap();
        assert!(read_sinogram_stack(&path).is_err());
    }

    #[test]
    fn pgm_window_maps_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.pgm");
        let img = Image2D::new(2, 1, vec![0.0, 2.0]).unwrap();
        write_pgm16(&path, &img, (0.0, 2.0)).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8, 0, 0xff, 0xff]);
        // Idempotent and bitwise stable.
        let path2 = dir.path().join("i2.pgm");
        write_pgm16(&path2, &img, (0.0, 2.0)).unwrap();
        assert_eq!(bytes, fs::read(&path2).unwrap());
    }

    #[test]
    fn csv_schema() {
        let rows = vec![
            MetricsRow {
                method: "fbp".into(),
                projections: 30,
                frame: "0".into(),
                rel_l2: 0.25,
                psnr: 21.5,
                hpsi: 0.5,
            },
            MetricsRow {
                method: "sh3d".into(),
                projections: 30,
                frame: "mean_first_last".into(),
                rel_l2: 0.2,
                psnr: 23.0,
                hpsi: 0.61,
            },
        ];
        let text = metrics_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "fbp,30,0,0.25,21.5,0.5");
        assert_eq!(lines.next().unwrap(), "sh3d,30,mean_first_last,0.2,23,0.61");
    }

    #[test]
    fn config_hash_deterministic() {
        let a = serde_json::json!({"n": 64, "seed": 1});
        let b = serde_json::json!({"n": 64, "seed": 1});
        assert_eq!(config_hash(&a), config_hash(&b));
        let c = serde_json::json!({"n": 64, "seed": 2});
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
