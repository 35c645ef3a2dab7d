//! Model file: magic `HSVD`, `u32` version, `u8` mode (0 vector, 1 matrix),
//! `u32` class count, then per class a `u32` label, a shape header, a `u64`
//! payload byte length and the raw `f64` payload; trailing CRC32.
//!
//! Shape header, vector mode: `u32 d, u32 k` (payload `Q` row-major, `d·k`).
//! Matrix mode: `u32 h, u32 w, u32 k1, u32 k2, u32 k3, u32 kept` (payload:
//! `kept` basis images, each `h·w` row-major).

use std::path::Path;

use super::{ClassBasis, HosvdModel, InputShape, Ranks};
use crate::container::{FormatError, Reader, Writer};
use crate::tensor::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"HSVD";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &HosvdModel) -> Vec<u8> {
    let mut w = Writer::new(MODEL_MAGIC, model.format_version);
    w.u8(match model.input_shape {
        InputShape::Vector(_) => 0,
        InputShape::Matrix(..) => 1,
    });
    w.usize_as_u32(model.class_labels.len());
    for (label, basis) in model.class_labels.iter().zip(&model.bases) {
        w.u32(*label);
        match (basis, model.ranks) {
            (ClassBasis::Vector(q), Ranks::Vector(_)) => {
                w.usize_as_u32(q.rows());
                w.usize_as_u32(q.cols());
                w.f64_payload(q.as_slice());
            }
            (ClassBasis::Matrix(bs), Ranks::Matrix([k1, k2, k3])) => {
                let InputShape::Matrix(h, wd) = model.input_shape else {
                    unreachable!("matrix basis implies matrix input")
                };
                for v in [h, wd, k1, k2, k3, bs.len()] {
                    w.usize_as_u32(v);
                }
                let flat: Vec<f64> = bs
                    .iter()
                    .flat_map(|b| b.as_slice().iter().copied())
                    .collect();
                w.f64_payload(&flat);
            }
            _ => unreachable!("basis kind always matches rank kind"),
        }
    }
    w.finish()
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<HosvdModel, FormatError> {
    let mut r = Reader::open(bytes, MODEL_MAGIC, MODEL_VERSION)?;
    let mode = r.u8()?;
    if mode > 1 {
        return Err(FormatError::Malformed(format!("unknown mode byte {mode}")));
    }
    let count = r.usize()?;
    if count == 0 {
        return Err(FormatError::Malformed("model has no classes".into()));
    }

    enum RawBasis {
        Vector { d: usize, k: usize, data: Vec<f64> },
        Matrix { h: usize, w: usize, data: Vec<f64> },
    }

    let mut class_labels = Vec::with_capacity(count.min(16));
    let mut raw = Vec::with_capacity(count.min(16));
    let mut input_shape = None;
    let mut ranks = None;
    for _ in 0..count {
        let label = r.u32()?;
        if class_labels.last().is_some_and(|&prev| prev >= label) {
            return Err(FormatError::Malformed(
                "class labels not strictly increasing".into(),
            ));
        }
        let (shape, rank, basis) = if mode == 0 {
            let d = r.usize()?;
            let k = r.usize()?;
            if d == 0 || k == 0 || k > d {
                return Err(FormatError::Malformed(format!(
                    "invalid vector basis shape {d}x{k}"
                )));
            }
            let data = r.f64_payload(d * k)?;
            (
                InputShape::Vector(d),
                Ranks::Vector(k),
                RawBasis::Vector { d, k, data },
            )
        } else {
            let mut hdr = [0usize; 6];
            for v in hdr.iter_mut() {
                *v = r.usize()?;
            }
            let [h, w, k1, k2, k3, kept] = hdr;
            if h == 0 || w == 0 || kept == 0 || kept > k3 {
                return Err(FormatError::Malformed(format!(
                    "invalid matrix basis header {hdr:?}"
                )));
            }
            let data = r.f64_payload(h * w * kept)?;
            (
                InputShape::Matrix(h, w),
                Ranks::Matrix([k1, k2, k3]),
                RawBasis::Matrix { h, w, data },
            )
        };
        if input_shape.is_some_and(|s| s != shape) || ranks.is_some_and(|rk| rk != rank) {
            return Err(FormatError::Malformed(
                "classes disagree on shape or rank".into(),
            ));
        }
        input_shape = Some(shape);
        ranks = Some(rank);
        class_labels.push(label);
        raw.push(basis);
    }
    r.finish()?;

    let malformed = |e: crate::tensor::TensorError| FormatError::Malformed(e.to_string());
    let bases = raw
        .into_iter()
        .map(|b| match b {
            RawBasis::Vector { d, k, data } => Matrix::new(d, k, data).map(ClassBasis::Vector),
            RawBasis::Matrix { h, w, data } => data
                .chunks_exact(h * w)
                .map(|c| Matrix::new(h, w, c.to_vec()))
                .collect::<Result<Vec<_>, _>>()
                .map(ClassBasis::Matrix),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(malformed)?;

    Ok(HosvdModel {
        format_version: MODEL_VERSION,
        input_shape: input_shape.expect("count > 0"),
        ranks: ranks.expect("count > 0"),
        class_labels,
        bases,
    })
}

pub fn save_model(model: &HosvdModel, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HosvdModel, FormatError> {
    model_from_bytes(&std::fs::read(path)?)
}
