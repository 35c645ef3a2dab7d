//! Network file: magic `HCNN`, `u32` version, `u64` init seed, `u32` input
//! side, `u32` layer count (always 4), then per layer a `u8` kind (0 conv,
//! 1 dense), its dimensions, the weight payload and the bias payload;
//! trailing CRC32.
//!
//! Conv dimensions: `u32 kh, kw, in_channels, filters`. Dense: `u32 input,
//! output`.

use std::path::Path;

use super::{CnnDescriptor, CnnNetwork, Conv, Dense, Kernels};
use crate::container::{FormatError, Reader, Writer};

pub const NETWORK_MAGIC: &[u8; 4] = b"HCNN";
pub const NETWORK_VERSION: u32 = 1;

const CONV: u8 = 0;
const DENSE: u8 = 1;

pub fn network_to_bytes(net: &CnnNetwork) -> Vec<u8> {
    let mut w = Writer::new(NETWORK_MAGIC, NETWORK_VERSION);
    w.u64(net.seed);
    w.usize_as_u32(net.descriptor.input_side);
    w.u32(4);
    for conv in [&net.conv1, &net.conv2] {
        let k = &conv.kernels;
        w.u8(CONV);
        for v in [k.kh, k.kw, k.in_channels, k.filters] {
            w.usize_as_u32(v);
        }
        w.f64_payload(&k.data);
        w.f64_payload(&conv.bias);
    }
    for dense in [&net.dense1, &net.dense2] {
        w.u8(DENSE);
        w.usize_as_u32(dense.input);
        w.usize_as_u32(dense.output);
        w.f64_payload(&dense.weights);
        w.f64_payload(&dense.bias);
    }
    w.finish()
}

enum RawLayer {
    Conv([usize; 4], Vec<f64>, Vec<f64>),
    Dense([usize; 2], Vec<f64>, Vec<f64>),
}

fn read_layer(r: &mut Reader<'_>) -> Result<RawLayer, FormatError> {
    match r.u8()? {
        CONV => {
            let mut dims = [0usize; 4];
            for d in dims.iter_mut() {
                *d = r.usize()?;
            }
            let weights = r.f64_payload(dims.iter().product())?;
            let bias = r.f64_payload(dims[3])?;
            Ok(RawLayer::Conv(dims, weights, bias))
        }
        DENSE => {
            let dims = [r.usize()?, r.usize()?];
            let weights = r.f64_payload(dims[0] * dims[1])?;
            let bias = r.f64_payload(dims[1])?;
            Ok(RawLayer::Dense(dims, weights, bias))
        }
        other => Err(FormatError::Malformed(format!(
            "unknown layer kind {other}"
        ))),
    }
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<CnnNetwork, FormatError> {
    let mut r = Reader::open(bytes, NETWORK_MAGIC, NETWORK_VERSION)?;
    let seed = r.u64()?;
    let input_side = r.usize()?;
    let layers = r.u32()?;
    if layers != 4 {
        return Err(FormatError::Malformed(format!(
            "expected 4 layers, found {layers}"
        )));
    }
    let raw = [
        read_layer(&mut r)?,
        read_layer(&mut r)?,
        read_layer(&mut r)?,
        read_layer(&mut r)?,
    ];
    r.finish()?;

    let malformed = |e: super::CnnError| FormatError::Malformed(e.to_string());
    let [RawLayer::Conv(c1d, c1w, c1b), RawLayer::Conv(c2d, c2w, c2b), RawLayer::Dense(d1d, d1w, d1b), RawLayer::Dense(d2d, d2w, d2b)] =
        raw
    else {
        return Err(FormatError::Malformed(
            "layer order must be conv, conv, dense, dense".into(),
        ));
    };
    let conv = |d: [usize; 4], w: Vec<f64>, b: Vec<f64>| -> Result<Conv, FormatError> {
        Ok(Conv {
            kernels: Kernels::new(d[0], d[1], d[2], d[3], w).map_err(malformed)?,
            bias: b,
        })
    };
    let descriptor = CnnDescriptor {
        input_side,
        conv1_filters: c1d[3],
        conv2_filters: c2d[3],
        hidden: d1d[1],
        classes: d2d[1],
    };
    let net = CnnNetwork {
        descriptor,
        seed,
        conv1: conv(c1d, c1w, c1b)?,
        conv2: conv(c2d, c2w, c2b)?,
        dense1: Dense {
            input: d1d[0],
            output: d1d[1],
            weights: d1w,
            bias: d1b,
        },
        dense2: Dense {
            input: d2d[0],
            output: d2d[1],
            weights: d2w,
            bias: d2b,
        },
    };
    net.check_shapes().map_err(malformed)?;
    Ok(net)
}

pub fn save_network(net: &CnnNetwork, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, network_to_bytes(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<CnnNetwork, FormatError> {
    network_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let net = CnnNetwork::init(CnnDescriptor::SMALL, 9).unwrap();
        let bytes = network_to_bytes(&net);
        assert_eq!(&bytes[..4], b"HCNN");
        let back = network_from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(network_to_bytes(&back), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = network_to_bytes(&CnnNetwork::init(CnnDescriptor::SMALL, 9).unwrap());
        let mut bad = bytes.clone();
        bad[bytes.len() / 2] ^= 0x10;
        assert!(matches!(
            network_from_bytes(&bad),
            Err(FormatError::ChecksumMismatch { .. })
        ));
        assert!(matches!(
            network_from_bytes(&bytes[..40]),
            Err(FormatError::Truncated { .. })
        ));
        assert!(matches!(
            network_from_bytes(b"HSVD\x01\0\0\0"),
            Err(FormatError::BadMagic { .. })
        ));
    }
}
