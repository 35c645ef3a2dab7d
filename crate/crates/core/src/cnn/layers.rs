//! Convolution and pooling primitives on `H × W × C` feature maps.

use super::CnnError;

/// `H × W × C` activations, channel-interleaved: index `(y·W + x)·C + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, CnnError> {
        if data.len() != height * width * channels {
            return Err(CnnError::Shape(format!(
                "{height}x{width}x{channels} map needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// `kh × kw × C × F` kernel bank; index `((ky·kw + kx)·C + c)·F + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    pub kh: usize,
    pub kw: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub data: Vec<f64>,
}

impl Kernels {
    pub fn new(
        kh: usize,
        kw: usize,
        in_channels: usize,
        filters: usize,
        data: Vec<f64>,
    ) -> Result<Self, CnnError> {
        if data.len() != kh * kw * in_channels * filters {
            return Err(CnnError::Shape(format!(
                "{kh}x{kw}x{in_channels}x{filters} kernels need {} values, got {}",
                kh * kw * in_channels * filters,
                data.len()
            )));
        }
        Ok(Self {
            kh,
            kw,
            in_channels,
            filters,
            data,
        })
    }

    #[inline]
    fn offset(&self, ky: usize, kx: usize, c: usize) -> usize {
        ((ky * self.kw + kx) * self.in_channels + c) * self.filters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output matches the input size; zero padding split evenly, with the
    /// odd extra row/column on the bottom/right.
    Same,
    Valid,
}

struct Geometry {
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
}

fn geometry(input: &FeatureMap, k: &Kernels, padding: Padding) -> Result<Geometry, CnnError> {
    if input.channels != k.in_channels {
        return Err(CnnError::Shape(format!(
            "input has {} channels, kernels expect {}",
            input.channels, k.in_channels
        )));
    }
    match padding {
        Padding::Same => Ok(Geometry {
            out_h: input.height,
            out_w: input.width,
            pad_top: (k.kh - 1) / 2,
            pad_left: (k.kw - 1) / 2,
        }),
        Padding::Valid => {
            if k.kh > input.height || k.kw > input.width {
                return Err(CnnError::Shape(format!(
                    "{}x{} kernel does not fit a {}x{} input without padding",
                    k.kh, k.kw, input.height, input.width
                )));
            }
            Ok(Geometry {
                out_h: input.height - k.kh + 1,
                out_w: input.width - k.kw + 1,
                pad_top: 0,
                pad_left: 0,
            })
        }
    }
}

/// Input coordinate for output `o` and kernel tap `k`, if inside the input.
#[inline]
fn source(o: usize, k: usize, pad: usize, len: usize) -> Option<usize> {
    (o + k).checked_sub(pad).filter(|&i| i < len)
}

/// Stride-1 cross-correlation.
pub fn conv2d(
    input: &FeatureMap,
    kernels: &Kernels,
    padding: Padding,
) -> Result<FeatureMap, CnnError> {
    let g = geometry(input, kernels, padding)?;
    let f = kernels.filters;
    let mut out = FeatureMap::zeros(g.out_h, g.out_w, f);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let o = (oy * g.out_w + ox) * f;
            let acc = &mut out.data[o..o + f];
            for ky in 0..kernels.kh {
                let Some(iy) = source(oy, ky, g.pad_top, input.height) else {
                    continue;
                };
                for kx in 0..kernels.kw {
                    let Some(ix) = source(ox, kx, g.pad_left, input.width) else {
                        continue;
                    };
                    let px = (iy * input.width + ix) * input.channels;
                    for c in 0..input.channels {
                        let v = input.data[px + c];
                        if v == 0.0 {
                            continue;
                        }
                        let w0 = kernels.offset(ky, kx, c);
                        for (a, &w) in acc.iter_mut().zip(&kernels.data[w0..w0 + f]) {
                            *a += v * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to the kernels and, optionally, the
/// input, given the gradient of the output.
pub fn conv2d_backward(
    input: &FeatureMap,
    kernels: &Kernels,
    padding: Padding,
    grad_out: &FeatureMap,
    want_input_grad: bool,
) -> Result<(Vec<f64>, Option<FeatureMap>), CnnError> {
    let g = geometry(input, kernels, padding)?;
    let f = kernels.filters;
    let mut grad_k = vec![0.0; kernels.data.len()];
    let mut grad_in =
        want_input_grad.then(|| FeatureMap::zeros(input.height, input.width, input.channels));
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let o = (oy * g.out_w + ox) * f;
            let go = &grad_out.data[o..o + f];
            if go.iter().all(|&x| x == 0.0) {
                continue;
            }
            for ky in 0..kernels.kh {
                let Some(iy) = source(oy, ky, g.pad_top, input.height) else {
                    continue;
                };
                for kx in 0..kernels.kw {
                    let Some(ix) = source(ox, kx, g.pad_left, input.width) else {
                        continue;
                    };
                    let px = (iy * input.width + ix) * input.channels;
                    for c in 0..input.channels {
                        let w0 = kernels.offset(ky, kx, c);
                        let v = input.data[px + c];
                        if v != 0.0 {
                            for (gk, &d) in grad_k[w0..w0 + f].iter_mut().zip(go) {
                                *gk += v * d;
                            }
                        }
                        if let Some(gi) = grad_in.as_mut() {
                            gi.data[px + c] += super::dot(&kernels.data[w0..w0 + f], go);
                        }
                    }
                }
            }
        }
    }
    Ok((grad_k, grad_in))
}

/// Non-overlapping 2×2 max pooling. Returns the pooled map and, per output
/// element, the flat input index of the maximum (first in row-major window
/// order on ties).
pub fn maxpool2x2(input: &FeatureMap) -> Result<(FeatureMap, Vec<usize>), CnnError> {
    if !input.height.is_multiple_of(2) || !input.width.is_multiple_of(2) {
        return Err(CnnError::Shape(format!(
            "2x2 pooling needs even sides, got {}x{}",
            input.height, input.width
        )));
    }
    let (oh, ow, ch) = (input.height / 2, input.width / 2, input.channels);
    let mut out = FeatureMap::zeros(oh, ow, ch);
    let mut argmax = vec![0usize; oh * ow * ch];
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..ch {
                let mut best_idx = ((2 * oy) * input.width + 2 * ox) * ch + c;
                let mut best = input.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * oy + dy) * input.width + 2 * ox + dx) * ch + c;
                    if input.data[idx] > best {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                let o = (oy * ow + ox) * ch + c;
                out.data[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes pooled gradients back to the recorded argmax positions.
pub fn maxpool2x2_backward(grad_out: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut grad_in = vec![0.0; input_len];
    for (&g, &idx) in grad_out.iter().zip(argmax) {
        grad_in[idx] += g;
    }
    grad_in
}
