use super::pnm::ImageU8;
use crate::tensor::Matrix;

/// Gray levels (0..=255 as `f64`), `height × width`. RGB is reduced with
/// rounded luma `0.299R + 0.587G + 0.114B`.
pub fn to_gray(img: &ImageU8) -> Matrix {
    let data = match img.channels {
        1 => img.pixels.iter().map(|&p| f64::from(p)).collect(),
        _ => img
            .pixels
            .chunks_exact(3)
            .map(|p| {
                (0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
                    .round()
            })
            .collect(),
    };
    Matrix::new(img.height, img.width, data).expect("ImageU8 invariant")
}

// Source coordinate and blend weight for output index `o` under half-pixel
// centers, clamped to the edge.
fn sample_axis(o: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    let src =
        ((o as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5).clamp(0.0, (in_len - 1) as f64);
    let lo = src.floor() as usize;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, src - lo as f64)
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(src: &Matrix, out_h: usize, out_w: usize) -> Matrix {
    assert!(out_h > 0 && out_w > 0, "target size must be positive");
    let (in_h, in_w) = src.shape();
    let cols: Vec<_> = (0..out_w).map(|x| sample_axis(x, out_w, in_w)).collect();
    let mut out = Matrix::zeros(out_h, out_w);
    for y in 0..out_h {
        let (y0, y1, ty) = sample_axis(y, out_h, in_h);
        for (x, &(x0, x1, tx)) in cols.iter().enumerate() {
            let top = src.get(y0, x0) * (1.0 - tx) + src.get(y0, x1) * tx;
            let bottom = src.get(y1, x0) * (1.0 - tx) + src.get(y1, x1) * tx;
            out.set(y, x, top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Gray, resized to `side × side`, scaled into `[0, 1]`.
pub fn preprocess(img: &ImageU8, side: usize) -> Matrix {
    let resized = resize_bilinear(&to_gray(img), side, side);
    // interpolation of values in [0, 255] cannot leave that range, but the
    // clamp keeps rounding noise from ever producing 1 + ε
    let data = resized
        .as_slice()
        .iter()
        .map(|&v| (v / 255.0).clamp(0.0, 1.0))
        .collect();
    Matrix::new(side, side, data).expect("square output")
}
