//! Seeded synthetic stand-ins for a real microscopy dataset.

use super::{LabeledDataset, Samples};
use crate::classifier::{label_name, ALL, HEALTHY};
use crate::rng::SplitMix64;
use crate::tensor::Matrix;

/// Image separation used by the CLI when none is given.
pub const DEFAULT_IMAGE_SEPARATION: f64 = 4.0;

const BASE_RADIUS: f64 = 6.0;
const BASE_BLOBS: usize = 2;
const BACKGROUND: f64 = 0.15;
const NOISE: f64 = 0.05;
const BLOB_PEAK: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Two unit-covariance Gaussians in `dim` dimensions.
    Features { dim: usize },
    /// `side × side` gray images with bright blobs.
    Images { side: usize },
}

/// Deterministic two-class dataset, class 0 first then class 1.
///
/// Feature kind: a unit direction `u` is drawn first; class 0 samples are
/// `−(s/2)·u + N(0, I)`, class 1 samples `+(s/2)·u + N(0, I)`.
///
/// Image kind: a noisy dark background with Gaussian-profile blobs at random
/// positions. Class 0 has 2 blobs of radius 6; class 1 has `2 + round(2s)`
/// blobs of the same radius, so `s = 0` makes the classes identical in
/// distribution. Pixels are quantized to multiples of 1/255, which makes the
/// on-disk netpbm form lossless.
pub fn synth_dataset(
    seed: u64,
    per_class: usize,
    kind: SynthKind,
    separation: f64,
) -> LabeledDataset {
    assert!(per_class >= 1, "per_class must be positive");
    assert!(
        separation.is_finite() && separation >= 0.0,
        "separation must be finite and ≥ 0"
    );
    let mut rng = SplitMix64::new(seed);
    let labels: Vec<u32> = [HEALTHY, ALL]
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, per_class))
        .collect();
    let names = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| format!("{}-{:04}", label_name(l), i % per_class))
        .collect();
    let samples = match kind {
        SynthKind::Features { dim } => {
            assert!(dim >= 1, "dim must be positive");
            let mut u: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v /= n);
            Samples::Features(
                labels
                    .iter()
                    .map(|&l| {
                        let sign = if l == ALL { 0.5 } else { -0.5 };
                        u.iter()
                            .map(|&ui| sign * separation * ui + rng.normal())
                            .collect()
                    })
                    .collect(),
            )
        }
        SynthKind::Images { side } => {
            assert!(side >= 1, "side must be positive");
            Samples::Images(
                labels
                    .iter()
                    .map(|&l| blob_image(&mut rng, side, l, separation))
                    .collect(),
            )
        }
    };
    LabeledDataset::new(samples, labels, names).expect("lengths agree by construction")
}

fn blob_image(rng: &mut SplitMix64, side: usize, label: u32, s: f64) -> Matrix {
    let (count, radius) = if label == ALL {
        (BASE_BLOBS + (2.0 * s).round() as usize, BASE_RADIUS)
    } else {
        (BASE_BLOBS, BASE_RADIUS)
    };
    let blobs: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let lo = radius.min(side as f64 / 2.0);
            let hi = (side as f64 - radius).max(lo);
            (rng.uniform(lo, hi), rng.uniform(lo, hi))
        })
        .collect();
    let mut m = Matrix::zeros(side, side);
    for y in 0..side {
        for x in 0..side {
            let mut v = BACKGROUND + NOISE * rng.normal();
            for &(cy, cx) in &blobs {
                let d2 = (y as f64 + 0.5 - cy).powi(2) + (x as f64 + 0.5 - cx).powi(2);
                v += BLOB_PEAK * (-d2 / (radius * radius)).exp();
            }
            m.set(y, x, (v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let a = synth_dataset(1, 10, SynthKind::Features { dim: 128 }, 2.0);
        assert_eq!(a.len(), 20);
        assert!(a.features().unwrap().iter().all(|f| f.len() == 128));
        assert_eq!(a.class_count(0), 10);
        assert_eq!(
            a,
            synth_dataset(1, 10, SynthKind::Features { dim: 128 }, 2.0)
        );
        assert_ne!(
            a,
            synth_dataset(2, 10, SynthKind::Features { dim: 128 }, 2.0)
        );

        let imgs = synth_dataset(3, 2, SynthKind::Images { side: 64 }, 3.0);
        assert_eq!(
            imgs,
            synth_dataset(3, 2, SynthKind::Images { side: 64 }, 3.0)
        );
        for m in imgs.images().unwrap() {
            assert_eq!(m.shape(), (64, 64));
            assert!(m.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(m
                .as_slice()
                .iter()
                .all(|&v| (v * 255.0).round() / 255.0 == v));
        }
    }

    #[test]
    fn class_means_sit_at_half_separation() {
        let ds = synth_dataset(5, 2000, SynthKind::Features { dim: 4 }, 6.0);
        let f = ds.features().unwrap();
        let mean = |range: std::ops::Range<usize>| -> Vec<f64> {
            let n = range.len() as f64;
            (0..4)
                .map(|j| range.clone().map(|i| f[i][j]).sum::<f64>() / n)
                .collect()
        };
        let (m0, m1) = (mean(0..2000), mean(2000..4000));
        let gap: f64 = m0
            .iter()
            .zip(&m1)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((gap - 6.0).abs() < 0.15, "gap {gap}");
        let centre: f64 = m0
            .iter()
            .zip(&m1)
            .map(|(a, b)| ((a + b) / 2.0).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(centre < 0.1);
    }

    #[test]
    fn class_one_is_brighter() {
        let ds = synth_dataset(
            9,
            20,
            SynthKind::Images { side: 64 },
            DEFAULT_IMAGE_SEPARATION,
        );
        let imgs = ds.images().unwrap();
        let total = |m: &Matrix| m.as_slice().iter().sum::<f64>();
        let e0: f64 = imgs[..20].iter().map(total).sum();
        let e1: f64 = imgs[20..].iter().map(total).sum();
        assert!(e1 > 1.5 * e0, "{e0} vs {e1}");
        // no separation: identical class parameters
        let flat = synth_dataset(9, 200, SynthKind::Images { side: 16 }, 0.0);
        let imgs = flat.images().unwrap();
        let m0: f64 = imgs[..200].iter().map(total).sum();
        let m1: f64 = imgs[200..].iter().map(total).sum();
        assert!((m0 / m1 - 1.0).abs() < 0.05);
    }
}
