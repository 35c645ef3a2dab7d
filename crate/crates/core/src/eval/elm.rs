//! Extreme learning machine: a random sigmoid hidden layer with output
//! weights fit by least squares.

use super::EvalError;
use crate::rng::SplitMix64;
use crate::tensor::{dot, svd, Matrix};

/// Relative cutoff below which singular values are treated as zero.
const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// `hidden × d`, row-major.
    pub input_weights: Matrix,
    pub biases: Vec<f64>,
    /// `hidden × classes`.
    pub output_weights: Matrix,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ElmModel {
    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.input_weights.rows())
            .map(|j| sigmoid(dot(self.input_weights.row(j), x) + self.biases[j]))
            .collect()
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        self.output_weights.t_mul_vec(&self.hidden(x))
    }

    /// Argmax of the outputs; ties go to the lower label.
    pub fn classify(&self, x: &[f64]) -> Result<u32, EvalError> {
        if x.len() != self.input_weights.cols() {
            return Err(EvalError::Invalid(format!(
                "sample dimension {} differs from model dimension {}",
                x.len(),
                self.input_weights.cols()
            )));
        }
        let out = self.outputs(x);
        let mut best = 0;
        for (i, &v) in out.iter().enumerate() {
            if v > out[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }
}

/// Input weights and biases are uniform on `[−1, 1]`, drawn row by row from
/// [`SplitMix64`] seeded with `seed`; targets are one-hot over labels
/// `0..=max`.
pub fn elm_train(
    train: &[Vec<f64>],
    labels: &[u32],
    hidden: usize,
    seed: u64,
) -> Result<ElmModel, EvalError> {
    if hidden == 0 {
        return Err(EvalError::Invalid("hidden size must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    if train.len() != labels.len() {
        return Err(EvalError::Invalid(format!(
            "{} samples, {} labels",
            train.len(),
            labels.len()
        )));
    }
    let d = train[0].len();
    if d == 0 || train.iter().any(|t| t.len() != d) {
        return Err(EvalError::Invalid(
            "training samples must share a positive dimension".into(),
        ));
    }
    let classes = *labels.iter().max().expect("nonempty") as usize + 1;

    let mut rng = SplitMix64::new(seed);
    let mut w = Matrix::zeros(hidden, d);
    let mut biases = Vec::with_capacity(hidden);
    for j in 0..hidden {
        for c in 0..d {
            w.set(j, c, rng.uniform(-1.0, 1.0));
        }
        biases.push(rng.uniform(-1.0, 1.0));
    }
    let mut model = ElmModel {
        input_weights: w,
        biases,
        output_weights: Matrix::zeros(hidden, classes),
    };

    let n = train.len();
    let rows: Vec<Vec<f64>> = train.iter().map(|x| model.hidden(x)).collect();
    let h = Matrix::from_rows(&rows)?;
    let dec = svd(&h)?;
    let s1 = dec.sigma.first().copied().unwrap_or(0.0);
    if !(s1 > 0.0) {
        return Err(EvalError::Degenerate(
            "hidden-layer output is identically zero".into(),
        ));
    }
    // β = V Σ⁺ Uᵀ T, T one-hot
    let r = dec.sigma.len();
    let mut beta = Matrix::zeros(hidden, classes);
    for i in 0..r {
        let s = dec.sigma[i];
        if s <= PINV_CUTOFF * s1 {
            continue;
        }
        // (Uᵀ T)[i, c] = Σ_n U[n, i] · [label_n = c]
        let mut ut = vec![0.0; classes];
        for (row, &l) in labels.iter().enumerate().take(n) {
            ut[l as usize] += dec.u.get(row, i);
        }
        for j in 0..hidden {
            let v = dec.vt.get(i, j) / s;
            for (c, &u) in ut.iter().enumerate() {
                beta.set(j, c, beta.get(j, c) + v * u);
            }
        }
    }
    model.output_weights = beta;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut rng = SplitMix64::new(seed);
        let x = (0..n)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let y = (0..n).map(|i| (i % 2) as u32).collect();
        (x, y)
    }

    #[test]
    fn seeded_and_deterministic() {
        let (x, y) = data(1, 20, 3);
        assert_eq!(
            elm_train(&x, &y, 10, 5).unwrap(),
            elm_train(&x, &y, 10, 5).unwrap()
        );
        assert_ne!(
            elm_train(&x, &y, 10, 5).unwrap(),
            elm_train(&x, &y, 10, 6).unwrap()
        );
    }

    #[test]
    fn interpolates_when_hidden_covers_samples() {
        let (x, y) = data(2, 30, 4);
        let m = elm_train(&x, &y, 40, 3).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.classify(xi).unwrap(), yi);
            let out = m.outputs(xi);
            assert!((out[yi as usize] - 1.0).abs() < 1e-5, "{out:?}");
        }
    }

    #[test]
    fn errors() {
        let (x, y) = data(2, 4, 2);
        assert!(matches!(
            elm_train(&x, &y, 0, 1),
            Err(EvalError::Invalid(_))
        ));
        assert!(matches!(
            elm_train(&[], &[], 3, 1),
            Err(EvalError::EmptyTraining)
        ));
        // one unit, one input: push the pre-activation to −∞ so H = 0
        let w = SplitMix64::new(9).uniform(-1.0, 1.0);
        let x0 = vec![vec![-w.signum() * 1e300]; 2];
        assert!(matches!(
            elm_train(&x0, &[0, 1], 1, 9),
            Err(EvalError::Degenerate(_))
        ));
        let m = elm_train(&x, &y, 3, 1).unwrap();
        assert!(m.classify(&[1.0]).is_err());
    }
}
