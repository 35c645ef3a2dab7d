use super::{Matrix, TensorError};

/// Tensor mode (axis), numbered 1..=3 as in the usual multilinear notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis index.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    /// The two remaining axes in increasing order.
    fn others(self) -> (usize, usize) {
        match self {
            Mode::One => (1, 2),
            Mode::Two => (0, 2),
            Mode::Three => (0, 1),
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = TensorError;

    fn try_from(n: usize) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            other => Err(TensorError::InvalidMode(other)),
        }
    }
}

/// Dense order-3 tensor; the mode-1 index varies fastest in `data`.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self, TensorError> {
        if dims.contains(&0) {
            return Err(TensorError::EmptyDims(dims));
        }
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        assert!(!dims.contains(&0), "tensor dimensions must be positive");
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(i1, i2, i3)` with zero-based indices.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = t.offset(i, j, k);
                    t.data[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Stacks equally shaped `h × w` matrices as the frontal slices of an
    /// `h × w × n` tensor.
    pub fn stack_slices(slices: &[&Matrix]) -> Result<Self, TensorError> {
        let first = slices.first().ok_or(TensorError::EmptyDims([0, 0, 0]))?;
        let (h, w) = first.shape();
        if let Some(bad) = slices.iter().find(|s| s.shape() != (h, w)) {
            return Err(TensorError::ShapeMismatch {
                op: "stack_slices",
                left: (h, w),
                right: bad.shape(),
            });
        }
        Ok(Self::from_fn([h, w, slices.len()], |i, j, k| {
            slices[k].get(i, j)
        }))
    }

    pub(crate) fn from_raw(dims: [usize; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.offset(i, j, k);
        self.data[idx] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, other.dims, "tensor sub shape mismatch");
        Tensor3::from_raw(
            self.dims,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Frontal slice `k` (mode-3 index fixed) as an `I1 × I2` matrix.
    pub fn frontal_slice(&self, k: usize) -> Matrix {
        let [d0, d1, _] = self.dims;
        let mut out = Matrix::zeros(d0, d1);
        for j in 0..d1 {
            for i in 0..d0 {
                out.set(i, j, self.get(i, j, k));
            }
        }
        out
    }

    /// Slice `index` along `mode`, flattened in storage order. Used for
    /// inner products between slices, where only a consistent order matters.
    pub fn mode_slice(&self, mode: Mode, index: usize) -> Vec<f64> {
        let [d0, d1, d2] = self.dims;
        let mut out = Vec::new();
        for k in 0..d2 {
            for j in 0..d1 {
                for i in 0..d0 {
                    let idx = [i, j, k][mode.axis()];
                    if idx == index {
                        out.push(self.get(i, j, k));
                    }
                }
            }
        }
        out
    }
}

impl std::fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor3 {:?} (‖·‖_F = {:.6e})",
            self.dims,
            self.frobenius_norm()
        )
    }
}

#[inline]
fn unfold_coords(dims: [usize; 3], mode: Mode, i: usize, j: usize, k: usize) -> (usize, usize) {
    let idx = [i, j, k];
    let (a, b) = mode.others();
    (idx[mode.axis()], idx[a] + dims[a] * idx[b])
}

/// Mode-n unfolding. Row index is the mode-n index; the column index is built
/// from the remaining indices in increasing mode order, earlier varying fastest.
pub fn unfold(t: &Tensor3, mode: Mode) -> Matrix {
    let dims = t.dims;
    let (a, b) = mode.others();
    let rows = dims[mode.axis()];
    let cols = dims[a] * dims[b];
    let mut out = vec![0.0; rows * cols];
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let (r, c) = unfold_coords(dims, mode, i, j, k);
                out[r * cols + c] = t.get(i, j, k);
            }
        }
    }
    Matrix::from_raw(rows, cols, out)
}

/// Exact inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: Mode, dims: [usize; 3]) -> Result<Tensor3, TensorError> {
    if dims.contains(&0) {
        return Err(TensorError::EmptyDims(dims));
    }
    let (a, b) = mode.others();
    let expected = (dims[mode.axis()], dims[a] * dims[b]);
    if m.shape() != expected {
        return Err(TensorError::ShapeMismatch {
            op: "fold",
            left: m.shape(),
            right: expected,
        });
    }
    let mut t = Tensor3::zeros(dims);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let (r, c) = unfold_coords(dims, mode, i, j, k);
                t.set(i, j, k, m.get(r, c));
            }
        }
    }
    Ok(t)
}

/// n-mode product `t ×ₙ m`: the mode-n dimension is replaced by `m.rows()`.
pub fn mode_product(t: &Tensor3, m: &Matrix, mode: Mode) -> Result<Tensor3, TensorError> {
    let axis = mode.axis();
    if m.cols() != t.dims[axis] {
        return Err(TensorError::ShapeMismatch {
            op: "mode_product",
            left: m.shape(),
            right: (t.dims[axis], 0),
        });
    }
    let product = m.matmul(&unfold(t, mode))?;
    let mut dims = t.dims;
    dims[axis] = m.rows();
    fold(&product, mode, dims)
}
