//! Minimal-residual classification over per-class orthonormal subspaces.
//!
//! Vector mode learns, per class, the leading left singular vectors of the
//! matrix whose columns are that class's training vectors. Matrix mode stacks
//! a class's images into an `h × w × n` tensor, compresses modes 1 and 2 with
//! HOSVD factors, and keeps `k3` mutually orthonormal basis images. A sample
//! is assigned to the class whose subspace leaves the smallest relative
//! residual.

mod io;

pub use io::{
    load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION,
};

use thiserror::Error;

use crate::tensor::{
    dot, hosvd, mode_product, norm, svd, unfold, Matrix, Mode, Tensor3, TensorError,
};

/// Label id of the healthy class.
pub const HEALTHY: u32 = 0;
/// Label id of the leukemia (ALL) class.
pub const ALL: u32 = 1;

pub fn label_name(label: u32) -> &'static str {
    match label {
        HEALTHY => "healthy",
        ALL => "ALL",
        _ => "unknown",
    }
}

/// Default vector-mode rank.
pub const DEFAULT_VECTOR_RANK: usize = 8;
/// Default matrix-mode ranks `(k1, k2, k3)`.
pub const DEFAULT_MATRIX_RANKS: [usize; 3] = [16, 16, 4];

/// Basis images whose core slice norm falls below this fraction of the
/// leading slice norm are treated as zero and dropped.
const ZERO_SLICE_RATIO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {label} has no training samples")]
    EmptyClass { label: u32 },
    #[error("class {label} has {count} samples but rank {rank} was requested")]
    TooFewSamples {
        label: u32,
        count: usize,
        rank: usize,
    },
    #[error("label {0} is not a binary class id (0 = healthy, 1 = ALL)")]
    UnknownLabel(u32),
    #[error("{samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("rank {rank} exceeds the dimension {dim}")]
    RankTooLarge { rank: usize, dim: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("sample shape {found:?} does not match the model input {expected:?}")]
    ShapeMismatch {
        expected: InputShape,
        found: InputShape,
    },
    #[error("sample has zero norm")]
    ZeroSample,
    #[error("class {label} produced no nonzero basis matrix")]
    DegenerateClass { label: u32 },
    #[error("class {label} basis is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { label: u32, defect: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Vector,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    Vector(usize),
    Matrix(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranks {
    Vector(usize),
    /// `(k1, k2, k3)`; the per-class kept `k3` may be smaller.
    Matrix([usize; 3]),
}

/// One class's learned subspace.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassBasis {
    /// `d × k` with orthonormal columns.
    Vector(Matrix),
    /// `h × w` images, orthonormal under the Frobenius inner product.
    Matrix(Vec<Matrix>),
}

impl ClassBasis {
    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        match self {
            ClassBasis::Vector(q) => q.orthonormality_defect(),
            ClassBasis::Matrix(bs) => {
                let mut worst = 0.0_f64;
                for (i, a) in bs.iter().enumerate() {
                    for (j, b) in bs.iter().enumerate() {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((a.frobenius_dot(b) - target).abs());
                    }
                }
                worst
            }
        }
    }

    /// Number of basis elements.
    pub fn dimension(&self) -> usize {
        match self {
            ClassBasis::Vector(q) => q.cols(),
            ClassBasis::Matrix(bs) => bs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HosvdModel {
    pub(crate) format_version: u32,
    pub(crate) input_shape: InputShape,
    pub(crate) ranks: Ranks,
    pub(crate) class_labels: Vec<u32>,
    pub(crate) bases: Vec<ClassBasis>,
}

/// A sample to classify: a feature vector or an image matrix.
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Vector(&'a [f64]),
    Matrix(&'a Matrix),
}

impl Sample<'_> {
    fn shape(&self) -> InputShape {
        match self {
            Sample::Vector(v) => InputShape::Vector(v.len()),
            Sample::Matrix(m) => InputShape::Matrix(m.rows(), m.cols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub label: u32,
    /// Relative residual per class, in `class_labels` order.
    pub residuals: Vec<f64>,
    /// Second-smallest minus smallest residual.
    pub margin: f64,
}

impl HosvdModel {
    pub fn mode(&self) -> ModelMode {
        match self.input_shape {
            InputShape::Vector(_) => ModelMode::Vector,
            InputShape::Matrix(..) => ModelMode::Matrix,
        }
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn input_shape(&self) -> InputShape {
        self.input_shape
    }

    pub fn ranks(&self) -> Ranks {
        self.ranks
    }

    pub fn class_labels(&self) -> &[u32] {
        &self.class_labels
    }

    pub fn bases(&self) -> &[ClassBasis] {
        &self.bases
    }

    pub fn basis(&self, label: u32) -> Option<&ClassBasis> {
        self.class_labels
            .iter()
            .position(|&l| l == label)
            .map(|i| &self.bases[i])
    }

    /// Residual of `sample` for every class, then the argmin with ties going
    /// to the lowest class id.
    ///
    /// The residual is `‖z − P_c z‖ / ‖z‖` with `P_c` the orthogonal projector
    /// onto the class subspace, which equals
    /// `sqrt(‖z‖² − ‖Q_cᵀz‖²) / ‖z‖` but does not lose precision to
    /// cancellation when the sample lies close to the subspace.
    pub fn classify(&self, sample: Sample<'_>) -> Result<ClassificationResult, ClassifierError> {
        if sample.shape() != self.input_shape {
            return Err(ClassifierError::ShapeMismatch {
                expected: self.input_shape,
                found: sample.shape(),
            });
        }
        let flat: &[f64] = match sample {
            Sample::Vector(v) => v,
            Sample::Matrix(m) => m.as_slice(),
        };
        let z_norm = norm(flat);
        if z_norm == 0.0 || !z_norm.is_finite() {
            return Err(ClassifierError::ZeroSample);
        }
        let unit: Vec<f64> = flat.iter().map(|x| x / z_norm).collect();

        let residuals: Vec<f64> = self
            .bases
            .iter()
            .map(|basis| projection_residual(basis, &unit))
            .collect();

        let mut best = 0;
        for (i, &r) in residuals.iter().enumerate() {
            if r < residuals[best] {
                best = i;
            }
        }
        let runner_up = residuals
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &r)| r)
            .fold(f64::INFINITY, f64::min);
        let margin = if runner_up.is_finite() {
            runner_up - residuals[best]
        } else {
            0.0
        };

        Ok(ClassificationResult {
            label: self.class_labels[best],
            residuals,
            margin,
        })
    }
}

/// `‖u − P u‖` for a unit vector `u` (flattened row-major when the basis is
/// made of matrices).
fn projection_residual(basis: &ClassBasis, unit: &[f64]) -> f64 {
    let mut rest = unit.to_vec();
    match basis {
        ClassBasis::Vector(q) => {
            let coeffs = q.t_mul_vec(unit);
            for r in 0..q.rows() {
                rest[r] -= dot(q.row(r), &coeffs);
            }
        }
        ClassBasis::Matrix(bs) => {
            for b in bs {
                let c = dot(b.as_slice(), unit);
                for (x, &y) in rest.iter_mut().zip(b.as_slice()) {
                    *x -= c * y;
                }
            }
        }
    }
    norm(&rest).min(1.0)
}

/// Groups sample indices by label, requiring both binary classes present.
fn group_by_class(labels: &[u32]) -> Result<Vec<(u32, Vec<usize>)>, ClassifierError> {
    let mut groups = vec![(HEALTHY, Vec::new()), (ALL, Vec::new())];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            HEALTHY | ALL => groups[l as usize].1.push(i),
            other => return Err(ClassifierError::UnknownLabel(other)),
        }
    }
    if let Some((label, _)) = groups.iter().find(|(_, idx)| idx.is_empty()) {
        return Err(ClassifierError::EmptyClass { label: *label });
    }
    Ok(groups)
}

/// Trains vector mode from a `d × N` matrix whose columns are samples.
pub fn train_vector_mode(
    features: &Matrix,
    labels: &[u32],
    rank: usize,
) -> Result<HosvdModel, ClassifierError> {
    let (d, n) = features.shape();
    if labels.len() != n {
        return Err(ClassifierError::LabelCount {
            samples: n,
            labels: labels.len(),
        });
    }
    if rank == 0 {
        return Err(ClassifierError::ZeroRank);
    }
    if rank > d {
        return Err(ClassifierError::RankTooLarge { rank, dim: d });
    }
    let groups = group_by_class(labels)?;

    let mut class_labels = Vec::new();
    let mut bases = Vec::new();
    for (label, idx) in groups {
        if idx.len() < rank {
            return Err(ClassifierError::TooFewSamples {
                label,
                count: idx.len(),
                rank,
            });
        }
        let columns: Vec<Vec<f64>> = idx.iter().map(|&j| features.column(j)).collect();
        let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        let class_matrix = Matrix::from_columns(&refs)?;
        let q = svd(&class_matrix)?.u.leading_columns(rank);
        let basis = ClassBasis::Vector(q);
        check_orthonormal(label, &basis)?;
        tracing::debug!(label, samples = idx.len(), rank, "vector basis");
        class_labels.push(label);
        bases.push(basis);
    }

    Ok(HosvdModel {
        format_version: MODEL_VERSION,
        input_shape: InputShape::Vector(d),
        ranks: Ranks::Vector(rank),
        class_labels,
        bases,
    })
}

/// Convenience wrapper taking samples as row slices.
pub fn train_vector_mode_from_samples(
    samples: &[Vec<f64>],
    labels: &[u32],
    rank: usize,
) -> Result<HosvdModel, ClassifierError> {
    let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    let features = Matrix::from_columns(&refs)?;
    train_vector_mode(&features, labels, rank)
}

/// Trains matrix mode from equally shaped images.
///
/// Per class, `U1` and `U2` are the leading `k1`/`k2` left singular vectors
/// of the class tensor's mode-1 and mode-2 unfoldings. The mode-3 factor is
/// taken from the tensor already compressed in modes 1 and 2, which keeps
/// the `k1 × k2` core slices exactly orthogonal under truncation. Each basis
/// image is a core slice mapped back by `U1 · S_j · U2ᵀ` and normalized.
pub fn train_matrix_mode(
    images: &[Matrix],
    labels: &[u32],
    ranks: [usize; 3],
) -> Result<HosvdModel, ClassifierError> {
    if labels.len() != images.len() {
        return Err(ClassifierError::LabelCount {
            samples: images.len(),
            labels: labels.len(),
        });
    }
    let groups = group_by_class(labels)?;
    let (h, w) = images[0].shape();
    if let Some(bad) = images.iter().find(|m| m.shape() != (h, w)) {
        return Err(ClassifierError::ShapeMismatch {
            expected: InputShape::Matrix(h, w),
            found: InputShape::Matrix(bad.rows(), bad.cols()),
        });
    }
    let [k1, k2, k3] = ranks;
    if k1 == 0 || k2 == 0 || k3 == 0 {
        return Err(ClassifierError::ZeroRank);
    }
    if k1 > h {
        return Err(ClassifierError::RankTooLarge { rank: k1, dim: h });
    }
    if k2 > w {
        return Err(ClassifierError::RankTooLarge { rank: k2, dim: w });
    }

    let mut class_labels = Vec::new();
    let mut bases = Vec::new();
    for (label, idx) in groups {
        if idx.len() < k3 {
            return Err(ClassifierError::TooFewSamples {
                label,
                count: idx.len(),
                rank: k3,
            });
        }
        let slices: Vec<&Matrix> = idx.iter().map(|&i| &images[i]).collect();
        let tensor = Tensor3::stack_slices(&slices)?;
        let basis = ClassBasis::Matrix(class_basis_images(&tensor, [k1, k2, k3])?);
        if basis.dimension() == 0 {
            return Err(ClassifierError::DegenerateClass { label });
        }
        check_orthonormal(label, &basis)?;
        tracing::debug!(
            label,
            samples = idx.len(),
            kept = basis.dimension(),
            "matrix basis"
        );
        class_labels.push(label);
        bases.push(basis);
    }

    Ok(HosvdModel {
        format_version: MODEL_VERSION,
        input_shape: InputShape::Matrix(h, w),
        ranks: Ranks::Matrix(ranks),
        class_labels,
        bases,
    })
}

fn class_basis_images(tensor: &Tensor3, ranks: [usize; 3]) -> Result<Vec<Matrix>, ClassifierError> {
    let [k1, k2, k3] = ranks;
    let n = tensor.dims()[2];
    // U1, U2 from the HOSVD of the class tensor; the mode-3 rank is left
    // full here and chosen on the compressed tensor below.
    let d = hosvd(tensor, [k1, k2, n])?;
    let [u1, u2, _] = &d.factors;

    let compressed = mode_product(
        &mode_product(tensor, &u1.transpose(), Mode::One)?,
        &u2.transpose(),
        Mode::Two,
    )?;
    let mode3 = svd(&unfold(&compressed, Mode::Three))?;
    let u3 = mode3.u.leading_columns(k3.min(mode3.u.cols()));
    let core = mode_product(&compressed, &u3.transpose(), Mode::Three)?;

    let lead = mode3.sigma.first().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(k3);
    for j in 0..core.dims()[2] {
        let slice = core.frontal_slice(j);
        let slice_norm = slice.frobenius_norm();
        if lead == 0.0 || slice_norm <= ZERO_SLICE_RATIO * lead {
            continue;
        }
        let image = u1.matmul(&slice)?.matmul(&u2.transpose())?;
        let image_norm = image.frobenius_norm();
        out.push(image.scaled(1.0 / image_norm));
    }
    Ok(out)
}

fn check_orthonormal(label: u32, basis: &ClassBasis) -> Result<(), ClassifierError> {
    let defect = basis.orthonormality_defect();
    let limit = match basis {
        ClassBasis::Vector(_) => 1e-10,
        ClassBasis::Matrix(_) => 1e-8,
    };
    if defect > limit {
        return Err(ClassifierError::NotOrthonormal { label, defect });
    }
    Ok(())
}
