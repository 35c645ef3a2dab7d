use super::svd::extend_orthonormal;
use super::{dot, mode_product, svd, unfold, Matrix, Mode, Tensor3, TensorError};

/// Truncated Tucker decomposition produced by HOSVD.
#[derive(Debug, Clone, PartialEq)]
pub struct HosvdDecomposition {
    /// `k1 × k2 × k3`
    pub core: Tensor3,
    /// `Iₙ × kₙ` with orthonormal columns.
    pub factors: [Matrix; 3],
    /// Full singular spectrum of each mode-n unfolding, kept for error bounds.
    pub mode_singular_values: [Vec<f64>; 3],
}

impl HosvdDecomposition {
    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    /// Frobenius norms of the core's mode-n slices, in slice order.
    pub fn core_slice_norms(&self, mode: Mode) -> Vec<f64> {
        (0..self.core.dims()[mode.axis()])
            .map(|i| {
                let s = self.core.mode_slice(mode, i);
                dot(&s, &s).sqrt()
            })
            .collect()
    }

    /// Largest `|⟨S_i, S_j⟩_F|` over distinct mode-n core slices, all modes.
    /// Zero for an exactly all-orthogonal core.
    pub fn max_slice_inner_product(&self) -> f64 {
        let mut worst = 0.0_f64;
        for mode in Mode::ALL {
            let slices: Vec<Vec<f64>> = (0..self.core.dims()[mode.axis()])
                .map(|i| self.core.mode_slice(mode, i))
                .collect();
            for i in 0..slices.len() {
                for j in i + 1..slices.len() {
                    worst = worst.max(dot(&slices[i], &slices[j]).abs());
                }
            }
        }
        worst
    }
}

/// HOSVD truncated to `ranks`: `Uₙ` holds the leading `kₙ` left singular
/// vectors of the mode-n unfolding and the core is `t ×₁U1ᵀ ×₂U2ᵀ ×₃U3ᵀ`.
pub fn hosvd(t: &Tensor3, ranks: [usize; 3]) -> Result<HosvdDecomposition, TensorError> {
    let dims = t.dims();
    for mode in Mode::ALL {
        let n = mode.axis();
        if ranks[n] == 0 || ranks[n] > dims[n] {
            return Err(TensorError::InvalidRank {
                mode: n + 1,
                rank: ranks[n],
                dim: dims[n],
            });
        }
    }

    let mut factors = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    for mode in Mode::ALL {
        let decomposition = svd(&unfold(t, mode))?;
        factors.push(extend_orthonormal(&decomposition.u, ranks[mode.axis()]));
        spectra.push(decomposition.sigma);
    }

    let mut core = t.clone();
    for mode in Mode::ALL {
        core = mode_product(&core, &factors[mode.axis()].transpose(), mode)?;
    }

    let [u1, u2, u3]: [Matrix; 3] = factors.try_into().expect("three factors");
    let [s1, s2, s3]: [Vec<f64>; 3] = spectra.try_into().expect("three spectra");
    Ok(HosvdDecomposition {
        core,
        factors: [u1, u2, u3],
        mode_singular_values: [s1, s2, s3],
    })
}

/// `core ×₁U1 ×₂U2 ×₃U3`.
pub fn reconstruct(d: &HosvdDecomposition) -> Result<Tensor3, TensorError> {
    let mut out = d.core.clone();
    for mode in Mode::ALL {
        out = mode_product(&out, &d.factors[mode.axis()], mode)?;
    }
    Ok(out)
}

/// `sqrt(Σₙ Σ_{i>kₙ} σᵢ⁽ⁿ⁾²)`, the standard quasi-optimality bound on the
/// Frobenius error of a truncated HOSVD.
pub fn truncation_error_bound(mode_singular_values: &[Vec<f64>; 3], ranks: [usize; 3]) -> f64 {
    mode_singular_values
        .iter()
        .zip(ranks)
        .map(|(s, k)| s.iter().skip(k).map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}
