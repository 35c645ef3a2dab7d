//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! For a tall `m × n` matrix the columns are rotated pairwise until every pair
//! is numerically orthogonal; the column norms are then the singular values
//! and the accumulated rotations form `V`. Wide matrices are handled through
//! their transpose. One-sided Jacobi gives singular values with high relative
//! accuracy, which the tight reconstruction tolerances in this crate rely on.

use super::matrix::{dot, Matrix};
use super::TensorError;

/// Upper limit on full sweeps over all column pairs. Quadratic convergence
/// means well-behaved inputs finish in well under 20.
pub const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U · diag(σ) · Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `m × r`, orthonormal columns.
    pub u: Matrix,
    /// Length `r = min(m, n)`, nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `r × n`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (m, r) = self.u.shape();
        let n = self.vt.cols();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..r {
                let coef = self.u.get(i, k) * self.sigma[k];
                if coef == 0.0 {
                    continue;
                }
                for (o, &v) in row.iter_mut().zip(self.vt.row(k)) {
                    *o += coef * v;
                }
            }
        }
        Matrix::from_raw(m, n, out)
    }
}

/// Computes the thin SVD of `a`.
///
/// Signs are fixed so that in every column of `u` the entry of largest
/// magnitude (first one on ties) is nonnegative; the matching row of `vt`
/// absorbs the flip.
pub fn svd(a: &Matrix) -> Result<SvdResult, TensorError> {
    let (m, n) = a.shape();
    let (mut u, sigma, mut vt) = if m >= n {
        let tall = jacobi_tall(a)?;
        (tall.left, tall.sigma, tall.right.transpose())
    } else {
        // Aᵀ = U'ΣV'ᵀ  ⇒  A = V'ΣU'ᵀ
        let tall = jacobi_tall(&a.transpose())?;
        (tall.right, tall.sigma, tall.left.transpose())
    };

    for j in 0..u.cols() {
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..u.rows() {
            let mag = u.get(i, j).abs();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        if u.get(pivot, j) < 0.0 {
            for i in 0..u.rows() {
                u.set(i, j, -u.get(i, j));
            }
            for c in 0..vt.cols() {
                vt.set(j, c, -vt.get(j, c));
            }
        }
    }

    Ok(SvdResult { u, sigma, vt })
}

struct TallSvd {
    /// m × n
    left: Matrix,
    sigma: Vec<f64>,
    /// n × n, columns are right singular vectors
    right: Matrix,
}

fn jacobi_tall(a: &Matrix) -> Result<TallSvd, TensorError> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| dot(c, c)).collect();

    let tol = f64::EPSILON * m as f64;
    // Columns below ε·‖A‖_F are roundoff of a rank-deficient input; their
    // direction is noise, so rotating them against anything never settles.
    let total: f64 = norms.iter().sum();
    let negligible = (f64::EPSILON * f64::EPSILON * total).max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&w[p], &w[q]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
                norms[p] = dot(&w[p], &w[p]);
                norms[q] = dot(&w[q], &w[q]);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TensorError::NoConvergence {
            sweeps: MAX_SWEEPS,
            rows: m,
            cols: n,
        });
    }

    let mut sigma: Vec<f64> = norms.iter().map(|x| x.sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal singular values in column order.
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    sigma = order.iter().map(|&i| sigma[i]).collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * f64::EPSILON * m.max(n) as f64;
    let mut left_cols: Vec<Option<Vec<f64>>> = order
        .iter()
        .zip(&sigma)
        .map(|(&src, &s)| {
            if s > cutoff && s > 0.0 {
                Some(w[src].iter().map(|x| x / s).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut left_cols, m);

    let mut left = vec![0.0; m * n];
    for (j, col) in left_cols.iter().enumerate() {
        for (i, &x) in col.as_ref().expect("completed").iter().enumerate() {
            left[i * n + j] = x;
        }
    }
    let mut right = vec![0.0; n * n];
    for (j, &src) in order.iter().enumerate() {
        for (i, &x) in v[src].iter().enumerate() {
            right[i * n + j] = x;
        }
    }

    Ok(TallSvd {
        left: Matrix::from_raw(m, n, left),
        sigma,
        right: Matrix::from_raw(n, n, right),
    })
}

/// Extends `u` (orthonormal columns) to `k` orthonormal columns. Used when a
/// requested rank exceeds the thin SVD width; the extra directions carry
/// singular value zero.
pub(crate) fn extend_orthonormal(u: &Matrix, k: usize) -> Matrix {
    if k <= u.cols() {
        return u.leading_columns(k);
    }
    let m = u.rows();
    assert!(k <= m, "cannot fit {k} orthonormal columns in R^{m}");
    let mut cols: Vec<Option<Vec<f64>>> = (0..u.cols()).map(|j| Some(u.column(j))).collect();
    cols.resize(k, None);
    complete_orthonormal(&mut cols, m);
    let refs: Vec<&[f64]> = cols
        .iter()
        .map(|c| c.as_deref().expect("completed"))
        .collect();
    Matrix::from_columns(&refs).expect("finite unit vectors")
}

/// Fills the `None` slots with unit vectors orthogonal to every other slot,
/// drawn from the standard basis by twice-iterated Gram–Schmidt.
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], m: usize) {
    let missing: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].is_none()).collect();
    for j in missing {
        let accepted: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for _ in 0..2 {
                for q in &accepted {
                    let proj = dot(&cand, q);
                    for (c, &x) in cand.iter_mut().zip(q) {
                        *c -= proj * x;
                    }
                }
            }
            let nrm2 = dot(&cand, &cand);
            if best.as_ref().is_none_or(|(b, _)| nrm2 > *b) {
                best = Some((nrm2, cand));
            }
            if nrm2 >= 0.5 {
                break;
            }
        }
        let (nrm2, mut cand) = best.expect("m >= number of columns");
        let nrm = nrm2.sqrt();
        cand.iter_mut().for_each(|x| *x /= nrm);
        cols[j] = Some(cand);
    }
}

fn pair_mut<T>(items: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (lo, hi) = items.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}
