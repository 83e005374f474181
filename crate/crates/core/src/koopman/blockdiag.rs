//! Rewriting a dense diagonalizable generator as rotation-scale blocks.
//!
//! For a real `m x m` matrix `K` with eigendecomposition `K = P diag(λ) P⁻¹`,
//! the construction returns `P̃`, `K̃ = I + diag(Λ_1, ..)` and `Q̃` with
//! `P̃ exp(-t (K̃ - I)) Q̃ = exp(-t (K - I))` for every `t`.
//!
//! Each conjugate pair `λ, λ̄` becomes one block `[[Re λ - 1, Im λ], [-Im λ, Re λ - 1]]`
//! with `P̃` columns `√2 Re p, √2 Im p` and `Q̃` rows `√2 Re p†, -√2 Im p†`.
//! Each real eigenvalue is duplicated into a diagonal 2x2 block with `P̃`
//! columns `p/√2, p/√2` and `Q̃` rows `p†/√2, p†/√2`, so `K̃` has size
//! `2 (#pairs + #real)`, which equals `m` exactly when the spectrum has no
//! real eigenvalues.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{HkdError, Result};

use super::block::block_exp;

/// Largest accepted condition number of the (column-normalised) eigenvector matrix.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct BlockDiagonalization {
    /// `m x m̃`.
    pub p: DMatrix<f64>,
    /// `m̃ x m̃`, block diagonal.
    pub k_tilde: DMatrix<f64>,
    /// `m̃ x m`.
    pub q: DMatrix<f64>,
    /// `(alpha, beta)` of each block of `K̃ - I`, in block order.
    pub blocks: Vec<(f64, f64)>,
    /// Number of leading blocks that came from conjugate pairs.
    pub complex_pairs: usize,
    pub condition: f64,
}

impl BlockDiagonalization {
    /// `P̃ exp(-t (K̃ - I)) Q̃`, using the closed-form block exponentials.
    pub fn exponential(&self, t: f64) -> Result<DMatrix<f64>> {
        let mt = self.k_tilde.nrows();
        let mut e = DMatrix::zeros(mt, mt);
        for (b, &(alpha, beta)) in self.blocks.iter().enumerate() {
            let m = block_exp(alpha, beta, -t)?;
            for r in 0..2 {
                for c in 0..2 {
                    e[(2 * b + r, 2 * b + c)] = m[r][c];
                }
            }
        }
        Ok(&self.p * e * &self.q)
    }
}

type C64 = Complex<f64>;

fn null_vectors(k: &DMatrix<C64>, lambda: C64, count: usize, tol: f64) -> Result<Vec<DVector<C64>>> {
    let m = k.nrows();
    let shifted = k - DMatrix::<C64>::identity(m, m) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    // a defective eigenvalue has fewer eigenvectors than its multiplicity
    if let Some(&worst) = idx.get(count - 1) {
        if svd.singular_values[worst] > tol {
            return Err(HkdError::Conditioning { condition: f64::INFINITY });
        }
    }
    Ok(idx.into_iter().take(count).map(|i| v_t.row(i).adjoint()).collect())
}

/// Rotates a numerically real complex vector onto the real axis.
fn realify(v: &DVector<C64>) -> DVector<f64> {
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
    let r = v.map(|z| (z * phase).re);
    let n = r.norm();
    if n > 0.0 {
        r / n
    } else {
        r
    }
}

/// Builds the block-diagonal equivalent of a diagonalizable real matrix.
pub fn block_diagonalize(k: &DMatrix<f64>) -> Result<BlockDiagonalization> {
    let m = k.nrows();
    if m == 0 || k.ncols() != m {
        return Err(HkdError::Shape(format!("expected a square matrix, got {}x{}", m, k.ncols())));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(HkdError::NonFinite("matrix has non-finite entries".into()));
    }
    let scale = k.norm().max(1.0);
    let tol = 1e-9 * scale;
    let eig = k.complex_eigenvalues();
    let kc = k.map(|v| C64::new(v, 0.0));

    // Group eigenvalues: upper-half-plane representatives of conjugate pairs,
    // then real ones; equal eigenvalues share one null space.
    let mut complex: Vec<C64> = Vec::new();
    let mut real: Vec<f64> = Vec::new();
    for &l in eig.iter() {
        if l.im.abs() <= tol {
            real.push(l.re);
        } else if l.im > 0.0 {
            complex.push(l);
        }
    }
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    if 2 * complex.len() + real.len() != m {
        return Err(HkdError::Conditioning { condition: f64::INFINITY });
    }

    let mut cols: Vec<DVector<C64>> = Vec::with_capacity(m);
    let mut pair_values: Vec<C64> = Vec::new();
    let mut i = 0;
    while i < complex.len() {
        let mut j = i + 1;
        while j < complex.len() && (complex[j] - complex[i]).norm() <= 1e-7 * scale {
            j += 1;
        }
        for v in null_vectors(&kc, complex[i], j - i, 1e-6 * scale)? {
            cols.push(v.clone());
            cols.push(v.map(|z| z.conj()));
            pair_values.push(complex[i]);
        }
        i = j;
    }
    let mut real_values: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < real.len() {
        let mut j = i + 1;
        while j < real.len() && (real[j] - real[i]).abs() <= 1e-7 * scale {
            j += 1;
        }
        let lambda = C64::new(real[i], 0.0);
        for v in null_vectors(&kc, lambda, j - i, 1e-6 * scale)? {
            // a real eigenvalue of a real matrix has a real eigenspace
            cols.push(realify(&v).map(|x| C64::new(x, 0.0)));
            real_values.push(real[i]);
        }
        i = j;
    }

    let p_c = DMatrix::from_columns(&cols);
    let sv = p_c.clone().svd(false, false).singular_values;
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(HkdError::Conditioning { condition });
    }
    let p_inv = p_c
        .clone()
        .try_inverse()
        .ok_or(HkdError::Conditioning { condition: f64::INFINITY })?;

    let r = pair_values.len();
    let mt = 2 * (r + real_values.len());
    let s2 = std::f64::consts::SQRT_2;
    let mut p = DMatrix::zeros(m, mt);
    let mut q = DMatrix::zeros(mt, m);
    let mut k_tilde = DMatrix::identity(mt, mt);
    let mut blocks = Vec::with_capacity(mt / 2);
    for (b, lambda) in pair_values.iter().enumerate() {
        let col = &cols[2 * b];
        let row = p_inv.row(2 * b);
        for a in 0..m {
            p[(a, 2 * b)] = s2 * col[a].re;
            p[(a, 2 * b + 1)] = s2 * col[a].im;
            q[(2 * b, a)] = s2 * row[a].re;
            q[(2 * b + 1, a)] = -s2 * row[a].im;
        }
        let (alpha, beta) = (lambda.re - 1.0, lambda.im);
        k_tilde[(2 * b, 2 * b)] += alpha;
        k_tilde[(2 * b, 2 * b + 1)] = beta;
        k_tilde[(2 * b + 1, 2 * b)] = -beta;
        k_tilde[(2 * b + 1, 2 * b + 1)] += alpha;
        blocks.push((alpha, beta));
    }
    for (idx, &lambda) in real_values.iter().enumerate() {
        let b = r + idx;
        let col = &cols[2 * r + idx];
        let row = p_inv.row(2 * r + idx);
        for a in 0..m {
            let pv = col[a].re / s2;
            let qv = row[a].re / s2;
            p[(a, 2 * b)] = pv;
            p[(a, 2 * b + 1)] = pv;
            q[(2 * b, a)] = qv;
            q[(2 * b + 1, a)] = qv;
        }
        k_tilde[(2 * b, 2 * b)] = lambda;
        k_tilde[(2 * b + 1, 2 * b + 1)] = lambda;
        blocks.push((lambda - 1.0, 0.0));
    }
    Ok(BlockDiagonalization { p, k_tilde, q, blocks, complex_pairs: r, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_input() {
        let k = DMatrix::<f64>::identity(4, 4);
        let bd = block_diagonalize(&k).unwrap();
        assert_eq!(bd.k_tilde, DMatrix::identity(8, 8));
        for t in [0.0, 0.5, 2.0] {
            let e = bd.exponential(t).unwrap();
            assert!((e - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_gives_single_block() {
        let th: f64 = 0.7;
        let k = DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        let bd = block_diagonalize(&k).unwrap();
        assert_eq!(bd.blocks.len(), 1);
        let (a, b) = bd.blocks[0];
        assert!((a - (th.cos() - 1.0)).abs() < 1e-12);
        assert!((b - th.sin()).abs() < 1e-12);
    }

    #[test]
    fn defective_matrix_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(block_diagonalize(&k), Err(HkdError::Conditioning { .. })));
    }
}
