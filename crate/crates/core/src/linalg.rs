//! Dense helpers shared by the numerical modules.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Ties keep their original relative order.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let order = descending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Real symmetric counterpart of [`hermitian_eigen`].
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let order = descending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Solver for `S X = B` where `S` is Hermitian positive semidefinite.
///
/// Positive definite systems go through Cholesky. When Cholesky fails, the
/// system is solved on the numerical range of `S` (eigenvalues above
/// `rcond * lambda_max`), which is exact whenever the right-hand side lies
/// in that range, as it does for every conditional-mean computation here.
pub struct PsdSolver {
    kind: SolverKind,
}

enum SolverKind {
    Cholesky(Cholesky<C64, nalgebra::Dyn>),
    Range { values: Vec<f64>, vectors: DMatrix<C64> },
}

pub const RANGE_RCOND: f64 = 1e-13;

impl PsdSolver {
    pub fn new(s: &DMatrix<C64>) -> Self {
        if let Some(chol) = Cholesky::new(s.clone()) {
            // Cholesky can succeed on a numerically singular matrix; require a
            // sane pivot ratio before trusting it.
            let diag = chol.l_dirty().diagonal();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for d in diag.iter() {
                lo = lo.min(d.re);
                hi = hi.max(d.re);
            }
            if hi > 0.0 && lo * lo > 1e-10 * hi * hi {
                return Self { kind: SolverKind::Cholesky(chol) };
            }
        }
        let (values, vectors) = hermitian_eigen(s);
        Self { kind: SolverKind::Range { values, vectors } }
    }

    pub fn solve(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        match &self.kind {
            SolverKind::Cholesky(chol) => chol.solve(b),
            SolverKind::Range { values, vectors } => {
                let top = values.first().copied().unwrap_or(0.0).max(0.0);
                let cut = RANGE_RCOND * top;
                let mut coeffs = vectors.adjoint() * b;
                for (i, &l) in values.iter().enumerate() {
                    let scale = if l > cut && l > 0.0 { 1.0 / l } else { 0.0 };
                    coeffs.row_mut(i).scale_mut(scale);
                }
                vectors * coeffs
            }
        }
    }

    pub fn solve_vec(&self, b: &DVector<C64>) -> DVector<C64> {
        let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        DVector::from_column_slice(self.solve(&m).as_slice())
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Ratio of smallest to largest singular value (0 for rank-deficient).
pub fn inverse_condition(a: &DMatrix<C64>) -> f64 {
    let sv = a.singular_values();
    let hi = sv.iter().copied().fold(0.0, f64::max);
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

pub fn hermitian_part(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()).scale(0.5)
}

pub fn trace_re(a: &DMatrix<C64>) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub(crate) fn check_square(a: &DMatrix<C64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (v, _) = symmetric_eigen(&a);
        assert_eq!(v, vec![5.0, 2.0, 1.0]);
    }

    #[test]
    fn range_solve_on_singular_system() {
        // rank-1 S = u u^H, b in range(S)
        let u = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let s = &u * u.adjoint();
        let b = u.scale(3.0);
        let x = PsdSolver::new(&s).solve_vec(&b);
        let back = &s * &x;
        assert!((back - b).norm() < 1e-12);
    }
}
