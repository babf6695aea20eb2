//! Small dense linear-algebra helpers shared by the models, the controller and
//! the diagnostics.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric part `(A + Aᵀ) / 2`.
pub fn sym(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `A − Aᵀ`.
pub fn asymmetry(a: &Matrix) -> f64 {
    (a - a.transpose()).amax()
}

pub fn is_symmetric(a: &Matrix, tol: f64) -> bool {
    a.is_square() && asymmetry(a) <= tol * a.amax().max(1.0)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &Matrix) -> f64 {
    sym(a).symmetric_eigenvalues().min()
}

/// Positive definiteness in the sense `zᵀAz > 0` for every nonzero `z`.
pub fn is_positive_definite(a: &Matrix) -> bool {
    a.is_square() && a.nrows() > 0 && a.iter().all(|v| v.is_finite()) && min_eigenvalue(a) > 0.0
}

pub fn is_spd(a: &Matrix, tol: f64) -> bool {
    is_symmetric(a, tol) && is_positive_definite(a)
}

/// Projects the symmetric part of `a` onto matrices whose eigenvalues are all
/// at most `-floor`.
pub fn clamp_negative(a: &Matrix, floor: f64) -> Matrix {
    let eig = sym(a).symmetric_eigen();
    let clamped = eig.eigenvalues.map(|l| l.min(-floor));
    &eig.eigenvectors * Matrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

pub fn singular_values(a: &Matrix) -> Vector {
    a.clone().svd(false, false).singular_values
}

pub fn min_singular_value(a: &Matrix) -> f64 {
    singular_values(a).min()
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(a: &Matrix) -> f64 {
    let s = singular_values(a);
    let (lo, hi) = (s.min(), s.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves `A X = B` column-wise.
pub fn solve_matrix(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clamp_negative_keeps_already_negative_spectrum() {
        let a = Matrix::from_row_slice(2, 2, &[-5.0, 1.0, 1.0, -7.0]);
        let c = clamp_negative(&a, 3.0);
        assert_relative_eq!(c, a, epsilon = 1e-12);
    }

    #[test]
    fn clamp_negative_lifts_small_eigenvalues() {
        let a = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -10.0]);
        let c = clamp_negative(&a, 3.0);
        assert_relative_eq!(c[(0, 0)], -3.0, epsilon = 1e-12);
        assert_relative_eq!(c[(1, 1)], -10.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_definiteness_uses_symmetric_part() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 5.0, -5.0, 1.0]);
        assert!(is_positive_definite(&a));
        assert!(!is_spd(&a, 1e-12));
        assert!(!is_positive_definite(&Matrix::zeros(2, 2)));
    }

    #[test]
    fn singular_solve_is_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(&a, &Vector::from_vec(vec![1.0, 1.0])).is_none());
        assert!(condition_number(&a) > 1e15);
    }
}
