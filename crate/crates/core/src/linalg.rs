//! Dense LU solves with a 1-norm condition number.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems whose condition number exceeds this are reported singular.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Clone, Debug)]
pub struct DenseSolve {
    pub solution: DVector<f64>,
    /// `||A||_1 ||A^-1||_1`.
    pub condition: f64,
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factors `a` once (partial pivoting), solves for every right-hand side
/// column, and measures the condition number from the explicit inverse.
pub fn solve_dense_multi(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if a.nrows() != a.ncols() || rhs.nrows() != a.nrows() {
        return Err(Error::LengthMismatch {
            expected: a.nrows(),
            got: rhs.nrows(),
        });
    }
    let lu = a.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::SingularSystem(f64::INFINITY))?;
    let condition = norm1(a) * norm1(&inverse);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularSystem(condition));
    }
    let x = lu.solve(rhs).ok_or(Error::SingularSystem(condition))?;
    Ok((x, condition))
}

pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DenseSolve> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let (x, condition) = solve_dense_multi(a, &rhs)?;
    Ok(DenseSolve {
        solution: x.column(0).into_owned(),
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_condition() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let s = solve_dense(&a, &DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(s.condition, 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.solution[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            solve_dense(&a, &DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::SingularSystem(_))
        ));
    }
}
