//! Row/column stacking and the Kronecker product.

use nalgebra::{DMatrix, DVector, RowDVector};

/// Row-stack vector `(b₁, …, b_m)` of a matrix with rows `bᵢ`.
pub fn rvect(b: &DMatrix<f64>) -> RowDVector<f64> {
    // Column-major storage of Bᵀ is the row-major order of B.
    RowDVector::from_row_slice(b.transpose().as_slice())
}

/// Column-stack vector of a matrix.
pub fn cvect(b: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(b.as_slice())
}

/// Inverse of [`rvect`]: reshapes a length `rows·cols` slice, read row by row.
pub fn from_rvect(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols, "from_rvect: length mismatch");
    DMatrix::from_row_slice(rows, cols, v)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stacking_order() {
        let b = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(rvect(&b).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cvect(&b), dvector![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(from_rvect(rvect(&b).as_slice(), 2, 2), b);

        let col = dmatrix![5.0; 6.0; 7.0];
        assert_eq!(rvect(&col), col.transpose());
    }

    #[test]
    fn kron_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::identity(4, 4));
        let b = dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0];
        assert_eq!(kron(&dmatrix![1.0], &b), b);
        // Block layout: (A ⊗ B)[i·p + k, j·q + l] = a_ij b_kl.
        let a = dmatrix![1.0, -2.0; 0.5, 3.0];
        let k = kron(&a, &b);
        for (i, j, k_, l) in [(0, 1, 1, 2), (1, 0, 0, 1), (1, 1, 1, 0)] {
            assert_eq!(k[(i * 2 + k_, j * 3 + l)], a[(i, j)] * b[(k_, l)]);
        }
    }

    #[test]
    fn quadratic_form_through_rvect() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = rng.random_range(1..=3);
            let n = rng.random_range(1..=3);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let g = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let w = &g * g.transpose();

            let ax = &a * &x;
            let lhs = (ax.transpose() * &w * &ax)[(0, 0)];
            let r = rvect(&a);
            let rhs = (&r * kron(&w, &(&x * x.transpose())) * r.transpose())[(0, 0)];
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

            let lhs = (ax.transpose() * &w * &y)[(0, 0)];
            let rhs =
                (&r * kron(&w, &DMatrix::identity(n, n)) * cvect(&(&x * y.transpose())))[(0, 0)];
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
