//! Small numerical helpers shared across modules: rank with an explicit
//! cutoff, span bases, distances to subspaces, and kernel vector
//! extraction. Rank decisions go through column-pivoted QR: it is
//! rank-revealing for the matrices handled here and, unlike the iterative
//! SVD, has no convergence failure modes.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;

/// Pivot cutoff for rank decisions:
/// `scale * max(rows, cols) * eps * rank_scale`, with `scale` the leading
/// (largest) pivot magnitude.
pub fn rank_threshold(scale: f64, rows: usize, cols: usize, tol: &Tolerances) -> f64 {
    scale * rows.max(cols) as f64 * f64::EPSILON * tol.rank_scale
}

fn qr_diagonal(r: &DMatrix<f64>) -> Vec<f64> {
    (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)]).collect()
}

fn qr_rank(r: &DMatrix<f64>, rows: usize, cols: usize, tol: &Tolerances) -> usize {
    let diag = qr_diagonal(r);
    let scale = diag[0].abs();
    if scale == 0.0 {
        return 0;
    }
    let thresh = rank_threshold(scale, rows, cols, tol);
    // Column pivoting orders the diagonal by decreasing magnitude, so the
    // rank is the length of the leading run of large pivots.
    diag.iter().take_while(|d| d.abs() > thresh).count()
}

/// Numerical rank of a matrix. The rank of an empty matrix is zero.
pub fn numerical_rank(a: &DMatrix<f64>, tol: &Tolerances) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let qr = a.clone().col_piv_qr();
    qr_rank(&qr.r(), a.nrows(), a.ncols(), tol)
}

/// Orthonormal basis of the column span: the leading `rank` columns of
/// the pivoted QR factor.
pub fn span_basis(a: &DMatrix<f64>, tol: &Tolerances) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let qr = a.clone().col_piv_qr();
    let rank = qr_rank(&qr.r(), a.nrows(), a.ncols(), tol);
    qr.q().columns(0, rank).into_owned()
}

/// Distance from `v` to the span of the orthonormal columns of `q`.
pub fn dist_to_span(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let proj = q * (q.transpose() * v);
    (v - proj).norm()
}

/// Numerical kernel direction of `a`: a unit vector `v` approximately
/// minimizing `||A v||`, together with that residual. Computed from the
/// pivoted QR factor `A P = Q R` by solving `R y = 0` with the last
/// (smallest-pivot) coordinate fixed to one.
pub fn smallest_right_singular_vector(a: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let k = a.ncols();
    assert!(k > 0, "kernel direction of an empty matrix");
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    // Pivots below this scale belong to the numerical kernel; treating
    // them as free (zero) keeps the back-substitution stable when the
    // kernel has dimension greater than one.
    let negligible = r[(0, 0)].abs() * f64::EPSILON * k as f64;

    let mut y = DVector::zeros(k);
    let last = k.min(r.nrows()) - 1;
    y[last] = 1.0;
    // Back-substitute R[0..last, 0..last] y_head = -R[0..last, last].
    for i in (0..last).rev() {
        let pivot = r[(i, i)];
        if pivot.abs() <= negligible {
            y[i] = 0.0;
            continue;
        }
        let mut rhs = -r[(i, last)];
        for j in (i + 1)..last {
            rhs -= r[(i, j)] * y[j];
        }
        y[i] = rhs / pivot;
    }
    // Map back through the column permutation: A (P y) = Q R y.
    qr.p().inv_permute_rows(&mut y);
    let v = &y / y.norm();
    let residual = (a * &v).norm();
    (v, residual)
}

/// Columns of `a` selected by `cols`, in the given order.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), cols.len());
    for (k, &j) in cols.iter().enumerate() {
        out.set_column(k, &a.column(j));
    }
    out
}

/// Gram determinant `det(B^T B)` of the selected columns.
pub fn gram_determinant(a: &DMatrix<f64>, cols: &[usize]) -> f64 {
    let b = select_columns(a, cols);
    let gram = b.transpose() * &b;
    gram.determinant()
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_rank_deficient() {
        let tol = Tolerances::default();
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(numerical_rank(&id, &tol), 3);

        let mut a = DMatrix::zeros(3, 2);
        a.set_column(0, &DVector::from_vec(vec![1.0, 0.0, 0.0]));
        a.set_column(1, &DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(numerical_rank(&a, &tol), 1);
        assert_eq!(numerical_rank(&DMatrix::<f64>::zeros(3, 0), &tol), 0);
    }

    #[test]
    fn kernel_vector_of_singular_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let (v, residual) = smallest_right_singular_vector(&a);
        assert!(residual < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(40, 6), 3_838_380);
        assert_eq!(binomial(3, 5), 0);
    }
}
