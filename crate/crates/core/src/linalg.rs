use nalgebra::{DMatrix, SymmetricEigen};

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending order.
/// Column `k` of the returned matrix is the eigenvector for eigenvalue `k`.
pub(crate) fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Largest absolute entry of `a - b`.
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest absolute entry of `q^T q - I`.
pub(crate) fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    max_abs_diff(&gram, &DMatrix::identity(q.ncols(), q.ncols()))
}
