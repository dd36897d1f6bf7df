//! Dense symmetric helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition with eigenvalues ascending and eigenvectors reordered
/// to match (column `i` belongs to value `i`).
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Orthonormal basis of the complement of `v`, as the columns of an
/// `n × (n − 1)` matrix.
///
/// Gram–Schmidt (applied twice) over the coordinate axes in order, starting
/// from `v / |v|`; axes that become numerically dependent are skipped.
pub fn orthogonal_complement(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_column_slice(v).normalize()];
    for axis in 0..n {
        if basis.len() == n {
            break;
        }
        let mut w = DVector::zeros(n);
        w[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&w);
                w -= b * proj;
            }
        }
        let norm = w.norm();
        if norm > 1e-8 {
            basis.push(w / norm);
        }
    }
    DMatrix::from_columns(&basis[1..])
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_path_laplacian() {
        // Path graph on three vertices: eigenvalues 0, 1, 3.
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        for (v, w) in vals.iter().zip([0.0, 1.0, 3.0]) {
            assert!((v - w).abs() < 1e-12);
        }
        for (i, val) in vals.iter().enumerate() {
            let col = vecs.column(i);
            assert!((&m * col - col * *val).norm() < 1e-12);
        }
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = [1.0, 2.0, 0.5, 3.0];
        let q = orthogonal_complement(&v);
        assert_eq!(q.shape(), (4, 3));
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-12);
        let vt = DVector::from_column_slice(&v);
        assert!((q.transpose() * vt).norm() < 1e-12);
    }
}
