//! Dense symmetric eigensolver with a reproducible ordering and sign convention.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues closer than this are treated as one degenerate block when ordering.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen(m: DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut columns: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            fix_sign(&mut v);
            v
        })
        .collect();
    order_degenerate_blocks(&values, &mut columns);
    SortedEigen {
        values,
        vectors: DMatrix::from_columns(&columns),
    }
}

/// Unit 2-norm with the largest-magnitude entry positive (first such entry on ties).
pub fn fix_sign(v: &mut DVector<f64>) {
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v.len() > 0 && v[pivot] < 0.0 {
        v.neg_mut();
    }
}

/// Within runs of nearly equal eigenvalues, order vectors lexicographically, largest first.
pub fn order_degenerate_blocks(values: &[f64], columns: &mut [DVector<f64>]) {
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && (values[end - 1] - values[end]).abs() < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            columns[start..end].sort_by(|a, b| lexicographic_desc(a, b));
        }
        start = end;
    }
}

fn lexicographic_desc(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Double centering `H M H` with `H = I - 11^T / n`.
pub fn double_center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sorted_descending_with_residuals() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let e = symmetric_eigen(m.clone());
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for l in 0..3 {
            let v = e.vectors.column(l);
            let r = &m * v - v * e.values[l];
            assert!(r.amax() < 1e-12);
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-14);
            let pivot = v.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn degenerate_block_is_reproducible() {
        let m = DMatrix::<f64>::identity(4, 4) * 2.0;
        let a = symmetric_eigen(m.clone());
        let b = symmetric_eigen(m);
        assert_eq!(a.vectors, b.vectors);
        for w in a.vectors.column_iter().collect::<Vec<_>>().windows(2) {
            let ord = lexicographic_desc(&w[0].into_owned(), &w[1].into_owned());
            assert_ne!(ord, Ordering::Greater);
        }
    }

    #[test]
    fn double_centering_zeroes_margins() {
        let m = DMatrix::from_fn(4, 4, |i, j| ((i * 3 + j * 5) % 7) as f64);
        let c = double_center(&m);
        for i in 0..4 {
            assert_abs_diff_eq!(c.row(i).sum(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.column(i).sum(), 0.0, epsilon = 1e-12);
        }
    }
}
