//! Small dense linear algebra helpers.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues (ascending) and matching unit eigenvectors (columns) of a
/// symmetric matrix.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Symmetric square root; negative eigenvalues are clipped to zero and the
/// most negative one is returned alongside.
pub fn sym_sqrt(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (values, vectors) = sym_eigen(a);
    let most_negative = values.iter().copied().fold(0.0f64, f64::min);
    let n = a.nrows();
    let mut root = DMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        let v = vectors.column(k);
        root += v * v.transpose() * s;
    }
    (root, most_negative)
}

/// Spectral norm of a row-major `d × d` matrix.
pub fn spectral_norm(j: &[f64], d: usize) -> f64 {
    match d {
        1 => j[0].abs(),
        2 => {
            // largest singular value of [[a, b], [c, e]] in closed form
            let (a, b, c, e) = (j[0], j[1], j[2], j[3]);
            let s1 = a * a + b * b + c * c + e * e;
            let det = a * e - b * c;
            let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
            (0.5 * (s1 + disc)).sqrt()
        }
        _ => {
            let m = DMatrix::from_row_slice(d, d, j);
            m.singular_values().max()
        }
    }
}

pub fn determinant(j: &[f64], d: usize) -> f64 {
    match d {
        1 => j[0],
        2 => j[0] * j[3] - j[1] * j[2],
        _ => DMatrix::from_row_slice(d, d, j).determinant(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (r, neg) = sym_sqrt(&a);
        assert_eq!(neg, 0.0);
        assert!((&r * &r - &a).norm() < 1e-12);
    }

    #[test]
    fn clipped_root_reports_negative_part() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        let (r, neg) = sym_sqrt(&a);
        assert_eq!(neg, -1e-3);
        assert!(r[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn closed_form_norm_matches_svd() {
        let j = [0.3, -1.2, 2.5, 0.7];
        let svd = DMatrix::from_row_slice(2, 2, &j).singular_values().max();
        assert!((spectral_norm(&j, 2) - svd).abs() < 1e-12);
        let j3 = [1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 3.0];
        assert!(spectral_norm(&j3, 3) > 3.0);
    }
}
