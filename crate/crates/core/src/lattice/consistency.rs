//! Agreement between a Monte Carlo `A` and the loop lattice.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::period::PeriodLattice;
use crate::ergodic::EffectiveCoefficients;
use crate::linalg::sym_eigen;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub holds: bool,
    /// Eigenvalues of `A` restricted to the span of the lattice.
    pub span_eigenvalues: Vec<f64>,
    /// Eigenvalues of `A` restricted to the orthogonal complement.
    pub complement_eigenvalues: Vec<f64>,
    /// `eig_tol + 2·stderr`.
    pub threshold: f64,
    /// Number of eigenvalues of `A` above the threshold.
    pub numerical_rank: usize,
    /// Largest principal angle in degrees between the numerical range of `A`
    /// and the lattice span (90 when the dimensions differ, 0 when both are
    /// trivial).
    pub angle_deg: f64,
}

/// Orthonormal completion of `frame` in `R^d`.
fn complement(frame: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = frame.to_vec();
    let mut out = Vec::new();
    for k in 0..d {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            let v: Vec<f64> = v.into_iter().map(|a| a / norm).collect();
            basis.push(v.clone());
            out.push(v);
        }
    }
    out
}

fn restricted_eigenvalues(a: &DMatrix<f64>, frame: &[Vec<f64>]) -> Vec<f64> {
    if frame.is_empty() {
        return Vec::new();
    }
    let d = a.nrows();
    let q = DMatrix::from_fn(d, frame.len(), |i, j| frame[j][i]);
    let r = q.transpose() * a * &q;
    sym_eigen(&r).0
}

/// Largest principal angle between two orthonormal frames given as columns.
pub fn principal_angle_deg(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    if p.ncols() != q.ncols() {
        return 90.0;
    }
    if p.ncols() == 0 {
        return 0.0;
    }
    let s = (p.transpose() * q).singular_values();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    smin.acos().to_degrees()
}

/// Holds iff every eigenvalue of `A` on `span(G)` exceeds
/// `eig_tol + 2·stderr` and every eigenvalue on the complement is below it,
/// with `stderr` the largest entry standard error of `A`.
pub fn consistency_check(a_est: &EffectiveCoefficients, lattice: &PeriodLattice, eig_tol: f64) -> ConsistencyReport {
    let d = a_est.d;
    let a = a_est.a_matrix();
    let se = a_est.a_stderr.iter().cloned().fold(0.0, f64::max);
    let threshold = eig_tol + 2.0 * se;
    let span_eigenvalues = restricted_eigenvalues(&a, &lattice.span_frame);
    let comp = complement(&lattice.span_frame, d);
    let complement_eigenvalues = restricted_eigenvalues(&a, &comp);
    let holds = span_eigenvalues.iter().all(|&e| e > threshold) && complement_eigenvalues.iter().all(|&e| e < threshold);
    let (vals, vecs) = sym_eigen(&a);
    let above: Vec<usize> = (0..d).filter(|&i| vals[i] > threshold).collect();
    let range = DMatrix::from_fn(d, above.len(), |i, j| vecs[(i, above[j])]);
    let span = DMatrix::from_fn(d, lattice.span_frame.len(), |i, j| lattice.span_frame[j][i]);
    ConsistencyReport {
        holds,
        span_eigenvalues,
        complement_eigenvalues,
        threshold,
        numerical_rank: above.len(),
        angle_deg: principal_angle_deg(&range, &span),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::Provenance;

    fn coefficients(a: Vec<f64>, se: f64) -> EffectiveCoefficients {
        let d = (a.len() as f64).sqrt() as usize;
        EffectiveCoefficients {
            d,
            a_stderr: vec![se; a.len()],
            a,
            c: vec![0.0; d],
            c_stderr: vec![0.0; d],
            d0: None,
            d0_stderr: None,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn identity_matches_full_lattice() {
        let l = PeriodLattice::from_generators(2, vec![vec![1, 0], vec![0, 1]]);
        let r = consistency_check(&coefficients(vec![1.0, 0.0, 0.0, 1.0], 0.01), &l, 0.02);
        assert!(r.holds);
        assert_eq!(r.numerical_rank, 2);
        assert!(r.angle_deg < 1e-6);
    }

    #[test]
    fn rank_one_direction() {
        // A = v vᵀ with v = (1, 2)/√5
        let l = PeriodLattice::from_generators(2, vec![vec![1, 2]]);
        let a = vec![0.2, 0.4, 0.4, 0.8];
        let r = consistency_check(&coefficients(a, 0.001), &l, 0.02);
        assert!(r.holds);
        assert!(r.angle_deg < 1e-6);
        let wrong = PeriodLattice::from_generators(2, vec![vec![1, 0]]);
        assert!(!consistency_check(&coefficients(vec![0.2, 0.4, 0.4, 0.8], 0.001), &wrong, 0.02).holds);
    }

    #[test]
    fn zero_matrix_and_trivial_lattice() {
        let l = PeriodLattice::from_generators(2, vec![]);
        let r = consistency_check(&coefficients(vec![0.001, 0.0, 0.0, 0.0], 0.001), &l, 0.02);
        assert!(r.holds);
        assert_eq!(r.angle_deg, 0.0);
    }
}
