//! Winding lattice of a support component.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::hnf::{hermite_normal_form, in_lattice};
use super::support::SupportMask;
use crate::error::{Error, Result};
use crate::fields::torus_distance;
use crate::sde::LiftedPath;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodLattice {
    pub d: usize,
    /// Distinct nonzero loop displacements found on the component.
    pub generators: Vec<Vec<i64>>,
    pub hnf_basis: Vec<Vec<i64>>,
    pub rank: usize,
    /// Orthonormal frame of the rational span, one vector per row.
    pub span_frame: Vec<Vec<f64>>,
    /// Set when the mask had several components and only one was used.
    pub disconnected_warning: bool,
    pub component: usize,
}

impl PeriodLattice {
    pub fn from_generators(d: usize, generators: Vec<Vec<i64>>) -> Self {
        let hnf_basis = hermite_normal_form(&generators, d);
        let rank = hnf_basis.len();
        let span_frame = image_span(&hnf_basis, d);
        PeriodLattice {
            d,
            generators,
            hnf_basis,
            rank,
            span_frame,
            disconnected_warning: false,
            component: 0,
        }
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        v.len() == self.d && in_lattice(&self.hnf_basis, v)
    }
}

/// Gram–Schmidt on the basis rows in order.
pub fn image_span(basis: &[Vec<i64>], d: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::new();
    for row in basis {
        let mut v: Vec<f64> = row.iter().map(|&x| x as f64).collect();
        // two passes keep the frame orthonormal to rounding
        for _ in 0..2 {
            for q in &frame {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-9 {
            frame.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    debug_assert_eq!(frame.len(), d.min(frame.len()));
    frame
}

/// Loop group of a mask component: BFS spanning tree with face adjacency,
/// where crossing the identification along `±e_k` shifts the lift by
/// `±e_k`; each non-tree edge contributes one generator. Uses the largest
/// component unless `component` is given; `base` picks the root cell
/// (default: the lowest cell of the component).
pub fn period_lattice(mask: &SupportMask, component: Option<usize>, base: Option<usize>) -> Result<PeriodLattice> {
    let grid = mask.grid;
    let d = grid.d;
    let comp = component.unwrap_or(mask.largest);
    if comp >= mask.components() {
        return Err(Error::invalid(format!("mask has no component {comp}")));
    }
    let root = match base {
        Some(b) => {
            if mask.labels.get(b).copied().flatten() != Some(comp) {
                return Err(Error::invalid("base cell is not in the selected component"));
            }
            b
        }
        None => (0..grid.len()).find(|&c| mask.labels[c] == Some(comp)).unwrap(),
    };
    let mut lift: Vec<Option<Vec<i64>>> = vec![None; grid.len()];
    lift[root] = Some(vec![0; d]);
    let mut queue = VecDeque::from([root]);
    let mut generators: Vec<Vec<i64>> = Vec::new();
    while let Some(v) = queue.pop_front() {
        let phi_v = lift[v].clone().unwrap();
        for axis in 0..d {
            for dir in [-1i64, 1] {
                let (u, w) = grid.neighbor(v, axis, dir);
                if mask.labels[u] != Some(comp) {
                    continue;
                }
                let mut target = phi_v.clone();
                target[axis] += w;
                match &lift[u] {
                    None => {
                        lift[u] = Some(target);
                        queue.push_back(u);
                    }
                    Some(phi_u) => {
                        let g: Vec<i64> = target.iter().zip(phi_u).map(|(a, b)| a - b).collect();
                        if g.iter().any(|&x| x != 0) {
                            let neg: Vec<i64> = g.iter().map(|x| -x).collect();
                            if !generators.contains(&g) && !generators.contains(&neg) {
                                generators.push(g);
                            }
                        }
                    }
                }
            }
        }
    }
    generators.sort();
    let mut out = PeriodLattice::from_generators(d, generators);
    out.disconnected_warning = mask.disconnected();
    out.component = comp;
    Ok(out)
}

/// Winding `g(γ) = k_end − k_start` of a path whose endpoints agree on the
/// torus within `tol`.
pub fn loop_displacement(path: &LiftedPath, tol: f64) -> Result<Vec<i64>> {
    let (a, b) = (path.first(), path.last());
    let dist = torus_distance(&a.y, &b.y);
    if dist > tol {
        return Err(Error::NotALoop { distance: dist });
    }
    Ok((0..path.d)
        .map(|i| (b.lift_at(i) - a.lift_at(i)).round() as i64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::sde::LiftedState;

    fn strip_mask(n: usize) -> SupportMask {
        // cells within one cell of the closed line x₂ = 2x₁ (mod 1)
        let g = Grid::new(n, 2);
        let mask = g
            .centers()
            .map(|x| {
                let r = (x[1] - 2.0 * x[0]).rem_euclid(1.0);
                r.min(1.0 - r) < 1.6 / n as f64
            })
            .collect();
        SupportMask::from_cells(g, mask).unwrap()
    }

    #[test]
    fn full_torus_gives_identity() {
        let g = Grid::new(6, 2);
        let m = SupportMask::from_cells(g, vec![true; 36]).unwrap();
        let l = period_lattice(&m, None, None).unwrap();
        assert_eq!(l.hnf_basis, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(l.rank, 2);
    }

    #[test]
    fn disk_is_contractible() {
        let g = Grid::new(16, 2);
        let mask = g
            .centers()
            .map(|x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.25)
            .collect();
        let m = SupportMask::from_cells(g, mask).unwrap();
        let l = period_lattice(&m, None, None).unwrap();
        assert_eq!(l.rank, 0);
        assert!(l.span_frame.is_empty());
    }

    #[test]
    fn diagonal_strip_has_one_generator() {
        let l = period_lattice(&strip_mask(32), None, None).unwrap();
        assert_eq!(l.hnf_basis, vec![vec![1, 2]]);
        let f = &l.span_frame[0];
        let s5 = 5f64.sqrt();
        assert!((f[0] - 1.0 / s5).abs() < 1e-12 && (f[1] - 2.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn base_cell_does_not_matter() {
        let m = strip_mask(32);
        let first = period_lattice(&m, None, None).unwrap();
        for c in (0..m.grid.len()).filter(|&c| m.mask[c]).step_by(7) {
            assert_eq!(period_lattice(&m, None, Some(c)).unwrap().hnf_basis, first.hnf_basis);
        }
    }

    #[test]
    fn loop_winding() {
        let mut end = LiftedState::from_lift(&[1.02, 1.99]);
        end.t = 1.0;
        let path = LiftedPath {
            d: 2,
            states: vec![LiftedState::from_lift(&[0.0, 0.0]), end],
        };
        assert_eq!(loop_displacement(&path, 0.05).unwrap(), vec![1, 2]);
        assert!(matches!(loop_displacement(&path, 0.01), Err(Error::NotALoop { .. })));
    }
}
