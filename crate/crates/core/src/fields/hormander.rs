//! Grid masks of the strong and parabolic Hörmander conditions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Expr, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Deepest bracket level computed from the analytic fields.
pub const MAX_BRACKET_DEPTH: usize = 3;

/// Smallest singular value above which the bracket vectors count as spanning.
pub const SPAN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderMasks {
    pub grid: Grid,
    /// Bracket depth actually used.
    pub depth: usize,
    /// Cells where the brackets of `{σ_j}` span `R^d`.
    pub u: Vec<bool>,
    /// Cells where the brackets of `{b, σ_j}` containing some `σ_j` span.
    pub v: Vec<bool>,
    pub u_min_sv: Vec<f64>,
    pub v_min_sv: Vec<f64>,
    /// Set when a depth beyond [`MAX_BRACKET_DEPTH`] was requested and some
    /// cell fails at the computed depth, so its status is unknown.
    pub undetermined: bool,
}

impl HormanderMasks {
    pub fn u_count(&self) -> usize {
        self.u.iter().filter(|&&x| x).count()
    }

    pub fn v_count(&self) -> usize {
        self.v.iter().filter(|&&x| x).count()
    }
}

type VectorField = Vec<Expr>;

/// `[X, Y]_i = X_k ∂_k Y_i − Y_k ∂_k X_i`.
pub fn lie_bracket(x: &[Expr], y: &[Expr]) -> VectorField {
    let d = x.len();
    (0..d)
        .map(|i| {
            let mut terms = Vec::new();
            for k in 0..d {
                if !x[k].is_zero() {
                    terms.push(Expr::product(vec![x[k].clone(), Expr::partial(&y[i], k)]));
                }
                if !y[k].is_zero() {
                    terms.push(Expr::scale(
                        -1.0,
                        Expr::product(vec![y[k].clone(), Expr::partial(&x[i], k)]),
                    ));
                }
            }
            Expr::sum(terms)
        })
        .collect()
}

fn is_zero_field(v: &[Expr]) -> bool {
    v.iter().all(Expr::is_zero)
}

/// Right-nested brackets `[g₁, [g₂, … [g_{l−1}, s]]]` for `l ≤ depth`, with
/// `s` from `seeds` and `g_i` from `extra ∪ seeds`.
fn bracket_levels(seeds: &[VectorField], extra: &[VectorField], depth: usize) -> Vec<Vec<VectorField>> {
    let mut levels: Vec<Vec<VectorField>> = vec![seeds.iter().filter(|v| !is_zero_field(v)).cloned().collect()];
    let gens: Vec<&VectorField> = extra.iter().chain(seeds).filter(|v| !is_zero_field(v)).collect();
    for _ in 1..depth {
        let prev = levels.last().unwrap();
        let mut next = Vec::new();
        for g in &gens {
            for w in prev {
                let br = lie_bracket(g, w);
                if !is_zero_field(&br) {
                    next.push(br);
                }
            }
        }
        levels.push(next);
    }
    levels
}

fn min_singular_value(rows: &[Vec<f64>], d: usize) -> f64 {
    if rows.len() < d {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Evaluates both Hörmander conditions at the cell centers of an `n^d` grid.
pub fn hormander_masks(spec: &ProblemSpec, n: usize, depth: usize) -> Result<HormanderMasks> {
    if n < 8 {
        return Err(Error::invalid("hormander_masks needs n >= 8"));
    }
    if depth < 1 {
        return Err(Error::invalid("bracket depth must be at least 1"));
    }
    let (d, m) = (spec.d(), spec.m());
    let used = depth.min(MAX_BRACKET_DEPTH);
    let sigmas: Vec<VectorField> = (0..m)
        .map(|j| (0..d).map(|i| spec.sigma_entry(i, j).clone()).collect())
        .collect();
    let drift: Vec<VectorField> = vec![spec.b().to_vec()];
    let u_fields: Vec<VectorField> = bracket_levels(&sigmas, &[], used).into_iter().flatten().collect();
    let v_fields: Vec<VectorField> = bracket_levels(&sigmas, &drift, used).into_iter().flatten().collect();
    let grid = Grid::new(n, d);
    let masks = spec.bumps();
    let eval = |fields: &[VectorField], x: &[f64]| -> Vec<Vec<f64>> {
        fields
            .iter()
            .map(|f| f.iter().map(|e| e.value(x, masks)).collect())
            .collect()
    };
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    let mut u_min_sv = Vec::with_capacity(grid.len());
    let mut v_min_sv = Vec::with_capacity(grid.len());
    for x in grid.centers() {
        let su = min_singular_value(&eval(&u_fields, &x), d);
        let sv = min_singular_value(&eval(&v_fields, &x), d);
        u.push(su > SPAN_TOL);
        v.push(sv > SPAN_TOL);
        u_min_sv.push(su);
        v_min_sv.push(sv);
    }
    let undetermined = depth > MAX_BRACKET_DEPTH && (u.iter().any(|&b| !b) || v.iter().any(|&b| !b));
    Ok(HormanderMasks {
        grid,
        depth: used,
        u,
        v,
        u_min_sv,
        v_min_sv,
        undetermined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_example, ExampleName, ExampleParams, TrigTerm};

    #[test]
    fn identity_noise_spans_everywhere() {
        let masks = hormander_masks(&ProblemSpec::brownian(2), 8, 2).unwrap();
        assert!(masks.u.iter().all(|&b| b) && masks.v.iter().all(|&b| b));
    }

    #[test]
    fn scalar_noise_mask_is_positive_set() {
        let spec = build_example(ExampleName::Paper1, &ExampleParams::default()).unwrap();
        let masks = hormander_masks(&spec, 16, 1).unwrap();
        let alpha = spec.alpha_expr();
        for (i, x) in masks.grid.centers().enumerate() {
            assert_eq!(masks.u[i], alpha.value(&x, spec.bumps()) > SPAN_TOL, "cell {i}");
        }
    }

    #[test]
    fn bracket_with_constant_drift() {
        // [e₁, (1, sin 2πx₁)] = (0, 2π cos 2πx₁)
        let sigma = vec![Expr::constant(1.0), Expr::trig(vec![TrigTerm::sin(&[1, 0], 1.0)])];
        let spec = ProblemSpec::new(
            2,
            1,
            vec![Expr::constant(1.0), Expr::zero()],
            vec![Expr::zero(); 2],
            sigma,
            vec![],
        )
        .unwrap();
        let masks = hormander_masks(&spec, 10, 2).unwrap();
        assert_eq!(masks.u_count(), 0);
        for (i, x) in masks.grid.centers().enumerate() {
            let degenerate = (x[0] - 0.25).abs() < 1e-9 || (x[0] - 0.75).abs() < 1e-9;
            assert_eq!(masks.v[i], !degenerate, "cell {i} at {x:?}");
        }
    }

    #[test]
    fn deeper_requests_flag_undetermined() {
        let spec = ProblemSpec::constant(&[1.0, 0.0], 2, &[0.0; 4]).unwrap();
        let masks = hormander_masks(&spec, 8, 5).unwrap();
        assert_eq!(masks.depth, MAX_BRACKET_DEPTH);
        assert!(masks.undetermined);
    }
}
