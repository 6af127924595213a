//! Numerical evidence for the controllability and contraction assumptions.

use serde::{Deserialize, Serialize};

use super::control::rk4_step;
use super::jacobian::{identity, JacobianStepper};
use super::{par_map, LiftedState, SimConfig, Stepper};
use crate::error::{Assumption, Error, Result};
use crate::fields::ProblemSpec;
use crate::grid::Grid;
use crate::linalg::spectral_norm;
use crate::rng::path_rng;
use crate::stats::mean_stderr;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub all_reachable: bool,
    /// Largest over start cells of the smallest discrete `‖u‖_{L²}` reaching `U`.
    pub k_estimate: f64,
    pub unreachable_cells: Vec<usize>,
    pub slices: usize,
    pub controls: usize,
}

/// Dynamic programming over (cell, time slice) with piecewise-constant
/// controls from `{0, ±u_max e_j, ±u_max/2 e_j}`. A start cell counts as
/// reachable when some control sequence brings the cell-snapped controlled
/// trajectory into `U` by time `t0`. `u_max = 0` restricts to the trivial
/// control.
pub fn reachability_check(
    spec: &ProblemSpec,
    u_mask: &[bool],
    t0: f64,
    u_max: f64,
    eps: f64,
    n: usize,
) -> Result<ReachabilityReport> {
    let d = spec.d();
    let m = spec.m();
    let grid = Grid::new(n, d);
    if u_mask.len() != grid.len() {
        return Err(Error::invalid("U mask does not match the grid"));
    }
    if !u_mask.iter().any(|&b| b) {
        return Err(Error::assumption(Assumption::H2, "H2 cannot hold: U empty"));
    }
    if !(t0 > 0.0) || !(u_max >= 0.0) {
        return Err(Error::invalid("t0 must be positive and u_max nonnegative"));
    }
    let mut controls = vec![vec![0.0; m]];
    if u_max > 0.0 {
        for j in 0..m {
            for s in [1.0, -1.0, 0.5, -0.5] {
                let mut u = vec![0.0; m];
                u[j] = s * u_max;
                controls.push(u);
            }
        }
    }
    let slices = ((t0 / 0.25).ceil() as usize).max(4);
    let dt = t0 / slices as f64;
    let sub = (dt / 0.01).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let trans: Vec<Vec<usize>> = par_map(grid.len(), |c| {
        Ok(controls
            .iter()
            .map(|u| {
                let mut s = LiftedState::from_lift(&grid.center(c));
                for _ in 0..sub {
                    rk4_step(spec, &mut s, u, eps, h);
                }
                grid.cell_of(&s.y)
            })
            .collect())
    })?;
    let cost: Vec<f64> = controls.iter().map(|u| u.iter().map(|v| v * v).sum::<f64>() * dt).collect();
    let mut value: Vec<f64> = u_mask.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    for _ in 0..slices {
        let next: Vec<f64> = (0..grid.len())
            .map(|c| {
                if u_mask[c] {
                    return 0.0;
                }
                trans[c]
                    .iter()
                    .zip(&cost)
                    .map(|(&dest, &k)| k + value[dest])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        value = next;
    }
    let unreachable_cells: Vec<usize> = (0..grid.len()).filter(|&c| value[c].is_infinite()).collect();
    let k_estimate = value
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, &v| a.max(v.sqrt()));
    Ok(ReachabilityReport {
        all_reachable: unreachable_cells.is_empty(),
        k_estimate,
        unreachable_cells,
        slices,
        controls: controls.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H4Report {
    /// `max_x E(|J_t^x|; τ_V^x ≥ t)` over the grid starts.
    pub estimate: f64,
    pub stderr: f64,
    pub argmax_cell: usize,
    pub holds: bool,
    pub per_start: Vec<(f64, f64)>,
    pub t: f64,
    pub n_paths: usize,
}

/// Monte Carlo estimate of `sup_x E(|J_t^x|; τ_V^x ≥ t)` over the centers of
/// `grid`, where `τ_V` is the first time the path sits in a cell of `v_mask`
/// and `|·|` is the spectral norm. Evidence holds iff estimate + 2·stderr < 1.
pub fn h4_estimate(spec: &ProblemSpec, grid: Grid, v_mask: &[bool], t: f64, cfg: &SimConfig) -> Result<H4Report> {
    if v_mask.len() != grid.len() || grid.d != spec.d() {
        return Err(Error::invalid("V mask does not match the grid"));
    }
    if !(t > 0.0) {
        return Err(Error::invalid("t must be positive"));
    }
    let run = SimConfig { t, ..cfg.clone() };
    run.check(spec)?;
    let d = spec.d();
    let n_paths = cfg.n_paths.max(1);
    let steps = run.steps();
    let samples: Vec<f64> = par_map(grid.len() * n_paths, |idx| {
        let cell = idx / n_paths;
        if v_mask[cell] {
            return Ok(0.0);
        }
        let mut rng = path_rng(cfg.seed, idx as u64);
        let mut st = JacobianStepper::new(Stepper::new(spec, cfg.eps, cfg.h, cfg.scheme));
        let mut s = LiftedState::from_lift(&grid.center(cell));
        let mut j = identity(d);
        for _ in 0..steps {
            st.step(&mut s, &mut j, cfg.eps, &mut rng)?;
            if v_mask[grid.cell_of(&s.y)] {
                return Ok(0.0);
            }
        }
        Ok(spectral_norm(&j, d))
    })?;
    let per_start: Vec<(f64, f64)> = samples.chunks(n_paths).map(mean_stderr).collect();
    let (argmax_cell, &(estimate, stderr)) = per_start
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("grid is nonempty");
    Ok(H4Report {
        estimate,
        stderr,
        argmax_cell,
        holds: estimate + 2.0 * stderr < 1.0,
        per_start,
        t,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_noise_reaches_everything_for_free() {
        let spec = ProblemSpec::brownian(2);
        let r = reachability_check(&spec, &vec![true; 64], 1.0, 1.0, 0.0, 8).unwrap();
        assert!(r.all_reachable);
        assert_eq!(r.k_estimate, 0.0);
    }

    #[test]
    fn empty_u_is_an_h2_failure() {
        let spec = ProblemSpec::constant(&[1.0, 0.0], 2, &[0.0; 4]).unwrap();
        let err = reachability_check(&spec, &vec![false; 64], 1.0, 1.0, 0.0, 8).unwrap_err();
        assert_eq!(err.assumption_label(), Some(Assumption::H2));
        assert!(err.to_string().contains("H2 cannot hold: U empty"));
    }

    #[test]
    fn h4_trivial_cases() {
        let grid = Grid::new(8, 2);
        let cfg = SimConfig::new(0.01, 1.0, 0.0, 1, 50);
        let all = h4_estimate(&ProblemSpec::brownian(2), grid, &vec![true; 64], 1.0, &cfg).unwrap();
        assert_eq!(all.estimate, 0.0);
        assert!(all.holds);
        let drift = ProblemSpec::constant(&[1.0, 0.0], 2, &[0.0; 4]).unwrap();
        let none = h4_estimate(&drift, grid, &vec![false; 64], 1.0, &cfg).unwrap();
        assert!((none.estimate - 1.0).abs() < 1e-12);
        assert!(!none.holds);
    }
}
