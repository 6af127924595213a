//! Grid solutions of the cell problem `L b̂ + b = 0` and their interpolation.

use serde::{Deserialize, Serialize};

use super::occupation::{centering_of, OccupationEnsemble};
use crate::error::{Assumption, Error, Result};
use crate::fields::{Expr, ProblemSpec};
use crate::grid::Grid;
use crate::rng::path_rng;
use crate::sde::{identity, par_map, JacobianStepper, LiftedState, SimConfig, Stepper};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorKind {
    /// `b̂`, one component per coordinate.
    Vector,
    /// `ê`, a single component.
    Scalar,
}

/// Values and gradients of a corrector on cell centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorField {
    pub grid: Grid,
    pub kind: CorrectorKind,
    /// Number of components `r` (`d` for vectors, `1` for scalars).
    pub components: usize,
    /// `values[cell * r + l]`.
    pub values: Vec<f64>,
    /// `gradients[(cell * r + l) * d + k] = ∂_k corrector_l`.
    pub gradients: Vec<f64>,
    pub value_stderr: Vec<f64>,
    pub gradient_stderr: Vec<f64>,
    /// Fraction of cells where pathwise and finite-difference gradients agree
    /// within three combined standard errors.
    pub agreement: f64,
    /// Set when the agreement fraction is below 95%.
    pub gradient_flag: bool,
    pub t_corr: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Leave-one-group-out gradient grids (paths dealt into groups by
    /// index modulo [`JACKKNIFE_GROUPS`]); empty for exact fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jackknife: Vec<Vec<f64>>,
}

/// Number of path groups kept for jackknife error propagation.
pub const JACKKNIFE_GROUPS: usize = 8;

impl CorrectorField {
    /// Field built from exact values and gradients (no Monte Carlo error).
    pub fn exact(grid: Grid, kind: CorrectorKind, values: Vec<f64>, gradients: Vec<f64>) -> Self {
        let r = values.len() / grid.len();
        CorrectorField {
            grid,
            kind,
            components: r,
            value_stderr: vec![0.0; values.len()],
            gradient_stderr: vec![0.0; gradients.len()],
            values,
            gradients,
            agreement: 1.0,
            gradient_flag: false,
            t_corr: f64::INFINITY,
            n_paths: 0,
            seed: 0,
            jackknife: Vec::new(),
        }
    }

    /// Zero corrector on an `n^d` grid.
    pub fn zero(n: usize, d: usize, kind: CorrectorKind) -> Self {
        let grid = Grid::new(n, d);
        let r = match kind {
            CorrectorKind::Vector => d,
            CorrectorKind::Scalar => 1,
        };
        Self::exact(grid, kind, vec![0.0; grid.len() * r], vec![0.0; grid.len() * r * d])
    }

    /// Corner cells and weights of periodic multilinear interpolation at `y`.
    fn stencil(&self, y: &[f64], cells: &mut Vec<(usize, f64)>) {
        let (n, d) = (self.grid.n, self.grid.d);
        cells.clear();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let u = (y[k] - y[k].floor()) * n as f64 - 0.5;
            let i0 = u.floor();
            frac[k] = u - i0;
            base[k] = (i0 as i64).rem_euclid(n as i64) as usize;
        }
        let mut multi = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let hi = corner >> k & 1 == 1;
                multi[k] = if hi { (base[k] + 1) % n } else { base[k] };
                w *= if hi { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                cells.push((self.grid.flat_index(&multi), w));
            }
        }
    }

    pub fn value_at(&self, y: &[f64], out: &mut [f64]) {
        let r = self.components;
        let mut cells = Vec::with_capacity(1 << self.grid.d);
        self.stencil(y, &mut cells);
        out[..r].iter_mut().for_each(|v| *v = 0.0);
        for &(c, w) in &cells {
            for l in 0..r {
                out[l] += w * self.values[c * r + l];
            }
        }
    }

    /// Row-major `r × d` gradient at `y`.
    pub fn gradient_at(&self, y: &[f64], out: &mut [f64]) {
        self.interpolate_gradient(&self.gradients, y, out);
    }

    /// Gradient at `y` of leave-one-out replicate `k`.
    pub fn jackknife_gradient_at(&self, k: usize, y: &[f64], out: &mut [f64]) {
        self.interpolate_gradient(&self.jackknife[k], y, out);
    }

    fn interpolate_gradient(&self, grid_values: &[f64], y: &[f64], out: &mut [f64]) {
        let rd = self.components * self.grid.d;
        let mut cells = Vec::with_capacity(1 << self.grid.d);
        self.stencil(y, &mut cells);
        out[..rd].iter_mut().for_each(|v| *v = 0.0);
        for &(c, w) in &cells {
            for q in 0..rd {
                out[q] += w * grid_values[c * rd + q];
            }
        }
    }

    /// Periodic central differences of the value grid, laid out like
    /// `gradients`.
    pub fn fd_gradients(&self) -> Vec<f64> {
        let (r, d) = (self.components, self.grid.d);
        let n = self.grid.n as f64;
        let mut out = vec![0.0; self.grid.len() * r * d];
        for c in 0..self.grid.len() {
            for k in 0..d {
                let (up, _) = self.grid.neighbor(c, k, 1);
                let (dn, _) = self.grid.neighbor(c, k, -1);
                for l in 0..r {
                    out[(c * r + l) * d + k] = (self.values[up * r + l] - self.values[dn * r + l]) * n / 2.0;
                }
            }
        }
        out
    }

    fn fd_gradient_stderr(&self) -> Vec<f64> {
        let (r, d) = (self.components, self.grid.d);
        let n = self.grid.n as f64;
        let mut out = vec![0.0; self.grid.len() * r * d];
        for c in 0..self.grid.len() {
            for k in 0..d {
                let (up, _) = self.grid.neighbor(c, k, 1);
                let (dn, _) = self.grid.neighbor(c, k, -1);
                for l in 0..r {
                    let a = self.value_stderr[up * r + l];
                    let b = self.value_stderr[dn * r + l];
                    out[(c * r + l) * d + k] = (a * a + b * b).sqrt() * n / 2.0;
                }
            }
        }
        out
    }

    /// Recomputes the agreement fraction and flag; a cell agrees when every
    /// gradient entry is within three combined standard errors (plus a
    /// `1e-9` floor) of the finite-difference gradient.
    pub fn cross_check(&mut self) {
        let (r, d) = (self.components, self.grid.d);
        let fd = self.fd_gradients();
        let fd_se = self.fd_gradient_stderr();
        let rd = r * d;
        let ok = (0..self.grid.len())
            .filter(|&c| {
                (0..rd).all(|q| {
                    let i = c * rd + q;
                    let se = (self.gradient_stderr[i].powi(2) + fd_se[i].powi(2)).sqrt();
                    (self.gradients[i] - fd[i]).abs() <= 3.0 * se + 1e-9
                })
            })
            .count();
        self.agreement = ok as f64 / self.grid.len() as f64;
        self.gradient_flag = self.agreement < 0.95;
    }

    /// Subtracts the grid mean of each component.
    pub fn normalize(&mut self) {
        let r = self.components;
        let cells = self.grid.len() as f64;
        for l in 0..r {
            let mean: f64 = (0..self.grid.len()).map(|c| self.values[c * r + l]).sum::<f64>() / cells;
            for c in 0..self.grid.len() {
                self.values[c * r + l] -= mean;
            }
        }
    }
}

/// Monte Carlo corrector `∫₀^{T_corr} E_x target(X̃_s) ds` at every cell
/// center of an `n^d` grid, with the pathwise gradient
/// `∫ E_x[D target(X̃_s) J_s] ds`. All cells share the same `cfg.n_paths`
/// noise streams (common random numbers), which keeps the value grid smooth
/// for the finite-difference cross-check.
///
/// When `mu` is given, the target must be centered with respect to it.
pub fn corrector(
    spec: &ProblemSpec,
    target: &[Expr],
    kind: CorrectorKind,
    cfg: &SimConfig,
    n: usize,
    t_corr: f64,
    mu: Option<&OccupationEnsemble>,
) -> Result<CorrectorField> {
    let d = spec.d();
    let r = target.len();
    match kind {
        CorrectorKind::Vector if r != d => return Err(Error::invalid("vector target needs d components")),
        CorrectorKind::Scalar if r != 1 => return Err(Error::invalid("scalar target needs one component")),
        _ => {}
    }
    let run = SimConfig { t: t_corr, ..cfg.clone() };
    run.check(spec)?;
    if let Some(ens) = mu {
        let report = centering_of(ens, target, spec);
        if !report.holds {
            let label = match kind {
                CorrectorKind::Vector => Assumption::H5,
                CorrectorKind::Scalar => Assumption::Ezero,
            };
            return Err(Error::assumption(
                label,
                format!(
                    "target not centered: Poisson equation unsolvable (residual {:?} ± {:?})",
                    report.residual, report.stderr
                ),
            ));
        }
    }
    if target.iter().all(Expr::is_zero) {
        let mut f = CorrectorField::zero(n, d, kind);
        f.t_corr = t_corr;
        return Ok(f);
    }
    let grid = Grid::new(n, d);
    let steps = run.steps();
    let h = run.h;
    let masks = spec.bumps();
    let n_paths = cfg.n_paths.max(2);
    let rd = r * d;
    // per cell: sums and sums of squares of the per-path integrals
    let groups = if n_paths >= 2 * JACKKNIFE_GROUPS { JACKKNIFE_GROUPS } else { 0 };
    let cells: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = par_map(grid.len(), |c| {
        let x0 = grid.center(c);
        let mut vs = vec![0.0; r];
        let mut vq = vec![0.0; r];
        let mut gs = vec![0.0; rd];
        let mut gq = vec![0.0; rd];
        let mut group_sums = vec![0.0; groups * rd];
        let mut val = vec![0.0; r];
        let mut grad = vec![0.0; rd];
        let mut dt = vec![0.0; rd];
        let accumulate = |s: &LiftedState, j: &[f64], w: f64, val: &mut [f64], grad: &mut [f64], dt: &mut [f64]| {
            for l in 0..r {
                val[l] += w * target[l].value(&s.y, masks);
                for k in 0..d {
                    dt[l * d + k] = target[l].derivative(&s.y, k, masks);
                }
            }
            for l in 0..r {
                for k in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        acc += dt[l * d + i] * j[i * d + k];
                    }
                    grad[l * d + k] += w * acc;
                }
            }
        };
        for p in 0..n_paths {
            let mut rng = path_rng(cfg.seed, p as u64);
            let mut st = JacobianStepper::new(Stepper::new(spec, cfg.eps, h, cfg.scheme));
            let mut s = LiftedState::from_lift(&x0);
            let mut j = identity(d);
            val.iter_mut().for_each(|v| *v = 0.0);
            grad.iter_mut().for_each(|v| *v = 0.0);
            accumulate(&s, &j, 0.5 * h, &mut val, &mut grad, &mut dt);
            for step in 1..=steps {
                st.step(&mut s, &mut j, cfg.eps, &mut rng)?;
                let w = if step == steps { 0.5 * h } else { h };
                accumulate(&s, &j, w, &mut val, &mut grad, &mut dt);
            }
            for l in 0..r {
                vs[l] += val[l];
                vq[l] += val[l] * val[l];
            }
            for q in 0..rd {
                gs[q] += grad[q];
                gq[q] += grad[q] * grad[q];
            }
            if groups > 0 {
                let g = p % groups;
                for q in 0..rd {
                    group_sums[g * rd + q] += grad[q];
                }
            }
        }
        Ok((vs, vq, gs, gq, group_sums))
    })?;
    let np = n_paths as f64;
    let finish = |s: f64, q: f64| -> (f64, f64) {
        let m = s / np;
        let var = ((q - np * m * m) / (np - 1.0)).max(0.0);
        (m, (var / np).sqrt())
    };
    let mut field = CorrectorField {
        grid,
        kind,
        components: r,
        values: Vec::with_capacity(grid.len() * r),
        gradients: Vec::with_capacity(grid.len() * rd),
        value_stderr: Vec::with_capacity(grid.len() * r),
        gradient_stderr: Vec::with_capacity(grid.len() * rd),
        agreement: 1.0,
        gradient_flag: false,
        t_corr,
        n_paths,
        seed: cfg.seed,
        jackknife: vec![Vec::with_capacity(grid.len() * rd); groups],
    };
    let group_size = |g: usize| ((n_paths - g).div_ceil(groups.max(1))) as f64;
    for (vs, vq, gs, gq, group_sums) in cells {
        for g in 0..groups {
            let rest = np - group_size(g);
            for q in 0..rd {
                field.jackknife[g].push((gs[q] - group_sums[g * rd + q]) / rest);
            }
        }
        for l in 0..r {
            let (m, se) = finish(vs[l], vq[l]);
            field.values.push(m);
            field.value_stderr.push(se);
        }
        for q in 0..rd {
            let (m, se) = finish(gs[q], gq[q]);
            field.gradients.push(m);
            field.gradient_stderr.push(se);
        }
    }
    field.normalize();
    field.cross_check();
    Ok(field)
}

/// Grid-L² norm of `L ĉ + target` relative to that of `target`, with `L`
/// applied to the interpolated corrector by periodic central differences on
/// its own grid.
pub fn corrector_residual(spec: &ProblemSpec, field: &CorrectorField, target: &[Expr]) -> f64 {
    let (d, r) = (spec.d(), field.components);
    let grid = field.grid;
    let n = grid.n as f64;
    let masks = spec.bumps();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..grid.len() {
        let x = grid.center(c);
        spec.diffusion_into(&x, &mut a);
        spec.drift_into(&x, 0.0, &mut b);
        for l in 0..r {
            let v = |cell: usize| field.values[cell * r + l];
            let mut lv = 0.0;
            for i in 0..d {
                let (up, _) = grid.neighbor(c, i, 1);
                let (dn, _) = grid.neighbor(c, i, -1);
                lv += b[i] * (v(up) - v(dn)) * n / 2.0;
                lv += 0.5 * a[i * d + i] * (v(up) - 2.0 * v(c) + v(dn)) * n * n;
                for j in 0..d {
                    if j == i {
                        continue;
                    }
                    let corner = |si: i64, sj: i64| {
                        let (ci, _) = grid.neighbor(c, i, si);
                        let (cij, _) = grid.neighbor(ci, j, sj);
                        v(cij)
                    };
                    let mixed = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) * n * n / 4.0;
                    lv += 0.5 * a[i * d + j] * mixed;
                }
            }
            let t = target[l].value(&x, masks);
            num += (lv + t).powi(2);
            den += t * t;
        }
    }
    if den == 0.0 {
        return num.sqrt();
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TrigTerm;

    #[test]
    fn interpolation_is_periodic_and_exact_at_centers() {
        let grid = Grid::new(8, 2);
        let values: Vec<f64> = (0..grid.len()).map(|i| i as f64).collect();
        let field = CorrectorField::exact(grid, CorrectorKind::Scalar, values.clone(), vec![0.0; grid.len() * 2]);
        let mut out = [0.0];
        for c in 0..grid.len() {
            field.value_at(&grid.center(c), &mut out);
            assert!((out[0] - values[c]).abs() < 1e-12);
        }
        let mut a = [0.0];
        let mut b = [0.0];
        field.value_at(&[0.03, 0.97], &mut a);
        field.value_at(&[2.03, -1.03], &mut b);
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_corrector() {
        let spec = ProblemSpec::brownian(2);
        let cfg = SimConfig::new(0.01, 1.0, 0.0, 1, 10);
        let f = corrector(&spec, &[Expr::zero(), Expr::zero()], CorrectorKind::Vector, &cfg, 8, 0.5, None).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert!(!f.gradient_flag);
    }

    #[test]
    fn heat_corrector_of_cosine() {
        // ½ ê'' = −cos 2πx  ⇒  ê = cos 2πx / (2π²)
        let spec = ProblemSpec::brownian(1);
        let e = Expr::trig(vec![TrigTerm::cos(&[1], 1.0)]);
        let cfg = SimConfig::new(0.002, 1.0, 0.0, 3, 4000);
        let f = corrector(&spec, &[e], CorrectorKind::Scalar, &cfg, 16, 0.4, None).unwrap();
        let k = 2.0 * std::f64::consts::PI.powi(2);
        for c in 0..16 {
            let x = f.grid.center(c)[0];
            let exact = (2.0 * std::f64::consts::PI * x).cos() / k;
            assert!((f.values[c] - exact).abs() < 0.01, "cell {c}: {} vs {exact}", f.values[c]);
        }
        assert!(!f.gradient_flag, "agreement {}", f.agreement);
    }
}
