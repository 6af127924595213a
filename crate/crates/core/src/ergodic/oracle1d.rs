//! Quadrature solution of one-dimensional cell problems.
//!
//! With `Φ = exp ∫₀ˣ 2b/a` the equation `½a u″ + b u′ = −f` becomes
//! `(Φ u′)′ = −2fΦ/a`, so `u′ = (K − F)/Φ` with `F = ∫₀ˣ 2fΦ/a` and `K` fixed
//! by periodicity of `u`. The invariant density is `p ∝ Φ/a`.

use super::corrector::{CorrectorField, CorrectorKind};
use crate::error::{Assumption, Error, Result};
use crate::fields::{Expr, ProblemSpec};
use crate::grid::Grid;

/// Fine-mesh resolution used for all quadratures.
const MESH: usize = 1 << 15;

/// Relative tolerance on the periodicity of `Φ` and of `F`.
const PERIOD_TOL: f64 = 1e-7;

/// Exact one-dimensional solution on a fine mesh.
#[derive(Clone, Debug)]
pub struct Oracle1d {
    /// Mesh nodes `i / M`.
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    /// Normalized invariant density.
    pub density: Vec<f64>,
    /// Corrector derivative `u′` on the mesh.
    pub slope: Vec<f64>,
    /// Zero-mean corrector values on the mesh.
    pub values: Vec<f64>,
    /// `∫(1 + u′)² a dμ` when the target is the drift, else `∫ u′² a dμ`.
    pub quadratic: f64,
}

impl Oracle1d {
    /// `∫ g(x, u′, a) dμ` by the periodic trapezoid rule.
    pub fn integrate(&self, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let m = self.x.len() as f64;
        (0..self.x.len())
            .map(|i| g(self.x[i], self.slope[i], self.a[i]) * self.density[i])
            .sum::<f64>()
            / m
    }

    /// Corrector sampled at the centers of an `n`-cell grid.
    pub fn field(&self, n: usize, kind: CorrectorKind) -> CorrectorField {
        let grid = Grid::new(n, 1);
        let m = self.x.len();
        let mut values = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for c in 0..n {
            let u = grid.center(c)[0] * m as f64;
            let i = u.floor() as usize % m;
            let w = u - u.floor();
            let j = (i + 1) % m;
            values.push((1.0 - w) * self.values[i] + w * self.values[j]);
            grads.push((1.0 - w) * self.slope[i] + w * self.slope[j]);
        }
        let mut f = CorrectorField::exact(grid, kind, values, grads);
        f.normalize();
        f
    }
}

fn cumulative(f: &[f64]) -> Vec<f64> {
    let h = 1.0 / f.len() as f64;
    let mut out = Vec::with_capacity(f.len() + 1);
    out.push(0.0);
    for i in 0..f.len() {
        let next = f[(i + 1) % f.len()];
        out.push(out[i] + 0.5 * h * (f[i] + next));
    }
    out
}

/// Solves `L u + target = 0` on the circle by quadrature. The drift target
/// (`target = b`) is the cell problem for `b̂`.
pub fn poisson_solve_1d(spec: &ProblemSpec, target: &Expr, drift_target: bool) -> Result<Oracle1d> {
    if spec.d() != 1 {
        return Err(Error::invalid("1-d oracle needs d = 1"));
    }
    let masks = spec.bumps();
    let x: Vec<f64> = (0..MESH).map(|i| i as f64 / MESH as f64).collect();
    let mut a = vec![0.0; MESH];
    let mut buf = [0.0];
    for (i, xi) in x.iter().enumerate() {
        spec.diffusion_into(&[*xi], &mut buf);
        a[i] = buf[0];
    }
    let a_max = a.iter().cloned().fold(0.0, f64::max);
    if a.iter().any(|&v| v <= 1e-10 * a_max.max(1.0)) {
        return Err(Error::assumption(Assumption::Nondeg, "1-d oracle requires ellipticity"));
    }
    let b: Vec<f64> = x.iter().map(|xi| spec.b()[0].value(&[*xi], masks)).collect();
    let log_phi = cumulative(&b.iter().zip(&a).map(|(b, a)| 2.0 * b / a).collect::<Vec<_>>());
    let drift_scale = b.iter().zip(&a).map(|(b, a)| (2.0 * b / a).abs()).sum::<f64>() / MESH as f64;
    if log_phi[MESH].abs() > PERIOD_TOL * drift_scale.max(1.0) {
        return Err(Error::assumption(
            Assumption::H5,
            format!("drift has nonzero flux: ∫2b/a = {:.3e}", log_phi[MESH]),
        ));
    }
    let phi: Vec<f64> = log_phi[..MESH].iter().map(|v| v.exp()).collect();
    let weight: Vec<f64> = phi.iter().zip(&a).map(|(p, a)| p / a).collect();
    let z: f64 = weight.iter().sum::<f64>() / MESH as f64;
    let density: Vec<f64> = weight.iter().map(|w| w / z).collect();
    let f: Vec<f64> = x.iter().map(|xi| target.value(&[*xi], masks)).collect();
    let big_f = cumulative(&f.iter().zip(&weight).map(|(f, w)| 2.0 * f * w).collect::<Vec<_>>());
    let f_scale = f.iter().zip(&weight).map(|(f, w)| (2.0 * f * w).abs()).sum::<f64>() / MESH as f64;
    if big_f[MESH].abs() > PERIOD_TOL * f_scale.max(1e-300) {
        let label = if drift_target { Assumption::H5 } else { Assumption::Ezero };
        return Err(Error::assumption(
            label,
            format!("target not centered: Poisson equation unsolvable (∫f dμ ∝ {:.3e})", big_f[MESH]),
        ));
    }
    let inv_phi: f64 = phi.iter().map(|p| 1.0 / p).sum::<f64>();
    let f_over_phi: f64 = (0..MESH).map(|i| big_f[i] / phi[i]).sum::<f64>();
    let k = f_over_phi / inv_phi;
    let slope: Vec<f64> = (0..MESH).map(|i| (k - big_f[i]) / phi[i]).collect();
    let mut values = cumulative(&slope);
    values.truncate(MESH);
    let mean = values.iter().sum::<f64>() / MESH as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let mut oracle = Oracle1d {
        x,
        a,
        density,
        slope,
        values,
        quadratic: 0.0,
    };
    oracle.quadratic = if drift_target {
        oracle.integrate(|_, g, a| (1.0 + g).powi(2) * a)
    } else {
        oracle.integrate(|_, g, a| g * g * a)
    };
    Ok(oracle)
}

/// Drift corrector `b̂` of a one-dimensional spec on an `n`-cell grid,
/// together with the exact effective diffusivity `∫(1 + b̂′)² a dμ`.
pub fn poisson_oracle_1d(spec: &ProblemSpec, n: usize) -> Result<(CorrectorField, f64)> {
    let oracle = poisson_solve_1d(spec, &spec.b()[0], true)?;
    Ok((oracle.field(n, CorrectorKind::Vector), oracle.quadratic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_example, ExampleName, ExampleParams, TrigTerm};

    #[test]
    fn constant_diffusion_has_zero_corrector() {
        let spec = ProblemSpec::constant(&[0.0], 1, &[1.5]).unwrap();
        let (f, a) = poisson_oracle_1d(&spec, 16).unwrap();
        assert!(f.values.iter().all(|v| v.abs() < 1e-12));
        assert!((a - 2.25).abs() < 1e-10);
    }

    #[test]
    fn harmonic_example_gives_root_three() {
        let spec = build_example(ExampleName::OnedHarmonic, &ExampleParams::default()).unwrap();
        let (f, a) = poisson_oracle_1d(&spec, 64).unwrap();
        assert!((a - 3f64.sqrt()).abs() < 1e-8, "{a}");
        // b̂′ = √3/a − 1
        for c in 0..64 {
            let x = f.grid.center(c)[0];
            let exact = 3f64.sqrt() / (2.0 + (2.0 * std::f64::consts::PI * x).sin()) - 1.0;
            assert!((f.gradients[c] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_diffusion_rejected() {
        let sigma = Expr::trig(vec![TrigTerm::sin(&[1], 1.0)]);
        let spec = ProblemSpec::new(1, 1, vec![Expr::zero()], vec![Expr::zero()], vec![sigma], vec![]).unwrap();
        let err = poisson_oracle_1d(&spec, 8).unwrap_err();
        assert_eq!(err.assumption_label(), Some(Assumption::Nondeg));
    }

    #[test]
    fn driftless_variable_diffusion_density() {
        // a = 2 + sin: p ∝ 1/a and no corrector
        let sigma = Expr::apply(
            crate::fields::UnaryFn::Sqrt,
            Expr::sum(vec![Expr::constant(2.0), Expr::trig(vec![TrigTerm::sin(&[1], 1.0)])]),
        );
        let spec = ProblemSpec::new(1, 1, vec![Expr::zero()], vec![Expr::zero()], vec![sigma], vec![]).unwrap();
        let o = poisson_solve_1d(&spec, &spec.b()[0].clone(), true).unwrap();
        let norm = 1.0 / 3f64.sqrt();
        for i in (0..o.x.len()).step_by(997) {
            let expected = 1.0 / (o.a[i] * norm);
            assert!((o.density[i] - expected).abs() < 1e-8);
        }
        // A = ∫ a dμ = 1 / ∫ a⁻¹ = √3
        assert!((o.quadratic - 3f64.sqrt()).abs() < 1e-8);
    }
}
