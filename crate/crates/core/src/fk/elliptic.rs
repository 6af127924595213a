//! Feynman–Kac solver for the Dirichlet problem.

use serde::{Deserialize, Serialize};

use super::domain::Domain;
use super::exit::{capped_fraction, is_degenerate_exit, run_exits, Dynamics, ExitPath, LimitModel, MAX_CAPPED_FRACTION};
use crate::error::{Assumption, Error, Result};
use crate::fields::{ProblemSpec, TwoScale};
use crate::grid::Grid;
use crate::sde::SimConfig;

/// `½ tr(a ∇²u^ε) + ε⁻¹ b·∇u^ε + c·∇u^ε + f u^ε = 0` in `D`, `u^ε = g` on `∂D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticProblem {
    pub domain: Domain,
    /// Potential `f(x, y)`.
    pub f: TwoScale,
    /// Boundary data; must not depend on the fast variable.
    pub g: TwoScale,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Required when `alpha > 0`, since the exponential moment bound on the
    /// exit time cannot be checked here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

fn default_delta() -> f64 {
    1.0
}

impl EllipticProblem {
    pub fn new(domain: Domain, f: TwoScale, g: TwoScale) -> Self {
        EllipticProblem {
            domain,
            f,
            g,
            alpha: 0.0,
            delta: default_delta(),
            justification: None,
        }
    }

    /// Shapes, `alpha`/`delta` and `sup f ≤ (α − δ)⁺` on a sample of slow and
    /// fast points.
    pub fn validate(&self, d: usize, masks: &[crate::fields::BumpMask]) -> Result<()> {
        self.domain.validate(d)?;
        self.f.validate(d, masks.len())?;
        self.g.validate(d, masks.len())?;
        if self.g.has_fast() {
            return Err(Error::invalid("boundary data g must not depend on the fast variable"));
        }
        if !(self.alpha >= 0.0 && self.delta > 0.0) {
            return Err(Error::invalid("need alpha >= 0 and delta > 0"));
        }
        if self.alpha > 0.0 && self.justification.as_deref().map_or(true, |s| s.trim().is_empty()) {
            return Err(Error::assumption(
                Assumption::Unif,
                "alpha > 0 needs a justification of the exponential moment bound",
            ));
        }
        let bound = (self.alpha - self.delta).max(0.0);
        let fast_pts: Vec<Vec<f64>> = if self.f.has_fast() {
            Grid::new(8, d).centers().collect()
        } else {
            vec![vec![0.0; d]]
        };
        for x in self.domain.sample_points(8) {
            for y in &fast_pts {
                let v = self.f.eval(&x, y, masks);
                if !(v <= bound + 1e-12) {
                    return Err(Error::assumption(
                        Assumption::Borne,
                        format!("f = {v:.4} at x = {x:?} exceeds (alpha - delta)+ = {bound}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Monte Carlo value of a Feynman–Kac functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub capped_fraction: f64,
    pub seed: u64,
    pub eps: Option<f64>,
    /// `e^{sup f · T_max} · P(cap)`, a bound on the bias from capped paths
    /// when `|g| ≤ 1`.
    pub cap_bias_bound: f64,
}

/// Mean and standard error of `g_p e^{L_p}`, shifted by `max L` so large
/// exponents do not overflow.
pub(crate) fn weighted_mean(g: &[f64], log_w: &[f64]) -> (f64, f64) {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = if m.is_finite() { m } else { 0.0 };
    let v: Vec<f64> = g.iter().zip(log_w).map(|(g, l)| g * (l - m).exp()).collect();
    let (mean, se) = crate::stats::mean_stderr(&v);
    let scale = m.exp();
    (mean * scale, se * scale)
}

fn estimate(paths: &[ExitPath], g: &TwoScale, cfg: &SimConfig, eps: Option<f64>, sup_rate: f64) -> Result<FkEstimate> {
    let capped = capped_fraction(paths);
    if capped > MAX_CAPPED_FRACTION {
        return Err(Error::ExitCap {
            capped_fraction: capped,
            t_max: cfg.t,
        });
    }
    let gv: Vec<f64> = paths.iter().map(|p| g.slow(&p.exit)).collect();
    let lw: Vec<f64> = paths.iter().map(|p| p.log_weight).collect();
    let (value, stderr) = if g.is_constant() && paths.iter().all(|p| p.log_weight == 0.0) {
        (g.constant, 0.0)
    } else {
        weighted_mean(&gv, &lw)
    };
    Ok(FkEstimate {
        value,
        stderr,
        n_paths: paths.len(),
        capped_fraction: capped,
        seed: cfg.seed,
        eps,
        cap_bias_bound: (sup_rate * cfg.t).exp() * capped,
    })
}

/// `u^ε(x) = E_x[g(X^ε_τ) exp(∫₀^τ f(X^ε_s, X^ε_s/ε) ds)]`. `cfg.h` is the
/// torus step and `cfg.t` the cap on `τ`.
pub fn elliptic_eps(prob: &EllipticProblem, spec: &ProblemSpec, eps: f64, x: &[f64], cfg: &SimConfig) -> Result<FkEstimate> {
    prob.validate(spec.d(), spec.bumps())?;
    let masks = spec.bumps();
    let paths = run_exits(&Dynamics::Eps { spec, eps }, &prob.domain, x, cfg, |x, y| prob.f.eval(x, y, masks))?;
    estimate(&paths, &prob.g, cfg, Some(eps), (prob.alpha - prob.delta).max(0.0))
}

/// `u(x) = E_x[g(X_τ) exp(∫₀^τ D(X_s) ds)]` for the homogenized process of
/// `model`, whose potential must already hold `D`.
///
/// When `A` is singular the problem is accepted only if every simulated exit
/// crosses the boundary where `⟨A n, n⟩ > 0`.
pub fn elliptic_hom(prob: &EllipticProblem, model: &LimitModel, x: &[f64], cfg: &SimConfig) -> Result<FkEstimate> {
    prob.domain.validate(model.d)?;
    if prob.g.has_fast() {
        return Err(Error::invalid("boundary data g must not depend on the fast variable"));
    }
    let scale = model.a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-10 * scale;
    let singular = model.min_eigenvalue() <= tol;
    let paths = run_exits(&Dynamics::Limit(model), &prob.domain, x, cfg, |x, _| model.potential(x))?;
    if singular {
        let ill = capped_fraction(&paths) > MAX_CAPPED_FRACTION
            || paths.iter().any(|p| is_degenerate_exit(model, &prob.domain, &p.exit, tol));
        if ill {
            return Err(Error::assumption(
                Assumption::Nondeg,
                "homogenized exit ill-posed: A is singular and exits cross where <A n, n> = 0",
            ));
        }
    }
    let sup_d = prob
        .domain
        .sample_points(8)
        .iter()
        .map(|p| model.potential(p))
        .fold(0.0f64, f64::max);
    estimate(&paths, &prob.g, cfg, None, sup_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm1() -> LimitModel {
        LimitModel::new(vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn constant_data_is_exact() {
        let prob = EllipticProblem::new(Domain::interval(-1.0, 1.0), TwoScale::constant(0.0), TwoScale::constant(2.5));
        let cfg = SimConfig::new(1e-2, 50.0, 0.0, 1, 200);
        let u = elliptic_hom(&prob, &bm1(), &[0.3], &cfg).unwrap();
        assert_eq!((u.value, u.stderr), (2.5, 0.0));
        let spec = ProblemSpec::brownian(1);
        let u = elliptic_eps(&prob, &spec, 0.5, &[0.3], &cfg).unwrap();
        assert_eq!(u.value, 2.5);
    }

    #[test]
    fn killed_brownian_motion_matches_closed_form() {
        let prob = EllipticProblem::new(Domain::interval(-1.0, 1.0), TwoScale::constant(-1.0), TwoScale::constant(1.0));
        let cfg = SimConfig::new(1e-3, 50.0, 0.0, 2, 4000);
        let model = bm1().with_potential(-1.0, vec![]).unwrap();
        let u = elliptic_hom(&prob, &model, &[0.0], &cfg).unwrap();
        let exact = 1.0 / 2f64.sqrt().cosh();
        assert!((u.value - exact).abs() < 3.0 * u.stderr + 0.002, "{} ± {}", u.value, u.stderr);
    }

    #[test]
    fn positive_potential_violates_bound() {
        let prob = EllipticProblem::new(Domain::interval(-1.0, 1.0), TwoScale::constant(0.5), TwoScale::constant(1.0));
        let err = prob.validate(1, &[]).unwrap_err();
        assert_eq!(err.assumption_label(), Some(Assumption::Borne));
    }

    #[test]
    fn degenerate_limit_is_ill_posed() {
        let model = LimitModel::new(vec![0.0; 4], vec![0.0; 2]).unwrap();
        let prob = EllipticProblem::new(Domain::ball(vec![0.0, 0.0], 1.0), TwoScale::constant(-1.0), TwoScale::constant(1.0));
        let cfg = SimConfig::new(1e-2, 5.0, 0.0, 1, 20);
        let err = elliptic_hom(&prob, &model, &[0.0, 0.0], &cfg).unwrap_err();
        assert_eq!(err.assumption_label(), Some(Assumption::Nondeg));
    }

    #[test]
    fn lower_potential_lowers_value() {
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.02, 50.0, 0.0, 4, 200);
        let mk = |c| EllipticProblem::new(Domain::interval(-1.0, 1.0), TwoScale::constant(c), TwoScale::constant(1.0));
        let hi = elliptic_eps(&mk(-0.5), &spec, 0.25, &[0.2], &cfg).unwrap();
        let lo = elliptic_eps(&mk(-1.0), &spec, 0.25, &[0.2], &cfg).unwrap();
        assert!(lo.value < hi.value);
    }
}
