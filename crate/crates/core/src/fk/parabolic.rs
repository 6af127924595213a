//! Feynman–Kac solver for the Cauchy problem with a singular potential.

use serde::{Deserialize, Serialize};

use super::elliptic::weighted_mean;
use super::exit::LimitModel;
use crate::error::{Assumption, Error, Result};
use crate::ergodic::{CorrectorField, CorrectorKind, OccupationEnsemble};
use crate::fields::{Expr, ProblemSpec, TwoScale};
use crate::grid::Grid;
use crate::rng::path_rng;
use crate::sde::{check_step, par_map, LiftedState, SimConfig, Stepper};

/// `∂_t u^ε = ½ tr(a ∇²u^ε) + ε⁻¹ b·∇u^ε + c·∇u^ε + (ε⁻¹ e + f) u^ε`,
/// `u^ε(0, ·) = g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicProblem {
    /// Singular potential; must be centered under the invariant measure.
    pub e: Expr,
    pub f: TwoScale,
    /// Initial data; must not depend on the fast variable.
    pub g: TwoScale,
    pub t: f64,
}

impl ParabolicProblem {
    pub fn validate(&self, d: usize, masks: &[crate::fields::BumpMask]) -> Result<()> {
        self.e.validate(d, masks.len())?;
        self.f.validate(d, masks.len())?;
        self.g.validate(d, masks.len())?;
        if self.g.has_fast() {
            return Err(Error::invalid("initial data g must not depend on the fast variable"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid("horizon t must be positive"));
        }
        for y in Grid::new(8, d).centers() {
            if !self.f.eval(&vec![0.0; d], &y, masks).is_finite() || !self.e.value(&y, masks).is_finite() {
                return Err(Error::invalid("e and f must be finite"));
            }
        }
        Ok(())
    }
}

/// Both representations of `u^ε(t, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicEstimate {
    /// From `Ŷ^ε_t − ε ê(X^ε_t/ε)`, built from the corrector `ê`.
    pub value: f64,
    pub stderr: f64,
    /// From `∫₀ᵗ (ε⁻¹ e + f) ds` directly.
    pub raw_value: f64,
    pub raw_stderr: f64,
    /// Whether the two agree within three combined standard errors.
    pub agree: bool,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: f64,
}

/// `|ε⁻¹e|` grows without bound as ε shrinks; below this scale a
/// disagreement between the estimators is expected and not reported.
pub const RAW_CHECK_MIN_EPS: f64 = 0.25;

/// Checks `∫ e dμ = 0` within four standard errors of the occupation batches.
pub fn check_e_centered(e: &Expr, spec: &ProblemSpec, mu: &OccupationEnsemble) -> Result<()> {
    let (r, se) = mu.expectation_with_stderr(std::slice::from_ref(e), spec.bumps());
    if r[0] != 0.0 && !(r[0].abs() < 4.0 * se[0]) {
        return Err(Error::assumption(
            Assumption::Ezero,
            format!("e not centered: mean {:.3e} vs stderr {:.3e}", r[0], se[0]),
        ));
    }
    Ok(())
}

/// `u^ε(t, x)` by simulating `X^ε` with torus step `cfg.h` up to `prob.t`.
///
/// `e_hat` solves `L ê = −e`; when `mu` is given, `e` is first checked to be
/// centered.
pub fn parabolic_eps(
    prob: &ParabolicProblem,
    spec: &ProblemSpec,
    eps: f64,
    e_hat: &CorrectorField,
    x: &[f64],
    cfg: &SimConfig,
    mu: Option<&OccupationEnsemble>,
) -> Result<ParabolicEstimate> {
    let d = spec.d();
    prob.validate(d, spec.bumps())?;
    if x.len() != d {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    if e_hat.kind != CorrectorKind::Scalar || e_hat.grid.d != d {
        return Err(Error::invalid("e_hat must be a scalar corrector on the torus of the problem"));
    }
    if e_hat.gradient_flag {
        return Err(Error::InconsistentCorrector(
            "gradient cross-check of e_hat failed; refine the corrector".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("the eps-process needs eps > 0"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    if let Some(mu) = mu {
        check_e_centered(&prob.e, spec, mu)?;
    }
    check_step(spec, cfg.h, eps)?;
    let fast_t = prob.t / (eps * eps);
    let steps = (fast_t / cfg.h).ceil().max(1.0) as usize;
    let h = fast_t / steps as f64;
    let dt = eps * eps * h;
    let (m, masks) = (spec.m(), spec.bumps());
    let start: Vec<f64> = x.iter().map(|v| v / eps).collect();

    let per_path = par_map(cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let mut stepper = Stepper::new(spec, eps, h, cfg.scheme);
        let mut s = LiftedState::from_lift(&start);
        let mut grad = vec![0.0; d];
        let mut cv = vec![0.0; d];
        let mut sigma = vec![0.0; d * m];
        let mut val = [0.0];
        let phys = |s: &LiftedState| -> Vec<f64> { s.lift().into_iter().map(|v| eps * v).collect() };

        let rates = |s: &LiftedState, grad: &mut [f64], cv: &mut [f64]| -> (f64, f64) {
            let xp = phys(s);
            let f = prob.f.eval(&xp, &s.y, masks);
            let raw = prob.e.value(&s.y, masks) / eps + f;
            e_hat.gradient_at(&s.y, grad);
            spec.c_into(&s.y, cv);
            let gc: f64 = grad.iter().zip(cv.iter()).map(|(a, b)| a * b).sum();
            (raw, f + gc)
        };

        e_hat.value_at(&s.y, &mut val);
        let mut corrected = eps * val[0];
        let mut raw = 0.0;
        let (mut r0, mut c0) = rates(&s, &mut grad, &mut cv);
        for _ in 0..steps {
            // Itô integral ∫∇ê σ dW with physical increments ε ΔW̃
            e_hat.gradient_at(&s.y, &mut grad);
            spec.sigma_into(&s.y, &mut sigma);
            stepper.draw(&mut rng);
            let dw = stepper.increments();
            for i in 0..d {
                for j in 0..m {
                    corrected += grad[i] * sigma[i * m + j] * eps * dw[j];
                }
            }
            stepper.advance(&mut s);
            if !s.is_finite() {
                return Err(Error::BlowUp {
                    t: s.t * eps * eps,
                    message: "non-finite state".into(),
                    last_state: s.lift(),
                });
            }
            let (r1, c1) = rates(&s, &mut grad, &mut cv);
            raw += 0.5 * dt * (r0 + r1);
            corrected += 0.5 * dt * (c0 + c1);
            r0 = r1;
            c0 = c1;
        }
        e_hat.value_at(&s.y, &mut val);
        corrected -= eps * val[0];
        let g = prob.g.slow(&phys(&s));
        Ok((g, raw, corrected))
    })?;

    let g: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let raw_lw: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let cor_lw: Vec<f64> = per_path.iter().map(|p| p.2).collect();
    let (value, stderr) = weighted_mean(&g, &cor_lw);
    let (raw_value, raw_stderr) = weighted_mean(&g, &raw_lw);
    let combined = (stderr * stderr + raw_stderr * raw_stderr).sqrt();
    let agree = (value - raw_value).abs() <= 3.0 * combined + 1e-12;
    Ok(ParabolicEstimate {
        value,
        stderr,
        raw_value,
        raw_stderr,
        agree: agree || eps < RAW_CHECK_MIN_EPS,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        eps,
    })
}

/// `u(t, x) = E[g(X_t) exp(∫₀ᵗ D(X_s) ds)]` for the homogenized process of
/// `model` with physical step `cfg.h`.
pub fn parabolic_hom(prob: &ParabolicProblem, model: &LimitModel, x: &[f64], cfg: &SimConfig) -> Result<(f64, f64)> {
    if x.len() != model.d {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    if prob.g.has_fast() {
        return Err(Error::invalid("initial data g must not depend on the fast variable"));
    }
    if !(prob.t > 0.0 && cfg.h > 0.0) || cfg.n_paths == 0 {
        return Err(Error::invalid("need t > 0, h > 0 and at least one path"));
    }
    let steps = (prob.t / cfg.h).ceil().max(1.0) as usize;
    let dt = prob.t / steps as f64;
    let per_path = par_map(cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let mut pos = x.to_vec();
        let mut xi = vec![0.0; model.d];
        let mut lw = 0.0;
        let mut d0 = model.potential(&pos);
        for _ in 0..steps {
            model.step(&mut pos, dt, &mut rng, &mut xi);
            let d1 = model.potential(&pos);
            lw += 0.5 * dt * (d0 + d1);
            d0 = d1;
        }
        Ok((prob.g.slow(&pos), lw))
    })?;
    let g: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let lw: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    Ok(weighted_mean(&g, &lw))
}

/// Analytic `ê` for `e = λ cos 2πx` under one-dimensional Brownian motion,
/// tabulated on `n` cells.
pub fn cosine_corrector_1d(lambda: f64, n: usize) -> CorrectorField {
    use std::f64::consts::PI;
    let grid = Grid::new(n, 1);
    let k = 2.0 * PI;
    let values = grid.centers().map(|y| lambda * (k * y[0]).cos() / (2.0 * PI * PI)).collect();
    let gradients = grid.centers().map(|y| -lambda * k * (k * y[0]).sin() / (2.0 * PI * PI)).collect();
    CorrectorField::exact(grid, CorrectorKind::Scalar, values, gradients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine_problem(lambda: f64, t: f64) -> ParabolicProblem {
        ParabolicProblem {
            e: Expr::scale(lambda, crate::fields::Expr::trig(vec![crate::fields::TrigTerm::cos(&[1], 1.0)])),
            f: TwoScale::constant(0.0),
            g: TwoScale::constant(1.0),
            t,
        }
    }

    #[test]
    fn no_potential_is_exact() {
        let prob = ParabolicProblem {
            e: Expr::zero(),
            f: TwoScale::constant(0.0),
            g: TwoScale::constant(1.0),
            t: 0.5,
        };
        let spec = ProblemSpec::brownian(1);
        let zero = CorrectorField::zero(16, 1, CorrectorKind::Scalar);
        let u = parabolic_eps(&prob, &spec, 0.5, &zero, &[0.1], &SimConfig::new(0.05, 1.0, 0.0, 1, 50), None).unwrap();
        assert_eq!((u.value, u.raw_value, u.stderr), (1.0, 1.0, 0.0));
        let f = ParabolicProblem { f: TwoScale::constant(0.3), ..prob };
        let u = parabolic_eps(&f, &spec, 0.5, &zero, &[0.1], &SimConfig::new(0.05, 1.0, 0.0, 1, 50), None).unwrap();
        assert!((u.value - (0.15f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn raw_and_corrected_agree() {
        let prob = cosine_problem(1.0, 0.5);
        let spec = ProblemSpec::brownian(1);
        let e_hat = cosine_corrector_1d(1.0, 256);
        let cfg = SimConfig::new(0.005, 1.0, 0.0, 2, 1000);
        let u = parabolic_eps(&prob, &spec, 0.5, &e_hat, &[0.0], &cfg, None).unwrap();
        assert!(u.agree, "{u:?}");
    }

    #[test]
    fn homogenized_linear_and_constant_cases() {
        let model = LimitModel::new(vec![1.0], vec![0.4]).unwrap();
        let prob = ParabolicProblem {
            e: Expr::zero(),
            f: TwoScale::constant(0.0),
            g: TwoScale::linear(vec![1.0]),
            t: 2.0,
        };
        let (v, se) = parabolic_hom(&prob, &model, &[0.5], &SimConfig::new(0.05, 1.0, 0.0, 3, 4000)).unwrap();
        assert!((v - 1.3).abs() < 3.0 * se, "{v} ± {se}");
        let model = model.with_potential(-0.7, vec![]).unwrap();
        let prob = ParabolicProblem { g: TwoScale::constant(1.0), ..prob };
        let (v, se) = parabolic_hom(&prob, &model, &[0.5], &SimConfig::new(0.05, 1.0, 0.0, 3, 100)).unwrap();
        assert!((v - (-1.4f64).exp()).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn uncentered_potential_rejected() {
        let spec = ProblemSpec::brownian(1);
        let mu = crate::ergodic::estimate_invariant_batched(&spec, &SimConfig::new(0.01, 20.0, 0.0, 1, 20), 16, 1.0).unwrap();
        let prob = ParabolicProblem {
            e: Expr::constant(1.0),
            f: TwoScale::constant(0.0),
            g: TwoScale::constant(1.0),
            t: 0.1,
        };
        let zero = CorrectorField::zero(16, 1, CorrectorKind::Scalar);
        let err = parabolic_eps(&prob, &spec, 0.5, &zero, &[0.0], &SimConfig::new(0.05, 1.0, 0.0, 1, 4), Some(&mu)).unwrap_err();
        assert_eq!(err.assumption_label(), Some(Assumption::Ezero));
    }
}
