//! First variation `dJ = Db J dt + Σ_j Dσ_j J dW_j` along a path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LiftedState, SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::fields::ProblemSpec;
use crate::linalg::determinant;
use crate::rng::path_rng;

/// Above this norm the linearized flow is reported as blown up.
pub const JACOBIAN_LIMIT: f64 = 1e12;

/// State and Jacobian advanced together with shared increments.
pub struct JacobianStepper<'a> {
    pub inner: Stepper<'a>,
    db: Vec<f64>,
    dsigma: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> JacobianStepper<'a> {
    pub fn new(inner: Stepper<'a>) -> Self {
        let (d, m) = (inner.spec().d(), inner.spec().m());
        JacobianStepper {
            inner,
            db: vec![0.0; d * d],
            dsigma: vec![0.0; d * m * d],
            scratch: vec![0.0; d * d],
        }
    }

    /// `Db` at the start of the last step (row-major, `[i * d + k] = ∂_k b_i`).
    pub fn drift_jacobian(&self) -> &[f64] {
        &self.db
    }

    /// Advances `s` and the row-major Jacobian `j` by one step.
    pub fn step<R: Rng>(&mut self, s: &mut LiftedState, j: &mut [f64], eps: f64, rng: &mut R) -> Result<()> {
        let spec = self.inner.spec();
        let (d, m) = (spec.d(), spec.m());
        let h = self.inner.h();
        spec.drift_jacobian_into(&s.y, eps, &mut self.db);
        spec.sigma_jacobian_into(&s.y, &mut self.dsigma);
        self.inner.step(s, rng)?;
        let dw = &self.inner.dw;
        // M = h Db + Σ_j ΔW_j Dσ_j, then J ← J + M J
        for i in 0..d {
            for k in 0..d {
                let mut v = h * self.db[i * d + k];
                for (jj, w) in dw.iter().enumerate() {
                    v += w * self.dsigma[(i * m + jj) * d + k];
                }
                self.scratch[i * d + k] = v;
            }
        }
        let old: Vec<f64> = j.to_vec();
        let mut norm2 = 0.0;
        for i in 0..d {
            for c in 0..d {
                let mut v = old[i * d + c];
                for k in 0..d {
                    v += self.scratch[i * d + k] * old[k * d + c];
                }
                j[i * d + c] = v;
                norm2 += v * v;
            }
        }
        if !(norm2.sqrt() <= JACOBIAN_LIMIT) {
            return Err(Error::JacobianBlowUp { t: s.t });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianPath {
    pub states: Vec<LiftedState>,
    /// Row-major `d × d` Jacobians at the recorded states.
    pub jacobians: Vec<Vec<f64>>,
    /// Number of steps on which `det J` changed sign.
    pub det_sign_flips: usize,
}

pub fn identity(d: usize) -> Vec<f64> {
    (0..d * d).map(|k| if k / d == k % d { 1.0 } else { 0.0 }).collect()
}

/// State path and Jacobian with the noise of path 0 of `cfg.seed`, so the
/// states coincide with those of `simulate_lifted`.
pub fn jacobian_flow(spec: &ProblemSpec, x: &[f64], cfg: &SimConfig) -> Result<JacobianPath> {
    cfg.check(spec)?;
    jacobian_path(spec, x, cfg, 0)
}

pub(crate) fn jacobian_path(spec: &ProblemSpec, x: &[f64], cfg: &SimConfig, index: u64) -> Result<JacobianPath> {
    let d = spec.d();
    let mut rng = path_rng(cfg.seed, index);
    let mut st = JacobianStepper::new(Stepper::new(spec, cfg.eps, cfg.h, cfg.scheme));
    let mut s = LiftedState::from_lift(x);
    let mut j = identity(d);
    let every = cfg.record_every.max(1);
    let steps = cfg.steps();
    let mut states = vec![s.clone()];
    let mut jacobians = vec![j.clone()];
    let mut flips = 0;
    let mut sign = 1.0f64;
    for n in 1..=steps {
        st.step(&mut s, &mut j, cfg.eps, &mut rng)?;
        let det = determinant(&j, d);
        if det.signum() != sign && det != 0.0 {
            flips += 1;
            sign = det.signum();
        }
        if n % every == 0 || n == steps {
            states.push(s.clone());
            jacobians.push(j.clone());
        }
    }
    Ok(JacobianPath {
        states,
        jacobians,
        det_sign_flips: flips,
    })
}
