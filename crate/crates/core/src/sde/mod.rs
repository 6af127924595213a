//! Time stepping of `dX̃ = (b + εc) dt + σ dW` on the torus with a winding lift.

mod checks;
mod control;
mod io;
mod jacobian;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checks::{h4_estimate, reachability_check, H4Report, ReachabilityReport};
pub use control::{control_ode, controlled_field};
pub use io::{write_path_csv, EnsembleSummary};
pub use jacobian::{identity, jacobian_flow, JacobianPath, JacobianStepper};

use crate::error::{Error, Result};
use crate::fields::ProblemSpec;
use crate::rng::{normal, path_rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
    /// Euler–Maruyama plus the diagonal Milstein terms
    /// `½ Σ_j (∂σ_j σ_j)(ΔW_j² − h)`; first strong order only for commutative
    /// noise.
    MilsteinDiag,
}

/// Step size, horizon, scale and ensemble settings of a simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub h: f64,
    /// Horizon in the time units of the torus process.
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(rename = "N", default = "default_paths")]
    pub n_paths: usize,
    /// Record every `record_every`-th step of a path.
    #[serde(default = "default_record")]
    pub record_every: usize,
}

fn default_paths() -> usize {
    1000
}

fn default_record() -> usize {
    1
}

impl SimConfig {
    pub fn new(h: f64, t: f64, eps: f64, seed: u64, n_paths: usize) -> Self {
        SimConfig {
            h,
            t,
            eps,
            seed,
            scheme: Scheme::EulerMaruyama,
            n_paths,
            record_every: 1,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        (self.t / self.h - 1e-9).ceil().max(0.0) as usize
    }

    /// Checks `h ≤ T` and the stability bound `h (‖b‖∞ + ε‖c‖∞) < 0.1`.
    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("step h must be positive"));
        }
        if !(self.t >= self.h) {
            return Err(Error::invalid(format!("horizon T = {} shorter than step h = {}", self.t, self.h)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::invalid("eps must be nonnegative"));
        }
        check_step(spec, self.h, self.eps)
    }
}

/// Stability bound `h (‖b‖∞ + ε‖c‖∞) < 0.1`.
pub fn check_step(spec: &ProblemSpec, h: f64, eps: f64) -> Result<()> {
    let (sb, sc) = spec.sup_norms();
    let bound = h * (sb + eps * sc);
    if bound >= 0.1 {
        return Err(Error::invalid(format!(
            "step too large: h (|b| + eps |c|) = {bound:.3} must stay below 0.1"
        )));
    }
    Ok(())
}

/// Torus position `y ∈ [0,1)^d` plus integer winding `k`; the lift is `y + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedState {
    pub y: Vec<f64>,
    pub k: Vec<i64>,
    pub t: f64,
}

impl LiftedState {
    /// State whose lift is `x`.
    pub fn from_lift(x: &[f64]) -> Self {
        let mut s = LiftedState {
            y: x.to_vec(),
            k: vec![0; x.len()],
            t: 0.0,
        };
        s.wrap();
        s
    }

    pub fn lift(&self) -> Vec<f64> {
        self.y.iter().zip(&self.k).map(|(y, k)| y + *k as f64).collect()
    }

    #[inline]
    pub fn lift_at(&self, i: usize) -> f64 {
        self.y[i] + self.k[i] as f64
    }

    /// Moves `y` back into `[0,1)^d`, adjusting the winding.
    #[inline]
    pub fn wrap(&mut self) {
        for (y, k) in self.y.iter_mut().zip(self.k.iter_mut()) {
            let f = y.floor();
            if f != 0.0 {
                *y -= f;
                *k += f as i64;
            }
            if *y >= 1.0 {
                *y -= 1.0;
                *k += 1;
            }
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.y.iter().all(|v| v.is_finite())
    }
}

/// Recorded states of one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPath {
    pub d: usize,
    pub states: Vec<LiftedState>,
}

impl LiftedPath {
    pub fn first(&self) -> &LiftedState {
        &self.states[0]
    }

    pub fn last(&self) -> &LiftedState {
        self.states.last().expect("paths hold at least the start state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Physical lift `ε (y + k)` of every recorded state.
    pub fn physical(&self, eps: f64) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.lift().into_iter().map(|v| eps * v).collect())
            .collect()
    }
}

/// One-step integrator with reusable buffers.
pub struct Stepper<'a> {
    spec: &'a ProblemSpec,
    eps: f64,
    h: f64,
    sqrt_h: f64,
    scheme: Scheme,
    pub(crate) drift: Vec<f64>,
    pub(crate) sigma: Vec<f64>,
    dsigma: Vec<f64>,
    pub(crate) dw: Vec<f64>,
    sigma_const: bool,
    prev: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a ProblemSpec, eps: f64, h: f64, scheme: Scheme) -> Self {
        let (d, m) = (spec.d(), spec.m());
        Stepper {
            spec,
            eps,
            h,
            sqrt_h: h.sqrt(),
            scheme,
            drift: vec![0.0; d],
            sigma: vec![0.0; d * m],
            dsigma: vec![0.0; d * m * d],
            dw: vec![0.0; m],
            sigma_const: spec.sigma().iter().all(|e| e.as_const().is_some()),
            prev: vec![0.0; d],
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// Brownian increments of the last step.
    pub fn increments(&self) -> &[f64] {
        &self.dw
    }

    /// `σ` at the start of the last step (row-major `d × m`).
    pub fn sigma_before(&self) -> &[f64] {
        &self.sigma
    }

    pub fn draw<R: Rng>(&mut self, rng: &mut R) {
        for w in self.dw.iter_mut() {
            *w = self.sqrt_h * normal(rng);
        }
    }

    /// Advances `s` by one step using the increments in `self.dw`.
    pub fn advance(&mut self, s: &mut LiftedState) {
        let (d, m) = (self.spec.d(), self.spec.m());
        self.spec.drift_into(&s.y, self.eps, &mut self.drift);
        self.spec.sigma_into(&s.y, &mut self.sigma);
        let milstein = self.scheme == Scheme::MilsteinDiag && !self.sigma_const;
        if milstein {
            self.spec.sigma_jacobian_into(&s.y, &mut self.dsigma);
        }
        for i in 0..d {
            let mut dx = self.drift[i] * self.h;
            for j in 0..m {
                dx += self.sigma[i * m + j] * self.dw[j];
            }
            if milstein {
                for j in 0..m {
                    let mut lj = 0.0;
                    for k in 0..d {
                        lj += self.dsigma[(i * m + j) * d + k] * self.sigma[k * m + j];
                    }
                    dx += 0.5 * lj * (self.dw[j] * self.dw[j] - self.h);
                }
            }
            s.y[i] += dx;
        }
        s.t += self.h;
        s.wrap();
    }

    pub fn step<R: Rng>(&mut self, s: &mut LiftedState, rng: &mut R) -> Result<()> {
        for (p, (y, k)) in self.prev.iter_mut().zip(s.y.iter().zip(&s.k)) {
            *p = y + *k as f64;
        }
        self.draw(rng);
        self.advance(s);
        self.guard(s)
    }

    pub(crate) fn guard(&self, s: &LiftedState) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::BlowUp {
                t: s.t,
                message: "non-finite state".into(),
                last_state: self.prev.clone(),
            });
        }
        Ok(())
    }
}

/// One path of the torus process started at the lift `x`, driven by stream
/// `index` of the master seed.
pub fn simulate_path(spec: &ProblemSpec, x: &[f64], cfg: &SimConfig, index: u64) -> Result<LiftedPath> {
    if x.len() != spec.d() {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    let mut rng = path_rng(cfg.seed, index);
    let mut stepper = Stepper::new(spec, cfg.eps, cfg.h, cfg.scheme);
    let mut s = LiftedState::from_lift(x);
    let steps = cfg.steps();
    let every = cfg.record_every.max(1);
    let mut states = Vec::with_capacity(steps / every + 2);
    states.push(s.clone());
    for n in 1..=steps {
        stepper.step(&mut s, &mut rng)?;
        if n % every == 0 || n == steps {
            states.push(s.clone());
        }
    }
    Ok(LiftedPath { d: spec.d(), states })
}

/// Path number 0 of `cfg.seed`.
pub fn simulate_lifted(spec: &ProblemSpec, x: &[f64], cfg: &SimConfig) -> Result<LiftedPath> {
    cfg.check(spec)?;
    simulate_path(spec, x, cfg, 0)
}

/// Final states of `cfg.n_paths` independent paths.
pub fn simulate_ensemble(spec: &ProblemSpec, x: &[f64], cfg: &SimConfig) -> Result<Vec<LiftedState>> {
    cfg.check(spec)?;
    let end_only = SimConfig {
        record_every: usize::MAX,
        ..cfg.clone()
    };
    par_map(cfg.n_paths, |i| simulate_path(spec, x, &end_only, i as u64).map(|p| p.last().clone()))
}

/// Physical endpoint `X^ε_t = ε·lift(X̃_{t/ε²})` with `X̃₀ = x/ε`, for each of
/// `cfg.n_paths` paths. `cfg.h` is the step of the torus process; `cfg.t` is
/// ignored in favour of `t`.
pub fn physical_endpoints(spec: &ProblemSpec, x: &[f64], t: f64, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    let eps = cfg.eps;
    if !(eps > 0.0) {
        return Err(Error::invalid("physical process needs eps > 0"));
    }
    let start: Vec<f64> = x.iter().map(|v| v / eps).collect();
    let fast = SimConfig {
        t: t / (eps * eps),
        ..cfg.clone()
    };
    let ends = simulate_ensemble(spec, &start, &fast)?;
    Ok(ends
        .into_iter()
        .map(|s| s.lift().into_iter().map(|v| eps * v).collect())
        .collect())
}

/// Ordered parallel map over `0..n`, failing on the first error in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_example, Expr, ExampleName, ExampleParams, TrigTerm};

    #[test]
    fn wrap_keeps_lift() {
        let mut s = LiftedState {
            y: vec![-0.25, 2.5, -1e-18],
            k: vec![0, 1, 0],
            t: 0.0,
        };
        let before = s.lift();
        s.wrap();
        assert!(s.y.iter().all(|&y| (0.0..1.0).contains(&y)));
        for (a, b) in before.iter().zip(s.lift()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_drift_is_exact() {
        let spec = ProblemSpec::constant(&[0.3, -0.7], 2, &[0.0; 4]).unwrap();
        let cfg = SimConfig::new(0.01, 5.0, 0.0, 1, 1);
        let p = simulate_lifted(&spec, &[0.1, 0.2], &cfg).unwrap();
        let end = p.last().lift();
        assert!((end[0] - (0.1 + 1.5)).abs() < 1e-9);
        assert!((end[1] - (0.2 - 3.5)).abs() < 1e-9);
    }

    #[test]
    fn brownian_covariance_is_identity() {
        let spec = ProblemSpec::brownian(2);
        let cfg = SimConfig::new(0.05, 1.0, 0.0, 11, 10_000);
        let ends = simulate_ensemble(&spec, &[0.5, 0.5], &cfg).unwrap();
        let lifts: Vec<Vec<f64>> = ends.iter().map(|s| s.lift()).collect();
        let summary = EnsembleSummary::from_points(&lifts, cfg.seed);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((summary.cov[i][j] - target).abs() < 0.05, "cov {i}{j} = {}", summary.cov[i][j]);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = build_example(ExampleName::Paper1, &ExampleParams::default()).unwrap();
        let cfg = SimConfig::new(0.005, 1.0, 0.25, 99, 1).with_scheme(Scheme::MilsteinDiag);
        let a = simulate_lifted(&spec, &[0.3, 0.3], &cfg).unwrap();
        let b = simulate_lifted(&spec, &[0.3, 0.3], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rebasing_start_cell_shifts_winding_only() {
        let spec = build_example(ExampleName::TaylorShear, &ExampleParams::default()).unwrap();
        let cfg = SimConfig::new(0.01, 0.5, 0.0, 5, 1);
        let a = simulate_lifted(&spec, &[0.3, 0.6], &cfg).unwrap();
        let b = simulate_lifted(&spec, &[3.3, -1.4], &cfg).unwrap();
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for i in 0..2 {
                assert!((sa.y[i] - sb.y[i]).abs() < 1e-9);
            }
            assert_eq!(sb.k[0] - sa.k[0], 3);
            assert_eq!(sb.k[1] - sa.k[1], -2);
        }
    }

    #[test]
    fn stability_bound_enforced() {
        let b = vec![Expr::trig(vec![TrigTerm::sin(&[0, 1], 50.0)]), Expr::zero()];
        let spec = ProblemSpec::brownian(2).with_b(b).unwrap();
        assert!(SimConfig::new(0.01, 1.0, 0.0, 0, 1).check(&spec).is_err());
        assert!(SimConfig::new(0.001, 1.0, 0.0, 0, 1).check(&spec).is_ok());
    }
}
