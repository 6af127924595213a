//! First exit of the ε-process or the homogenized process from a domain.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::domain::Domain;
use crate::error::{Error, Result};
use crate::ergodic::EffectiveCoefficients;
use crate::fields::ProblemSpec;
use crate::linalg::{sym_eigen, sym_sqrt};
use crate::rng::{normal, path_rng};
use crate::sde::{check_step, par_map, LiftedState, SimConfig, Stepper};
use crate::stats::mean_stderr;

/// Largest tolerated fraction of paths still inside at `T_max`.
pub const MAX_CAPPED_FRACTION: f64 = 0.01;

/// Brownian motion with drift `X_t = x + Ct + A^{1/2}W_t` and a potential
/// `D(x) = d_constant + d_linear·x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitModel {
    pub d: usize,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub d_constant: f64,
    pub d_linear: Vec<f64>,
    /// Row-major `A^{1/2}`.
    #[serde(skip)]
    root: Vec<f64>,
    /// Most negative eigenvalue of `A`, clipped to zero in the square root.
    #[serde(skip)]
    pub clipped: f64,
}

impl LimitModel {
    pub fn new(a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let d = c.len();
        if a.len() != d * d || d == 0 {
            return Err(Error::invalid("A must be d × d and C of length d"));
        }
        if a.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite effective coefficients"));
        }
        let (root, clipped) = sym_sqrt(&DMatrix::from_row_slice(d, d, &a));
        Ok(LimitModel {
            d,
            a,
            c,
            d_constant: 0.0,
            d_linear: vec![0.0; d],
            root: root.transpose().as_slice().to_vec(),
            clipped,
        })
    }

    pub fn from_coefficients(coeffs: &EffectiveCoefficients) -> Result<Self> {
        Self::new(coeffs.a.clone(), coeffs.c.clone())
    }

    pub fn with_potential(mut self, constant: f64, linear: Vec<f64>) -> Result<Self> {
        if !linear.is_empty() && linear.len() != self.d {
            return Err(Error::invalid("linear part of D needs d coefficients"));
        }
        self.d_constant = constant;
        self.d_linear = if linear.is_empty() { vec![0.0; self.d] } else { linear };
        Ok(self)
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.d_constant + self.d_linear.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Smallest eigenvalue of `A`.
    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigen(&DMatrix::from_row_slice(self.d, self.d, &self.a)).0[0]
    }

    fn quadratic(&self, n: &[f64]) -> f64 {
        let d = self.d;
        let mut q = 0.0;
        for i in 0..d {
            for k in 0..d {
                q += n[i] * self.a[i * d + k] * n[k];
            }
        }
        q
    }

    pub(crate) fn step<R: Rng>(&self, x: &mut [f64], dt: f64, rng: &mut R, xi: &mut [f64]) {
        let d = self.d;
        for v in xi.iter_mut() {
            *v = normal(rng) * dt.sqrt();
        }
        for i in 0..d {
            let mut dx = self.c[i] * dt;
            for k in 0..d {
                dx += self.root[i * d + k] * xi[k];
            }
            x[i] += dx;
        }
    }
}

/// Which process leaves the domain.
#[derive(Clone, Copy, Debug)]
pub enum Dynamics<'a> {
    /// `X^ε_t = ε·lift(X̃_{t/ε²})`; `cfg.h` is the step of the torus process.
    Eps { spec: &'a ProblemSpec, eps: f64 },
    /// The homogenized process; `cfg.h` is a physical step.
    Limit(&'a LimitModel),
}

impl Dynamics<'_> {
    fn dim(&self) -> usize {
        match self {
            Dynamics::Eps { spec, .. } => spec.d(),
            Dynamics::Limit(m) => m.d,
        }
    }

    fn eps(&self) -> Option<f64> {
        match self {
            Dynamics::Eps { eps, .. } => Some(*eps),
            Dynamics::Limit(_) => None,
        }
    }
}

/// One path up to its exit time.
#[derive(Clone, Debug)]
pub(crate) struct ExitPath {
    pub tau: f64,
    pub exit: Vec<f64>,
    /// `∫₀^τ rate ds` by the trapezoid rule.
    pub log_weight: f64,
    pub capped: bool,
}

/// Probability that a Brownian bridge with normal variance `var` crosses a
/// flat boundary between two interior points at distances `d0`, `d1`.
fn bridge_crossing(d0: f64, d1: f64, var: f64) -> f64 {
    if var <= 0.0 {
        0.0
    } else {
        (-2.0 * d0 * d1 / var).exp()
    }
}

/// Walks one path from `x` until it leaves `domain` or `t_max` passes.
/// `rate(x, y)` is integrated along the way, `y` being the torus position
/// (equal to `x` for the limit process).
pub(crate) fn walk<F>(
    dynamics: &Dynamics,
    domain: &Domain,
    x: &[f64],
    h: f64,
    t_max: f64,
    seed: u64,
    index: u64,
    rate: &F,
) -> Result<ExitPath>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let d = x.len();
    let mut rng = path_rng(seed, index);
    let mut pos = x.to_vec();
    let mut prev = x.to_vec();
    let mut a = vec![0.0; d * d];
    let mut xi = vec![0.0; d];
    let mut mid = vec![0.0; d];
    let (dt, steps) = match dynamics {
        Dynamics::Eps { eps, .. } => (eps * eps * h, (t_max / (eps * eps * h)).ceil() as usize),
        Dynamics::Limit(_) => (h, (t_max / h).ceil() as usize),
    };
    let mut state = match dynamics {
        Dynamics::Eps { eps, .. } => Some(LiftedState::from_lift(&x.iter().map(|v| v / eps).collect::<Vec<_>>())),
        Dynamics::Limit(_) => None,
    };
    let mut stepper = match dynamics {
        Dynamics::Eps { spec, eps } => Some(Stepper::new(spec, *eps, h, Default::default())),
        Dynamics::Limit(_) => None,
    };
    let y_of = |s: &Option<LiftedState>, p: &[f64]| -> Vec<f64> {
        match s {
            Some(s) => s.y.clone(),
            None => p.to_vec(),
        }
    };
    let mut f0 = rate(&pos, &y_of(&state, &pos));
    let mut log_weight = 0.0;
    let mut t = 0.0;
    for _ in 0..steps {
        prev.copy_from_slice(&pos);
        let d0 = -domain.signed_distance(&prev);
        match dynamics {
            Dynamics::Eps { spec, eps } => {
                let s = state.as_mut().unwrap();
                spec.diffusion_into(&s.y, &mut a);
                stepper.as_mut().unwrap().step(s, &mut rng)?;
                for (p, l) in pos.iter_mut().zip(s.lift()) {
                    *p = eps * l;
                }
            }
            Dynamics::Limit(m) => {
                a.copy_from_slice(&m.a);
                m.step(&mut pos, dt, &mut rng, &mut xi);
            }
        }
        let sd1 = domain.signed_distance(&pos);
        let f1 = rate(&pos, &y_of(&state, &pos));
        if sd1 >= 0.0 {
            let theta = d0 / (d0 + sd1);
            for k in 0..d {
                mid[k] = prev[k] + theta * (pos[k] - prev[k]);
            }
            let f_exit = f0 + theta * (f1 - f0);
            log_weight += 0.5 * theta * dt * (f0 + f_exit);
            return Ok(ExitPath {
                tau: t + theta * dt,
                exit: domain.project(&mid),
                log_weight,
                capped: false,
            });
        }
        // the path may have left and come back within the step
        let n = domain.normal(&pos);
        let mut var = 0.0;
        for i in 0..d {
            for k in 0..d {
                var += n[i] * a[i * d + k] * n[k];
            }
        }
        let p = bridge_crossing(d0, -sd1, var * dt);
        if p > 0.0 && rng.gen::<f64>() < p {
            for k in 0..d {
                mid[k] = 0.5 * (prev[k] + pos[k]);
            }
            log_weight += 0.25 * dt * (f0 + 0.5 * (f0 + f1));
            return Ok(ExitPath {
                tau: t + 0.5 * dt,
                exit: domain.project(&mid),
                log_weight,
                capped: false,
            });
        }
        log_weight += 0.5 * dt * (f0 + f1);
        f0 = f1;
        t += dt;
    }
    Ok(ExitPath {
        tau: t,
        exit: pos,
        log_weight,
        capped: true,
    })
}

/// Runs `cfg.n_paths` exits; `cfg.t` is the cap `T_max` in physical time.
pub(crate) fn run_exits<F>(
    dynamics: &Dynamics,
    domain: &Domain,
    x: &[f64],
    cfg: &SimConfig,
    rate: F,
) -> Result<Vec<ExitPath>>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let d = dynamics.dim();
    domain.validate(d)?;
    if x.len() != d {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    if !domain.contains(x) {
        return Err(Error::invalid("start point must lie inside the domain"));
    }
    if !(cfg.h > 0.0 && cfg.t > 0.0) {
        return Err(Error::invalid("exit simulation needs h > 0 and T_max > 0"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::invalid("exit simulation needs at least one path"));
    }
    if let Dynamics::Eps { spec, eps } = dynamics {
        if !(*eps > 0.0) {
            return Err(Error::invalid("the eps-process needs eps > 0"));
        }
        check_step(spec, cfg.h, *eps)?;
    }
    par_map(cfg.n_paths, |p| walk(dynamics, domain, x, cfg.h, cfg.t, cfg.seed, p as u64, &rate))
}

pub(crate) fn capped_fraction(paths: &[ExitPath]) -> f64 {
    paths.iter().filter(|p| p.capped).count() as f64 / paths.len().max(1) as f64
}

/// Exit times and exit points of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSamples {
    pub tau: Vec<f64>,
    pub exit_points: Vec<Vec<f64>>,
    pub capped_fraction: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: Option<f64>,
}

impl ExitSamples {
    /// Mean exit time with its standard error (capped paths count at `T_max`).
    pub fn mean_tau(&self) -> (f64, f64) {
        mean_stderr(&self.tau)
    }
}

/// Exit-time Monte Carlo with linear interpolation to the crossing and a
/// Brownian-bridge test for excursions inside a step.
pub fn exit_time_mc(dynamics: Dynamics, domain: &Domain, x: &[f64], cfg: &SimConfig) -> Result<ExitSamples> {
    let paths = run_exits(&dynamics, domain, x, cfg, |_, _| 0.0)?;
    let capped = capped_fraction(&paths);
    if capped > MAX_CAPPED_FRACTION {
        return Err(Error::ExitCap {
            capped_fraction: capped,
            t_max: cfg.t,
        });
    }
    Ok(ExitSamples {
        tau: paths.iter().map(|p| p.tau).collect(),
        exit_points: paths.into_iter().map(|p| p.exit).collect(),
        capped_fraction: capped,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        eps: dynamics.eps(),
    })
}

pub(crate) fn is_degenerate_exit(model: &LimitModel, domain: &Domain, exit: &[f64], tol: f64) -> bool {
    model.quadratic(&domain.normal(exit)) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm(d: usize) -> LimitModel {
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            a[i * d + i] = 1.0;
        }
        LimitModel::new(a, vec![0.0; d]).unwrap()
    }

    #[test]
    fn interval_mean_exit_time() {
        let m = bm(1);
        let cfg = SimConfig::new(1e-3, 20.0, 0.0, 3, 4000);
        let s = exit_time_mc(Dynamics::Limit(&m), &Domain::interval(-1.0, 1.0), &[0.0], &cfg).unwrap();
        let (mean, se) = s.mean_tau();
        assert!((mean - 1.0).abs() < 3.0 * se + 0.005, "{mean} ± {se}");
        assert!(s.exit_points.iter().all(|p| (p[0].abs() - 1.0).abs() < 1e-10));
    }

    #[test]
    fn disk_mean_exit_time() {
        let m = bm(2);
        let cfg = SimConfig::new(1e-3, 20.0, 0.0, 5, 2000);
        let s = exit_time_mc(Dynamics::Limit(&m), &Domain::ball(vec![0.0, 0.0], 1.0), &[0.0, 0.0], &cfg).unwrap();
        let (mean, se) = s.mean_tau();
        assert!((mean - 0.5).abs() < 3.0 * se + 0.005, "{mean} ± {se}");
    }

    #[test]
    fn tight_cap_is_reported() {
        let m = bm(1);
        let cfg = SimConfig::new(1e-2, 0.05, 0.0, 1, 200);
        let err = exit_time_mc(Dynamics::Limit(&m), &Domain::interval(-1.0, 1.0), &[0.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::ExitCap { .. }));
    }

    #[test]
    fn eps_process_is_reproducible() {
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.01, 20.0, 0.0, 9, 50);
        let dynamics = Dynamics::Eps { spec: &spec, eps: 0.25 };
        let a = exit_time_mc(dynamics, &Domain::interval(-1.0, 1.0), &[0.0], &cfg).unwrap();
        let b = exit_time_mc(dynamics, &Domain::interval(-1.0, 1.0), &[0.0], &cfg).unwrap();
        assert_eq!(a, b);
    }
}
