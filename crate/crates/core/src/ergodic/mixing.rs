//! Exponential decay rate of `E_x f(X̃_t) − μ(f)`.

use serde::{Deserialize, Serialize};

use super::OccupationGrid;
use crate::error::{Error, Result};
use crate::fields::{Expr, ProblemSpec};
use crate::grid::Grid;
use crate::rng::path_rng;
use crate::sde::{par_map, LiftedState, SimConfig, Stepper};
use crate::stats::{linear_fit, mean_stderr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// Fitted decay rate `ρ̂`.
    pub rate: f64,
    /// Two-standard-error band of the rate.
    pub band: (f64, f64),
    pub times: Vec<f64>,
    /// Root-mean-square over starts of `|E_x f(X̃_t) − μ(f)|`.
    pub signal: Vec<f64>,
    /// Noise level of the signal at each time.
    pub noise: Vec<f64>,
    /// Number of leading time points used in the fit.
    pub fitted: usize,
}

impl MixingReport {
    /// Corrector truncation horizon `5/ρ̂`.
    pub fn t_corr(&self) -> f64 {
        5.0 / self.rate
    }

    /// Burn-in `max(10/ρ̂, T/10)`.
    pub fn burn_in(&self, t: f64) -> f64 {
        (10.0 / self.rate).max(0.1 * t)
    }
}

/// Fits `log |E_x f(X̃_t) − μ(f)|` against `t` for starts at the centers of a
/// `starts_per_dim^d` grid, `cfg.n_paths` paths each, up to `cfg.t`. Only the
/// leading times where the signal exceeds three noise levels enter the fit.
pub fn mixing_estimate(
    spec: &ProblemSpec,
    f: &Expr,
    cfg: &SimConfig,
    mu: &OccupationGrid,
    starts_per_dim: usize,
) -> Result<MixingReport> {
    cfg.check(spec)?;
    let masks = spec.bumps();
    let mean_f = mu.expectation(f, masks);
    let starts = Grid::new(starts_per_dim.max(1), spec.d());
    let steps = cfg.steps();
    let stride = (steps / 40).max(1);
    let n_times = steps / stride;
    let n_paths = cfg.n_paths.max(2);
    // samples[start][path][time]
    let samples: Vec<Vec<f64>> = par_map(starts.len() * n_paths, |idx| {
        let cell = idx / n_paths;
        let mut rng = path_rng(cfg.seed, idx as u64);
        let mut st = Stepper::new(spec, cfg.eps, cfg.h, cfg.scheme);
        let mut s = LiftedState::from_lift(&starts.center(cell));
        let mut out = Vec::with_capacity(n_times);
        for step in 1..=n_times * stride {
            st.step(&mut s, &mut rng)?;
            if step % stride == 0 {
                out.push(f.value(&s.y, masks) - mean_f);
            }
        }
        Ok(out)
    })?;
    let mut times = Vec::with_capacity(n_times);
    let mut signal = Vec::with_capacity(n_times);
    let mut noise = Vec::with_capacity(n_times);
    for k in 0..n_times {
        let mut sq = 0.0;
        let mut var = 0.0;
        for c in 0..starts.len() {
            let col: Vec<f64> = (0..n_paths).map(|p| samples[c * n_paths + p][k]).collect();
            let (m, se) = mean_stderr(&col);
            sq += m * m;
            var += se * se;
        }
        let ns = starts.len() as f64;
        times.push(((k + 1) * stride) as f64 * cfg.h);
        signal.push((sq / ns).sqrt());
        noise.push((var / ns).sqrt());
    }
    let fitted = signal
        .iter()
        .zip(&noise)
        .take_while(|(s, n)| **s > 3.0 * **n && **s > 0.0)
        .count();
    if fitted < 3 {
        return Err(Error::NoMixing(format!(
            "signal above noise at only {fitted} time points"
        )));
    }
    let logs: Vec<f64> = signal[..fitted].iter().map(|s| s.ln()).collect();
    let (_, slope, se) = linear_fit(&times[..fitted], &logs);
    if !(slope < 0.0) {
        return Err(Error::NoMixing(format!("fitted slope {slope:.3e} is not negative")));
    }
    let rate = -slope;
    Ok(MixingReport {
        rate,
        band: (rate - 2.0 * se, rate + 2.0 * se),
        times,
        signal,
        noise,
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::estimate_invariant;
    use crate::fields::TrigTerm;

    #[test]
    fn heat_semigroup_rate() {
        let spec = ProblemSpec::brownian(1);
        let f = Expr::trig(vec![TrigTerm::cos(&[1], 1.0)]);
        let mu = OccupationGrid::from_counts(Grid::new(16, 1), vec![1; 16]).unwrap();
        let cfg = SimConfig::new(0.002, 0.2, 0.0, 8, 4000);
        let r = mixing_estimate(&spec, &f, &cfg, &mu, 4).unwrap();
        assert!(r.rate > 17.0 && r.rate < 22.0, "rate {}", r.rate);
    }

    #[test]
    fn constant_observable_has_no_signal() {
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.01, 0.5, 0.0, 8, 100);
        let mu = estimate_invariant(&spec, &SimConfig::new(0.01, 2.0, 0.0, 1, 4), 8, 0.5).unwrap();
        let err = mixing_estimate(&spec, &Expr::constant(2.0), &cfg, &mu, 2).unwrap_err();
        assert!(matches!(err, Error::NoMixing(_)));
    }
}
