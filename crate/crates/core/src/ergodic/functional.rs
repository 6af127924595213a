//! Path functionals of the rescaled process.

use crate::error::{Error, Result};
use crate::fields::{ProblemSpec, TwoScale};
use crate::rng::path_rng;
use crate::sde::{par_map, LiftedState, SimConfig, Stepper};

/// Samples of `∫₀ᵗ f(X^ε_s, X^ε_s/ε) ds`, one per path, with
/// `X^ε_s = ε·lift(X̃_{s/ε²})` and `X̃₀ = x/ε`. The torus process uses
/// step `cfg.h`, i.e. physical step `ε²h`; the integral is trapezoidal.
pub fn averaged_functional(
    spec: &ProblemSpec,
    f: &TwoScale,
    x: &[f64],
    eps: f64,
    t: f64,
    cfg: &SimConfig,
) -> Result<Vec<f64>> {
    let d = spec.d();
    f.validate(d, spec.bumps().len())?;
    if x.len() != d {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    if !(eps > 0.0) || !(t >= 0.0) {
        return Err(Error::invalid("need eps > 0 and t >= 0"));
    }
    if f.is_constant() {
        return Ok(vec![f.constant * t; cfg.n_paths]);
    }
    let fast = SimConfig {
        t: t / (eps * eps),
        eps,
        ..cfg.clone()
    };
    fast.check(spec)?;
    let steps = fast.steps();
    let dt = eps * eps * cfg.h;
    let masks = spec.bumps();
    let start: Vec<f64> = x.iter().map(|v| v / eps).collect();
    par_map(cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let mut st = Stepper::new(spec, eps, cfg.h, cfg.scheme);
        let mut s = LiftedState::from_lift(&start);
        let mut phys = vec![0.0; d];
        let mut eval = |s: &LiftedState| {
            for (i, v) in phys.iter_mut().enumerate() {
                *v = eps * s.lift_at(i);
            }
            f.eval(&phys, &s.y, masks)
        };
        let mut total = 0.5 * eval(&s);
        for step in 1..=steps {
            st.step(&mut s, &mut rng)?;
            let w = if step == steps { 0.5 } else { 1.0 };
            total += w * eval(&s);
        }
        Ok(total * dt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_integrand_gives_time() {
        let spec = ProblemSpec::brownian(2);
        let cfg = SimConfig::new(0.01, 1.0, 0.5, 1, 5);
        let v = averaged_functional(&spec, &TwoScale::constant(1.0), &[0.0, 0.0], 0.5, 0.7, &cfg).unwrap();
        assert!(v.iter().all(|&s| s == 0.7));
    }

    #[test]
    fn slow_linear_functional_of_brownian_motion() {
        // ∫₀¹ W ds has mean x and variance 1/3
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.01, 1.0, 0.5, 9, 4000);
        let v = averaged_functional(&spec, &TwoScale::linear(vec![1.0]), &[0.2], 0.5, 1.0, &cfg).unwrap();
        let (m, se) = crate::stats::mean_stderr(&v);
        assert!((m - 0.2).abs() < 4.0 * se);
        let var = v.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((var - 1.0 / 3.0).abs() < 0.04, "{var}");
    }
}
