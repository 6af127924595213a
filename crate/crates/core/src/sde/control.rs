//! The controlled ODE `ż = b + εc − ½ (∂_k σ_ij) σ_kj + σ u`.

use super::{LiftedPath, LiftedState};
use crate::error::{Error, Result};
use crate::fields::ProblemSpec;

/// Stratonovich-corrected drift `b + εc − ½ Σ_jk (∂_k σ_ij) σ_kj` plus `σ u`.
pub fn controlled_field(spec: &ProblemSpec, z: &[f64], u: &[f64], eps: f64, out: &mut [f64]) {
    let (d, m) = (spec.d(), spec.m());
    let mut sigma = vec![0.0; d * m];
    let mut dsigma = vec![0.0; d * m * d];
    spec.drift_into(z, eps, out);
    spec.sigma_into(z, &mut sigma);
    spec.sigma_jacobian_into(z, &mut dsigma);
    for i in 0..d {
        for j in 0..m {
            let mut corr = 0.0;
            for k in 0..d {
                corr += dsigma[(i * m + j) * d + k] * sigma[k * m + j];
            }
            out[i] += -0.5 * corr + sigma[i * m + j] * u[j];
        }
    }
}

/// One classical RK4 step of the controlled field with constant control `u`.
pub(crate) fn rk4_step(spec: &ProblemSpec, s: &mut LiftedState, u: &[f64], eps: f64, h: f64) {
    let d = spec.d();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    controlled_field(spec, &s.y, u, eps, &mut k1);
    for i in 0..d {
        tmp[i] = s.y[i] + 0.5 * h * k1[i];
    }
    controlled_field(spec, &tmp, u, eps, &mut k2);
    for i in 0..d {
        tmp[i] = s.y[i] + 0.5 * h * k2[i];
    }
    controlled_field(spec, &tmp, u, eps, &mut k3);
    for i in 0..d {
        tmp[i] = s.y[i] + h * k3[i];
    }
    controlled_field(spec, &tmp, u, eps, &mut k4);
    for i in 0..d {
        s.y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    s.t += h;
    s.wrap();
}

/// Integrates the controlled ODE from the lift `x` with the piecewise-constant
/// control `u[n]` on `[n Δ, (n+1) Δ)`, `Δ = control_dt`, using RK4 steps of
/// size `h` (which must divide `Δ`). Every step is recorded.
pub fn control_ode(
    spec: &ProblemSpec,
    x: &[f64],
    u: &[Vec<f64>],
    control_dt: f64,
    eps: f64,
    h: f64,
) -> Result<LiftedPath> {
    if x.len() != spec.d() {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    if u.iter().any(|v| v.len() != spec.m()) {
        return Err(Error::invalid("controls must have m components"));
    }
    let ratio = control_dt / h;
    let sub = ratio.round();
    if !(h > 0.0) || sub < 1.0 || (ratio - sub).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid("h must divide the control step"));
    }
    let sub = sub as usize;
    let mut s = LiftedState::from_lift(x);
    let mut states = vec![s.clone()];
    for un in u {
        for _ in 0..sub {
            let before = s.lift();
            rk4_step(spec, &mut s, un, eps, h);
            if s.y.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    t: s.t,
                    message: "non-finite control trajectory".into(),
                    last_state: before,
                });
            }
            states.push(s.clone());
        }
    }
    Ok(LiftedPath { d: spec.d(), states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpMask, Expr, Hole};

    #[test]
    fn unit_noise_follows_control() {
        let spec = ProblemSpec::brownian(2);
        let u = vec![vec![1.0, 0.0]; 10];
        let p = control_ode(&spec, &[0.3, 0.4], &u, 0.1, 0.0, 0.05).unwrap();
        let end = p.last().lift();
        assert!((end[0] - 1.3).abs() < 1e-12 && (end[1] - 0.4).abs() < 1e-12);
        assert_eq!(p.last().k, vec![1, 0]);
    }

    #[test]
    fn stratonovich_correction_for_scalar_noise() {
        // σ = α I: correction −½ α ∇α
        let bumps = vec![BumpMask::new(vec![Hole {
            center: vec![0.5, 0.5],
            radius: 0.1,
            width: 1.0,
        }])];
        let a = Expr::mask(0);
        let sigma = vec![a.clone(), Expr::zero(), Expr::zero(), a.clone()];
        let spec = ProblemSpec::new(2, 2, vec![Expr::zero(); 2], vec![Expr::zero(); 2], sigma, bumps).unwrap();
        let z = [0.62, 0.55];
        let mut f = vec![0.0; 2];
        controlled_field(&spec, &z, &[0.0, 0.0], 0.0, &mut f);
        let alpha = a.value(&z, spec.bumps());
        for i in 0..2 {
            let expected = -0.5 * alpha * a.derivative(&z, i, spec.bumps());
            assert!((f[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_dividing_step() {
        let spec = ProblemSpec::brownian(1);
        assert!(control_ode(&spec, &[0.0], &[vec![1.0]], 0.1, 0.0, 0.03).is_err());
    }
}
