//! Effective coefficients as ergodic averages over the torus process.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corrector::CorrectorField;
use crate::error::{Error, Result};
use crate::fields::{ProblemSpec, TwoScale};
use crate::linalg::sym_eigen;
use crate::rng::path_rng;
use crate::sde::{par_map, LiftedState, SimConfig, Stepper};
use crate::stats::{BatchAccumulator, MIN_BATCHES};

/// Sample sizes and horizons behind an estimate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_paths: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub h: f64,
    pub batches: usize,
    pub seed: u64,
    pub corrector_n: usize,
    pub corrector_paths: usize,
    pub t_corr: f64,
    /// Largest diagonal bias of `A` induced by Monte Carlo noise in the
    /// corrector gradient (not subtracted).
    pub gradient_noise_bias: f64,
    /// Largest jackknife standard error of an `A` entry due to corrector
    /// noise (already folded into `a_stderr`).
    pub corrector_noise: f64,
    /// Whether a flagged corrector was used on purpose.
    pub flag_overridden: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    pub d: usize,
    /// Row-major symmetric `d × d`.
    pub a: Vec<f64>,
    pub a_stderr: Vec<f64>,
    pub c: Vec<f64>,
    pub c_stderr: Vec<f64>,
    /// Constant part `∫(½∇ê·a∇ê + ∇ê·c) dμ` of `D`, when an `ê` corrector
    /// was supplied.
    pub d0: Option<f64>,
    pub d0_stderr: Option<f64>,
    pub provenance: Provenance,
}

impl EffectiveCoefficients {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.a)
    }

    pub fn a_entry(&self, i: usize, j: usize) -> (f64, f64) {
        (self.a[i * self.d + j], self.a_stderr[i * self.d + j])
    }

    /// `D(x) = d0 + f.slow(x) + ∫ f.fast dμ`, with the fast average supplied
    /// by the caller (see [`effective_d`]).
    pub fn d_at(&self, f: &TwoScale, fast_mean: f64, x: &[f64]) -> f64 {
        self.d0.unwrap_or(0.0) + f.slow(x) + fast_mean
    }
}

/// Time average of `integrand(y, out)` along `cfg.n_paths` torus paths
/// (`ε = 0`) started uniformly, after `burn_in`. Returns mean, batch-means
/// standard error and the number of batches (at least [`MIN_BATCHES`]).
pub fn ergodic_average<F>(
    spec: &ProblemSpec,
    cfg: &SimConfig,
    burn_in: f64,
    dim: usize,
    integrand: F,
) -> Result<(Vec<f64>, Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let cfg = SimConfig { eps: 0.0, ..cfg.clone() };
    cfg.check(spec)?;
    if !(burn_in >= 0.0 && burn_in < cfg.t) {
        return Err(Error::invalid("burn-in must lie in [0, T)"));
    }
    let paths = cfg.n_paths.max(1);
    let blocks_per_path = MIN_BATCHES.div_ceil(paths);
    let steps = cfg.steps();
    let burn = (burn_in / cfg.h).round() as usize;
    let kept = steps.saturating_sub(burn).max(1);
    let accs: Vec<BatchAccumulator> = par_map(paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let start: Vec<f64> = (0..spec.d()).map(|_| rng.gen::<f64>()).collect();
        let mut st = Stepper::new(spec, 0.0, cfg.h, cfg.scheme);
        let mut s = LiftedState::from_lift(&start);
        let mut acc = BatchAccumulator::new(dim);
        let mut sums = vec![0.0; dim];
        let mut weight = 0.0;
        let mut block = 0;
        let mut val = vec![0.0; dim];
        for step in 1..=steps {
            st.step(&mut s, &mut rng)?;
            if step <= burn {
                continue;
            }
            let b = ((step - burn - 1) * blocks_per_path / kept).min(blocks_per_path - 1);
            if b != block {
                acc.push_block(std::mem::replace(&mut sums, vec![0.0; dim]), weight);
                weight = 0.0;
                block = b;
            }
            integrand(&s.y, &mut val);
            for (a, v) in sums.iter_mut().zip(&val) {
                *a += v;
            }
            weight += 1.0;
        }
        acc.push_block(sums, weight);
        Ok(acc)
    })?;
    let mut all = BatchAccumulator::new(dim);
    for a in accs {
        all.merge(a);
    }
    let blocks = all.blocks();
    let (mean, se) = all.finish();
    Ok((mean, se, blocks))
}

fn jackknife_replicates(b_hat: &CorrectorField, e_hat: Option<&CorrectorField>) -> usize {
    let b = b_hat.jackknife.len();
    match e_hat {
        Some(e) if !e.jackknife.is_empty() && b > 0 => b.min(e.jackknife.len()),
        Some(e) if b == 0 => e.jackknife.len(),
        _ => b,
    }
}

/// Writes `[P a Pᵀ, P(c + a∇ê), ½∇ê·a∇ê + ∇ê·c]` with `P = I + ∇b̂`, where
/// `p` holds `∇b̂` on entry.
#[allow(clippy::too_many_arguments)]
fn coefficient_integrand(
    d: usize,
    m: usize,
    sigma: &[f64],
    a: &[f64],
    c: &[f64],
    p: &mut [f64],
    ge: Option<&[f64]>,
    out: &mut [f64],
) {
    for i in 0..d {
        p[i * d + i] += 1.0;
    }
    for i in 0..d {
        for k in 0..d {
            out[i * d + k] = (0..m)
                .map(|j| {
                    let l: f64 = (0..d).map(|q| p[i * d + q] * sigma[q * m + j]).sum();
                    let r: f64 = (0..d).map(|q| p[k * d + q] * sigma[q * m + j]).sum();
                    l * r
                })
                .sum();
        }
    }
    let mut drift = c.to_vec();
    let mut d0 = 0.0;
    if let Some(ge) = ge {
        for i in 0..d {
            let age: f64 = (0..d).map(|k| a[i * d + k] * ge[k]).sum();
            drift[i] += age;
            d0 += 0.5 * ge[i] * age + ge[i] * c[i];
        }
    }
    for i in 0..d {
        out[d * d + i] = (0..d).map(|k| p[i * d + k] * drift[k]).sum();
    }
    out[d * d + d] = d0;
}

/// `A = ∫(I+∇b̂) a (I+∇b̂)ᵀ dμ` and `C = ∫(I+∇b̂)(c + a∇ê) dμ`, plus the
/// constant part of `D` when `e_hat` is given.
///
/// Fails on flagged correctors unless `override_flag` is set, and with
/// [`Error::InconsistentCorrector`] when the symmetrized `A` has an
/// eigenvalue below minus three standard errors.
pub fn effective_ac(
    spec: &ProblemSpec,
    b_hat: &CorrectorField,
    e_hat: Option<&CorrectorField>,
    cfg: &SimConfig,
    burn_in: f64,
    override_flag: bool,
) -> Result<EffectiveCoefficients> {
    let d = spec.d();
    let m = spec.m();
    if b_hat.grid.d != d || b_hat.components != d {
        return Err(Error::invalid("b̂ corrector has the wrong shape"));
    }
    if let Some(e) = e_hat {
        if e.grid.d != d || e.components != 1 {
            return Err(Error::invalid("ê corrector has the wrong shape"));
        }
    }
    let flagged = b_hat.gradient_flag || e_hat.is_some_and(|e| e.gradient_flag);
    if flagged && !override_flag {
        return Err(Error::InconsistentCorrector(format!(
            "pathwise and finite-difference gradients disagree on {:.1}% of cells",
            100.0 * (1.0 - b_hat.agreement.min(e_hat.map_or(1.0, |e| e.agreement)))
        )));
    }
    let dd = d * d;
    let half = dd + d + 1;
    let reps = jackknife_replicates(b_hat, e_hat);
    // [A, C, d0] for the full corrector, then for each replicate
    let integrand = |y: &[f64], out: &mut [f64]| {
        let mut sigma = vec![0.0; d * m];
        let mut a = vec![0.0; dd];
        let mut c = vec![0.0; d];
        let mut p = vec![0.0; dd];
        let mut ge = vec![0.0; d];
        spec.sigma_into(y, &mut sigma);
        spec.diffusion_into(y, &mut a);
        spec.c_into(y, &mut c);
        for rep in 0..=reps {
            if rep == 0 || b_hat.jackknife.is_empty() {
                b_hat.gradient_at(y, &mut p);
            } else {
                b_hat.jackknife_gradient_at(rep - 1, y, &mut p);
            }
            if let Some(e) = e_hat {
                if rep == 0 || e.jackknife.is_empty() {
                    e.gradient_at(y, &mut ge);
                } else {
                    e.jackknife_gradient_at(rep - 1, y, &mut ge);
                }
            }
            coefficient_integrand(d, m, &sigma, &a, &c, &mut p, e_hat.map(|_| &ge[..]), &mut out[rep * half..]);
        }
    };
    let (mean, se, batches) = ergodic_average(spec, cfg, burn_in, half * (reps + 1), integrand)?;
    // batch error combined with the jackknife spread over corrector groups
    let jack: Vec<f64> = (0..half)
        .map(|q| {
            if reps < 2 {
                return 0.0;
            }
            let k = reps as f64;
            let m: f64 = (1..=reps).map(|r| mean[r * half + q]).sum::<f64>() / k;
            ((k - 1.0) / k * (1..=reps).map(|r| (mean[r * half + q] - m).powi(2)).sum::<f64>()).sqrt()
        })
        .collect();
    let total = |q: usize| (se[q].powi(2) + jack[q].powi(2)).sqrt();
    let mut a = vec![0.0; dd];
    let mut a_se = vec![0.0; dd];
    for i in 0..d {
        for k in 0..d {
            a[i * d + k] = 0.5 * (mean[i * d + k] + mean[k * d + i]);
            a_se[i * d + k] = 0.5 * (total(i * d + k) + total(k * d + i));
        }
    }
    let (eig, _) = sym_eigen(&DMatrix::from_row_slice(d, d, &a));
    let tol = 3.0 * a_se.iter().cloned().fold(0.0, f64::max) + 1e-10;
    if eig[0] < -tol {
        return Err(Error::InconsistentCorrector(format!(
            "effective diffusivity has eigenvalue {:.4e} below −{tol:.2e}",
            eig[0]
        )));
    }
    // Σ_k a_kk Var(∂_k b̂_i), averaged over cells
    let mut bias: f64 = 0.0;
    let mut abuf = vec![0.0; dd];
    for i in 0..d {
        let mut acc = 0.0;
        for cell in 0..b_hat.grid.len() {
            spec.diffusion_into(&b_hat.grid.center(cell), &mut abuf);
            for k in 0..d {
                acc += abuf[k * d + k] * b_hat.gradient_stderr[(cell * d + i) * d + k].powi(2);
            }
        }
        bias = bias.max(acc / b_hat.grid.len() as f64);
    }
    let corrector_noise = jack[..dd].iter().cloned().fold(0.0, f64::max);
    Ok(EffectiveCoefficients {
        d,
        a,
        a_stderr: a_se,
        c: mean[dd..dd + d].to_vec(),
        c_stderr: (dd..dd + d).map(total).collect(),
        d0: e_hat.map(|_| mean[dd + d]),
        d0_stderr: e_hat.map(|_| total(dd + d)),
        provenance: Provenance {
            n_paths: cfg.n_paths,
            horizon: cfg.t,
            burn_in,
            h: cfg.h,
            batches,
            seed: cfg.seed,
            corrector_n: b_hat.grid.n,
            corrector_paths: b_hat.n_paths,
            t_corr: b_hat.t_corr,
            gradient_noise_bias: bias,
            corrector_noise,
            flag_overridden: flagged,
        },
    })
}

/// `D(x) = ∫(½∇ê·a∇ê + f(x,·) + ∇ê·c) dμ` with its standard error.
/// Without `e_hat` the corrector terms vanish.
pub fn effective_d(
    spec: &ProblemSpec,
    e_hat: Option<&CorrectorField>,
    f: &TwoScale,
    x: &[f64],
    cfg: &SimConfig,
    burn_in: f64,
) -> Result<(f64, f64)> {
    let d = spec.d();
    f.validate(d, spec.bumps().len())?;
    if x.len() != d {
        return Err(Error::invalid("evaluation point has wrong dimension"));
    }
    if e_hat.is_none() && !f.has_fast() {
        return Ok((f.slow(x), 0.0));
    }
    let masks = spec.bumps();
    let reps = e_hat.map_or(0, |e| e.jackknife.len());
    let integrand = |y: &[f64], out: &mut [f64]| {
        let fast = f.fast.as_ref().map_or(0.0, |e| e.value(y, masks));
        out.iter_mut().for_each(|v| *v = fast);
        if let Some(e) = e_hat {
            let mut a = vec![0.0; d * d];
            let mut c = vec![0.0; d];
            let mut ge = vec![0.0; d];
            spec.diffusion_into(y, &mut a);
            spec.c_into(y, &mut c);
            for rep in 0..=reps {
                if rep == 0 {
                    e.gradient_at(y, &mut ge);
                } else {
                    e.jackknife_gradient_at(rep - 1, y, &mut ge);
                }
                for i in 0..d {
                    let age: f64 = (0..d).map(|k| a[i * d + k] * ge[k]).sum();
                    out[rep] += 0.5 * ge[i] * age + ge[i] * c[i];
                }
            }
        }
    };
    let (mean, se, _) = ergodic_average(spec, cfg, burn_in, reps + 1, integrand)?;
    let mut var = se[0].powi(2);
    if reps >= 2 {
        let k = reps as f64;
        let m = mean[1..].iter().sum::<f64>() / k;
        var += (k - 1.0) / k * mean[1..].iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let se = var.sqrt();
    Ok((mean[0] + f.slow(x), se))
}

/// `A` from the long-time displacement covariance
/// `Cov(lift X̃_T − lift X̃_{burn_in}) / (T − burn_in)` of `cfg.n_paths` torus
/// paths started uniformly (`ε = 0`). Needs no corrector, so it stays usable
/// when pathwise Jacobians are too heavy-tailed; `c` holds the mean
/// displacement rate, which vanishes under centering. Standard errors come
/// from the spread over paths.
pub fn effective_a_displacement(spec: &ProblemSpec, cfg: &SimConfig, burn_in: f64) -> Result<EffectiveCoefficients> {
    let cfg = SimConfig { eps: 0.0, ..cfg.clone() };
    cfg.check(spec)?;
    if !(burn_in >= 0.0 && burn_in < cfg.t) {
        return Err(Error::invalid("burn-in must lie in [0, T)"));
    }
    if cfg.n_paths < 2 {
        return Err(Error::invalid("displacement covariance needs at least two paths"));
    }
    let d = spec.d();
    let steps = cfg.steps();
    let burn = (burn_in / cfg.h).round() as usize;
    let tau = (steps - burn) as f64 * cfg.h;
    let disp: Vec<Vec<f64>> = par_map(cfg.n_paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let start: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let mut st = Stepper::new(spec, 0.0, cfg.h, cfg.scheme);
        let mut s = LiftedState::from_lift(&start);
        let mut origin = s.lift();
        for step in 1..=steps {
            st.step(&mut s, &mut rng)?;
            if step == burn {
                origin = s.lift();
            }
        }
        Ok(s.lift().iter().zip(&origin).map(|(a, b)| a - b).collect())
    })?;
    let n = disp.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| disp.iter().map(|v| v[i]).sum::<f64>() / n).collect();
    let mut a = vec![0.0; d * d];
    let mut a_se = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let q: Vec<f64> = disp.iter().map(|v| (v[i] - mean[i]) * (v[k] - mean[k]) / tau).collect();
            let (m, se) = crate::stats::mean_stderr(&q);
            a[i * d + k] = m * n / (n - 1.0);
            a_se[i * d + k] = se;
        }
    }
    let c_se: Vec<f64> = (0..d)
        .map(|i| (a[i * d + i].max(0.0) / (tau * n)).sqrt())
        .collect();
    Ok(EffectiveCoefficients {
        d,
        a,
        a_stderr: a_se,
        c: mean.iter().map(|m| m / tau).collect(),
        c_stderr: c_se,
        d0: None,
        d0_stderr: None,
        provenance: Provenance {
            n_paths: cfg.n_paths,
            horizon: cfg.t,
            burn_in,
            h: cfg.h,
            batches: cfg.n_paths,
            seed: cfg.seed,
            t_corr: f64::NAN,
            ..Provenance::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::CorrectorKind;
    use crate::fields::{Expr, TrigTerm};

    #[test]
    fn brownian_motion_has_identity_diffusivity() {
        let spec = ProblemSpec::brownian(2);
        let zero = CorrectorField::zero(8, 2, CorrectorKind::Vector);
        let cfg = SimConfig::new(0.01, 5.0, 0.0, 4, 40);
        let eff = effective_ac(&spec, &zero, None, &cfg, 0.0, false).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((eff.a[i * 2 + k] - expect).abs() < 1e-12);
            }
            assert_eq!(eff.c[i], 0.0);
        }
        assert!(eff.provenance.batches >= MIN_BATCHES);
    }

    #[test]
    fn displacement_covariance_of_brownian_motion() {
        let spec = ProblemSpec::brownian(2);
        let cfg = SimConfig::new(0.05, 10.0, 0.0, 8, 2000);
        let eff = effective_a_displacement(&spec, &cfg, 1.0).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let expect = if i == k { 1.0 } else { 0.0 };
                let (v, se) = eff.a_entry(i, k);
                assert!((v - expect).abs() < 4.0 * se, "A[{i}{k}] = {v} ± {se}");
            }
        }
    }

    #[test]
    fn slow_only_functional_is_exact() {
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.01, 1.0, 0.0, 1, 4);
        let f = TwoScale::linear(vec![3.0]);
        assert_eq!(effective_d(&spec, None, &f, &[0.5], &cfg, 0.0).unwrap(), (1.5, 0.0));
    }

    #[test]
    fn mean_zero_fast_part_averages_out() {
        let spec = ProblemSpec::brownian(1);
        let cfg = SimConfig::new(0.01, 20.0, 0.0, 2, 40);
        let f = TwoScale::fast(Expr::trig(vec![TrigTerm::cos(&[1], 1.0)]));
        let (v, se) = effective_d(&spec, None, &f, &[0.0], &cfg, 0.0).unwrap();
        assert!(v.abs() < 4.0 * se, "{v} ± {se}");
    }

    #[test]
    fn flagged_corrector_needs_override() {
        let spec = ProblemSpec::brownian(1);
        let mut f = CorrectorField::zero(8, 1, CorrectorKind::Vector);
        f.gradient_flag = true;
        f.agreement = 0.5;
        let cfg = SimConfig::new(0.01, 1.0, 0.0, 1, 20);
        assert!(matches!(
            effective_ac(&spec, &f, None, &cfg, 0.0, false),
            Err(Error::InconsistentCorrector(_))
        ));
        assert!(effective_ac(&spec, &f, None, &cfg, 0.0, true).unwrap().provenance.flag_overridden);
    }

    #[test]
    fn exact_b_hat_with_replicated_e_hat() {
        let spec = ProblemSpec::brownian(1);
        let zero = CorrectorField::zero(64, 1, CorrectorKind::Vector);
        let mut e_hat = crate::fk::cosine_corrector_1d(2.0, 64);
        e_hat.jackknife = vec![e_hat.gradients.clone(); 4];
        let cfg = SimConfig::new(0.01, 20.0, 0.0, 5, 20);
        let eff = effective_ac(&spec, &zero, Some(&e_hat), &cfg, 0.0, false).unwrap();
        let d0 = eff.d0.unwrap();
        let exact = 1.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((d0 - exact).abs() < 4.0 * eff.d0_stderr.unwrap() + 0.01, "{d0} vs {exact}");
    }
}
