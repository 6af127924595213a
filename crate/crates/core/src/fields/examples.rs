//! Fixture problems.
//!
//! `paper1` is the cellular-drift example with coefficients vanishing on a
//! union of disks; `paper2`–`paper4` are parameterized reconstructions of the
//! remaining degenerate examples, chosen so that the range of the effective
//! diffusivity is full, trivial, and one-dimensional along `(1, 2)`
//! respectively. `taylor_shear` and `oned_harmonic` have closed-form
//! correctors.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{drift_from_density, BumpMask, Expr, Hole, Metadata, ProblemSpec, TrigTerm, UnaryFn};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleName {
    Paper1,
    Paper2,
    Paper3,
    Paper4,
    TaylorShear,
    OnedHarmonic,
}

impl ExampleName {
    pub const ALL: [ExampleName; 6] = [
        ExampleName::Paper1,
        ExampleName::Paper2,
        ExampleName::Paper3,
        ExampleName::Paper4,
        ExampleName::TaylorShear,
        ExampleName::OnedHarmonic,
    ];

    /// Rank of the effective diffusivity for dimension `d`.
    pub fn expected_rank(&self, d: usize) -> usize {
        match self {
            ExampleName::Paper3 => 0,
            ExampleName::Paper4 => 1,
            _ => d,
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleName::Paper1 => "paper1",
            ExampleName::Paper2 => "paper2",
            ExampleName::Paper3 => "paper3",
            ExampleName::Paper4 => "paper4",
            ExampleName::TaylorShear => "taylor_shear",
            ExampleName::OnedHarmonic => "oned_harmonic",
        };
        f.write_str(s)
    }
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleName::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown example {s:?}")))
    }
}

/// Optional knobs of the fixtures. Unset fields take the documented defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleParams {
    /// Hole layout (`paper1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holes: Option<Vec<Hole>>,
    /// Drift strength: shear amplitude for `taylor_shear`, relaxation rate
    /// for `paper3`/`paper4`, stream amplitude for `paper2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Dimension for `paper1` (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

fn identity_times(d: usize, e: &Expr) -> Vec<Expr> {
    (0..d * d)
        .map(|k| if k / d == k % d { e.clone() } else { Expr::zero() })
        .collect()
}

fn from_density(d: usize, kappa: Expr, h: Vec<Expr>, bumps: Vec<BumpMask>) -> Result<ProblemSpec> {
    let a2 = Expr::product(vec![kappa.clone(), kappa.clone()]);
    let a = identity_times(d, &a2);
    let p = Expr::constant(1.0);
    let b = drift_from_density(d, &p, &a, &h, &bumps)?;
    ProblemSpec::new(d, d, b, vec![Expr::zero(); d], identity_times(d, &kappa), bumps)?.with_metadata(Metadata {
        p: Some(p),
        h: Some(h),
    })
}

pub fn build_example(name: ExampleName, params: &ExampleParams) -> Result<ProblemSpec> {
    match name {
        ExampleName::Paper1 => paper1(params),
        ExampleName::Paper2 => paper2(params),
        ExampleName::Paper3 => paper3(params),
        ExampleName::Paper4 => paper4(params),
        ExampleName::TaylorShear => taylor_shear(params.amplitude.unwrap_or(1.0)),
        ExampleName::OnedHarmonic => oned_harmonic(),
    }
}

/// `σ = α I`, `2b = ∇(α²) + sin(2πx₁) e_d`; Lebesgue measure is invariant.
fn paper1(params: &ExampleParams) -> Result<ProblemSpec> {
    let d = params.d.unwrap_or(2);
    if d < 2 {
        return Err(Error::invalid("paper1 needs d >= 2"));
    }
    let holes = params.holes.clone().unwrap_or_else(|| {
        [0.25, 0.75]
            .iter()
            .map(|&c| Hole {
                center: vec![c; d],
                radius: 0.15,
                width: 1.0,
            })
            .collect()
    });
    for (i, h) in holes.iter().enumerate() {
        let x1 = h.center.first().copied().unwrap_or(0.0);
        let to_lines = [0.0, 0.5]
            .iter()
            .map(|l| super::min_image(x1 - l).abs())
            .fold(f64::INFINITY, f64::min);
        if to_lines <= h.radius {
            return Err(Error::invalid(format!(
                "hole {i} violates the placement condition: its zero set meets {{x1 = 0}} or {{x1 = 1/2}}"
            )));
        }
    }
    let bumps = vec![BumpMask::new(holes)];
    let alpha = Expr::mask(0);
    let mut h = vec![Expr::zero(); d * d];
    let mut e = vec![0; d];
    e[0] = 1;
    h[d - 1] = Expr::trig(vec![TrigTerm::cos(&e, 1.0 / (2.0 * PI))]);
    h[(d - 1) * d] = Expr::trig(vec![TrigTerm::cos(&e, -1.0 / (2.0 * PI))]);
    from_density(d, alpha, h, bumps)
}

/// Noise `sin²(πx₁) sin²(πx₂)`, which vanishes exactly on the cell faces
/// `{x₁ = 0}` and `{x₂ = 0}`, with the cellular drift of the stream matrix
/// `H₁₂ = (sin 2πx₁ − sin 2πx₂)/2π`: every orbit of the drift crosses the
/// noisy region, so the support is the whole torus.
fn paper2(params: &ExampleParams) -> Result<ProblemSpec> {
    if params.holes.is_some() {
        return Err(Error::invalid("paper2 takes no hole layout"));
    }
    let amp = params.amplitude.unwrap_or(1.0);
    // sin²(πx_k) = (1 − cos 2πx_k)/2
    let window = |k: &[i64]| Expr::sum(vec![Expr::constant(0.5), Expr::trig(vec![TrigTerm::cos(k, -0.5)])]);
    let kappa = Expr::product(vec![window(&[1, 0]), window(&[0, 1])]);
    let s = amp / (2.0 * PI);
    let h12 = Expr::trig(vec![TrigTerm::sin(&[1, 0], s), TrigTerm::sin(&[0, 1], -s)]);
    let h = vec![Expr::zero(), h12.clone(), Expr::scale(-1.0, h12), Expr::zero()];
    from_density(2, kappa, h, vec![])
}

/// Noise amplitude of the examples whose support is a proper subset; kept
/// small so that one Euler step cannot jump across the noiseless gaps.
const LOCALIZED_NOISE: f64 = 0.3;

/// Noise on a central disk and outside a surrounding annulus, drift pulling
/// everything towards `(½, ½)`: the invariant measure lives on the disk.
fn paper3(params: &ExampleParams) -> Result<ProblemSpec> {
    let lambda = params.amplitude.unwrap_or(2.0);
    let hole = |r: f64, w: f64| {
        BumpMask::new(vec![Hole {
            center: vec![0.5, 0.5],
            radius: r,
            width: w,
        }])
    };
    let bumps = vec![hole(0.04, 3.0), hole(0.28, 0.6)];
    let kappa = Expr::sum(vec![
        Expr::constant(1.0),
        Expr::scale(-1.0, Expr::mask(0)),
        Expr::mask(1),
    ]);
    let s = lambda / (2.0 * PI);
    let b = vec![
        Expr::trig(vec![TrigTerm::sin(&[1, 0], s)]),
        Expr::trig(vec![TrigTerm::sin(&[0, 1], s)]),
    ];
    let sigma = identity_times(2, &Expr::scale(LOCALIZED_NOISE, kappa));
    ProblemSpec::new(2, 2, b, vec![Expr::zero(); 2], sigma, bumps)
}

/// Drift contracting onto the closed geodesic `2x₁ − x₂ ∈ Z`, noise only near
/// it and near the repelling geodesic: the support is a strip winding along
/// `(1, 2)`.
fn paper4(params: &ExampleParams) -> Result<ProblemSpec> {
    let lambda = params.amplitude.unwrap_or(1.0);
    let phi = Expr::trig(vec![TrigTerm::cos(&[2, -1], 1.0)]);
    let kappa = Expr::sum(vec![
        Expr::apply(UnaryFn::SmoothStep { lo: 0.3, hi: 0.6 }, phi.clone()),
        Expr::apply(UnaryFn::SmoothStep { lo: 0.2, hi: 0.5 }, Expr::scale(-1.0, phi)),
    ]);
    let b = vec![
        Expr::trig(vec![TrigTerm::sin(&[2, -1], -2.0 * lambda)]),
        Expr::trig(vec![TrigTerm::sin(&[2, -1], lambda)]),
    ];
    let sigma = identity_times(2, &Expr::scale(LOCALIZED_NOISE, kappa));
    ProblemSpec::new(2, 2, b, vec![Expr::zero(); 2], sigma, vec![])
}

/// `σ = I`, `b = (β sin 2πx₂, 0)`.
fn taylor_shear(beta: f64) -> Result<ProblemSpec> {
    let b = vec![Expr::trig(vec![TrigTerm::sin(&[0, 1], beta)]), Expr::zero()];
    ProblemSpec::brownian(2).with_b(b)?.with_metadata(Metadata {
        p: Some(Expr::constant(1.0)),
        h: Some(vec![
            Expr::zero(),
            Expr::trig(vec![TrigTerm::cos(&[0, 1], -beta / PI)]),
            Expr::trig(vec![TrigTerm::cos(&[0, 1], beta / PI)]),
            Expr::zero(),
        ]),
    })
}

/// `d = 1`, `a = 2 + sin 2πx`, `b = ½ a′`.
fn oned_harmonic() -> Result<ProblemSpec> {
    let a = Expr::sum(vec![Expr::constant(2.0), Expr::trig(vec![TrigTerm::sin(&[1], 1.0)])]);
    let sigma = Expr::apply(UnaryFn::Sqrt, a);
    let b = Expr::trig(vec![TrigTerm::cos(&[1], PI)]);
    ProblemSpec::new(1, 1, vec![b], vec![Expr::zero()], vec![sigma], vec![])?.with_metadata(Metadata {
        p: Some(Expr::constant(1.0)),
        h: Some(vec![Expr::zero()]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{adjoint_residual, torus_mean};

    #[test]
    fn paper1_drift_matches_closed_form() {
        let spec = build_example(ExampleName::Paper1, &ExampleParams::default()).unwrap();
        let masks = spec.bumps();
        let alpha = spec.alpha_expr();
        let x = [0.25, 0.7];
        let h = 1e-5;
        let a2 = |y: [f64; 2]| alpha.value(&y, masks).powi(2);
        let d2 = (a2([x[0], x[1] + h]) - a2([x[0], x[1] - h])) / (2.0 * h);
        let expected = 0.5 * d2 + 0.5 * (2.0 * PI * x[0]).sin();
        let got = spec.b()[1].value(&x, masks);
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn placement_condition_enforced() {
        let params = ExampleParams {
            holes: Some(vec![Hole {
                center: vec![0.45, 0.5],
                radius: 0.1,
                width: 0.5,
            }]),
            ..Default::default()
        };
        let err = build_example(ExampleName::Paper1, &params).unwrap_err();
        assert!(err.to_string().contains("placement"));
    }

    #[test]
    fn density_fixtures_are_stationary_and_centered() {
        for name in [ExampleName::Paper1, ExampleName::Paper2, ExampleName::TaylorShear] {
            let spec = build_example(name, &ExampleParams::default()).unwrap();
            let r = adjoint_residual(&spec, &Expr::constant(1.0), 64);
            assert!(r < 1e-3, "{name}: residual {r}");
            for bi in spec.b() {
                let mean = torus_mean(bi, 2, 256, spec.bumps());
                assert!(mean.abs() < 1e-6, "{name}: mean {mean}");
            }
        }
        let spec = build_example(ExampleName::OnedHarmonic, &ExampleParams::default()).unwrap();
        assert!(adjoint_residual(&spec, &Expr::constant(1.0), 64) < 1e-3);
    }

    #[test]
    fn names_round_trip() {
        for n in ExampleName::ALL {
            assert_eq!(n.to_string().parse::<ExampleName>().unwrap(), n);
        }
    }
}
