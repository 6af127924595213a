//! C^∞ bump masks on the torus.
//!
//! A mask vanishes on a union of closed disks ("holes") and equals one outside
//! slightly larger disks. The transition uses the classical smoothstep built
//! from `q(t) = exp(-1/t)`.

use serde::{Deserialize, Serialize};

use super::partials::Partials;
use crate::error::{Error, Result};

/// One hole of a mask: zero within `radius` of `center`, one beyond
/// `radius * (1 + width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hole {
    pub center: Vec<f64>,
    pub radius: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpMask {
    pub holes: Vec<Hole>,
}

impl BumpMask {
    pub fn new(holes: Vec<Hole>) -> Self {
        BumpMask { holes }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for (i, h) in self.holes.iter().enumerate() {
            if h.center.len() != d {
                return Err(Error::invalid(format!(
                    "hole {i}: center has dimension {}, expected {d}",
                    h.center.len()
                )));
            }
            if !(h.radius > 0.0 && h.width > 0.0) {
                return Err(Error::invalid(format!("hole {i}: radius and width must be positive")));
            }
            // keeps the transition inside the injectivity radius of the torus
            if h.radius * (1.0 + h.width) > 0.5 {
                return Err(Error::invalid(format!(
                    "hole {i}: outer radius {} exceeds 1/2",
                    h.radius * (1.0 + h.width)
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.partials(x, &[]).value()
    }

    pub(crate) fn partials(&self, x: &[f64], axes: &[usize]) -> Partials {
        let n = axes.len();
        let mut acc = Partials::constant(n, 1.0);
        for h in &self.holes {
            let mut r2 = 0.0;
            for (xi, ci) in x.iter().zip(&h.center) {
                let dl = min_image(xi - ci);
                r2 += dl * dl;
            }
            let outer = h.radius * (1.0 + h.width);
            if r2 >= outer * outer {
                continue;
            }
            if r2 <= h.radius * h.radius {
                return Partials::zero(n);
            }
            // ρ = |δ| with δ the minimal-image displacement
            let mut sq = Partials::zero(n);
            for (axis, (xi, ci)) in x.iter().zip(&h.center).enumerate() {
                let dl = Partials::coordinate(axes, axis, min_image(xi - ci));
                sq.add_assign(&dl.mul(&dl));
            }
            let rho = sq.compose(&power_derivs(sq.value(), 0.5, n));
            let factor = rho.compose(&smoothstep_derivs(rho.value(), h.radius, outer, n));
            acc = acc.mul(&factor);
        }
        acc
    }
}

/// Reduce a coordinate difference to `[-1/2, 1/2)`.
#[inline]
pub fn min_image(dx: f64) -> f64 {
    dx - (dx + 0.5).floor()
}

/// Euclidean distance on the unit torus.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = min_image(x - y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Derivatives of `u ↦ u^p` at `u`, orders `0..=n`.
pub(crate) fn power_derivs(u: f64, p: f64, n: usize) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut coef = 1.0;
    for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
        *slot = coef * u.powf(p - k as f64);
        coef *= p - k as f64;
    }
    out
}

/// Derivatives of `u ↦ φ((u - lo)/(hi - lo))`, orders `0..=n`, where φ is the
/// smoothstep `q(t)/(q(t) + q(1-t))`.
pub(crate) fn smoothstep_derivs(u: f64, lo: f64, hi: f64, n: usize) -> [f64; 5] {
    let span = hi - lo;
    let phi = profile_derivs((u - lo) / span);
    let mut out = [0.0; 5];
    let mut s = 1.0;
    for k in 0..=n {
        out[k] = phi[k] / s;
        s *= span;
    }
    out
}

/// Below this `t`, `exp(-1/t)` and all its derivatives are zero in `f64`.
const Q_CUTOFF: f64 = 1.0 / 700.0;

/// `q^{(k)}(t) = q(t) P_k(1/t)` with `P_{k+1}(u) = u² (P_k(u) − P_k'(u))`.
fn q_derivs(t: f64) -> [f64; 5] {
    if t <= Q_CUTOFF {
        return [0.0; 5];
    }
    let u = 1.0 / t;
    let q = (-u).exp();
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u2 * u2;
    [
        q,
        q * u2,
        q * (u4 - 2.0 * u3),
        q * (u4 * u2 - 6.0 * u4 * u + 6.0 * u4),
        q * (u4 * u4 - 12.0 * u4 * u3 + 36.0 * u4 * u2 - 24.0 * u4 * u),
    ]
}

/// Value and first four derivatives of the smoothstep profile at `t`.
pub(crate) fn profile_derivs(t: f64) -> [f64; 5] {
    if t <= 0.0 {
        return [0.0; 5];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    let a = q_derivs(t);
    let bq = q_derivs(1.0 - t);
    let mut s = [0.0; 5];
    for k in 0..5 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s[k] = a[k] + sign * bq[k];
    }
    // φ S = A, differentiated with Leibniz
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut phi = [0.0; 5];
    for n in 0..5 {
        let mut acc = a[n];
        for k in 1..=n {
            acc -= BINOM[n][k] * s[k] * phi[n - k];
        }
        phi[n] = acc / s[0];
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_endpoints_and_symmetry() {
        assert_eq!(profile_derivs(0.0)[0], 0.0);
        assert_eq!(profile_derivs(1.0)[0], 1.0);
        let a = profile_derivs(0.3);
        let b = profile_derivs(0.7);
        assert!((a[0] + b[0] - 1.0).abs() < 1e-14);
        assert!((a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn profile_derivatives_match_differences() {
        let h = 1e-5;
        for &t in &[0.1, 0.35, 0.5, 0.8] {
            let p = profile_derivs(t);
            let pp = profile_derivs(t + h);
            let pm = profile_derivs(t - h);
            for k in 0..4 {
                let fd = (pp[k] - pm[k]) / (2.0 * h);
                let scale = p[k + 1].abs().max(1.0);
                assert!((fd - p[k + 1]).abs() / scale < 1e-6, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn zero_inside_one_outside() {
        let m = BumpMask::new(vec![Hole {
            center: vec![0.25, 0.25],
            radius: 0.1,
            width: 1.0,
        }]);
        assert_eq!(m.value(&[0.25, 0.3]), 0.0);
        assert_eq!(m.value(&[0.25, 0.35]), 0.0);
        assert_eq!(m.value(&[0.25, 0.46]), 1.0);
        let mid = m.value(&[0.25, 0.40]);
        assert!(mid > 0.0 && mid < 1.0);
        // periodic through the identification
        assert_eq!(m.value(&[1.25, -0.7]), m.value(&[0.25, 0.3]));
    }
}
