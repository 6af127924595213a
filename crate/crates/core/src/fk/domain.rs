//! Bounded physical domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ball (smooth boundary, the default) or axis-aligned box (corners are a
/// mild violation of boundary regularity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Domain::Ball { center, radius }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Box { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Domain::Ball { center, radius } => {
                if center.len() != d || !(*radius > 0.0) {
                    return Err(Error::invalid("ball needs d coordinates and a positive radius"));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::invalid("box needs d coordinates with lo < hi"));
                }
            }
        }
        Ok(())
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                let r = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                r - radius
            }
            Domain::Box { lo, hi } => {
                let mut outside = 0.0f64;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..x.len() {
                    let q = (lo[k] - x[k]).max(x[k] - hi[k]);
                    outside += q.max(0.0).powi(2);
                    inside = inside.max(q.min(0.0));
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
        }
    }

    /// Open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) < 0.0
    }

    /// Nearest boundary point.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius } => {
                let r = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                if r == 0.0 {
                    let mut p = center.clone();
                    p[0] += radius;
                    return p;
                }
                x.iter().zip(center).map(|(a, c)| c + (a - c) * radius / r).collect()
            }
            Domain::Box { lo, hi } => {
                let mut p: Vec<f64> = x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect();
                if self.contains(x) {
                    // move the coordinate closest to a face onto it
                    let (mut best, mut k_best, mut to_hi) = (f64::INFINITY, 0, false);
                    for k in 0..x.len() {
                        for (dist, up) in [(x[k] - lo[k], false), (hi[k] - x[k], true)] {
                            if dist < best {
                                best = dist;
                                k_best = k;
                                to_hi = up;
                            }
                        }
                    }
                    p[k_best] = if to_hi { hi[k_best] } else { lo[k_best] };
                }
                p
            }
        }
    }

    /// Outward unit normal at the boundary point nearest to `x`.
    pub fn normal(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Ball { center, .. } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if r == 0.0 {
                    let mut n = vec![0.0; x.len()];
                    n[0] = 1.0;
                    return n;
                }
                v.into_iter().map(|a| a / r).collect()
            }
            Domain::Box { lo, hi } => {
                let mut n = vec![0.0; x.len()];
                let (mut best, mut k_best, mut sign) = (f64::INFINITY, 0, 1.0);
                for k in 0..x.len() {
                    for (dist, s) in [((x[k] - lo[k]).abs(), -1.0), ((hi[k] - x[k]).abs(), 1.0)] {
                        if dist < best {
                            best = dist;
                            k_best = k;
                            sign = s;
                        }
                    }
                }
                n[k_best] = sign;
                n
            }
        }
    }

    /// Deterministic sample of interior points for side-condition checks.
    pub fn sample_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
        };
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut i| {
                (0..d)
                    .map(|k| {
                        let j = i % per_axis;
                        i /= per_axis;
                        lo[k] + (hi[k] - lo[k]) * (j as f64 + 0.5) / per_axis as f64
                    })
                    .collect::<Vec<f64>>()
            })
            .filter(|x| self.contains(x))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_geometry() {
        let b = Domain::ball(vec![0.0, 0.0], 1.0);
        assert!(b.contains(&[0.5, 0.5]));
        assert!(!b.contains(&[1.0, 0.1]));
        let p = b.project(&[0.3, 0.4]);
        assert!(b.signed_distance(&p).abs() < 1e-10);
        assert!((b.signed_distance(&[0.0, 0.5]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_geometry() {
        let b = Domain::Box {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 2.0],
        };
        assert!((b.signed_distance(&[0.0, 0.0]) + 1.0).abs() < 1e-15);
        assert!((b.signed_distance(&[2.0, 0.0]) - 1.0).abs() < 1e-15);
        for x in [[0.9, 0.0], [0.0, 1.5], [3.0, 3.0], [-0.2, -0.95]] {
            let p = b.project(&x);
            assert!(b.signed_distance(&p).abs() < 1e-10, "{x:?} -> {p:?}");
        }
        assert_eq!(b.normal(&[0.0, 1.9]), vec![0.0, 1.0]);
    }

    #[test]
    fn samples_lie_inside() {
        let b = Domain::ball(vec![0.0, 0.0], 1.0);
        let pts = b.sample_points(10);
        assert!(!pts.is_empty() && pts.iter().all(|p| b.contains(p)));
    }
}
