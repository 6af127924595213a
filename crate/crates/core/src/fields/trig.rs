use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::partials::Partials;

const TWO_PI: f64 = 2.0 * PI;

/// One term `c cos(2π k·x) + s sin(2π k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TrigTerm {
    pub fn cos(k: &[i64], c: f64) -> Self {
        TrigTerm {
            k: k.to_vec(),
            cos: c,
            sin: 0.0,
        }
    }

    pub fn sin(k: &[i64], s: f64) -> Self {
        TrigTerm {
            k: k.to_vec(),
            cos: 0.0,
            sin: s,
        }
    }
}

/// Trigonometric polynomial on the unit torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPolynomial {
    pub terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        TrigPolynomial { terms }
    }

    pub fn dimension(&self) -> Option<usize> {
        self.terms.first().map(|t| t.k.len())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let th = phase(&t.k, x);
                t.cos * th.cos() + t.sin * th.sin()
            })
            .sum()
    }

    /// Exact partial derivative along `axis`, again a trigonometric polynomial.
    pub fn derivative(&self, axis: usize) -> TrigPolynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.k[axis] != 0)
            .map(|t| {
                let f = TWO_PI * t.k[axis] as f64;
                TrigTerm {
                    k: t.k.clone(),
                    cos: f * t.sin,
                    sin: -f * t.cos,
                }
            })
            .collect();
        TrigPolynomial { terms }
    }

    /// Mean over the torus (the `k = 0` cosine coefficients).
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.k.iter().all(|&k| k == 0))
            .map(|t| t.cos)
            .sum()
    }

    pub fn max_wavenumber(&self) -> i64 {
        self.terms
            .iter()
            .flat_map(|t| t.k.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn partials(&self, x: &[f64], axes: &[usize]) -> Partials {
        let n = axes.len();
        let mut out = Partials::zero(n);
        for t in &self.terms {
            let (s, c) = phase(&t.k, x).sin_cos();
            // derivatives of c_k cos θ + s_k sin θ with respect to θ, cyclic in the order
            let cyc = [
                t.cos * c + t.sin * s,
                -t.cos * s + t.sin * c,
                -t.cos * c - t.sin * s,
                t.cos * s - t.sin * c,
            ];
            for mask in 0..out.len() {
                let mut factor = 1.0;
                let mut ord = 0;
                for (pos, &a) in axes.iter().enumerate() {
                    if mask & (1 << pos) != 0 {
                        factor *= TWO_PI * t.k[a] as f64;
                        ord += 1;
                    }
                }
                if factor != 0.0 {
                    out.set(mask, out.get(mask) + factor * cyc[ord % 4]);
                }
            }
        }
        out
    }
}

/// `2π k·x` reduced to `[-π, π]`, so large lifts lose no accuracy.
#[inline]
fn phase(k: &[i64], x: &[f64]) -> f64 {
    let kx = dot(k, x);
    TWO_PI * (kx - kx.round())
}

#[inline]
fn dot(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_extremum() {
        let p = TrigPolynomial::new(vec![TrigTerm::sin(&[1, 0], 1.0)]);
        let j = p.partials(&[0.25, 0.0], &[0]);
        assert!((j.value() - 1.0).abs() < 1e-15);
        assert!(j.get(1).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_partials() {
        let p = TrigPolynomial::new(vec![
            TrigTerm { k: vec![1, -2], cos: 0.3, sin: -1.2 },
            TrigTerm { k: vec![0, 3], cos: 2.0, sin: 0.5 },
        ]);
        let x = [0.17, 0.61];
        let d = p.derivative(1).value(&x);
        let via = p.partials(&x, &[1]).get(1);
        assert!((d - via).abs() < 1e-12);
    }

    #[test]
    fn integer_shift_is_exact_period() {
        let p = TrigPolynomial::new(vec![TrigTerm { k: vec![2, 1], cos: 0.7, sin: 0.2 }]);
        let a = p.value(&[0.3, 0.4]);
        let b = p.value(&[1.3, -2.6]);
        assert!((a - b).abs() < 1e-12);
    }
}
