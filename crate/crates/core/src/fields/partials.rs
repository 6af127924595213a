//! Mixed partial derivatives along a short list of axes.
//!
//! A [`Partials`] value for axes `[a_0, .., a_{n-1}]` stores, for every subset
//! `s` of the positions `0..n` (encoded as a bitmask), the mixed derivative
//! `∂_{a_i : i ∈ s} f`. Entry `0` is the value. Sums, products (Leibniz rule
//! as a subset convolution) and compositions with scalar functions (Faà di
//! Bruno over set partitions) all act entrywise on this representation, which
//! keeps every field derivative analytic without allocating.

use std::sync::OnceLock;

pub const MAX_AXES: usize = 4;
const SLOTS: usize = 1 << MAX_AXES;

#[derive(Clone, Copy, Debug)]
pub struct Partials {
    n: usize,
    v: [f64; SLOTS],
}

impl Partials {
    pub fn zero(n: usize) -> Self {
        debug_assert!(n <= MAX_AXES);
        Partials { n, v: [0.0; SLOTS] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.v[0] = c;
        p
    }

    /// The coordinate function `x ↦ x_axis − shift` evaluated at `value`.
    pub fn coordinate(axes: &[usize], axis: usize, value: f64) -> Self {
        let mut p = Self::constant(axes.len(), value);
        for (pos, &a) in axes.iter().enumerate() {
            if a == axis {
                p.v[1 << pos] = 1.0;
            }
        }
        p
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.v[0]
    }

    /// Derivative along all requested axes.
    #[inline]
    pub fn top(&self) -> f64 {
        self.v[self.len() - 1]
    }

    #[inline]
    pub fn get(&self, mask: usize) -> f64 {
        self.v[mask]
    }

    #[inline]
    pub fn set(&mut self, mask: usize, x: f64) {
        self.v[mask] = x;
    }

    pub fn is_zero(&self) -> bool {
        self.v[..self.len()].iter().all(|&x| x == 0.0)
    }

    pub fn add_assign(&mut self, other: &Partials) {
        for s in 0..self.len() {
            self.v[s] += other.v[s];
        }
    }

    pub fn scale(&mut self, c: f64) {
        for s in 0..self.len() {
            self.v[s] *= c;
        }
    }

    /// Leibniz rule: `(fg)_s = Σ_{t ⊆ s} f_t g_{s∖t}`.
    pub fn mul(&self, other: &Partials) -> Partials {
        let mut out = Partials::zero(self.n);
        for s in 0..self.len() {
            let mut acc = 0.0;
            let mut t = s;
            loop {
                acc += self.v[t] * other.v[s ^ t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            out.v[s] = acc;
        }
        out
    }

    /// Composition `g ∘ f` where `g_derivs[k] = g^{(k)}(f)` for `k = 0..=n`.
    pub fn compose(&self, g_derivs: &[f64]) -> Partials {
        let mut out = Partials::zero(self.n);
        out.v[0] = g_derivs[0];
        let table = partition_table();
        for s in 1..self.len() {
            let mut acc = 0.0;
            for partition in &table[s] {
                let mut prod = g_derivs[partition.len()];
                if prod == 0.0 {
                    continue;
                }
                for &block in partition {
                    prod *= self.v[block as usize];
                }
                acc += prod;
            }
            out.v[s] = acc;
        }
        out
    }

    /// Drop the last axis: entry `s` of the result is entry `s ∪ {last}` of
    /// `self`. Used for fields defined as a partial derivative of another.
    pub fn shift_last(&self) -> Partials {
        debug_assert!(self.n >= 1);
        let n = self.n - 1;
        let hi = 1 << n;
        let mut out = Partials::zero(n);
        for s in 0..(1 << n) {
            out.v[s] = self.v[s | hi];
        }
        out
    }
}

type Partition = Vec<u8>;

/// All set partitions of each bitmask `s < 2^MAX_AXES`, each partition given
/// as a list of block masks.
fn partition_table() -> &'static Vec<Vec<Partition>> {
    static TABLE: OnceLock<Vec<Vec<Partition>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..SLOTS as u8).map(partitions_of).collect())
}

fn partitions_of(s: u8) -> Vec<Partition> {
    if s == 0 {
        return vec![Vec::new()];
    }
    let lowest = s & s.wrapping_neg();
    let rest = s ^ lowest;
    let mut out = Vec::new();
    let mut t = rest;
    loop {
        let block = lowest | t;
        for mut tail in partitions_of(rest ^ t) {
            tail.insert(0, block);
            out.push(tail);
        }
        if t == 0 {
            break;
        }
        t = (t - 1) & rest;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = [0u8, 1, 3, 7, 15].iter().map(|&s| partitions_of(s).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15]);
    }

    #[test]
    fn product_of_coordinates() {
        // f = x0 * x1 at (2, 3), axes [0, 1]
        let axes = [0, 1];
        let x = Partials::coordinate(&axes, 0, 2.0);
        let y = Partials::coordinate(&axes, 1, 3.0);
        let p = x.mul(&y);
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.get(1), 3.0);
        assert_eq!(p.get(2), 2.0);
        assert_eq!(p.top(), 1.0);
    }

    #[test]
    fn exp_of_square() {
        // g(x) = exp(x^2), third derivative at x = 0.5: exp(x^2)(8x^3 + 12x)
        let axes = [0, 0, 0];
        let x = Partials::coordinate(&axes, 0, 0.5);
        let sq = x.mul(&x);
        let e = sq.value().exp();
        let g = sq.compose(&[e, e, e, e]);
        let expected = e * (8.0 * 0.125 + 12.0 * 0.5);
        assert!((g.top() - expected).abs() < 1e-12);
    }
}
