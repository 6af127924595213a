//! Closed-form scalar fields on the torus.
//!
//! Fields are small expression trees over trigonometric polynomials and bump
//! masks. Every node knows its analytic mixed partials (see
//! [`Partials`](super::partials::Partials)); no numerical differentiation is
//! involved anywhere.

use serde::{Deserialize, Serialize};

use super::bump::{power_derivs, smoothstep_derivs, BumpMask};
use super::partials::{Partials, MAX_AXES};
use super::trig::{TrigPolynomial, TrigTerm};
use crate::error::{Error, Result};

/// Smooth scalar functions that can be applied to a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fn", deny_unknown_fields)]
pub enum UnaryFn {
    Recip,
    Exp,
    Log,
    Sqrt,
    /// `φ((u - lo)/(hi - lo))`: zero for `u ≤ lo`, one for `u ≥ hi`.
    SmoothStep { lo: f64, hi: f64 },
}

impl UnaryFn {
    fn derivs(&self, u: f64, n: usize) -> [f64; 5] {
        let mut out = [0.0; 5];
        match *self {
            UnaryFn::Recip => {
                let inv = 1.0 / u;
                let mut c = inv;
                for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
                    *slot = c;
                    c *= -((k + 1) as f64) * inv;
                }
            }
            UnaryFn::Exp => {
                let e = u.exp();
                out.iter_mut().take(n + 1).for_each(|s| *s = e);
            }
            UnaryFn::Log => {
                out[0] = u.ln();
                let inv = 1.0 / u;
                let mut c = inv;
                for k in 1..=n {
                    out[k] = c;
                    c *= -(k as f64) * inv;
                }
            }
            UnaryFn::Sqrt => out = power_derivs(u, 0.5, n),
            UnaryFn::SmoothStep { lo, hi } => out = smoothstep_derivs(u, lo, hi, n),
        }
        out
    }

    fn apply(&self, u: f64) -> f64 {
        self.derivs(u, 0)[0]
    }
}

/// A scalar field. Masks are referenced by index into the owning problem's
/// mask list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const(f64),
    Trig(TrigPolynomial),
    Mask(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Scale { factor: f64, of: Box<Expr> },
    Apply { func: UnaryFn, of: Box<Expr> },
    Partial { axis: usize, of: Box<Expr> },
}

impl Default for Expr {
    fn default() -> Self {
        Expr::Const(0.0)
    }
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn trig(terms: Vec<TrigTerm>) -> Expr {
        Expr::Trig(TrigPolynomial::new(terms))
    }

    pub fn mask(index: usize) -> Expr {
        Expr::Mask(index)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Trig(t) if t.terms.is_empty() => Some(0.0),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn sum(items: Vec<Expr>) -> Expr {
        let mut c = 0.0;
        let mut rest = Vec::new();
        for e in items {
            match e {
                Expr::Sum(inner) => {
                    for i in inner {
                        match i.as_const() {
                            Some(v) => c += v,
                            None => rest.push(i),
                        }
                    }
                }
                other => match other.as_const() {
                    Some(v) => c += v,
                    None => rest.push(other),
                },
            }
        }
        if c != 0.0 {
            rest.push(Expr::Const(c));
        }
        match rest.len() {
            0 => Expr::zero(),
            1 => rest.pop().unwrap(),
            _ => Expr::Sum(rest),
        }
    }

    pub fn product(items: Vec<Expr>) -> Expr {
        let mut c = 1.0;
        let mut rest = Vec::new();
        for e in items {
            match e.as_const() {
                Some(v) => c *= v,
                None => match e {
                    Expr::Scale { factor, of } => {
                        c *= factor;
                        rest.push(*of);
                    }
                    Expr::Product(inner) => rest.extend(inner),
                    other => rest.push(other),
                },
            }
        }
        if c == 0.0 {
            return Expr::zero();
        }
        let body = match rest.len() {
            0 => return Expr::Const(c),
            1 => rest.pop().unwrap(),
            _ => Expr::Product(rest),
        };
        Expr::scale(c, body)
    }

    pub fn scale(factor: f64, e: Expr) -> Expr {
        if factor == 1.0 {
            return e;
        }
        if factor == 0.0 {
            return Expr::zero();
        }
        match e {
            Expr::Const(c) => Expr::Const(factor * c),
            Expr::Scale { factor: f, of } => Expr::scale(factor * f, *of),
            Expr::Trig(mut t) => {
                for term in &mut t.terms {
                    term.cos *= factor;
                    term.sin *= factor;
                }
                Expr::Trig(t)
            }
            other => Expr::Scale {
                factor,
                of: Box::new(other),
            },
        }
    }

    pub fn apply(func: UnaryFn, e: Expr) -> Expr {
        match e.as_const() {
            Some(c) => Expr::Const(func.apply(c)),
            None => Expr::Apply {
                func,
                of: Box::new(e),
            },
        }
    }

    /// Partial derivative along `axis`, pushed through sums, products and
    /// trigonometric polynomials so that only masks and applied functions keep
    /// an explicit derivative node.
    pub fn partial(e: &Expr, axis: usize) -> Expr {
        match e {
            Expr::Const(_) => Expr::zero(),
            Expr::Trig(t) => {
                let d = t.derivative(axis);
                if d.terms.is_empty() {
                    Expr::zero()
                } else {
                    Expr::Trig(d)
                }
            }
            Expr::Sum(items) => Expr::sum(items.iter().map(|i| Expr::partial(i, axis)).collect()),
            Expr::Scale { factor, of } => Expr::scale(*factor, Expr::partial(of, axis)),
            Expr::Product(items) => {
                let mut terms = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let di = Expr::partial(item, axis);
                    if di.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = items
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f.clone())
                        .collect();
                    factors.push(di);
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            other => Expr::Partial {
                axis,
                of: Box::new(other.clone()),
            },
        }
    }

    /// Maximum number of nested derivative nodes on any root-to-leaf path.
    pub fn derivative_depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Trig(_) | Expr::Mask(_) => 0,
            Expr::Sum(v) | Expr::Product(v) => v.iter().map(Expr::derivative_depth).max().unwrap_or(0),
            Expr::Scale { of, .. } | Expr::Apply { of, .. } => of.derivative_depth(),
            Expr::Partial { of, .. } => 1 + of.derivative_depth(),
        }
    }

    pub fn validate(&self, d: usize, n_masks: usize) -> Result<()> {
        match self {
            Expr::Const(c) => {
                if !c.is_finite() {
                    return Err(Error::invalid("non-finite constant"));
                }
            }
            Expr::Trig(t) => {
                for term in &t.terms {
                    if term.k.len() != d {
                        return Err(Error::invalid(format!(
                            "trig wavevector {:?} has dimension {}, expected {d}",
                            term.k,
                            term.k.len()
                        )));
                    }
                }
            }
            Expr::Mask(i) => {
                if *i >= n_masks {
                    return Err(Error::invalid(format!("mask index {i} out of range")));
                }
            }
            Expr::Sum(v) | Expr::Product(v) => {
                for e in v {
                    e.validate(d, n_masks)?;
                }
            }
            Expr::Scale { of, .. } | Expr::Apply { of, .. } => of.validate(d, n_masks)?,
            Expr::Partial { axis, of } => {
                if *axis >= d {
                    return Err(Error::invalid(format!("derivative axis {axis} out of range")));
                }
                of.validate(d, n_masks)?;
            }
        }
        // value, gradient and Hessian of the field must stay within the
        // supported derivative order
        if self.derivative_depth() + 2 > MAX_AXES - 1 {
            return Err(Error::invalid("derivative nesting too deep (at most one level)"));
        }
        Ok(())
    }

    /// Mixed partials of the field at `x` along `axes`.
    pub(crate) fn partials(&self, x: &[f64], axes: &[usize], masks: &[BumpMask]) -> Partials {
        let n = axes.len();
        match self {
            Expr::Const(c) => Partials::constant(n, *c),
            Expr::Trig(t) => t.partials(x, axes),
            Expr::Mask(i) => masks[*i].partials(x, axes),
            Expr::Sum(items) => {
                let mut acc = Partials::zero(n);
                for e in items {
                    acc.add_assign(&e.partials(x, axes, masks));
                }
                acc
            }
            Expr::Product(items) => {
                let mut acc = Partials::constant(n, 1.0);
                for e in items {
                    let p = e.partials(x, axes, masks);
                    if p.is_zero() {
                        return Partials::zero(n);
                    }
                    acc = acc.mul(&p);
                }
                acc
            }
            Expr::Scale { factor, of } => {
                let mut p = of.partials(x, axes, masks);
                p.scale(*factor);
                p
            }
            Expr::Apply { func, of } => {
                let inner = of.partials(x, axes, masks);
                inner.compose(&func.derivs(inner.value(), n))
            }
            Expr::Partial { axis, of } => {
                let mut ext = [0usize; MAX_AXES];
                ext[..n].copy_from_slice(axes);
                ext[n] = *axis;
                of.partials(x, &ext[..=n], masks).shift_last()
            }
        }
    }

    pub fn value(&self, x: &[f64], masks: &[BumpMask]) -> f64 {
        self.partials(x, &[], masks).value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::bump::Hole;

    fn masks() -> Vec<BumpMask> {
        vec![BumpMask::new(vec![Hole {
            center: vec![0.5, 0.5],
            radius: 0.1,
            width: 1.5,
        }])]
    }

    /// Richardson-extrapolated central difference of `f` along `i`.
    fn fd(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
        let diff = |h: f64| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        };
        (4.0 * diff(5e-5) - diff(1e-4)) / 3.0
    }

    fn fd_check(e: &Expr, x: &[f64], masks: &[BumpMask]) {
        let d = x.len();
        for i in 0..d {
            let g = e.partials(x, &[i], masks).get(1);
            let fd_g = fd(&|y| e.value(y, masks), x, i);
            assert!((g - fd_g).abs() <= 1e-6 * g.abs().max(1.0), "grad {i}: {g} vs {fd_g}");
            for j in 0..d {
                let hij = e.partials(x, &[i, j], masks).get(3);
                let fd_h = fd(&|y| e.partials(y, &[j], masks).get(1), x, i);
                assert!((hij - fd_h).abs() <= 1e-6 * hij.abs().max(1.0), "hess {i}{j}: {hij} vs {fd_h}");
            }
        }
    }

    #[test]
    fn partial_of_squared_mask_matches_differences() {
        let m = masks();
        let a2 = Expr::product(vec![Expr::mask(0), Expr::mask(0)]);
        let e = Expr::scale(0.5, Expr::partial(&a2, 1));
        fd_check(&e, &[0.55, 0.68], &m);
        fd_check(&e, &[0.41, 0.37], &m);
    }

    #[test]
    fn composite_functions_match_differences() {
        let m = masks();
        let base = Expr::sum(vec![
            Expr::Const(2.0),
            Expr::trig(vec![TrigTerm::sin(&[1, 0], 1.0), TrigTerm::cos(&[1, 1], 0.3)]),
        ]);
        for f in [UnaryFn::Recip, UnaryFn::Exp, UnaryFn::Log, UnaryFn::Sqrt] {
            let e = Expr::apply(f, base.clone());
            fd_check(&e, &[0.13, 0.77], &m);
        }
        let step = Expr::apply(UnaryFn::SmoothStep { lo: 1.5, hi: 2.5 }, base);
        fd_check(&step, &[0.13, 0.77], &m);
    }

    #[test]
    fn simplification_pushes_derivatives_inward() {
        let t = Expr::trig(vec![TrigTerm::cos(&[1, 0], 1.0)]);
        let d = Expr::partial(&Expr::product(vec![Expr::Const(3.0), t]), 0);
        assert_eq!(d.derivative_depth(), 0);
        let d1 = Expr::partial(&Expr::Const(4.0), 1);
        assert!(d1.is_zero());
    }
}
