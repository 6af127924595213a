//! Periodic coefficient fields `b`, `c`, `σ` with analytic jets.

mod bump;
mod examples;
mod expr;
mod hormander;
mod partials;
mod schema;
mod trig;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use bump::{min_image, torus_distance, BumpMask, Hole};
pub use examples::{build_example, ExampleName, ExampleParams};
pub use expr::{Expr, UnaryFn};
pub use hormander::{hormander_masks, HormanderMasks};
pub use partials::Partials;
pub use schema::SpecDocument;
pub use trig::{TrigPolynomial, TrigTerm};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

impl Expr {
    pub fn jet(&self, x: &[f64], masks: &[BumpMask]) -> Jet {
        let d = x.len();
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![vec![0.0; d]; d];
        let value = self.value(x, masks);
        for i in 0..d {
            for j in i..d {
                let p = self.partials(x, &[i, j], masks);
                if j == i {
                    gradient[i] = p.get(1);
                }
                hessian[i][j] = p.get(3);
                hessian[j][i] = p.get(3);
            }
        }
        Jet {
            value,
            gradient,
            hessian,
        }
    }

    /// First derivative along `axis`.
    pub fn derivative(&self, x: &[f64], axis: usize, masks: &[BumpMask]) -> f64 {
        self.partials(x, &[axis], masks).get(1)
    }
}

/// Names a scalar field of a [`ProblemSpec`]. Indices are zero based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSelector {
    B(usize),
    C(usize),
    Sigma(usize, usize),
    A(usize, usize),
    P,
    Alpha,
}

impl FromStr for FieldSelector {
    type Err = Error;

    /// Parses `b_1`, `c_2`, `sigma_1_2` (or `sigma_12`), `a_1_1`, `p`, `alpha`
    /// with one-based indices.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::NoSuchField(s.to_string());
        let parts: Vec<&str> = s.split('_').collect();
        let idx = |t: &str| -> Result<usize> {
            let i: usize = t.parse().map_err(|_| bad())?;
            i.checked_sub(1).ok_or_else(bad)
        };
        let pair = |rest: &[&str]| -> Result<(usize, usize)> {
            match rest {
                [i, j] => Ok((idx(i)?, idx(j)?)),
                [ij] if ij.len() == 2 => Ok((idx(&ij[..1])?, idx(&ij[1..])?)),
                _ => Err(bad()),
            }
        };
        match parts.as_slice() {
            ["p"] => Ok(FieldSelector::P),
            ["alpha"] => Ok(FieldSelector::Alpha),
            ["b", i] => Ok(FieldSelector::B(idx(i)?)),
            ["c", i] => Ok(FieldSelector::C(idx(i)?)),
            ["sigma", rest @ ..] => pair(rest).map(|(i, j)| FieldSelector::Sigma(i, j)),
            ["a", rest @ ..] => pair(rest).map(|(i, j)| FieldSelector::A(i, j)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FieldSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSelector::B(i) => write!(f, "b_{}", i + 1),
            FieldSelector::C(i) => write!(f, "c_{}", i + 1),
            FieldSelector::Sigma(i, j) => write!(f, "sigma_{}_{}", i + 1, j + 1),
            FieldSelector::A(i, j) => write!(f, "a_{}_{}", i + 1, j + 1),
            FieldSelector::P => f.write_str("p"),
            FieldSelector::Alpha => f.write_str("alpha"),
        }
    }
}

/// Optional construction data: target invariant density and stream matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub p: Option<Expr>,
    /// Row-major `d × d` antisymmetric field.
    pub h: Option<Vec<Expr>>,
}

/// Coefficients of `dX = (b + εc) dt + σ dW` on the torus `T^d`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    d: usize,
    m: usize,
    b: Vec<Expr>,
    c: Vec<Expr>,
    /// Row-major `d × m`.
    sigma: Vec<Expr>,
    bumps: Vec<BumpMask>,
    metadata: Metadata,
    sup: OnceLock<(f64, f64)>,
}

impl ProblemSpec {
    pub fn new(
        d: usize,
        m: usize,
        b: Vec<Expr>,
        c: Vec<Expr>,
        sigma: Vec<Expr>,
        bumps: Vec<BumpMask>,
    ) -> Result<Self> {
        let spec = ProblemSpec {
            d,
            m,
            b,
            c,
            sigma,
            bumps,
            metadata: Metadata::default(),
            sup: OnceLock::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Result<Self> {
        if let Some(p) = &metadata.p {
            p.validate(self.d, self.bumps.len())?;
        }
        if let Some(h) = &metadata.h {
            if h.len() != self.d * self.d {
                return Err(Error::invalid("H must be d × d"));
            }
            for e in h {
                e.validate(self.d, self.bumps.len())?;
            }
        }
        self.metadata = metadata;
        Ok(self)
    }

    /// Replaces the drift perturbation `c`.
    pub fn with_c(mut self, c: Vec<Expr>) -> Result<Self> {
        self.c = c;
        self.sup = OnceLock::new();
        self.validate()?;
        Ok(self)
    }

    /// Replaces the drift `b`.
    pub fn with_b(mut self, b: Vec<Expr>) -> Result<Self> {
        self.b = b;
        self.sup = OnceLock::new();
        self.validate()?;
        Ok(self)
    }

    /// Standard Brownian motion on `T^d`.
    pub fn brownian(d: usize) -> Self {
        let sigma = (0..d * d)
            .map(|k| Expr::constant(if k / d == k % d { 1.0 } else { 0.0 }))
            .collect();
        ProblemSpec::new(d, d, vec![Expr::zero(); d], vec![Expr::zero(); d], sigma, vec![])
            .expect("brownian spec is valid")
    }

    /// Constant drift `v` and the given constant `σ` (row-major `d × m`).
    pub fn constant(v: &[f64], m: usize, sigma: &[f64]) -> Result<Self> {
        let d = v.len();
        if sigma.len() != d * m {
            return Err(Error::invalid("sigma must be d × m"));
        }
        ProblemSpec::new(
            d,
            m,
            v.iter().map(|&x| Expr::constant(x)).collect(),
            vec![Expr::zero(); d],
            sigma.iter().map(|&x| Expr::constant(x)).collect(),
            vec![],
        )
    }

    fn validate(&self) -> Result<()> {
        let (d, m) = (self.d, self.m);
        if d == 0 {
            return Err(Error::invalid("dimension d must be positive"));
        }
        if self.b.len() != d || self.c.len() != d {
            return Err(Error::invalid(format!("b and c need {d} components")));
        }
        if self.sigma.len() != d * m {
            return Err(Error::invalid(format!("sigma needs {d} × {m} entries")));
        }
        for mask in &self.bumps {
            mask.validate(d)?;
        }
        for e in self.b.iter().chain(&self.c).chain(&self.sigma) {
            e.validate(d, self.bumps.len())?;
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn b(&self) -> &[Expr] {
        &self.b
    }

    pub fn c(&self) -> &[Expr] {
        &self.c
    }

    pub fn sigma(&self) -> &[Expr] {
        &self.sigma
    }

    pub fn sigma_entry(&self, i: usize, j: usize) -> &Expr {
        &self.sigma[i * self.m + j]
    }

    pub fn bumps(&self) -> &[BumpMask] {
        &self.bumps
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    /// `a_ij = Σ_k σ_ik σ_jk` as an expression.
    pub fn a_expr(&self, i: usize, j: usize) -> Expr {
        Expr::sum(
            (0..self.m)
                .map(|k| Expr::product(vec![self.sigma_entry(i, k).clone(), self.sigma_entry(j, k).clone()]))
                .collect(),
        )
    }

    /// Product of all masks (one when there are none).
    pub fn alpha_expr(&self) -> Expr {
        Expr::product((0..self.bumps.len()).map(Expr::mask).collect())
    }

    pub fn field(&self, which: FieldSelector) -> Result<Expr> {
        let d = self.d;
        let missing = || Error::NoSuchField(which.to_string());
        match which {
            FieldSelector::B(i) if i < d => Ok(self.b[i].clone()),
            FieldSelector::C(i) if i < d => Ok(self.c[i].clone()),
            FieldSelector::Sigma(i, j) if i < d && j < self.m => Ok(self.sigma_entry(i, j).clone()),
            FieldSelector::A(i, j) if i < d && j < d => Ok(self.a_expr(i, j)),
            FieldSelector::P => Ok(self.metadata.p.clone().unwrap_or(Expr::constant(1.0))),
            FieldSelector::Alpha => Ok(self.alpha_expr()),
            _ => Err(missing()),
        }
    }

    pub fn drift_into(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        for i in 0..self.d {
            let mut v = self.b[i].value(x, &self.bumps);
            if eps != 0.0 && !self.c[i].is_zero() {
                v += eps * self.c[i].value(x, &self.bumps);
            }
            out[i] = v;
        }
    }

    pub fn c_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.d {
            out[i] = self.c[i].value(x, &self.bumps);
        }
    }

    /// Row-major `d × m`.
    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        for (slot, e) in out.iter_mut().zip(&self.sigma) {
            *slot = e.value(x, &self.bumps);
        }
    }

    /// `out[i * d + k] = ∂_k (b_i + ε c_i)`.
    pub fn drift_jacobian_into(&self, x: &[f64], eps: f64, out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            for k in 0..d {
                let mut v = self.b[i].derivative(x, k, &self.bumps);
                if eps != 0.0 && !self.c[i].is_zero() {
                    v += eps * self.c[i].derivative(x, k, &self.bumps);
                }
                out[i * d + k] = v;
            }
        }
    }

    /// `out[(i * m + j) * d + k] = ∂_k σ_ij`.
    pub fn sigma_jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (ij, e) in self.sigma.iter().enumerate() {
            for k in 0..d {
                out[ij * d + k] = if e.as_const().is_some() {
                    0.0
                } else {
                    e.derivative(x, k, &self.bumps)
                };
            }
        }
    }

    /// `a = σσ*`, row-major `d × d`.
    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.m);
        let mut s = vec![0.0; d * m];
        self.sigma_into(x, &mut s);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..m).map(|k| s[i * m + k] * s[j * m + k]).sum();
            }
        }
    }

    /// Grid estimates of `sup |b|` and `sup |c|` (Euclidean norm), cached.
    pub fn sup_norms(&self) -> (f64, f64) {
        *self.sup.get_or_init(|| {
            let n = if self.d <= 2 { 64 } else { 24 };
            let grid = Grid::new(n, self.d);
            let (mut sb, mut sc) = (0.0f64, 0.0f64);
            let mut v = vec![0.0; self.d];
            for x in grid.centers() {
                self.drift_into(&x, 0.0, &mut v);
                sb = sb.max(norm(&v));
                self.c_into(&x, &mut v);
                sc = sc.max(norm(&v));
            }
            (sb, sc)
        })
    }

    pub fn is_sigma_zero(&self) -> bool {
        self.sigma.iter().all(Expr::is_zero)
    }
}

impl PartialEq for ProblemSpec {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.m == other.m
            && self.b == other.b
            && self.c == other.c
            && self.sigma == other.sigma
            && self.bumps == other.bumps
            && self.metadata == other.metadata
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Analytic value, gradient and Hessian of the selected field.
pub fn eval_jet(spec: &ProblemSpec, which: &str, x: &[f64]) -> Result<Jet> {
    if x.len() != spec.d() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("point must be finite with d coordinates"));
    }
    let sel: FieldSelector = which.parse()?;
    Ok(spec.field(sel)?.jet(x, spec.bumps()))
}

/// `L f = ½ a_ij ∂_ij f + b_i ∂_i f` at `x` for a function with the given jet.
pub fn apply_generator(spec: &ProblemSpec, f: &Jet, x: &[f64]) -> f64 {
    let d = spec.d();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    spec.diffusion_into(x, &mut a);
    spec.drift_into(x, 0.0, &mut b);
    let mut out = 0.0;
    for i in 0..d {
        out += b[i] * f.gradient[i];
        for j in 0..d {
            out += 0.5 * a[i * d + j] * f.hessian[i][j];
        }
    }
    out
}

fn verification_grid(d: usize) -> Grid {
    Grid::new(if d <= 2 { 64 } else { 16 }, d)
}

/// Drift with invariant density `p`:
/// `b_i = (1/2p) Σ_j ∂_j (p a_ij + H_ij)`.
///
/// `a` and `h` are row-major `d × d`; `masks` are the masks the expressions
/// refer to.
pub fn drift_from_density(
    d: usize,
    p: &Expr,
    a: &[Expr],
    h: &[Expr],
    masks: &[BumpMask],
) -> Result<Vec<Expr>> {
    if a.len() != d * d || h.len() != d * d {
        return Err(Error::invalid("a and H must be d × d"));
    }
    let grid = verification_grid(d);
    let mut pmin = f64::INFINITY;
    let mut asym = 0.0f64;
    for x in grid.centers() {
        pmin = pmin.min(p.value(&x, masks));
        for i in 0..d {
            for j in 0..d {
                let s = h[i * d + j].value(&x, masks) + h[j * d + i].value(&x, masks);
                asym = asym.max(s.abs());
            }
        }
    }
    if !(pmin > 0.0) {
        return Err(Error::invalid(format!(
            "density not bounded below (min {pmin:.3e} on the verification grid)"
        )));
    }
    if asym > 1e-12 {
        return Err(Error::invalid(format!("H is not antisymmetric (|H + H*| = {asym:.3e})")));
    }
    let inv2p = match p.as_const() {
        Some(c) => Expr::constant(0.5 / c),
        None => Expr::apply(UnaryFn::Recip, Expr::scale(2.0, p.clone())),
    };
    let b = (0..d)
        .map(|i| {
            let terms = (0..d)
                .map(|j| {
                    let inner = Expr::sum(vec![
                        Expr::product(vec![p.clone(), a[i * d + j].clone()]),
                        h[i * d + j].clone(),
                    ]);
                    Expr::partial(&inner, j)
                })
                .collect();
            Expr::product(vec![inv2p.clone(), Expr::sum(terms)])
        })
        .collect();
    Ok(b)
}

/// `sup |L* p|` over an `n^d` grid, with `L* p = ½ ∂_ij (a_ij p) − ∂_i (b_i p)`
/// computed by Richardson-extrapolated central differences of the analytic
/// fields (steps `2e-4` and `1e-4`).
pub fn adjoint_residual(spec: &ProblemSpec, p: &Expr, n: usize) -> f64 {
    let d = spec.d();
    Grid::new(n, d)
        .centers()
        .map(|x| {
            let coarse = adjoint_fd(spec, p, &x, 2e-4);
            let fine = adjoint_fd(spec, p, &x, 1e-4);
            ((4.0 * fine - coarse) / 3.0).abs()
        })
        .fold(0.0, f64::max)
}

fn adjoint_fd(spec: &ProblemSpec, p: &Expr, x: &[f64], h: f64) -> f64 {
    let d = spec.d();
    let masks = spec.bumps();
    let mut a = vec![0.0; d * d];
    let mut bv = vec![0.0; d];
    let mut r = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut y = x.to_vec();
                y[i] += si * h;
                y[j] += sj * h;
                spec.diffusion_into(&y, &mut a);
                acc += w * a[i * d + j] * p.value(&y, masks);
            }
            r += 0.5 * acc / (4.0 * h * h);
        }
        let mut yp = x.to_vec();
        let mut ym = x.to_vec();
        yp[i] += h;
        ym[i] -= h;
        spec.drift_into(&yp, 0.0, &mut bv);
        let fp = bv[i] * p.value(&yp, masks);
        spec.drift_into(&ym, 0.0, &mut bv);
        let fm = bv[i] * p.value(&ym, masks);
        r -= (fp - fm) / (2.0 * h);
    }
    r
}

/// Midpoint-rule mean of a field over `T^d` on an `n^d` grid. Exact for
/// trigonometric polynomials with wavenumbers below `n`.
pub fn torus_mean(e: &Expr, d: usize, n: usize, masks: &[BumpMask]) -> f64 {
    let g = Grid::new(n, d);
    let s: f64 = g.centers().map(|x| e.value(&x, masks)).sum();
    s / g.len() as f64
}

/// A function `f(x, y) = constant + linear·x + fast(y)` of a slow point
/// `x ∈ R^d` and a fast torus point `y`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoScale {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub fast: Option<Expr>,
}

impl TwoScale {
    pub fn constant(c: f64) -> Self {
        TwoScale {
            constant: c,
            ..Default::default()
        }
    }

    pub fn linear(coef: Vec<f64>) -> Self {
        TwoScale {
            linear: coef,
            ..Default::default()
        }
    }

    pub fn fast(e: Expr) -> Self {
        TwoScale {
            fast: Some(e),
            ..Default::default()
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64], masks: &[BumpMask]) -> f64 {
        let mut v = self.constant;
        for (c, xi) in self.linear.iter().zip(x) {
            v += c * xi;
        }
        if let Some(f) = &self.fast {
            v += f.value(y, masks);
        }
        v
    }

    pub fn slow(&self, x: &[f64]) -> f64 {
        self.constant + self.linear.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
    }

    pub fn has_fast(&self) -> bool {
        self.fast.as_ref().is_some_and(|e| !e.is_zero())
    }

    pub fn is_constant(&self) -> bool {
        !self.has_fast() && self.linear.iter().all(|&c| c == 0.0)
    }

    pub fn validate(&self, d: usize, n_masks: usize) -> Result<()> {
        if !self.linear.is_empty() && self.linear.len() != d {
            return Err(Error::invalid("linear part needs d coefficients"));
        }
        if let Some(f) = &self.fast {
            f.validate(d, n_masks)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn selector_parsing() {
        assert_eq!("b_1".parse::<FieldSelector>().unwrap(), FieldSelector::B(0));
        assert_eq!("sigma_12".parse::<FieldSelector>().unwrap(), FieldSelector::Sigma(0, 1));
        assert_eq!("a_2_2".parse::<FieldSelector>().unwrap(), FieldSelector::A(1, 1));
        assert!(matches!("q_1".parse::<FieldSelector>(), Err(Error::NoSuchField(_))));
        assert!(matches!("b_0".parse::<FieldSelector>(), Err(Error::NoSuchField(_))));
    }

    #[test]
    fn sine_drift_extremum() {
        let b = vec![Expr::trig(vec![TrigTerm::sin(&[1, 0], 1.0)]), Expr::zero()];
        let spec = ProblemSpec::brownian(2).with_b(b).unwrap();
        let j = eval_jet(&spec, "b_1", &[0.25, 0.0]).unwrap();
        assert!((j.value - 1.0).abs() < 1e-14);
        assert!(j.gradient.iter().all(|g| g.abs() < 1e-12));
        assert!(matches!(eval_jet(&spec, "b_3", &[0.1, 0.1]), Err(Error::NoSuchField(_))));
    }

    #[test]
    fn constant_diffusion_has_zero_hessian() {
        let spec = ProblemSpec::brownian(2);
        let j = eval_jet(&spec, "a_1_2", &[0.3, 0.9]).unwrap();
        assert!(j.hessian.iter().flatten().all(|&h| h == 0.0));
    }

    #[test]
    fn laplacian_eigenfunction() {
        let spec = ProblemSpec::brownian(2);
        let f = Expr::trig(vec![TrigTerm::cos(&[1, 0], 1.0)]);
        let x = [0.13, 0.4];
        let lf = apply_generator(&spec, &f.jet(&x, &[]), &x);
        assert!((lf + 2.0 * PI * PI * (2.0 * PI * 0.13).cos()).abs() < 1e-12);
        let one = Expr::constant(3.0);
        assert_eq!(apply_generator(&spec, &one.jet(&x, &[]), &x), 0.0);
    }

    #[test]
    fn drift_from_log_density() {
        // p ∝ exp(-cos 2πx₁), a = I, H = 0  ⇒  b = ½ ∇ log p
        let p = Expr::apply(UnaryFn::Exp, Expr::trig(vec![TrigTerm::cos(&[1, 0], -1.0)]));
        let a = vec![Expr::constant(1.0), Expr::zero(), Expr::zero(), Expr::constant(1.0)];
        let h = vec![Expr::zero(); 4];
        let b = drift_from_density(2, &p, &a, &h, &[]).unwrap();
        for x in [[0.1, 0.2], [0.37, 0.8]] {
            let expected = 0.5 * 2.0 * PI * (2.0 * PI * x[0]).sin();
            assert!((b[0].value(&x, &[]) - expected).abs() < 1e-12);
            assert!(b[1].value(&x, &[]).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_from_density_rejects_bad_inputs() {
        let a = vec![Expr::constant(1.0)];
        let h = vec![Expr::zero()];
        let p = Expr::trig(vec![TrigTerm::cos(&[1], 1.0)]);
        assert!(drift_from_density(1, &p, &a, &h, &[]).is_err());
        let a2 = vec![Expr::constant(1.0), Expr::zero(), Expr::zero(), Expr::constant(1.0)];
        let h2 = vec![Expr::zero(), Expr::constant(1.0), Expr::constant(1.0), Expr::zero()];
        assert!(drift_from_density(2, &Expr::constant(1.0), &a2, &h2, &[]).is_err());
    }

    #[test]
    fn two_scale_evaluation() {
        let f = TwoScale {
            constant: 1.0,
            linear: vec![2.0, 0.0],
            fast: Some(Expr::trig(vec![TrigTerm::cos(&[1, 0], 1.0)])),
        };
        assert!((f.eval(&[0.5, 3.0], &[0.0, 0.0], &[]) - 3.0).abs() < 1e-15);
        assert_eq!(f.slow(&[0.5, 3.0]), 2.0);
    }
}
