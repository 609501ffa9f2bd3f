//! Uniform radial grids on `[0, R_max]`, radial fields and the norms used by every
//! functional.
//!
//! Fields are even at the origin and vanish at `R_max` (Dirichlet truncation). Every
//! stencil reads through [`RadialField::ghost`], which reflects evenly across `r = 0`
//! and returns zero past `R_max`, so the same twelfth-order formulas apply at every
//! node.
//!
//! Quadrature is the trapezoidal rule with the `4πr²` factor folded into the weights.
//! For integrands that are even in `r` and decay before `R_max` this rule has no
//! algebraic end corrections, so the accuracy of `a`, `b`, `d` is set by the
//! derivative stencil alone.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest node count accepted by [`RadialGrid::new`].
pub const MIN_NODES: usize = 4;

/// Default truncation radius and node count.
pub const DEFAULT_R_MAX: f64 = 40.0;
pub const DEFAULT_N: usize = 4096;

#[derive(Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Uniform grid `r_i = i·h`, `i = 0..=n`, `h = r_max / n`.
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::invalid(format!("R_max must be positive, got {r_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::invalid(format!(
                "N must be at least {MIN_NODES}, got {n}"
            )));
        }
        let h = r_max / n as f64;
        let nodes: Vec<f64> = (0..=n)
            .map(|i| if i == n { r_max } else { i as f64 * h })
            .collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&r| 4.0 * PI * r * r * h).collect();
        weights[n] *= 0.5;
        Ok(RadialGrid {
            n,
            r_max,
            h,
            nodes,
            weights,
        })
    }

    pub fn shared(r_max: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(r_max, n).map(Arc::new)
    }

    /// Number of intervals; there are `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoidal weights for `∫ f(r) 4πr² dr`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n + 1);
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum()
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.n == other.n && self.r_max == other.r_max
    }
}

/// Exponent `p` and Bopp–Podolsky parameter `β` (`β = 0` is the Schrödinger–Poisson limit).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Params {
    pub p: f64,
    pub beta: f64,
}

impl Params {
    pub fn new(p: f64, beta: f64) -> Result<Self> {
        if !(p > 3.0 && p < 6.0) {
            return Err(Error::invalid(format!("p must lie in (3, 6), got {p}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Params { p, beta })
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Params::new(self.p, beta)
    }

    pub fn is_limit(&self) -> bool {
        self.beta == 0.0
    }
}

/// A radial function sampled on a grid, `values[i] = v(r_i)`, with `v(R_max) = 0`.
#[derive(Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n + 1 {
            return Err(Error::invalid(format!(
                "field has {} samples, grid has {} nodes",
                values.len(),
                grid.n + 1
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at node {i}")));
        }
        let n = grid.n;
        values[n] = 0.0;
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.n + 1];
        RadialField { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn gaussian(grid: Arc<RadialGrid>, width: f64) -> Self {
        let s = 1.0 / (2.0 * width * width);
        let values = grid.nodes.iter().map(|&r| (-s * r * r).exp()).collect();
        Self::new(grid, values).expect("gaussian samples are finite")
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// New field on the same grid; the Dirichlet node is reset to zero.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub(crate) fn with_values_unchecked(&self, mut values: Vec<f64>) -> Self {
        let n = self.grid.n;
        values[n] = 0.0;
        RadialField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values_unchecked(self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|x| s * x)
    }

    /// `v²`, the density entering every convolution.
    pub fn squared(&self) -> Self {
        self.map(|x| x * x)
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.check_grid(other)?;
        Ok(self.with_values_unchecked(
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &RadialField) -> Result<Self> {
        self.check_grid(other)?;
        Ok(self.with_values_unchecked(
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn check_grid(&self, other: &RadialField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "grid mismatch: (R_max={}, N={}) vs (R_max={}, N={})",
                self.grid.r_max, self.grid.n, other.grid.r_max, other.grid.n
            )))
        }
    }

    /// Sample at signed node index `k`: even across the origin, zero past `R_max`.
    #[inline]
    pub fn ghost(&self, k: isize) -> f64 {
        ghost(&self.values, k)
    }

    /// `v'(r_i)` by twelfth-order central differences (`v'(0) = 0` by symmetry).
    pub fn derivative(&self) -> Vec<f64> {
        derivative(&self.values, self.grid.h)
    }

    /// Integral of a sampled function against the 3-D radial measure.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.grid.integrate(f)
    }

    /// `(a, b, d) = (‖v‖²_{D^{1,2}}, ‖v‖²_{L²}, ‖v‖_{L^p}^p)`.
    pub fn norms(&self, p: f64) -> (f64, f64, f64) {
        let dv = self.derivative();
        let w = self.grid.weights();
        let mut a = 0.0;
        let mut b = 0.0;
        let mut d = 0.0;
        for i in 0..self.values.len() {
            let v = self.values[i];
            a += w[i] * dv[i] * dv[i];
            b += w[i] * v * v;
            d += w[i] * v.abs().powf(p);
        }
        (a, b, d)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum()
    }

    pub fn h1_norm_sq(&self) -> f64 {
        let (a, b, _) = self.norms(2.0);
        a + b
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_norm_sq().sqrt()
    }

    /// `‖v‖⁴_{L⁴}`.
    pub fn l4_norm_pow4(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.powi(4))
            .sum()
    }

    /// Radial Laplacian `v'' + 2v'/r` (`3v''(0)` at the origin), twelfth order.
    pub fn laplacian(&self) -> RadialField {
        let values = laplacian(&self.values, self.grid.h);
        self.with_values_unchecked(values)
    }

    /// Cubic (four-point Lagrange) interpolation at an arbitrary radius.
    pub fn interpolate(&self, r: f64) -> f64 {
        let r = r.abs();
        let h = self.grid.h;
        if r >= self.grid.r_max {
            return 0.0;
        }
        let x = r / h;
        let j = (x.floor() as isize).min(self.grid.n as isize - 1);
        let s = x - j as f64;
        let [l0, l1, l2, l3] = lagrange_basis(s);
        l0 * self.ghost(j - 1) + l1 * self.ghost(j) + l2 * self.ghost(j + 1) + l3 * self.ghost(j + 2)
    }

    /// Resample onto another grid by cubic interpolation.
    pub fn resample(&self, grid: Arc<RadialGrid>) -> RadialField {
        let values = grid.nodes().iter().map(|&r| self.interpolate(r)).collect();
        RadialField::new(grid, values).expect("interpolated samples are finite")
    }
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialGrid {{ r_max: {}, n: {} }}", self.r_max, self.n)
    }
}

impl fmt::Debug for RadialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let peak = self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        write!(f, "RadialField {{ grid: {:?}, v(0): {}, max|v|: {} }}", self.grid, self.values[0], peak)
    }
}

/// Errors only on a grid mismatch.
pub fn h1_distance(v: &RadialField, w: &RadialField) -> Result<f64> {
    Ok(v.sub(w)?.h1_norm())
}

#[inline]
pub(crate) fn ghost(values: &[f64], k: isize) -> f64 {
    let k = k.unsigned_abs();
    if k < values.len() {
        values[k]
    } else {
        0.0
    }
}

// Twelfth-order central stencils: offsets 1..=6.
const D1: [f64; 6] = [
    6.0 / 7.0,
    -15.0 / 56.0,
    5.0 / 63.0,
    -1.0 / 56.0,
    1.0 / 385.0,
    -1.0 / 5544.0,
];
const D2_CENTER: f64 = -5369.0 / 1800.0;
const D2: [f64; 6] = [
    12.0 / 7.0,
    -15.0 / 56.0,
    10.0 / 189.0,
    -1.0 / 112.0,
    2.0 / 1925.0,
    -1.0 / 16632.0,
];

#[inline]
fn d1_at(values: &[f64], i: isize) -> f64 {
    D1.iter()
        .enumerate()
        .map(|(k, c)| {
            let k = k as isize + 1;
            c * (ghost(values, i + k) - ghost(values, i - k))
        })
        .sum()
}

#[inline]
fn d2_at(values: &[f64], i: isize) -> f64 {
    D2_CENTER * ghost(values, i)
        + D2.iter()
            .enumerate()
            .map(|(k, c)| {
                let k = k as isize + 1;
                c * (ghost(values, i + k) + ghost(values, i - k))
            })
            .sum::<f64>()
}

pub(crate) fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() as isize;
    (0..n)
        .map(|i| if i == 0 { 0.0 } else { d1_at(values, i) / h })
        .collect()
}

pub(crate) fn laplacian(values: &[f64], h: f64) -> Vec<f64> {
    let len = values.len();
    let mut out = vec![0.0; len];
    let h2 = h * h;
    out[0] = 3.0 * d2_at(values, 0) / h2;
    for i in 1..len - 1 {
        let ii = i as isize;
        out[i] = d2_at(values, ii) / h2 + 2.0 * d1_at(values, ii) / (i as f64 * h2);
    }
    out
}

/// Lagrange basis on the nodes `{-1, 0, 1, 2}` evaluated at `s ∈ [0, 1]`.
#[inline]
pub(crate) fn lagrange_basis(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}
