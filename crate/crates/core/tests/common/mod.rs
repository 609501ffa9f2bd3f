//! Independent oracles shared by the integration tests: Gauss–Legendre quadrature
//! and analytic radial fields with their norms evaluated by quadrature.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use bpgs::{RadialField, RadialGrid};
use rand::Rng;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

pub struct Quadrature {
    xs: Vec<f64>,
    ws: Vec<f64>,
}

impl Quadrature {
    pub fn new(order: usize) -> Self {
        let (xs, ws) = gauss_legendre(order);
        Quadrature { xs, ws }
    }

    /// Composite rule on `[a, b]` with `panels` equal panels.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let len = (b - a) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let lo = a + k as f64 * len;
            let mid = lo + 0.5 * len;
            let mut s = 0.0;
            for (x, w) in self.xs.iter().zip(&self.ws) {
                s += w * f(mid + 0.5 * len * x);
            }
            total += 0.5 * len * s;
        }
        total
    }
}

/// `Σ c·(1 + α r²)·exp(−r²/(2w²))`.
#[derive(Debug, Clone)]
pub struct Blob {
    pub terms: Vec<(f64, f64, f64)>,
}

impl Blob {
    pub fn random(rng: &mut impl Rng) -> Self {
        let k = rng.gen_range(1..=3);
        let terms = (0..k)
            .map(|_| {
                (
                    rng.gen_range(0.2..2.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.0..0.5),
                )
            })
            .collect();
        Blob { terms }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, w, a)| c * (1.0 + a * r * r) * (-r * r / (2.0 * w * w)).exp())
            .sum()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, w, a)| {
                c * (-r / (w * w) * (1.0 + a * r * r) + 2.0 * a * r) * (-r * r / (2.0 * w * w)).exp()
            })
            .sum()
    }

    pub fn field(&self, grid: &Arc<RadialGrid>) -> RadialField {
        RadialField::from_fn(grid.clone(), |r| self.value(r)).unwrap()
    }

    /// `(a, b, d, c)` for exponent `p` with `c` the Coulomb self-interaction of `v²`.
    pub fn forms(&self, p: f64, q: &Quadrature) -> (f64, f64, f64, f64) {
        let top = 30.0;
        let panels = 300;
        let ball = |f: &dyn Fn(f64) -> f64| q.integrate(|r| 4.0 * PI * r * r * f(r), 0.0, top, panels);
        let a = ball(&|r| self.derivative(r).powi(2));
        let b = ball(&|r| self.value(r).powi(2));
        let d = ball(&|r| self.value(r).abs().powf(p));
        let rho = |s: f64| self.value(s).powi(2);
        let phi = |r: f64| {
            let inner = q.integrate(|s| s * s * rho(s), 0.0, r, 40);
            let outer = q.integrate(|s| s * rho(s), r, top, 120);
            4.0 * PI * (if r > 0.0 { inner / r } else { 0.0 } + outer)
        };
        let c = q.integrate(|r| 4.0 * PI * r * r * rho(r) * phi(r), 0.0, top, 150);
        (a, b, d, c)
    }
}

/// Argmax of `t ↦ ½t³a + ½tb + ¼t³c − t^{2p−3}d/p` by a dense logarithmic scan
/// followed by a dense linear rescan around the best node.
pub fn fiber_argmax(a: f64, b: f64, c: f64, d: f64, p: f64) -> f64 {
    let e = |t: f64| 0.5 * t.powi(3) * a + 0.5 * t * b + 0.25 * t.powi(3) * c - t.powf(2.0 * p - 3.0) * d / p;
    let scan = |lo: f64, hi: f64, n: usize, log: bool| {
        let node = |k: usize| {
            let s = k as f64 / n as f64;
            if log {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        };
        (0..=n)
            .map(node)
            .max_by(|x, y| e(*x).total_cmp(&e(*y)))
            .unwrap()
    };
    let n = 20_000;
    let (lo, hi) = (1e-2_f64, 1e2_f64);
    let t = scan(lo, hi, n, true);
    let step = (hi / lo).powf(1.0 / n as f64);
    scan(t / step, t * step, 4000, false)
}
