//! Radial convolutions `f ∗ g` of a density `f` against the Coulomb, Yukawa and pure
//! exponential kernels, and the three double forms built from them.
//!
//! For radial `f` and `g` the 3-D convolution reduces to
//!
//! ```text
//! (f ∗ g)(r) = (2π/r) ∫₀^∞ s f(s) [H(r+s) − H(|r−s|)] ds,     H'(t) = t g(t)
//! ```
//!
//! with `H(t) = t` (Coulomb), `−e^{−μt}/μ` (Yukawa) and `−(t/μ + 1/μ²)e^{−μt}`
//! (exponential). Writing `q(s) = s f(s)` and extending it oddly to `s < 0` turns this
//! into a one-dimensional convolution of `q` with an even kernel, which is evaluated
//! by product integration: `q` is replaced on each cell by its twelve-point degree-11
//! interpolant and the kernel is integrated against it in closed form. The resulting
//! sums split into a left and a right recursion, so every kernel costs O(N) and the
//! accuracy is O(h¹²) uniformly in `μ`.
//!
//! [`radial_convolve_dense`] evaluates exactly the same discrete sums pair by pair in
//! O(N²); it exists as a reference for the scans.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::RadialField;

/// Above this value of `μh` the Yukawa and exponential contributions are flushed to 0.
pub const FLUSH_MU_H: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `1/r`
    Coulomb,
    /// `e^{−μr}/r`
    Yukawa(f64),
    /// `e^{−μr}`
    Exponential(f64),
}

impl Kernel {
    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Coulomb => Ok(()),
            Kernel::Yukawa(mu) | Kernel::Exponential(mu) => {
                if mu.is_finite() && mu > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("kernel rate must be positive, got {mu}")))
                }
            }
        }
    }
}

/// Pointwise kernel value. The singular kernels reject `r = 0`.
pub fn kernel_value(kernel: Kernel, r: f64) -> Result<f64> {
    kernel.validate()?;
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("radius must be non-negative, got {r}")));
    }
    match kernel {
        Kernel::Coulomb if r == 0.0 => Err(Error::invalid("Coulomb kernel is singular at r = 0")),
        Kernel::Yukawa(_) if r == 0.0 => Err(Error::invalid("Yukawa kernel is singular at r = 0")),
        Kernel::Coulomb => Ok(1.0 / r),
        Kernel::Yukawa(mu) => Ok((-mu * r).exp() / r),
        Kernel::Exponential(mu) => Ok((-mu * r).exp()),
    }
}

/// The Bopp–Podolsky kernel `K_β(r) = (1 − e^{−r/β})/r`, which lies in `(0, 1/β)`.
pub fn bopp_podolsky_kernel(beta: f64, r: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!(
            "K_beta is evaluated for r > 0, got {r}; its limit at 0 is 1/beta"
        )));
    }
    Ok(-(-r / beta).exp_m1() / r)
}

/// `lim_{r→0⁺} K_β(r) = 1/β`.
pub fn bopp_podolsky_kernel_at_origin(beta: f64) -> f64 {
    1.0 / beta
}

/// Interpolation stencil: nodes `j−5 ..= j+6` around cell `[s_j, s_{j+1}]`.
const STENCIL: usize = 12;
const STENCIL_LEFT: isize = 5;
const MOMENTS: usize = STENCIL + 1;
/// Above this rate the moments come from the (then stable) forward recurrences.
const SERIES_MAX_RATE: f64 = 30.0;

type Weights = [f64; STENCIL];

/// Coefficients in powers of `σ` of the Lagrange basis on `{−5, …, 6}`.
fn lagrange_coef() -> &'static [[f64; STENCIL]; STENCIL] {
    static COEF: OnceLock<[[f64; STENCIL]; STENCIL]> = OnceLock::new();
    COEF.get_or_init(|| {
        let mut out = [[0.0; STENCIL]; STENCIL];
        for (k, row) in out.iter_mut().enumerate() {
            let xk = k as f64 - STENCIL_LEFT as f64;
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for j in 0..STENCIL {
                if j == k {
                    continue;
                }
                let xj = j as f64 - STENCIL_LEFT as f64;
                // poly *= (σ − x_j)
                let mut next = vec![0.0; poly.len() + 1];
                for (m, c) in poly.iter().enumerate() {
                    next[m + 1] += c;
                    next[m] -= xj * c;
                }
                poly = next;
                denom *= xk - xj;
            }
            for (m, c) in poly.iter().enumerate() {
                row[m] = c / denom;
            }
        }
        out
    })
}

/// Cell weights `∫₀¹ ℓ_k(σ) ω(σ) dσ` from the moments `∫₀¹ σ^m ω(σ) dσ`.
fn weights_from_moments(m: &[f64]) -> Weights {
    let mut w = [0.0; STENCIL];
    for (k, row) in lagrange_coef().iter().enumerate() {
        w[k] = row.iter().zip(m).map(|(c, mm)| c * mm).sum();
    }
    w
}

/// Positive series `Σ_n λ^n c_n` summed to round-off.
fn positive_series(lambda: f64, mut term: f64, ratio: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for n in 0..10_000 {
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        term *= lambda * ratio(n);
    }
    sum
}

/// `E_m(λ) = ∫₀¹ σ^m e^{−λσ} dσ`.
fn moments_decaying(lambda: f64) -> [f64; MOMENTS] {
    let mut e = [0.0; MOMENTS];
    let el = (-lambda).exp();
    if lambda <= SERIES_MAX_RATE {
        // e^{−λ} Σ_n λ^n m!/(m+n+1)!
        for (m, slot) in e.iter_mut().enumerate() {
            let s = positive_series(lambda, 1.0 / (m + 1) as f64, |n| 1.0 / (m + n + 2) as f64);
            *slot = el * s;
        }
    } else {
        e[0] = -(-lambda).exp_m1() / lambda;
        for m in 1..MOMENTS {
            e[m] = (m as f64 * e[m - 1] - el) / lambda;
        }
    }
    e
}

/// `F_m(λ) = ∫₀¹ σ^m e^{−λ(1−σ)} dσ`.
fn moments_growing(lambda: f64) -> [f64; MOMENTS] {
    let mut f = [0.0; MOMENTS];
    if lambda <= SERIES_MAX_RATE {
        // e^{−λ} Σ_n λ^n / (n!(m+n+1))
        let el = (-lambda).exp();
        for (m, slot) in f.iter_mut().enumerate() {
            // term_n = λ^n/(n!(m+n+1)); ratio term_{n+1}/term_n = λ(m+n+1)/((n+1)(m+n+2))
            let s = positive_series(lambda, 1.0 / (m + 1) as f64, |n| {
                (m + n + 1) as f64 / ((n + 1) as f64 * (m + n + 2) as f64)
            });
            *slot = el * s;
        }
    } else {
        f[0] = -(-lambda).exp_m1() / lambda;
        for m in 1..MOMENTS {
            f[m] = (1.0 - m as f64 * f[m - 1]) / lambda;
        }
    }
    f
}

/// Odd extension of `q(s) = s f(s)` sampled at signed node indices.
struct OddDensity {
    q: Vec<f64>,
}

impl OddDensity {
    fn new(f: &RadialField) -> Self {
        let q = f
            .grid()
            .nodes()
            .iter()
            .zip(f.values())
            .map(|(r, x)| r * x)
            .collect();
        OddDensity { q }
    }

    #[inline]
    fn at(&self, k: isize) -> f64 {
        let a = k.unsigned_abs();
        if a >= self.q.len() {
            0.0
        } else if k < 0 {
            -self.q[a]
        } else {
            self.q[a]
        }
    }

    /// `Σ_k w_k q(j−5+k)` for cell `[s_j, s_{j+1}]`.
    #[inline]
    fn cell(&self, j: usize, w: &Weights) -> f64 {
        let base = j as isize - STENCIL_LEFT;
        w.iter()
            .enumerate()
            .map(|(k, wk)| wk * self.at(base + k as isize))
            .sum()
    }
}

struct ExpWeights {
    decay: f64,
    left0: Weights,
    left1: Weights,
    right0: Weights,
    right1: Weights,
}

impl ExpWeights {
    fn new(lambda: f64) -> Self {
        let e = moments_decaying(lambda);
        let f = moments_growing(lambda);
        let f1: Vec<f64> = (0..STENCIL).map(|m| f[m] - f[m + 1]).collect();
        ExpWeights {
            decay: (-lambda).exp(),
            left0: weights_from_moments(&f[..STENCIL]),
            left1: weights_from_moments(&f1),
            right0: weights_from_moments(&e[..STENCIL]),
            right1: weights_from_moments(&e[1..]),
        }
    }
}

fn coulomb_weights() -> (Weights, Weights) {
    let m0: Vec<f64> = (0..STENCIL).map(|m| 1.0 / (m + 1) as f64).collect();
    let m1: Vec<f64> = (0..STENCIL).map(|m| 1.0 / (m + 2) as f64).collect();
    (weights_from_moments(&m0), weights_from_moments(&m1))
}

/// Potential `f ∗ kernel` on the grid of `f`, in O(N).
///
/// The value at `R_max` is reset to zero like every other field; it never enters a
/// form because the fields themselves vanish there.
pub fn radial_convolve(f: &RadialField, kernel: Kernel) -> Result<RadialField> {
    kernel.validate()?;
    let values = match kernel {
        Kernel::Coulomb => coulomb_scan(f),
        Kernel::Yukawa(mu) => exp_scan(f, mu, false),
        Kernel::Exponential(mu) => exp_scan(f, mu, true),
    };
    Ok(f.with_values_unchecked(values))
}

fn coulomb_scan(f: &RadialField) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let r = grid.nodes();
    let q = OddDensity::new(f);
    let (w0, w1) = coulomb_weights();
    let cells0: Vec<f64> = (0..n).map(|j| h * q.cell(j, &w0)).collect();

    let mut out = vec![0.0; n + 1];
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + cells0[j];
    }
    let mut prefix = 0.0; // ∫₀^{r_i} s q(s) ds
    out[0] = 4.0 * PI * suffix[0];
    for i in 1..=n {
        let j = i - 1;
        prefix += r[j] * cells0[j] + h * h * q.cell(j, &w1);
        out[i] = 4.0 * PI * (prefix / r[i] + suffix[i]);
    }
    out
}

fn exp_scan(f: &RadialField, mu: f64, with_linear: bool) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let r = grid.nodes();
    let lambda = mu * h;
    let mut out = vec![0.0; n + 1];
    if lambda > FLUSH_MU_H {
        return out;
    }
    let q = OddDensity::new(f);
    let w = ExpWeights::new(lambda);

    // Right sums R⁰_i = ∫_{r_i} q e^{−μ(s−r_i)}, R¹_i = ∫_{r_i} q (s−r_i) e^{−μ(s−r_i)}.
    let mut r0 = vec![0.0; n + 1];
    let mut r1 = vec![0.0; n + 1];
    for i in (0..n).rev() {
        r0[i] = w.decay * r0[i + 1] + h * q.cell(i, &w.right0);
        if with_linear {
            r1[i] = w.decay * (r1[i + 1] + h * r0[i + 1]) + h * h * q.cell(i, &w.right1);
        }
    }

    let mut l0 = 0.0;
    let mut l1 = 0.0;
    out[0] = 4.0 * PI * if with_linear { r1[0] } else { r0[0] };
    for i in 1..=n {
        let j = i - 1;
        let c0 = h * q.cell(j, &w.left0);
        if with_linear {
            l1 = w.decay * (l1 + h * l0) + h * h * q.cell(j, &w.left1);
        }
        l0 = w.decay * l0 + c0;
        let mirror = (-mu * r[i]).exp();
        out[i] = if with_linear {
            let b = (l1 + r1[i]) / mu + (l0 + r0[i]) / (mu * mu)
                - mirror * ((r[i] / mu + 1.0 / (mu * mu)) * r0[0] + r1[0] / mu);
            2.0 * PI * b / r[i]
        } else {
            2.0 * PI * (l0 + r0[i] - mirror * r0[0]) / (mu * r[i])
        };
    }
    out
}

/// Same discrete sums as [`radial_convolve`], accumulated pair by pair in O(N²).
pub fn radial_convolve_dense(f: &RadialField, kernel: Kernel) -> Result<RadialField> {
    kernel.validate()?;
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let r = grid.nodes();
    let q = OddDensity::new(f);
    let mut out = vec![0.0; n + 1];
    match kernel {
        Kernel::Coulomb => {
            let (w0, w1) = coulomb_weights();
            for i in 0..=n {
                let mut inner = 0.0;
                let mut outer = 0.0;
                for j in 0..n {
                    let c0 = h * q.cell(j, &w0);
                    if j < i {
                        inner += r[j] * c0 + h * h * q.cell(j, &w1);
                    } else {
                        outer += c0;
                    }
                }
                out[i] = if i == 0 {
                    4.0 * PI * outer
                } else {
                    4.0 * PI * (inner / r[i] + outer)
                };
            }
        }
        Kernel::Yukawa(mu) | Kernel::Exponential(mu) => {
            let with_linear = matches!(kernel, Kernel::Exponential(_));
            let lambda = mu * h;
            if lambda <= FLUSH_MU_H {
                let w = ExpWeights::new(lambda);
                let right_at = |i: usize| {
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for j in i..n {
                        let damp = (-lambda * (j - i) as f64).exp();
                        let c0 = h * q.cell(j, &w.right0);
                        s0 += damp * c0;
                        s1 += damp * ((r[j] - r[i]) * c0 + h * h * q.cell(j, &w.right1));
                    }
                    (s0, s1)
                };
                let (r00, r10) = right_at(0);
                out[0] = 4.0 * PI * if with_linear { r10 } else { r00 };
                for i in 1..=n {
                    let (s0, s1) = right_at(i);
                    let (mut t0, mut t1) = (0.0, 0.0);
                    for j in 0..i {
                        let damp = (-lambda * (i - j - 1) as f64).exp();
                        let c0 = h * q.cell(j, &w.left0);
                        t0 += damp * c0;
                        t1 += damp * ((r[i] - r[j + 1]) * c0 + h * h * q.cell(j, &w.left1));
                    }
                    let mirror = (-mu * r[i]).exp();
                    out[i] = if with_linear {
                        let b = (t1 + s1) / mu + (t0 + s0) / (mu * mu)
                            - mirror * ((r[i] / mu + 1.0 / (mu * mu)) * r00 + r10 / mu);
                        2.0 * PI * b / r[i]
                    } else {
                        2.0 * PI * (t0 + s0 - mirror * r00) / (mu * r[i])
                    };
                }
            }
        }
    }
    Ok(f.with_values_unchecked(out))
}

/// `v² ∗ K_β`, through the split `K_β = 1/r − e^{−r/β}/r`; `β = 0` gives the Coulomb
/// potential of `v²`.
pub fn potential_k_beta(v: &RadialField, beta: f64) -> Result<RadialField> {
    density_potential(&v.squared(), beta)
}

/// `f ∗ K_β` for an arbitrary (possibly signed) density.
pub fn density_potential(f: &RadialField, beta: f64) -> Result<RadialField> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let coulomb = radial_convolve(f, Kernel::Coulomb)?;
    if beta == 0.0 {
        return Ok(coulomb);
    }
    let yukawa = radial_convolve(f, Kernel::Yukawa(1.0 / beta))?;
    coulomb.sub(&yukawa)
}

/// The three double integrals of `v²` against `1/|x−y|`, `e^{−|x−y|/β}/|x−y|` and
/// `e^{−|x−y|/β}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct DoubleForms {
    pub c_coul: f64,
    pub y_beta: f64,
    pub e_beta: f64,
}

impl DoubleForms {
    /// `∫∫ K_β(x−y) v(x)² v(y)²`, or the Coulomb form when `β = 0`.
    pub fn k_beta(&self) -> f64 {
        self.c_coul - self.y_beta
    }
}

/// For `β = 0` the Yukawa and exponential forms are set to zero.
pub fn double_forms(v: &RadialField, beta: f64) -> Result<DoubleForms> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let rho = v.squared();
    let c_coul = pair_form(&rho, Kernel::Coulomb)?;
    if beta == 0.0 {
        return Ok(DoubleForms {
            c_coul,
            ..Default::default()
        });
    }
    let (y_beta, e_beta) = screened_forms(&rho, beta)?;
    Ok(DoubleForms {
        c_coul,
        y_beta,
        e_beta,
    })
}

/// Yukawa and exponential forms of a density `ρ` at parameter `β > 0`.
pub(crate) fn screened_forms(rho: &RadialField, beta: f64) -> Result<(f64, f64)> {
    let mu = 1.0 / beta;
    Ok((
        pair_form(rho, Kernel::Yukawa(mu))?,
        pair_form(rho, Kernel::Exponential(mu))?,
    ))
}

/// `∫ (ρ ∗ kernel) ρ dx`.
pub fn pair_form(rho: &RadialField, kernel: Kernel) -> Result<f64> {
    let phi = radial_convolve(rho, kernel)?;
    Ok(bilinear(&phi, rho))
}

/// `B(f, g) = ∫ (f ∗ kernel) g dx`.
pub fn bilinear_form(f: &RadialField, g: &RadialField, kernel: Kernel) -> Result<f64> {
    f.check_grid(g)?;
    let phi = radial_convolve(f, kernel)?;
    Ok(bilinear(&phi, g))
}

fn bilinear(phi: &RadialField, g: &RadialField) -> f64 {
    phi.grid()
        .weights()
        .iter()
        .zip(phi.values())
        .zip(g.values())
        .map(|((w, a), b)| w * a * b)
        .sum()
}
