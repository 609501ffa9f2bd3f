//! The dilation `v ↦ t²v(t·)`, the fibering energy along it and the projection onto
//! the Nehari–Pohožaev manifold `{P = 0}`.
//!
//! Under the dilation the scalar forms scale as `a → t³a`, `b → tb`, `d → t^{2p−3}d`,
//! `c → t³c`, while the screened forms pick up the rescaled parameter:
//! `k_β → t³k_{tβ}`, `e_β → t²e_{tβ}`. [`Fiber`] evaluates everything along the
//! fiber from the forms of `v` itself, so no interpolation enters the root search.

use crate::error::{Error, Result};
use crate::functionals::FieldForms;
use crate::grid::{Params, RadialField};
use crate::potentials::{pair_form, screened_forms, Kernel};

pub const T_MIN: f64 = 1e-6;
pub const T_MAX: f64 = 1e6;
const BISECTION_CAP: usize = 200;
const REFINE_ROUNDS: usize = 3;
/// Target for `|P(projected)| / ‖projected‖²_{H¹}`.
pub const PROJECTION_TOL: f64 = 1e-10;

/// `t²v(t·)` resampled on the grid of `v` by cubic interpolation, zero past `R_max`.
pub fn dilate(v: &RadialField, t: f64) -> Result<RadialField> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("dilation factor must be positive, got {t}")));
    }
    if t == 1.0 {
        return Ok(v.clone());
    }
    let vals = v
        .grid()
        .nodes()
        .iter()
        .map(|&r| t * t * v.interpolate(t * r))
        .collect();
    Ok(v.with_values_unchecked(vals))
}

/// The fiber `t ↦ t²v(t·)` through a fixed field.
pub struct Fiber {
    params: Params,
    a: f64,
    b: f64,
    d: f64,
    c: f64,
    rho: RadialField,
}

impl Fiber {
    pub fn new(v: &RadialField, params: &Params) -> Result<Self> {
        let (a, b, d) = v.norms(params.p);
        let rho = v.squared();
        let c = pair_form(&rho, Kernel::Coulomb)?;
        Ok(Fiber {
            params: *params,
            a,
            b,
            d,
            c,
            rho,
        })
    }

    /// `(k, e)` of `v` at parameter `tβ`.
    fn screened(&self, t: f64) -> Result<(f64, f64)> {
        if self.params.beta == 0.0 {
            return Ok((self.c, 0.0));
        }
        let (y, e) = screened_forms(&self.rho, t * self.params.beta)?;
        Ok((self.c - y, e))
    }

    /// `P(t²v(t·))`.
    pub fn np(&self, t: f64) -> Result<f64> {
        let p = self.params.p;
        let (k, e) = self.screened(t)?;
        let exp_term = if self.params.beta == 0.0 {
            0.0
        } else {
            t * t * e / (4.0 * self.params.beta)
        };
        Ok(1.5 * t.powi(3) * self.a + 0.5 * t * self.b + 0.75 * t.powi(3) * k
            - exp_term
            - (2.0 * p - 3.0) / p * t.powf(2.0 * p - 3.0) * self.d)
    }

    /// Energy of `t²v(t·)`.
    pub fn energy(&self, t: f64) -> Result<f64> {
        let p = self.params.p;
        let (k, _) = self.screened(t)?;
        let t3 = t.powi(3);
        Ok(0.5 * t3 * self.a + 0.5 * t * self.b + 0.25 * t3 * k
            - t.powf(2.0 * p - 3.0) * self.d / p)
    }

    /// Unique root of `t ↦ P(t²v(t·))` with its final bracket.
    pub fn root(&self) -> Result<(f64, (f64, f64))> {
        if self.a + self.b == 0.0 {
            return Err(Error::invalid("cannot project the zero field"));
        }
        let p1 = self.np(1.0)?;
        if p1 == 0.0 {
            return Ok((1.0, (1.0, 1.0)));
        }
        // P > 0 to the left of the root and < 0 to the right.
        let (mut lo, mut hi) = (1.0, 1.0);
        if p1 > 0.0 {
            loop {
                hi *= 2.0;
                if hi > T_MAX {
                    return Err(Error::no_convergence("fibering bracket exceeds t = 1e6"));
                }
                if self.np(hi)? < 0.0 {
                    break;
                }
                lo = hi;
            }
        } else {
            loop {
                lo *= 0.5;
                if lo < T_MIN {
                    return Err(Error::no_convergence("fibering bracket below t = 1e-6"));
                }
                if self.np(lo)? > 0.0 {
                    break;
                }
                hi = lo;
            }
        }
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * mid.max(1.0) || mid == lo || mid == hi {
                break;
            }
            let pm = self.np(mid)?;
            if pm == 0.0 {
                return Ok((mid, (mid, mid)));
            }
            if pm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), (lo, hi)))
    }
}

/// Energy of `t²v(t·)` from the forms of `v`.
pub fn fiber_energy(v: &RadialField, params: &Params, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("fiber parameter must be positive, got {t}")));
    }
    Fiber::new(v, params)?.energy(t)
}

#[derive(Debug, Clone)]
pub struct FiberingResult {
    pub t_star: f64,
    pub projected: RadialField,
    /// Final root bracket, in units of the input field's fiber.
    pub bracket: (f64, f64),
    /// `|P(projected)|`, evaluated directly on the resampled field.
    pub np_at_t: f64,
}

/// Projects `v` onto `{P_β = 0}` along its fiber.
///
/// The root is found on the exact fiber; the dilated field is then re-projected
/// (with factors close to 1) until the resampled field itself satisfies
/// `|P| ≤ 1e−10·‖·‖²_{H¹}`.
pub fn project_np(v: &RadialField, params: &Params) -> Result<FiberingResult> {
    if v.h1_norm_sq() == 0.0 {
        return Err(Error::invalid("cannot project the zero field"));
    }
    let mut t_total = 1.0;
    let mut current = v.clone();
    let mut bracket = (1.0, 1.0);
    let mut np_at_t = f64::INFINITY;
    for round in 0..REFINE_ROUNDS {
        let (t, (lo, hi)) = Fiber::new(&current, params)?.root()?;
        bracket = (t_total * lo, t_total * hi);
        t_total *= t;
        current = dilate(&current, t)?;
        let forms = FieldForms::compute(&current, params)?;
        np_at_t = forms.np(params).abs();
        if np_at_t <= PROJECTION_TOL * forms.h1_sq() || (round > 0 && t == 1.0) {
            break;
        }
    }
    Ok(FiberingResult {
        t_star: t_total,
        projected: current,
        bracket,
        np_at_t,
    })
}

/// `t_β`: the factor projecting `v_β` onto the limit manifold `{P_0 = 0}`.
pub fn t_beta_of(v_beta: &RadialField, p: f64) -> Result<f64> {
    Ok(project_np(v_beta, &Params::new(p, 0.0)?)?.t_star)
}
