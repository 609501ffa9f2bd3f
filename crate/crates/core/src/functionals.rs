//! Energy, Nehari and Pohožaev residuals, the manifold functional `P` and the
//! Euler–Lagrange residual, all assembled from the scalar [`FieldForms`] of a field.
//!
//! With `a = ‖∇v‖²`, `b = ‖v‖²`, `d = ‖v‖_p^p`, `k = ∫(v²∗K_β)v²` and `e` the
//! exponential double form,
//!
//! ```text
//! I    = ½(a+b) + ¼k − d/p
//! Neh  = (a+b) + k − d
//! Poh  = ½a + (3/2)b + (5/4)k + e/(4β) − 3d/p
//! P    = (3/2)a + ½b + (3/4)k − e/(4β) − ((2p−3)/p)d  =  2·Neh − Poh
//! ```
//!
//! At `β = 0` the `e` terms are absent and `k` is the Coulomb form.

use serde::Serialize;

use crate::error::Result;
use crate::grid::{Params, RadialField};
use crate::potentials::{double_forms, potential_k_beta, radial_convolve, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
pub struct FieldForms {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub c_coul: f64,
    pub y_beta: f64,
    pub e_beta: f64,
}

impl FieldForms {
    pub fn compute(v: &RadialField, params: &Params) -> Result<Self> {
        let (a, b, d) = v.norms(params.p);
        let dbl = double_forms(v, params.beta)?;
        Ok(FieldForms {
            a,
            b,
            d,
            c_coul: dbl.c_coul,
            y_beta: dbl.y_beta,
            e_beta: dbl.e_beta,
        })
    }

    pub fn h1_sq(&self) -> f64 {
        self.a + self.b
    }

    /// `c_coul − y_beta`; equal to `c_coul` at `β = 0` since `y_beta` is zero there.
    pub fn k_beta(&self) -> f64 {
        self.c_coul - self.y_beta
    }

    /// `e/(4β)`, or zero in the limit problem.
    fn exp_term(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            0.0
        } else {
            self.e_beta / (4.0 * beta)
        }
    }

    pub fn energy(&self, params: &Params) -> f64 {
        0.5 * (self.a + self.b) + 0.25 * self.k_beta() - self.d / params.p
    }

    pub fn nehari(&self, _params: &Params) -> f64 {
        self.a + self.b + self.k_beta() - self.d
    }

    pub fn pohozaev(&self, params: &Params) -> f64 {
        0.5 * self.a + 1.5 * self.b + 1.25 * self.k_beta() + self.exp_term(params.beta)
            - 3.0 * self.d / params.p
    }

    pub fn np(&self, params: &Params) -> f64 {
        let p = params.p;
        1.5 * self.a + 0.5 * self.b + 0.75 * self.k_beta()
            - self.exp_term(params.beta)
            - (2.0 * p - 3.0) / p * self.d
    }

    /// The energy rewritten with `P = 0` used to eliminate `d`; equals [`Self::energy`]
    /// exactly on the manifold.
    pub fn manifold_energy(&self, params: &Params) -> f64 {
        let p = params.p;
        let q = 2.0 * p - 3.0;
        (p - 3.0) / q * self.a
            + (p - 2.0) / q * self.b
            + (p - 3.0) / (2.0 * q) * self.k_beta()
            + self.exp_term(params.beta) / q
    }
}

pub fn energy(v: &RadialField, params: &Params) -> Result<f64> {
    Ok(FieldForms::compute(v, params)?.energy(params))
}

pub fn nehari_residual(v: &RadialField, params: &Params) -> Result<f64> {
    Ok(FieldForms::compute(v, params)?.nehari(params))
}

pub fn pohozaev_residual(v: &RadialField, params: &Params) -> Result<f64> {
    Ok(FieldForms::compute(v, params)?.pohozaev(params))
}

pub fn np_value(v: &RadialField, params: &Params) -> Result<f64> {
    Ok(FieldForms::compute(v, params)?.np(params))
}

pub fn manifold_energy(v: &RadialField, params: &Params) -> Result<f64> {
    Ok(FieldForms::compute(v, params)?.manifold_energy(params))
}

/// `−Δv + v + (v²∗K_β)v − |v|^{p−2}v` at the nodes; zero at `R_max`.
pub fn euler_lagrange_residual(v: &RadialField, params: &Params) -> Result<RadialField> {
    let phi = potential_k_beta(v, params.beta)?;
    Ok(residual_with_potential(v, &phi, params.p))
}

pub(crate) fn residual_with_potential(v: &RadialField, phi: &RadialField, p: f64) -> RadialField {
    let lap = v.laplacian();
    let vals = v
        .values()
        .iter()
        .zip(lap.values())
        .zip(phi.values())
        .map(|((&x, &l), &f)| -l + x + f * x - x.abs().powf(p - 2.0) * x)
        .collect();
    v.with_values_unchecked(vals)
}

/// Identity residuals of a field; the serialized values are normalized by `‖v‖²_{H¹}`
/// (Nehari, Pohožaev, `P`) and `‖v‖_{H¹}` (Euler–Lagrange).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub nehari: f64,
    pub pohozaev: f64,
    pub np: f64,
    pub el_l2: f64,
    pub beta: f64,
    pub p: f64,
    #[serde(skip)]
    pub raw: RawResiduals,
    #[serde(skip)]
    pub forms: FieldForms,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawResiduals {
    pub nehari: f64,
    pub pohozaev: f64,
    pub np: f64,
    pub el_l2: f64,
}

impl IdentityReport {
    pub fn compute(v: &RadialField, params: &Params) -> Result<Self> {
        let forms = FieldForms::compute(v, params)?;
        let el = euler_lagrange_residual(v, params)?;
        Ok(Self::from_parts(forms, el.l2_norm_sq().sqrt(), params))
    }

    pub(crate) fn from_parts(forms: FieldForms, el_l2: f64, params: &Params) -> Self {
        let raw = RawResiduals {
            nehari: forms.nehari(params),
            pohozaev: forms.pohozaev(params),
            np: forms.np(params),
            el_l2,
        };
        let h1_sq = forms.h1_sq();
        let (s2, s1) = if h1_sq > 0.0 {
            (1.0 / h1_sq, 1.0 / h1_sq.sqrt())
        } else {
            (1.0, 1.0)
        };
        IdentityReport {
            nehari: raw.nehari * s2,
            pohozaev: raw.pohozaev * s2,
            np: raw.np * s2,
            el_l2: raw.el_l2 * s1,
            beta: params.beta,
            p: params.p,
            raw,
            forms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain floats serialize")
    }
}

/// Cumulative measure `μ(B_r)` of the balls centered at the origin, for the density
/// `(p−3)/(2p−3)|∇v|² + (p−2)/(2p−3)v² + (p−3)/(2(2p−3))(v²∗|x|⁻¹)v²`.
///
/// On the limit manifold the total mass equals the energy.
pub fn concentration_profile(v: &RadialField, p: f64) -> Result<Vec<(f64, f64)>> {
    let grid = v.grid();
    let q = 2.0 * p - 3.0;
    let dv = v.derivative();
    let phi = radial_convolve(&v.squared(), Kernel::Coulomb)?;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.n() + 1);
    for i in 0..=grid.n() {
        let x = v.values()[i];
        let dens = (p - 3.0) / q * dv[i] * dv[i]
            + (p - 2.0) / q * x * x
            + (p - 3.0) / (2.0 * q) * phi.values()[i] * x * x;
        acc += grid.weights()[i] * dens;
        out.push((grid.nodes()[i], acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use std::f64::consts::PI;

    fn gaussian() -> RadialField {
        RadialField::gaussian(RadialGrid::shared(20.0, 4096).unwrap(), 1.0)
    }

    #[test]
    fn gaussian_energy_closed_form() {
        let params = Params::new(4.0, 0.0).unwrap();
        let e = energy(&gaussian(), &params).unwrap();
        let b = PI.powf(1.5);
        let exact = 0.5 * (2.5 * b) + 0.25 * 2f64.sqrt() * PI.powf(2.5) - 0.25 * (PI / 2.0).powf(1.5);
        assert!((e - exact).abs() < 1e-7 * exact, "{e} vs {exact}");
        assert!((e - 12.6530).abs() < 1e-3);
    }

    #[test]
    fn zero_field_everything_zero() {
        let v = RadialField::zeros(RadialGrid::shared(10.0, 64).unwrap());
        for beta in [0.0, 0.5] {
            let params = Params::new(4.0, beta).unwrap();
            let rep = IdentityReport::compute(&v, &params).unwrap();
            assert_eq!((rep.nehari, rep.pohozaev, rep.np, rep.el_l2), (0.0, 0.0, 0.0, 0.0));
            assert_eq!(energy(&v, &params).unwrap(), 0.0);
        }
        assert!(concentration_profile(&v, 4.0).unwrap().iter().all(|&(_, m)| m == 0.0));
    }

    #[test]
    fn energy_increases_toward_limit_as_beta_shrinks() {
        let v = gaussian();
        let limit = energy(&v, &Params::new(4.0, 0.0).unwrap()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for beta in [2.0, 1.0, 0.5, 0.2, 0.1, 0.05] {
            let e = energy(&v, &Params::new(4.0, beta).unwrap()).unwrap();
            assert!(e > prev && e < limit);
            prev = e;
        }
    }

    #[test]
    fn gaussian_is_not_a_solution() {
        let params = Params::new(4.0, 0.0).unwrap();
        let rep = IdentityReport::compute(&gaussian(), &params).unwrap();
        assert!(rep.el_l2 > 0.1);
        assert!(rep.pohozaev.abs() > 0.1);
    }

    #[test]
    fn identity_report_json_keys() {
        let params = Params::new(4.0, 0.5).unwrap();
        let rep = IdentityReport::compute(&gaussian(), &params).unwrap();
        let val: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        let mut keys: Vec<_> = val.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["beta", "el_l2", "nehari", "np", "p", "pohozaev"]);
    }

    #[test]
    fn profile_is_monotone() {
        let prof = concentration_profile(&gaussian(), 4.0).unwrap();
        assert!(prof.windows(2).all(|w| w[1].1 >= w[0].1));
    }
}
