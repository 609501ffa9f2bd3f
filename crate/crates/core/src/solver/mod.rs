//! Least energy solutions as minimizers of the energy on the Nehari–Pohožaev
//! manifold `{P_β = 0}`.
//!
//! Phase A is a projected descent: a preconditioned gradient step followed by the
//! fibering projection, with Armijo backtracking on the projected energy. Phase B
//! polishes the descent limit with damped Newton–GMRES on the Euler–Lagrange
//! equation, using the full Jacobian including the nonlocal term. The polished field
//! is projected once more, so it satisfies the manifold and equation residual
//! contracts simultaneously.

pub mod linalg;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fibering::project_np;
use crate::functionals::{residual_with_potential, FieldForms, IdentityReport};
use crate::grid::{Params, RadialField, RadialGrid};
use crate::io::read_field_on;
use crate::potentials::{density_potential, potential_k_beta};

use linalg::{gmres, Tridiagonal};

/// Below this H¹ norm an iterate counts as collapsed onto the zero field.
pub const DEGENERATE_H1: f64 = 1e-10;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const DESCENT_TOLS: [f64; 3] = [1e-3, 1e-5, 1e-7];
const NEWTON_CAP: usize = 40;
const GMRES_RESTART: usize = 60;
const GMRES_MATVECS: usize = 600;

pub const RADIAL_NOTE: &str =
    "radial ansatz: the minimizer is sought among radial fields centered at the origin";

#[derive(Debug, Clone)]
pub enum Init {
    /// `e^{−r²/(2w²)}`, projected onto the manifold.
    Gaussian(f64),
    /// A solution file, resampled if its grid differs.
    File(PathBuf),
    WarmStart(RadialField),
}

impl Init {
    fn describe(&self) -> String {
        match self {
            Init::Gaussian(w) => format!("gaussian(width={w})"),
            Init::File(p) => format!("file({})", p.display()),
            Init::WarmStart(_) => "warm_start".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub init: Init,
    pub step0: f64,
    pub tol_el: f64,
    pub tol_np: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Relative amplitude of the multiplicative noise applied to the initial field.
    pub perturbation: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            init: Init::Gaussian(1.0),
            step0: 1.0,
            tol_el: 1e-8,
            tol_np: 1e-10,
            max_iters: 20000,
            seed: 0,
            perturbation: 0.0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, name: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {x}")))
            }
        };
        positive(self.step0, "step0")?;
        positive(self.tol_el, "tol_el")?;
        positive(self.tol_np, "tol_np")?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.perturbation) {
            return Err(Error::invalid(format!(
                "perturbation must lie in [0, 1), got {}",
                self.perturbation
            )));
        }
        if let Init::Gaussian(w) = self.init {
            positive(w, "gaussian width")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub v: RadialField,
    pub params: Params,
    pub m: f64,
    pub iters: usize,
    pub descent_iters: usize,
    pub newton_iters: usize,
    pub identity: IdentityReport,
    /// `(energy, ‖EL residual‖/‖v‖_{H¹})` per iteration.
    pub history: Vec<(f64, f64)>,
    pub init: String,
    pub seed: u64,
    /// Diagnostics only: strictly positive on `[0, R_max)` above noise level.
    pub positive: bool,
    /// Diagnostics only: radially nonincreasing up to round-off.
    pub monotone: bool,
}

#[derive(Serialize)]
struct GridJson {
    #[serde(rename = "R_max")]
    r_max: f64,
    #[serde(rename = "N")]
    n: usize,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    beta: f64,
    p: f64,
    m: f64,
    iters: usize,
    nehari: f64,
    pohozaev: f64,
    np: f64,
    el_l2: f64,
    grid: GridJson,
    init: &'a str,
    seed: u64,
    positive: bool,
    monotone: bool,
    note: &'a str,
}

impl Serialize for SolveReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            beta: self.params.beta,
            p: self.params.p,
            m: self.m,
            iters: self.iters,
            nehari: self.identity.nehari,
            pohozaev: self.identity.pohozaev,
            np: self.identity.np,
            el_l2: self.identity.el_l2,
            grid: GridJson {
                r_max: self.v.grid().r_max(),
                n: self.v.grid().n(),
            },
            init: &self.init,
            seed: self.seed,
            positive: self.positive,
            monotone: self.monotone,
            note: RADIAL_NOTE,
        }
        .serialize(s)
    }
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain values serialize")
    }

    pub fn h1_norm(&self) -> f64 {
        self.identity.forms.h1_sq().sqrt()
    }
}

/// Second-order `−Δ + 1` with the even reflection at 0 and the Dirichlet row at `R_max`.
fn preconditioner(grid: &RadialGrid) -> Tridiagonal {
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    diag[0] = 6.0 / h2 + 1.0;
    upper[0] = -6.0 / h2;
    for i in 1..n {
        let inv = 1.0 / i as f64;
        lower[i] = -(1.0 - inv) / h2;
        diag[i] = 2.0 / h2 + 1.0;
        upper[i] = -(1.0 + inv) / h2;
    }
    diag[n] = 1.0;
    Tridiagonal::new(lower, diag, upper)
}

struct Problem {
    params: Params,
    precond: Tridiagonal,
}

struct Evaluated {
    v: RadialField,
    energy: f64,
    residual: RadialField,
    phi: RadialField,
    /// `‖R‖_{L²} / ‖v‖_{H¹}`
    rel_el: f64,
}

impl Problem {
    fn evaluate(&self, v: RadialField) -> Result<Evaluated> {
        let phi = potential_k_beta(&v, self.params.beta)?;
        let residual = residual_with_potential(&v, &phi, self.params.p);
        let forms = FieldForms::compute(&v, &self.params)?;
        let h1 = forms.h1_sq().sqrt();
        if !(h1 >= DEGENERATE_H1) {
            return Err(Error::DegenerateIterate(format!(
                "iterate collapsed to the zero field (H1 norm {h1:e})"
            )));
        }
        let rel_el = residual.l2_norm_sq().sqrt() / h1;
        Ok(Evaluated {
            energy: forms.energy(&self.params),
            v,
            residual,
            phi,
            rel_el,
        })
    }

    fn project(&self, v: &RadialField) -> Result<RadialField> {
        if v.h1_norm() < DEGENERATE_H1 {
            return Err(Error::DegenerateIterate(
                "iterate collapsed to the zero field".into(),
            ));
        }
        Ok(project_np(v, &self.params)?.projected)
    }

    fn apply_precond(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.precond.solve(x);
        *y.last_mut().expect("grid has nodes") = 0.0;
        y
    }
}

struct Budget {
    left: usize,
    descent: usize,
    newton: usize,
}

impl Budget {
    fn take(&mut self) -> bool {
        if self.left == 0 {
            return false;
        }
        self.left -= 1;
        true
    }
}

fn weighted_dot(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.weights().iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// Projected, preconditioned descent until `‖M⁻¹R‖/‖v‖ < tol`. Returns `false` if the
/// line search stalled.
fn descend(
    prob: &Problem,
    mut cur: Evaluated,
    tol: f64,
    step0: f64,
    budget: &mut Budget,
    history: &mut Vec<(f64, f64)>,
) -> Result<(Evaluated, bool)> {
    let grid = cur.v.grid().clone();
    let mut step = step0;
    loop {
        let mut g = prob.apply_precond(cur.residual.values());
        let mut slope = weighted_dot(&grid, cur.residual.values(), &g);
        if !(slope > 0.0) {
            g = cur.residual.values().to_vec();
            slope = weighted_dot(&grid, &g, &g);
        }
        let g_norm = weighted_dot(&grid, &g, &g).sqrt();
        if g_norm <= tol * cur.v.l2_norm_sq().sqrt() {
            return Ok((cur, true));
        }
        if !budget.take() {
            return Ok((cur, true));
        }
        budget.descent += 1;
        let mut s = step;
        let accepted = loop {
            if s < MIN_STEP {
                break None;
            }
            let vals = cur.v.values().iter().zip(&g).map(|(x, d)| x - s * d).collect();
            let trial = cur.v.with_values_unchecked(vals);
            if let Ok(proj) = prob.project(&trial) {
                let e = FieldForms::compute(&proj, &prob.params)?.energy(&prob.params);
                if e <= cur.energy - ARMIJO * s * slope {
                    break Some(proj);
                }
            }
            s *= 0.5;
        };
        match accepted {
            Some(v) => {
                cur = prob.evaluate(v)?;
                history.push((cur.energy, cur.rel_el));
                step = (2.0 * s).min(step0);
            }
            None => return Ok((cur, false)),
        }
    }
}

/// Damped Newton on `R(v) = 0`. Returns `false` if a step could not reduce `‖R‖`
/// before reaching `tol_el`.
fn newton(
    prob: &Problem,
    mut cur: Evaluated,
    tol_el: f64,
    budget: &mut Budget,
    history: &mut Vec<(f64, f64)>,
) -> Result<(Evaluated, bool)> {
    let p = prob.params.p;
    let beta = prob.params.beta;
    let target = 1e-3 * tol_el;
    for _ in 0..NEWTON_CAP {
        if cur.rel_el <= target {
            break;
        }
        if !budget.take() {
            break;
        }
        budget.newton += 1;
        let v = &cur.v;
        let n = v.len() - 1;
        let h = v.grid().h();
        let coef: Vec<f64> = v
            .values()
            .iter()
            .zip(cur.phi.values())
            .map(|(&x, &f)| 1.0 + f - (p - 1.0) * x.abs().powf(p - 2.0))
            .collect();
        let jac = |d: &[f64]| -> Result<Vec<f64>> {
            let lap = crate::grid::laplacian(d, h);
            let cross = v.with_values_unchecked(
                v.values().iter().zip(d).map(|(x, y)| x * y).collect(),
            );
            let psi = density_potential(&cross, beta)?;
            let mut out: Vec<f64> = (0..=n)
                .map(|i| -lap[i] + coef[i] * d[i] + 2.0 * v.values()[i] * psi.values()[i])
                .collect();
            out[n] = d[n];
            Ok(out)
        };
        let rhs: Vec<f64> = cur.residual.values().iter().map(|x| -x).collect();
        let eta = (0.1 * cur.rel_el).clamp(1e-12, 1e-4);
        let sol = gmres(jac, |x| prob.apply_precond(x), &rhs, eta, GMRES_RESTART, GMRES_MATVECS)?;

        let mut lambda = 1.0;
        let mut next = None;
        while lambda >= 1.0 / 64.0 {
            let vals = v.values().iter().zip(&sol.x).map(|(x, d)| x + lambda * d).collect();
            if let Ok(trial) = prob.evaluate(v.with_values_unchecked(vals)) {
                if trial.rel_el < (1.0 - ARMIJO * lambda) * cur.rel_el {
                    next = Some(trial);
                    break;
                }
            }
            lambda *= 0.5;
        }
        match next {
            Some(t) => {
                let stagnating = t.rel_el > 0.5 * cur.rel_el;
                cur = t;
                history.push((cur.energy, cur.rel_el));
                if stagnating && cur.rel_el <= tol_el {
                    break;
                }
            }
            None => {
                let ok = cur.rel_el <= tol_el;
                return Ok((cur, ok));
            }
        }
    }
    let ok = cur.rel_el <= tol_el;
    Ok((cur, ok))
}

fn initial_field(grid: &Arc<RadialGrid>, opts: &SolveOptions) -> Result<RadialField> {
    let mut v = match &opts.init {
        Init::Gaussian(w) => RadialField::gaussian(grid.clone(), *w),
        Init::File(path) => read_field_on(path, grid)?,
        Init::WarmStart(f) => {
            if f.grid().same_as(grid) {
                f.clone()
            } else {
                f.resample(grid.clone())
            }
        }
    };
    if opts.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let amp = opts.perturbation;
        let vals = v
            .values()
            .iter()
            .map(|x| x * (1.0 + amp * rng.gen_range(-1.0..=1.0)))
            .collect();
        v = v.with_values(vals)?;
    }
    if v.h1_norm() < DEGENERATE_H1 {
        return Err(Error::DegenerateIterate(format!(
            "initial field {} is the zero field",
            opts.init.describe()
        )));
    }
    Ok(v)
}

fn profile_diagnostics(v: &RadialField) -> (bool, bool) {
    let vals = v.values();
    let peak = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let noise = 1e-10 * peak;
    let positive = vals[..vals.len() - 1]
        .iter()
        .all(|&x| x > 0.0 || x.abs() <= noise);
    let monotone = vals.windows(2).all(|w| w[1] <= w[0] + noise);
    (positive, monotone)
}

/// Computes a least energy solution for `params` on `grid`.
pub fn solve_ground_state(
    params: &Params,
    grid: &Arc<RadialGrid>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let prob = Problem {
        params: *params,
        precond: preconditioner(grid),
    };
    let start = prob.project(&initial_field(grid, opts)?)?;
    let mut cur = prob.evaluate(start)?;
    let mut history = vec![(cur.energy, cur.rel_el)];
    let mut budget = Budget {
        left: opts.max_iters,
        descent: 0,
        newton: 0,
    };
    let mut best: Option<SolveReport> = None;
    let mut last_reason = String::from("iteration cap reached");

    for &tol_a in &DESCENT_TOLS {
        let (after_a, _) = descend(&prob, cur, tol_a, opts.step0, &mut budget, &mut history)?;
        let descent_state = after_a.v.clone();
        let (after_b, newton_ok) = newton(&prob, after_a, opts.tol_el, &mut budget, &mut history)?;

        let polished = prob.project(&after_b.v)?;
        let identity = IdentityReport::compute(&polished, params)?;
        let (positive, monotone) = profile_diagnostics(&polished);
        let report = SolveReport {
            m: identity.forms.energy(params),
            v: polished,
            params: *params,
            iters: budget.descent + budget.newton,
            descent_iters: budget.descent,
            newton_iters: budget.newton,
            identity,
            history: history.clone(),
            init: opts.init.describe(),
            seed: opts.seed,
            positive,
            monotone,
        };
        let accepted = identity.el_l2 <= opts.tol_el && identity.np.abs() <= opts.tol_np;
        if accepted && report.m > 0.0 {
            return Ok(report);
        }
        last_reason = if !newton_ok {
            format!(
                "Newton polish stalled at relative EL residual {:e}",
                identity.el_l2
            )
        } else {
            format!(
                "residuals above tolerance: EL {:e}, P {:e}",
                identity.el_l2, identity.np
            )
        };
        if best
            .as_ref()
            .map_or(true, |b| identity.el_l2 < b.identity.el_l2)
        {
            best = Some(report);
        }
        if budget.left == 0 {
            last_reason = "iteration cap reached".into();
            break;
        }
        // Retry from the descent limit with a tighter descent tolerance.
        cur = prob.evaluate(descent_state)?;
    }
    Err(Error::NoConvergence {
        reason: last_reason,
        best: best.map(Box::new),
    })
}

/// Continuation wrapper: prefers `warm` when it is a usable field, otherwise the
/// initialization in `opts`, falling back to the default Gaussian if that one is a
/// degenerate warm start as well.
pub fn solve_sweep_point(
    params: &Params,
    grid: &Arc<RadialGrid>,
    warm: Option<&RadialField>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let usable = |f: &RadialField| f.h1_norm() >= DEGENERATE_H1;
    let mut opts = opts.clone();
    match warm {
        Some(f) if usable(f) => opts.init = Init::WarmStart(f.clone()),
        _ => {
            if let Init::WarmStart(f) = &opts.init {
                if !usable(f) {
                    opts.init = SolveOptions::default().init;
                }
            }
        }
    }
    solve_ground_state(params, grid, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preconditioner_matches_second_order_stencil() {
        let grid = RadialGrid::new(10.0, 400).unwrap();
        let m = preconditioner(&grid);
        let v = RadialField::gaussian(Arc::new(grid.clone()), 1.0);
        let mv = m.apply(v.values());
        for (i, r) in grid.nodes().iter().enumerate().take(200) {
            let exact = -(r * r - 3.0) * (-r * r / 2.0).exp() + (-r * r / 2.0).exp();
            assert!((mv[i] - exact).abs() < 2e-3, "node {i}: {} vs {exact}", mv[i]);
        }
    }

    #[test]
    fn options_validation() {
        let mut o = SolveOptions::default();
        assert!(o.validate().is_ok());
        o.tol_el = 0.0;
        assert!(o.validate().is_err());
        let o = SolveOptions {
            init: Init::Gaussian(-1.0),
            ..Default::default()
        };
        assert!(o.validate().is_err());
    }

    #[test]
    fn zero_initial_field_is_degenerate() {
        let grid = RadialGrid::shared(10.0, 128).unwrap();
        let opts = SolveOptions {
            init: Init::WarmStart(RadialField::zeros(grid.clone())),
            ..Default::default()
        };
        let params = Params::new(4.0, 0.0).unwrap();
        assert!(matches!(
            solve_ground_state(&params, &grid, &opts),
            Err(Error::DegenerateIterate(_))
        ));
    }

    #[test]
    fn small_grid_solve_meets_contract() {
        let grid = RadialGrid::shared(20.0, 2048).unwrap();
        let params = Params::new(4.0, 0.5).unwrap();
        let rep = solve_ground_state(&params, &grid, &SolveOptions::default()).unwrap();
        assert!(rep.identity.el_l2 <= 1e-8);
        assert!(rep.identity.np.abs() <= 1e-10);
        assert!(rep.m > 0.0 && rep.positive && rep.monotone);
        let descent = &rep.history[..rep.descent_iters + 1];
        assert!(descent.windows(2).all(|w| w[1].0 <= w[0].0));
    }
}
