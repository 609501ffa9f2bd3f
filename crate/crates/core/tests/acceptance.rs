//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use bpgs::potentials::{bopp_podolsky_kernel, potential_k_beta, radial_convolve, radial_convolve_dense, Kernel};
use bpgs::asymptotics::{check_vanishing_term, convergence_report, run_sweep, Status, TrendThresholds};
use bpgs::fibering::{dilate, project_np};
use bpgs::functionals::{concentration_profile, nehari_residual, np_value, pohozaev_residual, FieldForms};
use bpgs::solver::{solve_ground_state, SolveOptions, SolveReport};
use bpgs::{Params, RadialField, RadialGrid};
use common::{fiber_argmax, Blob, Quadrature};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const P: f64 = 4.0;
const R_MAX: f64 = 40.0;
const N: usize = 4096;

fn grid(n: usize) -> Arc<RadialGrid> {
    RadialGrid::shared(R_MAX, n).unwrap()
}

fn ground_state(n: usize) -> SolveReport {
    solve_ground_state(&Params::new(P, 0.0).unwrap(), &grid(n), &SolveOptions::default())
        .expect("limit ground state")
}

fn reference() -> &'static SolveReport {
    static REF: OnceLock<SolveReport> = OnceLock::new();
    REF.get_or_init(|| ground_state(N))
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn identity_suite() -> Outcome {
    let coarse = reference();
    let fine = ground_state(2 * N);
    let id = &coarse.identity;
    let ratio = coarse.identity.raw.pohozaev.abs() / fine.identity.raw.pohozaev.abs();
    let detail = format!(
        "nehari={:.2e} P={:.2e} el={:.2e} pohozaev {:.2e} -> {:.2e} (ratio {ratio:.1})",
        id.nehari.abs(),
        id.np.abs(),
        id.el_l2,
        id.pohozaev.abs(),
        fine.identity.pohozaev.abs()
    );
    ensure(
        id.nehari.abs() <= 1e-8 && id.np.abs() <= 1e-10 && id.el_l2 <= 1e-8 && ratio >= 3.0,
        detail,
    )
}

/// `(v²∗K_β)(r)` for `v = e^{−r²/2}` by nested Gauss–Legendre quadrature of the
/// kernel itself, reduced to the radial distance `u = |x − y|`.
fn dense_k_beta(r: f64, beta: f64, q: &Quadrature) -> f64 {
    let rho = |s: f64| (-s * s).exp();
    let top = 10.0;
    if r == 0.0 {
        return q.integrate(|s| 4.0 * PI * s * s * rho(s) * bopp_podolsky_kernel(beta, s).unwrap(), 0.0, top, 400);
    }
    let shell = |s: f64| {
        let (lo, hi) = ((r - s).abs(), r + s);
        let panels = ((hi - lo) / beta).ceil() as usize + 1;
        q.integrate(|u| u * bopp_podolsky_kernel(beta, u).unwrap(), lo, hi, panels)
    };
    let f = |s: f64| s * rho(s) * shell(s);
    2.0 * PI / r * (q.integrate(f, 0.0, r, 200) + q.integrate(f, r, top.max(r + 1.0), 400))
}

fn kernel_oracle() -> Outcome {
    let g = grid(N);
    let v = RadialField::gaussian(g.clone(), 1.0);
    let q = Quadrature::new(12);
    let mut worst = 0.0_f64;
    for beta in [1.0, 0.1] {
        let phi = potential_k_beta(&v, beta).unwrap();
        for i in [0, 7, 25, 51, 102, 154, 256, 410, 717, 1024] {
            let r = g.nodes()[i];
            worst = worst.max(rel(phi.values()[i], dense_k_beta(r, beta, &q)));
        }
    }
    let rho = v.squared();
    let mut worst_scan = 0.0_f64;
    for kernel in [Kernel::Coulomb, Kernel::Yukawa(1.0), Kernel::Yukawa(10.0), Kernel::Exponential(1.0), Kernel::Exponential(10.0)] {
        let scan = radial_convolve(&rho, kernel).unwrap();
        let dense = radial_convolve_dense(&rho, kernel).unwrap();
        let scale = dense.values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for (a, b) in scan.values().iter().zip(dense.values()) {
            worst_scan = worst_scan.max((a - b).abs() / scale);
        }
    }
    ensure(
        worst <= 1e-8 && worst_scan <= 1e-12,
        format!("K_beta vs quadrature {worst:.2e}, scan vs dense {worst_scan:.2e}"),
    )
}

fn closed_forms() -> Outcome {
    let v = RadialField::gaussian(grid(N), 1.0);
    let (a, b, _) = v.norms(P);
    let c = bpgs::potentials::pair_form(&v.squared(), Kernel::Coulomb).unwrap();
    let pi32 = PI.powf(1.5);
    let errs = [
        rel(b, pi32),
        rel(a, 1.5 * pi32),
        rel(c, 2f64.sqrt() * PI.powf(2.5)),
    ];
    let ball_grid = RadialGrid::shared(4.0, 8192).unwrap();
    let ball = RadialField::from_fn(ball_grid.clone(), |r| {
        if r < 1.0 {
            1.0
        } else if r == 1.0 {
            0.5
        } else {
            0.0
        }
    })
    .unwrap();
    let phi = radial_convolve(&ball, Kernel::Coulomb).unwrap();
    let at_two = phi.values()[4096];
    assert_eq!(ball_grid.nodes()[4096], 2.0);
    let ball_errs = [rel(phi.values()[0], 2.0 * PI), rel(at_two, 2.0 * PI / 3.0)];
    let worst = errs.iter().chain(&ball_errs).fold(0.0_f64, |m, &x| m.max(x));
    ensure(
        worst <= 1e-6,
        format!(
            "b {:.1e} a {:.1e} coulomb {:.1e} ball(0) {:.1e} ball(2) {:.1e}",
            errs[0], errs[1], errs[2], ball_errs[0], ball_errs[1]
        ),
    )
}

fn random_blobs(seed: u64, count: usize) -> Vec<Blob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Blob::random(&mut rng)).collect()
}

fn vanishing_term() -> Outcome {
    let g = grid(N);
    let betas = [1.0, 0.5, 0.1, 0.05];
    let mut cases = 0;
    let mut min_slack = f64::INFINITY;
    for blob in random_blobs(34, 20) {
        let v = blob.field(&g);
        for beta in betas {
            let (lhs, rhs) = check_vanishing_term(&v, beta).unwrap();
            if !(lhs >= 0.0 && lhs < rhs) {
                return Err(format!("violated at beta={beta}: {lhs:e} >= {rhs:e} for {blob:?}"));
            }
            min_slack = min_slack.min((rhs - lhs) / rhs);
            cases += 1;
        }
    }
    let v = RadialField::gaussian(g, 1.0);
    let lhs: Vec<f64> = (0..8)
        .map(|k| check_vanishing_term(&v, 0.5_f64.powi(k)).unwrap().0)
        .collect();
    let decreasing = lhs.windows(2).all(|w| w[1] < w[0]);
    let shrink = lhs[lhs.len() - 1] / lhs[0];
    ensure(
        cases == 80 && decreasing && shrink < 1e-3,
        format!("{cases} cases, min relative slack {min_slack:.3e}; lhs(1/128)/lhs(1) = {shrink:.2e}"),
    )
}

fn fibering() -> Outcome {
    let g = grid(N);
    let q = Quadrature::new(10);
    let limit = Params::new(P, 0.0).unwrap();
    let (mut oracle_err, mut fixed_err, mut group_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (k, blob) in random_blobs(55, 50).into_iter().enumerate() {
        let v = blob.field(&g);
        let (a, b, d, c) = blob.forms(P, &q);
        let oracle = fiber_argmax(a, b, c, d, P);
        let res = project_np(&v, &limit).unwrap();
        oracle_err = oracle_err.max(rel(res.t_star, oracle));
        let again = project_np(&res.projected, &limit).unwrap();
        fixed_err = fixed_err.max((again.t_star - 1.0).abs());
        if k % 5 == 0 {
            for s in [0.7, 1.5] {
                let t = project_np(&dilate(&v, s).unwrap(), &limit).unwrap().t_star;
                group_err = group_err.max(rel(t, res.t_star / s));
            }
        }
    }
    ensure(
        oracle_err <= 1e-4 && fixed_err <= 1e-10 && group_err <= 1e-6,
        format!("argmax {oracle_err:.2e}, fixed point {fixed_err:.2e}, group {group_err:.2e}"),
    )
}

fn structural() -> Outcome {
    let g = grid(N);
    let mut split = 0.0_f64;
    for blob in random_blobs(77, 20) {
        let v = blob.field(&g);
        for beta in [0.0, 0.1, 1.0] {
            let params = Params::new(P, beta).unwrap();
            let np = np_value(&v, &params).unwrap();
            let neh = nehari_residual(&v, &params).unwrap();
            let poh = pohozaev_residual(&v, &params).unwrap();
            split = split.max((np - (2.0 * neh - poh)).abs() / (2.0 * neh).abs().max(poh.abs()));
        }
    }
    let mut decomposition = 0.0_f64;
    let opts = SolveOptions::default();
    for beta in [0.0, 0.1, 1.0] {
        let params = Params::new(P, beta).unwrap();
        let rep = if beta == 0.0 {
            reference().clone()
        } else {
            solve_ground_state(&params, &g, &opts).unwrap()
        };
        let forms = FieldForms::compute(&rep.v, &params).unwrap();
        decomposition = decomposition.max(rel(forms.manifold_energy(&params), forms.energy(&params)));
    }
    let m0 = reference().m;
    let total = concentration_profile(&reference().v, P).unwrap().last().unwrap().1;
    let mass = rel(total, m0);
    ensure(
        split <= 1e-12 && decomposition <= 1e-10 && mass <= 1e-6,
        format!("P split {split:.1e}, manifold energy {decomposition:.1e}, mu(B_R) vs m0 {mass:.1e}"),
    )
}

const BETAS: [f64; 6] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.025];

fn sweep() -> Outcome {
    let sweep = run_sweep(P, &BETAS, &grid(N), &SolveOptions::default(), true, |_, _| {})
        .map_err(|f| format!("sweep failed after {} records: {}", f.records.len(), f.error))?;
    let report = convergence_report(
        &sweep.records,
        sweep.m0(),
        sweep.reference.h1_norm(),
        TrendThresholds::default(),
    );
    let failing: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.status != Status::Pass)
        .map(|c| c.name.as_str())
        .collect();
    let last = sweep.records.last().unwrap();
    ensure(
        report.passed && failing.is_empty() && sweep.records.len() == BETAS.len(),
        format!(
            "{} checks, failing {failing:?}; final |t-1|={:.2e} m gap={:.2e} H1 gap={:.2e}",
            report.checks.len(),
            last.t_beta - 1.0,
            (sweep.m0() - last.m_beta) / sweep.m0(),
            last.h1_dist / sweep.reference.h1_norm()
        ),
    )
}

/// `(A/r)·sin⁴(π(r − R))` on `[R, R + 1]`, scaled to `‖·‖_{L²} = 0.05`.
fn shell_bump(g: &Arc<RadialGrid>, radius: f64) -> RadialField {
    let raw = RadialField::from_fn(g.clone(), |r| {
        if r > radius && r < radius + 1.0 {
            (PI * (r - radius)).sin().powi(4) / r
        } else {
            0.0
        }
    })
    .unwrap();
    raw.scaled(0.05 / raw.l2_norm_sq().sqrt())
}

fn brezis_lieb() -> Outcome {
    let g = grid(N);
    let coulomb = |f: &RadialField| bpgs::potentials::pair_form(&f.squared(), Kernel::Coulomb).unwrap();
    let vbar = RadialField::gaussian(g.clone(), 1.0);
    let c0 = coulomb(&vbar);
    let defects: Vec<f64> = [5.0, 10.0, 20.0]
        .iter()
        .map(|&radius| {
            let s = shell_bump(&g, radius);
            let w = vbar.add(&s).unwrap();
            (coulomb(&w) - coulomb(&w.sub(&vbar).unwrap()) - c0).abs() / c0
        })
        .collect();
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    ensure(
        decreasing && defects[2] <= 1e-3,
        format!("defects {:.3e} {:.3e} {:.3e}", defects[0], defects[1], defects[2]),
    )
}

fn bpgs(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bpgs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BPGS_OUT_DIR")
        .output()
        .expect("spawn bpgs")
}

fn harness() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let sweep_args = ["sweep", "--p=4", "--seed=7", "--format=csv,json"];
    let (a, b) = (root.join("a"), root.join("b"));
    let ra = bpgs(&sweep_args, &a);
    let rb = bpgs(&sweep_args, &b);
    if !(ra.status.code() == Some(0) && rb.status.code() == Some(0)) {
        return Err(format!("sweep exit codes {:?} {:?}", ra.status.code(), rb.status.code()));
    }
    let mut identical = true;
    for name in ["sweep.csv", "sweep.json", "report.json"] {
        identical &= std::fs::read(a.join(name)).unwrap() == std::fs::read(b.join(name)).unwrap();
    }
    let solve_args = ["solve", "--beta=0.5", "--seed=3"];
    let (sa, sb) = (root.join("sa"), root.join("sb"));
    bpgs(&solve_args, &sa);
    bpgs(&solve_args, &sb);
    for name in ["solution.txt", "solution.json"] {
        identical &= std::fs::read(sa.join(name)).unwrap() == std::fs::read(sb.join(name)).unwrap();
    }

    let cfg = root.join("fault.cfg");
    std::fs::write(&cfg, "betas=1,0.5,0.25\ndebug.fail_at=2\n").unwrap();
    let fault_dir = root.join("fault");
    let fault = bpgs(&["sweep", "--config", cfg.to_str().unwrap()], &fault_dir);
    let partial = std::fs::read_to_string(fault_dir.join("sweep.csv")).unwrap_or_default();
    let fault_ok = fault.status.code() == Some(1)
        && String::from_utf8_lossy(&fault.stderr).starts_with("ERROR 1 ")
        && partial.lines().count() == 3;

    let usage_cases: [&[&str]; 4] = [
        &["solve", "--p=abc"],
        &["solve", "--p=7"],
        &["sweep", "--betas=0.1,0.5"],
        &["launch"],
    ];
    let mut usage_ok = true;
    for args in usage_cases {
        let out = bpgs(args, &root.join("usage"));
        usage_ok &= out.status.code() == Some(2)
            && String::from_utf8_lossy(&out.stderr).starts_with("ERROR 2 ");
    }
    std::fs::write(&cfg, "solver.tolerance=1e-3\n").unwrap();
    let unknown = bpgs(&["solve", "--config", cfg.to_str().unwrap()], &root.join("usage"));
    usage_ok &= unknown.status.code() == Some(2)
        && String::from_utf8_lossy(&unknown.stderr).contains("solver.tolerance");
    ensure(
        identical && fault_ok && usage_ok,
        format!(
            "byte-identical {identical}, fault exit {:?} with {} partial rows, usage errors {usage_ok}",
            fault.status.code(),
            partial.lines().count().saturating_sub(1)
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("identity suite", identity_suite),
        ("kernel oracle equivalence", kernel_oracle),
        ("closed-form checks", closed_forms),
        ("vanishing-term inequality", vanishing_term),
        ("fibering projection", fibering),
        ("beta sweep convergence", sweep),
        ("structural identities", structural),
        ("Brezis-Lieb splitting", brezis_lieb),
        ("command-line harness", harness),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {} {name}: PASS ({secs:.1}s) {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1}s) {d}", k + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
