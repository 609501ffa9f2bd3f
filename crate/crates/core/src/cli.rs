//! The `bpgs` command line: configuration, commands and artifacts.
//!
//! Configuration comes from three layers with precedence CLI > config file >
//! defaults. The config file is flat `key=value` text; keys are the long flag names
//! (`p`, `beta`, `betas`, `rmax`, `n`, `out`, `format`, `seed`, `warm_start`,
//! `input`) plus dotted solver and debug keys (`solver.tol_el`, `solver.tol_np`,
//! `solver.max_iters`, `solver.step0`, `solver.init_width`, `solver.perturbation`,
//! `debug.fail_at`). Blank lines and `#` comments are ignored.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error. Every failure also
//! prints one `ERROR <code> <detail>` line on stderr.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgAction, Parser, ValueEnum};

use crate::asymptotics::{
    convergence_report, render_csv, sweep_record, validate_betas, SweepRecord, SweepSummary,
    TrendThresholds,
};
use crate::error::Error;
use crate::functionals::IdentityReport;
use crate::grid::{Params, RadialField, RadialGrid, DEFAULT_N, DEFAULT_R_MAX};
use crate::io::{fmt_f64, read_solution, write_atomic, write_solution};
use crate::solver::{
    solve_ground_state, solve_sweep_point, Init, SolveOptions, SolveReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const OUT_DIR_ENV: &str = "BPGS_OUT_DIR";

pub const DEFAULT_BETAS: [f64; 6] = [1.0, 0.5, 0.25, 0.1, 0.05, 0.025];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Sweep,
    Check,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Solution,
    Plot,
}

#[derive(Debug, Parser)]
#[command(name = "bpgs", version, about = "Radial ground states of the Schrödinger–Bopp–Podolsky system")]
struct Cli {
    command: Command,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long)]
    rmax: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, solution, plot.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    warm_start: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solution file used as the initial field (`solve`) or as the field to check.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for UsageError {}

fn usage(key: &str, message: impl Into<String>) -> UsageError {
    UsageError {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol_el: f64,
    pub tol_np: f64,
    pub max_iters: usize,
    pub step0: f64,
    pub init_width: f64,
    pub perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig {
            tol_el: d.tol_el,
            tol_np: d.tol_np,
            max_iters: d.max_iters,
            step0: d.step0,
            init_width: 1.0,
            perturbation: d.perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub p: f64,
    pub beta: f64,
    pub betas: Vec<f64>,
    pub r_max: f64,
    pub n: usize,
    pub out: PathBuf,
    pub formats: BTreeSet<Format>,
    pub seed: u64,
    pub warm_start: bool,
    pub solver: SolverConfig,
    pub input: Option<PathBuf>,
    /// Fault injection: fail the sweep point with this index.
    pub fail_at: Option<usize>,
}

impl RunConfig {
    fn defaults(command: Command, env_out: Option<&str>) -> Self {
        RunConfig {
            command,
            p: 4.0,
            beta: 0.0,
            betas: DEFAULT_BETAS.to_vec(),
            r_max: DEFAULT_R_MAX,
            n: DEFAULT_N,
            out: PathBuf::from(env_out.unwrap_or("out")),
            formats: [Format::Csv, Format::Json, Format::Solution, Format::Plot]
                .into_iter()
                .collect(),
            seed: 0,
            warm_start: true,
            solver: SolverConfig::default(),
            input: None,
            fail_at: None,
        }
    }

    pub fn params(&self) -> Params {
        Params::new(self.p, self.beta).expect("validated")
    }

    pub fn grid(&self) -> Arc<RadialGrid> {
        RadialGrid::shared(self.r_max, self.n).expect("validated")
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            init: match &self.input {
                Some(path) => Init::File(path.clone()),
                None => Init::Gaussian(self.solver.init_width),
            },
            step0: self.solver.step0,
            tol_el: self.solver.tol_el,
            tol_np: self.solver.tol_np,
            max_iters: self.solver.max_iters,
            seed: self.seed,
            perturbation: self.solver.perturbation,
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Applies one `key=value` setting.
    fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let value = value.trim();
        let num = |k: &str| {
            value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| usage(k, format!("malformed number '{value}'")))
        };
        let count = |k: &str| {
            value
                .parse::<usize>()
                .map_err(|_| usage(k, format!("malformed integer '{value}'")))
        };
        match key {
            "p" => self.p = num(key)?,
            "beta" => self.beta = num(key)?,
            "betas" => {
                self.betas = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| usage(key, format!("malformed number '{s}'")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "rmax" => self.r_max = num(key)?,
            "n" => self.n = count(key)?,
            "out" => self.out = PathBuf::from(value),
            "format" => {
                let mut set = BTreeSet::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let f = Format::from_str(item, true)
                        .map_err(|_| usage(key, format!("unknown format '{item}'")))?;
                    set.insert(f);
                }
                if set.is_empty() {
                    return Err(usage(key, "empty format list"));
                }
                self.formats = set;
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| usage(key, format!("malformed integer '{value}'")))?
            }
            "warm_start" => {
                self.warm_start = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(usage(key, format!("expected a boolean, got '{value}'"))),
                }
            }
            "input" => self.input = Some(PathBuf::from(value)),
            "solver.tol_el" => self.solver.tol_el = num(key)?,
            "solver.tol_np" => self.solver.tol_np = num(key)?,
            "solver.max_iters" => self.solver.max_iters = count(key)?,
            "solver.step0" => self.solver.step0 = num(key)?,
            "solver.init_width" => self.solver.init_width = num(key)?,
            "solver.perturbation" => self.solver.perturbation = num(key)?,
            "debug.fail_at" => self.fail_at = Some(count(key)?),
            _ => return Err(usage(key, "unknown configuration key")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), UsageError> {
        Params::new(self.p, 0.0).map_err(|_| usage("p", format!("p must lie in (3, 6), got {}", self.p)))?;
        Params::new(self.p, self.beta).map_err(|_| usage("beta", format!("beta must be >= 0, got {}", self.beta)))?;
        RadialGrid::new(self.r_max, self.n).map_err(|e| usage("rmax/n", e.to_string()))?;
        if self.command == Command::Sweep {
            validate_betas(&self.betas).map_err(|e| usage("betas", e.to_string()))?;
        }
        self.solve_options()
            .validate()
            .map_err(|e| usage("solver", e.to_string()))?;
        Ok(())
    }
}

fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage("config", format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage("config", format!("line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses `args` (without the program name) into a validated configuration.
/// `env_out` is the value of `BPGS_OUT_DIR`, if set.
pub fn parse_config<I, S>(args: I, env_out: Option<&str>) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("bpgs")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| usage("args", e.to_string().trim().to_string()))?;
    let mut cfg = RunConfig::defaults(cli.command, env_out);
    if let Some(path) = &cli.config {
        for (k, v) in read_config_file(path)? {
            cfg.set(&k, &v)?;
        }
    }
    let flags: [(&str, Option<String>); 8] = [
        ("p", cli.p),
        ("beta", cli.beta),
        ("betas", cli.betas),
        ("rmax", cli.rmax),
        ("n", cli.n),
        ("format", cli.format),
        ("seed", cli.seed),
        ("warm_start", cli.warm_start),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(input) = cli.input {
        cfg.input = Some(input);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_error(code: i32, detail: impl fmt::Display) -> i32 {
    let detail = detail.to_string().replace('\n', " ");
    eprintln!("ERROR {code} {detail}");
    code
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Full entry point: parse, run, return the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let env_out = std::env::var(OUT_DIR_ENV).ok();
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    if args.iter().any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V") {
        let argv = std::iter::once(std::ffi::OsString::from("bpgs")).chain(args.clone());
        if let Err(e) = Cli::try_parse_from(argv) {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    }
    match parse_config(args, env_out.as_deref()) {
        Ok(cfg) => run(&cfg),
        Err(e) => report_error(EXIT_USAGE, e),
    }
}

pub fn run(cfg: &RunConfig) -> i32 {
    let result = match cfg.command {
        Command::Solve => run_solve(cfg),
        Command::Sweep => run_sweep_command(cfg),
        Command::Check => run_check(cfg),
        Command::Report => run_report(cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(error_code(&e), e),
    }
}

fn write_text(path: &Path, text: &str) -> crate::Result<()> {
    write_atomic(path, text.as_bytes())
}

fn beta_tag(beta: f64) -> String {
    format!("{beta}")
}

fn write_solve_artifacts(cfg: &RunConfig, rep: &SolveReport, stem: &str) -> crate::Result<()> {
    if cfg.wants(Format::Solution) {
        write_solution(&cfg.out.join(format!("{stem}.txt")), &rep.v, &rep.params)?;
    }
    if cfg.wants(Format::Json) {
        write_text(&cfg.out.join(format!("{stem}.json")), &(rep.to_json() + "\n"))?;
    }
    if cfg.wants(Format::Csv) {
        let mut csv = String::from("iter,energy,el_rel\n");
        for (i, (e, r)) in rep.history.iter().enumerate() {
            csv.push_str(&format!("{i},{},{}\n", fmt_f64(*e), fmt_f64(*r)));
        }
        write_text(&cfg.out.join(format!("{stem}_history.csv")), &csv)?;
    }
    Ok(())
}

fn run_solve(cfg: &RunConfig) -> crate::Result<i32> {
    let params = cfg.params();
    match solve_ground_state(&params, &cfg.grid(), &cfg.solve_options()) {
        Ok(rep) => {
            write_solve_artifacts(cfg, &rep, "solution")?;
            println!(
                "beta={} p={} m={} iters={} nehari={:e} pohozaev={:e} np={:e} el={:e}",
                params.beta,
                params.p,
                fmt_f64(rep.m),
                rep.iters,
                rep.identity.nehari,
                rep.identity.pohozaev,
                rep.identity.np,
                rep.identity.el_l2
            );
            Ok(EXIT_OK)
        }
        Err(Error::NoConvergence { reason, best }) => {
            if let Some(best) = best {
                write_solve_artifacts(cfg, &best, "solution_best")?;
            }
            Ok(report_error(EXIT_NUMERICAL, format!("no-convergence {reason}")))
        }
        Err(e) => Err(e),
    }
}

struct SweepWriter<'a> {
    cfg: &'a RunConfig,
    reference: &'a SolveReport,
}

impl SweepWriter<'_> {
    fn write(&self, records: &[SweepRecord]) -> crate::Result<()> {
        let cfg = self.cfg;
        if cfg.wants(Format::Csv) {
            write_text(&cfg.out.join("sweep.csv"), &render_csv(records))?;
        }
        if cfg.wants(Format::Json) {
            let summary = SweepSummary {
                p: cfg.p,
                m0: self.reference.m,
                v0_h1: self.reference.h1_norm(),
                r_max: cfg.r_max,
                n: cfg.n,
                records: records.to_vec(),
            };
            let json = serde_json::to_string_pretty(&summary).expect("plain values serialize");
            write_text(&cfg.out.join("sweep.json"), &(json + "\n"))?;
        }
        if cfg.wants(Format::Plot) {
            let columns: [(&str, fn(&SweepRecord) -> f64); 3] = [
                ("m_beta", |r| r.m_beta),
                ("t_beta", |r| r.t_beta),
                ("h1_dist", |r| r.h1_dist),
            ];
            for (name, f) in columns {
                let mut text = format!("# beta {name}\n");
                for r in records {
                    text.push_str(&format!("{} {}\n", fmt_f64(r.beta), fmt_f64(f(r))));
                }
                write_text(&cfg.out.join(format!("{name}.dat")), &text)?;
            }
        }
        Ok(())
    }
}

fn solve_point(
    cfg: &RunConfig,
    grid: &Arc<RadialGrid>,
    index: usize,
    warm: Option<&RadialField>,
    reference: &SolveReport,
) -> crate::Result<(SolveReport, SweepRecord)> {
    let beta = cfg.betas[index];
    if cfg.fail_at == Some(index) {
        return Err(Error::no_convergence(format!(
            "injected failure at beta={beta} (debug.fail_at={index})"
        )));
    }
    let params = Params::new(cfg.p, beta)?;
    let rep = solve_sweep_point(&params, grid, warm, &cfg.solve_options())?;
    let rec = sweep_record(reference, &rep)?;
    Ok((rep, rec))
}

fn run_sweep_command(cfg: &RunConfig) -> crate::Result<i32> {
    let grid = cfg.grid();
    let opts = cfg.solve_options();
    let reference = match solve_ground_state(&Params::new(cfg.p, 0.0)?, &grid, &opts) {
        Ok(r) => r,
        Err(e) => {
            return Ok(report_error(EXIT_NUMERICAL, format!("reference solve failed: {e}")));
        }
    };
    let writer = SweepWriter {
        cfg,
        reference: &reference,
    };
    if cfg.wants(Format::Solution) {
        write_solution(&cfg.out.join("solution_beta0.txt"), &reference.v, &reference.params)?;
    }
    let mut records = Vec::new();
    let mut failure = None;
    if cfg.warm_start {
        let mut warm = reference.v.clone();
        for i in 0..cfg.betas.len() {
            match solve_point(cfg, &grid, i, Some(&warm), &reference) {
                Ok((rep, rec)) => {
                    records.push(rec);
                    writer.write(&records)?;
                    if cfg.wants(Format::Solution) {
                        write_solution(
                            &cfg.out.join(format!("solution_beta{}.txt", beta_tag(rec.beta))),
                            &rep.v,
                            &rep.params,
                        )?;
                    }
                    warm = rep.v;
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    } else {
        let results: Vec<crate::Result<(SolveReport, SweepRecord)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.betas.len())
                .map(|i| {
                    let grid = &grid;
                    let reference = &reference;
                    s.spawn(move || solve_point(cfg, grid, i, None, reference))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });
        for res in results {
            match res {
                Ok((rep, rec)) => {
                    records.push(rec);
                    if cfg.wants(Format::Solution) {
                        write_solution(
                            &cfg.out.join(format!("solution_beta{}.txt", beta_tag(rec.beta))),
                            &rep.v,
                            &rep.params,
                        )?;
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        writer.write(&records)?;
    }
    if let Some(e) = failure {
        return Ok(report_error(
            EXIT_NUMERICAL,
            format!("sweep aborted after {} records: {e}", records.len()),
        ));
    }
    let report = convergence_report(
        &records,
        reference.m,
        reference.h1_norm(),
        TrendThresholds::default(),
    );
    print!("{}", report.render_table(&records));
    if cfg.wants(Format::Json) {
        let json = serde_json::to_string_pretty(&report).expect("plain values serialize");
        write_text(&cfg.out.join("report.json"), &(json + "\n"))?;
    }
    if report.passed {
        Ok(EXIT_OK)
    } else {
        Ok(report_error(EXIT_NUMERICAL, "convergence report has failing checks"))
    }
}

fn run_check(cfg: &RunConfig) -> crate::Result<i32> {
    let (v, params) = match &cfg.input {
        Some(path) => {
            let file = read_solution(path)?;
            (file.field, file.params)
        }
        None => {
            let params = cfg.params();
            match solve_ground_state(&params, &cfg.grid(), &cfg.solve_options()) {
                Ok(rep) => (rep.v, params),
                Err(e) => return Ok(report_error(EXIT_NUMERICAL, e)),
            }
        }
    };
    let identity = IdentityReport::compute(&v, &params)?;
    let forms = identity.forms;
    let p = params.p;
    let mut failures = Vec::new();
    if identity.el_l2 > cfg.solver.tol_el {
        failures.push(format!("EL residual {:e} > {:e}", identity.el_l2, cfg.solver.tol_el));
    }
    if identity.np.abs() > cfg.solver.tol_np {
        failures.push(format!("P residual {:e} > {:e}", identity.np, cfg.solver.tol_np));
    }
    let energy = forms.energy(&params);
    let h1_slack = energy - (p - 3.0) / (2.0 * p - 3.0) * forms.h1_sq();
    if !(h1_slack >= 0.0) {
        failures.push(format!("H1 lower bound violated by {h1_slack:e}"));
    }
    let lp_slack = (2.0 * p - 3.0) / p * forms.d - 0.5 * forms.h1_sq();
    if !(lp_slack >= 0.0) {
        failures.push(format!("L^p lower bound violated by {lp_slack:e}"));
    }
    let mut vanishing = None;
    if params.beta > 0.0 {
        let (lhs, rhs) = crate::asymptotics::check_vanishing_term(&v, params.beta)?;
        if !(lhs < rhs) {
            failures.push(format!("vanishing term bound: {lhs:e} >= {rhs:e}"));
        }
        vanishing = Some((lhs, rhs));
    }
    let json = serde_json::json!({
        "identity": identity,
        "energy": energy,
        "h1_bound_slack": h1_slack,
        "lp_bound_slack": lp_slack,
        "vanishing_term": vanishing.map(|(l, r)| serde_json::json!({"lhs": l, "rhs": r})),
        "failures": failures,
    });
    if cfg.wants(Format::Json) {
        let text = serde_json::to_string_pretty(&json).expect("plain values serialize");
        write_text(&cfg.out.join("check.json"), &(text + "\n"))?;
    }
    println!("{}", identity.to_json());
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Ok(report_error(EXIT_NUMERICAL, format!("check failed: {}", failures.join("; "))))
    }
}

fn run_report(cfg: &RunConfig) -> crate::Result<i32> {
    let path = cfg.out.join("sweep.json");
    let Ok(text) = std::fs::read_to_string(&path) else {
        return Ok(report_error(EXIT_NUMERICAL, "no records"));
    };
    let summary: SweepSummary = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if summary.records.is_empty() {
        return Ok(report_error(EXIT_NUMERICAL, "no records"));
    }
    let report = convergence_report(
        &summary.records,
        summary.m0,
        summary.v0_h1,
        TrendThresholds::default(),
    );
    print!("{}", report.render_table(&summary.records));
    if report.passed {
        Ok(EXIT_OK)
    } else {
        Ok(report_error(EXIT_NUMERICAL, "convergence report has failing checks"))
    }
}
