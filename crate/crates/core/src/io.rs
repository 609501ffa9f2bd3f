//! Solution files and atomic artifact writes.
//!
//! A solution file is plain text: a header `# R_max=<v> N=<v> p=<v> beta=<v>` followed
//! by one `r value` line per node. Floats are written with 17 significant digits so a
//! file re-loads bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Params, RadialField, RadialGrid};

/// Fixed 17-significant-digit rendering used by every text artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn render_solution(v: &RadialField, params: &Params) -> String {
    let grid = v.grid();
    let mut out = format!(
        "# R_max={} N={} p={} beta={}\n",
        fmt_f64(grid.r_max()),
        grid.n(),
        fmt_f64(params.p),
        fmt_f64(params.beta)
    );
    for (r, x) in grid.nodes().iter().zip(v.values()) {
        out.push_str(&fmt_f64(*r));
        out.push(' ');
        out.push_str(&fmt_f64(*x));
        out.push('\n');
    }
    out
}

pub fn write_solution(path: &Path, v: &RadialField, params: &Params) -> Result<()> {
    write_atomic(path, render_solution(v, params).as_bytes())
}

#[derive(Debug, Clone)]
pub struct SolutionFile {
    pub field: RadialField,
    pub params: Params,
}

pub fn parse_solution(text: &str) -> Result<SolutionFile> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing '#' header".into()))?;
    let (mut r_max, mut n, mut p, mut beta) = (None, None, None, None);
    for item in body.split_whitespace() {
        let (key, val) = item
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header item '{item}'")))?;
        let num = || {
            val.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number for {key}: '{val}'")))
        };
        match key {
            "R_max" => r_max = Some(num()?),
            "N" => {
                n = Some(
                    val.parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad N: '{val}'")))?,
                )
            }
            "p" => p = Some(num()?),
            "beta" => beta = Some(num()?),
            _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks {k}"));
    let r_max = r_max.ok_or_else(|| missing("R_max"))?;
    let n = n.ok_or_else(|| missing("N"))?;
    let params = Params::new(p.ok_or_else(|| missing("p"))?, beta.ok_or_else(|| missing("beta"))?)?;
    let grid = RadialGrid::shared(r_max, n)?;

    let mut values = Vec::with_capacity(n + 1);
    for (i, line) in lines.enumerate() {
        let mut cols = line.split_whitespace();
        let (Some(r), Some(x), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Format(format!("line {}: expected two columns", i + 2)));
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("line {}: bad number '{s}'", i + 2)))
        };
        let r = parse(r)?;
        if i > n || (r - grid.nodes()[i]).abs() > 1e-9 * r_max {
            return Err(Error::Format(format!(
                "line {}: node {r} does not match the header grid",
                i + 2
            )));
        }
        values.push(parse(x)?);
    }
    if values.len() != n + 1 {
        return Err(Error::Format(format!(
            "expected {} rows, found {}",
            n + 1,
            values.len()
        )));
    }
    let field = RadialField::new(grid, values).map_err(|e| Error::Format(e.to_string()))?;
    Ok(SolutionFile { field, params })
}

pub fn read_solution(path: &Path) -> Result<SolutionFile> {
    parse_solution(&fs::read_to_string(path)?)
}

/// Loads a solution and resamples it onto `grid` if the grids differ.
pub fn read_field_on(path: &Path, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    let file = read_solution(path)?;
    if file.field.grid().same_as(grid) {
        Ok(file.field)
    } else {
        Ok(file.field.resample(grid.clone()))
    }
}
