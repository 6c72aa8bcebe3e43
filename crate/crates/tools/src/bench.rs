//! `mpcc bench`: the two result tables, one row per (scheme, eps).
//!
//! Every (scheme, eps) cell is an independent homotopy run stopped at that
//! eps, so cells run on their own threads; rows are assembled in cell
//! order. CSV schema: `problem, scheme, eps, status, z1..zn, p1..pm, u1..um,
//! uL1..uLm, uU1..uUm, vG1..vGm, vH1..vHm, vREG1..vREGm`, with the columns
//! that do not belong to a row's scheme left empty.

use std::fmt::Write as _;
use std::io::Write;
use std::thread;

use mpcc_core::bounding::{run_homotopy, HomotopyOptions, IterationRecord};
use mpcc_core::problems::RegistryEntry;
use mpcc_core::Scheme;

use crate::config::entry;
use crate::format::{full, sig6};
use crate::solve::{multiplier_columns, multiplier_values};
use crate::{CliError, CliResult};

pub const TABLE_EPS: [f64; 3] = [1e-6, 1e-9, 1e-12];

/// Registry problem behind each table.
pub fn table_problem(table: u8) -> CliResult<&'static str> {
    match table {
        1 => Ok("scholtes4"),
        2 => Ok("ex9_2_2"),
        t => Err(CliError::Usage(format!("no table {t}; expected 1 or 2"))),
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub scheme: Scheme,
    pub eps: f64,
    pub outcome: Result<IterationRecord, String>,
}

fn run_cell(e: &RegistryEntry, scheme: Scheme, eps: f64) -> Cell {
    let opts = HomotopyOptions {
        eps_tol: eps,
        z0: Some(e.default_z0.clone()),
        ..HomotopyOptions::default()
    };
    let t = run_homotopy(&e.problem, scheme, &opts);
    let outcome = match t.record_at(eps) {
        Some(r) => Ok(r.clone()),
        None => Err(match &t.failure {
            Some(f) => format!("failed at k={} eps={}: {}", f.k, sig6(f.eps), f.message),
            None => "eps not reached".into(),
        }),
    };
    Cell { scheme, eps, outcome }
}

/// Runs all cells concurrently; the result is in `schemes x TABLE_EPS` order.
pub fn run_cells(e: &RegistryEntry, schemes: &[Scheme]) -> Vec<Cell> {
    let jobs: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&s| TABLE_EPS.iter().map(move |&eps| (s, eps)))
        .collect();
    thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(s, eps)| scope.spawn(move || run_cell(e, s, eps)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench cell panicked")).collect()
    })
}

fn all_multiplier_columns(m: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=m).map(|i| format!("p{i}")).collect();
    for s in Scheme::ALL {
        cols.extend(multiplier_columns(s, m));
    }
    cols
}

pub fn csv_header(n: usize, m: usize) -> Vec<String> {
    let mut h: Vec<String> = ["problem", "scheme", "eps", "status"].map(String::from).to_vec();
    h.extend((1..=n).map(|j| format!("z{j}")));
    h.extend(all_multiplier_columns(m));
    h
}

pub fn write_csv<W: Write>(problem: &str, n: usize, m: usize, cells: &[Cell], w: W) -> CliResult<()> {
    let header = csv_header(n, m);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    for c in cells {
        let mut row = vec![problem.to_string(), c.scheme.to_string(), full(c.eps)];
        match &c.outcome {
            Ok(r) => {
                row.push("ok".into());
                row.extend(r.z.iter().map(|&x| full(x)));
                let mine = multiplier_columns(c.scheme, m);
                let vals = multiplier_values(&r.inner);
                for col in &header[4 + n..] {
                    if let Some(i) = col.strip_prefix('p').and_then(|i| i.parse::<usize>().ok()) {
                        row.push(if c.scheme == Scheme::Ba { full(r.p[i - 1]) } else { String::new() });
                    } else if let Some(k) = mine.iter().position(|x| x == col) {
                        row.push(full(vals[k]));
                    } else {
                        row.push(String::new());
                    }
                }
            }
            Err(msg) => {
                row.push(format!("failed: {msg}"));
                row.resize(header.len(), String::new());
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One markdown table per scheme, rows by eps.
pub fn markdown(problem: &str, table: Option<u8>, n: usize, m: usize, cells: &[Cell]) -> String {
    let mut s = String::new();
    match table {
        Some(t) => {
            let _ = writeln!(s, "## Table {t}: {problem}\n");
        }
        None => {
            let _ = writeln!(s, "## {problem}\n");
        }
    }
    let mut schemes: Vec<Scheme> = Vec::new();
    for c in cells {
        if !schemes.contains(&c.scheme) {
            schemes.push(c.scheme);
        }
    }
    for scheme in schemes {
        let mut cols: Vec<String> = vec!["eps".into()];
        cols.extend((1..=n).map(|j| format!("z{j}")));
        if scheme == Scheme::Ba {
            cols.extend((1..=m).map(|i| format!("p{i}")));
        }
        cols.extend(multiplier_columns(scheme, m));
        let _ = writeln!(s, "### {scheme}\n");
        let _ = writeln!(s, "| {} |", cols.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(cols.len()));
        for c in cells.iter().filter(|c| c.scheme == scheme) {
            let mut row = vec![sig6(c.eps)];
            match &c.outcome {
                Ok(r) => {
                    row.extend(r.z.iter().map(|&x| sig6(x)));
                    if scheme == Scheme::Ba {
                        row.extend(r.p.iter().map(|&x| sig6(x)));
                    }
                    row.extend(multiplier_values(&r.inner).into_iter().map(sig6));
                }
                Err(msg) => row.push(format!("failed: {msg}")),
            }
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        let _ = writeln!(s);
    }
    s
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub table: u8,
    /// Overrides the table's problem, e.g. with one of its variants.
    pub problem: Option<String>,
    /// All schemes when empty.
    pub schemes: Vec<Scheme>,
    pub csv: Option<std::path::PathBuf>,
    pub markdown: Option<std::path::PathBuf>,
}

pub fn run<W: Write>(args: &BenchArgs, stdout: &mut W) -> CliResult<()> {
    let name = match &args.problem {
        Some(p) => {
            table_problem(args.table)?;
            p.as_str()
        }
        None => table_problem(args.table)?,
    };
    let e = entry(name)?;
    let schemes = if args.schemes.is_empty() { Scheme::ALL.to_vec() } else { args.schemes.clone() };
    let cells = run_cells(&e, &schemes);
    let (n, m) = (e.problem.n, e.problem.m());
    let md = markdown(&e.problem.name, Some(args.table), n, m, &cells);
    stdout.write_all(md.as_bytes())?;
    if let Some(path) = &args.markdown {
        std::fs::write(path, &md)?;
    }
    if let Some(path) = &args.csv {
        write_csv(&e.problem.name, n, m, &cells, std::fs::File::create(path)?)?;
    }
    let failed: Vec<String> = cells
        .iter()
        .filter(|c| c.outcome.is_err())
        .map(|c| format!("{} eps={}", c.scheme, sig6(c.eps)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!("cells failed: {}", failed.join(", "))))
    }
}
