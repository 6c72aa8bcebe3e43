//! `mpcc classify`: stationarity audit of a given point.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use mpcc_core::oracle::sample_tangent_descent;
use mpcc_core::stationarity::{audit, Class, StationarityError, StationarityReport};

use crate::config::entry;
use crate::format::{full, index_set, keyed, sig6, vector};
use crate::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct ClassifyArgs {
    pub problem: String,
    pub point: Vec<f64>,
    pub tol: f64,
    /// Ω for the reduced B-check, 0-based.
    pub omega: Option<Vec<usize>>,
    pub samples: usize,
    pub seed: u64,
    /// `key,value` CSV of the verdicts.
    pub out: Option<PathBuf>,
}

fn witness_line(r: &StationarityReport, c: Class) -> Option<String> {
    let w = r.class(c).witness.as_ref()?;
    Some(format!(
        "  {} witness: lambda_G {}  lambda_H {}  lambda_g {}  lambda_h {}",
        c.name(),
        keyed(&w.lambda_comp_g),
        keyed(&w.lambda_comp_h),
        vector(&w.lambda_g),
        vector(&w.lambda_h)
    ))
}

pub fn report_text(problem: &str, z: &[f64], r: &StationarityReport, sampled: Option<(f64, usize)>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem {problem} at z = {}", vector(z));
    let _ = writeln!(
        s,
        "index sets: I_g {}  alpha {}  gamma {}  beta {}",
        index_set(&r.sets.active_g),
        index_set(&r.sets.alpha),
        index_set(&r.sets.gamma),
        index_set(&r.sets.beta)
    );
    for c in Class::ALL {
        let _ = writeln!(s, "{}: {}", c.name(), r.class(c).holds);
    }
    let _ = writeln!(s, "piecewise-M: {}", r.piecewise_m.holds);
    let _ = writeln!(s, "B(via LPCC): {}", r.b_via_lpcc.b_stationary);
    if let Some(b) = &r.b_reduced {
        let _ = writeln!(s, "B(reduced, omega {}): {}", index_set(&b.omega), b.b_stationary);
    }
    let _ = writeln!(s, "MPCC-LICQ: {} (rank {} of {})", r.licq.holds(), r.licq.rank, r.licq.rows);
    let _ = writeln!(s, "null space of the multiplier system: {}", r.nullspace_dim);
    for c in Class::ALL {
        if let Some(line) = witness_line(r, c) {
            let _ = writeln!(s, "{line}");
        }
    }
    for p in &r.piecewise_m.partitions {
        let verdict = if p.holds() { "multipliers found" } else { "multiplier-infeasible" };
        let _ = write!(s, "  partition {}: {verdict}", p.partition);
        if !p.zero_gradient_rows.is_empty() {
            let _ = write!(s, " (vanishing gradient rows {})", index_set(&p.zero_gradient_rows));
        }
        let _ = writeln!(s);
    }
    if let Some(b) = r.b_via_lpcc.failing() {
        if let Some((d, slope)) = &b.descent {
            let _ = writeln!(s, "descent on branch {}: d = {}, grad f . d = {}", b.partition, vector(d), sig6(*slope));
        }
    }
    if let Some((worst, n)) = sampled {
        let _ = writeln!(s, "sampled tangent slope: {} over {n} directions", sig6(worst));
    }
    let _ = writeln!(s, "note: {}", r.caveat);
    s
}

pub fn report_rows(r: &StationarityReport) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = Class::ALL
        .iter()
        .map(|&c| (c.name().to_string(), r.class(c).holds.to_string()))
        .collect();
    rows.push(("piecewise_m".into(), r.piecewise_m.holds.to_string()));
    rows.push(("b_via_lpcc".into(), r.b_via_lpcc.b_stationary.to_string()));
    if let Some(b) = &r.b_reduced {
        rows.push(("b_reduced".into(), b.b_stationary.to_string()));
    }
    rows.push(("licq_rank".into(), r.licq.rank.to_string()));
    rows.push(("licq_rows".into(), r.licq.rows.to_string()));
    if let Some(p) = r.piecewise_m.failing() {
        rows.push(("failing_partition".into(), p.partition.to_string()));
    }
    if let Some((_, slope)) = r.b_via_lpcc.failing().and_then(|b| b.descent.as_ref()) {
        rows.push(("descent_slope".into(), full(*slope)));
    }
    rows
}

pub fn run<W: Write>(args: &ClassifyArgs, stdout: &mut W) -> CliResult<()> {
    let e = entry(&args.problem)?;
    let p = &e.problem;
    if args.point.len() != p.n {
        return Err(CliError::Usage(format!("{} needs a point with {} entries, got {}", p.name, p.n, args.point.len())));
    }
    if !(args.tol > 0.0) {
        return Err(CliError::Usage(format!("tol must be positive, got {}", args.tol)));
    }
    let r = audit(p, &args.point, args.omega.as_deref(), args.tol).map_err(|e| match e {
        StationarityError::Infeasible { .. } | StationarityError::OmegaNotBiactive(_) => CliError::Usage(e.to_string()),
        _ => CliError::Failure(e.to_string()),
    })?;
    let sampled = match args.samples {
        0 => None,
        n => {
            let t = sample_tangent_descent(p, &args.point, n, args.seed).map_err(|e| CliError::Failure(e.to_string()))?;
            Some((t.worst, t.samples))
        }
    };
    stdout.write_all(report_text(&p.name, &args.point, &r, sampled).as_bytes())?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(fs::File::create(path)?);
        w.write_record(["property", "value"])?;
        for (k, v) in report_rows(&r) {
            w.write_record([k, v])?;
        }
        w.flush()?;
    }
    Ok(())
}
