//! `mpcc solve`: one homotopy run, its trace CSV and a text summary.
//!
//! Trace CSV schema, one row per homotopy step `k`:
//!
//! | column | meaning |
//! |---|---|
//! | `k`, `eps` | step index and smoothing parameter |
//! | `p1..pm` | BA shifts (zero for the other schemes) |
//! | `z1..zn` | iterate |
//! | BA: `u1..um` | multipliers of `Phi + p = 0` |
//! | MLF: `uL1..uLm`, `uU1..uUm` | multipliers of `-Phi - eps/2 <= 0` and `Phi <= 0` |
//! | REG: `vG1..vGm`, `vH1..vHm`, `vREG1..vREGm` | multipliers of `-G <= 0`, `-H <= 0`, `G H - eps <= 0` |
//! | `f_up`, `f_low` | bounds on the optimal value |
//! | `min_curv` | reduced-Hessian curvature (`inf` on a trivial null space) |
//! | `shift` | Hessian shift used by the inner solve |
//! | `rank_deficient` | 1 when the active Jacobian lost rank |

use std::fmt::Write as _;
use std::fs;
use std::io::Write;

use mpcc_core::bounding::{run_homotopy, IterationRecord, SolveTrace};
use mpcc_core::model::MpccMultipliers;
use mpcc_core::oracle::sample_tangent_descent;
use mpcc_core::problems::RegistryEntry;
use mpcc_core::reformulate::InnerMultipliers;
use mpcc_core::stationarity::{audit, detect_omega};
use mpcc_core::Scheme;

use crate::config::RunConfig;
use crate::format::{full, index_set, keyed, sig6, vector};
use crate::{CliError, CliResult};

/// Threshold on the pair multipliers that the summary reports as blow-up.
pub const BLOW_UP: f64 = 1e2;
/// Tolerance for Ω detection and the audit of the limit point.
pub const LIMIT_TOL: f64 = 1e-6;

pub fn multiplier_columns(scheme: Scheme, m: usize) -> Vec<String> {
    let groups: &[&str] = match scheme {
        Scheme::Ba => &["u"],
        Scheme::Mlf => &["uL", "uU"],
        Scheme::Reg => &["vG", "vH", "vREG"],
    };
    groups
        .iter()
        .flat_map(|g| (1..=m).map(move |i| format!("{g}{i}")))
        .collect()
}

/// Pair multipliers in column order.
pub fn multiplier_values(inner: &InnerMultipliers) -> Vec<f64> {
    match inner {
        InnerMultipliers::Ba { phi, .. } => phi.clone(),
        InnerMultipliers::Mlf { lower, upper, .. } => [lower.as_slice(), upper].concat(),
        InnerMultipliers::Reg { comp_g, comp_h, product, .. } => [comp_g.as_slice(), comp_h, product].concat(),
    }
}

/// The multipliers that blow up when a scheme loses track of the limit:
/// `|u|` for BA, `u_L, u_U` for MLF, `v^REG` for REG.
pub fn blow_up_size(inner: &InnerMultipliers) -> f64 {
    let v: Vec<f64> = match inner {
        InnerMultipliers::Reg { product, .. } => product.clone(),
        _ => multiplier_values(inner),
    };
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn trace_header(n: usize, m: usize, scheme: Scheme) -> Vec<String> {
    let mut h = vec!["k".to_string(), "eps".to_string()];
    h.extend((1..=m).map(|i| format!("p{i}")));
    h.extend((1..=n).map(|j| format!("z{j}")));
    h.extend(multiplier_columns(scheme, m));
    h.extend(["f_up", "f_low", "min_curv", "shift", "rank_deficient"].map(String::from));
    h
}

fn trace_row(r: &IterationRecord) -> Vec<String> {
    let mut row = vec![r.k.to_string(), full(r.eps)];
    row.extend(r.p.iter().map(|&x| full(x)));
    row.extend(r.z.iter().map(|&x| full(x)));
    row.extend(multiplier_values(&r.inner).into_iter().map(full));
    row.extend([full(r.f_up), full(r.f_low), full(r.curvature.min_curvature), full(r.kkt.hessian_shift)]);
    let deficient = r.curvature.jacobian_rank < r.curvature.active_rows;
    row.push(if deficient { "1" } else { "0" }.into());
    row
}

pub fn write_trace<W: Write>(trace: &SolveTrace, n: usize, m: usize, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trace_header(n, m, trace.scheme))?;
    for r in &trace.records {
        out.write_record(trace_row(r))?;
    }
    out.flush()?;
    Ok(())
}

fn multipliers_line(mult: &MpccMultipliers) -> String {
    format!(
        "lambda_g {}  lambda_h {}  lambda_G {}  lambda_H {}",
        vector(&mult.lambda_g),
        vector(&mult.lambda_h),
        keyed(&mult.lambda_comp_g),
        keyed(&mult.lambda_comp_h)
    )
}

pub fn summary(cfg: &RunConfig, entry: &RegistryEntry, trace: &SolveTrace) -> String {
    let p = &entry.problem;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem {}  scheme {}  eps0 {}  kappa {}  eps_tol {}",
        p.name,
        trace.scheme,
        sig6(cfg.eps0),
        sig6(cfg.kappa),
        sig6(cfg.eps_tol)
    );
    let _ = writeln!(s, "{:>3}  {:>12}  {:>12}  {:>12}  {:>12}  multipliers", "k", "eps", "f", "f_up", "f_low");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{:>3}  {:>12}  {:>12}  {:>12}  {:>12}  {}",
            r.k,
            sig6(r.eps),
            sig6(r.f),
            sig6(r.f_up),
            sig6(r.f_low),
            vector(&multiplier_values(&r.inner))
        );
    }
    match &trace.failure {
        Some(f) => {
            let _ = writeln!(s, "status: failed at k={} eps={}: {}", f.k, sig6(f.eps), f.message);
        }
        None => {
            let _ = writeln!(s, "status: converged in {} steps", trace.records.len());
        }
    }
    if let Some(last) = trace.last() {
        let size = blow_up_size(&last.inner);
        let flag = if size > BLOW_UP { "yes" } else { "no" };
        let _ = writeln!(s, "multiplier blow-up: {flag} (max {} against {})", sig6(size), sig6(BLOW_UP));
    }
    let Some(limit) = &trace.limit else {
        if trace.failure.is_none() {
            let _ = writeln!(s, "limit: no MPCC-feasible limit recovered from the last iterate");
        }
        return s;
    };
    let _ = writeln!(s, "limit z = {}  at eps {}", vector(&limit.z), sig6(limit.eps));
    let _ = writeln!(
        s,
        "index sets: I_g {}  alpha {}  gamma {}  beta {}",
        index_set(&limit.sets.active_g),
        index_set(&limit.sets.alpha),
        index_set(&limit.sets.gamma),
        index_set(&limit.sets.beta)
    );
    let _ = writeln!(s, "recovered multipliers: {}", multipliers_line(&limit.multipliers));
    let omega = match detect_omega(trace, LIMIT_TOL) {
        Ok(om) => {
            let _ = writeln!(s, "omega: {}", index_set(&om));
            Some(om)
        }
        Err(e) => {
            let _ = writeln!(s, "omega: unavailable ({e})");
            None
        }
    };
    match audit(p, &limit.z, omega.as_deref(), LIMIT_TOL) {
        Ok(r) => {
            let f = r.flags();
            let _ = write!(
                s,
                "stationarity: weak {}  A {}  C {}  M {}  S {}  piecewise-M {}  B(via LPCC) {}",
                f.weak, f.a, f.c, f.m, f.s, r.piecewise_m.holds, r.b_via_lpcc.b_stationary
            );
            if let Some(b) = &r.b_reduced {
                let _ = write!(s, "  B(reduced) {}", b.b_stationary);
            }
            let _ = writeln!(s);
        }
        Err(e) => {
            let _ = writeln!(s, "stationarity: audit failed ({e})");
        }
    }
    if let Ok(t) = sample_tangent_descent(p, &limit.z, 2_000, cfg.seed) {
        let _ = writeln!(s, "sampled tangent slope: {} over {} directions", sig6(t.worst), t.samples);
    }
    s
}

/// Runs the configured solve; the trace and summary are written even when
/// the run fails part way.
pub fn run<W: Write>(cfg: &RunConfig, stdout: &mut W) -> CliResult<()> {
    let entry = cfg.validate()?;
    let opts = cfg.homotopy_options(&entry);
    let trace = run_homotopy(&entry.problem, cfg.scheme, &opts);
    if let Some(path) = &cfg.trace {
        write_trace(&trace, entry.problem.n, entry.problem.m(), fs::File::create(path)?)?;
    }
    let text = summary(cfg, &entry, &trace);
    stdout.write_all(text.as_bytes())?;
    if let Some(path) = &cfg.summary {
        fs::write(path, &text)?;
    }
    match &trace.failure {
        Some(f) => Err(CliError::Failure(format!(
            "{} {} failed at k={} eps={}: {}",
            entry.problem.name,
            cfg.scheme,
            f.k,
            sig6(f.eps),
            f.message
        ))),
        None => Ok(()),
    }
}
