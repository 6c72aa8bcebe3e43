//! `mpcc check`: derivative checks, oracle cross-checks and the golden
//! stationarity reports, each timed and reported as PASS or FAIL.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use mpcc_core::model::{check_derivatives, MpccProblem};
use mpcc_core::nlp::check_nlp_derivatives;
use mpcc_core::oracle::{default_branch_grid, sample_tangent_descent, verify_branch_minimum_with};
use mpcc_core::problems::{registry, KnownPoint, RegistryEntry};
use mpcc_core::reformulate::build;
use mpcc_core::stationarity::{audit, check_b_via_lpcc, check_piecewise_m};
use mpcc_core::Scheme;

use crate::format::{sig6, vector};

pub const TOL: f64 = 1e-9;
pub const DERIVATIVE_STEP: f64 = 1e-6;
pub const DERIVATIVE_TOL: f64 = 1e-6;

type Body = Box<dyn FnOnce() -> Result<String, String> + Send>;

pub struct Check {
    pub name: String,
    body: Body,
}

impl Check {
    pub fn new(name: impl Into<String>, body: impl FnOnce() -> Result<String, String> + Send + 'static) -> Self {
        Self { name: name.into(), body: Box::new(body) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub millis: f64,
}

/// Problem derivatives at each point, then the derivatives of every
/// reformulation at the first point.
pub fn derivative_check(name: impl Into<String>, problem: Arc<MpccProblem>, points: Vec<Vec<f64>>) -> Check {
    Check::new(name, move || {
        let mut worst: f64 = 0.0;
        for z in &points {
            let r = check_derivatives(&problem, z, DERIVATIVE_STEP).map_err(|e| e.to_string())?;
            if !r.passed() {
                let bad = r
                    .entries
                    .iter()
                    .find(|e| e.gradient_error > r.tol || e.hessian_error > r.tol || e.hessian_asymmetry > 1e-12)
                    .expect("a failing entry");
                return Err(format!(
                    "{}[{}] at {}: gradient error {}, Hessian error {}, asymmetry {}",
                    bad.block,
                    bad.index + 1,
                    vector(z),
                    sig6(bad.gradient_error),
                    sig6(bad.hessian_error),
                    sig6(bad.hessian_asymmetry)
                ));
            }
            worst = worst.max(r.worst_gradient_error());
        }
        if let Some(z) = points.first() {
            for scheme in Scheme::ALL {
                let nlp = build(&problem, scheme, 1e-2, &vec![0.0; problem.m()]).map_err(|e| e.to_string())?;
                let err = check_nlp_derivatives(&nlp, z, DERIVATIVE_STEP);
                if err > DERIVATIVE_TOL {
                    return Err(format!("{scheme} reformulation: gradient error {}", sig6(err)));
                }
                worst = worst.max(err);
            }
        }
        Ok(format!("worst gradient error {}", sig6(worst)))
    })
}

fn golden_check(e: &RegistryEntry, k: &KnownPoint) -> Check {
    let (p, z, want) = (e.problem.clone(), k.z.clone(), k.flags);
    Check::new(format!("golden/{}/{}", e.problem.name, k.label), move || {
        let r = audit(&p, &z, None, TOL).map_err(|e| e.to_string())?;
        let f = r.flags();
        let got = [f.weak, f.a, f.c, f.m, f.s, r.piecewise_m.holds, r.b_via_lpcc.b_stationary];
        let exp = [want.weak, want.a, want.c, want.m, want.s, want.piecewise_m, want.b];
        let names = ["weak", "A", "C", "M", "S", "piecewise-M", "B"];
        let wrong: Vec<String> = names
            .iter()
            .zip(got.iter().zip(&exp))
            .filter(|(_, (g, w))| g != w)
            .map(|(n, (g, _))| format!("{n} = {g}"))
            .collect();
        if wrong.is_empty() {
            Ok(format!("strongest {}", r.strongest().map_or("none", |c| c.name())))
        } else {
            Err(format!("unexpected {}", wrong.join(", ")))
        }
    })
}

/// Branch multipliers against a grid search of the branch. A branch with a
/// vanishing active gradient may be minimal without multipliers.
fn branch_check(e: &RegistryEntry, k: &KnownPoint) -> Check {
    let (p, z) = (e.problem.clone(), k.z.clone());
    Check::new(format!("branch-oracle/{}/{}", e.problem.name, k.label), move || {
        let pm = check_piecewise_m(&p, &z, TOL).map_err(|e| e.to_string())?;
        let mut degenerate = 0;
        for part in &pm.partitions {
            let v = verify_branch_minimum_with(&p, &z, &part.partition, &default_branch_grid(&z)).map_err(|e| e.to_string())?;
            if part.kkt_exists == v.is_minimum {
                continue;
            }
            if !part.kkt_exists && v.is_minimum && !part.zero_gradient_rows.is_empty() {
                degenerate += 1;
                continue;
            }
            return Err(format!(
                "partition {}: multipliers {}, grid minimum {}",
                part.partition, part.kkt_exists, v.is_minimum
            ));
        }
        let mut note = format!("partitions checked: {}", pm.partitions.len());
        if degenerate > 0 {
            note.push_str(&format!(", {degenerate} minimal without multipliers (vanishing gradient)"));
        }
        Ok(note)
    })
}

fn tangent_check(e: &RegistryEntry, k: &KnownPoint, seed: u64) -> Check {
    let (p, z) = (e.problem.clone(), k.z.clone());
    Check::new(format!("tangent-oracle/{}/{}", e.problem.name, k.label), move || {
        let b = check_b_via_lpcc(&p, &z, TOL).map_err(|e| e.to_string())?;
        let s = sample_tangent_descent(&p, &z, 10_000, seed).map_err(|e| e.to_string())?;
        if b.b_stationary {
            if s.worst < -TOL {
                return Err(format!("LPCC says B-stationary, sampling found slope {}", sig6(s.worst)));
            }
            Ok(format!("B-stationary, sampled slope {}", sig6(s.worst)))
        } else {
            if s.worst >= -TOL {
                return Err("LPCC found descent, sampling did not".into());
            }
            Ok(format!("descent confirmed, sampled slope {}", sig6(s.worst)))
        }
    })
}

pub fn standard_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for e in registry() {
        let mut points = vec![e.default_z0.clone()];
        points.extend(e.known.iter().map(|k| k.z.clone()));
        out.push(derivative_check(format!("derivatives/{}", e.problem.name), e.problem.clone(), points));
    }
    for e in registry() {
        for k in &e.known {
            out.push(golden_check(&e, k));
        }
    }
    for e in registry() {
        for k in &e.known {
            out.push(branch_check(&e, k));
            out.push(tangent_check(&e, k, seed));
        }
    }
    out
}

/// Runs the checks whose names contain `filter`, printing one line each.
pub fn run_checks<W: Write>(checks: Vec<Check>, filter: Option<&str>, out: &mut W) -> std::io::Result<Vec<CheckOutcome>> {
    let mut results = Vec::new();
    for c in checks {
        if filter.is_some_and(|f| !c.name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let r = (c.body)();
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let (passed, detail) = match r {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if passed {
            writeln!(out, "PASS {} ({detail}) [{millis:.1} ms]", c.name)?;
        } else {
            writeln!(out, "FAIL {}: {detail} [{millis:.1} ms]", c.name)?;
        }
        results.push(CheckOutcome { name: c.name, passed, detail, millis });
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} checks, {} passed, {failed} failed", results.len(), results.len() - failed)?;
    Ok(results)
}
