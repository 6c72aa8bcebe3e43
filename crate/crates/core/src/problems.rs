//! Registry of small benchmark MPCCs with known solutions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{KnownSolution, MpccProblem, ScalarFn};

/// Stationarity flags expected at a known point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpectedFlags {
    pub weak: bool,
    pub a: bool,
    pub c: bool,
    pub m: bool,
    pub s: bool,
    pub piecewise_m: bool,
    pub b: bool,
}

#[derive(Clone, Debug)]
pub struct KnownPoint {
    pub label: &'static str,
    pub z: Vec<f64>,
    pub f: f64,
    pub flags: ExpectedFlags,
    /// Affine description of the weak multiplier set at the point.
    pub multiplier_family: &'static str,
}

#[derive(Clone, Debug)]
pub struct RegistryEntry {
    pub problem: Arc<MpccProblem>,
    pub default_z0: Vec<f64>,
    pub known: Vec<KnownPoint>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unknown problem `{name}`; available: {}", available.join(", "))]
pub struct UnknownProblem {
    pub name: String,
    pub available: Vec<String>,
}

pub const NAMES: [&str; 8] = [
    "scholtes4",
    "scholtes4_z1ge0",
    "scholtes4_z1le0",
    "ex9_2_2",
    "ex9_2_2_s1ge0",
    "ex9_2_2_s1le0",
    "mstat_counterexample",
    "fritz_john_corner",
];

pub fn registry() -> Vec<RegistryEntry> {
    NAMES.iter().map(|n| lookup(n).expect("registered")).collect()
}

pub fn lookup(name: &str) -> Result<RegistryEntry, UnknownProblem> {
    let entry = match name {
        "scholtes4" => scholtes4_entry(name, None),
        "scholtes4_z1ge0" => scholtes4_entry(name, Some(-1.0)),
        "scholtes4_z1le0" => scholtes4_entry(name, Some(1.0)),
        "ex9_2_2" => ex9_2_2_entry(name, None),
        "ex9_2_2_s1ge0" => ex9_2_2_entry(name, Some(-1.0)),
        "ex9_2_2_s1le0" => ex9_2_2_entry(name, Some(1.0)),
        "mstat_counterexample" => mstat_entry(),
        "fritz_john_corner" => fritz_john_entry(),
        _ => {
            return Err(UnknownProblem {
                name: name.to_string(),
                available: NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(entry)
}

fn finish(mut p: MpccProblem, default_z0: Vec<f64>, known: Vec<KnownPoint>) -> RegistryEntry {
    p.known_solutions = known
        .iter()
        .map(|k| KnownSolution {
            label: k.label.to_string(),
            z: k.z.clone(),
        })
        .collect();
    RegistryEntry {
        problem: Arc::new(p),
        default_z0,
        known,
    }
}

const ALL: ExpectedFlags = ExpectedFlags {
    weak: true,
    a: true,
    c: true,
    m: true,
    s: true,
    piecewise_m: true,
    b: true,
};

/// min z1 + z2 - z3  s.t.  -4 z1 + z3 <= 0, -4 z2 + z3 <= 0, 0 <= z1 ⊥ z2 >= 0.
///
/// `extra = Some(s)` adds the row `s * z1 <= 0`.
fn scholtes4_entry(name: &str, extra: Option<f64>) -> RegistryEntry {
    let n = 3;
    let mut p = MpccProblem::new(name, n, ScalarFn::affine(vec![1.0, 1.0, -1.0], 0.0));
    p.g.push(ScalarFn::affine(vec![-4.0, 0.0, 1.0], 0.0));
    p.g.push(ScalarFn::affine(vec![0.0, -4.0, 1.0], 0.0));
    p.comp_g.push(ScalarFn::variable(n, 0));
    p.comp_h.push(ScalarFn::variable(n, 1));
    let mut flags = ExpectedFlags { s: false, ..ALL };
    let mut family = "lambda_g1 + lambda_g2 = 1, lambda_G = 1 - 4 lambda_g1, lambda_H = 1 - 4 lambda_g2, lambda_g >= 0";
    if let Some(s) = extra {
        p.g.push(ScalarFn::affine(vec![s, 0.0, 0.0], 0.0));
        if s > 0.0 {
            flags.s = true;
            family = "lambda_g1 + lambda_g2 = 1, lambda_G = 1 - 4 lambda_g1 + lambda_g3, lambda_H = 1 - 4 lambda_g2, lambda_g >= 0";
        } else {
            family = "lambda_g1 + lambda_g2 = 1, lambda_G = 1 - 4 lambda_g1 - lambda_g3, lambda_H = 1 - 4 lambda_g2, lambda_g >= 0";
        }
    }
    let known = vec![KnownPoint {
        label: "origin",
        z: vec![0.0; 3],
        f: 0.0,
        flags,
        multiplier_family: family,
    }];
    finish(p, vec![1.0; 3], known)
}

/// Bilevel-derived QP with variables `(x, y, s1, s2, s3, l1, l2, l3)`:
///
/// ```text
/// min x^2 + (y - 10)^2
/// s.t. x <= 15, -x + y <= 0, -x <= 0
///      x + y + s1 = 20, -y + s2 = 0, y + s3 = 20, 2x + 4y + l1 - l2 + l3 = 60
///      0 <= s_i ⊥ l_i >= 0
/// ```
fn ex9_2_2_entry(name: &str, extra: Option<f64>) -> RegistryEntry {
    let n = 8;
    let mut q = Matrix::zeros(n, n);
    q[(0, 0)] = 2.0;
    q[(1, 1)] = 2.0;
    let mut a = vec![0.0; n];
    a[1] = -20.0;
    let mut p = MpccProblem::new(name, n, ScalarFn::quadratic(q, a, 100.0));
    let row = |entries: &[(usize, f64)]| {
        let mut r = vec![0.0; n];
        for &(j, v) in entries {
            r[j] = v;
        }
        r
    };
    p.g.push(ScalarFn::affine(row(&[(0, 1.0)]), -15.0));
    p.g.push(ScalarFn::affine(row(&[(0, -1.0), (1, 1.0)]), 0.0));
    p.g.push(ScalarFn::affine(row(&[(0, -1.0)]), 0.0));
    p.h.push(ScalarFn::affine(row(&[(0, 1.0), (1, 1.0), (2, 1.0)]), -20.0));
    p.h.push(ScalarFn::affine(row(&[(1, -1.0), (3, 1.0)]), 0.0));
    p.h.push(ScalarFn::affine(row(&[(1, 1.0), (4, 1.0)]), -20.0));
    p.h.push(ScalarFn::affine(row(&[(0, 2.0), (1, 4.0), (5, 1.0), (6, -1.0), (7, 1.0)]), -60.0));
    for i in 0..3 {
        p.comp_g.push(ScalarFn::variable(n, 2 + i));
        p.comp_h.push(ScalarFn::variable(n, 5 + i));
    }
    let mut flags = ExpectedFlags { s: false, ..ALL };
    let mut family = "lambda_h4 = t, lambda_g2 = 10 - t >= 0, lambda_G1 = -3t - 10, lambda_H1 = t, lambda_H2 = -t, lambda_H3 = t, others 0";
    if let Some(s) = extra {
        p.g.push(ScalarFn::affine(row(&[(2, s)]), 0.0));
        if s > 0.0 {
            flags.s = true;
            family = "lambda_h4 = t, lambda_g2 = 10 - t >= 0, lambda_G1 = -3t - 10 + lambda_g4, lambda_H1 = t, lambda_H2 = -t, lambda_H3 = t, lambda_g4 >= 0";
        } else {
            family = "lambda_h4 = t, lambda_g2 = 10 - t >= 0, lambda_G1 = -3t - 10 - lambda_g4, lambda_H1 = t, lambda_H2 = -t, lambda_H3 = t, lambda_g4 >= 0";
        }
    }
    let known = vec![KnownPoint {
        label: "solution",
        z: vec![10.0, 10.0, 0.0, 10.0, 10.0, 0.0, 0.0, 0.0],
        f: 100.0,
        flags,
        multiplier_family: family,
    }];
    finish(p, vec![1.0; n], known)
}

/// min (z1 - 1)^2 + z2^2  s.t.  0 <= z1 ⊥ z2 >= 0.
/// The origin is M-stationary but not a local minimizer.
fn mstat_entry() -> RegistryEntry {
    let n = 2;
    let q = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
    let mut p = MpccProblem::new("mstat_counterexample", n, ScalarFn::quadratic(q, vec![-2.0, 0.0], 1.0));
    p.comp_g.push(ScalarFn::variable(n, 0));
    p.comp_h.push(ScalarFn::variable(n, 1));
    let known = vec![
        KnownPoint {
            label: "origin",
            z: vec![0.0, 0.0],
            f: 1.0,
            flags: ExpectedFlags {
                s: false,
                piecewise_m: false,
                b: false,
                ..ALL
            },
            multiplier_family: "lambda_G = -2, lambda_H = 0 (unique)",
        },
        KnownPoint {
            label: "minimizer",
            z: vec![1.0, 0.0],
            f: 0.0,
            flags: ALL,
            multiplier_family: "lambda_H = 0 (unique)",
        },
    ];
    finish(p, vec![2.0, 1.0], known)
}

/// min (z1 - 1)^2 + (z2 + 1)^2  s.t.  z2^2 <= 0, 0 <= -z1 ⊥ -z2 >= 0.
/// Weak multipliers exist at the origin only with opposite signs.
fn fritz_john_entry() -> RegistryEntry {
    let n = 2;
    let q = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
    let mut p = MpccProblem::new("fritz_john_corner", n, ScalarFn::quadratic(q, vec![-2.0, 2.0], 2.0));
    p.g.push(ScalarFn::new(
        |z| z[1] * z[1],
        |z, g| {
            g[0] = 0.0;
            g[1] = 2.0 * z[1];
        },
        |_, w, h| h[(1, 1)] += 2.0 * w,
    ));
    p.comp_g.push(ScalarFn::affine(vec![-1.0, 0.0], 0.0));
    p.comp_h.push(ScalarFn::affine(vec![0.0, -1.0], 0.0));
    let known = vec![KnownPoint {
        label: "origin",
        z: vec![0.0, 0.0],
        f: 2.0,
        flags: ExpectedFlags {
            weak: true,
            a: true,
            c: false,
            m: false,
            s: false,
            piecewise_m: false,
            b: false,
        },
        multiplier_family: "lambda_G = 2, lambda_H = -2, lambda_g >= 0 free",
    }];
    finish(p, vec![-0.5, 0.0], known)
}

/// One-line summary used by the command-line listing.
pub fn describe(entry: &RegistryEntry) -> String {
    let p = &entry.problem;
    format!(
        "{}: n={}, |g|={}, |h|={}, m={}",
        p.name,
        p.n,
        p.g.len(),
        p.h.len(),
        p.m()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_derivatives, evaluate, feasibility_residual};

    #[test]
    fn every_entry_is_consistent() {
        for e in registry() {
            e.problem.validate().unwrap();
            assert_eq!(e.default_z0.len(), e.problem.n);
            for k in &e.known {
                assert!(feasibility_residual(&e.problem, &k.z).unwrap() <= 1e-12, "{}", e.problem.name);
                let ev = evaluate(&e.problem, &k.z).unwrap();
                assert!((ev.f - k.f).abs() < 1e-12);
                let d = check_derivatives(&e.problem, &e.default_z0, 1e-6).unwrap();
                assert!(d.passed(), "{}: {d:?}", e.problem.name);
            }
        }
    }

    #[test]
    fn unknown_name_lists_registry() {
        let e = lookup("nope").unwrap_err();
        let msg = alloc::format!("{e}");
        assert!(msg.contains("scholtes4") && msg.contains("fritz_john_corner"));
    }
}
