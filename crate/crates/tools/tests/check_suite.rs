use std::sync::Arc;

use mpcc_core::model::{MpccProblem, ScalarFn};
use mpcc_core::problems::lookup;
use mpcc_tools::check::{derivative_check, run_checks, Check};

/// scholtes4 with the objective gradient off by 1e-3 in the first entry.
fn perturbed() -> Arc<MpccProblem> {
    let e = lookup("scholtes4").unwrap();
    let mut p = (*e.problem).clone();
    let f = p.f.clone();
    let (fv, fg) = (f.clone(), f.clone());
    p.f = ScalarFn::new(
        move |z| fv.value(z),
        move |z, g| {
            fg.gradient_into(z, g);
            g[0] += 1e-3;
        },
        move |z, w, h| f.add_hessian(z, w, h),
    );
    Arc::new(p)
}

#[test]
fn perturbed_gradient_fails_by_name() {
    let z0 = lookup("scholtes4").unwrap().default_z0;
    let checks = vec![
        derivative_check("derivatives/clean", lookup("scholtes4").unwrap().problem, vec![z0.clone()]),
        derivative_check("derivatives/perturbed", perturbed(), vec![z0]),
    ];
    let mut out = Vec::new();
    let r = run_checks(checks, None, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(r[0].passed && !r[1].passed, "{text}");
    assert!(text.lines().any(|l| l.starts_with("FAIL derivatives/perturbed: f[1]")), "{text}");
    assert!(text.ends_with("2 checks, 1 passed, 1 failed\n"));
}

#[test]
fn filter_selects_by_name() {
    let checks = vec![Check::new("a/one", || Ok("fine".into())), Check::new("b/two", || Err("bad".into()))];
    let mut out = Vec::new();
    let r = run_checks(checks, Some("a/"), &mut out).unwrap();
    assert_eq!(r.len(), 1);
    assert!(String::from_utf8(out).unwrap().starts_with("PASS a/one (fine) ["));
}
