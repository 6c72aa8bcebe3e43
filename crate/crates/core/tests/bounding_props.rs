use mpcc_core::bounding::{run_homotopy, HomotopyOptions, SolveTrace};
use mpcc_core::problems::lookup;
use mpcc_core::reformulate::{InnerMultipliers, Scheme};
use proptest::prelude::*;

fn run(name: &str, scheme: Scheme, eps0: f64, kappa: f64) -> SolveTrace {
    let e = lookup(name).unwrap();
    let opts = HomotopyOptions { eps0, kappa, z0: Some(e.default_z0.clone()), ..Default::default() };
    run_homotopy(&e.problem, scheme, &opts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // f* = 0 at the origin
    #[test]
    fn bounds_bracket_the_optimum(eps0 in 1e-3f64..1e-1, kappa in 0.05f64..0.5) {
        let t = run("scholtes4", Scheme::Ba, eps0, kappa);
        prop_assert!(t.succeeded(), "{:?}", t.failure);
        for r in t.records.iter().filter(|r| r.eps <= 1e-4) {
            let c = 10.0 * r.eps * r.eps;
            prop_assert!(r.f_low - c <= 0.0 && 0.0 <= r.f_up + c, "k={} [{:e}, {:e}]", r.k, r.f_low, r.f_up);
        }
    }

    #[test]
    fn smoothing_iterates_are_eps_accurate(eps0 in 1e-3f64..1e-1, kappa in 0.05f64..0.5, mlf: bool) {
        let scheme = if mlf { Scheme::Mlf } else { Scheme::Ba };
        let t = run("scholtes4", scheme, eps0, kappa);
        prop_assert!(t.succeeded(), "{:?}", t.failure);
        for r in t.records.iter().filter(|r| r.eps <= 1e-4) {
            let dist = r.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(dist <= 2.5 * r.eps, "k={} eps={:e} |z| = {dist:e}", r.k, r.eps);
        }
    }
}

#[test]
fn regularization_is_inaccurate() {
    let t = run("scholtes4", Scheme::Reg, 1e-2, 0.1);
    assert!(t.succeeded(), "{:?}", t.failure);
    let mut checked = 0;
    for r in t.records.iter().filter(|r| r.eps <= 1e-6) {
        assert!(r.z[0] >= 10.0 * r.eps, "eps={:e}: z1 = {:e}", r.eps, r.z[0]);
        assert!((r.z[0] * r.z[1] - r.eps).abs() <= 1e-9 * r.eps, "product row inactive at eps={:e}", r.eps);
        checked += 1;
    }
    assert!(checked >= 7);
}

#[test]
fn smoothing_multipliers_stay_bounded() {
    for name in ["scholtes4", "ex9_2_2"] {
        for scheme in [Scheme::Ba, Scheme::Mlf] {
            let t = run(name, scheme, 1e-2, 0.1);
            assert!(t.succeeded(), "{name} {scheme}: {:?}", t.failure);
            for r in &t.records {
                let u = r.inner.u_phi().unwrap();
                let big = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(big <= 20.0, "{name} {scheme} eps={:e}: |u| = {big}", r.eps);
            }
        }
    }
}

#[test]
fn regularization_multiplier_grows() {
    let t = run("scholtes4", Scheme::Reg, 1e-2, 0.1);
    let mut prev = 0.0;
    for r in &t.records {
        let InnerMultipliers::Reg { product, .. } = &r.inner else { unreachable!() };
        assert!(product[0] >= prev, "v^REG fell to {:e} at eps={:e}", product[0], r.eps);
        if r.eps <= 1e-6 {
            assert!(product[0] >= 1e2, "v^REG = {:e} at eps={:e}", product[0], r.eps);
        }
        prev = product[0];
    }
}
