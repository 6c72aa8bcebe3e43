use mpcc_core::problems::registry;
use mpcc_core::stationarity::audit;

#[test]
fn registry_points_reproduce_expected_flags() {
    for e in registry() {
        for k in &e.known {
            let r = audit(&e.problem, &k.z, None, 1e-9).unwrap();
            let f = r.flags();
            let got = (f.weak, f.a, f.c, f.m, f.s, r.piecewise_m.holds, r.b_via_lpcc.b_stationary);
            let x = k.flags;
            let want = (x.weak, x.a, x.c, x.m, x.s, x.piecewise_m, x.b);
            assert_eq!(got, want, "{} at {}", e.problem.name, k.label);
            assert!(r.consistent(), "{} at {}", e.problem.name, k.label);
        }
    }
}
