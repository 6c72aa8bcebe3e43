mod common;

use common::{random_lpcc, RandomLpcc};
use mpcc_core::oracle::sample_tangent_descent;
use mpcc_core::stationarity::{audit, check_b_reduced, check_b_via_lpcc, classify};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn reduced_check_agrees_with_full_check(seed: u64) {
        let RandomLpcc { problem, omega } = random_lpcc(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let z = vec![0.0; problem.n];
        let full = check_b_via_lpcc(&problem, &z, TOL).unwrap();
        let reduced = check_b_reduced(&problem, &z, &omega, TOL).unwrap();
        prop_assert_eq!(full.b_stationary, reduced.b_stationary, "omega {:?}", omega);
        prop_assert_eq!(&reduced.omega, &omega);
        for (f, r) in full.branches.iter().zip(&reduced.branches) {
            let dropped = omega.len();
            prop_assert_eq!(f.inequality_rows, r.inequality_rows + dropped);
        }
    }

    #[test]
    fn report_flags_are_consistent(seed: u64, degenerate: bool) {
        let RandomLpcc { problem, .. } = random_lpcc(&mut ChaCha8Rng::seed_from_u64(seed), degenerate);
        let z = vec![0.0; problem.n];
        let r = audit(&problem, &z, None, TOL).unwrap();
        prop_assert!(r.consistent(), "{:?} pm={} b={}", r.flags(), r.piecewise_m.holds, r.b_via_lpcc.b_stationary);
        if r.piecewise_m.holds {
            prop_assert!(r.b_via_lpcc.b_stationary);
        }
        if r.s.holds {
            prop_assert!(r.piecewise_m.holds);
        }
        // witnesses classify as at least their own class
        for (res, class) in [(&r.a, 'a'), (&r.c, 'c'), (&r.m, 'm'), (&r.s, 's')] {
            if let Some(w) = &res.witness {
                let f = classify(&problem, &z, w, 1e-7).unwrap();
                let ok = match class { 'a' => f.a, 'c' => f.c, 'm' => f.m, _ => f.s };
                prop_assert!(ok, "{class} witness classifies as {f:?}");
            }
        }
    }

    #[test]
    fn sampling_never_beats_lpcc(seed: u64, degenerate: bool) {
        let RandomLpcc { problem, .. } = random_lpcc(&mut ChaCha8Rng::seed_from_u64(seed), degenerate);
        let z = vec![0.0; problem.n];
        let b = check_b_via_lpcc(&problem, &z, TOL).unwrap();
        let s = sample_tangent_descent(&problem, &z, 2_000, seed).unwrap();
        if b.b_stationary {
            prop_assert!(s.worst >= -1e-9, "sampled slope {} at a B-stationary point", s.worst);
        }
    }
}
