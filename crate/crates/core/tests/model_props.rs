use mpcc_core::model::{active_index_sets, evaluate, feasibility_residual, index_sets_from_values, MpccProblem, ScalarFn};
use mpcc_core::problems::registry;
use proptest::prelude::*;

/// `m` pairs `G_i = z_i`, `H_i = z_{m+i}` and the row `z_0 + ... - c <= 0`.
fn pairs(m: usize) -> MpccProblem {
    let n = 2 * m;
    let mut p = MpccProblem::new("pairs", n, ScalarFn::affine(vec![1.0; n], 0.0));
    for i in 0..m {
        p.comp_g.push(ScalarFn::variable(n, i));
        p.comp_h.push(ScalarFn::variable(n, m + i));
    }
    p.g.push(ScalarFn::affine(vec![1.0; n], -100.0));
    p
}

/// A feasible point: each pair gets one exact zero (or two).
fn feasible_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|m| {
        (Just(m), proptest::collection::vec((0u8..3, 0.0f64..5.0), m)).prop_map(|(m, spec)| {
            let mut z = vec![0.0; 2 * m];
            for (i, (kind, v)) in spec.into_iter().enumerate() {
                match kind {
                    0 => z[m + i] = v,
                    1 => z[i] = v,
                    _ => {}
                }
            }
            (m, z)
        })
    })
}

proptest! {
    #[test]
    fn index_sets_are_deterministic_and_idempotent(z in proptest::collection::vec(-2.0f64..2.0, 8), tol in 1e-8f64..1e-1) {
        for e in registry() {
            let z = &z[..e.problem.n];
            let s1 = active_index_sets(&e.problem, z, Some(tol)).unwrap();
            let s2 = active_index_sets(&e.problem, z, Some(tol)).unwrap();
            prop_assert_eq!(&s1, &s2);
            let again = index_sets_from_values(&evaluate(&e.problem, z).unwrap(), s1.tol);
            prop_assert_eq!(&s1, &again);
            let d1 = active_index_sets(&e.problem, z, None).unwrap();
            let d2 = active_index_sets(&e.problem, z, Some(d1.tol)).unwrap();
            prop_assert_eq!(d1, d2);
        }
    }

    #[test]
    fn feasible_points_partition_the_pairs((m, z) in feasible_point()) {
        let p = pairs(m);
        prop_assert_eq!(feasibility_residual(&p, &z).unwrap(), 0.0);
        let s = active_index_sets(&p, &z, None).unwrap();
        prop_assert!(s.is_consistent());
        let mut all: Vec<usize> = s.alpha.iter().chain(&s.gamma).chain(&s.beta).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
        for &i in &s.alpha {
            prop_assert!(z[i] <= s.tol && z[m + i] > s.tol);
        }
        for &i in &s.gamma {
            prop_assert!(z[i] > s.tol && z[m + i] <= s.tol);
        }
        for &i in &s.beta {
            prop_assert!(z[i] <= s.tol && z[m + i] <= s.tol);
        }
    }
}

#[test]
fn known_solutions_are_feasible() {
    for e in registry() {
        for k in &e.known {
            assert_eq!(feasibility_residual(&e.problem, &k.z).unwrap(), 0.0, "{} {}", e.problem.name, k.label);
        }
    }
}
