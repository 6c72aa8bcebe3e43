use mpcc_core::oracle::{default_branch_grid, sample_tangent_descent, verify_branch_minimum_with};
use mpcc_core::problems::registry;
use mpcc_core::stationarity::{check_b_via_lpcc, check_piecewise_m};

const TOL: f64 = 1e-9;

#[test]
fn branch_kkt_matches_grid_minimum() {
    for e in registry() {
        for k in &e.known {
            let pm = check_piecewise_m(&e.problem, &k.z, TOL).unwrap();
            for p in &pm.partitions {
                let v = verify_branch_minimum_with(&e.problem, &k.z, &p.partition, &default_branch_grid(&k.z)).unwrap();
                let label = format!("{} {} {}", e.problem.name, k.label, p.partition);
                if e.problem.name == "fritz_john_corner" && p.partition.to_string() == "({1},∅)" {
                    // The branch is {z2 = 0} with the degenerate row z2^2 <= 0: the
                    // origin minimizes it, yet the linearized branch has no multipliers.
                    assert!(!p.kkt_exists && v.is_minimum, "{label}");
                    assert_eq!(p.zero_gradient_rows, vec![0], "{label}");
                    continue;
                }
                assert_eq!(p.kkt_exists, v.is_minimum, "{label}: grid min {:?}", v.branch_min);
            }
        }
    }
}

#[test]
fn tangent_sampling_matches_lpcc() {
    for e in registry() {
        for k in &e.known {
            let b = check_b_via_lpcc(&e.problem, &k.z, TOL).unwrap();
            let s = sample_tangent_descent(&e.problem, &k.z, 10_000, 3).unwrap();
            let label = format!("{} {}", e.problem.name, k.label);
            if b.b_stationary {
                assert!(s.worst >= -1e-9, "{label}: sampled slope {}", s.worst);
            } else {
                let (_, slope) = b.failing().unwrap().descent.clone().unwrap();
                assert!(s.worst < -1e-9, "{label}: no sampled descent");
                assert!(s.worst >= slope * (1.0 + 1e-9) * e.problem.n as f64, "{label}: {} vs {slope}", s.worst);
            }
        }
    }
}
