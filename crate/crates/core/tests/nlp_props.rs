use mpcc_core::linalg::Matrix;
use mpcc_core::model::ScalarFn;
use mpcc_core::nlp::{kkt_residual, solve, solve_warm, KktPoint, KktStatus, NlpInstance, NlpRow, SolverOptions};
use proptest::prelude::*;

/// `min 1/2 |x - c|^2` subject to `a^T x <= b`.
fn halfspace_projection(c: &[f64], a: &[f64], b: f64) -> NlpInstance {
    let n = c.len();
    let lin: Vec<f64> = c.iter().map(|v| -v).collect();
    let c0 = 0.5 * c.iter().map(|v| v * v).sum::<f64>();
    let mut nlp = NlpInstance::new("halfspace", n, ScalarFn::quadratic(Matrix::identity(n), lin, c0));
    nlp.inequalities.push(NlpRow::new(ScalarFn::affine(a.to_vec(), -b), 1.0, "a^T x - b"));
    nlp
}

fn check_converged(nlp: &NlpInstance, k: &KktPoint, opts: &SolverOptions) -> Result<(), TestCaseError> {
    prop_assert_eq!(k.status, KktStatus::Converged);
    prop_assert!(k.kkt_residual <= opts.tol.max(k.noise_floor), "residual {:e}, floor {:e}", k.kkt_residual, k.noise_floor);
    prop_assert!(k.mult.ineq.iter().all(|&l| l >= 0.0), "negative inequality multiplier {:?}", k.mult.ineq);
    let r = kkt_residual(nlp, &k.z, &k.mult).unwrap();
    prop_assert!(r.is_finite());
    Ok(())
}

fn vec_in(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_onto_halfspace((c, a, z0) in (1usize..=5).prop_flat_map(|n| (vec_in(n, -5.0, 5.0), vec_in(n, -2.0, 2.0), vec_in(n, -3.0, 3.0))), b in -3.0f64..3.0) {
        let a2: f64 = a.iter().map(|v| v * v).sum();
        prop_assume!(a2 > 1e-2);
        let nlp = halfspace_projection(&c, &a, b);
        let opts = SolverOptions::default();
        let k = solve(&nlp, &z0, &opts).unwrap();
        check_converged(&nlp, &k, &opts)?;
        let viol = (a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() - b).max(0.0);
        for j in 0..c.len() {
            let want = c[j] - viol / a2 * a[j];
            prop_assert!((k.z[j] - want).abs() <= 1e-8, "x{j} = {} want {want}", k.z[j]);
        }
        prop_assert!((k.mult.ineq[0] - viol / a2).abs() <= 1e-8 * (1.0 + viol / a2));

        let warm = solve_warm(&nlp, &k.z, &k.mult, &opts).unwrap();
        check_converged(&nlp, &warm, &opts)?;
        prop_assert!(warm.iterations <= 3, "warm re-solve took {} iterations", warm.iterations);
    }

    #[test]
    fn projection_onto_box((c, lo, width) in (1usize..=5).prop_flat_map(|n| (vec_in(n, -5.0, 5.0), vec_in(n, -2.0, 0.0), vec_in(n, 0.1, 3.0)))) {
        let n = c.len();
        let lin: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut nlp = NlpInstance::new("box", n, ScalarFn::quadratic(Matrix::identity(n), lin, 0.0));
        nlp.lower = lo.clone();
        nlp.upper = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
        let opts = SolverOptions::default();
        let z0: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + 0.5 * w).collect();
        let k = solve(&nlp, &z0, &opts).unwrap();
        check_converged(&nlp, &k, &opts)?;
        for j in 0..n {
            let want = c[j].clamp(nlp.lower[j], nlp.upper[j]);
            prop_assert!((k.z[j] - want).abs() <= 1e-8, "x{j} = {} want {want}", k.z[j]);
        }
        prop_assert!(k.mult.lower.iter().chain(&k.mult.upper).all(|&l| l >= 0.0));
        let warm = solve_warm(&nlp, &k.z, &k.mult, &opts).unwrap();
        prop_assert!(warm.iterations <= 3, "warm re-solve took {} iterations", warm.iterations);
    }

    // Equality-constrained least distance: x = c - A^T (A A^T)^{-1} (A c - b).
    #[test]
    fn projection_onto_affine_set(c in vec_in(3, -5.0, 5.0), row in vec_in(3, -2.0, 2.0), b in -3.0f64..3.0) {
        let a2: f64 = row.iter().map(|v| v * v).sum();
        prop_assume!(a2 > 1e-2);
        let lin: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut nlp = NlpInstance::new("affine", 3, ScalarFn::quadratic(Matrix::identity(3), lin, 0.0));
        nlp.equalities.push(NlpRow::new(ScalarFn::affine(row.clone(), -b), 1.0, "a^T x - b"));
        let opts = SolverOptions::default();
        let k = solve(&nlp, &[0.0; 3], &opts).unwrap();
        check_converged(&nlp, &k, &opts)?;
        let t = (row.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() - b) / a2;
        for j in 0..3 {
            prop_assert!((k.z[j] - (c[j] - t * row[j])).abs() <= 1e-8);
        }
    }
}
