use std::collections::BTreeMap;
use std::sync::Arc;

use mpcc_core::bounding::{run_homotopy, HomotopyOptions};
use mpcc_core::model::{active_index_sets, evaluate, MpccProblem, ScalarFn};
use mpcc_core::nlp::{KktPoint, KktStatus, NlpInstance, NlpMultipliers};
use mpcc_core::problems::lookup;
use mpcc_core::reformulate::{build_ba, build_mlf, recover_mpcc_multipliers, InnerMultipliers, RecoveryInput, Scheme};
use proptest::prelude::*;

/// `m` biactive pairs `G_i = z_i`, `H_i = z_{m+i}` at the origin.
fn corner(m: usize) -> MpccProblem {
    let n = 2 * m;
    let mut p = MpccProblem::new("corner", n, ScalarFn::affine(vec![1.0; n], 0.0));
    for i in 0..m {
        p.comp_g.push(ScalarFn::variable(n, i));
        p.comp_h.push(ScalarFn::variable(n, m + i));
    }
    p
}

fn kkt_with(n: usize, mult: NlpMultipliers) -> KktPoint {
    KktPoint {
        z: vec![0.0; n],
        mult,
        status: KktStatus::Converged,
        kkt_residual: 0.0,
        objective: 0.0,
        iterations: 0,
        hessian_shift: 0.0,
        polished: true,
        noise_floor: 0.0,
    }
}

fn feasible(nlp: &NlpInstance, z: &[f64], tol: f64) -> bool {
    nlp.equalities.iter().all(|r| r.func.value(z).abs() <= tol * r.scale)
        && nlp.inequalities.iter().all(|r| r.func.value(z) <= tol * r.scale)
}

fn u_theta() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-10.0f64..10.0, 0.0f64..=1.0), 1..=4)
}

proptest! {
    #[test]
    fn recovery_identities_on_biactive_pairs(pairs in u_theta(), mlf: bool) {
        let m = pairs.len();
        let p = corner(m);
        let z = vec![0.0; 2 * m];
        let sets = active_index_sets(&p, &z, None).unwrap();
        prop_assert_eq!(sets.beta.len(), m);
        let theta: BTreeMap<usize, f64> = pairs.iter().enumerate().map(|(i, &(_, t))| (i, t)).collect();
        let u: Vec<f64> = pairs.iter().map(|&(u, _)| u).collect();
        let (scheme, mult) = if mlf {
            // u = u_L - u_U with one side zero
            let upper: Vec<f64> = u.iter().map(|v| (-v).max(0.0)).collect();
            let lower: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
            (Scheme::Mlf, NlpMultipliers { ineq: [upper, lower].concat(), ..Default::default() })
        } else {
            (Scheme::Ba, NlpMultipliers { eq: u.clone(), ..Default::default() })
        };
        let kkt = kkt_with(2 * m, mult);
        let ev = evaluate(&p, &z).unwrap();
        let input = RecoveryInput { scheme, kkt: &kkt, sets: &sets, theta: &theta, comp_g: &ev.comp_g, comp_h: &ev.comp_h };
        let r = recover_mpcc_multipliers(&p, &input).unwrap();
        for i in 0..m {
            let (lg, lh, t) = (r.comp_g(i), r.comp_h(i), theta[&i]);
            prop_assert!((lg + lh - u[i]).abs() <= 1e-12 * u[i].abs().max(1.0), "sum {lg} + {lh} vs {}", u[i]);
            let want = u[i] * u[i] * t * (1.0 - t);
            prop_assert!(lg * lh >= 0.0);
            prop_assert!((lg * lh - want).abs() <= 1e-12 * want.abs().max(1.0), "product {} vs {want}", lg * lh);
        }
    }

    // MPCC-feasible points and BA(eps, p)-feasible points both lie in MLF(eps).
    #[test]
    fn feasible_sets_nest(eps_exp in -8.0f64..-1.0, shift in 0.0f64..=1.0, t in -2.0f64..2.0, z3 in -1.0f64..1.0, x in 0.0f64..2.0, side: bool) {
        let e = lookup("scholtes4").unwrap();
        let prob: &Arc<MpccProblem> = &e.problem;
        let eps = 10f64.powf(eps_exp);
        let p = 0.5 * eps * shift;
        let mlf = build_mlf(prob, eps).unwrap();
        let ba = build_ba(prob, eps, &[p]).unwrap();

        let mut z = if side { vec![x, 0.0, 0.0] } else { vec![0.0, x, 0.0] };
        z[2] = -z3.abs();
        prop_assert!(feasible(&mlf, &z, 1e-12), "MPCC point {z:?} outside MLF");

        // (z1 + p)(z2 + p) = (eps/2)^2 with z3 low enough for the g rows
        let ap = 0.5 * eps * 10f64.powf(t);
        let (z1, z2) = (ap - p, 0.25 * eps * eps / ap - p);
        let z = vec![z1, z2, 4.0 * z1.min(z2) - z3.abs()];
        prop_assert!(feasible(&ba, &z, 1e-9), "constructed point {z:?} is not BA-feasible");
        prop_assert!(feasible(&mlf, &z, 1e-9), "BA point {z:?} outside MLF");
    }
}

#[test]
fn mlf_bound_multipliers_are_complementary() {
    for name in ["scholtes4", "ex9_2_2", "mstat_counterexample"] {
        let e = lookup(name).unwrap();
        for eps0 in [1e-2, 3e-3, 1e-4] {
            let opts = HomotopyOptions { eps0, eps_tol: 1e-8, z0: Some(e.default_z0.clone()), ..Default::default() };
            let t = run_homotopy(&e.problem, Scheme::Mlf, &opts);
            assert!(t.succeeded(), "{name}: {:?}", t.failure);
            for r in &t.records {
                let InnerMultipliers::Mlf { lower, upper, .. } = &r.inner else { unreachable!() };
                for (l, u) in lower.iter().zip(upper) {
                    assert!((l * u).abs() <= 1e-10 * (1.0 + l.abs().max(u.abs())), "{name} eps={:e}: u_L {l} u_U {u}", r.eps);
                }
            }
        }
    }
}
