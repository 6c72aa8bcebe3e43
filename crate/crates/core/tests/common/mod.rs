#![allow(dead_code)]

use mpcc_core::model::{MpccProblem, ScalarFn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random LPCC at the origin with `m <= 3` biactive pairs
/// `(z_{2i}, z_{2i+1})`, `q` free variables and active linear inequalities.
pub struct RandomLpcc {
    pub problem: MpccProblem,
    /// Pairs built with `lambda^G < 0, lambda^H = 0`.
    pub omega: Vec<usize>,
}

/// With `degenerate == false` there are exactly `q` inequality rows, so the
/// active gradients are generically independent and the weak multipliers
/// are unique. Otherwise up to two extra rows make them non-unique.
pub fn random_lpcc(rng: &mut ChaCha8Rng, degenerate: bool) -> RandomLpcc {
    let m = rng.random_range(1..=3usize);
    let q = rng.random_range(0..=(8 - 2 * m).min(2));
    let n = 2 * m + q;
    let rows = if degenerate { q + rng.random_range(1..=2) } else { q };
    let mut p = MpccProblem::new("random_lpcc", n, ScalarFn::affine(vec![0.0; n], 0.0));
    let mut grad = vec![0.0; n];
    let mut omega = Vec::new();
    for i in 0..m {
        p.comp_g.push(ScalarFn::variable(n, 2 * i));
        p.comp_h.push(ScalarFn::variable(n, 2 * i + 1));
        let (lg, lh) = if rng.random_bool(0.3) {
            omega.push(i);
            (-rng.random_range(0.5..2.0), 0.0)
        } else {
            (signed(rng), signed(rng))
        };
        grad[2 * i] += lg;
        grad[2 * i + 1] += lh;
    }
    for _ in 0..rows {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.5..2.0) };
        for (g, aj) in grad.iter_mut().zip(&a) {
            *g -= lam * aj;
        }
        p.g.push(ScalarFn::affine(a, 0.0));
    }
    p.f = ScalarFn::affine(grad, 0.0);
    RandomLpcc { problem: p, omega }
}

fn signed(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => 0.0,
        1 => -rng.random_range(0.5..2.0),
        _ => rng.random_range(0.5..2.0),
    }
}
