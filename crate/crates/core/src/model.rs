//! MPCC problem description, evaluation, index sets and derivative checks.
//!
//! A problem is `min f(z)` subject to `g(z) <= 0`, `h(z) = 0` and the
//! complementarity pairs `0 <= G_i(z) ⊥ H_i(z) >= 0`. All indices are
//! zero-based.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::float::abs;
use crate::linalg::{dot, norm_inf, Matrix};

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type HessFn = dyn Fn(&[f64], f64, &mut Matrix) + Send + Sync;

/// A twice-differentiable scalar function of `n` variables.
///
/// The Hessian callback accumulates `weight * ∇²φ(z)` into its matrix
/// argument, which lets Lagrangian Hessians be assembled without temporaries.
#[derive(Clone)]
pub struct ScalarFn {
    value: Arc<ValueFn>,
    grad: Arc<GradFn>,
    hess: Arc<HessFn>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn")
    }
}

impl ScalarFn {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hess: impl Fn(&[f64], f64, &mut Matrix) + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
        }
    }

    pub fn from_boxed(value: Box<ValueFn>, grad: Box<GradFn>, hess: Box<HessFn>) -> Self {
        Self {
            value: Arc::from(value),
            grad: Arc::from(grad),
            hess: Arc::from(hess),
        }
    }

    /// `a^T z + c`
    pub fn affine(a: Vec<f64>, c: f64) -> Self {
        let a2 = a.clone();
        Self::new(
            move |z| dot(&a, z) + c,
            move |_, g| g.copy_from_slice(&a2),
            |_, _, _| {},
        )
    }

    /// `z_j` in `n` variables.
    pub fn variable(n: usize, j: usize) -> Self {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        Self::affine(a, 0.0)
    }

    /// `0.5 z^T Q z + a^T z + c` with `Q` symmetric.
    pub fn quadratic(q: Matrix, a: Vec<f64>, c: f64) -> Self {
        let (q1, q2, q3) = (q.clone(), q.clone(), q);
        let (a1, a2) = (a.clone(), a);
        Self::new(
            move |z| 0.5 * dot(z, &q1.mul_vec(z)) + dot(&a1, z) + c,
            move |z, g| {
                let qz = q2.mul_vec(z);
                for i in 0..g.len() {
                    g[i] = qz[i] + a2[i];
                }
            },
            move |_, w, h| h.add_scaled(w, &q3),
        )
    }

    #[inline]
    pub fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        (self.grad)(z, &mut g);
        g
    }

    pub fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        (self.grad)(z, out)
    }

    pub fn add_hessian(&self, z: &[f64], weight: f64, h: &mut Matrix) {
        if weight != 0.0 {
            (self.hess)(z, weight, h)
        }
    }

    pub fn hessian(&self, z: &[f64]) -> Matrix {
        let mut h = Matrix::zeros(z.len(), z.len());
        (self.hess)(z, 1.0, &mut h);
        h
    }
}

/// The five function blocks of an MPCC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Objective,
    Ineq,
    Eq,
    CompG,
    CompH,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Objective => "f",
            Block::Ineq => "g",
            Block::Eq => "h",
            Block::CompG => "G",
            Block::CompH => "H",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in block {block}[{index}]")]
    NonFinite { block: Block, index: usize },
    #[error("complementarity blocks G and H have different lengths ({g} vs {h})")]
    PairMismatch { g: usize, h: usize },
}

#[derive(Clone, Debug)]
pub struct KnownSolution {
    pub label: String,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MpccProblem {
    pub name: String,
    pub n: usize,
    pub f: ScalarFn,
    pub g: Vec<ScalarFn>,
    pub h: Vec<ScalarFn>,
    pub comp_g: Vec<ScalarFn>,
    pub comp_h: Vec<ScalarFn>,
    pub known_solutions: Vec<KnownSolution>,
}

impl MpccProblem {
    pub fn new(name: impl Into<String>, n: usize, f: ScalarFn) -> Self {
        Self {
            name: name.into(),
            n,
            f,
            g: Vec::new(),
            h: Vec::new(),
            comp_g: Vec::new(),
            comp_h: Vec::new(),
            known_solutions: Vec::new(),
        }
    }

    /// Number of complementarity pairs.
    pub fn m(&self) -> usize {
        self.comp_g.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.comp_g.len() != self.comp_h.len() {
            return Err(ModelError::PairMismatch {
                g: self.comp_g.len(),
                h: self.comp_h.len(),
            });
        }
        Ok(())
    }

    pub fn block(&self, b: Block) -> &[ScalarFn] {
        match b {
            Block::Objective => core::slice::from_ref(&self.f),
            Block::Ineq => &self.g,
            Block::Eq => &self.h,
            Block::CompG => &self.comp_g,
            Block::CompH => &self.comp_h,
        }
    }

    /// Copy of the problem with one extra inequality row `a^T z + c <= 0`.
    pub fn with_linear_inequality(&self, name: impl Into<String>, a: Vec<f64>, c: f64) -> Self {
        let mut p = self.clone();
        p.name = name.into();
        p.g.push(ScalarFn::affine(a, c));
        p
    }

    fn check_dim(&self, z: &[f64]) -> Result<(), ModelError> {
        if z.len() != self.n {
            return Err(ModelError::Dimension {
                expected: self.n,
                got: z.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub comp_g: Vec<f64>,
    pub comp_h: Vec<f64>,
}

pub fn evaluate(problem: &MpccProblem, z: &[f64]) -> Result<Evaluation, ModelError> {
    problem.check_dim(z)?;
    problem.validate()?;
    let eval_block = |b: Block| -> Result<Vec<f64>, ModelError> {
        problem
            .block(b)
            .iter()
            .enumerate()
            .map(|(i, phi)| {
                let v = phi.value(z);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ModelError::NonFinite { block: b, index: i })
                }
            })
            .collect()
    };
    Ok(Evaluation {
        f: eval_block(Block::Objective)?[0],
        g: eval_block(Block::Ineq)?,
        h: eval_block(Block::Eq)?,
        comp_g: eval_block(Block::CompG)?,
        comp_h: eval_block(Block::CompH)?,
    })
}

/// Gradients of every row of a block, stacked as matrix rows.
pub fn block_jacobian(problem: &MpccProblem, b: Block, z: &[f64]) -> Matrix {
    let rows: Vec<Vec<f64>> = problem.block(b).iter().map(|phi| phi.gradient(z)).collect();
    if rows.is_empty() {
        Matrix::zeros(0, z.len())
    } else {
        Matrix::from_rows(&rows)
    }
}

/// Why a complementarity pair could not be placed in alpha, gamma or beta.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairViolation {
    /// Both `G_i` and `H_i` exceed the tolerance.
    BothPositive,
    /// `G_i` or `H_i` is below `-tol`.
    Negative,
}

/// Active index sets at a point: `I_g` (active inequalities), `alpha`
/// (`G = 0 < H`), `gamma` (`G > 0 = H`) and `beta` (biactive).
#[derive(Clone, Debug, PartialEq)]
pub struct IndexSets {
    pub active_g: Vec<usize>,
    pub alpha: Vec<usize>,
    pub gamma: Vec<usize>,
    pub beta: Vec<usize>,
    /// Pairs that belong to none of the three sets.
    pub violated: Vec<(usize, PairViolation)>,
    /// Inequalities with `g_i > tol`.
    pub violated_g: Vec<usize>,
    pub tol: f64,
}

impl IndexSets {
    pub fn is_consistent(&self) -> bool {
        self.violated.is_empty() && self.violated_g.is_empty()
    }
}

/// Default activity tolerance `1e-6 * max(1, ||(G, H)||_inf)`.
pub fn default_activity_tol(ev: &Evaluation) -> f64 {
    1e-6 * 1.0f64.max(norm_inf(&ev.comp_g)).max(norm_inf(&ev.comp_h))
}

pub fn active_index_sets(problem: &MpccProblem, z: &[f64], tol: Option<f64>) -> Result<IndexSets, ModelError> {
    let ev = evaluate(problem, z)?;
    let tol = tol.unwrap_or_else(|| default_activity_tol(&ev));
    Ok(index_sets_from_values(&ev, tol))
}

pub fn index_sets_from_values(ev: &Evaluation, tol: f64) -> IndexSets {
    let mut s = IndexSets {
        active_g: Vec::new(),
        alpha: Vec::new(),
        gamma: Vec::new(),
        beta: Vec::new(),
        violated: Vec::new(),
        violated_g: Vec::new(),
        tol,
    };
    for (i, &gi) in ev.g.iter().enumerate() {
        if gi > tol {
            s.violated_g.push(i);
        } else if gi >= -tol {
            s.active_g.push(i);
        }
    }
    for (i, (&a, &b)) in ev.comp_g.iter().zip(&ev.comp_h).enumerate() {
        if a < -tol || b < -tol {
            s.violated.push((i, PairViolation::Negative));
            continue;
        }
        match (a <= tol, b <= tol) {
            (true, true) => s.beta.push(i),
            (true, false) => s.alpha.push(i),
            (false, true) => s.gamma.push(i),
            (false, false) => s.violated.push((i, PairViolation::BothPositive)),
        }
    }
    s
}

/// Largest violation among `g_+`, `|h|`, `(-G)_+`, `(-H)_+` and `|min(G, H)|`.
pub fn feasibility_residual(problem: &MpccProblem, z: &[f64]) -> Result<f64, ModelError> {
    let ev = evaluate(problem, z)?;
    Ok(feasibility_of(&ev))
}

pub fn feasibility_of(ev: &Evaluation) -> f64 {
    let mut r = 0.0f64;
    for &gi in &ev.g {
        r = r.max(gi);
    }
    for &hi in &ev.h {
        r = r.max(abs(hi));
    }
    for (&a, &b) in ev.comp_g.iter().zip(&ev.comp_h) {
        r = r.max(-a).max(-b).max(abs(a.min(b)));
    }
    r
}

/// Multipliers of the MPCC Lagrangian
/// `f + λ_g^T g + λ_h^T h - Σ λ^G_i G_i - Σ λ^H_i H_i`.
///
/// `lambda_g` has one entry per inequality and is zero off `I_g`.
/// `lambda_comp_g` is keyed by `alpha ∪ beta`, `lambda_comp_h` by `gamma ∪ beta`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MpccMultipliers {
    pub lambda_g: Vec<f64>,
    pub lambda_h: Vec<f64>,
    pub lambda_comp_g: BTreeMap<usize, f64>,
    pub lambda_comp_h: BTreeMap<usize, f64>,
}

impl MpccMultipliers {
    pub fn comp_g(&self, i: usize) -> f64 {
        self.lambda_comp_g.get(&i).copied().unwrap_or(0.0)
    }

    pub fn comp_h(&self, i: usize) -> f64 {
        self.lambda_comp_h.get(&i).copied().unwrap_or(0.0)
    }

    /// `max |multiplier|` over every component.
    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.lambda_g)
            .max(norm_inf(&self.lambda_h))
            .max(self.lambda_comp_g.values().fold(0.0, |m, v| m.max(abs(*v))))
            .max(self.lambda_comp_h.values().fold(0.0, |m, v| m.max(abs(*v))))
    }
}

/// Gradient of the MPCC Lagrangian with respect to `z`.
pub fn lagrangian_gradient(problem: &MpccProblem, z: &[f64], mult: &MpccMultipliers) -> Vec<f64> {
    let mut r = problem.f.gradient(z);
    let mut add = |phi: &ScalarFn, w: f64| {
        if w != 0.0 {
            let g = phi.gradient(z);
            for (ri, gi) in r.iter_mut().zip(&g) {
                *ri += w * gi;
            }
        }
    };
    for (i, phi) in problem.g.iter().enumerate() {
        add(phi, mult.lambda_g.get(i).copied().unwrap_or(0.0));
    }
    for (i, phi) in problem.h.iter().enumerate() {
        add(phi, mult.lambda_h.get(i).copied().unwrap_or(0.0));
    }
    for (&i, &w) in &mult.lambda_comp_g {
        add(&problem.comp_g[i], -w);
    }
    for (&i, &w) in &mult.lambda_comp_h {
        add(&problem.comp_h[i], -w);
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeEntry {
    pub block: Block,
    pub index: usize,
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub hessian_asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeReport {
    pub entries: Vec<DerivativeEntry>,
    pub tol: f64,
}

impl DerivativeReport {
    pub fn worst_gradient_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.gradient_error))
    }

    pub fn worst_hessian_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.hessian_error))
    }

    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.gradient_error <= self.tol && e.hessian_error <= self.tol && e.hessian_asymmetry <= 1e-12)
    }
}

/// Central-difference check of one scalar function: returns
/// (gradient error, Hessian error, Hessian asymmetry), errors relative to
/// `max(1, |analytic|)`.
pub fn check_scalar_fn(phi: &ScalarFn, z: &[f64], step: f64) -> (f64, f64, f64) {
    let n = z.len();
    let g = phi.gradient(z);
    let h = phi.hessian(z);
    let mut zp = z.to_vec();
    let (mut gerr, mut herr) = (0.0f64, 0.0f64);
    for j in 0..n {
        let hj = step * 1.0f64.max(abs(z[j]));
        zp[j] = z[j] + hj;
        let fp = phi.value(&zp);
        let gp = phi.gradient(&zp);
        zp[j] = z[j] - hj;
        let fm = phi.value(&zp);
        let gm = phi.gradient(&zp);
        zp[j] = z[j];
        let fd = (fp - fm) / (2.0 * hj);
        gerr = gerr.max(abs(fd - g[j]) / 1.0f64.max(abs(g[j])));
        for i in 0..n {
            let fdh = (gp[i] - gm[i]) / (2.0 * hj);
            herr = herr.max(abs(fdh - h[(i, j)]) / 1.0f64.max(abs(h[(i, j)])));
        }
    }
    (gerr, herr, h.asymmetry())
}

/// Validates the gradients and Hessians of every block at `z`.
pub fn check_derivatives(problem: &MpccProblem, z: &[f64], step: f64) -> Result<DerivativeReport, ModelError> {
    evaluate(problem, z)?;
    let mut entries = Vec::new();
    for b in [Block::Objective, Block::Ineq, Block::Eq, Block::CompG, Block::CompH] {
        for (i, phi) in problem.block(b).iter().enumerate() {
            let (gradient_error, hessian_error, hessian_asymmetry) = check_scalar_fn(phi, z, step);
            entries.push(DerivativeEntry {
                block: b,
                index: i,
                gradient_error,
                hessian_error,
                hessian_asymmetry,
            });
        }
    }
    Ok(DerivativeReport { entries, tol: 1e-6 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MpccProblem {
        let mut p = MpccProblem::new("toy", 2, ScalarFn::quadratic(Matrix::identity(2), vec![-1.0, 0.0], 0.5));
        p.comp_g.push(ScalarFn::variable(2, 0));
        p.comp_h.push(ScalarFn::variable(2, 1));
        p
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let e = evaluate(&toy(), &[1.0]).unwrap_err();
        assert_eq!(e, ModelError::Dimension { expected: 2, got: 1 });
    }

    #[test]
    fn nan_names_the_block() {
        let mut p = toy();
        p.h.push(ScalarFn::new(|_| f64::NAN, |_, _| {}, |_, _, _| {}));
        let e = evaluate(&p, &[0.0, 0.0]).unwrap_err();
        assert_eq!(e, ModelError::NonFinite { block: Block::Eq, index: 0 });
        assert_eq!(alloc::format!("{e}"), "non-finite value in block h[0]");
    }

    #[test]
    fn index_sets_partition_pairs() {
        let p = toy();
        let s = active_index_sets(&p, &[0.0, 0.0], None).unwrap();
        assert_eq!(s.beta, vec![0]);
        let s = active_index_sets(&p, &[0.0, 2.0], None).unwrap();
        assert_eq!(s.alpha, vec![0]);
        let s = active_index_sets(&p, &[1.0, 1.0], None).unwrap();
        assert_eq!(s.violated, vec![(0, PairViolation::BothPositive)]);
        assert_eq!(feasibility_residual(&p, &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_derivatives_check() {
        let r = check_derivatives(&toy(), &[0.3, -0.7], 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
