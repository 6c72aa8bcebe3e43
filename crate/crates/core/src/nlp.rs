//! Smooth NLP instances and a primal-dual interior-point solver.
//!
//! ```text
//! min f(x)  s.t.  c_E(x) = 0,  c_I(x) <= 0,  lower <= x <= upper
//! ```
//!
//! Every constraint row carries a `scale`; feasibility and complementarity
//! are measured relative to it, so rows whose natural size is `eps` are
//! resolved to the same relative accuracy as unit rows. Converged iterates
//! are finished by Newton's method on the identified active set, which
//! sets inactive multipliers to exactly zero.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::float::{abs, ln, powf, sqrt};
use crate::linalg::{dot, nnls, norm1, norm_inf, Matrix, SymmetricSolver};
use crate::model::{check_scalar_fn, ScalarFn};

#[derive(Clone, Debug)]
pub struct NlpRow {
    pub func: ScalarFn,
    pub scale: f64,
    pub label: String,
}

impl NlpRow {
    pub fn new(func: ScalarFn, scale: f64, label: impl Into<String>) -> Self {
        Self {
            func,
            scale,
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NlpInstance {
    pub name: String,
    pub n: usize,
    pub objective: ScalarFn,
    pub equalities: Vec<NlpRow>,
    pub inequalities: Vec<NlpRow>,
    /// Per-variable bounds; `-inf`/`+inf` when absent.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl NlpInstance {
    pub fn new(name: impl Into<String>, n: usize, objective: ScalarFn) -> Self {
        Self {
            name: name.into(),
            n,
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum NlpError {
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value at the starting point ({what})")]
    NonFinite { what: &'static str },
    #[error("multiplier vector `{what}` has length {got}, expected {expected}")]
    MultiplierShape { what: &'static str, expected: usize, got: usize },
    #[error("lower bound exceeds upper bound for variable {index}")]
    InvalidBounds { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial barrier parameter; defaults to 0.1 cold and `1e-3 * min scale` warm.
    pub mu_init: Option<f64>,
    /// Final barrier parameter; defaults to `0.1 * tol * min scale`.
    pub mu_min: Option<f64>,
    /// Smallest Hessian shift tried by the inertia correction.
    pub reg_floor: f64,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            mu_init: None,
            mu_min: None,
            reg_floor: 1e-10,
            polish: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KktStatus {
    Converged,
    MaxIter,
    Infeasible,
    Unbounded,
}

/// Multipliers for the Lagrangian
/// `f + eq^T c_E + ineq^T c_I + lower^T (l - x) + upper^T (x - u)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NlpMultipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktPoint {
    pub z: Vec<f64>,
    pub mult: NlpMultipliers,
    pub status: KktStatus,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Hessian shift applied by the inertia correction on the last iteration.
    pub hessian_shift: f64,
    /// Whether the active-set Newton finish was accepted.
    pub polished: bool,
    /// Estimated rounding level of the scaled KKT error at `z`. A polished
    /// point whose Newton iteration stagnates below this level (but above
    /// `tol`) is reported as converged.
    pub noise_floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum IneqKind {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

struct Prepared<'a> {
    nlp: &'a NlpInstance,
    kinds: Vec<IneqKind>,
    scale_e: Vec<f64>,
    scale_i: Vec<f64>,
}

#[derive(Clone)]
struct Point {
    f: f64,
    grad: Vec<f64>,
    ce: Vec<f64>,
    je: Matrix,
    ci: Vec<f64>,
    ji: Matrix,
}

impl<'a> Prepared<'a> {
    fn new(nlp: &'a NlpInstance) -> Result<Self, NlpError> {
        if nlp.lower.len() != nlp.n || nlp.upper.len() != nlp.n {
            return Err(NlpError::Dimension {
                expected: nlp.n,
                got: nlp.lower.len().min(nlp.upper.len()),
            });
        }
        let mut kinds: Vec<IneqKind> = (0..nlp.inequalities.len()).map(IneqKind::Row).collect();
        for j in 0..nlp.n {
            if nlp.lower[j] > nlp.upper[j] {
                return Err(NlpError::InvalidBounds { index: j });
            }
            if nlp.lower[j].is_finite() {
                kinds.push(IneqKind::Lower(j));
            }
            if nlp.upper[j].is_finite() {
                kinds.push(IneqKind::Upper(j));
            }
        }
        let scale_i = kinds
            .iter()
            .map(|k| match *k {
                IneqKind::Row(i) => nlp.inequalities[i].scale,
                _ => 1.0,
            })
            .collect();
        Ok(Self {
            nlp,
            kinds,
            scale_e: nlp.equalities.iter().map(|r| r.scale).collect(),
            scale_i,
        })
    }

    /// Rounding level of the scaled KKT error: perturbing `x` by
    /// `u * max(1, |x|)` moves constraints and the Lagrangian gradient by
    /// this much relative to their scales.
    fn noise_floor(&self, x: &[f64], p: &Point, w: &Matrix, y: &[f64], lam: &[f64]) -> f64 {
        let dz = NOISE * f64::EPSILON * 1.0f64.max(norm_inf(x));
        let sd = 1.0f64.max(norm_inf(y).max(norm_inf(lam)) / 100.0);
        let mut worst = (0..w.rows()).map(|i| norm1(w.row(i))).fold(0.0, f64::max) / sd;
        for i in 0..p.ce.len() {
            worst = worst.max(norm1(p.je.row(i)) / self.scale_e[i]);
        }
        for i in 0..p.ci.len() {
            worst = worst.max(norm1(p.ji.row(i)) / self.scale_i[i]);
        }
        dz * worst
    }

    /// Largest scaled constraint violation.
    fn violation(&self, p: &Point) -> f64 {
        let e = p.ce.iter().zip(&self.scale_e).map(|(c, s)| abs(*c) / s);
        let i = p.ci.iter().zip(&self.scale_i).map(|(c, s)| c.max(0.0) / s);
        e.chain(i).fold(0.0, f64::max)
    }

    fn min_scale(&self) -> f64 {
        self.scale_e.iter().chain(&self.scale_i).fold(1.0f64, |m, s| m.min(*s))
    }

    fn eval(&self, x: &[f64]) -> Option<Point> {
        let n = self.nlp.n;
        let f = self.nlp.objective.value(x);
        let grad = self.nlp.objective.gradient(x);
        let me = self.nlp.equalities.len();
        let mut ce = vec![0.0; me];
        let mut je = Matrix::zeros(me, n);
        for (i, row) in self.nlp.equalities.iter().enumerate() {
            ce[i] = row.func.value(x);
            row.func.gradient_into(x, je.row_mut(i));
        }
        let mi = self.kinds.len();
        let mut ci = vec![0.0; mi];
        let mut ji = Matrix::zeros(mi, n);
        for (i, k) in self.kinds.iter().enumerate() {
            match *k {
                IneqKind::Row(r) => {
                    let row = &self.nlp.inequalities[r];
                    ci[i] = row.func.value(x);
                    row.func.gradient_into(x, ji.row_mut(i));
                }
                IneqKind::Lower(j) => {
                    ci[i] = self.nlp.lower[j] - x[j];
                    ji[(i, j)] = -1.0;
                }
                IneqKind::Upper(j) => {
                    ci[i] = x[j] - self.nlp.upper[j];
                    ji[(i, j)] = 1.0;
                }
            }
        }
        let finite = f.is_finite()
            && grad.iter().all(|v| v.is_finite())
            && ce.iter().chain(&ci).all(|v| v.is_finite())
            && je.as_slice().iter().chain(ji.as_slice()).all(|v| v.is_finite());
        finite.then_some(Point { f, grad, ce, je, ci, ji })
    }

    fn hessian(&self, x: &[f64], y: &[f64], lam: &[f64]) -> Matrix {
        let n = self.nlp.n;
        let mut w = Matrix::zeros(n, n);
        self.nlp.objective.add_hessian(x, 1.0, &mut w);
        for (row, &yi) in self.nlp.equalities.iter().zip(y) {
            row.func.add_hessian(x, yi, &mut w);
        }
        for (k, &li) in self.kinds.iter().zip(lam) {
            if let IneqKind::Row(r) = *k {
                self.nlp.inequalities[r].func.add_hessian(x, li, &mut w);
            }
        }
        w
    }

    fn split(&self, lam: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nlp.n;
        let mut ineq = vec![0.0; self.nlp.inequalities.len()];
        let (mut lo, mut up) = (vec![0.0; n], vec![0.0; n]);
        for (k, &l) in self.kinds.iter().zip(lam) {
            match *k {
                IneqKind::Row(r) => ineq[r] = l,
                IneqKind::Lower(j) => lo[j] = l,
                IneqKind::Upper(j) => up[j] = l,
            }
        }
        (ineq, lo, up)
    }

    fn join(&self, m: &NlpMultipliers) -> Vec<Option<f64>> {
        self.kinds
            .iter()
            .map(|k| match *k {
                IneqKind::Row(r) => m.ineq.get(r).copied(),
                IneqKind::Lower(j) => m.lower.get(j).copied(),
                IneqKind::Upper(j) => m.upper.get(j).copied(),
            })
            .collect()
    }

    /// Scaled KKT error of `(x, y, lam)` using the true constraint values.
    fn kkt_error(&self, p: &Point, y: &[f64], lam: &[f64]) -> f64 {
        let rd = dual_residual(p, y, lam);
        let sd = 1.0f64.max(norm_inf(y).max(norm_inf(lam)) / 100.0);
        let mut err = norm_inf(&rd) / sd;
        for (c, s) in p.ce.iter().zip(&self.scale_e) {
            err = err.max(abs(*c) / s);
        }
        for ((c, s), l) in p.ci.iter().zip(&self.scale_i).zip(lam) {
            err = err.max(c.max(0.0) / s).max((-l).max(0.0)).max(abs(l * c) / (s * sd));
        }
        err
    }
}

fn dual_residual(p: &Point, y: &[f64], lam: &[f64]) -> Vec<f64> {
    let mut r = p.grad.clone();
    let je_y = p.je.tr_mul_vec(y);
    let ji_l = p.ji.tr_mul_vec(lam);
    for j in 0..r.len() {
        r[j] += je_y[j] + ji_l[j];
    }
    r
}

/// Scaled KKT residual of a candidate primal-dual point.
pub fn kkt_residual(nlp: &NlpInstance, z: &[f64], mult: &NlpMultipliers) -> Result<f64, NlpError> {
    let pr = Prepared::new(nlp)?;
    check_len("z", nlp.n, z.len())?;
    check_len("eq", nlp.equalities.len(), mult.eq.len())?;
    check_len("ineq", nlp.inequalities.len(), mult.ineq.len())?;
    let lam: Vec<f64> = pr.join(mult).into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let p = pr.eval(z).ok_or(NlpError::NonFinite { what: "evaluation" })?;
    Ok(pr.kkt_error(&p, &mult.eq, &lam))
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), NlpError> {
    if expected != got {
        if what == "z" {
            return Err(NlpError::Dimension { expected, got });
        }
        return Err(NlpError::MultiplierShape { what, expected, got });
    }
    Ok(())
}

/// Hessian of the Lagrangian at `(z, mult)`.
pub fn lagrangian_hessian(nlp: &NlpInstance, z: &[f64], mult: &NlpMultipliers) -> Result<Matrix, NlpError> {
    let pr = Prepared::new(nlp)?;
    let lam: Vec<f64> = pr.join(mult).into_iter().map(|v| v.unwrap_or(0.0)).collect();
    Ok(pr.hessian(z, &mult.eq, &lam))
}

/// Finite-difference validation of every function in the instance; returns
/// the worst relative gradient error.
pub fn check_nlp_derivatives(nlp: &NlpInstance, z: &[f64], step: f64) -> f64 {
    let mut worst = check_scalar_fn(&nlp.objective, z, step).0;
    for row in nlp.equalities.iter().chain(&nlp.inequalities) {
        worst = worst.max(check_scalar_fn(&row.func, z, step).0);
    }
    worst
}

pub fn solve(nlp: &NlpInstance, z0: &[f64], opts: &SolverOptions) -> Result<KktPoint, NlpError> {
    solve_from(nlp, z0, None, opts)
}

/// Solve starting from `z0` with multiplier estimates (zero-length vectors
/// are treated as absent).
pub fn solve_warm(
    nlp: &NlpInstance,
    z0: &[f64],
    warm: &NlpMultipliers,
    opts: &SolverOptions,
) -> Result<KktPoint, NlpError> {
    solve_from(nlp, z0, Some(warm), opts)
}

const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_EPS: f64 = 10.0;
const NOISE: f64 = 10.0;
const STALL_ITERS: usize = 15;

struct Linearization {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dl: Vec<f64>,
    shift: f64,
}

#[allow(clippy::too_many_arguments)]
fn newton_step(
    pr: &Prepared<'_>,
    x: &[f64],
    p: &Point,
    s: &[f64],
    y: &[f64],
    lam: &[f64],
    mu: f64,
    shift_floor: f64,
    last_shift: f64,
) -> Linearization {
    let n = pr.nlp.n;
    let me = p.ce.len();
    let mi = s.len();
    let w = pr.hessian(x, y, lam);
    let sigma: Vec<f64> = (0..mi).map(|i| lam[i] / s[i]).collect();
    let rd = dual_residual(p, y, lam);
    let ri: Vec<f64> = (0..mi).map(|i| p.ci[i] + s[i]).collect();

    let mut base = w;
    for i in 0..mi {
        let row = p.ji.row(i);
        base.add_outer(sigma[i], row, row);
    }
    let mut rhs = vec![0.0; n + me];
    let t: Vec<f64> = (0..mi).map(|i| lam[i] - mu / s[i] - sigma[i] * ri[i]).collect();
    let jt = p.ji.tr_mul_vec(&t);
    for j in 0..n {
        rhs[j] = -rd[j] + jt[j];
    }
    for i in 0..me {
        rhs[n + i] = -p.ce[i];
    }

    let scale = base.max_abs().max(1.0);
    let mut shift = 0.0;
    let mut dc = 0.0;
    let mut attempt = 0;
    let solver = loop {
        let mut k = Matrix::zeros(n + me, n + me);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = base[(i, j)];
            }
            k[(i, i)] += shift;
        }
        for i in 0..me {
            for j in 0..n {
                k[(n + i, j)] = p.je[(i, j)];
                k[(j, n + i)] = p.je[(i, j)];
            }
            k[(n + i, n + i)] = -dc;
        }
        let sol = SymmetricSolver::new(k, 1e-13);
        let inr = sol.inertia();
        if (inr.positive == n && inr.negative == me && inr.zero == 0) || attempt > 60 {
            break sol;
        }
        attempt += 1;
        if inr.zero > 0 && dc == 0.0 {
            dc = 1e-8 * powf(mu, 0.25);
            if inr.negative + inr.zero <= me {
                continue;
            }
        }
        shift = if shift == 0.0 {
            if last_shift == 0.0 {
                shift_floor.max(1e-8 * scale)
            } else {
                shift_floor.max(last_shift / 3.0)
            }
        } else if last_shift == 0.0 {
            shift * 10.0
        } else {
            shift * 4.0
        };
    };
    let sol = solver.solve(&rhs);
    let dx = sol[..n].to_vec();
    let dy = sol[n..].to_vec();
    let jdx = p.ji.mul_vec(&dx);
    let ds: Vec<f64> = (0..mi).map(|i| -ri[i] - jdx[i]).collect();
    let dl: Vec<f64> = (0..mi)
        .map(|i| sigma[i] * (ri[i] + jdx[i]) - lam[i] + mu / s[i])
        .collect();
    Linearization { dx, dy, ds, dl, shift }
}

fn fraction_to_boundary(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    let mut a = 1.0f64;
    for (vi, di) in v.iter().zip(dv) {
        if *di < 0.0 {
            a = a.min(-tau * vi / di);
        }
    }
    a
}

fn merit(p: &Point, s: &[f64], mu: f64, nu: f64) -> f64 {
    let barrier: f64 = s.iter().map(|si| ln(*si)).sum();
    let infeas = norm1(&p.ce) + p.ci.iter().zip(s).map(|(c, si)| abs(c + si)).sum::<f64>();
    p.f - mu * barrier + nu * infeas
}

fn solve_from(
    nlp: &NlpInstance,
    z0: &[f64],
    warm: Option<&NlpMultipliers>,
    opts: &SolverOptions,
) -> Result<KktPoint, NlpError> {
    let first = solve_core(nlp, z0, warm, opts)?;
    if matches!(first.status, KktStatus::Converged | KktStatus::Unbounded) {
        return Ok(first);
    }
    let pr = Prepared::new(nlp)?;
    let p0 = pr.eval(z0).ok_or(NlpError::NonFinite { what: "starting point" })?;
    let infeasible_end = pr.eval(&first.z).map_or(true, |p| pr.violation(&p) > sqrt(opts.tol));
    if pr.violation(&p0) <= opts.tol || !infeasible_end {
        return Ok(first);
    }
    // restart from a point of the elastic feasibility problem
    let (feas, w0) = elastic_instance(nlp, z0, &p0);
    let fopts = SolverOptions { polish: false, ..*opts };
    let Ok(r) = solve_core(&feas, &w0, None, &fopts) else {
        return Ok(first);
    };
    let x1 = &r.z[..nlp.n];
    let Some(p1) = pr.eval(x1) else {
        return Ok(first);
    };
    if pr.violation(&p1) > sqrt(opts.tol) {
        let mut out = first;
        out.status = KktStatus::Infeasible;
        return Ok(out);
    }
    let second = solve_core(nlp, x1, None, opts)?;
    let better = second.status == KktStatus::Converged
        || (first.status != KktStatus::Converged && second.kkt_residual < first.kkt_residual);
    Ok(if better { second } else { first })
}

/// `min sum t/scale + 1e-4/2 |x - x0|^2` subject to `c_I(x) - t <= 0`,
/// `c_E(x) - tp + tn = 0` and `t, tp, tn >= 0`; strictly feasible at the
/// returned starting point.
fn elastic_instance(nlp: &NlpInstance, x0: &[f64], p0: &Point) -> (NlpInstance, Vec<f64>) {
    let n = nlp.n;
    let mi = nlp.inequalities.len();
    let me = nlp.equalities.len();
    let ne = n + mi + 2 * me;
    let mut w = vec![0.0; ne];
    w[..n].copy_from_slice(x0);
    let mut weights = vec![0.0; ne];
    for (i, row) in nlp.inequalities.iter().enumerate() {
        weights[n + i] = 1.0 / row.scale;
        w[n + i] = p0.ci[i].max(0.0) + row.scale;
    }
    for (i, row) in nlp.equalities.iter().enumerate() {
        weights[n + mi + 2 * i] = 1.0 / row.scale;
        weights[n + mi + 2 * i + 1] = 1.0 / row.scale;
        w[n + mi + 2 * i] = p0.ce[i].max(0.0) + row.scale;
        w[n + mi + 2 * i + 1] = (-p0.ce[i]).max(0.0) + row.scale;
    }
    let rho = 1e-4;
    let mut q = Matrix::zeros(ne, ne);
    let mut a = weights;
    let mut c = 0.0;
    for j in 0..n {
        q[(j, j)] = rho;
        a[j] = -rho * x0[j];
        c += 0.5 * rho * x0[j] * x0[j];
    }
    let mut out = NlpInstance::new(alloc::format!("{}:elastic", nlp.name), ne, ScalarFn::quadratic(q, a, c));
    for (i, row) in nlp.inequalities.iter().enumerate() {
        out.inequalities.push(NlpRow::new(lift(&row.func, n, &[(n + i, -1.0)]), row.scale, row.label.clone()));
    }
    for (i, row) in nlp.equalities.iter().enumerate() {
        let extra = [(n + mi + 2 * i, -1.0), (n + mi + 2 * i + 1, 1.0)];
        out.equalities.push(NlpRow::new(lift(&row.func, n, &extra), row.scale, row.label.clone()));
    }
    out.lower[..n].copy_from_slice(&nlp.lower);
    out.upper[..n].copy_from_slice(&nlp.upper);
    for j in n..ne {
        out.lower[j] = 0.0;
    }
    (out, w)
}

/// `f(z[..n]) + sum coef * z[k]` on the extended vector.
fn lift(f: &ScalarFn, n: usize, extra: &[(usize, f64)]) -> ScalarFn {
    let (f1, f2, f3) = (f.clone(), f.clone(), f.clone());
    let e1: Vec<(usize, f64)> = extra.to_vec();
    let e2 = e1.clone();
    ScalarFn::new(
        move |z| f1.value(&z[..n]) + e1.iter().map(|&(k, a)| a * z[k]).sum::<f64>(),
        move |z, out| {
            f2.gradient_into(&z[..n], &mut out[..n]);
            for v in out[n..].iter_mut() {
                *v = 0.0;
            }
            for &(k, a) in &e2 {
                out[k] = a;
            }
        },
        move |z, wgt, h| {
            let mut hn = Matrix::zeros(n, n);
            f3.add_hessian(&z[..n], wgt, &mut hn);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += hn[(i, j)];
                }
            }
        },
    )
}

fn solve_core(
    nlp: &NlpInstance,
    z0: &[f64],
    warm: Option<&NlpMultipliers>,
    opts: &SolverOptions,
) -> Result<KktPoint, NlpError> {
    let pr = Prepared::new(nlp)?;
    check_len("z", nlp.n, z0.len())?;
    let me = nlp.equalities.len();
    let mi = pr.kinds.len();
    let min_scale = pr.min_scale();
    let mu_min = opts.mu_min.unwrap_or(0.01 * opts.tol * min_scale);
    let mut mu = opts
        .mu_init
        .unwrap_or(if warm.is_some() { 1e-3 * min_scale } else { 0.1 })
        .max(mu_min);

    let mut x = z0.to_vec();
    let mut p = pr.eval(&x).ok_or(NlpError::NonFinite { what: "starting point" })?;

    let given = warm.map(|w| pr.join(w));
    if let (Some(w), Some(g)) = (warm, given.as_ref()) {
        if w.eq.len() == me && g.iter().all(Option::is_some) {
            let lam: Vec<f64> = g.iter().map(|l| l.unwrap_or(0.0).max(0.0)).collect();
            let err = pr.kkt_error(&p, &w.eq, &lam);
            if err <= opts.tol {
                let noise_floor = pr.noise_floor(&x, &p, &pr.hessian(&x, &w.eq, &lam), &w.eq, &lam);
                let (ineq, lower, upper) = pr.split(&lam);
                return Ok(KktPoint {
                    objective: p.f,
                    z: x,
                    mult: NlpMultipliers { eq: w.eq.clone(), ineq, lower, upper },
                    status: KktStatus::Converged,
                    kkt_residual: err,
                    iterations: 0,
                    hessian_shift: 0.0,
                    polished: false,
                    noise_floor,
                });
            }
        }
    }
    let mut s = vec![0.0; mi];
    let mut lam = vec![0.0; mi];
    for i in 0..mi {
        let c = p.ci[i];
        match given.as_ref().and_then(|g| g[i]) {
            Some(l) => {
                let l = l.max(0.0);
                s[i] = (-c).max(mu / l.max(1e-2));
                lam[i] = l.max(mu / s[i]);
            }
            None => {
                s[i] = abs(c).max(1e-2 * pr.scale_i[i]);
                lam[i] = mu / s[i];
            }
        }
    }
    let mut y = match warm {
        Some(w) if w.eq.len() == me => w.eq.clone(),
        _ => least_squares_multipliers(&p, &lam),
    };

    let mut nu = 1.0f64;
    let mut last_shift = 0.0;
    let mut status = KktStatus::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Point)> = None;
    let mut since_best = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let err = pr.kkt_error(&p, &y, &lam);
        if best.as_ref().map_or(true, |b| err < b.0) {
            let big = best.as_ref().map_or(true, |b| err < 0.5 * b.0);
            best = Some((err, x.clone(), s.clone(), y.clone(), lam.clone(), p.clone()));
            if big {
                since_best = 0;
            }
        }
        if best.as_ref().map_or(false, |b| b.0 <= sqrt(opts.tol)) {
            since_best += 1;
        }
        if since_best > STALL_ITERS {
            status = KktStatus::MaxIter;
            break;
        }
        let rd = dual_residual(&p, &y, &lam);
        let sd = 1.0f64.max(norm_inf(&y).max(norm_inf(&lam)) / 100.0);
        let stat = norm_inf(&rd) / sd;
        let mut feas_true = 0.0f64;
        let mut feas_slack = 0.0f64;
        for (c, sc) in p.ce.iter().zip(&pr.scale_e) {
            feas_true = feas_true.max(abs(*c) / sc);
        }
        feas_slack = feas_slack.max(feas_true);
        let mut compl = 0.0f64;
        let mut compl_mu = 0.0f64;
        for i in 0..mi {
            let sc = pr.scale_i[i];
            feas_true = feas_true.max(p.ci[i].max(0.0) / sc);
            feas_slack = feas_slack.max(abs(p.ci[i] + s[i]) / sc);
            compl = compl.max(s[i] * lam[i] / (sc * sd));
            compl_mu = compl_mu.max(abs(s[i] * lam[i] - mu) / (sc * sd));
        }
        if feas_slack <= opts.tol && err <= opts.tol {
            status = KktStatus::Converged;
            break;
        }
        if p.f < -1e20 && feas_true <= sqrt(opts.tol) {
            status = KktStatus::Unbounded;
            break;
        }
        if iter == opts.max_iter {
            break;
        }
        // barrier update
        loop {
            let mu_hat = mu / min_scale;
            let target = (KAPPA_EPS * mu_hat).max(0.1 * opts.tol);
            if mu > mu_min && stat <= target && feas_slack <= target && compl_mu <= KAPPA_EPS * mu_hat {
                mu = mu_min.max((0.2 * mu).min(powf(mu, 1.5)));
                compl_mu = 0.0;
                for i in 0..mi {
                    compl_mu = compl_mu.max(abs(s[i] * lam[i] - mu) / (pr.scale_i[i] * sd));
                }
            } else {
                break;
            }
        }
        let tau = 0.99f64.max(1.0 - mu / min_scale);

        let step = newton_step(&pr, &x, &p, &s, &y, &lam, mu, opts.reg_floor, last_shift);
        last_shift = step.shift;
        if step.dx.iter().chain(&step.dy).chain(&step.dl).any(|v| !v.is_finite()) {
            stalls += 1;
            if stalls > 5 {
                break;
            }
            continue;
        }
        let alpha_p = fraction_to_boundary(&s, &step.ds, tau);
        let alpha_d = fraction_to_boundary(&lam, &step.dl, tau);

        let ynew_max = y
            .iter()
            .zip(&step.dy)
            .map(|(a, b)| abs(a + b))
            .chain(lam.iter().zip(&step.dl).map(|(a, b)| abs(a + b)))
            .fold(0.0f64, f64::max);
        if nu < ynew_max * 1.1 {
            nu = ynew_max * 2.0 + 1.0;
        }
        let phi0 = merit(&p, &s, mu, nu);
        let infeas0 = norm1(&p.ce) + p.ci.iter().zip(&s).map(|(c, si)| abs(c + si)).sum::<f64>();
        let dphi = dot(&p.grad, &step.dx)
            - mu * s.iter().zip(&step.ds).map(|(si, di)| di / si).sum::<f64>()
            - nu * infeas0;

        let mut alpha = alpha_p;
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&step.dx).map(|(a, b)| a + alpha * b).collect();
            let st: Vec<f64> = s.iter().zip(&step.ds).map(|(a, b)| a + alpha * b).collect();
            if let Some(pt) = pr.eval(&xt) {
                let phit = merit(&pt, &st, mu, nu);
                let slack = 10.0 * f64::EPSILON * abs(phi0);
                if phit <= phi0 + 1e-4 * alpha * dphi.min(0.0) + slack {
                    accepted = Some((xt, st, pt));
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break;
            }
        }
        let Some((xt, st, pt)) = accepted else {
            stalls += 1;
            if stalls > 8 {
                status = if feas_true > sqrt(opts.tol) { KktStatus::Infeasible } else { KktStatus::MaxIter };
                break;
            }
            // take a tiny step anyway to escape
            let a = alpha_p * 1e-3;
            let xt: Vec<f64> = x.iter().zip(&step.dx).map(|(u, v)| u + a * v).collect();
            let st: Vec<f64> = s.iter().zip(&step.ds).map(|(u, v)| u + a * v).collect();
            if let Some(pt) = pr.eval(&xt) {
                x = xt;
                s = st;
                p = pt;
            }
            continue;
        };
        if alpha < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        let ad = alpha_d.min(1.0);
        x = xt;
        s = st;
        p = pt;
        for (yi, di) in y.iter_mut().zip(&step.dy) {
            *yi += alpha * di;
        }
        for i in 0..mi {
            lam[i] += ad * step.dl[i];
            let lo = mu / (KAPPA_SIGMA * s[i]);
            let hi = KAPPA_SIGMA * mu / s[i];
            lam[i] = lam[i].max(lo).min(hi);
        }
        if stalls > 8 {
            status = if feas_true > sqrt(opts.tol) { KktStatus::Infeasible } else { KktStatus::MaxIter };
            break;
        }
    }

    let mut kkt_err = pr.kkt_error(&p, &y, &lam);
    if let Some((e, bx, bs, by, bl, bp)) = best {
        if e < kkt_err {
            (kkt_err, x, s, y, lam, p) = (e, bx, bs, by, bl, bp);
        }
    }
    let mut polished = false;
    if opts.polish && status != KktStatus::Unbounded && kkt_err <= 1e-3 {
        let lmax = 1.0f64.max(norm_inf(&lam));
        let rules: [&dyn Fn(usize) -> bool; 4] = [
            &|i| lam[i] > s[i] / pr.scale_i[i],
            &|i| lam[i] > s[i] / pr.scale_i[i] && lam[i] > 1e-12 * lmax,
            &|i| lam[i] / lmax > s[i] / pr.scale_i[i],
            &|i| lam[i] / lmax > (s[i] / pr.scale_i[i]).max(1e-8),
        ];
        let mut seen: Vec<Vec<usize>> = Vec::new();
        let mut found = None;
        for rule in rules {
            let active: Vec<usize> = (0..mi).filter(|&i| rule(i)).collect();
            if seen.contains(&active) {
                continue;
            }
            let res = polish(&pr, &x, &y, &lam, &active);
            if let Some((xp, yp, lp, pp)) = res {
                let err = pr.kkt_error(&pp, &yp, &lp);
                if err <= (1.01 * kkt_err).max(opts.tol * 1e-2) && found.as_ref().map_or(true, |f: &(f64, _, _, _, _)| err < f.0) {
                    found = Some((err, xp, yp, lp, pp));
                }
            }
            seen.push(active);
        }
        if found.is_none() {
            for active in &seen {
                let (yr, lr) = refit_multipliers(&p, active);
                let err = pr.kkt_error(&p, &yr, &lr);
                if err <= (1.01 * kkt_err).max(opts.tol * 1e-2) && found.as_ref().map_or(true, |f: &(f64, _, _, _, _)| err < f.0) {
                    found = Some((err, x.clone(), yr, lr, p.clone()));
                }
            }
        }
        if let Some((err, xp, yp, lp, pp)) = found {
            x = xp;
            y = yp;
            lam = lp;
            p = pp;
            kkt_err = err;
            polished = true;
        }
    }
    let noise_floor = pr.noise_floor(&x, &p, &pr.hessian(&x, &y, &lam), &y, &lam);
    if kkt_err <= opts.tol || (polished && kkt_err <= noise_floor) {
        status = KktStatus::Converged;
    } else if status == KktStatus::Converged {
        status = KktStatus::MaxIter;
    }
    let (ineq, lower, upper) = pr.split(&lam);
    Ok(KktPoint {
        objective: p.f,
        z: x,
        mult: NlpMultipliers { eq: y, ineq, lower, upper },
        status,
        kkt_residual: kkt_err,
        iterations,
        hessian_shift: last_shift,
        polished,
        noise_floor,
    })
}

fn least_squares_multipliers(p: &Point, lam: &[f64]) -> Vec<f64> {
    let n = p.grad.len();
    let me = p.ce.len();
    if me == 0 {
        return Vec::new();
    }
    let mut k = Matrix::zeros(n + me, n + me);
    for i in 0..n {
        k[(i, i)] = 1.0;
    }
    for i in 0..me {
        for j in 0..n {
            k[(n + i, j)] = p.je[(i, j)];
            k[(j, n + i)] = p.je[(i, j)];
        }
        k[(n + i, n + i)] = -1e-8;
    }
    let g = p.ji.tr_mul_vec(lam);
    let mut rhs = vec![0.0; n + me];
    for j in 0..n {
        rhs[j] = -(p.grad[j] + g[j]);
    }
    let sol = SymmetricSolver::new(k, 1e-13).solve(&rhs);
    let y = sol[n..].to_vec();
    if y.iter().any(|v| !v.is_finite()) || norm_inf(&y) > 1e3 {
        vec![0.0; me]
    } else {
        y
    }
}

/// Newton's method on the square system formed by stationarity, the
/// equalities and the inequalities identified as active.
/// Least-squares multipliers at a fixed primal point: `y` free, `lam >= 0` on
/// `active` and zero elsewhere.
fn refit_multipliers(p: &Point, active: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = p.grad.len();
    let me = p.ce.len();
    let mut a = Matrix::zeros(n, me + active.len());
    for j in 0..n {
        for i in 0..me {
            a[(j, i)] = p.je[(i, j)];
        }
        for (k, &i) in active.iter().enumerate() {
            a[(j, me + k)] = p.ji[(i, j)];
        }
    }
    let b: Vec<f64> = p.grad.iter().map(|g| -g).collect();
    let mut free = vec![true; me];
    free.resize(me + active.len(), false);
    let sol = nnls(&a, &b, &free);
    let mut lam = vec![0.0; p.ci.len()];
    for (k, &i) in active.iter().enumerate() {
        lam[i] = sol[me + k];
    }
    (sol[..me].to_vec(), lam)
}

fn polish(
    pr: &Prepared<'_>,
    x0: &[f64],
    y0: &[f64],
    lam0: &[f64],
    active: &[usize],
) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Point)> {
    let n = pr.nlp.n;
    let me = y0.len();
    let ma = active.len();
    if me + ma > n {
        return None;
    }
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut la: Vec<f64> = active.iter().map(|&i| lam0[i]).collect();
    let full = |la: &[f64]| {
        let mut l = vec![0.0; lam0.len()];
        for (k, &i) in active.iter().enumerate() {
            l[i] = la[k];
        }
        l
    };
    let residual = |p: &Point, y: &[f64], la: &[f64]| -> (Vec<f64>, f64) {
        let l = full(la);
        let rd = dual_residual(p, y, &l);
        let mut r = rd.clone();
        let mut err = norm_inf(&rd);
        for i in 0..me {
            r.push(p.ce[i]);
            err = err.max(abs(p.ce[i]) / pr.scale_e[i]);
        }
        for &i in active {
            r.push(p.ci[i]);
            err = err.max(abs(p.ci[i]) / pr.scale_i[i]);
        }
        (r, err)
    };
    let mut p = pr.eval(&x)?;
    let (mut r, mut err) = residual(&p, &y, &la);
    for _ in 0..12 {
        if err <= 1e-16 {
            break;
        }
        let l = full(&la);
        let w = pr.hessian(&x, &y, &l);
        let dim = n + me + ma;
        let mut k = Matrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = w[(i, j)];
            }
        }
        for i in 0..me {
            for j in 0..n {
                k[(n + i, j)] = p.je[(i, j)];
                k[(j, n + i)] = p.je[(i, j)];
            }
        }
        for (a, &i) in active.iter().enumerate() {
            for j in 0..n {
                k[(n + me + a, j)] = p.ji[(i, j)];
                k[(j, n + me + a)] = p.ji[(i, j)];
            }
        }
        let solver = SymmetricSolver::new(k, 1e-13);
        if solver.inertia().zero > 0 {
            return None;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = solver.solve(&rhs);
        if d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let xt: Vec<f64> = (0..n).map(|j| x[j] + d[j]).collect();
        let yt: Vec<f64> = (0..me).map(|i| y[i] + d[n + i]).collect();
        let lt: Vec<f64> = (0..ma).map(|a| la[a] + d[n + me + a]).collect();
        let pt = pr.eval(&xt)?;
        let (rt, et) = residual(&pt, &yt, &lt);
        if !(et < err) {
            break;
        }
        x = xt;
        y = yt;
        la = lt;
        p = pt;
        r = rt;
        err = et;
    }
    if la.iter().any(|v| *v < 0.0) {
        return None;
    }
    Some((x, y, full(&la), p))
}

/// Rows of the constraint set regarded as active at a KKT point: all
/// equalities plus inequalities/bounds with `c_i >= -tol * scale_i`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ActiveSet {
    pub equalities: Vec<usize>,
    pub inequalities: Vec<usize>,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
}

impl ActiveSet {
    pub fn detect(nlp: &NlpInstance, z: &[f64], tol: f64) -> ActiveSet {
        let mut a = ActiveSet {
            equalities: (0..nlp.equalities.len()).collect(),
            ..ActiveSet::default()
        };
        for (i, row) in nlp.inequalities.iter().enumerate() {
            if row.func.value(z) >= -tol * row.scale {
                a.inequalities.push(i);
            }
        }
        for j in 0..nlp.n {
            if z[j] - nlp.lower[j] <= tol {
                a.lower.push(j);
            }
            if nlp.upper[j] - z[j] <= tol {
                a.upper.push(j);
            }
        }
        a
    }

    /// Jacobian rows of the selected constraints at `z`.
    pub fn jacobian(&self, nlp: &NlpInstance, z: &[f64]) -> Matrix {
        let n = nlp.n;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for &i in &self.equalities {
            rows.push(nlp.equalities[i].func.gradient(z));
        }
        for &i in &self.inequalities {
            rows.push(nlp.inequalities[i].func.gradient(z));
        }
        for &j in self.lower.iter().chain(&self.upper) {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push(r);
        }
        if rows.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(&rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: usize, j: usize) -> ScalarFn {
        ScalarFn::variable(n, j)
    }

    #[test]
    fn bound_constrained_quadratic() {
        // min (x-2)^2 + (y+1)^2, 0 <= x <= 1, y >= 0
        let mut q = Matrix::identity(2);
        q[(0, 0)] = 2.0;
        q[(1, 1)] = 2.0;
        let mut nlp = NlpInstance::new("q", 2, ScalarFn::quadratic(q, vec![-4.0, 2.0], 5.0));
        nlp.lower = vec![0.0, 0.0];
        nlp.upper = vec![1.0, f64::INFINITY];
        let k = solve(&nlp, &[0.5, 0.5], &SolverOptions::default()).unwrap();
        assert_eq!(k.status, KktStatus::Converged, "{k:?}");
        assert!((k.z[0] - 1.0).abs() < 1e-12 && k.z[1].abs() < 1e-12);
        assert!((k.mult.upper[0] - 2.0).abs() < 1e-9);
        assert!((k.mult.lower[1] - 2.0).abs() < 1e-9);
        assert_eq!(k.mult.lower[0], 0.0);
    }

    #[test]
    fn equality_and_inequality() {
        // min x + y s.t. x^2 + y^2 - 2 = 0 ... via quadratic row, and x - 0.5 <= 0
        let circle = ScalarFn::quadratic(
            {
                let mut q = Matrix::identity(2);
                q[(0, 0)] = 2.0;
                q[(1, 1)] = 2.0;
                q
            },
            vec![0.0, 0.0],
            -2.0,
        );
        let mut nlp = NlpInstance::new("c", 2, ScalarFn::affine(vec![1.0, 1.0], 0.0));
        nlp.equalities.push(NlpRow::new(circle, 1.0, "circle"));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![1.0, 0.0], -0.5), 1.0, "cap"));
        let k = solve(&nlp, &[0.3, -0.2], &SolverOptions::default()).unwrap();
        assert_eq!(k.status, KktStatus::Converged, "{k:?}");
        assert!((k.z[0] + 1.0).abs() < 1e-10 && (k.z[1] + 1.0).abs() < 1e-10, "{:?}", k.z);
        assert!((k.mult.eq[0] - 0.5).abs() < 1e-9);
        assert_eq!(k.mult.ineq[0], 0.0);
        let r = kkt_residual(&nlp, &k.z, &k.mult).unwrap();
        assert!(r <= 1e-10);
    }

    #[test]
    fn linear_program_through_ipm() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
        let mut nlp = NlpInstance::new("lp", 2, ScalarFn::affine(vec![-1.0, -1.0], 0.0));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![1.0, 2.0], -4.0), 1.0, "a"));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![3.0, 1.0], -6.0), 1.0, "b"));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![-1.0, 0.0], 0.0), 1.0, "x"));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![0.0, -1.0], 0.0), 1.0, "y"));
        let k = solve(&nlp, &[0.0, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(k.status, KktStatus::Converged);
        assert!((k.z[0] - 1.6).abs() < 1e-12 && (k.z[1] - 1.2).abs() < 1e-12);
        assert!(k.polished);
        let _ = var(2, 0);
    }

    #[test]
    fn detects_infeasibility() {
        let mut nlp = NlpInstance::new("inf", 1, ScalarFn::affine(vec![1.0], 0.0));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![1.0], -1.0), 1.0, "le1"));
        nlp.inequalities.push(NlpRow::new(ScalarFn::affine(vec![-1.0], 2.0), 1.0, "ge2"));
        let k = solve(&nlp, &[0.0], &SolverOptions::default()).unwrap();
        assert_ne!(k.status, KktStatus::Converged);
    }

    #[test]
    fn dimension_error() {
        let nlp = NlpInstance::new("d", 2, ScalarFn::affine(vec![1.0, 1.0], 0.0));
        assert_eq!(
            solve(&nlp, &[0.0], &SolverOptions::default()).unwrap_err(),
            NlpError::Dimension { expected: 2, got: 1 }
        );
    }
}
