//! Stationarity audit of a feasible MPCC point.
//!
//! Multiplier classes are decided by linear programs over the weak
//! stationarity system
//!
//! ```text
//! 0 = ∇f + ∇g_I λ^g + ∇h λ^h - ∇G_{α∪β} λ^G - ∇H_{γ∪β} λ^H,   λ^g >= 0
//! ```
//!
//! with sign restrictions on the biactive pairs. Disjunctive classes (C, M,
//! A) are handled by enumerating sign patterns pair by pair; every query
//! returns the witness of least l1 norm, ties going to the earlier pattern.
//!
//! B-stationarity is decided on the linearized program (LPCC) through its
//! `2^|β|` branch LPs, each checked for optimality of `d = 0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bounding::SolveTrace;
use crate::float::abs;
use crate::linalg::{norm_inf, rank, Matrix};
use crate::lp::{origin_is_optimal, solve_lp, LpError, LpInstance, LpOutcome, OriginCertificate};
use crate::model::{
    active_index_sets, block_jacobian, default_activity_tol, evaluate, feasibility_of, lagrangian_gradient, Block, IndexSets,
    ModelError, MpccMultipliers, MpccProblem,
};

/// Caveat attached to every report.
pub const CQ_CAVEAT: &str = "piecewise M-stationarity implies B-stationarity unconditionally; \
the converse and the LPCC refutation of B-stationarity hold only under MPCC-ACQ, which is not verified";

#[derive(Clone, Debug, Error, PartialEq)]
pub enum StationarityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("point is infeasible (residual {residual:.3e} > {tol:.3e})")]
    Infeasible { residual: f64, tol: f64 },
    #[error("multipliers do not satisfy weak stationarity (residual {residual:.3e} > {tol:.3e})")]
    Classification { residual: f64, tol: f64 },
    #[error("omega index {0} is not biactive")]
    OmegaNotBiactive(usize),
    #[error("trace has no limit point")]
    NoLimit,
}

/// Stationarity classes, weakest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Weak,
    A,
    C,
    M,
    S,
}

impl Class {
    pub const ALL: [Class; 5] = [Class::Weak, Class::A, Class::C, Class::M, Class::S];

    pub fn name(self) -> &'static str {
        match self {
            Class::Weak => "weak",
            Class::A => "A",
            Class::C => "C",
            Class::M => "M",
            Class::S => "S",
        }
    }

    /// Admissible sign patterns for one biactive pair.
    fn patterns(self) -> &'static [PairSign] {
        use PairSign::*;
        match self {
            Class::Weak => &[Free],
            Class::A => &[GNonneg, HNonneg],
            Class::C => &[BothNonneg, BothNonpos],
            Class::M => &[BothNonneg, HZero, GZero],
            Class::S => &[BothNonneg],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairSign {
    Free,
    GNonneg,
    HNonneg,
    BothNonneg,
    BothNonpos,
    HZero,
    GZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sign {
    Free,
    Nonneg,
    Nonpos,
    Zero,
}

impl PairSign {
    fn split(self) -> (Sign, Sign) {
        match self {
            PairSign::Free => (Sign::Free, Sign::Free),
            PairSign::GNonneg => (Sign::Nonneg, Sign::Free),
            PairSign::HNonneg => (Sign::Free, Sign::Nonneg),
            PairSign::BothNonneg => (Sign::Nonneg, Sign::Nonneg),
            PairSign::BothNonpos => (Sign::Nonpos, Sign::Nonpos),
            PairSign::HZero => (Sign::Free, Sign::Zero),
            PairSign::GZero => (Sign::Zero, Sign::Free),
        }
    }
}

fn meet(a: Sign, b: Sign) -> Option<Sign> {
    use Sign::*;
    Some(match (a, b) {
        (Free, s) | (s, Free) => s,
        (Zero, _) | (_, Zero) => Zero,
        (Nonneg, Nonneg) => Nonneg,
        (Nonpos, Nonpos) => Nonpos,
        (Nonneg, Nonpos) | (Nonpos, Nonneg) => Zero,
    })
}

/// Gradients of the active constraints at `z`, grouped as in the LPCC.
#[derive(Clone, Debug)]
pub struct LpccData {
    pub z: Vec<f64>,
    pub grad_f: Vec<f64>,
    /// Rows `∇g_i^T` for `i ∈ I_g` (same order as `sets.active_g`).
    pub g_active: Matrix,
    pub h: Matrix,
    pub g_alpha: Matrix,
    pub h_gamma: Matrix,
    pub g_beta: Matrix,
    pub h_beta: Matrix,
    pub sets: IndexSets,
}

fn rows_of(full: &Matrix, idx: &[usize], n: usize) -> Matrix {
    let mut m = Matrix::zeros(idx.len(), n);
    for (r, &i) in idx.iter().enumerate() {
        m.row_mut(r).copy_from_slice(full.row(i));
    }
    m
}

/// Split of `β` into `(β1, β2)`: `β1` pairs fix `G = 0` and keep `H >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub beta1: Vec<usize>,
    pub beta2: Vec<usize>,
}

impl Partition {
    pub fn contains1(&self, i: usize) -> bool {
        self.beta1.contains(&i)
    }
}

impl core::fmt::Display for Partition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let set = |v: &[usize]| {
            if v.is_empty() {
                String::from("∅")
            } else {
                let inner: Vec<String> = v.iter().map(|i| format!("{}", i + 1)).collect();
                format!("{{{}}}", inner.join(","))
            }
        };
        write!(f, "({},{})", set(&self.beta1), set(&self.beta2))
    }
}

impl LpccData {
    pub fn n(&self) -> usize {
        self.grad_f.len()
    }

    pub fn branch_count(&self) -> usize {
        1usize << self.sets.beta.len()
    }

    /// Branch `k`: bit `j` of `k` set puts `β[j]` into `β2`.
    pub fn partition(&self, k: usize) -> Partition {
        let mut p = Partition {
            beta1: Vec::new(),
            beta2: Vec::new(),
        };
        for (j, &i) in self.sets.beta.iter().enumerate() {
            if k >> j & 1 == 1 {
                p.beta2.push(i);
            } else {
                p.beta1.push(i);
            }
        }
        p
    }

    pub fn partitions(&self) -> Vec<Partition> {
        (0..self.branch_count()).map(|k| self.partition(k)).collect()
    }

    /// The branch program `min ∇f^T d` over `T^lin_(β1,β2)`, with the
    /// inequality rows of pairs in `omega` dropped.
    pub fn branch_lp(&self, part: &Partition, omega: &[usize]) -> LpInstance {
        let n = self.n();
        let mut lp = LpInstance::new(self.grad_f.clone());
        for r in 0..self.g_active.rows() {
            lp.push_ge(self.g_active.row(r).iter().map(|v| -v).collect(), 0.0);
        }
        for m in [&self.h, &self.g_alpha, &self.h_gamma] {
            for r in 0..m.rows() {
                lp.push_eq(m.row(r).to_vec(), 0.0);
            }
        }
        for (j, &i) in self.sets.beta.iter().enumerate() {
            let (g, h) = (self.g_beta.row(j).to_vec(), self.h_beta.row(j).to_vec());
            let dropped = omega.contains(&i);
            if part.contains1(i) {
                lp.push_eq(g, 0.0);
                if !dropped {
                    lp.push_ge(h, 0.0);
                }
            } else {
                if !dropped {
                    lp.push_ge(g, 0.0);
                }
                lp.push_eq(h, 0.0);
            }
        }
        debug_assert!(lp.a_ge.iter().chain(&lp.a_eq).all(|r| r.len() == n));
        lp
    }
}

fn activity_tol(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<f64, ModelError> {
    Ok(default_activity_tol(&evaluate(problem, z)?).max(tol))
}

fn feasible_sets(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<IndexSets, StationarityError> {
    let act = activity_tol(problem, z, tol)?;
    let ev = evaluate(problem, z)?;
    let residual = feasibility_of(&ev);
    if residual > act {
        return Err(StationarityError::Infeasible { residual, tol: act });
    }
    Ok(active_index_sets(problem, z, Some(act))?)
}

pub fn build_lpcc(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<LpccData, StationarityError> {
    let sets = feasible_sets(problem, z, tol)?;
    let n = problem.n;
    let jg = block_jacobian(problem, Block::Ineq, z);
    let jh = block_jacobian(problem, Block::Eq, z);
    let jcg = block_jacobian(problem, Block::CompG, z);
    let jch = block_jacobian(problem, Block::CompH, z);
    Ok(LpccData {
        z: z.to_vec(),
        grad_f: problem.f.gradient(z),
        g_active: rows_of(&jg, &sets.active_g, n),
        h: jh,
        g_alpha: rows_of(&jcg, &sets.alpha, n),
        h_gamma: rows_of(&jch, &sets.gamma, n),
        g_beta: rows_of(&jcg, &sets.beta, n),
        h_beta: rows_of(&jch, &sets.beta, n),
        sets,
    })
}

/// Which multiplier a column of the weak-stationarity system belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Col {
    G(usize),
    H(usize),
    CompG(usize),
    CompH(usize),
}

struct WeakSystem {
    cols: Vec<Col>,
    /// Column `k` holds the coefficient vector of multiplier `cols[k]`.
    a: Matrix,
    grad_f: Vec<f64>,
    sets: IndexSets,
    ng: usize,
    nh: usize,
}

impl WeakSystem {
    fn new(d: &LpccData, ng: usize) -> Self {
        let n = d.n();
        let mut cols = Vec::new();
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for (r, &i) in d.sets.active_g.iter().enumerate() {
            cols.push(Col::G(i));
            vecs.push(d.g_active.row(r).to_vec());
        }
        for r in 0..d.h.rows() {
            cols.push(Col::H(r));
            vecs.push(d.h.row(r).to_vec());
        }
        let mut comp_g: Vec<(usize, Vec<f64>)> = Vec::new();
        for (r, &i) in d.sets.alpha.iter().enumerate() {
            comp_g.push((i, d.g_alpha.row(r).iter().map(|v| -v).collect()));
        }
        for (r, &i) in d.sets.beta.iter().enumerate() {
            comp_g.push((i, d.g_beta.row(r).iter().map(|v| -v).collect()));
        }
        comp_g.sort_by_key(|c| c.0);
        let mut comp_h: Vec<(usize, Vec<f64>)> = Vec::new();
        for (r, &i) in d.sets.gamma.iter().enumerate() {
            comp_h.push((i, d.h_gamma.row(r).iter().map(|v| -v).collect()));
        }
        for (r, &i) in d.sets.beta.iter().enumerate() {
            comp_h.push((i, d.h_beta.row(r).iter().map(|v| -v).collect()));
        }
        comp_h.sort_by_key(|c| c.0);
        for (i, v) in comp_g {
            cols.push(Col::CompG(i));
            vecs.push(v);
        }
        for (i, v) in comp_h {
            cols.push(Col::CompH(i));
            vecs.push(v);
        }
        let mut a = Matrix::zeros(n, cols.len());
        for (k, v) in vecs.iter().enumerate() {
            for j in 0..n {
                a[(j, k)] = v[j];
            }
        }
        WeakSystem {
            cols,
            a,
            grad_f: d.grad_f.clone(),
            sets: d.sets.clone(),
            ng,
            nh: d.h.rows(),
        }
    }

    fn nullspace_dim(&self) -> usize {
        self.cols.len() - rank(&self.a, 1e-10)
    }

    /// Least-l1 multipliers under per-column sign restrictions, or `None`.
    fn solve(&self, signs: &[Sign], tol: f64) -> Result<Option<(f64, MpccMultipliers)>, LpError> {
        let n = self.grad_f.len();
        let k = self.cols.len();
        // variables: for each column a `+` and a `-` part, then residual r+ / r-
        let nv = 2 * k + 2 * n;
        let mut c = vec![0.0; nv];
        c[..2 * k].iter_mut().for_each(|v| *v = 1.0);
        c[2 * k..].iter_mut().for_each(|v| *v = 1e6);
        let mut lp = LpInstance::new(c);
        let delta = tol * 1.0f64.max(norm_inf(&self.grad_f));
        for j in 0..n {
            let mut row = vec![0.0; nv];
            for col in 0..k {
                row[2 * col] = self.a[(j, col)];
                row[2 * col + 1] = -self.a[(j, col)];
            }
            row[2 * k + j] = -1.0;
            row[2 * k + n + j] = 1.0;
            lp.push_eq(row, -self.grad_f[j]);
        }
        for v in 0..nv {
            let mut row = vec![0.0; nv];
            row[v] = 1.0;
            lp.push_ge(row.clone(), 0.0);
            if v >= 2 * k {
                row[v] = -1.0;
                lp.push_ge(row, -delta);
            }
        }
        for (col, s) in signs.iter().enumerate() {
            let fix = |lp: &mut LpInstance, v: usize| {
                let mut row = vec![0.0; nv];
                row[v] = 1.0;
                lp.push_eq(row, 0.0);
            };
            match s {
                Sign::Free => {}
                Sign::Nonneg => fix(&mut lp, 2 * col + 1),
                Sign::Nonpos => fix(&mut lp, 2 * col),
                Sign::Zero => {
                    fix(&mut lp, 2 * col);
                    fix(&mut lp, 2 * col + 1);
                }
            }
        }
        match solve_lp(&lp)? {
            LpOutcome::Optimal(s) => {
                let vals: Vec<f64> = (0..k).map(|col| s.x[2 * col] - s.x[2 * col + 1]).collect();
                Ok(Some((s.objective, self.multipliers(&vals))))
            }
            _ => Ok(None),
        }
    }

    fn multipliers(&self, vals: &[f64]) -> MpccMultipliers {
        let mut m = MpccMultipliers {
            lambda_g: vec![0.0; self.ng],
            lambda_h: vec![0.0; self.nh],
            lambda_comp_g: BTreeMap::new(),
            lambda_comp_h: BTreeMap::new(),
        };
        for (col, &v) in self.cols.iter().zip(vals) {
            let v = if v == 0.0 { 0.0 } else { v };
            match *col {
                Col::G(i) => m.lambda_g[i] = v,
                Col::H(i) => m.lambda_h[i] = v,
                Col::CompG(i) => {
                    m.lambda_comp_g.insert(i, v);
                }
                Col::CompH(i) => {
                    m.lambda_comp_h.insert(i, v);
                }
            }
        }
        m
    }

    /// Base signs: `λ^g >= 0`, everything else free.
    fn base_signs(&self) -> Vec<Sign> {
        self.cols
            .iter()
            .map(|c| if matches!(c, Col::G(_)) { Sign::Nonneg } else { Sign::Free })
            .collect()
    }

    fn col_of(&self, c: Col) -> usize {
        self.cols.iter().position(|x| *x == c).expect("biactive column")
    }

    /// Least-l1 witness over all per-pair pattern combinations, where
    /// `choices(i)` lists the admissible patterns of biactive pair `i`.
    fn search(&self, extra: &[(usize, Sign, Sign)], choices: &dyn Fn(usize) -> Vec<PairSign>, tol: f64) -> Result<Option<MpccMultipliers>, LpError> {
        let beta = self.sets.beta.clone();
        let lists: Vec<Vec<PairSign>> = beta.iter().map(|&i| choices(i)).collect();
        let total: usize = lists.iter().map(|l| l.len()).product();
        let mut best: Option<(f64, MpccMultipliers)> = None;
        for mut code in 0..total {
            let mut signs = self.base_signs();
            let mut ok = true;
            for &(i, sg, sh) in extra {
                let (cg, ch) = (self.col_of(Col::CompG(i)), self.col_of(Col::CompH(i)));
                signs[cg] = meet(signs[cg], sg).unwrap_or(Sign::Zero);
                signs[ch] = meet(signs[ch], sh).unwrap_or(Sign::Zero);
            }
            for (j, &i) in beta.iter().enumerate() {
                let pat = lists[j][code % lists[j].len()];
                code /= lists[j].len();
                let (sg, sh) = pat.split();
                let (cg, ch) = (self.col_of(Col::CompG(i)), self.col_of(Col::CompH(i)));
                match (meet(signs[cg], sg), meet(signs[ch], sh)) {
                    (Some(a), Some(b)) => {
                        signs[cg] = a;
                        signs[ch] = b;
                    }
                    _ => ok = false,
                }
            }
            if !ok {
                continue;
            }
            if let Some((obj, m)) = self.solve(&signs, tol)? {
                if best.as_ref().map_or(true, |b| obj < b.0 - 1e-12 * (1.0 + b.0)) {
                    best = Some((obj, m));
                }
            }
        }
        Ok(best.map(|b| b.1))
    }
}

#[derive(Clone, Debug)]
pub struct WeakMultipliers {
    pub exists: bool,
    pub least_norm: Option<MpccMultipliers>,
    /// Dimension of the affine family of weak multipliers (ignoring signs).
    pub nullspace_dim: usize,
}

pub fn find_weak_multipliers(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<WeakMultipliers, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    let sys = WeakSystem::new(&d, problem.g.len());
    let least_norm = sys.search(&[], &|_| vec![PairSign::Free], tol)?;
    Ok(WeakMultipliers {
        exists: least_norm.is_some(),
        least_norm,
        nullspace_dim: sys.nullspace_dim(),
    })
}

/// Class membership flags for one multiplier vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ClassFlags {
    pub weak: bool,
    pub a: bool,
    pub c: bool,
    pub m: bool,
    pub s: bool,
}

impl ClassFlags {
    pub fn get(&self, c: Class) -> bool {
        match c {
            Class::Weak => self.weak,
            Class::A => self.a,
            Class::C => self.c,
            Class::M => self.m,
            Class::S => self.s,
        }
    }

    /// `S ⇒ M ⇒ C ∧ A`, `C ∨ A ⇒ weak`.
    pub fn consistent(&self) -> bool {
        (!self.s || self.m) && (!self.m || (self.c && self.a)) && (!(self.c || self.a) || self.weak)
    }
}

/// Sign tests on the biactive multipliers of a given weak-stationary
/// multiplier vector. Values within `tol` of zero count as zero.
pub fn classify(problem: &MpccProblem, z: &[f64], mult: &MpccMultipliers, tol: f64) -> Result<ClassFlags, StationarityError> {
    let sets = feasible_sets(problem, z, tol)?;
    let grad_f = problem.f.gradient(z);
    let scale = 1.0f64.max(norm_inf(&grad_f));
    let mut residual = norm_inf(&lagrangian_gradient(problem, z, mult)) / scale;
    for (i, &l) in mult.lambda_g.iter().enumerate() {
        if sets.active_g.contains(&i) {
            residual = residual.max(-l);
        } else {
            residual = residual.max(abs(l));
        }
    }
    for (&i, &l) in &mult.lambda_comp_g {
        if !sets.alpha.contains(&i) && !sets.beta.contains(&i) {
            residual = residual.max(abs(l));
        }
    }
    for (&i, &l) in &mult.lambda_comp_h {
        if !sets.gamma.contains(&i) && !sets.beta.contains(&i) {
            residual = residual.max(abs(l));
        }
    }
    if residual > tol {
        return Err(StationarityError::Classification { residual, tol });
    }
    let sgn = |v: f64| if abs(v) <= tol { 0 } else if v > 0.0 { 1 } else { -1 };
    let mut f = ClassFlags {
        weak: true,
        a: true,
        c: true,
        m: true,
        s: true,
    };
    for &i in &sets.beta {
        let (g, h) = (sgn(mult.comp_g(i)), sgn(mult.comp_h(i)));
        let both = g >= 0 && h >= 0;
        f.s &= both;
        f.m &= both || g == 0 || h == 0;
        f.c &= g * h >= 0;
        f.a &= g >= 0 || h >= 0;
    }
    Ok(f)
}

#[derive(Clone, Debug)]
pub struct ClassResult {
    pub holds: bool,
    /// Least-l1 witness when the class is attained.
    pub witness: Option<MpccMultipliers>,
}

/// Is the point stationary of class `class` for some multipliers?
pub fn class_exists(problem: &MpccProblem, z: &[f64], class: Class, tol: f64) -> Result<ClassResult, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    class_exists_in(&WeakSystem::new(&d, problem.g.len()), class, tol)
}

fn class_exists_in(sys: &WeakSystem, class: Class, tol: f64) -> Result<ClassResult, StationarityError> {
    let witness = sys.search(&[], &|_| class.patterns().to_vec(), tol)?;
    Ok(ClassResult {
        holds: witness.is_some(),
        witness,
    })
}

/// `λ^G = ζθ`, `λ^H = ζ(1-θ)` for one biactive pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaForm {
    pub index: usize,
    pub zeta: f64,
    pub theta: f64,
}

/// Convex-combination form of an M-type pair; `None` if the pair has
/// opposite-signed nonzero multipliers.
pub fn theta_form(index: usize, lg: f64, lh: f64) -> Option<ThetaForm> {
    let zeta = lg + lh;
    let theta = if lg >= 0.0 && lh >= 0.0 {
        if zeta > 0.0 {
            lg / zeta
        } else {
            1.0
        }
    } else if lh == 0.0 {
        1.0
    } else if lg == 0.0 {
        0.0
    } else {
        return None;
    };
    Some(ThetaForm { index, zeta, theta })
}

#[derive(Clone, Debug)]
pub struct PartitionResult {
    pub partition: Partition,
    /// KKT multipliers of the branch program exist.
    pub kkt_exists: bool,
    /// Branch KKT multipliers that also satisfy the M restriction.
    pub witness: Option<MpccMultipliers>,
    pub theta: Vec<ThetaForm>,
    /// Active inequalities with vanishing gradient, a sign that the
    /// linearization of the branch may not describe its tangent cone.
    pub zero_gradient_rows: Vec<usize>,
}

impl PartitionResult {
    pub fn holds(&self) -> bool {
        self.witness.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct PiecewiseM {
    pub holds: bool,
    pub partitions: Vec<PartitionResult>,
}

impl PiecewiseM {
    pub fn failing(&self) -> Option<&PartitionResult> {
        self.partitions.iter().find(|p| !p.holds())
    }
}

fn zero_gradient_rows(d: &LpccData) -> Vec<usize> {
    let scale = 1.0f64.max(norm_inf(&d.grad_f));
    d.sets
        .active_g
        .iter()
        .enumerate()
        .filter(|(r, _)| norm_inf(d.g_active.row(*r)) <= 1e-12 * scale)
        .map(|(_, &i)| i)
        .collect()
}

pub fn check_piecewise_m(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<PiecewiseM, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    let sys = WeakSystem::new(&d, problem.g.len());
    piecewise_m_in(&d, &sys, tol)
}

fn piecewise_m_in(d: &LpccData, sys: &WeakSystem, tol: f64) -> Result<PiecewiseM, StationarityError> {
    let zero_rows = zero_gradient_rows(d);
    let mut partitions = Vec::new();
    for part in d.partitions() {
        let branch: Vec<(usize, Sign, Sign)> = d
            .sets
            .beta
            .iter()
            .map(|&i| {
                if part.contains1(i) {
                    (i, Sign::Free, Sign::Nonneg)
                } else {
                    (i, Sign::Nonneg, Sign::Free)
                }
            })
            .collect();
        let kkt = sys.search(&branch, &|_| vec![PairSign::Free], tol)?;
        let witness = if kkt.is_some() {
            sys.search(&branch, &|_| Class::M.patterns().to_vec(), tol)?
        } else {
            None
        };
        let theta = witness
            .as_ref()
            .map(|w| {
                d.sets
                    .beta
                    .iter()
                    .filter_map(|&i| theta_form(i, w.comp_g(i), w.comp_h(i)))
                    .collect()
            })
            .unwrap_or_default();
        partitions.push(PartitionResult {
            partition: part,
            kkt_exists: kkt.is_some(),
            witness,
            theta,
            zero_gradient_rows: zero_rows.clone(),
        });
    }
    Ok(PiecewiseM {
        holds: partitions.iter().all(|p| p.holds()),
        partitions,
    })
}

#[derive(Clone, Debug)]
pub struct BranchResult {
    pub partition: Partition,
    pub origin_optimal: bool,
    /// Descent direction in `[-1, 1]^n` and its slope `∇f^T d < 0`.
    pub descent: Option<(Vec<f64>, f64)>,
    pub inequality_rows: usize,
    pub equality_rows: usize,
}

#[derive(Clone, Debug)]
pub struct LpccCheck {
    pub b_stationary: bool,
    pub branches: Vec<BranchResult>,
    pub omega: Vec<usize>,
}

impl LpccCheck {
    pub fn failing(&self) -> Option<&BranchResult> {
        self.branches.iter().find(|b| !b.origin_optimal)
    }
}

fn lpcc_check_in(d: &LpccData, omega: &[usize]) -> Result<LpccCheck, StationarityError> {
    let mut branches = Vec::new();
    for part in d.partitions() {
        let lp = d.branch_lp(&part, omega);
        let chk = origin_is_optimal(&lp)?;
        let descent = match chk.certificate {
            OriginCertificate::Descent { direction, slope } if !chk.optimal => Some((direction, slope)),
            _ => None,
        };
        branches.push(BranchResult {
            partition: part,
            origin_optimal: chk.optimal,
            descent,
            inequality_rows: lp.a_ge.len(),
            equality_rows: lp.a_eq.len(),
        });
    }
    Ok(LpccCheck {
        b_stationary: branches.iter().all(|b| b.origin_optimal),
        branches,
        omega: omega.to_vec(),
    })
}

pub fn check_b_via_lpcc(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<LpccCheck, StationarityError> {
    lpcc_check_in(&build_lpcc(problem, z, tol)?, &[])
}

/// Branch check with the inequality rows of `omega` removed.
pub fn check_b_reduced(problem: &MpccProblem, z: &[f64], omega: &[usize], tol: f64) -> Result<LpccCheck, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    if let Some(&i) = omega.iter().find(|i| !d.sets.beta.contains(i)) {
        return Err(StationarityError::OmegaNotBiactive(i));
    }
    lpcc_check_in(&d, omega)
}

/// Biactive pairs whose limiting smoothing multiplier is negative.
/// Empty for the product regularization.
pub fn detect_omega(trace: &SolveTrace, tol: f64) -> Result<Vec<usize>, StationarityError> {
    let limit = trace.limit.as_ref().ok_or(StationarityError::NoLimit)?;
    let Some(u) = trace.last().and_then(|r| r.inner.u_phi()) else {
        return Ok(Vec::new());
    };
    Ok(limit.sets.beta.iter().copied().filter(|&i| u[i] < -tol).collect())
}

/// Numerical rank of the stacked active gradients
/// `{g_I, h, G_{α∪β}, H_{γ∪β}}` against their row count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LicqDiagnostic {
    pub rank: usize,
    pub rows: usize,
}

impl LicqDiagnostic {
    pub fn holds(&self) -> bool {
        self.rank == self.rows
    }
}

pub fn mpcc_licq_diagnostic(problem: &MpccProblem, z: &[f64], tol: f64) -> Result<LicqDiagnostic, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    Ok(licq_in(&d))
}

fn licq_in(d: &LpccData) -> LicqDiagnostic {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for m in [&d.g_active, &d.h, &d.g_alpha, &d.g_beta, &d.h_gamma, &d.h_beta] {
        for r in 0..m.rows() {
            rows.push(m.row(r).to_vec());
        }
    }
    let count = rows.len();
    if count == 0 {
        return LicqDiagnostic { rank: 0, rows: 0 };
    }
    // rank of the transpose: one column per gradient
    let a = Matrix::from_rows(&rows).transpose();
    LicqDiagnostic {
        rank: rank(&a, 1e-8),
        rows: count,
    }
}

#[derive(Clone, Debug)]
pub struct StationarityReport {
    pub weak: ClassResult,
    pub a: ClassResult,
    pub c: ClassResult,
    pub m: ClassResult,
    pub s: ClassResult,
    pub nullspace_dim: usize,
    pub piecewise_m: PiecewiseM,
    pub b_via_lpcc: LpccCheck,
    /// Present when an `omega` was supplied to [`audit`].
    pub b_reduced: Option<LpccCheck>,
    pub licq: LicqDiagnostic,
    pub sets: IndexSets,
    pub caveat: &'static str,
}

impl StationarityReport {
    pub fn flags(&self) -> ClassFlags {
        ClassFlags {
            weak: self.weak.holds,
            a: self.a.holds,
            c: self.c.holds,
            m: self.m.holds,
            s: self.s.holds,
        }
    }

    pub fn class(&self, c: Class) -> &ClassResult {
        match c {
            Class::Weak => &self.weak,
            Class::A => &self.a,
            Class::C => &self.c,
            Class::M => &self.m,
            Class::S => &self.s,
        }
    }

    /// Strongest class attained.
    pub fn strongest(&self) -> Option<Class> {
        Class::ALL.iter().rev().copied().find(|c| self.class(*c).holds)
    }

    /// Flag implications, including piecewise-M ⇒ B.
    pub fn consistent(&self) -> bool {
        self.flags().consistent() && (!self.piecewise_m.holds || self.b_via_lpcc.b_stationary)
    }
}

/// Full audit: class existence, piecewise M, LPCC branches and the LICQ rank.
pub fn audit(problem: &MpccProblem, z: &[f64], omega: Option<&[usize]>, tol: f64) -> Result<StationarityReport, StationarityError> {
    let d = build_lpcc(problem, z, tol)?;
    let sys = WeakSystem::new(&d, problem.g.len());
    let b_reduced = match omega {
        Some(om) => {
            if let Some(&i) = om.iter().find(|i| !d.sets.beta.contains(i)) {
                return Err(StationarityError::OmegaNotBiactive(i));
            }
            Some(lpcc_check_in(&d, om)?)
        }
        None => None,
    };
    Ok(StationarityReport {
        weak: class_exists_in(&sys, Class::Weak, tol)?,
        a: class_exists_in(&sys, Class::A, tol)?,
        c: class_exists_in(&sys, Class::C, tol)?,
        m: class_exists_in(&sys, Class::M, tol)?,
        s: class_exists_in(&sys, Class::S, tol)?,
        nullspace_dim: sys.nullspace_dim(),
        piecewise_m: piecewise_m_in(&d, &sys, tol)?,
        b_via_lpcc: lpcc_check_in(&d, &[])?,
        b_reduced,
        licq: licq_in(&d),
        sets: d.sets,
        caveat: CQ_CAVEAT,
    })
}
