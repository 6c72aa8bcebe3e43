//! Brute-force checks for desk-scale problems: grid minimization, branch
//! optimality by grid search, and sampled tangent directions.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::float::{abs, powf};
use crate::linalg::{dot, nnls, norm1, norm2, Matrix};
use crate::model::{evaluate, ModelError, MpccProblem};
use crate::nlp::NlpInstance;
use crate::stationarity::{build_lpcc, LpccData, Partition, StationarityError};

pub const MAX_GRID_POINTS: f64 = 1e7;
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid of {points:.3e} points exceeds the {MAX_GRID_POINTS:.0e} limit")]
    TooLarge { points: f64 },
    #[error("oracles are limited to {MAX_DIM} variables, got {0}")]
    TooManyVariables(usize),
    #[error("invalid grid: {0}")]
    BadSpec(&'static str),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stationarity(#[from] StationarityError),
}

/// Box grid with `points` nodes per axis, refined `levels - 1` times around
/// the incumbent.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: usize,
    pub levels: usize,
}

impl GridSpec {
    pub fn cube(n: usize, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lower: vec![lo; n],
            upper: vec![hi; n],
            points,
            levels: 1,
        }
    }

    /// Box `center ± radius`.
    pub fn around(center: &[f64], radius: f64, points: usize) -> Self {
        Self {
            lower: center.iter().map(|c| c - radius).collect(),
            upper: center.iter().map(|c| c + radius).collect(),
            points,
            levels: 1,
        }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn size(&self) -> f64 {
        powf(self.points as f64, self.dim() as f64)
    }

    /// Largest node spacing of the first level.
    pub fn spacing(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) / (self.points - 1) as f64)
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.lower.len() != self.upper.len() {
            return Err(OracleError::BadSpec("bound vectors differ in length"));
        }
        if self.points < 3 {
            return Err(OracleError::BadSpec("need at least 3 points per axis"));
        }
        if self.levels == 0 {
            return Err(OracleError::BadSpec("need at least one level"));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(OracleError::BadSpec("bounds must be finite with lower <= upper"));
        }
        if self.dim() > MAX_DIM {
            return Err(OracleError::TooManyVariables(self.dim()));
        }
        if self.size() > MAX_GRID_POINTS {
            return Err(OracleError::TooLarge { points: self.size() });
        }
        Ok(())
    }
}

/// Something a grid can minimize: an objective plus a feasibility test at a
/// given node spacing.
pub trait GridTarget {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn feasible(&self, z: &[f64], spacing: f64) -> bool;
}

/// Inequalities are enforced exactly (up to rounding); equalities and the
/// complementarity products get the tolerance `2 * spacing`.
const INEQ_SLACK: f64 = 1e-12;

impl GridTarget for MpccProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.f.value(z)
    }

    fn feasible(&self, z: &[f64], spacing: f64) -> bool {
        let Ok(ev) = evaluate(self, z) else { return false };
        let eq = 2.0 * spacing;
        ev.g.iter().all(|g| *g <= INEQ_SLACK)
            && ev.h.iter().all(|h| abs(*h) <= eq)
            && ev
                .comp_g
                .iter()
                .zip(&ev.comp_h)
                .all(|(a, b)| *a >= -INEQ_SLACK && *b >= -INEQ_SLACK && a.min(*b) <= eq)
    }
}

impl GridTarget for NlpInstance {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.objective.value(z)
    }

    fn feasible(&self, z: &[f64], spacing: f64) -> bool {
        let eq = 2.0 * spacing;
        self.inequalities.iter().all(|r| r.func.value(z) <= INEQ_SLACK)
            && self.equalities.iter().all(|r| abs(r.func.value(z)) <= eq)
            && (0..self.n).all(|j| z[j] >= self.lower[j] - INEQ_SLACK && z[j] <= self.upper[j] + INEQ_SLACK)
    }
}

/// Feasible set of the branch program `NLP_(β1,β2)` of an MPCC at a point.
pub struct Branch<'a> {
    pub problem: &'a MpccProblem,
    /// Pairs held at `G = 0, H >= 0` (the rest of `α ∪ β1`).
    pub g_zero: Vec<usize>,
    /// Pairs held at `G >= 0, H = 0` (the rest of `γ ∪ β2`).
    pub h_zero: Vec<usize>,
}

impl Branch<'_> {
    pub fn new<'a>(problem: &'a MpccProblem, lpcc: &LpccData, part: &Partition) -> Branch<'a> {
        let mut g_zero: Vec<usize> = lpcc.sets.alpha.iter().chain(&part.beta1).copied().collect();
        let mut h_zero: Vec<usize> = lpcc.sets.gamma.iter().chain(&part.beta2).copied().collect();
        g_zero.sort_unstable();
        h_zero.sort_unstable();
        Branch { problem, g_zero, h_zero }
    }
}

impl GridTarget for Branch<'_> {
    fn dim(&self) -> usize {
        self.problem.n
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.problem.f.value(z)
    }

    fn feasible(&self, z: &[f64], spacing: f64) -> bool {
        let Ok(ev) = evaluate(self.problem, z) else { return false };
        let eq = 2.0 * spacing;
        let pair_ok = |i: usize| {
            let (a, b) = (ev.comp_g[i], ev.comp_h[i]);
            if self.g_zero.contains(&i) {
                abs(a) <= eq && b >= -INEQ_SLACK
            } else if self.h_zero.contains(&i) {
                a >= -INEQ_SLACK && abs(b) <= eq
            } else {
                a >= -INEQ_SLACK && b >= -INEQ_SLACK && a.min(b) <= eq
            }
        };
        ev.g.iter().all(|g| *g <= INEQ_SLACK) && ev.h.iter().all(|h| abs(*h) <= eq) && (0..ev.comp_g.len()).all(pair_ok)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridLevel {
    pub spacing: f64,
    pub best: Option<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    /// Overall incumbent and its value; `None` if no node was feasible.
    pub best: Option<(Vec<f64>, f64)>,
    pub levels: Vec<GridLevel>,
    pub evaluated: usize,
}

fn scan<T: GridTarget + ?Sized>(t: &T, lower: &[f64], upper: &[f64], points: usize, spacing: f64, count: &mut usize) -> Option<(Vec<f64>, f64)> {
    let n = lower.len();
    let mut idx = vec![0usize; n];
    let mut z = vec![0.0; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let node = |l: f64, u: f64, k: usize| if points == 1 { l } else { l + (u - l) * k as f64 / (points - 1) as f64 };
    loop {
        for j in 0..n {
            z[j] = node(lower[j], upper[j], idx[j]);
        }
        *count += 1;
        if t.feasible(&z, spacing) {
            let v = t.value(&z);
            if v.is_finite() && best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((z.clone(), v));
            }
        }
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            idx[j] += 1;
            if idx[j] < points {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Grid search with refinement: each level rescans the cell box
/// `incumbent ± spacing`, clipped to the original bounds.
pub fn grid_minimize<T: GridTarget + ?Sized>(target: &T, spec: &GridSpec) -> Result<GridResult, OracleError> {
    spec.validate()?;
    if spec.dim() != target.dim() {
        return Err(OracleError::Dimension {
            expected: target.dim(),
            got: spec.dim(),
        });
    }
    let mut lower = spec.lower.clone();
    let mut upper = spec.upper.clone();
    let mut levels = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    for _ in 0..spec.levels {
        let spacing = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| (u - l) / (spec.points - 1) as f64)
            .fold(0.0, f64::max);
        let found = scan(target, &lower, &upper, spec.points, spacing, &mut evaluated);
        levels.push(GridLevel {
            spacing,
            best: found.clone(),
        });
        if let Some((z, v)) = found {
            if best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((z.clone(), v));
            }
            let centre = best.as_ref().map(|b| b.0.clone()).unwrap_or(z);
            for j in 0..lower.len() {
                let h = (upper[j] - lower[j]) / (spec.points - 1) as f64;
                lower[j] = (centre[j] - h).max(spec.lower[j]);
                upper[j] = (centre[j] + h).min(spec.upper[j]);
            }
        } else {
            break;
        }
    }
    Ok(GridResult { best, levels, evaluated })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchVerdict {
    pub is_minimum: bool,
    pub f_at_point: f64,
    /// Lowest branch-feasible grid value and where it was found.
    pub branch_min: Option<(Vec<f64>, f64)>,
    pub grid: GridResult,
}

/// Default branch grid: box `z ± 1`, as many odd points per axis as fit in
/// a `2e5` budget (at most 201), three levels.
pub fn default_branch_grid(z: &[f64]) -> GridSpec {
    let n = z.len().max(1);
    let mut p = (powf(2e5, 1.0 / n as f64) as usize).min(201).max(3);
    if p % 2 == 0 {
        p -= 1;
    }
    GridSpec::around(z, 1.0, p).with_levels(3)
}

/// Does `z` attain the grid minimum of its branch program? At each level
/// the point may exceed the level's minimum by at most
/// `4 * spacing * max(1, |∇f(z)|_1)`, which covers the decrease available
/// from the grid's equality slack.
pub fn verify_branch_minimum_with(problem: &MpccProblem, z: &[f64], part: &Partition, spec: &GridSpec) -> Result<BranchVerdict, OracleError> {
    if problem.n > MAX_DIM {
        return Err(OracleError::TooManyVariables(problem.n));
    }
    let lpcc = build_lpcc(problem, z, 1e-9)?;
    let branch = Branch::new(problem, &lpcc, part);
    let grid = grid_minimize(&branch, spec)?;
    let f0 = problem.f.value(z);
    let lip = 1.0f64.max(norm1(&problem.f.gradient(z)));
    let is_minimum = grid
        .levels
        .iter()
        .all(|l| l.best.as_ref().map_or(true, |(_, v)| f0 <= v + 4.0 * l.spacing * lip));
    Ok(BranchVerdict {
        is_minimum,
        f_at_point: f0,
        branch_min: grid.best.clone(),
        grid,
    })
}

pub fn verify_branch_minimum(problem: &MpccProblem, z: &[f64], part: &Partition) -> Result<bool, OracleError> {
    Ok(verify_branch_minimum_with(problem, z, part, &default_branch_grid(z))?.is_minimum)
}

/// Euclidean projection onto `{d : A_eq d = 0, A_ge d >= 0}` by Moreau
/// decomposition: `x` minus its projection onto the polar cone.
pub fn project_onto_cone(a_eq: &[Vec<f64>], a_ge: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let k = a_eq.len() + a_ge.len();
    if k == 0 {
        return x.to_vec();
    }
    let mut b = Matrix::zeros(n, k);
    for (c, row) in a_eq.iter().enumerate() {
        for j in 0..n {
            b[(j, c)] = row[j];
        }
    }
    for (c, row) in a_ge.iter().enumerate() {
        for j in 0..n {
            b[(j, a_eq.len() + c)] = -row[j];
        }
    }
    let mut free = vec![true; a_eq.len()];
    free.resize(k, false);
    let mut d = x.to_vec();
    // a second pass removes the residue left by the first
    for _ in 0..2 {
        let w = nnls(&b, &d, &free);
        let polar = b.mul_vec(&w);
        for j in 0..n {
            d[j] -= polar[j];
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentSample {
    /// Smallest `∇f^T d` over sampled unit directions (`0` if every cone is
    /// trivial).
    pub worst: f64,
    pub direction: Vec<f64>,
    pub partition: Option<Partition>,
    pub samples: usize,
}

/// Samples Gaussian vectors, projects them onto every branch cone of the
/// LPCC and reports the most negative directional derivative.
pub fn sample_tangent_descent(problem: &MpccProblem, z: &[f64], samples: usize, seed: u64) -> Result<TangentSample, OracleError> {
    if problem.n > MAX_DIM {
        return Err(OracleError::TooManyVariables(problem.n));
    }
    let lpcc = build_lpcc(problem, z, 1e-9)?;
    sample_lpcc(&lpcc, samples, seed)
}

pub fn sample_lpcc(lpcc: &LpccData, samples: usize, seed: u64) -> Result<TangentSample, OracleError> {
    let n = lpcc.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TangentSample {
        worst: 0.0,
        direction: vec![0.0; n],
        partition: None,
        samples: 0,
    };
    let parts = lpcc.partitions();
    let per = (samples / parts.len()).max(1);
    for part in parts {
        let lp = lpcc.branch_lp(&part, &[]);
        for _ in 0..per {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let d = project_onto_cone(&lp.a_eq, &lp.a_ge, &x);
            let norm = norm2(&d);
            out.samples += 1;
            if norm <= 1e-9 * norm2(&x) {
                continue;
            }
            let d: Vec<f64> = d.iter().map(|v| v / norm).collect();
            let slope = dot(&lpcc.grad_f, &d);
            if slope < out.worst {
                out.worst = slope;
                out.direction = d;
                out.partition = Some(part.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::lookup;

    #[test]
    fn guard_rails() {
        let e = lookup("scholtes4").unwrap();
        let spec = GridSpec::cube(3, 0.0, 1.0, 300);
        assert!(matches!(grid_minimize(&*e.problem, &spec), Err(OracleError::TooLarge { .. })));
        let spec = GridSpec::cube(3, 0.0, 1.0, 2);
        assert!(matches!(grid_minimize(&*e.problem, &spec), Err(OracleError::BadSpec(_))));
        let spec = GridSpec::cube(9, 0.0, 1.0, 3);
        assert!(matches!(grid_minimize(&*e.problem, &spec), Err(OracleError::TooManyVariables(9))));
    }

    #[test]
    fn corner_grid_minimum() {
        let e = lookup("scholtes4").unwrap();
        let r = grid_minimize(&*e.problem, &GridSpec::cube(3, 0.0, 2.0, 101)).unwrap();
        let (z, v) = r.best.unwrap();
        // the complementarity slack 2h lets the grid dip to about -4h
        let h = 0.02;
        assert!(v.abs() <= 5.0 * h && z.iter().all(|c| c.abs() <= 10.0 * h), "{z:?} {v}");
        assert_eq!(r.evaluated, 101 * 101 * 101);
    }

    #[test]
    fn mstat_grid_and_branches() {
        let e = lookup("mstat_counterexample").unwrap();
        let r = grid_minimize(&*e.problem, &GridSpec::cube(2, 0.0, 2.0, 201)).unwrap();
        let (z, v) = r.best.unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && z[1].abs() < 1e-9 && v.abs() < 1e-12);
        let origin = [0.0, 0.0];
        let lp = build_lpcc(&e.problem, &origin, 1e-9).unwrap();
        let parts = lp.partitions();
        assert!(verify_branch_minimum(&e.problem, &origin, &parts[0]).unwrap());
        let v = verify_branch_minimum_with(&e.problem, &origin, &parts[1], &default_branch_grid(&origin)).unwrap();
        assert!(!v.is_minimum);
        let (at, _) = v.branch_min.unwrap();
        assert!((at[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn refinement_shrinks_spacing() {
        let e = lookup("mstat_counterexample").unwrap();
        let r = grid_minimize(&*e.problem, &GridSpec::cube(2, 0.0, 2.0, 5).with_levels(4)).unwrap();
        let s: Vec<f64> = r.levels.iter().map(|l| l.spacing).collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn projection_lands_in_cone() {
        // d1 >= 0, d3 <= d2 (as d2 - d3 >= 0), d1 + d2 + d3 = 0
        let eq = vec![vec![1.0, 1.0, 1.0]];
        let ge = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, -1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let d = project_onto_cone(&eq, &ge, &x);
            assert!(dot(&eq[0], &d).abs() < 1e-12);
            assert!(ge.iter().all(|g| dot(g, &d) >= -1e-12));
            // optimality: x - d lies in the polar, so (x - d) . d = 0
            let r: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
            assert!(dot(&r, &d).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_signs() {
        let e = lookup("scholtes4").unwrap();
        let s = sample_tangent_descent(&e.problem, &[0.0; 3], 10_000, 1).unwrap();
        assert!(s.worst >= -1e-12);
        let e = lookup("mstat_counterexample").unwrap();
        let s = sample_tangent_descent(&e.problem, &[0.0, 0.0], 2000, 1).unwrap();
        assert!((s.worst + 2.0).abs() < 1e-9);
        assert!((s.direction[0] - 1.0).abs() < 1e-9);
        let s = sample_tangent_descent(&e.problem, &[1.0, 0.0], 100, 1).unwrap();
        assert_eq!(s.worst, 0.0);
    }
}
