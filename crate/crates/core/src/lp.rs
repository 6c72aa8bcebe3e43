//! Dense two-phase simplex for small LPs with free variables:
//!
//! ```text
//! min c^T x   s.t.  A_eq x = b_eq,  A_ge x >= b_ge
//! ```
//!
//! Bland's rule is used for both entering and leaving choices, so the method
//! terminates on degenerate problems (which LPCC branch programs always are).

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::float::abs;
use crate::linalg::{dot, norm_inf};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LpInstance {
    pub n: usize,
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ge: Vec<Vec<f64>>,
    pub b_ge: Vec<f64>,
}

impl LpInstance {
    pub fn new(c: Vec<f64>) -> Self {
        Self {
            n: c.len(),
            c,
            ..Self::default()
        }
    }

    pub fn push_eq(&mut self, a: Vec<f64>, b: f64) {
        self.a_eq.push(a);
        self.b_eq.push(b);
    }

    pub fn push_ge(&mut self, a: Vec<f64>, b: f64) {
        self.a_ge.push(a);
        self.b_ge.push(b);
    }

    fn validate(&self) -> Result<(), LpError> {
        let bad = self.c.len() != self.n
            || self.a_eq.len() != self.b_eq.len()
            || self.a_ge.len() != self.b_ge.len()
            || self.a_eq.iter().chain(&self.a_ge).any(|r| r.len() != self.n);
        if bad {
            return Err(LpError::Shape);
        }
        if self
            .c
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_ge.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ge.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(LpError::NonFinite);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("inconsistent LP dimensions")]
    Shape,
    #[error("non-finite LP data")]
    NonFinite,
    #[error("right-hand side must be zero for a cone program")]
    NonHomogeneous,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers with `c = A_eq^T dual_eq + A_ge^T dual_ge`, `dual_ge >= 0`.
    pub dual_eq: Vec<f64>,
    pub dual_ge: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    /// Feasible with a recession direction `ray` along which `c^T ray < 0`.
    Unbounded { ray: Vec<f64> },
}

const PIVOT_TOL: f64 = 1e-9;

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * self.t[r * w + j];
                }
                self.t[i * w + c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for j in 0..w {
                self.cost[j] -= f * self.t[r * w + j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations over columns `< allowed`. Returns the
    /// entering column of an unbounded direction, if any.
    fn iterate(&mut self, allowed: usize) -> Result<Option<usize>, LpError> {
        for _ in 0..50_000 {
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_TOL) else {
                return Ok(None);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = abs(ratio - lratio) <= 1e-12 * 1.0f64.max(abs(lratio));
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Some(enter)),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Err(LpError::IterationLimit)
    }
}

pub fn solve_lp(lp: &LpInstance) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.n;
    let (me, mg) = (lp.a_eq.len(), lp.a_ge.len());
    let m = me + mg;
    let n_std = 2 * n + mg;
    let width = n_std + m + 1;
    let mut t = vec![0.0; m * width];
    let mut sign = vec![1.0; m];
    for r in 0..m {
        let (a, b) = if r < me { (&lp.a_eq[r], lp.b_eq[r]) } else { (&lp.a_ge[r - me], lp.b_ge[r - me]) };
        let s = if b < 0.0 { -1.0 } else { 1.0 };
        sign[r] = s;
        let row = &mut t[r * width..(r + 1) * width];
        for j in 0..n {
            row[j] = s * a[j];
            row[n + j] = -s * a[j];
        }
        if r >= me {
            row[2 * n + (r - me)] = -s;
        }
        row[n_std + r] = 1.0;
        row[width - 1] = s * b;
    }
    let mut tab = Tableau {
        rows: m,
        width,
        t,
        cost: vec![0.0; width],
        basis: (n_std..n_std + m).collect(),
    };

    // phase 1: minimize the sum of artificials
    for r in 0..m {
        for j in 0..width {
            if !(n_std..n_std + m).contains(&j) {
                tab.cost[j] -= tab.at(r, j);
            }
        }
    }
    tab.iterate(n_std)?;
    let infeas = -tab.cost[width - 1];
    let bscale = 1.0f64.max(norm_inf(&lp.b_eq)).max(norm_inf(&lp.b_ge));
    if infeas > 1e-8 * bscale {
        return Ok(LpOutcome::Infeasible);
    }
    for r in 0..m {
        if tab.basis[r] >= n_std {
            if let Some(j) = (0..n_std).find(|&j| abs(tab.at(r, j)) > PIVOT_TOL) {
                tab.pivot(r, j);
            }
        }
    }

    // phase 2
    let mut cstd = vec![0.0; width];
    for j in 0..n {
        cstd[j] = lp.c[j];
        cstd[n + j] = -lp.c[j];
    }
    tab.cost = cstd.clone();
    for r in 0..m {
        let cb = cstd[tab.basis[r]];
        if cb != 0.0 {
            for j in 0..width {
                tab.cost[j] -= cb * tab.at(r, j);
            }
        }
    }
    if let Some(enter) = tab.iterate(n_std)? {
        let mut dir = vec![0.0; n_std];
        dir[enter] = 1.0;
        for r in 0..m {
            if tab.basis[r] < n_std {
                dir[tab.basis[r]] -= tab.at(r, enter);
            }
        }
        let ray = (0..n).map(|j| dir[j] - dir[n + j]).collect();
        return Ok(LpOutcome::Unbounded { ray });
    }
    let mut vals = vec![0.0; n_std];
    for r in 0..m {
        if tab.basis[r] < n_std {
            vals[tab.basis[r]] = tab.rhs(r);
        }
    }
    let x: Vec<f64> = (0..n).map(|j| vals[j] - vals[n + j]).collect();
    let y: Vec<f64> = (0..m).map(|r| -sign[r] * tab.cost[n_std + r]).collect();
    Ok(LpOutcome::Optimal(LpSolution {
        objective: dot(&lp.c, &x),
        x,
        dual_eq: y[..me].to_vec(),
        dual_ge: y[me..].to_vec(),
    }))
}

/// Evidence for [`origin_is_optimal`].
#[derive(Clone, Debug, PartialEq)]
pub enum OriginCertificate {
    /// `c = A_eq^T eq + A_ge^T ge` with `ge >= 0`, of least l1 norm.
    Duals { eq: Vec<f64>, ge: Vec<f64> },
    /// A feasible direction with `c^T direction = slope < 0`.
    Descent { direction: Vec<f64>, slope: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OriginCheck {
    pub optimal: bool,
    pub certificate: OriginCertificate,
}

fn require_homogeneous(lp: &LpInstance) -> Result<(), LpError> {
    lp.validate()?;
    if lp.b_eq.iter().chain(&lp.b_ge).any(|b| *b != 0.0) {
        return Err(LpError::NonHomogeneous);
    }
    Ok(())
}

/// Decides whether `x = 0` minimizes a homogeneous LP by solving its dual
/// feasibility problem directly; a descent direction is produced otherwise.
pub fn origin_is_optimal(lp: &LpInstance) -> Result<OriginCheck, LpError> {
    require_homogeneous(lp)?;
    let (n, me, mg) = (lp.n, lp.a_eq.len(), lp.a_ge.len());
    let k = me + mg;
    // variables: y (k), t (k); minimize sum t, t >= |y|
    let mut c = vec![0.0; 2 * k];
    c[k..].iter_mut().for_each(|v| *v = 1.0);
    let mut dual = LpInstance::new(c);
    for j in 0..n {
        let mut row = vec![0.0; 2 * k];
        for (r, a) in lp.a_eq.iter().chain(&lp.a_ge).enumerate() {
            row[r] = a[j];
        }
        dual.push_eq(row, lp.c[j]);
    }
    for r in 0..k {
        let mut row = vec![0.0; 2 * k];
        row[r] = -1.0;
        row[k + r] = 1.0;
        dual.push_ge(row.clone(), 0.0);
        row[r] = 1.0;
        dual.push_ge(row, 0.0);
        if r >= me {
            let mut row = vec![0.0; 2 * k];
            row[r] = 1.0;
            dual.push_ge(row, 0.0);
        }
    }
    match solve_lp(&dual)? {
        LpOutcome::Optimal(s) => Ok(OriginCheck {
            optimal: true,
            certificate: OriginCertificate::Duals {
                eq: s.x[..me].to_vec(),
                ge: s.x[me..k].iter().map(|v| v.max(0.0)).collect(),
            },
        }),
        _ => {
            let (slope, direction) = descent_in_box(lp)?;
            Ok(OriginCheck {
                optimal: false,
                certificate: OriginCertificate::Descent { direction, slope },
            })
        }
    }
}

/// Minimizes `c^T d` over the feasible cone intersected with `[-1, 1]^n`.
/// Returns the optimal value (`<= 0`) and minimizer.
pub fn descent_in_box(lp: &LpInstance) -> Result<(f64, Vec<f64>), LpError> {
    require_homogeneous(lp)?;
    let n = lp.n;
    let mut boxed = lp.clone();
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        boxed.push_ge(row.clone(), -1.0);
        row[j] = -1.0;
        boxed.push_ge(row, -1.0);
    }
    match solve_lp(&boxed)? {
        LpOutcome::Optimal(s) => Ok((s.objective, s.x)),
        // the origin is always feasible and the box is bounded
        _ => Ok((0.0, vec![0.0; n])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp_with_duals() {
        // min x + 2y  s.t. x + y >= 1, x >= 0, y >= 0
        let mut lp = LpInstance::new(vec![1.0, 2.0]);
        lp.push_ge(vec![1.0, 1.0], 1.0);
        lp.push_ge(vec![1.0, 0.0], 0.0);
        lp.push_ge(vec![0.0, 1.0], 0.0);
        let LpOutcome::Optimal(s) = solve_lp(&lp).unwrap() else { panic!() };
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        // c = A^T y
        for j in 0..2 {
            let r: f64 = (0..3).map(|i| lp.a_ge[i][j] * s.dual_ge[i]).sum();
            assert!((r - lp.c[j]).abs() < 1e-12);
        }
        assert!(s.dual_ge.iter().all(|y| *y >= -1e-12));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LpInstance::new(vec![1.0]);
        lp.push_ge(vec![1.0], 1.0);
        lp.push_ge(vec![-1.0], 0.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        let mut lp = LpInstance::new(vec![-1.0, 0.0]);
        lp.push_eq(vec![0.0, 1.0], 2.0);
        let LpOutcome::Unbounded { ray } = solve_lp(&lp).unwrap() else { panic!() };
        assert!(ray[0] > 0.0 && ray[1].abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_equality() {
        let mut lp = LpInstance::new(vec![1.0, 1.0]);
        lp.push_eq(vec![1.0, -1.0], -3.0);
        lp.push_ge(vec![1.0, 0.0], 0.0);
        lp.push_ge(vec![0.0, 1.0], 0.0);
        let LpOutcome::Optimal(s) = solve_lp(&lp).unwrap() else { panic!() };
        assert!((s.x[1] - 3.0).abs() < 1e-12 && s.x[0].abs() < 1e-12);
        assert!((s.dual_eq[0] * -3.0 - s.objective).abs() < 1e-12);
    }

    #[test]
    fn origin_check_both_ways() {
        // cone d1 >= 0, objective d1: origin optimal
        let mut lp = LpInstance::new(vec![1.0, 0.0]);
        lp.push_ge(vec![1.0, 0.0], 0.0);
        assert!(origin_is_optimal(&lp).unwrap().optimal);
        // objective -2 d1 on d1 >= 0, d2 = 0: descent (1, 0) with slope -2
        let mut lp = LpInstance::new(vec![-2.0, 0.0]);
        lp.push_ge(vec![1.0, 0.0], 0.0);
        lp.push_eq(vec![0.0, 1.0], 0.0);
        let chk = origin_is_optimal(&lp).unwrap();
        assert!(!chk.optimal);
        let OriginCertificate::Descent { slope, direction } = chk.certificate else { panic!() };
        assert!((slope + 2.0).abs() < 1e-12);
        assert_eq!(direction, vec![1.0, 0.0]);
    }
}
