//! Homotopy drivers: the bounding algorithm on the shifted equality
//! reformulation and plain continuation in `eps` for MLF and REG.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::float::{abs, powf};
use crate::linalg::{null_space, symmetric_eigen, Matrix};
use crate::model::{active_index_sets, evaluate, IndexSets, MpccMultipliers, MpccProblem};
use crate::ncp::{clarke_theta_with_tol, phi_derivs};
use crate::nlp::{lagrangian_hessian, solve, solve_warm, ActiveSet, KktPoint, KktStatus, NlpInstance, NlpMultipliers, SolverOptions};
use crate::reformulate::{build, recover_mpcc_multipliers, InnerMultipliers, RecoveryInput, Scheme};

#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyOptions {
    pub eps0: f64,
    pub kappa: f64,
    pub eps_tol: f64,
    /// Starting point; all ones when absent.
    pub z0: Option<Vec<f64>>,
    pub inner: SolverOptions,
    /// Activity tolerance for index sets; the model default when absent.
    pub activity_tol: Option<f64>,
    /// Threshold below which `|u^Phi|` counts as zero in the shift update.
    pub sensitivity_tol: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        Self {
            eps0: 1e-2,
            kappa: 0.1,
            eps_tol: 1e-12,
            z0: None,
            inner: SolverOptions::default(),
            activity_tol: None,
            sensitivity_tol: 1e-10,
        }
    }
}

/// Smallest eigenvalue of the Lagrangian Hessian on the null space of the
/// active constraint Jacobian (`+inf` when that null space is trivial).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureReport {
    pub min_curvature: f64,
    pub null_dim: usize,
    pub jacobian_rank: usize,
    pub active_rows: usize,
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub k: usize,
    pub eps: f64,
    /// Shifts used for this solve (BA only; zeros otherwise).
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub kkt: KktPoint,
    pub inner: InnerMultipliers,
    pub f: f64,
    pub f_up: f64,
    pub f_low: f64,
    pub p0: Vec<usize>,
    pub peps: Vec<usize>,
    pub sets: IndexSets,
    pub curvature: CurvatureReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureRecord {
    pub k: usize,
    pub eps: f64,
    pub status: Option<KktStatus>,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct LimitPoint {
    pub z: Vec<f64>,
    pub eps: f64,
    pub sets: IndexSets,
    /// Clarke weights on `beta` (BA/MLF).
    pub theta: BTreeMap<usize, f64>,
    pub multipliers: MpccMultipliers,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub problem: String,
    pub scheme: Scheme,
    pub records: Vec<IterationRecord>,
    pub failure: Option<FailureRecord>,
    pub limit: Option<LimitPoint>,
}

impl SolveTrace {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && !self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn record_at(&self, eps: f64) -> Option<&IterationRecord> {
        self.records.iter().find(|r| abs(r.eps - eps) <= 1e-9 * eps)
    }
}

/// `f_up = f + eps Σ|u_i|`, `f_low = f - eps Σ_{P0 ∪ Peps} |u_i|`.
pub fn compute_bounds(f: f64, u_phi: &[f64], eps: f64, p0: &[usize], peps: &[usize]) -> (f64, f64) {
    let all: f64 = u_phi.iter().map(|u| abs(*u)).sum();
    let sel: f64 = p0.iter().chain(peps).map(|&i| abs(u_phi[i])).sum();
    (f + eps * all, f - eps * sel)
}

/// Shift sets and the next shift vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftUpdate {
    pub p_next: Vec<f64>,
    pub p0: Vec<usize>,
    pub peps: Vec<usize>,
}

/// `P0 = {p_i = 0, u_i > 0}`, `Peps = {p_i = eps/2, u_i < 0}`; the next shift
/// is `eps_next / 2` on `P0`, `0` on `Peps` and `kappa p_i` elsewhere.
pub fn update_parameters(p: &[f64], u_phi: &[f64], eps: f64, eps_next: f64, kappa: f64, sens_tol: f64) -> ShiftUpdate {
    let mut out = ShiftUpdate {
        p_next: vec![0.0; p.len()],
        p0: Vec::new(),
        peps: Vec::new(),
    };
    let same = |a: f64, b: f64| abs(a - b) <= 1e-12 * eps;
    for i in 0..p.len() {
        if same(p[i], 0.0) && u_phi[i] > sens_tol {
            out.p0.push(i);
            out.p_next[i] = 0.5 * eps_next;
        } else if same(p[i], 0.5 * eps) && u_phi[i] < -sens_tol {
            out.peps.push(i);
            out.p_next[i] = 0.0;
        } else {
            out.p_next[i] = (kappa * p[i]).clamp(0.0, 0.5 * eps_next);
        }
    }
    out
}

/// Reduced-Hessian curvature at a KKT point of an NLP on the given rows.
pub fn reduced_hessian_diagnostic(nlp: &NlpInstance, kkt: &KktPoint, active: &ActiveSet) -> CurvatureReport {
    let n = nlp.n;
    let j = active.jacobian(nlp, &kkt.z);
    let (z, rank) = null_space(&j, n, 1e-10);
    let rows = j.rows();
    let d = z.cols();
    if d == 0 {
        return CurvatureReport {
            min_curvature: f64::INFINITY,
            null_dim: 0,
            jacobian_rank: rank,
            active_rows: rows,
        };
    }
    let w = lagrangian_hessian(nlp, &kkt.z, &kkt.mult).unwrap_or_else(|_| Matrix::zeros(n, n));
    let reduced = z.transpose().mul(&w).mul(&z);
    let eig = symmetric_eigen(&reduced);
    CurvatureReport {
        min_curvature: eig.values[0],
        null_dim: d,
        jacobian_rank: rank,
        active_rows: rows,
    }
}

/// Active rows for the curvature diagnostic: equalities plus inequalities
/// with `c_i >= -1e-6 scale_i` or a positive multiplier.
pub fn diagnostic_active_set(nlp: &NlpInstance, kkt: &KktPoint) -> ActiveSet {
    let mut a = ActiveSet::detect(nlp, &kkt.z, 1e-6);
    for (i, &l) in kkt.mult.ineq.iter().enumerate() {
        if l > 0.0 && !a.inequalities.contains(&i) {
            a.inequalities.push(i);
        }
    }
    a.inequalities.sort_unstable();
    a
}

/// `eps0 * kappa^k`, computed as a division when `1/kappa` is an integer so
/// that decimal ladders come out exact.
pub fn eps_at(opts: &HomotopyOptions, k: usize) -> f64 {
    let inv = 1.0 / opts.kappa;
    let r = libm::round(inv);
    if abs(inv - r) <= 1e-9 * r {
        opts.eps0 / powf(r, k as f64)
    } else {
        opts.eps0 * powf(opts.kappa, k as f64)
    }
}

/// Bounding algorithm on the shifted equality reformulation.
pub fn run_bounding(problem: &Arc<MpccProblem>, opts: &HomotopyOptions) -> SolveTrace {
    run_scheme(problem, Scheme::Ba, opts)
}

/// Continuation in `eps` for any scheme (BA uses the shift updates).
pub fn run_homotopy(problem: &Arc<MpccProblem>, scheme: Scheme, opts: &HomotopyOptions) -> SolveTrace {
    run_scheme(problem, scheme, opts)
}

fn run_scheme(problem: &Arc<MpccProblem>, scheme: Scheme, opts: &HomotopyOptions) -> SolveTrace {
    let mut trace = SolveTrace {
        problem: problem.name.clone(),
        scheme,
        records: Vec::new(),
        failure: None,
        limit: None,
    };
    let m = problem.m();
    let mut z = opts.z0.clone().unwrap_or_else(|| vec![1.0; problem.n]);
    let mut p = vec![0.0; m];
    let mut warm: Option<NlpMultipliers> = None;
    let mut k = 0usize;
    loop {
        let eps = eps_at(opts, k);
        if eps < opts.eps_tol * (1.0 - 1e-9) {
            break;
        }
        let fail = |message: String, status: Option<KktStatus>| FailureRecord { k, eps, status, message };
        let nlp = match build(problem, scheme, eps, &p) {
            Ok(n) => n,
            Err(e) => {
                trace.failure = Some(fail(format!("{e}"), None));
                break;
            }
        };
        let res = match &warm {
            None => solve(&nlp, &z, &opts.inner),
            Some(w) => solve_warm(&nlp, &z, w, &opts.inner),
        };
        let kkt = match res {
            Ok(kkt) => kkt,
            Err(e) => {
                trace.failure = Some(fail(format!("{e}"), None));
                break;
            }
        };
        if kkt.status != KktStatus::Converged {
            trace.failure = Some(fail(
                format!("inner solve ended with {:?} (KKT residual {:.3e})", kkt.status, kkt.kkt_residual),
                Some(kkt.status),
            ));
            break;
        }
        let inner = InnerMultipliers::split(problem, scheme, &kkt);
        let f = problem.f.value(&kkt.z);
        let sets = match active_index_sets(problem, &kkt.z, opts.activity_tol) {
            Ok(s) => s,
            Err(e) => {
                trace.failure = Some(fail(format!("{e}"), None));
                break;
            }
        };
        let curvature = reduced_hessian_diagnostic(&nlp, &kkt, &diagnostic_active_set(&nlp, &kkt));
        let eps_next = eps_at(opts, k + 1);
        let (f_up, f_low, upd) = match inner.u_phi() {
            Some(u) if scheme == Scheme::Ba => {
                let upd = update_parameters(&p, &u, eps, eps_next, opts.kappa, opts.sensitivity_tol);
                let (fu, fl) = compute_bounds(f, &u, eps, &upd.p0, &upd.peps);
                (fu, fl, Some(upd))
            }
            _ => (f, f, None),
        };
        z = kkt.z.clone();
        warm = Some(kkt.mult.clone());
        trace.records.push(IterationRecord {
            k,
            eps,
            p: p.clone(),
            z: z.clone(),
            kkt,
            inner,
            f,
            f_up,
            f_low,
            p0: upd.as_ref().map(|u| u.p0.clone()).unwrap_or_default(),
            peps: upd.as_ref().map(|u| u.peps.clone()).unwrap_or_default(),
            sets,
            curvature,
        });
        if let Some(u) = upd {
            p = u.p_next;
        }
        k += 1;
    }
    if trace.failure.is_none() {
        trace.limit = trace.records.last().and_then(|r| limit_point(problem, scheme, r, opts.activity_tol));
    }
    trace
}

/// MPCC multipliers recovered from the last record of a successful run.
pub fn limit_point(problem: &MpccProblem, scheme: Scheme, rec: &IterationRecord, tol: Option<f64>) -> Option<LimitPoint> {
    let ev = evaluate(problem, &rec.z).ok()?;
    let sets = rec.sets.clone();
    let tol = tol.unwrap_or(sets.tol);
    let mut theta = BTreeMap::new();
    for &i in &sets.beta {
        let (a, b) = (ev.comp_g[i], ev.comp_h[i]);
        let dg = phi_derivs(a, b, rec.eps).d_g;
        theta.insert(i, clarke_theta_with_tol(a, b, dg, tol));
    }
    let input = RecoveryInput {
        scheme,
        kkt: &rec.kkt,
        sets: &sets,
        theta: &theta,
        comp_g: &ev.comp_g,
        comp_h: &ev.comp_h,
    };
    let multipliers = recover_mpcc_multipliers(problem, &input).ok()?;
    Some(LimitPoint {
        z: rec.z.clone(),
        eps: rec.eps,
        sets,
        theta,
        multipliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_update_example() {
        let u = update_parameters(&[0.0], &[1.0], 1e-2, 1e-3, 0.1, 1e-10);
        assert_eq!(u.p0, vec![0]);
        assert!((u.p_next[0] - 5e-4).abs() < 1e-18);
        let u = update_parameters(&[5e-3], &[-1.0], 1e-2, 1e-3, 0.1, 1e-10);
        assert_eq!(u.peps, vec![0]);
        assert_eq!(u.p_next[0], 0.0);
        let u = update_parameters(&[2e-3], &[-1.0], 1e-2, 1e-3, 0.1, 1e-10);
        assert!(u.p0.is_empty() && u.peps.is_empty());
        assert!((u.p_next[0] - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn bounds_formula() {
        let (up, low) = compute_bounds(1.0, &[2.0, -3.0], 0.1, &[1], &[]);
        assert!((up - 1.5).abs() < 1e-15 && (low - 0.7).abs() < 1e-15);
    }
}
