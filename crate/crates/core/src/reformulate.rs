//! Smooth NLP reformulations of an MPCC and recovery of MPCC multipliers
//! from their KKT points.
//!
//! Row layouts (all zero-based):
//!
//! | scheme | equalities        | inequalities                                   |
//! |--------|-------------------|------------------------------------------------|
//! | BA     | `h`, `-(Phi_i + p_i)` | `g`                                        |
//! | MLF    | `h`               | `g`, `Phi_i <= 0`, `-Phi_i - eps/2 <= 0`       |
//! | REG    | `h`               | `g`, `-G_i <= 0`, `-H_i <= 0`, `G_i H_i - eps <= 0` |
//!
//! The BA row is written as `-(Phi + p) = 0` so that its NLP multiplier is
//! the multiplier `u^Phi` of the Lagrangian `f + ... - u^Phi (Phi + p)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{IndexSets, MpccMultipliers, MpccProblem, ScalarFn};
use crate::ncp::{phi, phi_derivs};
use crate::nlp::{KktPoint, NlpInstance, NlpRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Shifted equality `Phi(G, H; eps) + p = 0` (bounding algorithm).
    Ba,
    /// Band `-eps/2 <= Phi(G, H; eps) <= 0`.
    Mlf,
    /// Product regularization `G, H >= 0`, `G H <= eps`.
    Reg,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ba, Scheme::Mlf, Scheme::Reg];

    pub fn parse(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "ba" => Some(Scheme::Ba),
            "mlf" => Some(Scheme::Mlf),
            "reg" => Some(Scheme::Reg),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ba => "BA",
            Scheme::Mlf => "MLF",
            Scheme::Reg => "REG",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ReformulateError {
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("expected {expected} shifts, got {got}")]
    ShiftLength { expected: usize, got: usize },
    #[error("shift p[{index}] = {value} outside [0, eps/2]")]
    ShiftRange { index: usize, value: f64 },
    #[error("complementarity blocks differ in length")]
    PairMismatch,
}

fn check_eps(problem: &MpccProblem, eps: f64) -> Result<(), ReformulateError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ReformulateError::NonPositiveEps(eps));
    }
    if problem.comp_g.len() != problem.comp_h.len() {
        return Err(ReformulateError::PairMismatch);
    }
    Ok(())
}

fn base_instance(problem: &Arc<MpccProblem>, tag: &str) -> NlpInstance {
    let mut nlp = NlpInstance::new(format!("{}[{}]", problem.name, tag), problem.n, problem.f.clone());
    for (i, h) in problem.h.iter().enumerate() {
        nlp.equalities.push(NlpRow::new(h.clone(), 1.0, format!("h{i}")));
    }
    for (i, g) in problem.g.iter().enumerate() {
        nlp.inequalities.push(NlpRow::new(g.clone(), 1.0, format!("g{i}")));
    }
    nlp
}

/// `sign * Phi(G_i, H_i; eps) + offset` as a smooth function of `z`.
fn phi_row(problem: &Arc<MpccProblem>, i: usize, eps: f64, sign: f64, offset: f64) -> ScalarFn {
    let (p1, p2, p3) = (problem.clone(), problem.clone(), problem.clone());
    ScalarFn::new(
        move |z| sign * phi(p1.comp_g[i].value(z), p1.comp_h[i].value(z), eps) + offset,
        move |z, out| {
            let (gi, hi) = (&p2.comp_g[i], &p2.comp_h[i]);
            let d = phi_derivs(gi.value(z), hi.value(z), eps);
            let (dg, dh) = (gi.gradient(z), hi.gradient(z));
            for j in 0..out.len() {
                out[j] = sign * (d.d_g * dg[j] + d.d_h * dh[j]);
            }
        },
        move |z, w, hess: &mut Matrix| {
            let (gi, hi) = (&p3.comp_g[i], &p3.comp_h[i]);
            let d = phi_derivs(gi.value(z), hi.value(z), eps);
            let (dg, dh) = (gi.gradient(z), hi.gradient(z));
            let sw = sign * w;
            gi.add_hessian(z, sw * d.d_g, hess);
            hi.add_hessian(z, sw * d.d_h, hess);
            hess.add_outer(sw * d.d_gg, &dg, &dg);
            hess.add_outer(sw * d.d_gh, &dg, &dh);
            hess.add_outer(sw * d.d_gh, &dh, &dg);
            hess.add_outer(sw * d.d_hh, &dh, &dh);
        },
    )
}

/// Equality reformulation with shifts `p` (`0 <= p_i <= eps/2`).
pub fn build_ba(problem: &Arc<MpccProblem>, eps: f64, p: &[f64]) -> Result<NlpInstance, ReformulateError> {
    check_eps(problem, eps)?;
    let m = problem.m();
    if p.len() != m {
        return Err(ReformulateError::ShiftLength { expected: m, got: p.len() });
    }
    for (i, &pi) in p.iter().enumerate() {
        if !(0.0..=0.5 * eps * (1.0 + 1e-12)).contains(&pi) {
            return Err(ReformulateError::ShiftRange { index: i, value: pi });
        }
    }
    let mut nlp = base_instance(problem, &format!("BA eps={eps:e}"));
    for (i, &pi) in p.iter().enumerate() {
        nlp.equalities
            .push(NlpRow::new(phi_row(problem, i, eps, -1.0, -pi), eps, format!("phi{i}")));
    }
    Ok(nlp)
}

pub fn build_mlf(problem: &Arc<MpccProblem>, eps: f64) -> Result<NlpInstance, ReformulateError> {
    check_eps(problem, eps)?;
    let m = problem.m();
    let mut nlp = base_instance(problem, &format!("MLF eps={eps:e}"));
    for i in 0..m {
        nlp.inequalities
            .push(NlpRow::new(phi_row(problem, i, eps, 1.0, 0.0), eps, format!("phi_upper{i}")));
    }
    for i in 0..m {
        nlp.inequalities.push(NlpRow::new(
            phi_row(problem, i, eps, -1.0, -0.5 * eps),
            eps,
            format!("phi_lower{i}"),
        ));
    }
    Ok(nlp)
}

pub fn build_reg(problem: &Arc<MpccProblem>, eps: f64) -> Result<NlpInstance, ReformulateError> {
    check_eps(problem, eps)?;
    let m = problem.m();
    let mut nlp = base_instance(problem, &format!("REG eps={eps:e}"));
    for (blk, tag) in [(&problem.comp_g, "G"), (&problem.comp_h, "H")] {
        for i in 0..m {
            let (a, b, c) = (blk[i].clone(), blk[i].clone(), blk[i].clone());
            let row = ScalarFn::new(
                move |z| -a.value(z),
                move |z, out| {
                    b.gradient_into(z, out);
                    out.iter_mut().for_each(|v| *v = -*v);
                },
                move |z, w, h| c.add_hessian(z, -w, h),
            );
            nlp.inequalities.push(NlpRow::new(row, 1.0, format!("{tag}{i}>=0")));
        }
    }
    for i in 0..m {
        let (p1, p2, p3) = (problem.clone(), problem.clone(), problem.clone());
        let row = ScalarFn::new(
            move |z| p1.comp_g[i].value(z) * p1.comp_h[i].value(z) - eps,
            move |z, out| {
                let (gi, hi) = (&p2.comp_g[i], &p2.comp_h[i]);
                let (a, b) = (gi.value(z), hi.value(z));
                let (da, db) = (gi.gradient(z), hi.gradient(z));
                for j in 0..out.len() {
                    out[j] = b * da[j] + a * db[j];
                }
            },
            move |z, w, h| {
                let (gi, hi) = (&p3.comp_g[i], &p3.comp_h[i]);
                let (a, b) = (gi.value(z), hi.value(z));
                let (da, db) = (gi.gradient(z), hi.gradient(z));
                gi.add_hessian(z, w * b, h);
                hi.add_hessian(z, w * a, h);
                h.add_outer(w, &da, &db);
                h.add_outer(w, &db, &da);
            },
        );
        nlp.inequalities.push(NlpRow::new(row, eps, format!("reg{i}")));
    }
    Ok(nlp)
}

pub fn build(problem: &Arc<MpccProblem>, scheme: Scheme, eps: f64, p: &[f64]) -> Result<NlpInstance, ReformulateError> {
    match scheme {
        Scheme::Ba => build_ba(problem, eps, p),
        Scheme::Mlf => build_mlf(problem, eps),
        Scheme::Reg => build_reg(problem, eps),
    }
}

/// Scheme-specific multipliers of a reformulated NLP, in MPCC terms.
#[derive(Clone, Debug, PartialEq)]
pub enum InnerMultipliers {
    Ba { g: Vec<f64>, h: Vec<f64>, phi: Vec<f64> },
    Mlf { g: Vec<f64>, h: Vec<f64>, lower: Vec<f64>, upper: Vec<f64> },
    Reg { g: Vec<f64>, h: Vec<f64>, comp_g: Vec<f64>, comp_h: Vec<f64>, product: Vec<f64> },
}

impl InnerMultipliers {
    pub fn split(problem: &MpccProblem, scheme: Scheme, kkt: &KktPoint) -> Self {
        let (ng, nh, m) = (problem.g.len(), problem.h.len(), problem.m());
        let eq = &kkt.mult.eq;
        let iq = &kkt.mult.ineq;
        match scheme {
            Scheme::Ba => InnerMultipliers::Ba {
                g: iq[..ng].to_vec(),
                h: eq[..nh].to_vec(),
                phi: eq[nh..nh + m].to_vec(),
            },
            Scheme::Mlf => InnerMultipliers::Mlf {
                g: iq[..ng].to_vec(),
                h: eq[..nh].to_vec(),
                upper: iq[ng..ng + m].to_vec(),
                lower: iq[ng + m..ng + 2 * m].to_vec(),
            },
            Scheme::Reg => InnerMultipliers::Reg {
                g: iq[..ng].to_vec(),
                h: eq[..nh].to_vec(),
                comp_g: iq[ng..ng + m].to_vec(),
                comp_h: iq[ng + m..ng + 2 * m].to_vec(),
                product: iq[ng + 2 * m..ng + 3 * m].to_vec(),
            },
        }
    }

    /// The smoothing multiplier `u^Phi` (`u_L - u_U` for MLF); `None` for REG.
    pub fn u_phi(&self) -> Option<Vec<f64>> {
        match self {
            InnerMultipliers::Ba { phi, .. } => Some(phi.clone()),
            InnerMultipliers::Mlf { lower, upper, .. } => Some(lower.iter().zip(upper).map(|(l, u)| l - u).collect()),
            InnerMultipliers::Reg { .. } => None,
        }
    }

    pub fn g(&self) -> &[f64] {
        match self {
            InnerMultipliers::Ba { g, .. } | InnerMultipliers::Mlf { g, .. } | InnerMultipliers::Reg { g, .. } => g,
        }
    }

    pub fn h(&self) -> &[f64] {
        match self {
            InnerMultipliers::Ba { h, .. } | InnerMultipliers::Mlf { h, .. } | InnerMultipliers::Reg { h, .. } => h,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("no Clarke weight supplied for biactive pair {0}")]
    MissingTheta(usize),
    #[error("index sets are inconsistent at the recovery point")]
    InconsistentSets,
}

/// Everything needed to turn a limiting NLP KKT point into MPCC multipliers.
pub struct RecoveryInput<'a> {
    pub scheme: Scheme,
    pub kkt: &'a KktPoint,
    pub sets: &'a IndexSets,
    /// Clarke weights on `beta`.
    pub theta: &'a BTreeMap<usize, f64>,
    /// `G(z)` and `H(z)` at the KKT point (used by REG).
    pub comp_g: &'a [f64],
    pub comp_h: &'a [f64],
}

/// BA/MLF: `lambda^G = u^Phi` on alpha, `lambda^H = u^Phi` on gamma and the
/// Clarke split `(theta u, (1 - theta) u)` on beta.
/// REG: `lambda^G = v^G - v^REG H`, `lambda^H = v^H - v^REG G`.
pub fn recover_mpcc_multipliers(problem: &MpccProblem, input: &RecoveryInput<'_>) -> Result<MpccMultipliers, RecoveryError> {
    if !input.sets.violated.is_empty() {
        return Err(RecoveryError::InconsistentSets);
    }
    let inner = InnerMultipliers::split(problem, input.scheme, input.kkt);
    let mut lambda_g = vec_zero(problem.g.len());
    for &i in &input.sets.active_g {
        lambda_g[i] = inner.g()[i];
    }
    let mut out = MpccMultipliers {
        lambda_g,
        lambda_h: inner.h().to_vec(),
        lambda_comp_g: BTreeMap::new(),
        lambda_comp_h: BTreeMap::new(),
    };
    match &inner {
        InnerMultipliers::Reg { comp_g, comp_h, product, .. } => {
            for &i in input.sets.alpha.iter().chain(&input.sets.beta) {
                out.lambda_comp_g.insert(i, comp_g[i] - product[i] * input.comp_h[i]);
            }
            for &i in input.sets.gamma.iter().chain(&input.sets.beta) {
                out.lambda_comp_h.insert(i, comp_h[i] - product[i] * input.comp_g[i]);
            }
        }
        _ => {
            let u = inner.u_phi().expect("smoothing scheme");
            for &i in &input.sets.alpha {
                out.lambda_comp_g.insert(i, u[i]);
            }
            for &i in &input.sets.gamma {
                out.lambda_comp_h.insert(i, u[i]);
            }
            for &i in &input.sets.beta {
                let th = *input.theta.get(&i).ok_or(RecoveryError::MissingTheta(i))?;
                out.lambda_comp_g.insert(i, th * u[i]);
                out.lambda_comp_h.insert(i, (1.0 - th) * u[i]);
            }
        }
    }
    Ok(out)
}

fn vec_zero(n: usize) -> Vec<f64> {
    alloc::vec![0.0; n]
}
