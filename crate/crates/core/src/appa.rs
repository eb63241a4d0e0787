//! Inexact accelerated proximal point on the dual: momentum schedules,
//! inner-accuracy schedules, ergodic iterates and certificate tracking.
//!
//! Each outer iteration smooths the dual around the extrapolated point,
//! drives the FW inner solver to the scheduled accuracy, then takes the
//! dual prox step and updates the momentum extrapolation.

use crate::error::{Error, Result};
use crate::fw::{fw_until, ActiveSet, FwConfig, FwStats, SmoothObjective};
use crate::problem::{DenseVector, SaddleProblem, SmoothPart};
use crate::smoothing::SmoothedPrimal;

/// Momentum coefficient schedule: `t_1 = 1` and
/// `rho_n = t_{n-1}^2 - t_n^2 + t_n` must stay nonnegative (positive for
/// all kinds except the classical FISTA recursion, where it is identically
/// zero by construction).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TSchedule {
    /// t_n = 1: plain proximal point
    ConstantOne,
    /// t_{n+1} = (1 + sqrt(1 + 4 t_n^2)) / 2
    Nesterov,
    /// t_n = ((n + a - 1)/a)^d with d in (0,1], a > max(1, (2d)^(1/d))
    AujolDossal { a: f64, d: f64 },
    /// t_n = (n + 1)/2
    Aggressive,
}

impl TSchedule {
    pub fn validate(&self) -> Result<()> {
        if let TSchedule::AujolDossal { a, d } = self {
            if !(*d > 0.0 && *d <= 1.0) {
                return Err(Error::InvalidParam(format!("d must be in (0,1], got {d}")));
            }
            let a_min = 1.0_f64.max((2.0 * d).powf(1.0 / d));
            if *a <= a_min {
                return Err(Error::InvalidParam(format!(
                    "a must exceed max(1,(2d)^(1/d)) = {a_min}, got {a}"
                )));
            }
        }
        // horizon check of the rho positivity precondition
        let mut t_prev = 1.0;
        let mut t_cur = self.t_next(1, 1.0);
        for n in 2..=10_000u64 {
            let rho = self.rho(t_prev, t_cur);
            if rho < 0.0 {
                return Err(Error::InvalidParam(format!(
                    "schedule violates rho_{n} = {rho} >= 0"
                )));
            }
            if *self != TSchedule::Nesterov && rho <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "schedule violates rho_{n} = {rho} > 0"
                )));
            }
            t_prev = t_cur;
            t_cur = self.t_next(n, t_cur);
        }
        Ok(())
    }

    /// `t_{n+1}` given `t_n` (all kinds start at `t_1 = 1`).
    pub fn t_next(&self, n: u64, t_n: f64) -> f64 {
        match self {
            TSchedule::ConstantOne => 1.0,
            TSchedule::Nesterov => 0.5 * (1.0 + (1.0 + 4.0 * t_n * t_n).sqrt()),
            TSchedule::AujolDossal { a, d } => (((n + 1) as f64 + a - 1.0) / a).powf(*d),
            TSchedule::Aggressive => ((n + 1) as f64 + 1.0) / 2.0,
        }
    }

    /// `rho_n = t_{n-1}^2 - t_n^2 + t_n`; exactly zero for the Nesterov
    /// recursion (it satisfies `t_n^2 - t_n = t_{n-1}^2` identically, so no
    /// cancellation noise is allowed to flip the sign).
    pub fn rho(&self, t_prev: f64, t_cur: f64) -> f64 {
        match self {
            TSchedule::Nesterov => 0.0,
            _ => t_prev * t_prev - t_cur * t_cur + t_cur,
        }
    }
}

/// Inner-accuracy schedule; the scale defaults to the first measured FW gap.
#[derive(Clone, Copy, Debug)]
pub enum EpsKind {
    /// eps_n = scale * n^(-alpha)
    Power { alpha: f64 },
    /// eps_n = scale * n^(-(4+delta)): keeps the error sums bounded
    Theory { delta: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct EpsSchedule {
    pub kind: EpsKind,
    /// `None`: use the first measured gap
    pub scale: Option<f64>,
}

impl EpsSchedule {
    pub fn power(alpha: f64) -> Self {
        Self {
            kind: EpsKind::Power { alpha },
            scale: None,
        }
    }

    pub fn theory(delta: f64) -> Self {
        Self {
            kind: EpsKind::Theory { delta },
            scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            EpsKind::Power { alpha } => alpha > 0.0,
            EpsKind::Theory { delta } => delta > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParam(
                "eps schedule exponent must be positive".into(),
            ));
        }
        if let Some(s) = self.scale {
            if s <= 0.0 {
                return Err(Error::InvalidParam("eps scale must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn eps(&self, scale: f64, n: u64) -> f64 {
        let nf = n as f64;
        match self.kind {
            EpsKind::Power { alpha } => scale * nf.powf(-alpha),
            EpsKind::Theory { delta } => scale * nf.powf(-(4.0 + delta)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AppaOptions {
    pub gamma: f64,
    pub t_schedule: TSchedule,
    pub eps: EpsSchedule,
    pub fw: FwConfig,
    /// retain per-iteration history (duals, u_n, eps_n) for diagnostics
    pub keep_history: bool,
}

impl AppaOptions {
    pub fn new(gamma: f64, t_schedule: TSchedule, eps: EpsSchedule) -> Self {
        Self {
            gamma,
            t_schedule,
            eps,
            fw: FwConfig {
                warm_start_check: true,
                ..FwConfig::default()
            },
            keep_history: false,
        }
    }
}

/// Per-iteration history row (kept only on request).
#[derive(Clone, Debug)]
pub struct AppaHistoryRow {
    pub n: u64,
    pub t: f64,
    pub eps: f64,
    pub y_bar_prev: DenseVector,
    pub y: DenseVector,
    pub u: DenseVector,
    pub inner_gap: f64,
}

/// Mutable state of the outer loop.
pub struct AppaState {
    /// completed outer iterations
    pub n: u64,
    pub y: DenseVector,
    pub y_prev: DenseVector,
    pub y_bar: DenseVector,
    pub u: DenseVector,
    pub x_active: ActiveSet,
    /// t_n of the iteration about to run
    t_upcoming: f64,
    /// t_n of the last completed iteration
    t_last: f64,
    /// running error sums: sum t_k sqrt(2 gamma eps_k), sum gamma t_k^2 eps_k
    pub a_sum: f64,
    pub b_sum: f64,
    /// T_n = sum of t_k
    pub t_sum: f64,
    x_erg_num: DenseVector,
    y_rho_sum: DenseVector,
    /// first FW gap measured on the smoothed primal at x_0
    pub gap0: f64,
    eps_scale: f64,
    pub stats: FwStats,
    pub last_eps: f64,
    pub last_inner_gap: f64,
    pub last_inner_converged: bool,
    pub history: Vec<AppaHistoryRow>,
}

impl AppaState {
    pub fn t_last(&self) -> f64 {
        self.t_last
    }
}

fn initial_active_set(prob: &SaddleProblem, stats: &mut FwStats) -> ActiveSet {
    // cost-minimal vertex for linear f; the zero direction otherwise
    let dir = match prob.f.as_ref() {
        SmoothPart::Linear { c } => c.clone(),
        _ => DenseVector::zeros(prob.lmo.dim()),
    };
    stats.lmo_calls += 1;
    ActiveSet::singleton(prob.lmo.minimize(&dir))
}

fn initial_dual(prob: &SaddleProblem, tau: f64) -> DenseVector {
    let zero = DenseVector::zeros(prob.h_star.dim());
    if prob.h_star.value(&zero).is_finite() {
        zero
    } else {
        prob.h_star.prox(tau, &zero)
    }
}

/// Set up the outer loop: pick `x_0` (one lmo call), `y_0` (zero projected
/// into the domain of `h*`), and measure the initial gap that scales the
/// eps schedule.
pub fn appa_init(prob: &SaddleProblem, opts: &AppaOptions) -> Result<AppaState> {
    if opts.gamma <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "gamma must be positive, got {}",
            opts.gamma
        )));
    }
    opts.t_schedule.validate()?;
    opts.eps.validate()?;
    let mut stats = FwStats::default();
    let x_active = initial_active_set(prob, &mut stats);
    let y0 = initial_dual(prob, opts.gamma);
    let sp = SmoothedPrimal::from_problem(prob, opts.gamma, y0.clone())?;
    let (gap0, _) = crate::fw::fw_gap(&x_active, &sp, &prob.lmo);
    stats.lmo_calls += 1;
    // a degenerate zero initial gap (x_0 already solves the first smoothed
    // problem) cannot scale the schedule; fall back to the classical gap
    // magnitude L D^2 / 2
    let d = prob.lmo.diameter_bound();
    let fallback = (0.5 * sp.lipschitz() * d * d).max(f64::MIN_POSITIVE);
    let eps_scale = opts.eps.scale.unwrap_or(if gap0 > 0.0 { gap0 } else { fallback });
    let ydim = y0.len();
    Ok(AppaState {
        n: 0,
        y: y0.clone(),
        y_prev: y0.clone(),
        y_bar: y0.clone(),
        u: y0,
        x_active,
        t_upcoming: 1.0,
        t_last: 1.0,
        a_sum: 0.0,
        b_sum: 0.0,
        t_sum: 0.0,
        x_erg_num: DenseVector::zeros(prob.lmo.dim()),
        y_rho_sum: DenseVector::zeros(ydim),
        gap0,
        eps_scale,
        stats,
        last_eps: f64::NAN,
        last_inner_gap: f64::NAN,
        last_inner_converged: true,
        history: Vec::new(),
    })
}

/// One outer iteration: warm-started inner solve on the smoothed primal to
/// the scheduled accuracy, dual prox step, momentum extrapolation and the
/// running-sum updates.
pub fn appa_iterate(state: &mut AppaState, prob: &SaddleProblem, opts: &AppaOptions) -> Result<()> {
    let n = state.n + 1;
    let gamma = opts.gamma;
    let t_n = state.t_upcoming;
    let eps_n = opts.eps.eps(state.eps_scale, n);
    let y_bar_prev = state.y_bar.clone();

    let sp = SmoothedPrimal::from_problem(prob, gamma, y_bar_prev.clone())?;
    let x_start = state.x_active.clone();
    let inner = fw_until(x_start, &sp, &prob.lmo, eps_n, &mut state.stats, &opts.fw);
    state.x_active = inner.x;
    state.last_inner_gap = inner.gap;
    state.last_inner_converged = inner.converged;
    state.last_eps = eps_n;

    // dual prox step at the new primal point
    let mut z = y_bar_prev.clone();
    z.add_scaled(gamma, &prob.k.apply(state.x_active.point()));
    let y_n = prob.h_star.prox(gamma, &z);

    let t_next = opts.t_schedule.t_next(n, t_n);
    if n >= 2 {
        let rho_n = opts.t_schedule.rho(state.t_last, t_n);
        state.y_rho_sum.add_scaled(rho_n, &state.y);
    }

    // u_n = y_{n-1} + t_n (y_n - y_{n-1})
    let mut u = state.y.clone();
    u.add_scaled(t_n, &y_n.sub(&state.y));
    // momentum extrapolation for the next smoothing center
    let mut y_bar = y_n.clone();
    y_bar.add_scaled((t_n - 1.0) / t_next, &y_n.sub(&state.y));

    state.a_sum += t_n * (2.0 * gamma * eps_n).sqrt();
    state.b_sum += gamma * t_n * t_n * eps_n;
    state.t_sum += t_n;
    state.x_erg_num.add_scaled(t_n, state.x_active.point());

    state.y_prev = std::mem::replace(&mut state.y, y_n);
    state.y_bar = y_bar;
    state.u = u.clone();
    state.t_last = t_n;
    state.t_upcoming = t_next;
    state.n = n;

    if opts.keep_history {
        state.history.push(AppaHistoryRow {
            n,
            t: t_n,
            eps: eps_n,
            y_bar_prev,
            y: state.y.clone(),
            u,
            inner_gap: state.last_inner_gap,
        });
    }
    Ok(())
}

/// Schedule-weighted primal average `sum t_k x_k / T_n`; stays in `P`.
pub fn ergodic_primal(state: &AppaState) -> DenseVector {
    assert!(state.n >= 1, "no iterations yet");
    state.x_erg_num.scaled(1.0 / state.t_sum)
}

/// Ergodic dual `(t_n^2 y_n + sum_{k=2}^n rho_k y_{k-1}) / T_n`.
pub fn ergodic_dual(state: &AppaState) -> DenseVector {
    assert!(state.n >= 1, "no iterations yet");
    let mut num = state.y_rho_sum.clone();
    num.add_scaled(state.t_last * state.t_last, &state.y);
    num.scaled(1.0 / state.t_sum)
}

/// Dual objective `H(y) = min_x <Kx,y> + f(x) - h*(y)`.
///
/// Exact (flag `true`) for linear `f` (one lmo sweep) and for isotropic
/// quadratic `f` over a polytope with an exact quadratic prox; otherwise a
/// certified lower bound from an inner FW solve at tolerance `tol`.
pub fn eval_dual_with_tol(
    prob: &SaddleProblem,
    y: &DenseVector,
    tol: f64,
    stats: &mut FwStats,
) -> Result<(f64, bool)> {
    let hy = prob.h_star.value(y);
    if !hy.is_finite() {
        return Err(Error::OutsideDomain);
    }
    let kty = prob.k.adjoint_apply(y);
    match prob.f.as_ref() {
        SmoothPart::Linear { c } => {
            let dir = c.add(&kty);
            let atom = prob.lmo.minimize(&dir);
            stats.lmo_calls += 1;
            Ok((dir.dot(&atom.point) - hy, true))
        }
        SmoothPart::IsoQuadratic { alpha, center } => {
            if let Some(xstar) = {
                let mut target = center.clone();
                target.add_scaled(-1.0 / alpha, &kty);
                prob.lmo.quadratic_prox(&target)
            } {
                let val = prob.f.value(&xstar) + kty.dot(&xstar) - hy;
                Ok((val, true))
            } else {
                eval_dual_general(prob, &kty, hy, tol, stats)
            }
        }
        _ => eval_dual_general(prob, &kty, hy, tol, stats),
    }
}

/// Dual objective with the default certification tolerance.
pub fn eval_dual(prob: &SaddleProblem, y: &DenseVector) -> Result<(f64, bool)> {
    let mut stats = FwStats::default();
    eval_dual_with_tol(prob, y, 1e-9, &mut stats)
}

struct FPlusLinear<'a> {
    f: &'a SmoothPart,
    shift: DenseVector,
}

impl SmoothObjective for FPlusLinear<'_> {
    fn value(&self, x: &DenseVector) -> f64 {
        self.f.value(x) + self.shift.dot(x)
    }
    fn gradient(&self, x: &DenseVector) -> DenseVector {
        self.f.gradient(x).add(&self.shift)
    }
    fn lipschitz(&self) -> f64 {
        self.f.lipschitz()
    }
    fn curvature_along(&self, _x: &DenseVector, d: &DenseVector) -> Option<f64> {
        self.f.curvature_form(d)
    }
}

fn eval_dual_general(
    prob: &SaddleProblem,
    kty: &DenseVector,
    hy: f64,
    tol: f64,
    stats: &mut FwStats,
) -> Result<(f64, bool)> {
    let obj = FPlusLinear {
        f: prob.f.as_ref(),
        shift: kty.clone(),
    };
    stats.lmo_calls += 1;
    let x0 = ActiveSet::singleton(prob.lmo.minimize(kty));
    let cfg = FwConfig::default();
    let out = fw_until(x0, &obj, &prob.lmo, tol.max(1e-14), stats, &cfg);
    // certified lower bound: min_x >= value(x) - gap
    Ok((obj.value(out.x.point()) - out.gap - hy, false))
}

/// `||Ax - b||` for problems declared in the linearly constrained form.
pub fn infeasibility(prob: &SaddleProblem, x: &DenseVector) -> Result<f64> {
    let axb = prob.axb.as_ref().ok_or(Error::NotAxb)?;
    Ok(prob.k.apply(x).sub(&axb.b).norm())
}
