//! Inexact primal-dual splitting: exact dual prox steps with over-relaxed
//! primal extrapolation, and FW-solved primal prox subproblems (strongly
//! convex, so the inner solver converges linearly).

use crate::appa::eval_dual_with_tol;
use crate::error::{Error, Result};
use crate::fw::{fw_gap, fw_until, ActiveSet, FwConfig, FwStats, SmoothObjective};
use crate::problem::{DenseVector, SaddleProblem, SmoothPart};

#[derive(Clone, Debug)]
pub struct PdConfig {
    pub tau: f64,
    pub sigma: f64,
    /// inner accuracies eps_n = scale * n^{-(2+delta)}
    pub delta: f64,
    /// `None`: use the first measured inner gap
    pub eps_scale: Option<f64>,
    pub fw: FwConfig,
}

impl PdConfig {
    /// Balanced steps `tau = sigma = 0.99 / L_K`.
    pub fn balanced(l_k: f64, delta: f64) -> Self {
        let step = if l_k > 0.0 { 0.99 / l_k } else { 1.0 };
        Self {
            tau: step,
            sigma: step,
            delta,
            eps_scale: None,
            fw: FwConfig {
                warm_start_check: true,
                ..FwConfig::default()
            },
        }
    }

    pub fn validate(&self, l_k: f64) -> Result<()> {
        if self.tau <= 0.0 || self.sigma <= 0.0 {
            return Err(Error::InvalidParam("tau and sigma must be positive".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidParam("delta must be positive".into()));
        }
        if self.sigma * self.tau * l_k * l_k > 1.0 - 1e-6 {
            return Err(Error::InvalidParam(format!(
                "step sizes violate sigma*tau*L_K^2 < 1 (margin 1e-6): {}",
                self.sigma * self.tau * l_k * l_k
            )));
        }
        Ok(())
    }

    pub fn eps(&self, scale: f64, n: u64) -> f64 {
        scale * (n as f64).powf(-(2.0 + self.delta))
    }
}

/// The primal prox subproblem `f(x) + ||x - center||²/(2 tau)` over `P`.
pub struct ProxStepObjective<'a> {
    pub f: &'a SmoothPart,
    pub center: DenseVector,
    pub tau: f64,
}

impl SmoothObjective for ProxStepObjective<'_> {
    fn value(&self, x: &DenseVector) -> f64 {
        self.f.value(x) + x.sub(&self.center).norm_sq() / (2.0 * self.tau)
    }

    fn gradient(&self, x: &DenseVector) -> DenseVector {
        let mut g = self.f.gradient(x);
        g.add_scaled(1.0 / self.tau, &x.sub(&self.center));
        g
    }

    fn lipschitz(&self) -> f64 {
        self.f.lipschitz() + 1.0 / self.tau
    }

    fn curvature_along(&self, _x: &DenseVector, d: &DenseVector) -> Option<f64> {
        Some(self.f.curvature_form(d)? + d.norm_sq() / self.tau)
    }
}

pub struct PdState {
    /// number of produced iterate pairs
    pub n: u64,
    pub x_active: ActiveSet,
    pub x_prev_point: DenseVector,
    pub y: DenseVector,
    pub x_erg: DenseVector,
    pub y_erg: DenseVector,
    pub x0_point: DenseVector,
    pub y0: DenseVector,
    /// running error sums: sum sqrt(2 tau eps_k) and sum tau eps_k
    pub a_sum: f64,
    pub b_sum: f64,
    eps_scale: Option<f64>,
    pub stats: FwStats,
    pub last_eps: f64,
    pub last_inner_gap: f64,
    pub last_inner_converged: bool,
}

/// Initialize with `x_{-1} = x_0` (a single lmo vertex) and `y_0` zero
/// projected into the domain of `h*`.
pub fn pd_init(prob: &SaddleProblem, cfg: &PdConfig) -> Result<PdState> {
    cfg.validate(prob.k.norm_bound())?;
    let mut stats = FwStats::default();
    let dir = match prob.f.as_ref() {
        SmoothPart::Linear { c } => c.clone(),
        _ => DenseVector::zeros(prob.lmo.dim()),
    };
    stats.lmo_calls += 1;
    let x_active = ActiveSet::singleton(prob.lmo.minimize(&dir));
    let zero = DenseVector::zeros(prob.h_star.dim());
    let y0 = if prob.h_star.value(&zero).is_finite() {
        zero
    } else {
        prob.h_star.prox(cfg.sigma, &zero)
    };
    let x0_point = x_active.point().clone();
    Ok(PdState {
        n: 0,
        x_prev_point: x0_point.clone(),
        x0_point,
        x_active,
        y: y0.clone(),
        x_erg: DenseVector::zeros(prob.lmo.dim()),
        y_erg: DenseVector::zeros(prob.h_star.dim()),
        y0,
        a_sum: 0.0,
        b_sum: 0.0,
        eps_scale: cfg.eps_scale,
        stats,
        last_eps: f64::NAN,
        last_inner_gap: f64::NAN,
        last_inner_converged: true,
    })
}

/// One iteration: exact dual prox at the extrapolated primal point
/// `2 x_n - x_{n-1}`, then the FW-solved primal prox step, then the
/// uniform ergodic averages.
pub fn pd_iterate(state: &mut PdState, prob: &SaddleProblem, cfg: &PdConfig) -> Result<()> {
    let n_next = state.n + 1;

    // y_{n+1} = prox_{sigma h*}(y_n + sigma K (2 x_n - x_{n-1}))
    let mut extrap = state.x_active.point().scaled(2.0);
    extrap.add_scaled(-1.0, &state.x_prev_point);
    let mut z = state.y.clone();
    z.add_scaled(cfg.sigma, &prob.k.apply(&extrap));
    let y_next = prob.h_star.prox(cfg.sigma, &z);

    // primal prox subproblem around x_n - tau K* y_{n+1}
    let mut center = state.x_active.point().clone();
    center.add_scaled(-cfg.tau, &prob.k.adjoint_apply(&y_next));
    let g_n = ProxStepObjective {
        f: prob.f.as_ref(),
        center,
        tau: cfg.tau,
    };
    let scale = match state.eps_scale {
        Some(s) => s,
        None => {
            let (gap0, _) = fw_gap(&state.x_active, &g_n, &prob.lmo);
            state.stats.lmo_calls += 1;
            let d = prob.lmo.diameter_bound();
            let fallback = (0.5 * g_n.lipschitz() * d * d).max(f64::MIN_POSITIVE);
            let s = if gap0 > 0.0 { gap0 } else { fallback };
            state.eps_scale = Some(s);
            s
        }
    };
    let eps_next = cfg.eps(scale, n_next);
    let x_start = state.x_active.clone();
    let inner = fw_until(x_start, &g_n, &prob.lmo, eps_next, &mut state.stats, &cfg.fw);

    state.x_prev_point = state.x_active.point().clone();
    state.x_active = inner.x;
    state.last_inner_gap = inner.gap;
    state.last_inner_converged = inner.converged;
    state.last_eps = eps_next;
    state.y = y_next;

    state.a_sum += (2.0 * cfg.tau * eps_next).sqrt();
    state.b_sum += cfg.tau * eps_next;

    // uniform running averages over the produced iterates
    let w = 1.0 / n_next as f64;
    state.x_erg.scale(1.0 - w);
    state.x_erg.add_scaled(w, state.x_active.point());
    state.y_erg.scale(1.0 - w);
    state.y_erg.add_scaled(w, &state.y);
    state.n = n_next;
    Ok(())
}

/// Primal objective `F(x) = f(x) + h(Kx)` via the closed-form conjugate of
/// `h*`; errors when no conjugate evaluation is available.
pub fn primal_value(prob: &SaddleProblem, x: &DenseVector) -> Result<f64> {
    let kx = prob.k.apply(x);
    let h = prob
        .h_star
        .conjugate_value(&kx)
        .ok_or(Error::GapNotComputable)?;
    Ok(prob.f.value(x) + h)
}

/// Primal-dual gap `F(x) - H(y)` when both sides are computable.
pub fn pd_gap(prob: &SaddleProblem, x: &DenseVector, y: &DenseVector) -> Result<f64> {
    let f = primal_value(prob, x)?;
    let mut stats = FwStats::default();
    let (h, _) = eval_dual_with_tol(prob, y, 1e-10, &mut stats)?;
    Ok(f - h)
}

/// Gap restricted to a caller-supplied comparison pair:
/// `L(x, y_cmp) - L(x_cmp, y)`.
pub fn pd_gap_restricted(
    prob: &SaddleProblem,
    x: &DenseVector,
    y: &DenseVector,
    x_cmp: &DenseVector,
    y_cmp: &DenseVector,
) -> Result<f64> {
    Ok(prob.lagrangian(x, y_cmp)? - prob.lagrangian(x_cmp, y)?)
}

/// Right-hand side of the ergodic gap certificate at iteration `n` for the
/// comparison pair: `(||x-x0||²/2τ + ||y-y0||²/2σ + diam(P)/τ·A_n + B_n/τ)/n`.
pub fn pd_certificate_rhs(
    state: &PdState,
    cfg: &PdConfig,
    prob: &SaddleProblem,
    x_cmp: &DenseVector,
    y_cmp: &DenseVector,
) -> f64 {
    let diam = prob.lmo.diameter_bound();
    (x_cmp.sub(&state.x0_point).norm_sq() / (2.0 * cfg.tau)
        + y_cmp.sub(&state.y0).norm_sq() / (2.0 * cfg.sigma)
        + diam / cfg.tau * state.a_sum
        + state.b_sum / cfg.tau)
        / state.n as f64
}
