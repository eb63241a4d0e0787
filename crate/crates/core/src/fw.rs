//! Certified Frank-Wolfe inner solvers: FW gap, descent steps (vanilla,
//! away, blended with active-set re-optimization), the run-until-gap loop,
//! and good/bad step accounting.

use crate::error::{Error, Result};
use crate::problem::{Atom, DenseVector, LmoHandle};

/// Smooth function minimized over the polytope by the FW loops.
pub trait SmoothObjective {
    fn value(&self, x: &DenseVector) -> f64;
    fn gradient(&self, x: &DenseVector) -> DenseVector;
    fn lipschitz(&self) -> f64;
    /// Exact second derivative of `t -> value(x + t d)` for objectives that
    /// are quadratic along lines; `None` enables the step-size fallback.
    fn curvature_along(&self, _x: &DenseVector, d: &DenseVector) -> Option<f64> {
        let _ = d;
        None
    }
}

impl SmoothObjective for crate::problem::SmoothPart {
    fn value(&self, x: &DenseVector) -> f64 {
        crate::problem::SmoothPart::value(self, x)
    }
    fn gradient(&self, x: &DenseVector) -> DenseVector {
        crate::problem::SmoothPart::gradient(self, x)
    }
    fn lipschitz(&self) -> f64 {
        crate::problem::SmoothPart::lipschitz(self)
    }
    fn curvature_along(&self, _x: &DenseVector, d: &DenseVector) -> Option<f64> {
        self.curvature_form(d)
    }
}

/// Iterate stored as a convex combination of polytope vertices.
///
/// Invariants (restored after every mutation): weights nonnegative and
/// summing to one, no duplicate atom ids, cached point equal to the
/// weighted atom sum.
#[derive(Clone)]
pub struct ActiveSet {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
    point: DenseVector,
}

impl ActiveSet {
    pub fn singleton(atom: Atom) -> Self {
        let point = atom.point.clone();
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
            point,
        }
    }

    pub fn from_parts(atoms: Vec<Atom>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyVector("ActiveSet"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        for i in 0..atoms.len() {
            if weights[i] < 0.0 {
                return Err(Error::InvalidParam(format!(
                    "negative weight {} at atom {}",
                    weights[i], i
                )));
            }
            for j in (i + 1)..atoms.len() {
                if atoms[i].id == atoms[j].id {
                    return Err(Error::InvalidParam(format!(
                        "duplicate atom id {:?}",
                        atoms[i].id
                    )));
                }
            }
        }
        let mut set = Self {
            point: DenseVector::zeros(atoms[0].point.len()),
            atoms,
            weights,
        };
        set.renormalize();
        Ok(set)
    }

    pub fn point(&self) -> &DenseVector {
        &self.point
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn recomputed_point(&self) -> DenseVector {
        let mut p = DenseVector::zeros(self.point.len());
        for (w, a) in self.weights.iter().zip(self.atoms.iter()) {
            p.add_scaled(*w, &a.point);
        }
        p
    }

    fn renormalize(&mut self) {
        let sum: f64 = self.weights.iter().sum();
        assert!(sum > 0.0, "active set lost all mass");
        if (sum - 1.0).abs() > 1e-16 {
            for w in self.weights.iter_mut() {
                *w /= sum;
            }
        }
        self.point = self.recomputed_point();
    }

    /// Convex step towards `atom` with coefficient `t`; merges by id.
    /// Returns true when the atom was already active.
    pub fn merge_atom(&mut self, atom: Atom, t: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&t));
        for w in self.weights.iter_mut() {
            *w *= 1.0 - t;
        }
        let existing = self.atoms.iter().position(|a| a.id == atom.id);
        let dup = existing.is_some();
        match existing {
            Some(i) => self.weights[i] += t,
            None => {
                self.atoms.push(atom);
                self.weights.push(t);
            }
        }
        self.renormalize();
        dup
    }

    /// Away move `x <- x + t (x - a_idx)`; `t` must not exceed
    /// `w_idx / (1 - w_idx)`.
    pub fn away_move(&mut self, idx: usize, t: f64) {
        for w in self.weights.iter_mut() {
            *w *= 1.0 + t;
        }
        self.weights[idx] -= t;
        self.weights[idx] = self.weights[idx].max(0.0);
        self.renormalize();
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.weights.len());
        self.weights.copy_from_slice(weights);
        self.renormalize();
    }

    /// Remove atoms with weight below `tol`; returns how many were dropped.
    pub fn drop_small(&mut self, tol: f64) -> usize {
        if self.atoms.len() <= 1 {
            return 0;
        }
        let mut dropped = 0;
        let mut i = 0;
        while i < self.atoms.len() {
            if self.weights[i] < tol && self.atoms.len() > 1 {
                self.atoms.swap_remove(i);
                self.weights.swap_remove(i);
                dropped += 1;
            } else {
                i += 1;
            }
        }
        if dropped > 0 {
            self.renormalize();
        }
        dropped
    }

    /// Enforce the atom-count cap by dropping lowest-weight atoms first.
    pub fn cap_atoms(&mut self, max_atoms: usize) -> usize {
        let mut dropped = 0;
        while self.atoms.len() > max_atoms {
            let (idx, _) = self
                .weights
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            self.atoms.swap_remove(idx);
            self.weights.swap_remove(idx);
            dropped += 1;
        }
        if dropped > 0 {
            self.renormalize();
        }
        dropped
    }
}

/// Step and oracle counters for one solver run. Counts only ever increase.
#[derive(Clone, Copy, Debug, Default)]
pub struct FwStats {
    pub good_steps: u64,
    pub bad_steps: u64,
    pub lmo_calls: u64,
    /// step-size fallbacks taken because no exact 1-D curvature was available
    pub line_search_fallbacks: u64,
    /// inner loops that hit their iteration cap before certifying the gap
    pub cap_hits: u64,
    /// re-optimizations stopped by their iteration cap
    pub reopt_capped: u64,
    /// times the active-set size cap forced atom eviction
    pub atom_cap_hits: u64,
}

/// Which descent step the solver takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwVariant {
    /// plain FW step with line search
    Vanilla,
    /// FW step or away step, whichever direction is steeper
    AwaySteps,
    /// away-or-FW step followed by re-optimization over the active atoms;
    /// the away branch keeps the loop linearly convergent when the
    /// objective is nearly linear and the line search keeps clipping
    Blended,
}

#[derive(Clone, Debug)]
pub struct FwConfig {
    pub variant: FwVariant,
    /// atoms below this weight are removed after each step
    pub drop_tol: f64,
    pub max_atoms: usize,
    /// hard cap on steps per `fw_until` call; `None` derives one from the
    /// good-step bound with contraction 0.99
    pub max_iters: Option<u64>,
    /// check the entry gap before the first step (used for warm starts so an
    /// already-converged start costs one lmo call, not a full step)
    pub warm_start_check: bool,
    /// stop `fw_until` once the shared oracle counter reaches this value
    pub lmo_budget: Option<u64>,
    pub reopt_max_iters: u64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            variant: FwVariant::Blended,
            drop_tol: 1e-12,
            max_atoms: 500,
            max_iters: None,
            warm_start_check: false,
            lmo_budget: None,
            reopt_max_iters: 1000,
        }
    }
}

/// FW gap at `x`: `<grad, x - s>` with `s` the lmo vertex for the gradient.
/// Upper-bounds the primal suboptimality of `x`.
pub fn fw_gap(
    x: &ActiveSet,
    obj: &dyn SmoothObjective,
    lmo: &LmoHandle,
) -> (f64, Atom) {
    let g = obj.gradient(x.point());
    let s = lmo.minimize(&g);
    let gap = g.dot(x.point()) - g.dot(&s.point);
    (gap.max(0.0), s)
}

/// Active atom maximizing `<grad, a>` (ties by smallest id) and its away
/// gap `<grad, a - x>`.
pub fn away_step_direction(x: &ActiveSet, grad: &DenseVector) -> (Atom, f64) {
    let (idx, _) = away_atom_index(x, grad);
    let atom = x.atoms()[idx].clone();
    let gap = grad.dot(&atom.point) - grad.dot(x.point());
    (atom, gap.max(0.0))
}

fn away_atom_index(x: &ActiveSet, grad: &DenseVector) -> (usize, f64) {
    assert!(!x.is_empty());
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for (i, a) in x.atoms().iter().enumerate() {
        let v = grad.dot(&a.point);
        if v > best_val || (v == best_val && a.id < x.atoms()[best].id) {
            best_val = v;
            best = i;
        }
    }
    (best, best_val)
}

/// Euclidean projection onto the probability simplex by sort-and-threshold.
pub fn project_simplex(v: &DenseVector) -> Result<DenseVector> {
    if v.is_empty() {
        return Err(Error::EmptyVector("project_simplex"));
    }
    Ok(DenseVector::from_raw(project_simplex_slice(v.as_slice())))
}

pub(crate) fn project_simplex_slice(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut lambda = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let candidate = (1.0 - cum) / (j + 1) as f64;
        if uj + candidate > 0.0 {
            lambda = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x + lambda).max(0.0)).collect();
    // close the sum to 1 exactly by assigning the largest coordinate last
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for x in out.iter_mut() {
            *x /= sum;
        }
    }
    let imax = (0..n)
        .max_by(|&a, &b| out[a].partial_cmp(&out[b]).unwrap())
        .unwrap();
    let others: f64 = out
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(_, x)| x)
        .sum();
    out[imax] = 1.0 - others;
    out
}

/// Result of a weight re-optimization over the active atoms.
#[derive(Clone, Debug)]
pub struct ReoptResult {
    pub weights: Vec<f64>,
    /// upper bound on the restricted suboptimality of the returned weights
    /// (a certified iterate's FW gap bounds the suboptimality of every
    /// iterate with a value at least as good)
    pub restricted_gap: f64,
    pub capped: bool,
}

/// Re-optimize the objective over the convex hull of the active atoms with
/// an accelerated projected gradient loop (restarted), certified by the
/// restricted FW gap over the weight simplex. Never returns weights worse
/// than the input.
pub fn simplex_reopt(
    active: &ActiveSet,
    obj: &dyn SmoothObjective,
    tol: f64,
    max_iters: u64,
) -> ReoptResult {
    let m = active.len();
    if m == 1 {
        return ReoptResult {
            weights: vec![1.0],
            restricted_gap: 0.0,
            capped: false,
        };
    }
    let atoms = active.atoms();
    let dim = active.point().len();
    let combine = |w: &[f64]| -> DenseVector {
        let mut p = DenseVector::zeros(dim);
        for (wi, a) in w.iter().zip(atoms.iter()) {
            p.add_scaled(*wi, &a.point);
        }
        p
    };
    let phi = |w: &[f64]| obj.value(&combine(w));
    let phi_grad = |w: &[f64]| -> Vec<f64> {
        let g = obj.gradient(&combine(w));
        atoms.iter().map(|a| a.point.dot(&g)).collect()
    };
    let restricted_gap = |w: &[f64], g: &[f64]| -> f64 {
        let gw: f64 = w.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        (gw - gmin).max(0.0)
    };

    let mut w = active.weights().to_vec();
    let mut best_w = w.clone();
    let mut best_val = phi(&w);
    let mut y = w.clone();
    let mut t_momentum = 1.0_f64;
    // initial Lipschitz guess in weight space; backtracking adapts it
    let max_atom_sq = atoms
        .iter()
        .map(|a| a.point.norm_sq())
        .fold(0.0_f64, f64::max);
    let mut l_est = (obj.lipschitz() * max_atom_sq).max(1e-12);
    let mut capped = true;
    let mut gap_now = f64::INFINITY;
    for _ in 0..max_iters {
        let gy = phi_grad(&y);
        let phi_y = phi(&y);
        // backtracking proximal-gradient step from the extrapolated point
        let mut w_next;
        loop {
            let trial: Vec<f64> = y
                .iter()
                .zip(gy.iter())
                .map(|(yi, gi)| yi - gi / l_est)
                .collect();
            w_next = project_simplex_slice(&trial);
            let diff: Vec<f64> = w_next.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
            let dist_sq: f64 = diff.iter().map(|d| d * d).sum();
            let lin: f64 = gy.iter().zip(diff.iter()).map(|(g, d)| g * d).sum();
            let bound = phi_y + lin + 0.5 * l_est * dist_sq + 1e-15 * phi_y.abs().max(1.0);
            if phi(&w_next) <= bound || l_est > 1e18 {
                break;
            }
            l_est *= 2.0;
        }
        let val_next = phi(&w_next);
        // function restart keeps the momentum honest on non-strongly-convex
        // restrictions
        if val_next > phi(&w) {
            t_momentum = 1.0;
            y = w.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_momentum * t_momentum).sqrt());
        let beta = (t_momentum - 1.0) / t_next;
        y = w_next
            .iter()
            .zip(w.iter())
            .map(|(wn, wo)| wn + beta * (wn - wo))
            .collect();
        y = project_simplex_slice(&y);
        w = w_next;
        t_momentum = t_next;
        if val_next < best_val {
            best_val = val_next;
            best_w = w.clone();
        }
        let gw = phi_grad(&w);
        gap_now = restricted_gap(&w, &gw);
        if gap_now <= tol {
            capped = false;
            break;
        }
    }
    let best_gap = restricted_gap(&best_w, &phi_grad(&best_w));
    ReoptResult {
        weights: best_w,
        restricted_gap: best_gap.min(gap_now),
        capped,
    }
}

/// What one descent step did; feeds good/bad accounting.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    /// line search hit the unit step
    pub clipped: bool,
    /// atoms dropped to zero weight
    pub dropped: usize,
    pub good: bool,
}

/// One descent step (variant per config): lmo call, line search, optional
/// away branch or active-set re-optimization, drop and classification.
/// The objective value never increases.
pub fn fw_step(
    x: &mut ActiveSet,
    obj: &dyn SmoothObjective,
    lmo: &LmoHandle,
    stats: &mut FwStats,
    cfg: &FwConfig,
    reopt_tol: f64,
) -> StepReport {
    let g = obj.gradient(x.point());
    let s = lmo.minimize(&g);
    stats.lmo_calls += 1;
    fw_step_given(x, obj, &g, s, stats, cfg, reopt_tol)
}

/// Step with an externally computed gradient and lmo vertex (lets the
/// until-loop reuse the vertex from its gap check).
pub fn fw_step_given(
    x: &mut ActiveSet,
    obj: &dyn SmoothObjective,
    g: &DenseVector,
    s: Atom,
    stats: &mut FwStats,
    cfg: &FwConfig,
    reopt_tol: f64,
) -> StepReport {
    let k = stats.good_steps + stats.bad_steps;
    let value_before = obj.value(x.point());
    // atoms carrying mass at entry; losing any of them marks a bad step
    let entry_ids: Vec<crate::problem::AtomId> = x
        .atoms()
        .iter()
        .zip(x.weights())
        .filter(|(_, &w)| w >= cfg.drop_tol)
        .map(|(a, _)| a.id)
        .collect();
    let fw_dir = s.point.sub(x.point());
    let fw_slope = g.dot(&fw_dir); // <= 0 unless already optimal
    let fw_gap_val = (-fw_slope).max(0.0);

    let mut clipped = false;
    let mut took_away = false;

    let away_capable = matches!(cfg.variant, FwVariant::AwaySteps | FwVariant::Blended);
    if away_capable && x.len() >= 2 {
        let (aw_idx, _) = away_atom_index(x, g);
        let aw_atom_point = x.atoms()[aw_idx].point.clone();
        let away_gap = g.dot(&aw_atom_point) - g.dot(x.point());
        if away_gap > fw_gap_val {
            let d = x.point().sub(&aw_atom_point);
            let w_a = x.weights()[aw_idx];
            let t_max = if w_a < 1.0 { w_a / (1.0 - w_a) } else { 1.0 };
            let slope = g.dot(&d); // = -away_gap < 0
            let t_star = step_size(obj, x.point(), &d, slope, t_max, k, stats);
            let hit_boundary = t_star >= t_max - 1e-15;
            x.away_move(aw_idx, t_star.min(t_max));
            took_away = true;
            clipped = hit_boundary;
        }
    }

    if !took_away {
        if fw_slope < 0.0 {
            let t_star = step_size(obj, x.point(), &fw_dir, fw_slope, 1.0, k, stats);
            clipped = t_star >= 1.0;
            x.merge_atom(s, t_star.min(1.0));
        } else if cfg.variant == FwVariant::Blended {
            // no strict FW descent direction; still merge the vertex with
            // zero mass so the re-optimization can use it
            x.merge_atom(s, 0.0);
        }
    } else if cfg.variant == FwVariant::Blended {
        // the lmo vertex is paid for; keep it available to the reopt
        x.merge_atom(s, 0.0);
    }

    if cfg.variant == FwVariant::Blended {
        let r = simplex_reopt(x, obj, reopt_tol, cfg.reopt_max_iters);
        if r.capped {
            stats.reopt_capped += 1;
        }
        x.set_weights(&r.weights);
    }

    x.drop_small(cfg.drop_tol);
    if x.cap_atoms(cfg.max_atoms) > 0 {
        stats.atom_cap_hits += 1;
    }
    let dropped = entry_ids
        .iter()
        .filter(|id| !x.atoms().iter().any(|a| a.id == **id))
        .count();

    // monotone descent contract, checked in test builds
    let value_after = obj.value(x.point());
    debug_assert!(
        value_after <= value_before + 1e-9 * (1.0 + value_before.abs()),
        "descent violated: {value_before} -> {value_after}"
    );

    let good = !clipped && dropped == 0;
    if good {
        stats.good_steps += 1;
    } else {
        stats.bad_steps += 1;
    }
    StepReport {
        clipped,
        dropped,
        good,
    }
}

/// Exact line search via the 1-D quadratic restriction when curvature is
/// available; otherwise the 2/(k+2) fallback guarded to keep descent.
fn step_size(
    obj: &dyn SmoothObjective,
    x: &DenseVector,
    d: &DenseVector,
    slope: f64,
    t_max: f64,
    k: u64,
    stats: &mut FwStats,
) -> f64 {
    debug_assert!(slope <= 0.0);
    match obj.curvature_along(x, d) {
        Some(curv) if curv > 0.0 => (-slope / curv).min(t_max),
        Some(_) => t_max, // linear decrease along d: go to the boundary
        None => {
            stats.line_search_fallbacks += 1;
            let mut t = (2.0 / (k as f64 + 2.0)).min(t_max);
            let v0 = obj.value(x);
            for _ in 0..60 {
                let mut trial = x.clone();
                trial.add_scaled(t, d);
                if obj.value(&trial) <= v0 {
                    return t;
                }
                t *= 0.5;
            }
            0.0
        }
    }
}

/// Outcome of a `fw_until` call; `converged` means the returned gap
/// certificate holds, otherwise a cap or budget cut the loop short (the
/// flags say which).
#[derive(Clone)]
pub struct FwOutcome {
    pub x: ActiveSet,
    pub gap: f64,
    pub steps: u64,
    pub converged: bool,
    pub cap_hit: bool,
    pub budget_hit: bool,
}

/// Run FW steps until the FW gap is at most `eps` (step first, then test;
/// warm starts may check the entry gap first per config). On a cap or
/// budget stop the best-gap iterate is returned, flagged, never silently.
pub fn fw_until(
    x0: ActiveSet,
    obj: &dyn SmoothObjective,
    lmo: &LmoHandle,
    eps: f64,
    stats: &mut FwStats,
    cfg: &FwConfig,
) -> FwOutcome {
    assert!(eps > 0.0, "eps must be positive");
    let mut x = x0;
    // the gap is a difference of O(|value|) inner products; below the f64
    // resolution of that scale the certificate is unattainable noise
    let eps = eps.max(1e-13 * (1.0 + obj.value(x.point()).abs()));
    let (mut gap, mut s) = {
        let g = obj.gradient(x.point());
        let s = lmo.minimize(&g);
        stats.lmo_calls += 1;
        let gap = (g.dot(x.point()) - g.dot(&s.point)).max(0.0);
        (gap, (g, s))
    };
    if cfg.warm_start_check && gap <= eps {
        return FwOutcome {
            x,
            gap,
            steps: 0,
            converged: true,
            cap_hit: false,
            budget_hit: false,
        };
    }
    let cap = cfg
        .max_iters
        .unwrap_or_else(|| default_step_cap(gap, obj.lipschitz(), lmo.diameter_bound(), eps));
    let mut best_gap = gap;
    let mut best_x = x.clone();
    let mut steps = 0u64;
    loop {
        let (g, vertex) = s;
        let reopt_tol = 0.1 * eps;
        fw_step_given(&mut x, obj, &g, vertex, stats, cfg, reopt_tol);
        steps += 1;
        let g = obj.gradient(x.point());
        let vertex = lmo.minimize(&g);
        stats.lmo_calls += 1;
        gap = (g.dot(x.point()) - g.dot(&vertex.point)).max(0.0);
        if gap < best_gap {
            best_gap = gap;
            best_x = x.clone();
        }
        if gap <= eps {
            return FwOutcome {
                x,
                gap,
                steps,
                converged: true,
                cap_hit: false,
                budget_hit: false,
            };
        }
        let budget_hit = cfg.lmo_budget.is_some_and(|b| lmo.calls() >= b);
        if steps >= cap || budget_hit {
            stats.cap_hits += 1;
            return FwOutcome {
                x: best_x,
                gap: best_gap,
                steps,
                converged: false,
                cap_hit: steps >= cap,
                budget_hit,
            };
        }
        s = (g, vertex);
    }
}

/// Ten times the good-step bound at contraction 0.99, floored at 100 and
/// ceilinged at 50k (the formula explodes for tolerances near the f64
/// noise floor).
fn default_step_cap(gap0: f64, lipschitz: f64, diameter: f64, eps: f64) -> u64 {
    let l = lipschitz.max(1e-12);
    let d = diameter.max(1e-12);
    let floor_val = (0.5 * l * d * d).min((eps / d).powi(2) / (2.0 * l));
    let ratio = (gap0 / floor_val.max(f64::MIN_POSITIVE)).max(1.0);
    let bound = ratio.ln() / (1.0 / 0.99_f64).ln();
    ((10.0 * bound).ceil().max(100.0) as u64).min(50_000)
}
