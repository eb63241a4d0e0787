//! Drives one solver run from a config: builds the instance, loops the
//! outer iterations, logs one record per iteration, and summarizes.

use std::path::Path;
use std::time::Instant;

use fw_saddle::appa::{
    appa_init, appa_iterate, ergodic_dual, ergodic_primal, eval_dual_with_tol, infeasibility,
    AppaOptions,
};
use fw_saddle::mrf::decode_primal;
use fw_saddle::pd::{pd_init, pd_iterate, primal_value, PdConfig};
use fw_saddle::problem::{DenseVector, SaddleProblem};

use crate::config::{RunConfig, SolverKind};
use crate::fit::{fit_rate, last_half, FitField};
use crate::instance::{build_instance, BuiltProblem, InstanceFile};
use crate::runlog::{RunFlags, RunLog, RunRecord, Slopes, Summary};
use crate::{BenchError, Result};

pub struct RunOutput {
    pub log: RunLog,
    pub summary: Summary,
}

/// Load (or generate) the configured instance and run the solver.
/// Deterministic for a fixed config and seed up to the wall_ms column.
pub fn run(config: &RunConfig, base_dir: &Path) -> Result<RunOutput> {
    let source = config
        .instance
        .as_ref()
        .ok_or_else(|| BenchError::Config("config has no [instance] section".into()))?;
    let file = match (&source.file, &source.gen) {
        (Some(path), None) => InstanceFile::load(&base_dir.join(path)).map_err(|e| {
            BenchError::Instance(format!("failed to load instance '{path}': {e}"))
        })?,
        (None, Some(spec)) => crate::gen::generate_instance(spec)?,
        _ => {
            return Err(BenchError::Config(
                "instance needs exactly one of `file` or `gen`".into(),
            ))
        }
    };
    let built = build_instance(file)?;
    run_built(&built, config)
}

/// Run a solver against an already built problem.
pub fn run_built(built: &BuiltProblem, config: &RunConfig) -> Result<RunOutput> {
    match config.solver {
        SolverKind::Appa | SolverKind::Ppa => run_proximal(built, config),
        SolverKind::Pd => run_pd(built, config),
    }
}

fn primal_of(built: &BuiltProblem, x: &DenseVector) -> Result<f64> {
    match built {
        BuiltProblem::Mrf(m) => Ok(decode_primal(x, &m.mrf, &m.layout).1),
        BuiltProblem::Qp(p) => Ok(p.f.value(x)),
        BuiltProblem::Game(p) => Ok(primal_value(p, x)?),
    }
}

fn infeas_of(prob: &SaddleProblem, x: &DenseVector) -> Result<Option<f64>> {
    if prob.axb.is_some() {
        Ok(Some(infeasibility(prob, x)?))
    } else {
        Ok(None)
    }
}

fn run_proximal(built: &BuiltProblem, config: &RunConfig) -> Result<RunOutput> {
    let prob = built.problem();
    let calls_base = prob.lmo.calls();
    let mut opts = AppaOptions::new(
        config.gamma()?,
        config.t_schedule()?,
        config.eps_schedule.to_schedule()?,
    );
    opts.fw.lmo_budget = config.max_lmo_calls.map(|b| calls_base + b);
    let mut st = appa_init(prob, &opts)?;
    let start = Instant::now();
    let mut log = RunLog::default();
    let mut budget_hit = false;
    for _ in 0..config.max_outer_iters {
        if let Some(budget) = opts.fw.lmo_budget {
            if prob.lmo.calls() >= budget {
                budget_hit = true;
                break;
            }
        }
        appa_iterate(&mut st, prob, &opts)?;
        let (dual_h, dual_exact) = eval_dual_with_tol(prob, &st.y, 1e-9, &mut st.stats)?;
        let x_erg = ergodic_primal(&st);
        log.records.push(RunRecord {
            n: st.n,
            lmo_calls: prob.lmo.calls() - calls_base,
            t_n: st.t_last(),
            eps_n: st.last_eps,
            dual_h,
            dual_exact,
            primal: primal_of(built, &x_erg)?,
            gap: st.last_inner_gap,
            infeas: infeas_of(prob, &x_erg)?,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    if log.is_empty() {
        return Err(BenchError::Config(
            "run produced no iterations (check max_outer_iters / max_lmo_calls)".into(),
        ));
    }
    let (dual_erg, _) = eval_dual_with_tol(prob, &ergodic_dual(&st), 1e-9, &mut st.stats)?;
    let last = log.records.last().unwrap().clone();
    let flags = RunFlags {
        inner_cap_hits: st.stats.cap_hits,
        lmo_budget_hit: budget_hit,
        line_search_fallbacks: st.stats.line_search_fallbacks,
        reopt_capped: st.stats.reopt_capped,
        atom_cap_hits: st.stats.atom_cap_hits,
    };
    let summary = Summary {
        config: config.clone(),
        iterations: st.n,
        total_lmo_calls: prob.lmo.calls() - calls_base,
        good_steps: st.stats.good_steps,
        bad_steps: st.stats.bad_steps,
        initial_gap: st.gap0,
        final_dual: last.dual_h,
        final_dual_ergodic: dual_erg,
        dual_exact: last.dual_exact,
        final_primal: last.primal,
        final_infeas: last.infeas,
        slopes: fit_summary_slopes(&log, config),
        flags,
    };
    Ok(RunOutput { log, summary })
}

fn run_pd(built: &BuiltProblem, config: &RunConfig) -> Result<RunOutput> {
    let prob = built.problem();
    let calls_base = prob.lmo.calls();
    let l_k = prob.k.norm_bound();
    let mut cfg = PdConfig::balanced(l_k, config.eps_schedule.pd_delta()?);
    if let Some(pd) = &config.pd {
        if let Some(tau) = pd.tau {
            cfg.tau = tau;
        }
        if let Some(sigma) = pd.sigma {
            cfg.sigma = sigma;
        }
    }
    cfg.eps_scale = config.eps_schedule.scale;
    cfg.fw.lmo_budget = config.max_lmo_calls.map(|b| calls_base + b);
    let mut st = pd_init(prob, &cfg)?;
    let start = Instant::now();
    let mut log = RunLog::default();
    let mut budget_hit = false;
    let mut initial_gap = f64::NAN;
    for _ in 0..config.max_outer_iters {
        if let Some(budget) = cfg.fw.lmo_budget {
            if prob.lmo.calls() >= budget {
                budget_hit = true;
                break;
            }
        }
        pd_iterate(&mut st, prob, &cfg)?;
        if st.n == 1 {
            initial_gap = st.last_inner_gap.max(st.last_eps);
        }
        let (dual_h, dual_exact) = eval_dual_with_tol(prob, &st.y_erg, 1e-9, &mut st.stats)?;
        log.records.push(RunRecord {
            n: st.n,
            lmo_calls: prob.lmo.calls() - calls_base,
            t_n: 1.0,
            eps_n: st.last_eps,
            dual_h,
            dual_exact,
            primal: primal_of(built, &st.x_erg)?,
            gap: st.last_inner_gap,
            infeas: infeas_of(prob, &st.x_erg)?,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    if log.is_empty() {
        return Err(BenchError::Config(
            "run produced no iterations (check max_outer_iters / max_lmo_calls)".into(),
        ));
    }
    let last = log.records.last().unwrap().clone();
    let flags = RunFlags {
        inner_cap_hits: st.stats.cap_hits,
        lmo_budget_hit: budget_hit,
        line_search_fallbacks: st.stats.line_search_fallbacks,
        reopt_capped: st.stats.reopt_capped,
        atom_cap_hits: st.stats.atom_cap_hits,
    };
    let summary = Summary {
        config: config.clone(),
        iterations: st.n,
        total_lmo_calls: prob.lmo.calls() - calls_base,
        good_steps: st.stats.good_steps,
        bad_steps: st.stats.bad_steps,
        initial_gap,
        final_dual: last.dual_h,
        final_dual_ergodic: last.dual_h,
        dual_exact: last.dual_exact,
        final_primal: last.primal,
        final_infeas: last.infeas,
        slopes: fit_summary_slopes(&log, config),
        flags,
    };
    Ok(RunOutput { log, summary })
}

/// Best-effort slope fits over the last half when references are given.
fn fit_summary_slopes(log: &RunLog, config: &RunConfig) -> Option<Slopes> {
    let refs = config.reference?;
    let window = last_half(log);
    let mut slopes = Slopes::default();
    if let Some(dual_ref) = refs.dual {
        slopes.dual = fit_rate(log, FitField::DualH, window.clone(), dual_ref).ok();
    }
    if let Some(primal_ref) = refs.primal {
        slopes.primal = fit_rate(log, FitField::Primal, window.clone(), primal_ref).ok();
    }
    if log.records.iter().any(|r| r.infeas.is_some()) {
        slopes.infeas = fit_rate(log, FitField::Infeas, window, 0.0).ok();
    }
    Some(slopes)
}
