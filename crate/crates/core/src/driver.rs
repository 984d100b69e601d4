//! Run drivers shared by the CLI and the acceptance suite: set up a case,
//! run the configured scheme, and collect error reports or benchmark
//! series.

use crate::config::RunConfig;
use crate::error::Result;
use crate::geo::Vec2;
use crate::mesh::{build_fitted_topology, PhysParams};
use crate::mesher::{circle_polygon, generate_fitted, DomainSpec};
use crate::schemes::{bubble_problem, run, RunStats, SchemeConfig, SchemeState};
use crate::solver::SolverConfig;
use crate::verify::{BubbleSeries, ErrorAccumulator, ErrorReport, ExactCase};

pub fn scheme_config(cfg: &RunConfig, tau: f64, t_end: f64, domain: DomainSpec) -> SchemeConfig {
    SchemeConfig {
        scheme: cfg.scheme,
        tau,
        t_end,
        eps_fixed_point: cfg.eps_f,
        max_fixed_point: 50,
        solver: SolverConfig {
            rtol: cfg.rtol,
            restart: cfg.restart,
            max_iterations: cfg.maxit,
        },
        remesh_angle: cfg.c_a,
        lattice_factor: 1.0,
        domain,
    }
}

pub struct ConvergenceOutcome {
    pub j_gamma: usize,
    pub report: ErrorReport,
    pub stats: RunStats,
}

/// One convergence run of an exact case at a refinement level, with an
/// optional per-state hook (for output emission).
pub fn convergence_run(
    cfg: &RunConfig,
    case: ExactCase,
    level: usize,
    mut on_state: impl FnMut(&SchemeState),
) -> Result<ConvergenceOutcome> {
    let j_gamma = cfg.j_gamma.unwrap_or_else(|| RunConfig::j_gamma_for_level(level));
    let tau = cfg.tau.unwrap_or_else(|| RunConfig::tau_for_level(level));
    let t_end = cfg.t_end.unwrap_or(1.0);
    let h_char = cfg
        .h_char
        .unwrap_or(2.0 * std::f64::consts::PI * case.r0 / j_gamma as f64);
    let domain = case.domain(h_char);
    let gamma = circle_polygon(Vec2::ZERO, case.r0, j_gamma);
    let (tri, ids) = generate_fitted(&domain, &gamma)?;
    let fm = build_fitted_topology(tri, ids, &case.phys)?;
    // initial velocity: interpolant of the exact field
    let state = SchemeState::initial(fm, |p| case.velocity(p, 0.0))?;
    let problem = case.problem();
    let run_cfg = scheme_config(cfg, tau, t_end, domain);

    let mut acc = ErrorAccumulator::new(case, tau);
    let (_, stats) = run(state, &run_cfg, &problem, |st, _| {
        acc.add_state(st);
        on_state(st);
    })?;
    Ok(ConvergenceOutcome {
        j_gamma,
        report: acc.finish(stats.cpu_seconds),
        stats,
    })
}

pub fn bench_params(bench: usize) -> PhysParams {
    if bench == 1 {
        PhysParams {
            rho_plus: 1e3,
            rho_minus: 1e2,
            mu_plus: 10.0,
            mu_minus: 1.0,
            gamma: 24.5,
        }
    } else {
        PhysParams {
            rho_plus: 1e3,
            rho_minus: 1.0,
            mu_plus: 10.0,
            mu_minus: 0.1,
            gamma: 1.96,
        }
    }
}

pub struct BubbleOutcome {
    pub series: BubbleSeries,
    pub stats: RunStats,
}

/// One rising-bubble benchmark run with the per-step series collected.
pub fn bubble_run(
    cfg: &RunConfig,
    mut on_state: impl FnMut(&SchemeState),
) -> Result<BubbleOutcome> {
    let phys = bench_params(cfg.bench);
    let j_gamma = cfg.j_gamma.unwrap_or(32);
    let tau = cfg.tau.unwrap_or(1e-3);
    let t_end = cfg.t_end.unwrap_or(3.0);
    let r0 = 0.25;
    let h_char = cfg
        .h_char
        .unwrap_or(2.0 * std::f64::consts::PI * r0 / j_gamma as f64);
    let domain = DomainSpec::bench_column(h_char);
    let gamma = circle_polygon(Vec2::new(0.5, 0.5), r0, j_gamma);
    let (tri, ids) = generate_fitted(&domain, &gamma)?;
    let fm = build_fitted_topology(tri, ids, &phys)?;
    let state = SchemeState::initial(fm, |_| Vec2::ZERO)?;
    let problem = bubble_problem(phys);
    let run_cfg = scheme_config(cfg, tau, t_end, domain);

    let mut series = BubbleSeries::new();
    let (_, stats) = run(state, &run_cfg, &problem, |st, _| {
        series.add_state(st);
        on_state(st);
    })?;
    Ok(BubbleOutcome { series, stats })
}
