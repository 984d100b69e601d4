//! Command line driver: convergence experiments, rising bubble benchmarks,
//! and custom runs. Exit codes: 0 success, 1 solver failure, 2 bad
//! configuration, 3 output failure.

use std::path::Path;
use std::process::ExitCode;
use tideflow::config::{parse_config, Command, RunConfig};
use tideflow::driver::{bubble_run, convergence_run};
use tideflow::error::Error;
use tideflow::output::{write_error_table, write_series_csv, write_vtk};
use tideflow::schemes::SchemeState;
use tideflow::verify::{ErrorReport, ExactCase};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match parse_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e @ Error::Io(_)) => {
            eprintln!("io error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("solver error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cfg: &RunConfig) -> tideflow::Result<()> {
    std::fs::create_dir_all(&cfg.outdir)?;
    match cfg.command {
        Command::Converge => converge(cfg, 0..=cfg.level),
        Command::Bubble => bubble(cfg),
        Command::Custom => converge(cfg, cfg.level..=cfg.level),
    }
}

fn maybe_vtk(vtk_every: usize, outdir: &Path, tag: &str, st: &SchemeState) {
    if vtk_every > 0 && st.index % vtk_every == 0 {
        let path = outdir.join(format!("{}_{:06}.vtk", tag, st.index));
        if let Err(e) = write_vtk(st, &path) {
            eprintln!("vtk write failed: {e}");
        }
    }
}

fn converge(cfg: &RunConfig, levels: std::ops::RangeInclusive<usize>) -> tideflow::Result<()> {
    let case = ExactCase::parse(&cfg.case)
        .ok_or_else(|| Error::Config(format!("unknown case '{}'", cfg.case)))?;
    let mut rows: Vec<(usize, ErrorReport)> = Vec::new();
    for level in levels {
        let vtk_every = cfg.vtk_every;
        let outdir = cfg.outdir.clone();
        let tag = format!("{}_{}_l{}", cfg.case, cfg.scheme.name(), level);
        let outcome = convergence_run(cfg, case, level, |st| {
            maybe_vtk(vtk_every, &outdir, &tag, st);
        })?;
        let r = &outcome.report;
        println!(
            "case {} scheme {} J_Gamma {}: interface {:.5e}, |u|_L2 {:.5e}, |u|_H1 {:.5e}, |p|_L2 {:.5e}, cpu {:.1}s",
            cfg.case,
            cfg.scheme.name(),
            outcome.j_gamma,
            r.interface_sup,
            r.velocity_l2,
            r.velocity_h1,
            r.pressure_l2,
            r.cpu_seconds
        );
        rows.push((outcome.j_gamma, outcome.report));
    }
    let path = cfg
        .outdir
        .join(format!("errors_{}_{}.csv", cfg.case, cfg.scheme.name()));
    write_error_table(&rows, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn bubble(cfg: &RunConfig) -> tideflow::Result<()> {
    let vtk_every = cfg.vtk_every;
    let outdir = cfg.outdir.clone();
    let tag = format!("bench{}_{}", cfg.bench, cfg.scheme.name());
    let outcome = bubble_run(cfg, |st| {
        maybe_vtk(vtk_every, &outdir, &tag, st);
    })?;
    let path = cfg.outdir.join(format!(
        "bench{}_{}_j{}.csv",
        cfg.bench,
        cfg.scheme.name(),
        cfg.j_gamma.unwrap_or(32)
    ));
    write_series_csv(&outcome.series.samples, &path)?;
    if let Some((vmax, tmax)) = outcome.series.max_rise_velocity() {
        println!("V_c max {vmax:.4} at t = {tmax:.3}");
    }
    if let Some((smin, tmin)) = outcome.series.min_sphericity() {
        println!("sphericity min {smin:.4} at t = {tmin:.3}");
    }
    if let Some(last) = outcome.series.samples.last() {
        println!(
            "z_c({:.3}) = {:.4}, relative area {:.5}, remeshes {}",
            last.t, last.z_c, last.rel_area, outcome.stats.remesh_events
        );
    }
    println!(
        "cpu {:.1}s over {} steps; wrote {}",
        outcome.stats.cpu_seconds,
        outcome.stats.steps,
        path.display()
    );
    Ok(())
}
