//! The five subcommands. Each fills a [`Summary`] and returns the error, if any,
//! that decides the exit status; [`execute`] writes the summary in every case.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sigma_flow::constructions::{
    build_neck, glue_and_quotient_unchecked, loglog_slope, profile_table, verify_positive, BubbleProfile, GlueReport,
    SphereChart,
};
use sigma_flow::flow::{self, FlowConfig, FlowRun, Termination, TraceRow};
use sigma_flow::functionals::{
    c_mt, c_s_sphere, energy_n_half, integral_sigma, quermass_const, quotient_functional, snapshot, sphere_quotient,
};
use sigma_flow::geometry::Geometry;
use sigma_flow::sampling::{admissible_zonal, ConeSampler};
use sigma_flow::scalar::sphere_volume;
use sigma_flow::symfun::{garding_gap, newton_maclaurin_gap, EigenvalueVector};
use sigma_flow::Error;

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, write_csv, Summary};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "SIGMA_FLOW_WORKERS";

pub const SUMMARY_FILE: &str = "summary.txt";

/// Fourier modes and amplitude of the random zonal fields in `verify`.
const ZONAL_MODES: usize = 4;
const ZONAL_AMPLITUDE: f64 = 0.4;
const MAX_DRAWS: usize = 100_000;

const QUERMASS_TOL: f64 = 1e-8;
const MT_TOL: f64 = 1e-6;
const SOBOLEV_TOL: f64 = 1e-8;
const SYMFUN_TOL: f64 = 1e-10;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Result of one invocation: the summary that was written and the exit status.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub exit_code: i32,
}

fn core_error(e: Error) -> CliError {
    match e {
        Error::Infeasible(_) | Error::Gluing { .. } => CliError::Infeasible(e.to_string()),
        Error::Stall { .. } | Error::ConeViolation { .. } | Error::MaxTime { .. } => CliError::Stall(e.to_string()),
        Error::Domain(_) | Error::DegenerateShear(_) => CliError::Config(e.to_string()),
    }
}

/// Loads the config, runs `command` and writes `summary.txt`, even on failure.
pub fn execute(command: Command, config: &Path, overrides: &Overrides) -> Invocation {
    let start = Instant::now();
    let mut summary = Summary::new();
    summary.set("command", command.name());
    summary.set("status", "running");
    summary.set("exit_code", "");
    summary.set("config", config.display());
    let loaded = RunConfig::from_file(command, config).map(|mut cfg| {
        if let Some(out) = &overrides.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        cfg
    });
    let out_dir = match &loaded {
        Ok(cfg) => cfg.output_dir.clone(),
        Err(_) => overrides.out.clone().unwrap_or_else(|| PathBuf::from("out")),
    };
    summary.set("output_dir", out_dir.display());
    let result = loaded.and_then(|cfg| {
        fs::create_dir_all(&cfg.output_dir)?;
        summary.set("seed", cfg.seed);
        dispatch(&cfg, &mut summary)
    });
    finish(&mut summary, &result, start);
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut exit_code = result.as_ref().err().map_or(0, CliError::exit_code);
    if fs::create_dir_all(&out_dir).and_then(|_| summary.write(&summary_path)).is_err() {
        eprintln!("cannot write {}", summary_path.display());
        exit_code = 1;
    }
    Invocation { summary, summary_path, exit_code }
}

fn finish(summary: &mut Summary, result: &Result<(), CliError>, start: Instant) {
    match result {
        Ok(()) => {
            summary.set("status", "ok");
            summary.set("exit_code", 0);
            summary.set("error.kind", "none");
            summary.set("error.message", "");
        }
        Err(e) => {
            summary.set("status", "error");
            summary.set("exit_code", e.exit_code());
            summary.set("error.kind", e.kind());
            summary.set("error.message", e);
        }
    }
    summary.num("wall_time_s", start.elapsed().as_secs_f64());
}

fn dispatch(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    match cfg.command {
        Command::Flow => cmd_flow(cfg, s),
        Command::Verify => cmd_verify(cfg, s),
        Command::Constants => cmd_constants(cfg, s),
        Command::Construct => cmd_construct(cfg, s),
        Command::Sweep => cmd_sweep(cfg, s),
    }
}

fn write_trace(path: &Path, run: &FlowRun) -> std::io::Result<()> {
    write_csv(path, &TraceRow::HEADER, run.trace.rows.iter().map(TraceRow::values))
}

fn write_final_profile(path: &Path, geom: &Geometry<f64>, run: &FlowRun) -> std::io::Result<()> {
    let st = &run.final_state;
    let rows = (0..geom.grid_size()).map(|i| [geom.nodes()[i], st.u()[i], st.data.log_ratio[i].exp()]);
    write_csv(path, &["x", "u", "sigma_ratio"], rows)
}

fn termination_name(t: &Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxTime => "max_time",
        Termination::Stalled(_) => "stalled",
    }
}

fn record_run(s: &mut Summary, prefix: &str, run: &FlowRun) {
    let d = &run.diagnostics;
    let st = &run.final_state;
    s.set(format!("{prefix}.termination"), termination_name(&run.termination));
    s.num(format!("{prefix}.t_final"), st.t);
    s.set(format!("{prefix}.steps"), st.steps);
    s.num(format!("{prefix}.final_residual"), st.residual);
    s.num(format!("{prefix}.r_kl"), st.data.log_r.exp());
    s.num(format!("{prefix}.limit_equation_error"), run.limit_equation_error());
    s.set(format!("{prefix}.conserved.name"), d.conserved_name);
    s.num(format!("{prefix}.conserved.initial"), d.conserved_initial);
    s.num(format!("{prefix}.conserved.max_drift"), d.conserved_max_drift);
    s.set(format!("{prefix}.tilde_f.violations"), d.tilde_f_violations);
    s.num(format!("{prefix}.tilde_f.max_increase"), d.max_tilde_f_increase);
    s.num(format!("{prefix}.dissipation.max_residual"), d.max_dissipation_residual);
    s.num(format!("{prefix}.dissipation.max_residual_amount"), d.max_dissipation_residual_amount);
    s.num(format!("{prefix}.evolution.max_residual"), d.max_evolution_residual);
    s.num(format!("{prefix}.quotient.max_increase"), d.max_quotient_increase);
    s.num(format!("{prefix}.min_ratio"), d.min_ratio);
    s.num(format!("{prefix}.max_grad_u"), d.max_grad_u);
    s.set(format!("{prefix}.rejected_steps"), d.rejected_steps);
    s.num(format!("{prefix}.final_cone_margin"), st.cone_margin);
}

fn cmd_flow(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    let geom = cfg.build_geometry()?;
    s.set("geometry.kind", geom.kind().name());
    s.set("geometry.n", geom.n());
    s.set("geometry.grid_size", geom.grid_size());
    s.set("flow.k", cfg.flow.k);
    s.set("flow.l", cfg.flow.l);
    s.num("flow.amplitude", cfg.amplitude);
    let u0 = cfg.initial_u(&geom, cfg.amplitude)?;
    let run = flow::run(&geom, &u0, &cfg.flow).map_err(|e| match e {
        Error::ConeViolation { .. } => CliError::Stall(format!("inadmissible initial data: {e}")),
        other => core_error(other),
    })?;
    record_run(s, "flow", &run);
    let trace = cfg.output_dir.join("trace.csv");
    let profile = cfg.output_dir.join("final_profile.csv");
    write_trace(&trace, &run)?;
    write_final_profile(&profile, &geom, &run)?;
    s.set("files.trace", trace.display());
    s.set("files.final_profile", profile.display());
    match run.error() {
        None => Ok(()),
        Some(e) => Err(core_error(e)),
    }
}

/// Running minimum of one inequality suite.
struct Suite {
    name: &'static str,
    samples: usize,
    min_margin: f64,
    tol: f64,
    witness: Option<Vec<[f64; 2]>>,
}

impl Suite {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { name, samples: 0, min_margin: f64::INFINITY, tol, witness: None }
    }

    fn add(&mut self, margin: f64, witness: impl FnOnce() -> Vec<[f64; 2]>) {
        self.samples += 1;
        if margin < self.min_margin {
            self.min_margin = margin;
            if margin < -self.tol {
                self.witness = Some(witness());
            }
        }
    }

    fn violated(&self) -> bool {
        self.min_margin < -self.tol
    }

    fn record(&self, s: &mut Summary) {
        s.set(format!("verify.{}.samples", self.name), self.samples);
        s.num(format!("verify.{}.min_margin", self.name), self.min_margin);
        s.num(format!("verify.{}.tolerance", self.name), self.tol);
        s.set(format!("verify.{}.violated", self.name), self.violated());
    }
}

fn profile_witness(geom: &Geometry<f64>, u: &[f64]) -> Vec<[f64; 2]> {
    geom.nodes().iter().zip(u).map(|(x, v)| [*x, *v]).collect()
}

fn draw(geom: &Geometry<f64>, sampler: &mut ConeSampler, k: usize) -> Result<Vec<f64>, CliError> {
    admissible_zonal(geom, sampler.rng(), k, ZONAL_MODES, ZONAL_AMPLITUDE, MAX_DRAWS)
        .ok_or_else(|| CliError::Stall(format!("no admissible Gamma_{k}^+ perturbation in {MAX_DRAWS} draws")))
}

fn quermass_suite(cfg: &RunConfig, k: usize, name: &'static str) -> Result<Suite, CliError> {
    let (n, l) = (4, 1);
    let geom = Geometry::<f64>::round_sphere(n, cfg.grid_size).map_err(core_error)?;
    let c = quermass_const::<f64>(n, k, l).map_err(core_error)?;
    let margin = |u: &[f64]| -> Result<f64, CliError> {
        let snap = snapshot(&geom, &geom.derivatives(u), k, l).map_err(core_error)?;
        Ok(c * snap.f[l].powf(1.0 / l as f64) - snap.f[k].powf(1.0 / k as f64))
    };
    let mut suite = Suite::new(name, QUERMASS_TOL);
    let zero = vec![0.0; geom.grid_size()];
    suite.add(-margin(&zero)?.abs(), || profile_witness(&geom, &zero));
    let mut sampler = ConeSampler::new(cfg.seed ^ (0x51 + k as u64), n, k);
    for _ in 0..cfg.samples {
        let u = draw(&geom, &mut sampler, k)?;
        suite.add(margin(&u)?, || profile_witness(&geom, &u));
    }
    Ok(suite)
}

fn moser_trudinger_suite(cfg: &RunConfig) -> Result<Suite, CliError> {
    let (n, k, l) = (4, 2, 0);
    let geom = Geometry::<f64>::round_sphere(n, cfg.grid_size).map_err(core_error)?;
    let cmt = c_mt::<f64>(n).map_err(core_error)?;
    let zero = vec![0.0; geom.grid_size()];
    let vol0 = integral_sigma(&geom, &geom.derivatives(&zero), 0);
    let margin = |u: &[f64]| -> Result<f64, CliError> {
        let vol = integral_sigma(&geom, &geom.derivatives(u), 0);
        let e = energy_n_half(&geom, u).map_err(core_error)?;
        Ok((n - 2 * l) as f64 * e - cmt * (vol.ln() - vol0.ln()))
    };
    let mut suite = Suite::new("moser_trudinger", MT_TOL);
    suite.add(-margin(&zero)?.abs(), || profile_witness(&geom, &zero));
    let mut sampler = ConeSampler::new(cfg.seed ^ 0x4d54, n, k);
    for _ in 0..cfg.samples {
        let u = draw(&geom, &mut sampler, k)?;
        suite.add(margin(&u)?, || profile_witness(&geom, &u));
    }
    Ok(suite)
}

fn sobolev_suite(cfg: &RunConfig, l: usize, name: &'static str) -> Result<Suite, CliError> {
    let (n, k) = (5, 2);
    let geom = Geometry::<f64>::round_sphere(n, cfg.grid_size).map_err(core_error)?;
    let target = sphere_quotient::<f64>(n, k, l).map_err(core_error)?;
    let margin = |u: &[f64]| -> Result<f64, CliError> {
        Ok(quotient_functional(&geom, &geom.derivatives(u), k, l).map_err(core_error)? / target - 1.0)
    };
    let mut suite = Suite::new(name, SOBOLEV_TOL);
    let zero = vec![0.0; geom.grid_size()];
    suite.add(-margin(&zero)?.abs(), || profile_witness(&geom, &zero));
    let mut sampler = ConeSampler::new(cfg.seed ^ (0x50 + l as u64), n, k);
    for _ in 0..cfg.samples {
        let u = draw(&geom, &mut sampler, k)?;
        suite.add(margin(&u)?, || profile_witness(&geom, &u));
    }
    Ok(suite)
}

/// Newton-MacLaurin and Garding on random cone spectra, `n in {4, 5}`, `k in {2, 3}`.
fn symfun_suites(cfg: &RunConfig) -> Result<(Suite, Suite), CliError> {
    let mut nm = Suite::new("newton_maclaurin", SYMFUN_TOL);
    let mut gd = Suite::new("garding", SYMFUN_TOL);
    let spectrum = |v: &[f64]| v.iter().enumerate().map(|(i, x)| [i as f64, *x]).collect::<Vec<_>>();
    for n in [4usize, 5] {
        for k in [2usize, 3] {
            let mut sampler = ConeSampler::new(cfg.seed ^ (100 * n + k) as u64, n, k);
            for _ in 0..cfg.samples {
                let (a, b) = (sampler.sample(), sampler.sample());
                let la = EigenvalueVector::new(a.clone()).map_err(core_error)?;
                let lb = EigenvalueVector::new(b.clone()).map_err(core_error)?;
                let scale = a.iter().chain(&b).fold(1.0f64, |m, x| m.max(x.abs())).powi(k as i32);
                for l in 0..k {
                    if l >= 1 {
                        let g = newton_maclaurin_gap(&la, k, l).map_err(core_error)? / scale;
                        nm.add(g, || spectrum(&a));
                    }
                    let g = garding_gap(&la, &lb, k, l).map_err(core_error)? / scale;
                    gd.add(g, || spectrum(&[a.as_slice(), b.as_slice()].concat()));
                }
            }
        }
    }
    Ok((nm, gd))
}

fn cmd_verify(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    s.set("verify.samples_per_suite", cfg.samples);
    s.set("verify.grid_size", cfg.grid_size);
    let (nm, gd) = symfun_suites(cfg)?;
    let suites = vec![
        quermass_suite(cfg, 2, "quermass_n4_k2_l1")?,
        quermass_suite(cfg, 3, "quermass_n4_k3_l1")?,
        moser_trudinger_suite(cfg)?,
        sobolev_suite(cfg, 0, "sobolev_n5_k2_l0")?,
        sobolev_suite(cfg, 1, "sobolev_n5_k2_l1")?,
        nm,
        gd,
    ];
    let mut violated = vec![];
    for suite in &suites {
        suite.record(s);
        if let Some(w) = &suite.witness {
            let path = cfg.output_dir.join(format!("witness_{}.csv", suite.name));
            write_csv(&path, &["x", "value"], w.iter().copied())?;
            s.set(format!("verify.{}.witness", suite.name), path.display());
            violated.push(format!("{} (witness {})", suite.name, path.display()));
        }
    }
    glued_margins(cfg, s)?;
    s.set("verify.violations", violated.len());
    if violated.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(violated.join(", ")))
    }
}

/// Sobolev-type margins of the glued test metrics. These metrics leave the cone
/// inside the bubble, so their margins are reported but never counted as violations.
fn glued_margins(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    let (n, k, l) = (5, 2, 1);
    let neck = build_neck(cfg.neck_epsilon, SphereChart, n, k).map_err(core_error)?;
    for &d in &cfg.deltas {
        let bubble = BubbleProfile::new(d, cfg.eps0).map_err(core_error)?;
        let rep = glue_and_quotient_unchecked(&neck, &bubble, l).map_err(core_error)?;
        let key = format!("verify.sobolev_glued.delta_{d}");
        s.num(format!("{key}.margin"), rep.quotient / rep.sphere_value - 1.0);
        s.set(format!("{key}.admissible"), rep.min_margin > 0.0);
    }
    Ok(())
}

fn cmd_constants(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    let (n, k, l) = (cfg.n, cfg.flow.k, cfg.flow.l);
    s.set("constants.n", n);
    s.set("constants.k", k);
    s.set("constants.l", l);
    let rows: Vec<(&str, sigma_flow::Result<f64>)> = vec![
        ("omega_n", Ok(sphere_volume::<f64>(n))),
        ("c_s_sphere", c_s_sphere::<f64>(n, k, l)),
        ("quermass", quermass_const::<f64>(n, k, l)),
        ("c_mt", c_mt::<f64>(n)),
    ];
    println!("{:<12} {:>26}", "constant", "value");
    for (name, v) in rows {
        match v {
            Ok(x) => {
                println!("{name:<12} {:>26}", fmt_f64(x));
                s.num(format!("constants.{name}"), x);
            }
            Err(e) => {
                println!("{name:<12} {:>26}  ({e})", "undefined");
                s.set(format!("constants.{name}"), "undefined");
                s.set(format!("constants.{name}.reason"), e);
            }
        }
    }
    Ok(())
}

fn write_profile(path: &Path, table: Vec<[f64; 4]>) -> std::io::Result<()> {
    write_csv(path, &["r", "u", "alpha", "sigma_k_margin"], table)
}

fn cmd_construct(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    let (n, k, l) = (cfg.n, cfg.flow.k, cfg.flow.l);
    let grid = cfg.profile_grid;
    s.set("construct.n", n);
    s.set("construct.k", k);
    s.set("construct.l", l);
    s.num("construct.eps0", cfg.eps0);
    s.num("construct.neck.epsilon", cfg.neck_epsilon);
    let neck = build_neck(cfg.neck_epsilon, SphereChart, n, k).map_err(core_error)?;
    let (neck_min, neck_at) = verify_positive(&neck, n, k, grid).map_err(core_error)?;
    for (key, v) in [("delta", neck.delta), ("a", neck.a), ("r0", neck.r0), ("r1", neck.r1), ("r2", neck.r2), ("r3", neck.r3)] {
        s.num(format!("construct.neck.{key}"), v);
    }
    s.num("construct.neck.min_sigma_k", neck_min);
    s.num("construct.neck.argmin_r", neck_at);
    let neck_path = cfg.output_dir.join("neck.csv");
    write_profile(&neck_path, profile_table(&neck, n, k, grid).map_err(core_error)?)?;
    s.set("files.neck", neck_path.display());

    let mut reports: Vec<(f64, f64, f64, f64, GlueReport)> = vec![];
    let mut failures = vec![];
    if neck_min <= 0.0 {
        failures.push(format!("neck sigma_{k} = {neck_min:e} at r = {neck_at:e}"));
    }
    for &d in &cfg.deltas {
        let bubble = BubbleProfile::new(d, cfg.eps0).map_err(core_error)?;
        let (bmin, bat) = verify_positive(&bubble, n, k, grid).map_err(core_error)?;
        let (vol, sig) = bubble.bounds(n, k).map_err(core_error)?;
        let rep = glue_and_quotient_unchecked(&neck, &bubble, l).map_err(core_error)?;
        let key = format!("construct.delta_{d}");
        s.num(format!("{key}.bubble.min_sigma_k"), bmin);
        s.num(format!("{key}.bubble.argmin_r"), bat);
        s.num(format!("{key}.glued.min_sigma_k"), rep.min_margin);
        s.num(format!("{key}.glued.quotient"), rep.quotient);
        let path = cfg.output_dir.join(format!("bubble_delta_{d}.csv"));
        write_profile(&path, profile_table(&bubble, n, k, grid).map_err(core_error)?)?;
        s.set(format!("files.bubble_delta_{d}"), path.display());
        if bmin <= 0.0 {
            failures.push(format!("bubble delta={d}: sigma_{k} = {bmin:e} at r = {bat:e}"));
        }
        if rep.min_margin <= 0.0 {
            failures.push(format!("glued delta={d}: sigma_{k} = {:e} at r = {:e}", rep.min_margin, rep.argmin_r));
        }
        reports.push((d, vol, sig, bmin, rep));
    }
    let table = reports.iter().map(|(d, vol, sig, bmin, r)| {
        [*d, *vol, *sig, *bmin, r.int_k, r.int_l, r.quotient, r.sphere_value, r.relative_gap(), r.min_margin]
    });
    let qpath = cfg.output_dir.join("quotients.csv");
    write_csv(
        &qpath,
        &[
            "delta",
            "bubble_volume",
            "bubble_int_sigma_k",
            "bubble_min_sigma_k",
            "glued_int_sigma_k",
            "glued_int_sigma_l",
            "quotient",
            "sphere_quotient",
            "relative_gap",
            "glued_min_sigma_k",
        ],
        table,
    )?;
    s.set("files.quotients", qpath.display());

    let deltas: Vec<f64> = reports.iter().map(|r| r.0).collect();
    let vols: Vec<f64> = reports.iter().map(|r| r.1).collect();
    let sigs: Vec<f64> = reports.iter().map(|r| r.2).collect();
    let quots: Vec<f64> = reports.iter().map(|r| r.4.quotient).collect();
    let (nf, kf) = (n as f64, k as f64);
    if deltas.len() >= 2 {
        s.num("construct.bubble.volume_slope", loglog_slope(&deltas, &vols));
        s.num("construct.bubble.sigma_slope", loglog_slope(&deltas, &sigs));
    }
    s.num("construct.bubble.volume_slope_expected", -2.0 * nf / (1.0 - cfg.eps0));
    s.num("construct.bubble.sigma_slope_expected", -2.0 * (nf - 2.0 * kf) / (1.0 - cfg.eps0));
    s.num("construct.sphere_quotient", sphere_quotient::<f64>(n, k, l).map_err(core_error)?);
    // quotient should fall toward the sphere value as delta shrinks
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].total_cmp(&deltas[a]));
    let monotone = order.windows(2).all(|w| quots[w[1]] <= quots[w[0]]);
    s.set("construct.quotients.monotone_decreasing", monotone);
    s.set("construct.positive", failures.is_empty());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Infeasible(failures.join("; ")))
    }
}

/// Worker count from [`WORKERS_ENV`]; `None` lets rayon decide.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(w) => Ok(Some(w)),
            Err(_) => Err(CliError::Config(format!("{WORKERS_ENV} must be a non-negative integer, got `{v}`"))),
        },
    }
}

struct RowResult {
    status: f64,
    run: Option<FlowRun>,
    message: String,
}

/// Row status codes in `sweep.csv`.
const ROW_CONVERGED: f64 = 0.0;
const ROW_MAX_TIME: f64 = 1.0;
const ROW_STALLED: f64 = 2.0;
const ROW_FAILED: f64 = 3.0;

fn sweep_row(cfg: &RunConfig, i: usize) -> RowResult {
    let row = cfg.sweep_rows[i];
    let attempt = || -> Result<FlowRun, CliError> {
        let geom = cfg.geometry_with(row.grid)?;
        let u0 = cfg.initial_u(&geom, row.amplitude)?;
        let mut fc: FlowConfig = cfg.flow.clone();
        fc.k = row.k;
        fc.l = row.l;
        let run = flow::run(&geom, &u0, &fc).map_err(core_error)?;
        write_trace(&cfg.output_dir.join(format!("trace_row_{i}.csv")), &run)?;
        Ok(run)
    };
    match attempt() {
        Ok(run) => {
            let (status, message) = match &run.termination {
                Termination::Converged => (ROW_CONVERGED, String::new()),
                Termination::MaxTime => (ROW_MAX_TIME, run.error().map(|e| e.to_string()).unwrap_or_default()),
                Termination::Stalled(e) => (ROW_STALLED, e.to_string()),
            };
            RowResult { status, run: Some(run), message }
        }
        Err(e) => RowResult { status: ROW_FAILED, run: None, message: e.to_string() },
    }
}

fn cmd_sweep(cfg: &RunConfig, s: &mut Summary) -> Result<(), CliError> {
    let workers = workers_from_env()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<RowResult> = pool.install(|| (0..cfg.sweep_rows.len()).into_par_iter().map(|i| sweep_row(cfg, i)).collect());

    let nan = f64::NAN;
    let table = cfg.sweep_rows.iter().zip(&results).enumerate().map(|(i, (row, res))| {
        let (t, steps, resid, r, drift) = match &res.run {
            Some(run) => (
                run.final_state.t,
                run.final_state.steps as f64,
                run.final_state.residual,
                run.final_state.data.log_r.exp(),
                run.diagnostics.conserved_max_drift,
            ),
            None => (nan, nan, nan, nan, nan),
        };
        [i as f64, row.k as f64, row.l as f64, row.amplitude, row.grid as f64, res.status, t, steps, resid, r, drift]
    });
    let path = cfg.output_dir.join("sweep.csv");
    write_csv(
        &path,
        &["row", "k", "l", "amplitude", "grid", "status", "t_final", "steps", "final_residual", "r_kl", "conserved_drift"],
        table,
    )?;
    s.set("files.sweep", path.display());
    s.set("sweep.rows", results.len());
    let mut failed = vec![];
    for (i, res) in results.iter().enumerate() {
        let key = format!("sweep.row_{i}");
        let status = match res.status {
            x if x == ROW_CONVERGED => "converged",
            x if x == ROW_MAX_TIME => "max_time",
            x if x == ROW_STALLED => "stalled",
            _ => "failed",
        };
        s.set(format!("{key}.status"), status);
        if let Some(run) = &res.run {
            record_run(s, &key, run);
        }
        if !res.message.is_empty() {
            s.set(format!("{key}.message"), &res.message);
        }
        if res.status == ROW_FAILED {
            failed.push(format!("row {i}: {}", res.message));
        }
    }
    s.set("sweep.failed_rows", failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Stall(failed.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_keeps_witness_of_worst_violation() {
        let mut s = Suite::new("t", 1e-8);
        s.add(0.5, || vec![[0.0, 1.0]]);
        assert!(!s.violated() && s.witness.is_none());
        s.add(-1e-9, || vec![[0.0, 2.0]]);
        assert!(!s.violated() && s.witness.is_none());
        s.add(-1.0, || vec![[0.0, 3.0]]);
        s.add(-0.5, || vec![[0.0, 4.0]]);
        assert!(s.violated());
        assert_eq!(s.witness, Some(vec![[0.0, 3.0]]));
        assert_eq!(s.samples, 4);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(core_error(Error::Infeasible("x".into())).exit_code(), 5);
        assert_eq!(core_error(Error::Gluing { k: 2, r: 0.1, value: -1.0 }).exit_code(), 5);
        assert_eq!(core_error(Error::MaxTime { max_time: 1.0, residual: 1.0 }).exit_code(), 3);
        assert_eq!(core_error(Error::Domain("x".into())).exit_code(), 2);
    }
}
