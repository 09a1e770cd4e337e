// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Every command reads a [`RunConfig`], builds one
//! [`ResultTable`] and writes it as CSV plus an optional gnuplot script.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{Command, Method, RunConfig};
use crate::diag::{self, OracleConfig};
use crate::error::{Error, Result};
use crate::exact::{self, ExactOptions};
use crate::meq::{self, Generator, GeneratorKind};
use crate::model::{MultiBathSpec, SystemSpec};
use crate::moments::{MomentVector, SecondMoments};
use crate::ode::OdeOptions;
use crate::table::{write_outputs, PlotKind, ResultTable};

/// Overrides `output.dir` (the `--out` flag overrides both).
pub const OUT_DIR_ENV: &str = "COHERENCE_LAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "coherence-lab", version, about = "Exact and master-equation dynamics of two bosonic modes in structured baths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Moments F(t) for each configured method.
    Trajectory(CommonArgs),
    /// Moments over a detuning x time grid (omega_a fixed).
    SweepDetuning(CommonArgs),
    /// Late-time moments against detuning.
    SteadyState(CommonArgs),
    /// Poles of the exact propagator and perturbative decay rates.
    Poles(CommonArgs),
    /// BR stability margin over detuning and one scanned config key.
    StabilityMap(CommonArgs),
    /// Oracle cross-checks; exits nonzero if any check fails.
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (`section.key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CliCommand {
    fn parts(&self) -> (Command, &CommonArgs) {
        match self {
            CliCommand::Trajectory(a) => (Command::Trajectory, a),
            CliCommand::SweepDetuning(a) => (Command::SweepDetuning, a),
            CliCommand::SteadyState(a) => (Command::SteadyState, a),
            CliCommand::Poles(a) => (Command::Poles, a),
            CliCommand::StabilityMap(a) => (Command::StabilityMap, a),
            CliCommand::Validate(a) => (Command::Validate, a),
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub csv: PathBuf,
    pub plot: Option<PathBuf>,
    /// False if a validation check failed.
    pub passed: bool,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, common) = cli.command.parts();
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return 2;
        }
    }
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match run_file(&common.config, command, common.out.clone().or(env_dir)) {
        Ok(out) => {
            println!("wrote {}", out.csv.display());
            if let Some(p) = &out.plot {
                println!("wrote {}", p.display());
            }
            if out.passed {
                0
            } else {
                eprintln!("error: validation failed (see {})", out.csv.display());
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Loads `path` and runs `command`, writing into `out` or the configured
/// output directory.
pub fn run_file(path: &Path, command: Command, out: Option<PathBuf>) -> Result<RunOutput> {
    let mut cfg = RunConfig::load(path, Some(command))?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    run(&cfg)
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (table, plot, passed) = match cfg.task.command {
        Command::Trajectory => {
            let t = cmd_trajectory(cfg)?;
            let ys = plot_columns(&t, "re_F_ab");
            (t, PlotKind::Lines { x: "t".into(), ys }, true)
        }
        Command::SweepDetuning => {
            let t = cmd_sweep_detuning(cfg)?;
            let z = format!("{}_abs_F_ab", cfg.task.methods[0].name());
            (t, PlotKind::Map { x: "delta".into(), y: "t".into(), z }, true)
        }
        Command::SteadyState => {
            let t = cmd_steady_state(cfg)?;
            let ys = plot_columns(&t, "re_F_ab");
            (t, PlotKind::Lines { x: "delta".into(), ys }, true)
        }
        Command::Poles => {
            let t = cmd_poles(cfg)?;
            (t, PlotKind::Lines { x: "delta".into(), ys: vec!["minus_im".into()] }, true)
        }
        Command::StabilityMap => {
            let t = cmd_stability_map(cfg)?;
            let y = cfg.task.scan_key.clone().unwrap_or_default();
            (t, PlotKind::Map { x: "delta".into(), y, z: "margin".into() }, true)
        }
        Command::Validate => {
            let (t, ok) = cmd_validate(cfg)?;
            (t, PlotKind::Lines { x: "check".into(), ys: vec!["ratio".into()] }, ok)
        }
    };
    let stem = if cfg.output.name.is_empty() {
        cfg.task.command.name().to_owned()
    } else {
        cfg.output.name.clone()
    };
    let mut header = vec![
        format!("coherence-lab {}", env!("CARGO_PKG_VERSION")),
        format!("command: {}", cfg.task.command.name()),
        "config:".to_owned(),
    ];
    header.extend(cfg.to_text().lines().map(|l| format!("  {l}")));
    let title = format!("{} ({})", cfg.task.command.name(), stem);
    let plot_arg = cfg.output.plot.then_some((title.as_str(), &plot));
    let (csv, gp) = write_outputs(&table, &cfg.output.dir, &stem, &header, plot_arg)?;
    Ok(RunOutput {
        table,
        csv,
        plot: gp,
        passed,
    })
}

fn plot_columns(t: &ResultTable, suffix: &str) -> Vec<String> {
    t.columns.iter().filter(|c| c.ends_with(suffix)).cloned().collect()
}

const OBSERVABLES: [&str; 6] = ["F_aa", "F_bb", "re_F_ab", "im_F_ab", "abs_F_ab", "lambda_m"];

fn observable_columns(methods: &[Method]) -> Vec<String> {
    methods
        .iter()
        .flat_map(|m| OBSERVABLES.iter().map(move |o| format!("{}_{o}", m.name())))
        .collect()
}

fn observables(f: &SecondMoments) -> [f64; 6] {
    [f.f_aa, f.f_bb, f.f_ab.re, f.f_ab.im, f.f_ab.norm(), diag::min_eigen_f(f)]
}

fn exact_options(cfg: &RunConfig) -> ExactOptions {
    ExactOptions {
        max_dt: cfg.numerics.max_dt,
        ..ExactOptions::default()
    }
}

fn oracle_config(cfg: &RunConfig) -> OracleConfig {
    OracleConfig {
        modes: cfg.numerics.oracle_modes,
        nu_max: cfg.numerics.oracle_nu_max,
        n_max: cfg.numerics.fock_n_max,
        ode: OdeOptions {
            rtol: cfg.numerics.ode_rtol,
            atol: cfg.numerics.ode_atol,
            ..OdeOptions::default()
        },
        ..OracleConfig::default()
    }
}

fn single_bath_only(cfg: &RunConfig, what: &str) -> Result<()> {
    if cfg.is_multibath() {
        Err(Error::Unsupported(format!("{what} needs a single bath with the system couplings")))
    } else {
        Ok(())
    }
}

/// Generator of a master-equation method.
fn generator(cfg: &RunConfig, method: Method, sys: &SystemSpec, multi: &MultiBathSpec) -> Result<Generator> {
    let multi_kind = |kind| meq::multibath_generator(multi, sys, kind);
    match method {
        Method::Br => multi_kind(GeneratorKind::BR),
        Method::SpBr => multi_kind(GeneratorKind::SpBR),
        Method::Secular => meq::secularize(&multi_kind(GeneratorKind::BR)?),
        Method::Collective => {
            single_bath_only(cfg, "the collective generator")?;
            meq::collective_generator(sys, &multi.terms()[0].bath)
        }
        Method::Individual => {
            single_bath_only(cfg, "the individual generator")?;
            meq::individual_generator(sys, &multi.terms()[0].bath)
        }
        other => Err(Error::Unsupported(format!("`{}` is not a master-equation method", other.name()))),
    }
}

fn method_trajectory(cfg: &RunConfig, method: Method, sys: &SystemSpec, times: &[f64]) -> Result<Vec<SecondMoments>> {
    let multi = cfg.multibath(sys)?;
    match method {
        Method::Exact => exact::exact_moments_with(&multi, sys, times, &exact_options(cfg)),
        Method::DiscretizedOracle => diag::discretized_bath_oracle_multibath(&multi, sys, &oracle_config(cfg), times),
        Method::FockOracle => {
            single_bath_only(cfg, "the Fock oracle")?;
            diag::fock_oracle(sys, &multi.terms()[0].bath, &oracle_config(cfg), times)
        }
        _ => {
            let g = generator(cfg, method, sys, &multi)?;
            let ev = meq::evolve(&g, &MomentVector::default(), times)?;
            Ok(ev.states.iter().map(SecondMoments::from_vector).collect())
        }
    }
}

fn with_context<T>(r: Result<T>, method: Method, sys: &SystemSpec) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } | Error::Io { .. } => e,
        other => Error::Domain(format!(
            "method `{}` at omega_a = {}, omega_b = {}: {other}",
            method.name(),
            sys.omega_a,
            sys.omega_b
        )),
    })
}

fn grid(cfg: &RunConfig, which: &str) -> Vec<f64> {
    let g = match which {
        "times" => &cfg.task.times,
        "detunings" => &cfg.task.detunings,
        _ => &cfg.task.scan_values,
    };
    g.as_ref().map(|g| g.values()).unwrap_or_default()
}

/// System with `omega_a` from the config and `omega_b = omega_a - 2 delta`.
fn detuned(sys: &SystemSpec, delta: f64) -> Result<SystemSpec> {
    SystemSpec::new(sys.omega_a, sys.omega_a - 2.0 * delta, sys.phi_a, sys.phi_b)
}

pub fn cmd_trajectory(cfg: &RunConfig) -> Result<ResultTable> {
    let sys = cfg.system_spec()?;
    let times = grid(cfg, "times");
    let mut columns = vec!["t".to_owned()];
    columns.extend(observable_columns(&cfg.task.methods));
    let mut table = ResultTable::new(columns);
    let per_method: Vec<Vec<SecondMoments>> = cfg
        .task
        .methods
        .iter()
        .map(|&m| with_context(method_trajectory(cfg, m, &sys, &times), m, &sys))
        .collect::<Result<_>>()?;
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![*t];
        for traj in &per_method {
            row.extend(observables(&traj[k]));
        }
        table.push(row)?;
    }
    Ok(table)
}

pub fn cmd_sweep_detuning(cfg: &RunConfig) -> Result<ResultTable> {
    let base = cfg.system_spec()?;
    let times = grid(cfg, "times");
    let deltas = grid(cfg, "detunings");
    let mut columns = vec!["delta".to_owned(), "t".to_owned()];
    columns.extend(observable_columns(&cfg.task.methods));
    let blocks: Vec<Vec<Vec<f64>>> = deltas
        .par_iter()
        .map(|&d| -> Result<Vec<Vec<f64>>> {
            let sys = detuned(&base, d)?;
            let per_method: Vec<Vec<SecondMoments>> = cfg
                .task
                .methods
                .iter()
                .map(|&m| with_context(method_trajectory(cfg, m, &sys, &times), m, &sys))
                .collect::<Result<_>>()?;
            Ok(times
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let mut row = vec![d, *t];
                    for traj in &per_method {
                        row.extend(observables(&traj[k]));
                    }
                    row
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(columns);
    for row in blocks.into_iter().flatten() {
        table.push(row)?;
    }
    Ok(table)
}

pub fn cmd_steady_state(cfg: &RunConfig) -> Result<ResultTable> {
    let base = cfg.system_spec()?;
    for m in &cfg.task.methods {
        if matches!(m, Method::DiscretizedOracle | Method::FockOracle) {
            return Err(Error::config(
                None,
                Some("task.methods"),
                format!("`{}` has no steady state; remove it for steady-state runs", m.name()),
            ));
        }
    }
    let mut columns = vec!["delta".to_owned()];
    columns.extend(observable_columns(&cfg.task.methods));
    let deltas = grid(cfg, "detunings");
    let rows: Vec<(Vec<f64>, Vec<String>)> = deltas
        .par_iter()
        .map(|&d| -> Result<(Vec<f64>, Vec<String>)> {
            let sys = detuned(&base, d)?;
            let multi = cfg.multibath(&sys)?;
            let mut row = vec![d];
            let mut notes = Vec::new();
            for &m in &cfg.task.methods {
                let r = match m {
                    Method::Exact => exact::exact_steady_state_multibath(&multi, &sys),
                    _ => generator(cfg, m, &sys, &multi)
                        .and_then(|g| meq::steady_state(&g))
                        .map(|v| SecondMoments::from_vector(&v)),
                };
                match r {
                    Ok(f) => row.extend(observables(&f)),
                    Err(Error::NoSteadyState(why)) => {
                        notes.push(format!("{} at delta = {d}: NaN, no steady state ({why})", m.name()));
                        row.extend([f64::NAN; 6]);
                    }
                    Err(e) => return with_context(Err(e), m, &sys),
                }
            }
            Ok((row, notes))
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(columns);
    for (row, notes) in rows {
        table.push(row)?;
        for n in notes {
            table.note(n);
        }
    }
    Ok(table)
}

pub fn cmd_poles(cfg: &RunConfig) -> Result<ResultTable> {
    let base = cfg.system_spec()?;
    let columns = ["delta", "pole", "re", "im", "minus_im", "residual", "perturbative_rate", "br_mu0", "spbr_mu0"];
    let mut table = ResultTable::new(columns.iter().map(|s| s.to_string()).collect());
    let single = !cfg.is_multibath();
    if !single {
        table.note("perturbative rates are single-bath formulas: NaN for multi-bath runs");
    }
    let deltas = grid(cfg, "detunings");
    let blocks: Vec<Vec<Vec<f64>>> = deltas
        .par_iter()
        .map(|&d| -> Result<Vec<Vec<f64>>> {
            let sys = detuned(&base, d)?;
            let multi = cfg.multibath(&sys)?;
            let set = exact::find_poles_multibath(&multi, &sys)?;
            let (pr, br, sp) = if single {
                let bath = &multi.terms()[0].bath;
                (
                    exact::perturbative_pole_rate(&sys, bath)?,
                    meq::br_perturbative_rate(&sys, bath)?,
                    meq::spbr_perturbative_rate(&sys, bath)?,
                )
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            Ok(set
                .poles
                .iter()
                .enumerate()
                .map(|(k, p)| vec![d, k as f64, p.zeta.re, p.zeta.im, -p.zeta.im, p.residual, pr, br, sp])
                .collect())
        })
        .collect::<Result<_>>()?;
    for row in blocks.into_iter().flatten() {
        table.push(row)?;
    }
    Ok(table)
}

pub fn cmd_stability_map(cfg: &RunConfig) -> Result<ResultTable> {
    single_bath_only(cfg, "the stability map")?;
    let key = cfg.task.scan_key.clone().unwrap_or_default();
    let columns = vec![
        "delta".to_owned(),
        key.clone(),
        "margin".to_owned(),
        "min_re_mu".to_owned(),
        "markov_scale".to_owned(),
        "markov_flag".to_owned(),
        "min_lindblad_rate".to_owned(),
    ];
    let deltas = grid(cfg, "detunings");
    let values = grid(cfg, "scan");
    let points: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| values.iter().map(move |&v| (d, v))).collect();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(d, v)| -> Result<Vec<f64>> {
            let c = cfg.with_override(&key, v)?;
            let sys = detuned(&c.system_spec()?, d)?;
            let bath = c.bath()?;
            let g = meq::br_generator(&sys, &bath)?;
            let min_re = g.eigenvalues().iter().map(|z: &Complex64| z.re).fold(f64::INFINITY, f64::min);
            let rates = meq::lindblad_rates(&meq::kossakowski(&sys, &bath)?);
            let min_rate = rates.down[0].min(rates.up[0]);
            Ok(vec![
                d,
                v,
                meq::stability_margin(&sys, &bath)?,
                min_re,
                meq::markov_scale(&sys, &bath)?,
                if meq::markov_flag(&sys, &bath)? { 1.0 } else { 0.0 },
                min_rate,
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(columns);
    for r in rows {
        table.push(r)?;
    }
    Ok(table)
}

fn relative_error(a: &[SecondMoments], b: &[SecondMoments]) -> f64 {
    let comp = |m: &SecondMoments| [m.f_aa, m.f_bb, m.f_ab.re, m.f_ab.im];
    let mut worst = 0.0f64;
    for k in 0..4 {
        let scale = b.iter().map(|m| comp(m)[k].abs()).fold(0.0, f64::max);
        let diff = a.iter().zip(b).map(|(x, y)| (comp(x)[k] - comp(y)[k]).abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else {
            worst = worst.max(diff);
        }
    }
    worst
}

/// Checks: exact vs discretized bath, spectral vs convolution form,
/// Fock oracle vs BR moments (and their initial slope), SpBR sum rule.
pub fn cmd_validate(cfg: &RunConfig) -> Result<(ResultTable, bool)> {
    let sys = cfg.system_spec()?;
    let multi = cfg.multibath(&sys)?;
    let columns = ["check", "value", "tolerance", "ratio", "pass"];
    let mut table = ResultTable::new(columns.iter().map(|s| s.to_string()).collect());
    let mut all = true;
    let mut record = |table: &mut ResultTable, name: &str, value: f64, tol: f64| -> Result<()> {
        let pass = value <= tol;
        all &= pass;
        let k = table.rows.len();
        table.note(format!("check {k}: {name}"));
        table.push(vec![k as f64, value, tol, value / tol, if pass { 1.0 } else { 0.0 }])
    };
    let times = match &cfg.task.times {
        Some(g) => g.values().into_iter().filter(|t| *t <= 50.0).collect(),
        None => (0..=100).map(|k| k as f64 * 0.5).collect::<Vec<_>>(),
    };
    let ex = exact::exact_moments_with(&multi, &sys, &times, &exact_options(cfg))?;
    let or = diag::discretized_bath_oracle_multibath(&multi, &sys, &oracle_config(cfg), &times)?;
    record(&mut table, "exact vs discretized bath (max relative error)", relative_error(&ex, &or), cfg.numerics.tol_oracle)?;

    let mut worst = 0.0f64;
    let step = (times.len() / 4).max(1);
    for k in (step..times.len()).step_by(step) {
        let s = exact::exact_moments_spectral_multibath(&multi, &sys, times[k], &exact_options(cfg))?;
        let scale = ex[k].f_aa.abs().max(ex[k].f_bb.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(s.max_abs_diff(&ex[k]) / scale);
    }
    record(&mut table, "spectral vs convolution form (relative)", worst, cfg.numerics.tol_spectral)?;

    if !cfg.is_multibath() {
        let bath = &multi.terms()[0].bath;
        let g = meq::br_generator(&sys, bath)?;
        let ft: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let fock = diag::fock_oracle(&sys, bath, &oracle_config(cfg), &ft)?;
        let ev = meq::evolve(&g, &MomentVector::default(), &ft)?;
        let diff = fock
            .iter()
            .zip(&ev.states)
            .map(|(a, b)| a.max_abs_diff(&SecondMoments::from_vector(b)))
            .fold(0.0, f64::max);
        record(&mut table, "Fock oracle vs BR moments (absolute)", diff, cfg.numerics.tol_fock)?;
        let vacuum = [(0, 0, Complex64::new(1.0, 0.0))];
        let (_, df) = diag::fock_moment_derivative(&sys, bath, &oracle_config(cfg), &vacuum)?;
        let slope = (0..4).map(|k| (df.0[k] - g.f0[k]).abs()).fold(0.0, f64::max);
        record(&mut table, "Fock initial slope vs BR source (absolute)", slope, cfg.numerics.tol_fock)?;
        let sp = meq::spbr_generator(&sys, bath)?;
        let r = diag::sum_rule_residual(&sp, &sys).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        record(&mut table, "SpBR sum-rule residual", r, 1e-12)?;
    } else {
        table.note("Fock and sum-rule checks skipped: single-bath only");
    }
    Ok((table, all))
}
