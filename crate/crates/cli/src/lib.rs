//! Batch front end for `chainbell`.
//!
//! Exit codes: 0 success or consistent verdict, 1 I/O failure, 2 bad
//! configuration, 3 contradictory verdict, 4 insufficient data,
//! 5 signaling detected.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chainbell::analysis::{check_extension, ExtensionClaim, Verdict};
use chainbell::chainedbell::{
    closed_form_i, equipartition_settings, minimize_i_over_n, write_figure3_csv, DEFAULT_N_MAX,
};
use chainbell::montecarlo::{
    estimate_i, fit_visibility, nonsignaling_test, phase_grid, run_trials, scan_phase,
    write_counts_csv, write_inequality_csv, write_scan_csv, RunConfig, SettingChoice,
};
use chainbell::spacetime::classify_timing;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod config;

use config::{ExperimentConfig, TimingSource};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::InsufficientData(_) => 4,
        }
    }
}

impl From<chainbell::Error> for CliError {
    fn from(e: chainbell::Error) -> Self {
        match e {
            chainbell::Error::InsufficientData(msg) => CliError::InsufficientData(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Non-error outcomes that still select a particular exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Contradictory,
    Signaling,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Contradictory => 3,
            Status::Signaling => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chainbell",
    version,
    about = "Chained Bell experiment simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured trial count (per pair or per phase point).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the trial engine.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frame times of both events and the resulting timing class.
    Timing,
    /// Run a chained-Bell experiment and estimate I(N).
    Simulate,
    /// Scan P(a=b) over a phase grid and fit the visibility.
    ScanPhase,
    /// I(N, pi) curves and their minima for several visibilities.
    Figure3 {
        /// Comma-separated visibilities.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.97, 0.99, 0.999, 1.0])]
        visibility: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
    },
    /// Test a claimed N-independent distance D against 3 I_min / 2.
    CheckExtension {
        #[arg(long = "d")]
        d: f64,
        #[arg(long)]
        visibility: f64,
        #[arg(long, default_value_t = PI)]
        theta: f64,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        /// Also write the verdict as a one-row CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Random-setting run followed by the marginal z-tests.
    Nonsignaling,
}

fn load_config(global: &GlobalOpts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = global.trials {
        cfg.trials = trials;
    }
    if let Some(dir) = &global.out_dir {
        cfg.out_dir = dir.clone();
    }
    if global.workers.is_some() {
        cfg.workers = global.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    match &cli.command {
        Command::Timing => cmd_timing(&load_config(&cli.global)?, out),
        Command::Simulate => cmd_simulate(&load_config(&cli.global)?, out),
        Command::ScanPhase => cmd_scan_phase(&load_config(&cli.global)?, out),
        Command::Nonsignaling => cmd_nonsignaling(&load_config(&cli.global)?, out),
        Command::Figure3 { visibility, n_max } => {
            let dir = cli
                .global
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("."));
            cmd_figure3(visibility, *n_max, &dir, out)
        }
        Command::CheckExtension {
            d,
            visibility,
            theta,
            n_max,
            csv,
        } => cmd_check_extension(*d, *visibility, *theta, *n_max, csv.as_deref(), out),
    }
}

pub fn cmd_timing(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let TimingSource::Geometry(g) = cfg.timing_source()? else {
        return Err(CliError::Config(
            "the timing command needs the geometry keys alice_t, alice_x, bob_t, bob_x, beta_a, beta_b".into(),
        ));
    };
    let times = g.frame_times();
    writeln!(
        out,
        "alice frame (beta = {}): t_alice = {:.9}, t_bob = {:.9}",
        g.alice_frame().beta(),
        times.alice_frame.0,
        times.alice_frame.1
    )?;
    writeln!(
        out,
        "bob frame (beta = {}): t_alice = {:.9}, t_bob = {:.9}",
        g.bob_frame().beta(),
        times.bob_frame.0,
        times.bob_frame.1
    )?;
    let class = classify_timing(&g)?;
    let tie = if times.has_tie() {
        " (simultaneity tie)"
    } else {
        ""
    };
    writeln!(out, "timing class: {class}{tie}")?;
    Ok(Status::Ok)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let chained = cfg.chained_config()?;
    let settings = equipartition_settings(&chained, &cfg.interferometer()?)?;
    let model = cfg.model()?;
    let timing = cfg.timing_class()?;
    let mut run = RunConfig::new(cfg.trials, cfg.seed, cfg.setting_choice());
    run.workers = cfg.workers;
    let counts = run_trials(model.as_ref(), &settings, timing, &run)?;

    let mut w = create(&cfg.out_dir, "counts.csv")?;
    write_counts_csv(&mut w, &counts, &settings)?;
    w.flush()?;

    let report = estimate_i(&counts, &chained)?;
    let mut w = create(&cfg.out_dir, "inequality.csv")?;
    write_inequality_csv(&mut w, std::slice::from_ref(&report))?;
    w.flush()?;

    writeln!(out, "model: {}, timing: {timing}", model.name())?;
    writeln!(
        out,
        "N = {}, theta = {:.6}, V = {}",
        chained.n(),
        chained.theta(),
        chained.visibility()
    )?;
    writeln!(
        out,
        "I_hat = {:.6} ± {:.6} (closed form {:.6})",
        report.value,
        report.std_error,
        closed_form_i(&chained).value
    )?;
    writeln!(
        out,
        "violation: {}",
        if report.is_violation() { "yes" } else { "no" }
    )?;
    Ok(Status::Ok)
}

pub fn cmd_scan_phase(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let model = cfg.model()?;
    let timing = cfg.timing_class()?;
    if cfg.phase_points < chainbell::montecarlo::MIN_SCAN_POINTS {
        return Err(CliError::Config(format!(
            "key `phase_points`: {} points, need at least {}",
            cfg.phase_points,
            chainbell::montecarlo::MIN_SCAN_POINTS
        )));
    }
    let phases = phase_grid(cfg.phase_points);
    let scan = scan_phase(
        model.as_ref(),
        &phases,
        timing,
        cfg.trials,
        cfg.seed,
        cfg.workers,
    )?;
    let mut w = create(&cfg.out_dir, "phase_scan.csv")?;
    write_scan_csv(&mut w, &scan)?;
    w.flush()?;
    let fit = fit_visibility(&scan)?;
    writeln!(out, "V_hat = {:.6} ± {:.6}", fit.value, fit.std_error)?;
    Ok(Status::Ok)
}

pub fn cmd_figure3(
    visibilities: &[f64],
    n_max: usize,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<Status, CliError> {
    let mut minima = Vec::with_capacity(visibilities.len());
    for &v in visibilities {
        minima.push((v, minimize_i_over_n(v, PI, n_max)?));
    }
    for &v in visibilities {
        let mut w = create(dir, &format!("figure3_V{v}.csv"))?;
        write_figure3_csv(&mut w, v, n_max)?;
        w.flush()?;
    }
    let mut w = create(dir, "figure3_minima.csv")?;
    writeln!(w, "V,N_star,I_min,at_boundary")?;
    writeln!(out, "{:>8} {:>8} {:>10}", "V", "N*", "I_min")?;
    for (v, m) in &minima {
        writeln!(w, "{},{},{:.12},{}", v, m.n_star, m.i_min, m.at_boundary)?;
        let note = if m.at_boundary {
            "  (monotone: no interior minimum)"
        } else {
            ""
        };
        writeln!(out, "{:>8} {:>8} {:>10.4}{note}", v, m.n_star, m.i_min)?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

pub fn cmd_check_extension(
    d: f64,
    visibility: f64,
    theta: f64,
    n_max: usize,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Status, CliError> {
    let claim = ExtensionClaim::new(d, visibility, theta, n_max)?;
    let verdict = check_extension(&claim)?;
    writeln!(out, "{verdict}")?;
    if let Some(path) = csv {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", Verdict::CSV_HEADER)?;
        verdict.write_csv_row(&mut w)?;
        w.flush()?;
    }
    Ok(if verdict.contradictory {
        Status::Contradictory
    } else {
        Status::Ok
    })
}

pub fn cmd_nonsignaling(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let chained = cfg.chained_config()?;
    let settings = equipartition_settings(&chained, &cfg.interferometer()?)?;
    let model = cfg.model()?;
    let timing = cfg.timing_class()?;
    let mut run = RunConfig::new(cfg.trials, cfg.seed, SettingChoice::RandomUniform);
    run.workers = cfg.workers;
    let counts = run_trials(model.as_ref(), &settings, timing, &run)?;
    let report = nonsignaling_test(&counts, cfg.z_threshold)?;
    let mut w = create(&cfg.out_dir, "nonsignaling.txt")?;
    write!(w, "{report}")?;
    w.flush()?;
    writeln!(out, "model: {}, timing: {timing}", model.name())?;
    write!(out, "{report}")?;
    Ok(if report.passed() {
        Status::Ok
    } else {
        Status::Signaling
    })
}
