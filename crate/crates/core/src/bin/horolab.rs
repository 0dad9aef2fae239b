use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use horolab::lab::{self, ExperimentConfig, ExperimentKind, Format, GroupConfig, LabError};

#[derive(Parser)]
#[command(name = "horolab", version, about = "Patterson-Sullivan measures and horocycle averages on Schottky surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Word depth for the Patterson-Sullivan atoms
    #[arg(long)]
    depth: Option<usize>,
    /// Absolute quadrature tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the circle pairing
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// Print the critical exponent estimate
    Delta(Common),
    /// Write the atoms of the Patterson-Sullivan density seen from i
    PsMeasure(Common),
    /// Run one of the experiments: phi, thm1, translate, measures
    Experiment {
        kind: String,
        #[command(flatten)]
        common: Common,
    },
    /// Quick consistency checks
    Selftest,
}

#[derive(Subcommand)]
enum GroupAction {
    Info(Common),
}

fn group_config(c: &Common) -> Result<GroupConfig, LabError> {
    match &c.config {
        Some(p) => GroupConfig::parse(&lab::read_config(p)?),
        None => Err(LabError::Config("--config is required".into())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), LabError> {
    match out {
        Some(p) => lab::write_output(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn group_info(c: &Common) -> Result<(), LabError> {
    let cfg = group_config(c)?;
    let g = cfg.build()?;
    let mut s = format!("fingerprint: {}\n", cfg.fingerprint());
    s += &format!("rank: {}\n", g.rank());
    s += &format!("cusp: {}\n", g.has_cusp());
    s += &format!("delta: {}\n", g.delta());
    s += &format!("delta_spread: {}\n", g.delta_spread());
    s += &cfg.canonical();
    emit(c.out.as_deref(), &s)
}

fn delta(c: &Common) -> Result<(), LabError> {
    let mut cfg = group_config(c)?;
    if let Some(d) = c.depth {
        cfg.depth_delta = d;
    }
    let g = cfg.build()?;
    emit(c.out.as_deref(), &format!("{}\n", g.delta()))
}

fn ps_measure(c: &Common) -> Result<(), LabError> {
    let cfg = group_config(c)?;
    let format: Format = c.format.parse()?;
    let (csv, json) = lab::ps_measure_csv(&cfg, c.depth.unwrap_or(10), c.seed.unwrap_or(0))?;
    match (format, c.out.as_deref()) {
        (Format::Json, out) => emit(out, &format!("{json}\n")),
        (Format::Csv, Some(p)) => {
            lab::write_output(p, &csv)?;
            lab::write_output(&p.with_extension("json"), &format!("{json}\n"))
        }
        (Format::Csv, None) => emit(None, &csv),
    }
}

fn experiment(kind: &str, c: &Common) -> Result<(), LabError> {
    let kind: ExperimentKind = kind.parse()?;
    let format: Format = c.format.parse()?;
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::parse(&lab::read_config(p)?, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(d) = c.depth {
        cfg.depth = d;
    }
    if let Some(t) = c.tol {
        cfg.tol = t;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.check()?;
    let table = lab::run(&cfg)?;
    let text = match format {
        Format::Csv => lab::to_csv(&cfg, &table)?,
        Format::Json => lab::to_json(&cfg, &table) + "\n",
    };
    for n in &table.notes {
        eprintln!("note: {n}");
    }
    emit(cfg.out.as_deref(), &text)
}

fn selftest() -> Result<(), LabError> {
    let mut failed = 0;
    for (name, ok) in lab::selftest() {
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
        failed += (!ok) as usize;
    }
    if failed > 0 {
        return Err(LabError::Numeric(format!("{failed} selftest check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = lab::init_threads().and_then(|()| match &cli.command {
        Command::Group { action: GroupAction::Info(c) } => group_info(c),
        Command::Delta(c) => delta(c),
        Command::PsMeasure(c) => ps_measure(c),
        Command::Experiment { kind, common } => experiment(kind, common),
        Command::Selftest => selftest(),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("horolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
