// SPDX-License-Identifier: MIT OR Apache-2.0

//! `maxem` command-line tool: segment a CSV file, choose the number of
//! segments, test for a single change, and run simulation studies.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maxem::data::CsvSchema;
use maxem::init::detect;
use maxem::lrtest::permutation_test;
use maxem::select::{bic, select_k};
use maxem::sim::{run_replicates, Method, Scenario};
use maxem::{load_csv, save_csv, Dataset, EmissionModel, InitMethod, LrOptions, Model, PipelineOptions};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "maxem", version, about = "Change-point detection in ordered regression data")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a K-segment model with max-EM.
    Fit(FitArgs),
    /// Choose the number of segments by BIC.
    Select(SelectArgs),
    /// Permutation test for a single change.
    Test(TestArgs),
    /// Write one simulated dataset.
    Simulate(SimulateArgs),
    /// Run a replicate study and report accuracy metrics.
    Replicate(ReplicateArgs),
}

#[derive(Args)]
struct Input {
    /// CSV file: response first (`time,status` for aft), covariates after.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: Model,
}

impl Input {
    fn load(&self) -> Result<Dataset> {
        let kind = EmissionModel::<f64>::response_kind(&self.model);
        load_csv(&self.input, &CsvSchema::positional(kind)).with_context(|| format!("reading {}", self.input.display()))
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    k: usize,
    /// bs, fl, or given:<i,j,..>
    #[arg(long, default_value = "bs", value_parser = parse_init)]
    init: InitMethod,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for uniformity; fitting involves no randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    #[arg(long, default_value = "bs", value_parser = parse_init)]
    init: InitMethod,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `K,BIC` rows here.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 199)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the statistic curve (`n1,statistic,regime`) here.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name or scenario TOML file.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Preset name or scenario TOML file.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 100)]
    j: usize,
    #[arg(long, default_value = "maxem-bs", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the full replicate count (J = 500).
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replicate results CSV.
    #[arg(long)]
    raw: Option<PathBuf>,
}

fn parse_model(s: &str) -> std::result::Result<Model, String> {
    s.parse().map_err(|e: maxem::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: maxem::Error| e.to_string())
}

fn parse_init(s: &str) -> std::result::Result<InitMethod, String> {
    match s {
        "bs" => Ok(InitMethod::Bs),
        "fl" => Ok(InitMethod::Fl),
        _ => {
            let list = s.strip_prefix("given:").ok_or_else(|| format!("unknown init `{s}` (bs, fl or given:<i,j,..>)"))?;
            list.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad breakpoint `{t}`: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(InitMethod::Given)
        }
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    breakpoints: Vec<usize>,
    theta_per_segment: Vec<Vec<f64>>,
    loglik: f64,
    bic: f64,
    iterations: usize,
    converged: bool,
    degenerate: bool,
    init_pool: Vec<usize>,
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let data = args.input.load()?;
    let model = args.input.model;
    let (fit, pool) = detect(&model, &data, args.k, &args.init, &PipelineOptions::default())?;
    let d = EmissionModel::<f64>::dim(&model, data.p());
    let report = FitReport {
        breakpoints: fit.segmentation.breakpoints().to_vec(),
        theta_per_segment: fit.thetas.clone(),
        loglik: fit.loglik,
        bic: bic(fit.loglik, d, args.k, data.n()),
        iterations: fit.iterations,
        converged: fit.converged,
        degenerate: fit.degenerate,
        init_pool: pool.breakpoints,
    };
    write_json(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct KRow {
    k: usize,
    bic: f64,
    loglik: f64,
    breakpoints: Vec<usize>,
    degenerate: bool,
}

#[derive(Serialize)]
struct SelectOutput {
    chosen_k: usize,
    table: Vec<KRow>,
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let data = args.input.load()?;
    let report = select_k(&args.input.model, &data, args.k_min..=args.k_max, &args.init, &PipelineOptions::default())?;
    let table: Vec<KRow> = report
        .fits
        .iter()
        .map(|f| KRow {
            k: f.k,
            bic: f.bic,
            loglik: f.fit.loglik,
            breakpoints: f.fit.segmentation.breakpoints().to_vec(),
            degenerate: f.fit.degenerate,
        })
        .collect();
    if let Some(path) = &args.curve {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["K", "BIC"])?;
        for row in &table {
            w.write_record([row.k.to_string(), row.bic.to_string()])?;
        }
        w.flush()?;
    }
    write_json(
        &SelectOutput {
            chosen_k: report.chosen_k,
            table,
        },
        args.out.as_deref(),
    )
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let data = args.input.load()?;
    let res = permutation_test(&args.input.model, &data, args.permutations, args.seed, &LrOptions::default())?;
    if let (Some(path), Some(curve)) = (&args.curve, &res.curve) {
        let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        curve.write_csv(file)?;
    }
    write_json(&res, args.out.as_deref())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let sim = Scenario::resolve(&args.preset)?.generate(args.seed)?;
    match &args.out {
        Some(path) => save_csv(&sim.data, path)?,
        None => maxem::write_csv(&sim.data, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_replicate(args: &ReplicateArgs) -> Result<()> {
    let scenario = Scenario::resolve(&args.preset)?;
    let j = if args.full_scale { 500 } else { args.j };
    if j == 0 {
        bail!("--j must be positive");
    }
    let run = run_replicates(&scenario, j, args.method, args.seed, &PipelineOptions::default())?;
    if let Some(path) = &args.raw {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["replicate", "breakpoints", "loglik"])?;
        for (r, e) in run.estimates.iter().enumerate() {
            let bps: Vec<String> = e.segmentation.breakpoints().iter().map(usize::to_string).collect();
            w.write_record([r.to_string(), bps.join(";"), e.loglik.to_string()])?;
        }
        w.flush()?;
    }
    write_json(&run.metrics, args.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Replicate(a) => cmd_replicate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MAXEM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
