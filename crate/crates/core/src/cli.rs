//! Command-line front end. Reports are JSON, tables and plot data are CSV.
//!
//! Exit codes: 0 success, 1 input or parse error, 2 configuration error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate, calibrate_series, BoundsPreset, CalibrationError, CalibrationResult, RollingPlan,
};
use crate::curve::{CurveParams, ModelKind, Tenor};
use crate::ga::{Bounds, GaConfig, GaError};
use crate::ingest::{
    bond_points, ois_to_term_structures, parse_bonds_csv, parse_ois_csv, IngestError, YieldSide,
};
use crate::objective::{residuals, TermStructure};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Config(_)
            | CalibrationError::Ga(GaError::Config(_) | GaError::Bounds(_)) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nssfit",
    version,
    about = "Fit Nelson-Siegel(-Svensson) curves with a genetic algorithm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one date of an OIS table.
    Calibrate(CalibrateArgs),
    /// Fit every date of an OIS table, warm-starting each day from the previous one.
    Roll(RollArgs),
    /// Sample spot and forward curves on a tenor grid.
    Eval(EvalArgs),
    /// Fit an NSS curve to bond yields.
    FitBonds(FitBondsArgs),
    /// Re-run the command recorded in a report from its configuration echo.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct GaArgs {
    /// Population size (multiple of 4).
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long, default_value_t = 3)]
    elite: usize,
    #[arg(long, default_value_t = 3)]
    tournament: usize,
    #[arg(long, default_value_t = 0.2)]
    mut_min: f64,
    #[arg(long, default_value_t = 0.5)]
    mut_max: f64,
    /// Winners handed from one run to the next.
    #[arg(long, default_value_t = 64)]
    returning: usize,
    #[arg(long, default_value_t = 50)]
    stagnation: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for fitness evaluation; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl GaArgs {
    fn config(&self, default_pop: usize, generations: usize) -> GaConfig {
        GaConfig {
            population_size: self.pop.unwrap_or(default_pop),
            max_generations: generations,
            elite_count: self.elite,
            tournament_size: self.tournament,
            mutation_rate_min: self.mut_min,
            mutation_rate_max: self.mut_max,
            returning_genes: self.returning,
            rng_seed: self.seed,
            stagnation_window: self.stagnation,
            blend_alpha: self.alpha,
        }
    }
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Date column to fit; defaults to the first.
    #[arg(long)]
    date: Option<NaiveDate>,
    #[arg(long, default_value = "nss")]
    model: ModelKind,
    /// Preset (`ois`, `ois-ns`, `usd`) or a JSON file of `[lower, upper]` pairs.
    #[arg(long, default_value = "ois")]
    bounds: String,
    #[arg(long, default_value_t = 5_000)]
    gens: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Debug, Args)]
struct RollArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "nss")]
    model: ModelKind,
    #[arg(long, default_value = "ois")]
    bounds: String,
    #[arg(long, default_value_t = 10_000)]
    gens_first: usize,
    #[arg(long, default_value_t = 1_000)]
    gens_next: usize,
    /// Winners carried to the next date; defaults to `--returning`.
    #[arg(long)]
    carry: Option<usize>,
    /// Also write a per-date parameter and error table as CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Parameters in gene order: 4 values for NS, 6 for NSS.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "report"
    )]
    params: Option<Vec<f64>>,
    /// Take parameters from a run report instead.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Record of the report to use.
    #[arg(long, default_value_t = 0)]
    record: usize,
    /// Explicit tenors in years.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["grid_from", "step"])]
    tenors: Option<Vec<f64>>,
    /// Use the term grid of an OIS table.
    #[arg(long, conflicts_with = "step")]
    grid_from: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    #[arg(long, default_value_t = 50.0)]
    end: f64,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitBondsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "2020-07-28")]
    as_of: NaiveDate,
    #[arg(long, default_value = "usd")]
    bounds: String,
    #[arg(long, value_enum, default_value = "mid")]
    side: SideArg,
    #[arg(long, default_value_t = 5_000)]
    gens: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SideArg {
    Bid,
    Mid,
}

impl From<SideArg> for YieldSide {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Bid => YieldSide::Bid,
            SideArg::Mid => YieldSide::Mid,
        }
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub model: ModelKind,
    pub bounds_name: String,
    pub bounds: Bounds,
    pub ga: GaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<RollingPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<YieldSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub date: NaiveDate,
    pub model: ModelKind,
    pub params: CurveParams,
    pub l2: f64,
    pub linf: f64,
    pub generations: usize,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondResidual {
    pub cusip: String,
    pub tenor_years: f64,
    pub market: f64,
    pub model: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub rng_seed: u64,
    pub config: ConfigEcho,
    pub records: Vec<ReportRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<BondResidual>>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let threads = match &cli.command {
        Command::Calibrate(a) => a.ga.threads,
        Command::Roll(a) => a.ga.threads,
        Command::FitBonds(a) => a.ga.threads,
        Command::Replay(a) => a.threads,
        Command::Eval(_) => None,
    };
    let mut buffer = Vec::new();
    let outcome = with_threads(threads, || {
        let out: &mut dyn Write = &mut buffer;
        match cli.command {
            Command::Calibrate(a) => cmd_calibrate(a, out),
            Command::Roll(a) => cmd_roll(a, out),
            Command::Eval(a) => cmd_eval(a, out),
            Command::FitBonds(a) => cmd_fit_bonds(a, out),
            Command::Replay(a) => cmd_replay(a, out),
        }
    });
    let _ = stdout.write_all(&buffer);
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn with_threads<F>(threads: Option<usize>, f: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    match threads {
        None => f(),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(f),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn resolve_bounds(name: &str, kind: ModelKind) -> Result<Bounds, CliError> {
    let bounds = match name.parse::<BoundsPreset>() {
        Ok(preset) => preset.bounds(),
        Err(_) => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "`{name}` is neither a bounds preset (ois, ois-ns, usd) nor a file"
                )));
            }
            serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Config(format!("{name}: {e}")))?
        }
    };
    if bounds.dimension() != kind.dimension() {
        return Err(CliError::Config(format!(
            "bounds `{name}` have {} dimensions, {kind} needs {}",
            bounds.dimension(),
            kind.dimension()
        )));
    }
    Ok(bounds)
}

fn validated(config: GaConfig) -> Result<GaConfig, CliError> {
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

fn load_ois(path: &Path) -> Result<Vec<TermStructure>, CliError> {
    Ok(ois_to_term_structures(&parse_ois_csv(open(path)?)?))
}

fn record(result: &CalibrationResult, elapsed_ms: u64) -> ReportRecord {
    ReportRecord {
        date: result.date,
        model: result.params.kind(),
        params: result.params,
        l2: result.errors.l2,
        linf: result.errors.linf,
        generations: result.generations,
        wall_time_ms: elapsed_ms,
    }
}

fn write_output(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(e.to_string())),
    }
}

fn emit_report(
    report: &RunReport,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write_output(out, stdout, &json)
}

fn cmd_calibrate(args: CalibrateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let echo = ConfigEcho {
        input: args.input.display().to_string(),
        model: args.model,
        bounds_name: args.bounds.clone(),
        bounds: resolve_bounds(&args.bounds, args.model)?,
        ga: validated(args.ga.config(512, args.gens))?,
        plan: None,
        date: args.date,
        side: None,
    };
    let report = execute(CALIBRATE, &echo, None)?;
    emit_report(&report, args.out.as_deref(), stdout)
}

fn cmd_roll(args: RollArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let ga = validated(args.ga.config(1024, args.gens_first))?;
    let echo = ConfigEcho {
        input: args.input.display().to_string(),
        model: args.model,
        bounds_name: args.bounds.clone(),
        bounds: resolve_bounds(&args.bounds, args.model)?,
        plan: Some(RollingPlan {
            first_day_generations: args.gens_first,
            subsequent_day_generations: args.gens_next,
            carry_count: args.carry.unwrap_or(ga.returning_genes),
        }),
        ga,
        date: None,
        side: None,
    };
    let report = execute(ROLL, &echo, args.table.as_deref())?;
    emit_report(&report, args.out.as_deref(), stdout)
}

fn cmd_replay(args: ReplayArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let report: RunReport = serde_json::from_reader(open(&args.report)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.report.display())))?;
    validated(report.config.ga.clone())?;
    let replayed = execute(&report.command, &report.config, None)?;
    emit_report(&replayed, args.out.as_deref(), stdout)
}

const CALIBRATE: &str = "calibrate";
const ROLL: &str = "roll";
const FIT_BONDS: &str = "fit-bonds";

/// Runs a fitting command from its configuration echo alone.
fn execute(command: &str, echo: &ConfigEcho, table: Option<&Path>) -> Result<RunReport, CliError> {
    if echo.bounds.dimension() != echo.model.dimension() {
        return Err(CliError::Config(format!(
            "bounds have {} dimensions, {} needs {}",
            echo.bounds.dimension(),
            echo.model,
            echo.model.dimension()
        )));
    }
    let input = Path::new(&echo.input);
    let config = &echo.ga;
    let mut out = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        rng_seed: config.rng_seed,
        config: echo.clone(),
        records: Vec::new(),
        residuals: None,
    };
    match command {
        CALIBRATE => {
            let curves = load_ois(input)?;
            let market = match echo.date {
                None => curves.into_iter().next().expect("parsed table has a date"),
                Some(date) => curves
                    .into_iter()
                    .find(|c| c.as_of() == date)
                    .ok_or_else(|| CliError::Input(format!("date {date} not in {}", echo.input)))?,
            };
            out.config.date = Some(market.as_of());
            let started = Instant::now();
            let result = calibrate(&market, echo.model, &echo.bounds, config, &[])?;
            out.records.push(record(&result, elapsed_ms(started)));
        }
        ROLL => {
            let plan = echo
                .plan
                .ok_or_else(|| CliError::Config("roll report has no plan".into()))?;
            plan.validate(config)?;
            let curves = load_ois(input)?;
            let started = Instant::now();
            let results = calibrate_series(&curves, echo.model, &echo.bounds, config, &plan)?;
            let per_day = elapsed_ms(started) / results.len() as u64;
            if let Some(path) = table {
                write_table(path, &results)?;
            }
            out.records = results.iter().map(|r| record(r, per_day)).collect();
        }
        FIT_BONDS => {
            let as_of = echo
                .date
                .ok_or_else(|| CliError::Config("fit-bonds needs an as-of date".into()))?;
            let bonds = parse_bonds_csv(open(input)?)?;
            let side = echo.side.unwrap_or_default();
            out.config.side = Some(side);
            let points = bond_points(&bonds, as_of, side)?;
            let market =
                TermStructure::new(as_of, points.iter().map(|(_, t, r)| (*t, *r)).collect())
                    .map_err(|e| CliError::Input(e.to_string()))?;
            let started = Instant::now();
            let result = calibrate(&market, echo.model, &echo.bounds, config, &[])?;
            let elapsed = elapsed_ms(started);
            let res =
                residuals(&result.params, &market).map_err(|e| CliError::Input(e.to_string()))?;
            out.residuals = Some(
                points
                    .iter()
                    .zip(res)
                    .map(|((cusip, t, r), resid)| BondResidual {
                        cusip: cusip.clone(),
                        tenor_years: t.years(),
                        market: *r,
                        model: r + resid,
                        residual: resid,
                    })
                    .collect(),
            );
            out.records.push(record(&result, elapsed));
        }
        other => return Err(CliError::Config(format!("cannot replay command `{other}`"))),
    }
    Ok(out)
}

fn elapsed_ms(started: Instant) -> u64 {
    started.elapsed().as_millis() as u64
}

fn write_table(path: &Path, results: &[CalibrationResult]) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record([
        "date", "beta0", "beta1", "beta2", "beta3", "lambda", "kappa", "l2", "linf",
    ])
    .map_err(io_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        let p = &r.params;
        w.write_record([
            r.date.to_string(),
            p.beta0.to_string(),
            p.beta1.to_string(),
            p.beta2.to_string(),
            opt(p.second.map(|h| h.beta3)),
            p.lambda.to_string(),
            opt(p.kappa()),
            r.errors.l2.to_string(),
            r.errors.linf.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Input(e.to_string()))
}

fn eval_grid(args: &EvalArgs) -> Result<Vec<f64>, CliError> {
    if let Some(tenors) = &args.tenors {
        return Ok(tenors.clone());
    }
    if let Some(path) = &args.grid_from {
        let table = parse_ois_csv(open(path)?)?;
        return Ok(table
            .terms_days
            .iter()
            .map(|&d| Tenor::from_days(d).years())
            .collect());
    }
    let step = args.step.unwrap_or(0.1);
    if !(step > 0.0 && args.start >= 0.0 && args.end >= args.start) {
        return Err(CliError::Config(format!(
            "grid needs 0 <= start <= end and step > 0, got {}..{} step {step}",
            args.start, args.end
        )));
    }
    let count = ((args.end - args.start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| args.start + i as f64 * step).collect())
}

fn cmd_eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = match (&args.params, &args.report) {
        (Some(values), _) => {
            let kind = match values.len() {
                4 => ModelKind::Ns,
                6 => ModelKind::Nss,
                n => {
                    return Err(CliError::Config(format!(
                        "--params needs 4 (NS) or 6 (NSS) values, got {n}"
                    )))
                }
            };
            CurveParams::from_values(kind, values).map_err(|e| CliError::Config(e.to_string()))?
        }
        (None, Some(path)) => {
            let report: RunReport = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let rec = report.records.get(args.record).ok_or_else(|| {
                CliError::Config(format!(
                    "report has {} records, asked for index {}",
                    report.records.len(),
                    args.record
                ))
            })?;
            rec.params
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            rec.params
        }
        (None, None) => return Err(CliError::Config("pass --params or --report".into())),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(["tenor_years", "spot_rate", "forward_rate"])
        .map_err(csv_err)?;
    for t in eval_grid(&args)? {
        let tau = Tenor::new(t).map_err(|e| CliError::Config(e.to_string()))?;
        let spot = params
            .spot_rate(tau)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let fwd = params
            .forward_rate(tau)
            .map_err(|e| CliError::Config(e.to_string()))?;
        w.write_record([t.to_string(), spot.to_string(), fwd.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_output(
        args.out.as_deref(),
        stdout,
        &String::from_utf8(bytes).expect("csv output is utf-8"),
    )
}

fn cmd_fit_bonds(args: FitBondsArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let kind = ModelKind::Nss;
    let echo = ConfigEcho {
        input: args.input.display().to_string(),
        model: kind,
        bounds_name: args.bounds.clone(),
        bounds: resolve_bounds(&args.bounds, kind)?,
        ga: validated(args.ga.config(1024, args.gens))?,
        plan: None,
        date: Some(args.as_of),
        side: Some(args.side.into()),
    };
    let report = execute(FIT_BONDS, &echo, None)?;
    emit_report(&report, args.out.as_deref(), stdout)
}

/// Entry point for the binary.
pub fn main_with_std() -> i32 {
    run(
        std::env::args_os(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    )
}
