//! The `ragscale` command-line surface.
//!
//! Subcommands: fit, validate, tradeoff, allocate, crossover, iso,
//! budget-select, synth, calibrate. Every command is deterministic given
//! its flags and input bytes: all randomness flows from explicit `--seed`
//! flags (default 42), reports embed a schema version plus the full config
//! echo, and output files are only written after the whole computation
//! succeeds. Exit codes: 0 success, 1 domain error, 2 usage error.
//! `RAGSCALE_THREADS` caps internal parallelism (0 = auto); thread count
//! never affects output bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::allocation::{
    self, crossover_in, AllocationPlan, CrossoverEstimate, CrossoverPoint, CrossoverSpace,
    IsoSurfaces, Pairing, TradeoffTable,
};
use crate::datastore::{self, ChunkCatalog, NestingCheck, SelectionManifest};
use crate::error::{Error, Result};
use crate::fitter::{fit_two_stage, FitConfig, LawFamily, ResidualSpace};
use crate::laws::{EffectiveTokens, Substitutability};
use crate::records::{load_dataset, Dataset, FileFormat, FilterPredicate};
use crate::report::{fit_report_to_json, fit_summary_csv, BenchmarkFit, FitReport, SCHEMA_VERSION};
use crate::synth::{self, SynthSpec};
use crate::validation::{self, GroupBy, LawPredictor, Protocol, StabilityReport, ValidationReport};

#[derive(Parser)]
#[command(
    name = "ragscale",
    version,
    about = "Scaling-law fitting and data-budget allocation over model size, \
             pretraining tokens, and retrieval-store tokens"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit scaling laws per benchmark (two-stage: baseline, then retrieval gain)
    Fit(FitArgs),
    /// Run a fit-quality protocol: cv, lomo, lodo, or stability
    Validate(ValidateArgs),
    /// Per-configuration substitutability and marginal-benefit table
    Tradeoff(TradeoffArgs),
    /// Optimal split of a fixed token budget between pretraining and retrieval
    Allocate(AllocateArgs),
    /// Tokens-per-parameter threshold where substitutability crosses 1
    Crossover(CrossoverArgs),
    /// Iso-loss grid and compute-efficient frontier for the two-axis law
    Iso(IsoArgs),
    /// Nested-prefix datastore selection for a list of token budgets
    BudgetSelect(BudgetSelectArgs),
    /// Generate a planted-parameter synthetic dataset
    Synth(SynthArgs),
    /// Observed-vs-predicted pairs for calibration plots
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "two_d")]
    TwoD,
    #[value(name = "log_gain")]
    LogGain,
    #[value(name = "power_gain")]
    PowerGain,
}

impl From<FamilyArg> for LawFamily {
    fn from(f: FamilyArg) -> LawFamily {
        match f {
            FamilyArg::TwoD => LawFamily::TwoD,
            FamilyArg::LogGain => LawFamily::LogGain,
            FamilyArg::PowerGain => LawFamily::PowerGain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Relative,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Cv,
    Lomo,
    Lodo,
    Stability,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairingArg {
    Measured,
    Fitted,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct FitFlags {
    /// Law family to fit
    #[arg(long, value_enum, default_value = "log_gain")]
    family: FamilyArg,
    /// Residual space for the least-squares objective
    #[arg(long, value_enum, default_value = "relative")]
    residual_space: SpaceArg,
    /// Seed for the multi-start sweep
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of multi-start initial points
    #[arg(long = "starts", default_value_t = 64)]
    starts: usize,
    /// Simplex iteration cap per start
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
}

impl FitFlags {
    fn config(&self) -> FitConfig {
        let mut cfg = FitConfig::new(self.family.into());
        cfg.residual_space = match self.residual_space {
            SpaceArg::Relative => ResidualSpace::Relative,
            SpaceArg::Log => ResidualSpace::Log,
        };
        cfg.seed = self.seed;
        cfg.n_starts = self.starts;
        cfg.max_iters = self.max_iters;
        cfg
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset (CSV or JSON)
    #[arg(long)]
    data: PathBuf,
    /// Input format; inferred from the extension when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    fit: FitFlags,
    /// JSON report path; a CSV summary lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Fitted parameters from `ragscale fit`; protocols then evaluate these
    /// fixed laws instead of refitting per fold
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TradeoffArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Fitted parameters from `ragscale fit`
    #[arg(long)]
    params: PathBuf,
    /// Benchmark to analyze when the params file holds several
    #[arg(long)]
    benchmark: Option<String>,
    /// Where baseline/RAG losses come from
    #[arg(long, value_enum, default_value = "measured")]
    pairing: PairingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    benchmark: Option<String>,
    /// Model size in parameters
    #[arg(long)]
    n: f64,
    /// Total token budget to split between pretraining and retrieval
    #[arg(long)]
    budget: f64,
    /// Smallest admissible pretraining budget
    #[arg(long, default_value_t = 1e6)]
    d_min: f64,
    /// Frontier samples before golden-section refinement
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossoverArgs {
    /// CSV with columns d_over_n, sigma
    #[arg(long)]
    points: PathBuf,
    /// Regress sigma on d/n directly instead of in log-log space
    #[arg(long)]
    linear_space: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IsoArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    benchmark: Option<String>,
    /// Model-size range as lo:hi, e.g. 3e7:3e9
    #[arg(long)]
    n_range: String,
    /// Pretraining-token range as lo:hi
    #[arg(long)]
    d_range: String,
    /// Grid points per axis
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// FLOPs per parameter-token in the compute approximation
    #[arg(long, default_value_t = 6.0)]
    flops_const: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetSelectArgs {
    /// Chunk catalog (CSV with chunk_id, token_count, or JSON)
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated token budgets, e.g. 30e6,60e6
    #[arg(long)]
    budgets: String,
    /// Opaque label for the upstream filtering configuration
    #[arg(long, default_value = "")]
    filter_label: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// SynthSpec JSON; defaults to the built-in grid
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Multiplicative lognormal noise level (std of ln loss)
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset path (.csv or .json)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    params: PathBuf,
    /// Output CSV of observed/predicted pairs
    #[arg(long)]
    out: PathBuf,
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors and 0 for --help/--version.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(outputs) => {
            for (path, contents) in &outputs {
                if let Err(e) = write_output(path, contents) {
                    eprintln!("ragscale: {e}");
                    return 1;
                }
            }
            0
        }
        Err(message) => {
            eprintln!("ragscale: {message}");
            1
        }
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("RAGSCALE_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

type Outputs = Vec<(PathBuf, String)>;

fn dispatch(command: Command) -> std::result::Result<Outputs, String> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Tradeoff(args) => cmd_tradeoff(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Crossover(args) => cmd_crossover(args),
        Command::Iso(args) => cmd_iso(args),
        Command::BudgetSelect(args) => cmd_budget_select(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    }
    .map_err(|e| e.to_string())
}

fn load_data(path: &Path, format: Option<FormatArg>) -> Result<Dataset> {
    let format = match format {
        Some(FormatArg::Csv) => FileFormat::Csv,
        Some(FormatArg::Json) => FileFormat::Json,
        None => FileFormat::infer(path),
    };
    load_dataset(path, format)
}

fn load_params(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    FitReport::parse(&text)
}

fn csv_sibling(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn cmd_fit(args: FitArgs) -> Result<Outputs> {
    let data = load_data(&args.data, args.format)?;
    let cfg = args.fit.config();
    let mut fits = Vec::new();
    for benchmark in data.benchmarks() {
        let subset = data.filter(&FilterPredicate::benchmark(&benchmark));
        let (stage1, stage2) = fit_two_stage(&subset, &cfg).map_err(|e| {
            Error::InvalidArgument(format!("fit failed for benchmark `{benchmark}`: {e}"))
        })?;
        fits.push(BenchmarkFit {
            benchmark,
            stage1,
            stage2,
        });
    }
    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        fits,
    };
    Ok(vec![
        (args.out.clone(), fit_report_to_json(&report)),
        (csv_sibling(&args.out), fit_summary_csv(&report)),
    ])
}

#[derive(Serialize)]
struct ScopedValidation {
    scope: String,
    report: ValidationReport,
}

#[derive(Serialize)]
struct ExponentRow {
    benchmark: String,
    alpha: f64,
    beta: f64,
    rate: Option<f64>,
    l0: f64,
}

#[derive(Serialize)]
struct ValidateReportFile {
    schema_version: u32,
    command: &'static str,
    protocol: Protocol,
    seed: u64,
    folds: usize,
    repeats: usize,
    params_source: String,
    config: FitConfig,
    exponents: Vec<ExponentRow>,
    results: Vec<ScopedValidation>,
    stability: Option<StabilityReport>,
}

fn benchmark_exponents(
    data: &Dataset,
    cfg: &FitConfig,
    params: Option<&FitReport>,
) -> Result<Vec<ExponentRow>> {
    let mut rows = Vec::new();
    for benchmark in data.benchmarks() {
        if let Some(file) = params {
            let entry = file.select(Some(&benchmark))?;
            let base = entry.params_2d();
            rows.push(ExponentRow {
                benchmark,
                alpha: base.alpha,
                beta: base.beta,
                rate: entry
                    .stage2
                    .as_ref()
                    .map(|s2| s2.params.as_3d().expect("3d").rate),
                l0: base.l0,
            });
        } else {
            let subset = data.filter(&FilterPredicate::benchmark(&benchmark));
            let (stage1, stage2) = fit_two_stage(&subset, cfg).map_err(|e| {
                Error::InvalidArgument(format!("fit failed for benchmark `{benchmark}`: {e}"))
            })?;
            let base = stage1.params.as_2d().expect("2d");
            rows.push(ExponentRow {
                benchmark,
                alpha: base.alpha,
                beta: base.beta,
                rate: stage2.map(|s2| s2.params.as_3d().expect("3d").rate),
                l0: base.l0,
            });
        }
    }
    Ok(rows)
}

fn fixed_law(entry: &BenchmarkFit) -> LawPredictor {
    match &entry.stage2 {
        Some(s2) => LawPredictor::ThreeD(*s2.params.as_3d().expect("3d")),
        None => LawPredictor::TwoD(*entry.params_2d()),
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<Outputs> {
    let data = load_data(&args.data, args.format)?;
    let cfg = args.fit.config();
    let params = args.params.as_deref().map(load_params).transpose()?;
    let protocol = match args.protocol {
        ProtocolArg::Cv => Protocol::Cv,
        ProtocolArg::Lomo => Protocol::Lomo,
        ProtocolArg::Lodo => Protocol::Lodo,
        ProtocolArg::Stability => Protocol::Stability,
    };

    let mut results = Vec::new();
    let mut stability = None;
    match protocol {
        Protocol::Cv | Protocol::Lomo => {
            for benchmark in data.benchmarks() {
                let subset = data.filter(&FilterPredicate::benchmark(&benchmark));
                let report = match (&params, protocol) {
                    (Some(file), Protocol::Cv) => validation::cross_validate_fixed(
                        &subset,
                        fixed_law(file.select(Some(&benchmark))?),
                        args.folds,
                        args.repeats,
                        args.fit.seed,
                    )?,
                    (None, Protocol::Cv) => validation::cross_validate(
                        &subset,
                        &cfg,
                        args.folds,
                        args.repeats,
                        args.fit.seed,
                    )?,
                    (Some(file), _) => validation::leave_one_group_out_fixed(
                        &subset,
                        fixed_law(file.select(Some(&benchmark))?),
                        GroupBy::ModelSize,
                        args.fit.seed,
                    )?,
                    (None, _) => {
                        validation::leave_one_group_out(&subset, &cfg, GroupBy::ModelSize)?
                    }
                };
                results.push(ScopedValidation {
                    scope: benchmark,
                    report,
                });
            }
        }
        Protocol::Lodo => {
            let report = match &params {
                Some(_) => {
                    return Err(Error::InvalidArgument(
                        "lodo refits on pooled benchmarks; --params is not applicable".into(),
                    ))
                }
                None => validation::leave_one_group_out(&data, &cfg, GroupBy::Benchmark)?,
            };
            results.push(ScopedValidation {
                scope: "all".into(),
                report,
            });
        }
        Protocol::Stability => {
            if params.is_some() {
                return Err(Error::InvalidArgument(
                    "stability refits per subset; --params is not applicable".into(),
                ));
            }
            let mut families: Vec<String> = data
                .records
                .iter()
                .map(|r| r.family_label().to_string())
                .collect();
            families.sort();
            families.dedup();
            let mut seeds: Vec<String> = data
                .records
                .iter()
                .map(|r| r.seed_label().to_string())
                .collect();
            seeds.sort();
            seeds.dedup();
            stability = Some(validation::stability_report(
                &data,
                &cfg,
                &families,
                &seeds,
                args.folds,
                args.repeats,
            )?);
        }
    }

    let exponents = benchmark_exponents(&data, &cfg, params.as_ref())?;
    let file = ValidateReportFile {
        schema_version: SCHEMA_VERSION,
        command: "validate",
        protocol,
        seed: args.fit.seed,
        folds: args.folds,
        repeats: args.repeats,
        params_source: args
            .params
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "refit".into()),
        config: cfg,
        exponents,
        results,
        stability,
    };

    let json = to_pretty_json(&file)?;
    let csv = validate_summary_csv(&file);
    Ok(vec![
        (args.out.clone(), json),
        (csv_sibling(&args.out), csv),
    ])
}

/// Summary rows in the layout of the fit-quality tables.
fn validate_summary_csv(file: &ValidateReportFile) -> String {
    let mut out = String::from("benchmark,cv_are,lomo_are,lodo_are,alpha,beta,rate,L0\n");
    for row in &file.exponents {
        let (mut cv, mut lomo, mut lodo) = (String::new(), String::new(), String::new());
        match file.protocol {
            Protocol::Cv => {
                if let Some(r) = file.results.iter().find(|r| r.scope == row.benchmark) {
                    cv = r.report.are_percent.to_string();
                }
            }
            Protocol::Lomo => {
                if let Some(r) = file.results.iter().find(|r| r.scope == row.benchmark) {
                    lomo = r.report.are_percent.to_string();
                }
            }
            Protocol::Lodo => {
                if let Some(r) = file.results.first() {
                    if let Some(fold) = r
                        .report
                        .per_fold
                        .iter()
                        .find(|f| f.held_out_label == row.benchmark)
                    {
                        lodo = fold.are_percent.to_string();
                    }
                }
            }
            Protocol::Stability => {
                if let Some(stab) = &file.stability {
                    if let Some(s) = stab.summaries.iter().find(|s| s.benchmark == row.benchmark) {
                        cv = s.cv_are_mean.to_string();
                        lomo = s.lomo_are_mean.to_string();
                    }
                }
            }
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.benchmark,
            cv,
            lomo,
            lodo,
            row.alpha,
            row.beta,
            row.rate.map(|r| r.to_string()).unwrap_or_default(),
            row.l0,
        );
    }
    out
}

#[derive(Serialize)]
struct TradeoffReportFile {
    schema_version: u32,
    command: &'static str,
    benchmark: String,
    table: TradeoffTable,
}

fn effective_tokens_csv(value: EffectiveTokens) -> String {
    match value {
        EffectiveTokens::Finite(v) => v.to_string(),
        EffectiveTokens::UndefinedFloor => "inf".into(),
    }
}

fn sigma_csv(value: Substitutability) -> String {
    match value {
        Substitutability::Finite(v) => v.to_string(),
        Substitutability::Infinite => "inf".into(),
    }
}

fn cmd_tradeoff(args: TradeoffArgs) -> Result<Outputs> {
    let data = load_data(&args.data, args.format)?;
    let params = load_params(&args.params)?;
    let entry = params.select(args.benchmark.as_deref())?;
    let subset = data.filter(&FilterPredicate::benchmark(&entry.benchmark));
    if subset.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "data has no records for benchmark `{}`",
            entry.benchmark
        )));
    }
    let pairing = match args.pairing {
        PairingArg::Measured => Pairing::Measured,
        PairingArg::Fitted => Pairing::Fitted,
    };
    let table =
        allocation::tradeoff_table(&subset, entry.params_2d(), &entry.params_3d(), pairing)?;

    let mut csv = String::from("n,d,r,loss_baseline,loss_rag,d_eff,sigma,kappa,regime\n");
    for row in &table.rows {
        let p = &row.point;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            p.n,
            p.d,
            p.r_opt,
            p.loss_baseline,
            p.loss_rag,
            effective_tokens_csv(p.d_eff),
            sigma_csv(p.sigma),
            p.kappa,
            row.regime,
        );
    }
    let file = TradeoffReportFile {
        schema_version: SCHEMA_VERSION,
        command: "tradeoff",
        benchmark: entry.benchmark.clone(),
        table,
    };
    Ok(vec![
        (args.out.clone(), to_pretty_json(&file)?),
        (csv_sibling(&args.out), csv),
    ])
}

#[derive(Serialize)]
struct AllocateReportFile {
    schema_version: u32,
    command: &'static str,
    benchmark: String,
    plan: AllocationPlan,
}

fn cmd_allocate(args: AllocateArgs) -> Result<Outputs> {
    let params = load_params(&args.params)?;
    let entry = params.select(args.benchmark.as_deref())?;
    let plan = allocation::optimize_split(
        &entry.params_3d(),
        args.n,
        args.budget,
        args.d_min,
        args.resolution,
    )?;

    let mut csv = String::from("d,r,loss\n");
    for s in &plan.frontier {
        let _ = writeln!(csv, "{},{},{}", s.d, s.r, s.loss);
    }
    let file = AllocateReportFile {
        schema_version: SCHEMA_VERSION,
        command: "allocate",
        benchmark: entry.benchmark.clone(),
        plan,
    };
    Ok(vec![
        (args.out.clone(), to_pretty_json(&file)?),
        (csv_sibling(&args.out), csv),
    ])
}

#[derive(Serialize)]
struct CrossoverReportFile {
    schema_version: u32,
    command: &'static str,
    space: &'static str,
    estimate: CrossoverEstimate,
}

fn cmd_crossover(args: CrossoverArgs) -> Result<Outputs> {
    let bytes = std::fs::read(&args.points).map_err(|e| Error::Io {
        path: args.points.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let points: Vec<CrossoverPoint> = reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let space = if args.linear_space {
        CrossoverSpace::Linear
    } else {
        CrossoverSpace::LogLog
    };
    let estimate = crossover_in(&points, space)?;
    let file = CrossoverReportFile {
        schema_version: SCHEMA_VERSION,
        command: "crossover",
        space: if args.linear_space {
            "linear"
        } else {
            "log_log"
        },
        estimate,
    };
    Ok(vec![(args.out, to_pretty_json(&file)?)])
}

#[derive(Serialize)]
struct IsoReportFile {
    schema_version: u32,
    command: &'static str,
    benchmark: String,
    surfaces: IsoSurfaces,
}

fn parse_range(text: &str, flag: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "{flag} must be lo:hi, got `{text}`"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{flag} lower bound `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{flag} upper bound `{}`", parts[1])))?;
    Ok((lo, hi))
}

fn cmd_iso(args: IsoArgs) -> Result<Outputs> {
    let params = load_params(&args.params)?;
    let entry = params.select(args.benchmark.as_deref())?;
    let n_range = parse_range(&args.n_range, "--n-range")?;
    let d_range = parse_range(&args.d_range, "--d-range")?;
    let surfaces = allocation::iso_surfaces(
        entry.params_2d(),
        n_range,
        d_range,
        args.grid,
        args.flops_const,
    )?;

    let mut grid_csv = String::from("n,d,loss\n");
    for cell in &surfaces.cells {
        let _ = writeln!(grid_csv, "{},{},{}", cell.n, cell.d, cell.loss);
    }
    let mut frontier_csv = String::from("compute,n,d,loss\n");
    for p in &surfaces.frontier {
        let _ = writeln!(frontier_csv, "{},{},{},{}", p.compute, p.n, p.d, p.loss);
    }
    let stem = args.out.with_extension("");
    let frontier_path = PathBuf::from(format!("{}_frontier.csv", stem.display()));
    let file = IsoReportFile {
        schema_version: SCHEMA_VERSION,
        command: "iso",
        benchmark: entry.benchmark.clone(),
        surfaces,
    };
    Ok(vec![
        (args.out.clone(), to_pretty_json(&file)?),
        (csv_sibling(&args.out), grid_csv),
        (frontier_path, frontier_csv),
    ])
}

#[derive(Serialize)]
struct ManifestFile {
    schema_version: u32,
    #[serde(flatten)]
    manifest: SelectionManifest,
}

#[derive(Serialize)]
struct NestingPair {
    small_budget: u64,
    large_budget: u64,
    nested: bool,
    diagnostic: Option<String>,
}

#[derive(Serialize)]
struct BudgetSelectReportFile {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    catalog: String,
    budgets: Vec<u64>,
    checks: Vec<NestingPair>,
}

fn parse_budgets(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let v: f64 = part
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad budget `{part}`")))?;
            if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "budget must be a positive integer token count, got `{part}`"
                )));
            }
            Ok(v as u64)
        })
        .collect()
}

fn cmd_budget_select(args: BudgetSelectArgs) -> Result<Outputs> {
    let catalog = ChunkCatalog::load(&args.catalog)?;
    let budgets = parse_budgets(&args.budgets)?;
    if budgets.is_empty() {
        return Err(Error::InvalidArgument("no budgets given".into()));
    }
    let manifests: Vec<SelectionManifest> = budgets
        .iter()
        .map(|&b| datastore::select_budget_labeled(&catalog, args.seed, b, &args.filter_label))
        .collect::<Result<_>>()?;

    // Adjacent checks over budget-sorted manifests cover the whole chain.
    let mut sorted: Vec<&SelectionManifest> = manifests.iter().collect();
    sorted.sort_by_key(|m| m.budget);
    let mut checks = Vec::new();
    for pair in sorted.windows(2) {
        let NestingCheck { nested, diagnostic } = datastore::verify_nesting(pair[0], pair[1])?;
        checks.push(NestingPair {
            small_budget: pair[0].budget,
            large_budget: pair[1].budget,
            nested,
            diagnostic,
        });
    }

    let mut outputs: Outputs = Vec::new();
    for manifest in &manifests {
        let file = ManifestFile {
            schema_version: SCHEMA_VERSION,
            manifest: manifest.clone(),
        };
        outputs.push((
            args.out_dir
                .join(format!("manifest_{}.json", manifest.budget)),
            to_pretty_json(&file)?,
        ));
        let mut ids = manifest.selected.join("\n");
        ids.push('\n');
        outputs.push((
            args.out_dir
                .join(format!("manifest_{}.txt", manifest.budget)),
            ids,
        ));
    }
    let summary = BudgetSelectReportFile {
        schema_version: SCHEMA_VERSION,
        command: "budget-select",
        seed: args.seed,
        catalog: catalog.source_label.clone(),
        budgets,
        checks,
    };
    outputs.push((
        args.out_dir.join("nesting_summary.json"),
        to_pretty_json(&summary)?,
    ));
    Ok(outputs)
}

fn cmd_synth(args: SynthArgs) -> Result<Outputs> {
    let mut spec: SynthSpec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
        }
        None => synth::default_grid(),
    };
    if let Some(noise) = args.noise {
        spec.noise_sigma = noise;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let dataset = synth::generate(&spec)?;
    let contents = if args.out.extension().and_then(|e| e.to_str()) == Some("json") {
        dataset.to_json()
    } else {
        dataset.to_canonical_csv()
    };
    Ok(vec![(args.out, contents)])
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<Outputs> {
    let data = load_data(&args.data, args.format)?;
    let params = load_params(&args.params)?;
    let mut csv = String::from("n_params,d_tokens,r_tokens,loss,benchmark,seed,family,predicted\n");
    for record in &data.records {
        let entry = params.select(Some(&record.benchmark)).map_err(|_| {
            Error::InvalidArgument(format!(
                "params file has no benchmark `{}` needed by the data",
                record.benchmark
            ))
        })?;
        let predicted = fixed_law(entry).predict(record);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            record.model_params,
            record.pretrain_tokens,
            record.retrieval_tokens,
            record.loss,
            record.benchmark,
            record.seed_label(),
            record.family_label(),
            predicted,
        );
    }
    Ok(vec![(args.out, csv)])
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}
