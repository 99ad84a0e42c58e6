//! Command-line front end: argument definitions, the operation count
//! formula, and one `cmd_*` function per subcommand returning a JSON-ready
//! report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::linalg::{elimination_flops, OpCounters};
use crate::matrixio::{
    detect_format, generate_instance, load_matrix, save_matrix, Format, GenerateParams, InputMatrix, MatrixError,
};
use crate::precision::{PrecisionConfig, PrecisionError, PrecisionMode, PrecisionParams, DEFAULT_ALPHA, DEFAULT_SIG_DIGITS};
use crate::scheduler::{
    astar_schedule_with, brute_force_schedule_with, load_dag, report, simulate_with, MachineModel, SchedError,
    SearchOptions, WritebackScope,
};
use crate::subsets::{audit_partition, binom, SubsetError};
use crate::torontonian::{torontonian_reference, torontonian_with_params, TorontonianError};

pub const FLOPS_MAX_MODES: u32 = 60;
pub const PARTITION_CHECK_MAX_MODES: u32 = 20;

#[derive(Parser, Debug)]
#[command(name = "torontonian", version, about = "Torontonian engine, instance tools and instruction scheduler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Torontonian of a matrix file with the fixed-point engine
    Compute(ComputeArgs),
    /// Engine against the double-precision reference (N <= 20)
    Oracle(ComputeArgs),
    /// Write a seeded random instance
    Gen(GenArgs),
    /// Quantize a matrix file into the binary format
    Compress(CompressArgs),
    /// Exhaustively audit the work partition
    PartitionCheck(PartitionArgs),
    /// Operation count of a full run
    Flops(FlopsArgs),
    /// Optimal issue order for an instruction DAG
    Sched(SchedArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ComputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "auto", value_parser = parse_mode)]
    pub precision: PrecisionMode,
    /// Defaults to the available hardware parallelism
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SIG_DIGITS)]
    pub sig_digits: u32,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Print the full JSON report instead of a summary line
    #[arg(long)]
    pub json: bool,
}

fn parse_mode(s: &str) -> Result<PrecisionMode, String> {
    s.parse().map_err(|e: PrecisionError| e.to_string())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Binary => Format::Binary,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long)]
    pub modes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.16)]
    pub a_mean: f64,
    #[arg(long, default_value_t = 0.06)]
    pub spread: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
    #[arg(long)]
    pub quant_bits: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct CompressArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub quant_bits: u32,
}

#[derive(Args, Debug, Clone)]
pub struct PartitionArgs {
    #[arg(long)]
    pub modes: u32,
    #[arg(long)]
    pub nproc: u32,
}

#[derive(Args, Debug, Clone)]
pub struct FlopsArgs {
    #[arg(long)]
    pub modes: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum WritebackArg {
    PerPipeline,
    Global,
}

#[derive(Args, Debug, Clone)]
pub struct SchedArgs {
    #[arg(long)]
    pub dag: PathBuf,
    /// Also run the exhaustive search (at most 9 instructions)
    #[arg(long)]
    pub brute_force: bool,
    #[arg(long, value_enum, default_value = "per-pipeline")]
    pub writeback: WritebackArg,
}

/// Failure with a module-qualified code such as `precision.unsupported`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        let code = match e {
            MatrixError::Range { .. } => "matrixio.range",
            MatrixError::QuantBits(_) => "matrixio.quant_bits",
            MatrixError::Binary { .. } => "matrixio.binary",
            MatrixError::Text { .. } => "matrixio.text",
            MatrixError::Dimension(_) => "matrixio.dimension",
            MatrixError::Symmetry(_) => "matrixio.symmetry",
            MatrixError::EmptyPattern => "matrixio.empty_pattern",
            MatrixError::Generator(_) => "matrixio.generator",
        };
        Self::new(code, e.to_string())
    }
}

impl From<PrecisionError> for CliError {
    fn from(e: PrecisionError) -> Self {
        let code = match e {
            PrecisionError::NonPositiveDeterminant(_) => "precision.non_positive_det",
            PrecisionError::Linalg(_) => "linalg.breakdown",
            PrecisionError::ModelOutOfRange { .. } => "precision.model_range",
            PrecisionError::Unsupported { .. } => "precision.unsupported",
            PrecisionError::InsufficientPrecision { .. } => "precision.insufficient",
            PrecisionError::Invalid(_) => "precision.invalid",
        };
        Self::new(code, e.to_string())
    }
}

impl From<SubsetError> for CliError {
    fn from(e: SubsetError) -> Self {
        Self::new("subsets.invalid", e.to_string())
    }
}

impl From<TorontonianError> for CliError {
    fn from(e: TorontonianError) -> Self {
        match e {
            TorontonianError::Matrix(e) => e.into(),
            TorontonianError::Precision(e) => e.into(),
            TorontonianError::Subset(e) => e.into(),
            TorontonianError::Breakdown { .. } => Self::new("linalg.breakdown", e.to_string()),
            TorontonianError::Rsqrt { .. } | TorontonianError::Convert(_) => Self::new("fixedpt.domain", e.to_string()),
            TorontonianError::TermOverflow { .. } => Self::new("torontonian.term_overflow", e.to_string()),
            TorontonianError::NonFinite { .. } => Self::new("torontonian.non_finite", e.to_string()),
            TorontonianError::Modes(_) => Self::new("torontonian.modes", e.to_string()),
            TorontonianError::InvalidState(_) => Self::new("torontonian.invalid_state", e.to_string()),
            TorontonianError::Workers => Self::new("torontonian.workers", e.to_string()),
        }
    }
}

impl From<SchedError> for CliError {
    fn from(e: SchedError) -> Self {
        let code = match e {
            SchedError::Parse { .. } => "scheduler.parse",
            SchedError::Cycle(_) => "scheduler.cycle",
            SchedError::TooLarge { .. } | SchedError::StateLimit { .. } => "scheduler.resource",
            _ => "scheduler.invalid",
        };
        Self::new(code, e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()))
}

/// Total real operations of a full run over `N` modes:
/// `sum_{i=1..N} C(N, i) (32 i^3 + 12 i^2 - 8 i) / 3`. Every term is an
/// integer, so the sum is exact.
pub fn flops_formula(n: u32) -> Result<u128, CliError> {
    if n == 0 || n > FLOPS_MAX_MODES {
        return Err(CliError::new("cli.range", format!("flops formula needs 1 <= N <= {FLOPS_MAX_MODES}, got {n}")));
    }
    let overflow = || CliError::new("cli.overflow", format!("flops formula overflows at N = {n}"));
    let mut total: u128 = 0;
    for i in 1..=n {
        let c = binom(n, i)? as u128;
        let i = i as u128;
        let per = (32 * i * i * i + 12 * i * i - 8 * i) / 3;
        total = c.checked_mul(per).and_then(|t| total.checked_add(t)).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// Per-determinant count for a complex `n x n` matrix: `(4n^3 + 3n^2 - 4n) / 3`.
pub fn flops_per_determinant(n: u64) -> u64 {
    elimination_flops(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub input: String,
    pub n_modes: usize,
    pub precision: PrecisionConfig,
    pub workers: usize,
    pub wall_time_s: f64,
    pub value: f64,
    pub value_digits: String,
    pub sig_digits: u32,
    pub raw_hex: String,
    pub term_count: u64,
    pub counters: OpCounters,
    pub flops_formula: u128,
    pub sustained_flops: f64,
}

fn read_matrix(path: &Path) -> Result<InputMatrix, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    let format = detect_format(&bytes)
        .ok_or_else(|| CliError::new("matrixio.format", format!("{}: neither text nor binary matrix", path.display())))?;
    Ok(load_matrix(&bytes, format)?)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn cmd_compute(args: &ComputeArgs) -> Result<RunReport, CliError> {
    let a = read_matrix(&args.input)?;
    let workers = args.workers.unwrap_or_else(default_workers);
    let params = PrecisionParams { sig_digits: args.sig_digits, alpha: args.alpha };
    let r = torontonian_with_params(&a, args.precision, params, workers)?;
    let flops = flops_formula(a.n_modes() as u32)?;
    let secs = r.wall_time.as_secs_f64();
    Ok(RunReport {
        command: "compute".into(),
        input: args.input.display().to_string(),
        n_modes: a.n_modes(),
        precision: r.config,
        workers,
        wall_time_s: secs,
        value: r.value,
        value_digits: format!("{:.*e}", args.sig_digits.saturating_sub(1) as usize, r.value),
        sig_digits: args.sig_digits,
        raw_hex: r.raw.to_hex(),
        term_count: r.term_count,
        counters: r.counters,
        flops_formula: flops,
        sustained_flops: if secs > 0.0 { flops as f64 / secs } else { 0.0 },
    })
}

/// Matching significant decimal digits between `x` and the reference `r`.
pub fn matching_digits(x: f64, r: f64) -> f64 {
    if x == r {
        return 17.0;
    }
    let rel = ((x - r) / r).abs();
    (-rel.log10()).clamp(0.0, 17.0)
}

pub fn cmd_oracle(args: &ComputeArgs) -> Result<Value, CliError> {
    let report = cmd_compute(args)?;
    let a = read_matrix(&args.input)?;
    let start = Instant::now();
    let reference = torontonian_reference(&a.to_dense())?;
    let ref_secs = start.elapsed().as_secs_f64();
    let digits = matching_digits(report.value, reference);
    Ok(json!({
        "command": "oracle",
        "engine": report,
        "reference": reference,
        "reference_wall_time_s": ref_secs,
        "matching_digits": digits,
        "pass": digits >= args.sig_digits as f64,
    }))
}

pub fn cmd_gen(args: &GenArgs) -> Result<Value, CliError> {
    let params = GenerateParams { n_modes: args.modes, a_target: args.a_mean, spread: args.spread, seed: args.seed };
    let mut a = generate_instance(&params)?;
    if let Some(bits) = args.quant_bits {
        a = a.quantized(bits)?;
    }
    let bytes = save_matrix(&a, args.format.into(), args.quant_bits)?;
    std::fs::write(&args.out, &bytes).map_err(|e| io_error(&args.out, e))?;
    Ok(json!({
        "command": "gen",
        "out": args.out.display().to_string(),
        "params": params,
        "format": Format::from(args.format),
        "quant_bits": args.quant_bits,
        "bytes": bytes.len(),
        "mean_diagonal": a.mean_diagonal(),
    }))
}

pub fn cmd_compress(args: &CompressArgs) -> Result<Value, CliError> {
    let original = std::fs::metadata(&args.input).map_err(|e| io_error(&args.input, e))?.len();
    let a = read_matrix(&args.input)?;
    let q = a.quantized(args.quant_bits)?;
    let bytes = save_matrix(&q, Format::Binary, Some(args.quant_bits))?;
    std::fs::write(&args.out, &bytes).map_err(|e| io_error(&args.out, e))?;
    let mut max_err = 0f64;
    for r in 0..a.dim() {
        for c in 0..a.dim() {
            max_err = max_err.max((a.element(r, c) - q.element(r, c)).norm());
        }
    }
    let dense_bytes = a.dim() * a.dim() * 16;
    Ok(json!({
        "command": "compress",
        "out": args.out.display().to_string(),
        "quant_bits": args.quant_bits,
        "input_bytes": original,
        "output_bytes": bytes.len(),
        "dense_complex128_bytes": dense_bytes,
        "ratio_vs_dense": dense_bytes as f64 / bytes.len() as f64,
        "max_abs_error": max_err,
    }))
}

pub fn cmd_partition_check(args: &PartitionArgs) -> Result<Value, CliError> {
    if args.modes == 0 || args.modes > PARTITION_CHECK_MAX_MODES {
        return Err(CliError::new("cli.range", format!("partition-check needs 1 <= N <= {PARTITION_CHECK_MAX_MODES}")));
    }
    if args.nproc == 0 {
        return Err(CliError::new("cli.range", "nproc must be at least 1"));
    }
    let audit = audit_partition(args.modes, args.nproc)?;
    let summary = if audit.ok() {
        format!("coverage OK, max imbalance {}", audit.max_imbalance)
    } else {
        format!(
            "coverage FAILED: {} of {} covered, {} duplicates, max imbalance {}",
            audit.covered, audit.expected, audit.duplicates, audit.max_imbalance
        )
    };
    Ok(json!({ "command": "partition-check", "audit": audit, "ok": audit.ok(), "summary": summary }))
}

pub fn cmd_flops(args: &FlopsArgs) -> Result<Value, CliError> {
    let total = flops_formula(args.modes)?;
    let per_size: Vec<Value> = (1..=args.modes as u64)
        .map(|i| json!({ "subset_size": i, "matrix_dim": 2 * i, "per_determinant": flops_per_determinant(2 * i) }))
        .collect();
    Ok(json!({ "command": "flops", "n_modes": args.modes, "flops_formula": total, "per_determinant": per_size }))
}

pub fn cmd_sched(args: &SchedArgs) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(&args.dag).map_err(|e| io_error(&args.dag, e))?;
    let dag = load_dag(&text)?;
    let model = MachineModel {
        writeback: match args.writeback {
            WritebackArg::PerPipeline => WritebackScope::PerPipeline,
            WritebackArg::Global => WritebackScope::Global,
        },
    };
    let natural = simulate_with(&dag, &dag.natural_order(), model)?;
    let start = Instant::now();
    let (best, stats) = astar_schedule_with(&dag, SearchOptions { model, ..Default::default() })?;
    let secs = start.elapsed().as_secs_f64();
    let brute = if args.brute_force { Some(brute_force_schedule_with(&dag, model)?.makespan) } else { None };
    Ok(json!({
        "command": "sched",
        "dag": args.dag.display().to_string(),
        "model": model,
        "instructions": dag.expanded_len(),
        "natural_makespan": natural.makespan,
        "makespan": best.makespan,
        "brute_force_makespan": brute,
        "search": stats,
        "search_time_s": secs,
        "schedule": best,
        "listing": report(&best),
    }))
}

/// Runs a parsed command. Returns the text for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let pretty = |v: Value| serde_json::to_string_pretty(&v).expect("report serializes");
    Ok(match &cli.command {
        Command::Compute(a) => {
            let r = cmd_compute(a)?;
            if a.json {
                pretty(serde_json::to_value(&r).expect("report serializes"))
            } else {
                format!(
                    "Tor = {} (N = {}, {}-bit, f = {}, {} workers, {:.3} s)",
                    r.value_digits, r.n_modes, r.precision.width_bits, r.precision.frac_bits, r.workers, r.wall_time_s
                )
            }
        }
        Command::Oracle(a) => pretty(cmd_oracle(a)?),
        Command::Gen(a) => pretty(cmd_gen(a)?),
        Command::Compress(a) => pretty(cmd_compress(a)?),
        Command::PartitionCheck(a) => pretty(cmd_partition_check(a)?),
        Command::Flops(a) => pretty(cmd_flops(a)?),
        Command::Sched(a) => pretty(cmd_sched(a)?),
    })
}
