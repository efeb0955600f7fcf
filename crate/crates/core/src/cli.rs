//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infinite seminorm or norm,
//! 3 verification failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_model::{sample, FunctionSpec};
use crate::holder_analysis::{flat_norm_parts, FlatNorm};
use crate::numfmt;
use crate::root_calculus::Root;
use crate::theorem_suite::{run_suite, verify_main, write_suite_outputs, SuiteConfig, Verdict};
use crate::wavelet_engine::{build_basis, decay_fit, decompose, BoundaryMode, DEFAULT_COARSE_LEVEL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFINITE: i32 = 2;
pub const EXIT_FAILURES: i32 = 3;

/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "HOLDERCONE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "holdercone", version, about = "Flatness seminorms, Hölder cones and wavelet decay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hölder and flatness (semi)norms of one function.
    Analyze(AnalyzeArgs),
    /// Wavelet level sups and decay fit of f^alpha.
    Decay(DecayArgs),
    /// Embedding check for one function.
    Certify(CertifyArgs),
    /// The full verification suite.
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Boundary {
    Interior,
    Periodized,
}

impl From<Boundary> for BoundaryMode {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Interior => BoundaryMode::InteriorOnly,
            Boundary::Periodized => BoundaryMode::Periodized,
        }
    }
}

#[derive(Debug, Args)]
pub struct FunctionArg {
    /// Function as a JSON file path or inline JSON.
    #[arg(long)]
    pub function: String,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub function: FunctionArg,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 12)]
    pub grid_level: u32,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub function: FunctionArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 14)]
    pub grid_level: u32,
    #[arg(long, default_value_t = 4)]
    pub wavelet_order: usize,
    #[arg(long, value_enum, default_value_t = Boundary::Interior)]
    pub boundary: Boundary,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// `csv` additionally writes every coefficient to coefficients.csv.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub function: FunctionArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 14)]
    pub grid_level: u32,
    #[arg(long, default_value_t = 5)]
    pub wavelet_order: usize,
    #[arg(long, value_enum, default_value_t = Boundary::Interior)]
    pub boundary: Boundary,
    #[arg(long, default_value_t = 50.0)]
    pub budget: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Suite configuration; the built-in default when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses inline JSON (anything starting with `{`) or reads a file.
pub fn load_function(arg: &str) -> Result<FunctionSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Error::InvalidParameter(format!("{arg}: {e}")))?
    };
    FunctionSpec::from_json(&text)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalyzeReport<'a> {
    function: &'a FunctionSpec,
    #[serde(with = "numfmt::real")]
    beta: f64,
    grid_level: u32,
    #[serde(flatten)]
    norms: &'a FlatNorm,
}

fn analyze(a: &AnalyzeArgs) -> Result<i32> {
    let f = load_function(&a.function.function)?;
    prepare_out(&a.out)?;
    let norms = flat_norm_parts(&f, a.beta, a.grid_level)?;
    match a.format {
        Format::Json => {
            let report = AnalyzeReport {
                function: &f,
                beta: a.beta,
                grid_level: a.grid_level,
                norms: &norms,
            };
            write_json(&a.out.join("analysis.json"), &report)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_path(a.out.join("analysis.csv"))?;
            w.write_record(["quantity", "value"])?;
            for (k, v) in [
                ("sup", norms.holder.sup),
                ("derivative_sup", norms.holder.derivative_sup),
                ("holder_seminorm", norms.holder.seminorm.value),
                ("holder_norm", norms.holder.total),
                ("flatness_seminorm", norms.flatness.value),
                ("flat_norm", norms.total),
            ] {
                w.write_record([k.to_string(), numfmt::fmt17(v)])?;
            }
            w.flush()?;
        }
    }
    println!(
        "holder_norm={} flatness_seminorm={} flat_norm={}",
        numfmt::fmt17(norms.holder.total),
        numfmt::fmt17(norms.flatness.value),
        numfmt::fmt17(norms.total)
    );
    Ok(if norms.total.is_finite() {
        EXIT_OK
    } else {
        EXIT_INFINITE
    })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum FitOutput {
    Fit(crate::wavelet_engine::DecaySlopeFit),
    Degenerate { degenerate_fit: bool, usable_levels: usize, j_lo: u32, j_hi: u32 },
}

fn decay(a: &DecayArgs) -> Result<i32> {
    let f = load_function(&a.function.function)?;
    let basis = build_basis(a.wavelet_order, a.boundary.into())?;
    let s = a.alpha * a.beta;
    if s >= a.wavelet_order as f64 {
        return Err(Error::RegularityMismatch {
            beta: s,
            order: a.wavelet_order,
        });
    }
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {}", a.alpha)));
    }
    prepare_out(&a.out)?;
    let norm = flat_norm_parts(&f, a.beta, a.grid_level)?.total;
    let root = Root::new(&f, a.alpha);
    let dec = decompose(&sample(&root, a.grid_level)?, &basis, DEFAULT_COARSE_LEVEL)?;
    let interior = basis.boundary_mode.interior_only();

    let mut w = csv::Writer::from_path(a.out.join("levels.csv"))?;
    w.write_record(["j", "level_sup", "bound_value"])?;
    for j in dec.levels() {
        let bound = norm.powf(a.alpha) * (-(j as f64) * (s + 0.5)).exp2();
        w.write_record([
            j.to_string(),
            numfmt::fmt17(dec.resolved_sup(j, interior)?),
            numfmt::fmt17(bound),
        ])?;
    }
    w.flush()?;

    let (lo, hi) = dec.default_fit_range();
    let fit = match decay_fit(&dec, lo, hi, interior) {
        Ok(fit) => {
            println!("regularity_estimate={}", numfmt::fmt17(fit.regularity_estimate));
            FitOutput::Fit(fit)
        }
        Err(Error::DegenerateFit { usable }) => {
            println!("degenerate fit: {usable} usable levels");
            FitOutput::Degenerate {
                degenerate_fit: true,
                usable_levels: usable,
                j_lo: lo,
                j_hi: hi,
            }
        }
        Err(e) => return Err(e),
    };
    write_json(&a.out.join("fit.json"), &fit)?;
    if a.format == Format::Csv {
        dec.write_csv(fs::File::create(a.out.join("coefficients.csv"))?)?;
    }
    Ok(EXIT_OK)
}

fn certify(a: &CertifyArgs) -> Result<i32> {
    let f = load_function(&a.function.function)?;
    let basis = build_basis(a.wavelet_order, a.boundary.into())?;
    prepare_out(&a.out)?;
    let reports = verify_main(&f, a.alpha, a.beta, &basis, a.grid_level, a.budget)?;
    write_json(&a.out.join("certify.json"), &reports)?;
    for r in &reports {
        println!("{} {} {}", r.claim_id, r.verdict, numfmt::fmt17(r.measured_constant));
    }
    Ok(if reports.iter().all(|r| r.verdict == Verdict::NotApplicable) {
        EXIT_INFINITE
    } else if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_FAILURES
    } else {
        EXIT_OK
    })
}

fn suite(a: &SuiteArgs) -> Result<i32> {
    let cfg = match &a.config {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::default(),
    };
    let outcome = run_suite(&cfg)?;
    write_suite_outputs(&outcome.reports, &a.out)?;
    let failures = outcome.reports.iter().filter(|r| r.is_unexpected_failure()).count();
    let expected = outcome.reports.iter().filter(|r| r.allow_listed).count();
    println!(
        "{} reports, {failures} unexpected failures, {expected} allow-listed",
        outcome.reports.len()
    );
    Ok(if outcome.passed { EXIT_OK } else { EXIT_FAILURES })
}

/// Applies `HOLDERCONE_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second initialization (e.g. in tests) keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a parsed command and maps errors to exit code 1.
pub fn run(cli: &Cli) -> i32 {
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Decay(a) => decay(a),
        Command::Certify(a) => certify(a),
        Command::Suite(a) => suite(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

/// Parses `args` (program name first) and runs; help and version exit 0,
/// other parse errors exit 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
