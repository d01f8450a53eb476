//! `entorder`: generate, validate and compare Schmidt spectra from the
//! command line. Every report is canonical JSON, so identical invocations
//! produce identical bytes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use entanglement_order::convertibility::ConvertibilityError;
use entanglement_order::families::{FamilyError, FamilyParams, FamilyTag};
use entanglement_order::io::{read_spectrum, spectrum_to_string, to_canonical_json, IoError};
use entanglement_order::oscillation::OscillationError;
use entanglement_order::{
    estimate_r_bounds, excitation_remainder_bound, incomparability_certificate, locc_compare,
    locc_convertible, max_probability, slocc_decide, summary_stats, tmss, vidal_conditions, xi,
    xi_family_offset, Certificate, ConditionReport, DeltaConvention, Estimate, OffsetSearch,
    Spectrum, SummaryStats, TrendThresholds, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OPERATION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Operation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Operation(_) => EXIT_OPERATION,
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::QOutOfRange(_) | FamilyError::InvalidParameter(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Operation(other.to_string()),
        }
    }
}

impl From<ConvertibilityError> for CliError {
    fn from(e: ConvertibilityError) -> Self {
        CliError::Operation(e.to_string())
    }
}

impl From<OscillationError> for CliError {
    fn from(e: OscillationError) -> Self {
        match e {
            OscillationError::InvalidThresholds(_) => CliError::Usage(e.to_string()),
            other => CliError::Operation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "entorder",
    version,
    about = "Convertibility order of pure bipartite states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a spectrum file against the Vidal-monotone conditions.
    Validate {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Summary statistics of a spectrum file.
    Info {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a member of a state family.
    Gen(GenArgs),
    /// Compare two spectra.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Slocc)]
        mode: Mode,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Search for an incomparability certificate between two spectra.
    Certify {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate the monotones R⁻ and R⁺ of a state against the ξ_r family.
    EstimateR(EstimateArgs),
    /// Check probabilities against a brute-force oracle on random spectra.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Locc,
    Prob,
    Slocc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Tmss,
    Xi,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Schmidt,
    Amplitude,
}

impl From<ConventionArg> for DeltaConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Schmidt => DeltaConvention::Schmidt,
            ConventionArg::Amplitude => DeltaConvention::Amplitude,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub family: FamilyArg,
    /// Squeezing parameter; sets the grid step through the convention.
    #[arg(long, conflicts_with = "delta")]
    pub q: Option<f64>,
    /// Grid step Δ (default 1e6 for xi and psi).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = ConventionArg::Schmidt)]
    pub delta_convention: ConventionArg,
    /// Number of stored weights.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Interval of r over which a shared xi offset is searched.
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_max: f64,
    /// Fixed offset instead of a search.
    #[arg(long)]
    pub offset: Option<f64>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub margin: f64,
}

impl SearchArgs {
    fn to_search(&self) -> Result<OffsetSearch<f64>, CliError> {
        let ok = self.grid_step > 0.0
            && self.grid_step.is_finite()
            && self.horizon > 0.0
            && self.horizon.is_finite()
            && self.margin.is_finite();
        if !ok {
            return Err(CliError::Usage(format!(
                "invalid offset search: grid step {}, horizon {}, margin {}",
                self.grid_step, self.horizon, self.margin
            )));
        }
        Ok(OffsetSearch {
            grid_step: self.grid_step,
            horizon: self.horizon,
            margin: self.margin,
            max_offset: None,
        })
    }
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub window_start: Option<usize>,
    /// Last index of the comparison window (default: largest safe index).
    #[arg(long)]
    pub window_end: Option<usize>,
}

impl WindowArgs {
    fn to_window(&self) -> Result<Option<Window>, CliError> {
        match (self.window_start, self.window_end) {
            (None, None) => Ok(None),
            (_, None) => Err(CliError::Usage(
                "--window-start requires --window-end".into(),
            )),
            (start, Some(end)) => {
                let start = start.unwrap_or(0);
                if end < start {
                    return Err(CliError::Usage(format!("empty window [{start}, {end}]")));
                }
                Ok(Some(Window::new(start, end)))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 5.0)]
    pub drift_nats: f64,
    #[arg(long, default_value_t = 3)]
    pub min_windows: usize,
    #[arg(long, default_value_t = 64)]
    pub min_points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub truncation_tolerance: f64,
}

impl ThresholdArgs {
    fn to_thresholds(&self) -> Result<TrendThresholds, CliError> {
        let th = TrendThresholds {
            drift_nats: self.drift_nats,
            min_windows: self.min_windows,
            min_points: self.min_points,
            truncation_tolerance: self.truncation_tolerance,
        };
        th.validate()?;
        Ok(th)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub psi: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimateFamily::Xi)]
    pub family: EstimateFamily,
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 21)]
    pub steps: usize,
    /// Family grid step (default: the `delta` recorded in the input file).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Family length (default: the length of the input spectrum).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateFamily {
    Xi,
}

/// Parses `args` (including the program name), executes the command and
/// returns the process exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<Spectrum, CliError> {
    read_spectrum(path).map_err(|e| match e {
        IoError::Io { .. } => CliError::Input(e.to_string()),
        IoError::Parse { .. } | IoError::Validation(_) => {
            CliError::Input(format!("{}: {e}", path.display()))
        }
    })
}

fn emit<S: Serialize>(
    value: &S,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = to_canonical_json(value).map_err(|e| CliError::Operation(e.to_string()))?;
    write_text(&text, output, out)
}

fn write_text(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Operation(format!("{}: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Operation(e.to_string())),
    }
}

#[derive(Serialize)]
struct ValidateReport {
    all_pass: bool,
    conditions: ConditionReport<f64>,
    exact: bool,
    len: usize,
}

#[derive(Serialize)]
struct InfoReport {
    exact: bool,
    excitation_remainder_bound: Option<f64>,
    len: usize,
    log10_tail_bound: f64,
    metadata: entanglement_order::Metadata,
    stats: SummaryStats<f64>,
    tail_bound: f64,
}

#[derive(Serialize)]
struct CertifyReport {
    certificate: Option<Certificate>,
    found: bool,
}

#[derive(Serialize)]
struct FamilySetup {
    delta: f64,
    family: &'static str,
    n: usize,
    offset: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    estimate: Estimate,
    family: FamilySetup,
}

#[derive(Serialize)]
struct SelftestReport {
    convertible_pairs: usize,
    max_abs_error: f64,
    mismatches: usize,
    pairs: usize,
    passed: bool,
    seed: u64,
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { file, output } => {
            let s = load(&file)?;
            let conditions = vidal_conditions(&s);
            emit(
                &ValidateReport {
                    all_pass: conditions.all_pass(),
                    conditions,
                    exact: s.is_exact(),
                    len: s.len(),
                },
                output.as_deref(),
                out,
            )
        }
        Command::Info { file, output } => {
            let s = load(&file)?;
            emit(
                &InfoReport {
                    exact: s.is_exact(),
                    excitation_remainder_bound: excitation_remainder_bound(&s),
                    len: s.len(),
                    log10_tail_bound: s.log_tail() / std::f64::consts::LN_10,
                    metadata: s.metadata().clone(),
                    stats: summary_stats(&s),
                    tail_bound: s.tail_bound(),
                },
                output.as_deref(),
                out,
            )
        }
        Command::Gen(args) => {
            let s = generate(&args)?;
            write_text(&spectrum_to_string(&s), args.output.as_deref(), out)
        }
        Command::Compare {
            a,
            b,
            mode,
            window,
            thresholds,
            output,
        } => {
            let (sa, sb) = (load(&a)?, load(&b)?);
            let report = match mode {
                Mode::Locc => locc_compare(&sa, &sb, false)?,
                Mode::Prob => locc_compare(&sa, &sb, true)?,
                Mode::Slocc => {
                    slocc_decide(&sa, &sb, window.to_window()?, &thresholds.to_thresholds()?)?
                }
            };
            emit(&report, output.as_deref(), out)
        }
        Command::Certify {
            a,
            b,
            window,
            thresholds,
            output,
        } => {
            let (sa, sb) = (load(&a)?, load(&b)?);
            let certificate = incomparability_certificate(
                &sa,
                &sb,
                window.to_window()?,
                &thresholds.to_thresholds()?,
            )?;
            emit(
                &CertifyReport {
                    found: certificate.is_some(),
                    certificate,
                },
                output.as_deref(),
                out,
            )
        }
        Command::EstimateR(args) => estimate(&args, out),
        Command::Selftest {
            seed,
            pairs,
            output,
        } => emit(&selftest(seed, pairs)?, output.as_deref(), out),
    }
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be positive, got {x}"
        )))
    }
}

/// Builds the spectrum described by `gen` flags.
pub fn generate(args: &GenArgs) -> Result<Spectrum, CliError> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let convention: DeltaConvention = args.delta_convention.into();
    let search = args.search.to_search()?;
    let family = match args.family {
        FamilyArg::Tmss => FamilyTag::Tmss,
        FamilyArg::Xi => FamilyTag::Xi,
        FamilyArg::Psi => FamilyTag::Psi,
    };
    if let Some(q) = args.q {
        if !(0.0..1.0).contains(&q) {
            return Err(FamilyError::QOutOfRange(q).into());
        }
        if q == 0.0 {
            if family == FamilyTag::Tmss {
                return Ok(tmss(0.0, args.n)?);
            }
            return Err(CliError::Usage(
                "--q 0 only describes a product state".into(),
            ));
        }
    }
    let delta = match (args.q, args.delta) {
        (Some(q), _) => convention.delta_from_q(q),
        (None, Some(d)) => positive("delta", d)?,
        (None, None) if family == FamilyTag::Tmss => {
            return Err(CliError::Usage("gen tmss needs --q or --delta".into()));
        }
        (None, None) => 1e6,
    };
    let r = positive("r", args.r)?;
    let offset = match (family, args.offset) {
        (_, Some(a)) => Some(a),
        (FamilyTag::Xi, None) => {
            let (lo, hi) = (args.r_min.min(r), args.r_max.max(r));
            positive("r-min", lo)?;
            Some(xi_family_offset(lo, hi, 21, &search)?)
        }
        _ => None,
    };
    let params = FamilyParams {
        family,
        delta,
        horizon: args.n,
        q: args.q,
        r,
        k: args.k,
        offset,
    };
    let s = params.generate(&search)?;
    if args.q.is_some() {
        let mut meta = s.metadata().clone();
        let name = match convention {
            DeltaConvention::Schmidt => "schmidt",
            DeltaConvention::Amplitude => "amplitude",
        };
        meta.insert("delta_convention".into(), name.into());
        return Ok(s.with_metadata(meta));
    }
    Ok(s)
}

fn estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let psi = load(&args.psi)?;
    let delta = match args.delta {
        Some(d) => positive("delta", d)?,
        None => psi
            .meta_value("delta")
            .ok_or_else(|| CliError::Usage("input has no delta metadata; pass --delta".into()))?,
    };
    let n = args.n.unwrap_or(psi.len());
    if n == 0 || args.steps == 0 {
        return Err(CliError::Usage("--n and --steps must be positive".into()));
    }
    positive("r-min", args.r_min)?;
    if args.r_max.is_nan()
        || args.r_min.is_nan()
        || args.r_max < args.r_min
        || !args.r_max.is_finite()
    {
        return Err(CliError::Usage(format!(
            "invalid r interval [{}, {}]",
            args.r_min, args.r_max
        )));
    }
    let search = args.search.to_search()?;
    let offset = match args.offset {
        Some(a) => a,
        None => xi_family_offset(args.r_min, args.r_max, args.steps.max(21), &search)?,
    };
    let estimate = estimate_r_bounds(
        &psi,
        |r| xi(r, delta, n, offset),
        args.r_min,
        args.r_max,
        args.steps,
        args.window.to_window()?,
        &args.thresholds.to_thresholds()?,
    )?;
    emit(
        &EstimateReport {
            estimate,
            family: FamilySetup {
                delta,
                family: "xi",
                n,
                offset,
            },
        },
        args.output.as_deref(),
        out,
    )
}

fn random_weights(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rank = rng.gen_range(1..=8);
    let raw: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn brute_probability(a: &[f64], b: &[f64]) -> f64 {
    let tail = |w: &[f64], n: usize| -> f64 { w.iter().skip(n).sum() };
    (0..b.len())
        .map(|n| tail(a, n) / tail(b, n))
        .fold(1.0, f64::min)
        .clamp(0.0, 1.0)
}

fn majorized(a: &[f64], b: &[f64]) -> bool {
    let (mut sa, mut sb) = (0.0, 0.0);
    for n in 0..a.len().max(b.len()) {
        sa += a.get(n).copied().unwrap_or(0.0);
        sb += b.get(n).copied().unwrap_or(0.0);
        if sa > sb + 1e-12 {
            return false;
        }
    }
    true
}

/// Compares `max_probability` and `locc_convertible` with direct
/// linear-domain computations on seeded random spectra of rank at most 8.
pub fn selftest(seed: u64, pairs: usize) -> Result<SelftestSummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SelftestReport {
        convertible_pairs: 0,
        max_abs_error: 0.0,
        mismatches: 0,
        pairs,
        passed: true,
        seed,
    };
    for _ in 0..pairs {
        let mut a = random_weights(&mut rng);
        let mut b = random_weights(&mut rng);
        a.sort_by(|x, y| y.total_cmp(x));
        b.sort_by(|x, y| y.total_cmp(x));
        let sa = Spectrum::build(&a, true).map_err(|e| CliError::Operation(e.to_string()))?;
        let sb = Spectrum::build(&b, true).map_err(|e| CliError::Operation(e.to_string()))?;
        let p = max_probability(&sa, &sb)?;
        let maj = majorized(&a, &b);
        let err = (p - brute_probability(&a, &b)).abs();
        report.max_abs_error = report.max_abs_error.max(err);
        if err > 1e-12 || (p == 1.0) != maj || locc_convertible(&sa, &sb)? != maj {
            report.mismatches += 1;
        }
        report.convertible_pairs += usize::from(maj);
    }
    report.passed = report.mismatches == 0;
    Ok(SelftestSummary(report))
}

/// Result of [`selftest`].
#[derive(Serialize)]
#[serde(transparent)]
pub struct SelftestSummary(SelftestReport);

impl SelftestSummary {
    pub fn passed(&self) -> bool {
        self.0.passed
    }

    pub fn mismatches(&self) -> usize {
        self.0.mismatches
    }

    pub fn max_abs_error(&self) -> f64 {
        self.0.max_abs_error
    }
}
