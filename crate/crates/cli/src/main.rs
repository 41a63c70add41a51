//! Command-line front end: fit CSV data, run replication studies, emit
//! transform diagnostic curves. All outputs are machine-readable and start
//! with a `#config:` line echoing the fully resolved configuration.

use clap::{Args, Parser, Subcommand};
use nefreg::diagnostics::{bias_order_check, bias_variance_curve, DiagCurve, DiagPoint};
use nefreg::estimator::{fit, FitConfig, DEFAULT_J0};
use nefreg::families::{FamilyModel, VstVariant};
use nefreg::thresholding::ShrinkRule;
use nefreg::wavelet::WaveletFilter;
use nefreg::{
    bench, mc_transform_moments, run_simulation, BinRegime, Error as CoreError, SimConfig,
    TestSignalKind,
};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_BAD_CONFIG: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_PARTIAL: u8 = 5;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_BAD_CONFIG, message: message.into() }
    }
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_BAD_INPUT, message: message.into() }
    }
    fn numeric(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERIC, message: message.into() }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "nefreg", version, about = "Wavelet regression for count-like data")]
struct Cli {
    /// Worker threads (falls back to NEFREG_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a mean curve to a single-column (or index,value) CSV.
    Fit(FitArgs),
    /// Run a seeded replication study over test signals.
    Simulate(SimArgs),
    /// Emit exact transform bias/variance diagnostics.
    VstDiag(DiagArgs),
}

#[derive(Args)]
struct FamilyArgs {
    /// poisson | binomial | negbinomial | gamma | nefghs | gammapoisson | betabinomial
    #[arg(long)]
    family: String,
    /// Per-observation trial count / shape (binomial, negbinomial, gamma, nefghs, betabinomial).
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Beta-binomial concentration.
    #[arg(long)]
    k: Option<f64>,
    /// Overdispersion (gammapoisson, betabinomial).
    #[arg(long)]
    sigma: Option<f64>,
}

impl FamilyArgs {
    fn build(&self) -> CliResult<FamilyModel> {
        let whole = |r: f64| -> CliResult<u32> {
            if r.fract() == 0.0 && r >= 1.0 && r <= u32::MAX as f64 {
                Ok(r as u32)
            } else {
                Err(CliError::config(format!("--r {r} must be a positive integer here")))
            }
        };
        let model = match self.family.to_ascii_lowercase().as_str() {
            "poisson" => Ok(FamilyModel::poisson()),
            "binomial" | "bernoulli" => FamilyModel::binomial(whole(self.r)?),
            "negbinomial" => FamilyModel::neg_binomial(self.r),
            "gamma" => FamilyModel::gamma(self.r),
            "nefghs" => FamilyModel::nef_ghs(self.r),
            "gammapoisson" => {
                let sigma = self
                    .sigma
                    .ok_or_else(|| CliError::config("gammapoisson needs --sigma"))?;
                FamilyModel::gamma_poisson(sigma)
            }
            "betabinomial" => {
                let k = self
                    .k
                    .ok_or_else(|| CliError::config("betabinomial needs --k"))?;
                FamilyModel::beta_binomial(whole(self.r)?, k, self.sigma.unwrap_or(1.0))
            }
            other => return Err(CliError::config(format!("unknown family `{other}`"))),
        };
        model.map_err(|e| CliError::config(format!("invalid family: {e}")))
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Transform: mm | bartlett | c0 | anscombe | c38 | gen | c<offset>
    #[arg(long, default_value = "mm")]
    vst: String,
    /// blockjs | neighcoeff
    #[arg(long, default_value = "blockjs")]
    rule: String,
    /// qvf | gen (bin-count scaling regime)
    #[arg(long, default_value = "qvf")]
    regime: String,
    /// symmlet8 | haar
    #[arg(long, default_value = "symmlet8")]
    wavelet: String,
    #[arg(long, default_value_t = DEFAULT_J0)]
    j0: usize,
    /// Explicit power-of-two bin count.
    #[arg(long)]
    t_override: Option<usize>,
    /// Counts-per-bin rule for picking the bin count.
    #[arg(long)]
    target_per_bin: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
    #[arg(long)]
    block_length: Option<usize>,
    /// The fit is deterministic; accepted for interface symmetry.
    #[arg(long)]
    seedless: bool,
    /// Input CSV: one value per line, or `index,value`.
    input: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma-separated: doppler,bumps,blocks,heavisine
    #[arg(long, default_value = "doppler,bumps,blocks,heavisine")]
    signals: String,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "1024")]
    n_list: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated transform tokens.
    #[arg(long, default_value = "mm")]
    vsts: String,
    /// Comma-separated rules.
    #[arg(long, default_value = "blockjs")]
    rules: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Mean-scale normalization range `lo:hi` (family default when omitted).
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    target_per_bin: Option<f64>,
    /// Output base path; writes `<base>.json` and `<base>.csv`.
    #[arg(short, long, default_value = "simreport")]
    output: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Bin size for a fixed-m curve over `--grid`.
    #[arg(long)]
    m: Option<usize>,
    /// Bin-size sweep `lo:hi` for a per-m bias table at `--mu`.
    #[arg(long)]
    m_range: Option<String>,
    /// Comma-separated transform tokens.
    #[arg(long)]
    variants: String,
    /// Mean grid `lo:hi:steps`.
    #[arg(long)]
    grid: Option<String>,
    /// Mean for `--m-range` sweeps.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Fall back to seeded Monte Carlo for families without exact moments.
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 100_000)]
    mc_draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for the per-variant CSV files.
    #[arg(short, long, default_value = ".")]
    outdir: PathBuf,
}

fn parse_vst(token: &str) -> CliResult<VstVariant> {
    bench::parse_variant(token).map_err(|e| CliError::config(e.to_string()))
}

fn parse_rule(token: &str) -> CliResult<ShrinkRule> {
    bench::parse_rule(token).map_err(|e| CliError::config(e.to_string()))
}

fn parse_list<T, F>(raw: &str, parse: F) -> CliResult<Vec<T>>
where
    F: Fn(&str) -> CliResult<T>,
{
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::config("empty list"));
    }
    items.into_iter().map(parse).collect()
}

fn parse_pair(raw: &str, what: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::config(format!("{what} must be `lo:hi`, got `{raw}`")));
    }
    let lo = parts[0]
        .parse()
        .map_err(|_| CliError::config(format!("bad {what} `{raw}`")))?;
    let hi = parts[1]
        .parse()
        .map_err(|_| CliError::config(format!("bad {what} `{raw}`")))?;
    Ok((lo, hi))
}

fn parse_grid(raw: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!("--grid must be `lo:hi:steps`, got `{raw}`")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid `{raw}`")))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid `{raw}`")))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid `{raw}`")))?;
    // the negated form also rejects NaN endpoints
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if steps < 2 || !(lo < hi) {
        return Err(CliError::config(format!("bad grid `{raw}`")));
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Reads a one-column (or `index,value`) CSV; a non-numeric first token marks
/// a header row.
fn read_series(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let value = match fields.len() {
            1 => fields[0],
            2 => fields[1],
            n => {
                return Err(CliError::input(format!(
                    "{}:{}: expected 1 or 2 columns, found {n}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        match value.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if lineno == 0 && fields[0].parse::<f64>().is_err() => continue, // header
            Err(_) => {
                return Err(CliError::input(format!(
                    "{}:{}: cannot parse `{value}`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(values)
}

fn open_out(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn config_header<T: Serialize>(config: &T) -> String {
    format!("#config: {}", serde_json::to_string(config).expect("config serializes"))
}

fn core_numeric(e: CoreError) -> CliError {
    CliError::numeric(e.to_string())
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let family = args.family.build()?;
    let variant = parse_vst(&args.vst)?;
    let rule = parse_rule(&args.rule)?;
    let regime = match args.regime.to_ascii_lowercase().as_str() {
        "qvf" => BinRegime::Qvf,
        "gen" => BinRegime::GeneralNef,
        other => return Err(CliError::config(format!("bad regime `{other}`"))),
    };
    let filter = WaveletFilter::by_name(&args.wavelet)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut cfg = FitConfig::new(family, variant, rule);
    cfg.regime = regime;
    cfg.filter = filter;
    cfg.j0 = args.j0;
    cfg.t_override = args.t_override;
    cfg.target_per_bin = args.target_per_bin;
    cfg.noise_variance = args.noise_variance;
    cfg.block_length = args.block_length;

    let y = read_series(&args.input)?;
    let result = fit(&y, &cfg).map_err(core_numeric)?;
    eprintln!(
        "n={} T={} clamp_events={}",
        y.len(),
        result.grid.len(),
        result.clamp_events
    );

    let mut body = String::new();
    body.push_str(&config_header(&cfg));
    body.push_str("\nt,f_hat,g_hat\n");
    for ((t, f), g) in result.grid.iter().zip(&result.f_hat).zip(&result.g_hat) {
        body.push_str(&format!("{t},{f},{g}\n"));
    }
    match &args.output {
        Some(path) => open_out(path)?
            .write_all(body.as_bytes())
            .map_err(|e| CliError::input(e.to_string()))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_simulate(args: &SimArgs) -> CliResult<()> {
    let family = args.family.build()?;
    let mut cfg = SimConfig::new(family, args.seed);
    cfg.signals = parse_list(&args.signals, |s| {
        TestSignalKind::by_name(s).map_err(|e| CliError::config(e.to_string()))
    })?;
    cfg.n_list = parse_list(&args.n_list, |s| {
        s.parse()
            .map_err(|_| CliError::config(format!("bad sample size `{s}`")))
    })?;
    cfg.variants = parse_list(&args.vsts, parse_vst)?;
    cfg.rules = parse_list(&args.rules, parse_rule)?;
    cfg.replications = args.reps;
    cfg.target_per_bin = args.target_per_bin;
    if let Some(raw) = &args.range {
        cfg.range = Some(parse_pair(raw, "--range")?);
    }

    let report = run_simulation(&cfg).map_err(|e| CliError::config(e.to_string()))?;
    let header = config_header(&cfg);

    let json_path = args.output.with_extension("json");
    let mut w = open_out(&json_path)?;
    writeln!(w, "{header}").map_err(|e| CliError::input(e.to_string()))?;
    report
        .write_json(&mut w)
        .map_err(|e| CliError::input(e.to_string()))?;

    let csv_path = args.output.with_extension("csv");
    let mut w = open_out(&csv_path)?;
    writeln!(w, "{header}").map_err(|e| CliError::input(e.to_string()))?;
    report
        .write_csv(&mut w)
        .map_err(|e| CliError::input(e.to_string()))?;

    eprintln!(
        "{} cells -> {} / {}",
        report.cells.len(),
        json_path.display(),
        csv_path.display()
    );
    if report.has_failures() {
        return Err(CliError {
            code: EXIT_PARTIAL,
            message: "some cells failed; see the error column".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagFileConfig {
    family: FamilyModel,
    variant: VstVariant,
    m: Option<usize>,
    m_range: Option<(usize, usize)>,
    mu_grid_len: usize,
    mu: f64,
    mc: bool,
    mc_draws: usize,
    seed: u64,
}

fn mc_curve(
    family: FamilyModel,
    variant: VstVariant,
    m: usize,
    grid: &[f64],
    draws: usize,
    seed: u64,
) -> CliResult<DiagCurve> {
    let sqrt_m = (m as f64).sqrt();
    let mut points = Vec::with_capacity(grid.len());
    for (i, &mu) in grid.iter().enumerate() {
        let g = family.g_apply(mu).map_err(core_numeric)?;
        let (mean, variance) =
            mc_transform_moments(family, variant, mu, m, draws, seed ^ (i as u64) << 32)
                .map_err(core_numeric)?;
        points.push(DiagPoint {
            mu,
            scaled_bias: sqrt_m * (mean - g),
            scaled_variance: m as f64 * variance.unwrap_or(f64::NAN),
            truncation_bound: f64::NAN,
        });
    }
    Ok(DiagCurve { family, m, variant, grid: points })
}

fn cmd_vst_diag(args: &DiagArgs) -> CliResult<()> {
    let family = args.family.build()?;
    let variants = parse_list(&args.variants, parse_vst)?;
    let exact_supported = nefreg::exact_transform_moments(
        family,
        variants[0],
        family.mean_domain().0.max(0.1) + 0.4,
        2,
    ) != Err(CoreError::UnsupportedFamily);
    if !exact_supported && !args.mc {
        return Err(CliError::numeric(
            "family has no exact moments; pass --mc for a Monte Carlo fallback",
        ));
    }
    let fam_tag = args.family.family.to_ascii_lowercase();

    match (&args.m, &args.m_range) {
        (Some(m), None) => {
            let grid_raw = args
                .grid
                .as_deref()
                .ok_or_else(|| CliError::config("--m needs --grid lo:hi:steps"))?;
            let grid = parse_grid(grid_raw)?;
            for &variant in &variants {
                let curve = if exact_supported {
                    bias_variance_curve(family, variant, *m, &grid).map_err(core_numeric)?
                } else {
                    mc_curve(family, variant, *m, &grid, args.mc_draws, args.seed)?
                };
                let name = format!("{fam_tag}_{}_m{m}.csv", bench::variant_name(variant));
                let path = args.outdir.join(name);
                let mut w = open_out(&path)?;
                let cfg = DiagFileConfig {
                    family,
                    variant,
                    m: Some(*m),
                    m_range: None,
                    mu_grid_len: grid.len(),
                    mu: args.mu,
                    mc: !exact_supported,
                    mc_draws: args.mc_draws,
                    seed: args.seed,
                };
                writeln!(w, "{}", config_header(&cfg)).map_err(|e| CliError::input(e.to_string()))?;
                curve.write_csv(&mut w).map_err(|e| CliError::input(e.to_string()))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        (None, Some(raw)) => {
            let (lo, hi) = parse_pair(raw, "--m-range")?;
            let (lo, hi) = (lo as usize, hi as usize);
            if lo < 1 || hi <= lo {
                return Err(CliError::config(format!("bad --m-range `{raw}`")));
            }
            let m_list: Vec<usize> = (lo..=hi).collect();
            for &variant in &variants {
                let rows = if exact_supported {
                    bias_order_check(family, variant, args.mu, &m_list).map_err(core_numeric)?
                } else {
                    let g = family.g_apply(args.mu).map_err(core_numeric)?;
                    m_list
                        .iter()
                        .map(|&m| {
                            let (mean, _) = mc_transform_moments(
                                family, variant, args.mu, m, args.mc_draws,
                                args.seed ^ (m as u64) << 32,
                            )
                            .map_err(core_numeric)?;
                            let bias = mean - g;
                            Ok((m, bias, bias * (m * m) as f64))
                        })
                        .collect::<CliResult<Vec<_>>>()?
                };
                let name = format!(
                    "{fam_tag}_{}_mrange{lo}-{hi}.csv",
                    bench::variant_name(variant)
                );
                let path = args.outdir.join(name);
                let mut w = open_out(&path)?;
                let cfg = DiagFileConfig {
                    family,
                    variant,
                    m: None,
                    m_range: Some((lo, hi)),
                    mu_grid_len: 0,
                    mu: args.mu,
                    mc: !exact_supported,
                    mc_draws: args.mc_draws,
                    seed: args.seed,
                };
                writeln!(w, "{}", config_header(&cfg)).map_err(|e| CliError::input(e.to_string()))?;
                writeln!(w, "m,bias,m2_bias").map_err(|e| CliError::input(e.to_string()))?;
                for (m, bias, scaled) in rows {
                    writeln!(w, "{m},{bias},{scaled}").map_err(|e| CliError::input(e.to_string()))?;
                }
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        _ => Err(CliError::config("pass exactly one of --m or --m-range")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("NEFREG_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }
    let outcome = match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::VstDiag(args) => cmd_vst_diag(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
