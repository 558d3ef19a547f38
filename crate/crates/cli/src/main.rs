//! Command-line surface for the sensitivity-analysis library.
//!
//! Exit codes: 0 success, 1 domain error (degenerate or infeasible inputs),
//! 2 usage error, 3 oracle residual breach.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use minni::contour;
use minni::index::{
    indifference_region_check, minni_difference, minni_ratio, BiasBudget, MinNIResult, Scale,
};
use minni::oracle;
use minni::strata::{self, StratumRow, StratumSummary, VarianceInputs};
use minni::summary::{
    ingest_records, ingest_records_as, read_records_csv, summarize_with, synthesize_summary,
    synthesize_summary_continuous, ObservedSummary, OutcomeKind, SdConvention,
};
use minni::surface::bias_grid;

#[derive(Parser)]
#[command(
    name = "minni",
    version,
    about = "Sensitivity analysis for nonignorably missing data"
)]
struct Cli {
    /// Key=value defaults for any long flag; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Emit diagnostics (including errors) as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize raw records, or synthesize a summary from stated quantities.
    Summarize(SummarizeArgs),
    /// Bias of the observed mean over a grid of sensitivity parameters.
    Surface(SurfaceArgs),
    /// Minimum nonignorability index for a designated bias budget.
    Minni(MinniArgs),
    /// Equal-bias contours and index boundary curves as CSV/SVG.
    Isobols(IsobolArgs),
    /// Per-stratum analysis over a discrete measured covariate.
    Strata(StrataArgs),
    /// Variance-gap decomposition at stated sensitivity parameters.
    Variance(VarianceArgs),
    /// Randomized exact-enumeration checks of every identity and bound.
    Oracle(OracleArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "synth"])))]
struct SummarizeArgs {
    /// CSV file with header `outcome[,stratum]`; empty or NA means missing.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    /// Build the summary from --mu-obs/--frac-missing/--n-observed instead.
    #[arg(long, requires_all = ["mu_obs", "frac_missing", "n_observed"])]
    synth: bool,

    #[arg(long, value_name = "REAL")]
    mu_obs: Option<f64>,

    #[arg(long, value_name = "PROB")]
    frac_missing: Option<f64>,

    #[arg(long, value_name = "COUNT")]
    n_observed: Option<usize>,

    /// Observed SD for synthesized continuous summaries.
    #[arg(long, value_name = "REAL")]
    sd_obs: Option<f64>,

    /// Force the outcome kind instead of classifying 0/1 data as binary.
    #[arg(long, value_name = "binary|continuous")]
    kind: Option<String>,

    /// SD denominator: population (default) or sample.
    #[arg(long, default_value = "population", value_name = "CONVENTION")]
    sd_convention: String,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Summary JSON produced by `minni summarize`.
    #[arg(long, value_name = "FILE")]
    summary: PathBuf,

    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    pi0: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    exp_beta1: Vec<f64>,

    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    exp_gamma1: Vec<f64>,

    #[arg(long, default_value = "csv", value_name = "csv|json")]
    format: String,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("budget").required(true).args(["k_se", "k_sigma"])))]
struct MinniArgs {
    #[arg(long, value_name = "FILE")]
    summary: PathBuf,

    #[arg(long, value_name = "difference|ratio")]
    scale: String,

    /// Bias budget in standard-error units of the observed mean.
    #[arg(long, value_name = "REAL")]
    k_se: Option<f64>,

    /// Bias budget as a multiple of the observed SD (the raw k).
    #[arg(long, value_name = "REAL")]
    k_sigma: Option<f64>,

    /// Confounder levels (difference scale only).
    #[arg(long, default_value_t = 2)]
    m: usize,

    /// Also report whether this parameter pair sits inside the region.
    #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"])]
    check: Option<Vec<f64>>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("outputs").required(true).multiple(true).args(["csv", "svg"])))]
struct IsobolArgs {
    #[arg(long, value_name = "FILE")]
    summary: PathBuf,

    /// surface (gamma1/beta1 bias isobols), ed-rd, or er-rr.
    #[arg(long, default_value = "surface", value_name = "PLANE")]
    plane: String,

    /// Pr[U=0] held fixed on the surface plane.
    #[arg(long, default_value_t = 0.5)]
    pi0: f64,

    /// exp(gamma1) range for the surface plane.
    #[arg(long, default_value = "1,4", value_name = "LO,HI")]
    exp_gamma1_range: String,

    /// exp(beta1) range for the surface plane.
    #[arg(long, default_value = "1,4", value_name = "LO,HI")]
    exp_beta1_range: String,

    /// Levels in SE units: bias levels of -k*SE on the surface plane,
    /// budgets of k*SE on the index planes.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,4,5,6")]
    levels_se: Vec<f64>,

    /// Absolute bias levels for the surface plane (overrides --levels-se).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,

    /// Field sampling resolution for the surface plane.
    #[arg(long, default_value_t = contour::DEFAULT_GRID)]
    grid: usize,

    /// Points sampled along each analytic boundary curve.
    #[arg(long, default_value_t = contour::DEFAULT_CURVE_SAMPLES)]
    samples: usize,

    /// Upper plotting bound for the er-rr plane.
    #[arg(long, default_value_t = 4.0)]
    max_ratio: f64,

    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("budget").required(true).args(["k_se", "k_sigma"])))]
struct StrataArgs {
    /// CSV file with header `outcome,stratum`.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    #[arg(long, value_name = "REAL")]
    k_se: Option<f64>,

    #[arg(long, value_name = "REAL")]
    k_sigma: Option<f64>,

    #[arg(long, default_value_t = 2)]
    m: usize,

    /// Per-stratum mean differences (one value broadcasts) for the bias column.
    #[arg(long, value_delimiter = ',')]
    ed: Option<Vec<f64>>,

    /// Per-stratum participation differences, paired with --ed.
    #[arg(long, value_delimiter = ',')]
    rd: Option<Vec<f64>>,

    #[arg(long, default_value = "csv", value_name = "csv|json")]
    format: String,

    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VarianceArgs {
    /// Var[Y|U=0] - Var[Y|U=1].
    #[arg(long, value_name = "REAL")]
    vd_yu: f64,

    /// Var[U|G=0] - Var[U|G=1].
    #[arg(long, value_name = "REAL")]
    vd_ug: f64,

    #[arg(long, value_name = "REAL")]
    ed: f64,

    #[arg(long, value_name = "REAL")]
    rd: f64,

    #[arg(long, value_name = "PROB")]
    pr_g1: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Binary joints to sweep.
    #[arg(long, default_value_t = 10_000)]
    binary: usize,

    /// Categorical joints (m in 2..=6) to sweep.
    #[arg(long, default_value_t = 10_000)]
    categorical: usize,

    #[arg(long, default_value_t = 20240814)]
    seed: u64,
}

fn main() -> ExitCode {
    let argv = match apply_config(std::env::args().collect()) {
        Ok(argv) => argv,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let json = cli.json;
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            if json {
                print_line(&format!("{{\"error\":{}}}", json_string(&err.to_string())));
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(1)
        }
    }
}

/// Merge `--config FILE` key=value pairs into argv as trailing flags,
/// skipping keys the user already passed so explicit flags win.
fn apply_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let path = argv
        .iter()
        .position(|a| a == "--config")
        .and_then(|i| argv.get(i + 1))
        .cloned();
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut merged = argv.clone();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {}: expected key=value, got {line:?}",
                lineno + 1
            ));
        };
        let flag = format!("--{}", key.trim());
        if argv.contains(&flag) {
            continue;
        }
        merged.push(flag);
        let value = value.trim();
        if value != "true" {
            merged.push(value.to_string());
        }
    }
    Ok(merged)
}

fn run(cli: Cli) -> minni::Result<ExitCode> {
    match cli.command {
        Command::Summarize(args) => summarize_cmd(args),
        Command::Surface(args) => surface_cmd(args),
        Command::Minni(args) => minni_cmd(args, cli.json),
        Command::Isobols(args) => isobol_cmd(args),
        Command::Strata(args) => strata_cmd(args),
        Command::Variance(args) => variance_cmd(args),
        Command::Oracle(args) => oracle_cmd(args, cli.json),
    }
}

fn json_string(s: &str) -> String {
    minni::fmt::json_string(s)
}

/// Write to stdout, treating a closed pipe as a normal early exit so that
/// `minni ... | head` stays quiet.
fn print_out(content: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout();
    let result = stdout
        .write_all(content.as_bytes())
        .and_then(|_| stdout.flush());
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

fn print_line(content: &str) {
    print_out(&format!("{content}\n"));
}

fn parse_kind(kind: &Option<String>) -> minni::Result<Option<OutcomeKind>> {
    match kind.as_deref() {
        None => Ok(None),
        Some("binary") => Ok(Some(OutcomeKind::Binary)),
        Some("continuous") => Ok(Some(OutcomeKind::Continuous)),
        Some(other) => Err(minni::Error::Parse {
            what: "outcome kind",
            detail: format!("expected binary or continuous, got {other:?}"),
        }),
    }
}

fn write_out(out: &Option<PathBuf>, content: &str) -> minni::Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print_out(content),
    }
    Ok(())
}

fn read_summary(path: &Path) -> minni::Result<ObservedSummary> {
    let text = fs::read_to_string(path)?;
    ObservedSummary::from_json(&text)
}

fn budget_from_flags(k_se: Option<f64>, k_sigma: Option<f64>) -> BiasBudget {
    match (k_se, k_sigma) {
        (Some(k), None) => BiasBudget::SeUnits(k),
        (None, Some(k)) => BiasBudget::SigmaUnits(k),
        // The clap group guarantees exactly one.
        _ => unreachable!("flag group enforces exactly one budget"),
    }
}

fn summarize_cmd(args: SummarizeArgs) -> minni::Result<ExitCode> {
    let summary = if args.synth {
        let mu = args.mu_obs.expect("required by clap");
        let frac = args.frac_missing.expect("required by clap");
        let n = args.n_observed.expect("required by clap");
        match (parse_kind(&args.kind)?, args.sd_obs) {
            (Some(OutcomeKind::Continuous), Some(sd)) => {
                synthesize_summary_continuous(mu, sd, frac, n)?
            }
            (Some(OutcomeKind::Continuous), None) => {
                return Err(minni::Error::Parse {
                    what: "synthesized summary",
                    detail: "continuous synthesis needs --sd-obs".into(),
                })
            }
            _ => synthesize_summary(mu, frac, n)?,
        }
    } else {
        let file = fs::File::open(args.input.as_ref().expect("required by clap"))?;
        let rows = read_records_csv(file)?;
        let data = match parse_kind(&args.kind)? {
            Some(kind) => ingest_records_as(rows, kind)?,
            None => ingest_records(rows)?,
        };
        let convention = match args.sd_convention.as_str() {
            "population" => SdConvention::Population,
            "sample" => SdConvention::Sample,
            other => {
                return Err(minni::Error::Parse {
                    what: "sd convention",
                    detail: format!("expected population or sample, got {other:?}"),
                })
            }
        };
        summarize_with(&data, convention)?
    };
    write_out(&args.out, &format!("{}\n", summary.to_json()))?;
    Ok(ExitCode::SUCCESS)
}

fn surface_cmd(args: SurfaceArgs) -> minni::Result<ExitCode> {
    let summary = read_summary(&args.summary)?;
    let grid = bias_grid(&summary, &args.pi0, &args.exp_beta1, &args.exp_gamma1);
    let content = match args.format.as_str() {
        "csv" => grid.to_csv(),
        "json" => format!("{}\n", grid.to_json()),
        other => return Err(minni::Error::UnsupportedFormat(other.to_string())),
    };
    write_out(&args.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn minni_cmd(args: MinniArgs, json_only: bool) -> minni::Result<ExitCode> {
    let summary = read_summary(&args.summary)?;
    let scale: Scale = args.scale.parse().map_err(|detail| minni::Error::Parse {
        what: "scale",
        detail,
    })?;
    let budget = budget_from_flags(args.k_se, args.k_sigma);
    let result: MinNIResult = match scale {
        Scale::Difference => {
            let k_sigma = budget.difference_budget(&summary)?;
            minni_difference(&summary, k_sigma, args.m, summary.outcome_kind)?
        }
        Scale::Ratio => {
            let k_cv = budget.ratio_budget(&summary)?;
            minni_ratio(&summary, k_cv)?
        }
    };
    if !json_only {
        let line = match result.rounded_index(2) {
            Some((a, b)) => format!(
                "MinNI ({}) = ({a:.2}, {b:.2}) at bias budget {:.6}",
                result.scale.as_str(),
                result.budget
            ),
            None => format!(
                "MinNI ({}) infeasible: threshold {:.6} cannot be met inside the domain",
                result.scale.as_str(),
                result.threshold
            ),
        };
        print_line(&line);
    }
    print_line(&result.to_json());
    if let Some(pair) = &args.check {
        let inside = indifference_region_check(scale, pair[0], pair[1], &summary, result.budget)?;
        print_line(&format!(
            "{{\"check\":[{},{}],\"inside_indifference_region\":{inside}}}",
            pair[0], pair[1]
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_range(text: &str, name: &'static str) -> minni::Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || minni::Error::Parse {
        what: name,
        detail: format!("expected LO,HI with HI > LO > 0, got {text:?}"),
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(hi > lo && lo > 0.0) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn isobol_cmd(args: IsobolArgs) -> minni::Result<ExitCode> {
    let summary = read_summary(&args.summary)?;
    let set = match args.plane.as_str() {
        "surface" => {
            let (glo, ghi) = parse_range(&args.exp_gamma1_range, "exp-gamma1-range")?;
            let (blo, bhi) = parse_range(&args.exp_beta1_range, "exp-beta1-range")?;
            let levels: Vec<f64> = match &args.levels {
                Some(levels) => levels.clone(),
                None => args.levels_se.iter().map(|k| -k * summary.se_obs).collect(),
            };
            contour::isobol_surface(
                &summary,
                args.pi0,
                (glo.ln(), ghi.ln()),
                (blo.ln(), bhi.ln()),
                &levels,
                args.grid,
            )?
        }
        "ed-rd" => contour::minni_curves(
            &summary,
            Scale::Difference,
            &args.levels_se,
            args.samples,
            None,
        )?,
        "er-rr" => contour::minni_curves(
            &summary,
            Scale::Ratio,
            &args.levels_se,
            args.samples,
            Some(args.max_ratio),
        )?,
        other => {
            return Err(minni::Error::Parse {
                what: "plane",
                detail: format!("expected surface, ed-rd, or er-rr, got {other:?}"),
            })
        }
    };
    if let Some(path) = &args.csv {
        fs::write(path, contour::emit(&set, "csv")?)?;
    }
    if let Some(path) = &args.svg {
        fs::write(path, contour::emit(&set, "svg")?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn broadcast(values: &[f64], n: usize, name: &'static str) -> minni::Result<Vec<f64>> {
    if values.len() == 1 {
        return Ok(vec![values[0]; n]);
    }
    if values.len() == n {
        return Ok(values.to_vec());
    }
    Err(minni::Error::Parse {
        what: name,
        detail: format!(
            "expected 1 or {n} comma-separated values, got {}",
            values.len()
        ),
    })
}

fn strata_cmd(args: StrataArgs) -> minni::Result<ExitCode> {
    let file = fs::File::open(&args.input)?;
    let rows = read_records_csv(file)?;
    let data = ingest_records(rows)?;
    let groups = data.by_stratum();
    if groups.is_empty() {
        return Err(minni::Error::EmptyInput);
    }
    let budget = budget_from_flags(args.k_se, args.k_sigma);

    // Summarize each stratum; failures become per-stratum notes.
    let mut summarized: Vec<(String, f64, minni::Result<ObservedSummary>)> = Vec::new();
    for (label, ds, weight) in &groups {
        summarized.push((label.clone(), *weight, minni::summary::summarize(ds)));
    }

    // Bias column only when sensitivity parameters are supplied and every
    // stratum is summarizable.
    let n = summarized.len();
    let biases: Option<Vec<f64>> = match (&args.ed, &args.rd) {
        (Some(ed), Some(rd)) if summarized.iter().all(|(_, _, s)| s.is_ok()) => {
            let eds = broadcast(ed, n, "--ed")?;
            let rds = broadcast(rd, n, "--rd")?;
            let strata: Vec<StratumSummary> = summarized
                .iter()
                .map(|(label, weight, s)| StratumSummary {
                    stratum: label.clone(),
                    summary: s.as_ref().unwrap().clone(),
                    weight: *weight,
                })
                .collect();
            let result = strata::stratified_bias(&strata, &eds, &rds)?;
            eprintln!("aggregate bias = {}", minni::fmt::sig(result.aggregate, 10));
            Some(result.per_stratum.iter().map(|(_, b)| *b).collect())
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(minni::Error::Parse {
                what: "sensitivity parameters",
                detail: "--ed and --rd must be given together".into(),
            })
        }
        _ => None,
    };

    let mut report: Vec<StratumRow> = Vec::new();
    for (i, (label, weight, s)) in summarized.iter().enumerate() {
        match s {
            Ok(summary) => {
                let minni_result = budget
                    .difference_budget(summary)
                    .and_then(|k| minni_difference(summary, k, args.m, summary.outcome_kind));
                let (minni_pair, feasible, note) = match minni_result {
                    Ok(r) => (r.index, Some(r.feasible), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                report.push(StratumRow {
                    stratum: label.clone(),
                    weight: *weight,
                    bias: biases.as_ref().map(|b| b[i]),
                    minni: minni_pair,
                    feasible,
                    note,
                });
            }
            Err(e) => report.push(StratumRow {
                stratum: label.clone(),
                weight: *weight,
                bias: None,
                minni: None,
                feasible: None,
                note: Some(e.to_string()),
            }),
        }
    }

    let content = match args.format.as_str() {
        "csv" => strata::strata_csv(&report),
        "json" => format!("{}\n", strata::strata_json(&report)),
        other => return Err(minni::Error::UnsupportedFormat(other.to_string())),
    };
    write_out(&args.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn variance_cmd(args: VarianceArgs) -> minni::Result<ExitCode> {
    if !(0.0..=1.0).contains(&args.pr_g1) {
        return Err(minni::Error::BadProbability {
            name: "pr_g1",
            value: args.pr_g1,
            range: "[0, 1]",
        });
    }
    let gap = strata::variance_gap(&VarianceInputs {
        vd_yu: args.vd_yu,
        vd_ug: args.vd_ug,
        ed_yu: args.ed,
        rd_ug: args.rd,
        pr_g1: args.pr_g1,
    });
    print_line(&format!(
        "{{\"variance_gap\":{}}}",
        minni::fmt::sig(gap, 10)
    ));
    Ok(ExitCode::SUCCESS)
}

fn oracle_cmd(args: OracleArgs, json_only: bool) -> minni::Result<ExitCode> {
    let report = oracle::run_identity_sweep(args.binary, args.categorical, args.seed);
    if !json_only {
        print_line(&format!(
            "oracle sweep: {} binary + {} categorical joints, seed {} -> {}",
            report.binary_joints,
            report.categorical_joints,
            report.seed,
            if report.pass {
                "all identities and bounds hold"
            } else {
                "RESIDUAL BREACH"
            }
        ));
    }
    print_line(&report.to_json());
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
