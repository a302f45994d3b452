//! Command-line front end: rank features, compare two groups, scan group
//! permutations, compute quantile confidence intervals, and run the
//! cross-validation harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! internal error. Results go to stdout (or `--output`); diagnostics go to
//! stderr. All real numbers print with 12 significant digits, confidences
//! in both log and linear form.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quor::{
    format_score, load_matrix, quantile_ci, quor_confidence_pair, rank_features, run_cv,
    write_cv_json, write_cv_tsv, write_ranking_jsonl, write_ranking_tsv, ConfidenceResult,
    Correction, CvConfig, Error, FeatureMatrix, GroupSample, MatrixFormat, Method, Orientation,
    QuantileSpec, Result, DEFAULT_MAX_PERMUTATION_GROUPS,
};

#[derive(Parser)]
#[command(
    name = "quor",
    version,
    about = "Exact confidence for quantile-ordering statements, feature ranking, and baselines"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank every feature of a matrix by the chosen method.
    Rank(RankArgs),
    /// Confidence of both quantile orderings for two groups.
    Compare(CompareArgs),
    /// Confidence of every group permutation (guarded beyond 8 groups).
    Perms(PermsArgs),
    /// Distribution-free confidence interval for one group's quantile.
    Ci(CiArgs),
    /// Repeated stratified cross-validation of feature selection.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Tsv,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Tsv => MatrixFormat::Tsv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    FeaturesInRows,
    FeaturesInCols,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::FeaturesInRows => Orientation::FeaturesInRows,
            OrientationArg::FeaturesInCols => Orientation::FeaturesInCols,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Quor,
    T,
    U,
    Ks,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Quor => Method::Quor,
            MethodArg::T => Method::T,
            MethodArg::U => Method::U,
            MethodArg::Ks => Method::Ks,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectionArg {
    None,
    Holm,
}

impl From<CorrectionArg> for Correction {
    fn from(c: CorrectionArg) -> Self {
        match c {
            CorrectionArg::None => Correction::None,
            CorrectionArg::Holm => Correction::Holm,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Delimited matrix file.
    #[arg(long)]
    input: PathBuf,
    /// File delimiter.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Whether rows are features or samples.
    #[arg(long, value_enum, default_value_t = OrientationArg::FeaturesInRows)]
    orientation: OrientationArg,
}

impl InputArgs {
    fn load(&self) -> Result<FeatureMatrix> {
        load_matrix(&self.input, self.format.into(), self.orientation.into())
    }
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Scoring method.
    #[arg(long, value_enum, default_value_t = MethodArg::Quor)]
    method: MethodArg,
    /// Quantile; repeat the flag for one value per group (ascending label
    /// order). Default 0.5.
    #[arg(long)]
    quantile: Vec<f64>,
    /// Multiple-testing correction (baselines only).
    #[arg(long, value_enum, default_value_t = CorrectionArg::None)]
    correction: CorrectionArg,
    /// Keep only features whose confidence reaches this linear threshold
    /// (quor method only).
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Emit JSON lines instead of TSV.
    #[arg(long)]
    jsonl: bool,
    /// Write results here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First group: comma-separated values, or a group label with --input.
    #[arg(long)]
    a: String,
    /// Second group: comma-separated values, or a group label with --input.
    #[arg(long)]
    b: String,
    /// Quantile; repeat for per-group values (first group, then second).
    /// Default 0.5.
    #[arg(long)]
    quantile: Vec<f64>,
    /// Delimited matrix file (switches --a/--b to group labels).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = OrientationArg::FeaturesInRows)]
    orientation: OrientationArg,
    /// Feature id to compare (file mode).
    #[arg(long)]
    feature: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PermsArgs {
    /// Raw group as LABEL=v1,v2,...; repeat per group.
    #[arg(long)]
    group: Vec<String>,
    /// Quantile; repeat for one value per group. Default 0.5.
    #[arg(long)]
    quantile: Vec<f64>,
    /// Delimited matrix file (uses all its groups for --feature).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = OrientationArg::FeaturesInRows)]
    orientation: OrientationArg,
    /// Feature id to scan (file mode).
    #[arg(long)]
    feature: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CiArgs {
    /// Comma-separated sample values.
    #[arg(long)]
    values: Option<String>,
    /// Delimited matrix file (use with --feature and --group).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = OrientationArg::FeaturesInRows)]
    orientation: OrientationArg,
    /// Feature id (file mode).
    #[arg(long)]
    feature: Option<String>,
    /// Group label (file mode).
    #[arg(long)]
    group: Option<String>,
    /// Quantile of interest.
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Target coverage.
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Scoring method; repeat to evaluate several. Default: all four.
    #[arg(long)]
    method: Vec<MethodArg>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

/// 1 = usage, 2 = data, 3 = numeric/internal.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ProbabilityRange { .. }
        | Error::TooFewGroups { .. }
        | Error::TooManyGroups { .. }
        | Error::UnsupportedMethod { .. }
        | Error::InvalidConfig { .. }
        | Error::PValueRange { .. } => 1,
        Error::Io(_)
        | Error::Csv(_)
        | Error::MalformedCell { .. }
        | Error::MalformedRow { .. }
        | Error::DuplicateFeatureId { .. }
        | Error::TooFewDistinctGroups { .. }
        | Error::UnknownFeature { .. }
        | Error::FeatureSkipped { .. }
        | Error::EmptyGroup { .. }
        | Error::NonFinite { .. }
        | Error::Unsorted { .. } => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Rank(args) => cmd_rank(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Perms(args) => cmd_perms(args),
        Cmd::Ci(args) => cmd_ci(args),
        Cmd::Eval(args) => cmd_eval(args),
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_values(flag: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| Error::InvalidConfig {
                message: format!("--{flag}: cannot parse '{}' as a number", tok.trim()),
            })
        })
        .collect()
}

fn quantile_spec(quantiles: &[f64], n_groups: usize) -> Result<QuantileSpec> {
    match quantiles.len() {
        0 => Ok(QuantileSpec::Global(0.5)),
        1 => Ok(QuantileSpec::Global(quantiles[0])),
        k if k == n_groups => Ok(QuantileSpec::PerGroup(quantiles.to_vec())),
        k => Err(Error::InvalidConfig {
            message: format!("--quantile given {k} times for {n_groups} groups"),
        }),
    }
}

fn per_group_qs(quantiles: &[f64], n_groups: usize) -> Result<Vec<f64>> {
    match quantile_spec(quantiles, n_groups)? {
        QuantileSpec::Global(q) => Ok(vec![q; n_groups]),
        QuantileSpec::PerGroup(qs) => Ok(qs),
    }
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let method: Method = args.method.into();
    if args.min_confidence.is_some() && method != Method::Quor {
        return Err(Error::UnsupportedMethod {
            reason: "--min-confidence thresholds confidences and needs --method quor".into(),
        });
    }
    let matrix = args.input.load()?;
    let spec = quantile_spec(&args.quantile, matrix.groups().len())?;
    let mut report = rank_features(&matrix, method, &spec, args.correction.into())?;
    if let Some(min) = args.min_confidence {
        report = report.filter_min_confidence(min);
    }
    for skip in &report.skipped {
        eprintln!("skipped {}: {}", skip.feature_id, skip.reason);
    }
    let mut out = open_output(&args.output)?;
    if args.jsonl {
        write_ranking_jsonl(&report.entries, &mut out)?;
    } else {
        write_ranking_tsv(&report.entries, &mut out)?;
    }
    Ok(())
}

fn witness_column(result: &ConfidenceResult) -> String {
    match &result.witness {
        Some(w) => w
            .pairs()
            .iter()
            .map(|(j, jp)| format!("({j},{jp})"))
            .collect::<Vec<_>>()
            .join(";"),
        None => "-".into(),
    }
}

fn write_direction_row(
    out: &mut impl Write,
    first: &GroupSample,
    second: &GroupSample,
    result: &ConfidenceResult,
) -> Result<()> {
    writeln!(
        out,
        "Q_{}<Q_{}\t{}\t{}\t{}",
        first.label(),
        second.label(),
        format_score(result.log_confidence),
        format_score(result.log_confidence.exp()),
        witness_column(result)
    )?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let (a, b) = match &args.input {
        Some(path) => {
            let feature = args.feature.as_deref().ok_or_else(|| Error::InvalidConfig {
                message: "--feature is required with --input".into(),
            })?;
            let matrix = load_matrix(path, args.format.into(), args.orientation.into())?;
            let qs = per_group_qs(&args.quantile, 2)?;
            let buckets = matrix.group_values(feature)?;
            let pick = |label: &str, q: f64| -> Result<GroupSample> {
                let (l, vs) = buckets
                    .iter()
                    .find(|(l, _)| l == label)
                    .ok_or_else(|| Error::UnknownFeature {
                        id: format!("group '{label}' (in feature '{feature}')"),
                    })?;
                GroupSample::new(l.clone(), vs.clone(), q)
            };
            (pick(&args.a, qs[0])?, pick(&args.b, qs[1])?)
        }
        None => {
            let qs = per_group_qs(&args.quantile, 2)?;
            (
                GroupSample::new("a", parse_values("a", &args.a)?, qs[0])?,
                GroupSample::new("b", parse_values("b", &args.b)?, qs[1])?,
            )
        }
    };
    let fwd = quor_confidence_pair(&a, &b)?;
    let bwd = quor_confidence_pair(&b, &a)?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "statement\tlog_confidence\tconfidence\twitness")?;
    write_direction_row(&mut out, &a, &b, &fwd)?;
    write_direction_row(&mut out, &b, &a, &bwd)?;
    Ok(())
}

fn cmd_perms(args: PermsArgs) -> Result<()> {
    let groups: Vec<GroupSample> = match &args.input {
        Some(path) => {
            let feature = args.feature.as_deref().ok_or_else(|| Error::InvalidConfig {
                message: "--feature is required with --input".into(),
            })?;
            let matrix = load_matrix(path, args.format.into(), args.orientation.into())?;
            let buckets = matrix.group_values(feature)?;
            let qs = per_group_qs(&args.quantile, buckets.len())?;
            buckets
                .into_iter()
                .zip(qs)
                .map(|((label, vs), q)| GroupSample::new(label, vs, q))
                .collect::<Result<_>>()?
        }
        None => {
            if args.group.len() < 2 {
                return Err(Error::TooFewGroups { needed: 2, got: args.group.len() });
            }
            let qs = per_group_qs(&args.quantile, args.group.len())?;
            args.group
                .iter()
                .zip(qs)
                .map(|(spec, q)| {
                    let (label, rest) = spec.split_once('=').ok_or_else(|| {
                        Error::InvalidConfig {
                            message: format!("--group '{spec}' is not LABEL=v1,v2,..."),
                        }
                    })?;
                    GroupSample::new(label, parse_values("group", rest)?, q)
                })
                .collect::<Result<_>>()?
        }
    };
    let scan = quor::permutation_scan(&groups, DEFAULT_MAX_PERMUTATION_GROUPS)?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "permutation\tlog_confidence\tconfidence")?;
    for result in &scan {
        let stmt: Vec<String> = result.permutation.iter().map(|l| format!("Q_{l}")).collect();
        writeln!(
            out,
            "{}\t{}\t{}",
            stmt.join("<"),
            format_score(result.log_confidence),
            format_score(result.log_confidence.exp())
        )?;
    }
    Ok(())
}

fn cmd_ci(args: CiArgs) -> Result<()> {
    let sample = match (&args.values, &args.input) {
        (Some(values), None) => {
            GroupSample::new("sample", parse_values("values", values)?, args.quantile)?
        }
        (None, Some(path)) => {
            let feature = args.feature.as_deref().ok_or_else(|| Error::InvalidConfig {
                message: "--feature is required with --input".into(),
            })?;
            let label = args.group.as_deref().ok_or_else(|| Error::InvalidConfig {
                message: "--group is required with --input".into(),
            })?;
            let matrix = load_matrix(path, args.format.into(), args.orientation.into())?;
            let buckets = matrix.group_values(feature)?;
            let (l, vs) = buckets
                .into_iter()
                .find(|(l, _)| l == label)
                .ok_or_else(|| Error::UnknownFeature {
                    id: format!("group '{label}' (in feature '{feature}')"),
                })?;
            GroupSample::new(l, vs, args.quantile)?
        }
        _ => {
            return Err(Error::InvalidConfig {
                message: "give either --values or --input with --feature and --group".into(),
            })
        }
    };
    let (ci, coverage) = quantile_ci(&sample, args.gamma)?;
    let m = sample.len();
    let endpoint = |idx: usize| -> String {
        if idx == 0 {
            "-inf".into()
        } else if idx == m + 1 {
            "+inf".into()
        } else {
            format_score(sample.values()[idx - 1])
        }
    };
    let mut out = open_output(&args.output)?;
    writeln!(out, "m\t{m}")?;
    writeln!(out, "quantile\t{}", format_score(sample.q()))?;
    writeln!(out, "gamma\t{}", format_score(args.gamma))?;
    writeln!(out, "lo_index\t{}", ci.lo)?;
    writeln!(out, "hi_index\t{}", ci.hi)?;
    writeln!(out, "lo_value\t{}", endpoint(ci.lo))?;
    writeln!(out, "hi_value\t{}", endpoint(ci.hi))?;
    writeln!(out, "coverage\t{}", format_score(coverage))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let matrix = args.input.load()?;
    let methods: Vec<Method> = if args.method.is_empty() {
        vec![Method::Quor, Method::T, Method::U, Method::Ks]
    } else {
        args.method.iter().map(|&m| m.into()).collect()
    };
    let config = CvConfig {
        folds: args.folds,
        repeats: args.repeats,
        top_k: args.top_k,
        seed: args.seed,
        methods,
        quantile: args.quantile,
    };
    let report = run_cv(&matrix, &config)?;
    let mut out = open_output(&args.output)?;
    if args.json {
        write_cv_json(&report, &mut out)?;
    } else {
        write_cv_tsv(&report, &mut out)?;
    }
    Ok(())
}
