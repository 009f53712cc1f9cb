//! Command-line front end: `fit`, `report`, `simulate` and `preprocess`.
//!
//! Every command first resolves its settings (flags override a `key = value`
//! config file, which overrides defaults) and echoes them as `# key = value`
//! lines before doing any work.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::correlation::CorStruct;
use crate::dataset::{ingest_long, preprocess_baseline, ColumnRoles, IngestOptions, MissingPolicy, PreprocessSpec};
use crate::design::{build_problem, parse_index_list, ModelSpec};
use crate::engine::{fit_gee, GeeControls, GeeFit};
use crate::family::{Dispersion, Family, FamilySpec, Link};
use crate::fitfile::{read_fit, write_fit};
use crate::inference::{efficiency_gain, per_response_coefficients, wald_statistics, CovarianceSource};
use crate::keyvalue::{split_list, KeyValues};
use crate::sim::{monte_carlo, write_raw_draws, McPlan, ModelVariant, SimConfig};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "flexgee", version, about = "Flexible multivariate marginal models fitted by GEE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a stacked multivariate marginal model.
    Fit(FitArgs),
    /// Tabulate one fit, derived per-response coefficients, or gains against a second fit.
    Report(ReportArgs),
    /// Run the Monte Carlo comparison of shared and response-specific models.
    Simulate(SimulateArgs),
    /// Derive baseline means and a rescaled time column from a long file.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// Long-format data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `key = value` file with any of the options below (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Subject identifier column [default: id].
    #[arg(long)]
    pub id: Option<String>,
    /// Time column [default: time].
    #[arg(long)]
    pub time: Option<String>,
    /// Comma-separated response columns; the first is the reference response.
    #[arg(long)]
    pub responses: Option<String>,
    /// Comma-separated covariate columns, in design order.
    #[arg(long)]
    pub covariates: Option<String>,
    /// Add response-type indicators (response-specific intercepts).
    #[arg(long)]
    pub rtype: bool,
    /// 1-based covariate indices given response-specific slopes, e.g. `8,9` or `1:11`.
    #[arg(long)]
    pub interaction: Option<String>,
    /// gaussian, binomial or poisson [default: gaussian].
    #[arg(long)]
    pub family: Option<String>,
    /// identity, logit, probit or log [default: canonical for the family].
    #[arg(long)]
    pub link: Option<String>,
    /// `estimate` or a fixed positive value [default: estimate].
    #[arg(long)]
    pub dispersion: Option<String>,
    /// independence, exchangeable, ar1 or unstructured [default: independence].
    #[arg(long)]
    pub corstr: Option<String>,
    /// Convergence tolerance on max |delta beta| [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum scoring iterations [default: 25].
    #[arg(long)]
    pub maxit: Option<usize>,
    /// Field delimiter: a single character or `tab` [default: ,].
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    pub drop_incomplete: bool,
    /// Serialized fit output [default: fit.flexgee].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Coefficient table as CSV.
    #[arg(long)]
    pub coef_csv: Option<PathBuf>,
    /// Fitted working correlation matrix as CSV.
    #[arg(long)]
    pub corr_csv: Option<PathBuf>,
    /// Compute cluster sums in parallel.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Serialized fit.
    pub fit: PathBuf,
    /// Second fit; prints standard-error gains of it relative to the first.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Per-response coefficients, as `response=<name>`. Repeatable.
    #[arg(long)]
    pub derive: Vec<String>,
    /// Use model-based instead of robust standard errors.
    #[arg(long)]
    pub model_based: bool,
    /// Coefficient table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `key = value` file with generator settings (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; replication r uses stream r of it [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of simulated data sets [default: 500].
    #[arg(long)]
    pub replications: Option<usize>,
    /// Subjects per data set [default: 300].
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Time points per subject [default: 3].
    #[arg(long)]
    pub times: Option<usize>,
    /// Comma-separated model variants [default: parsimonious,common].
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated working structures [default: all four].
    #[arg(long)]
    pub structures: Option<String>,
    /// Convergence tolerance for every fit [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for every fit [default: 25].
    #[arg(long)]
    pub maxit: Option<usize>,
    /// Run replications one after another.
    #[arg(long)]
    pub serial: bool,
    /// Summary CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Every converged estimate, long format.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Daily long-format data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Subject identifier column.
    #[arg(long, default_value = "id")]
    pub id: String,
    /// Integer time column.
    #[arg(long, default_value = "time")]
    pub time: String,
    /// Comma-separated response columns.
    #[arg(long)]
    pub responses: String,
    /// Comma-separated covariate columns carried through.
    #[arg(long, default_value = "")]
    pub covariates: String,
    /// Baseline time window `lo:hi` (inclusive).
    #[arg(long)]
    pub baseline: String,
    /// Analysis time window `lo:hi` (inclusive).
    #[arg(long)]
    pub window: String,
    /// Baseline column names, one per response [default: `b` + response name].
    #[arg(long)]
    pub baseline_names: Option<String>,
    /// Rescaled time is `(time - offset) / divisor`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub time_offset: f64,
    /// Divisor of the rescaled time.
    #[arg(long, default_value_t = 1.0)]
    pub time_divisor: f64,
    /// Name of the rescaled time column.
    #[arg(long, default_value = "ctime")]
    pub time_name: String,
    /// Field delimiter: a single character or `tab`.
    #[arg(long, default_value = ",")]
    pub delimiter: String,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    pub drop_incomplete: bool,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command, writing human-readable output to `out`.
/// Returns the process exit status on success.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<i32, Error> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args, out),
        Command::Report(args) => cmd_report(args, out),
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Preprocess(args) => cmd_preprocess(args, out),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn list(text: &str) -> Vec<String> {
    split_list(text).map(str::to_string).collect()
}

pub fn parse_delimiter(text: &str) -> Result<u8, Error> {
    match text {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        s => Err(usage(format!("delimiter must be a single ASCII character or `tab`, got `{s}`"))),
    }
}

fn parse_window(text: &str) -> Result<(i64, i64), Error> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("window `{text}` must look like lo:hi")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<i64>()
            .map_err(|_| usage(format!("window `{text}` must look like lo:hi")))
    };
    Ok((num(lo)?, num(hi)?))
}

fn read_key_values(path: &Path) -> Result<KeyValues, Error> {
    Ok(KeyValues::parse(&std::fs::read_to_string(path)?)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn echo<W: Write>(out: &mut W, pairs: &[(String, String)]) -> Result<(), Error> {
    for (k, v) in pairs {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Fully resolved `fit` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub data: PathBuf,
    pub roles: ColumnRoles,
    pub model: ModelSpec,
    pub family: FamilySpec,
    pub structure: CorStruct,
    pub controls: GeeControls,
    pub ingest: IngestOptions,
    pub out: PathBuf,
    pub coef_csv: Option<PathBuf>,
    pub corr_csv: Option<PathBuf>,
}

const FIT_KEYS: [&str; 18] = [
    "data",
    "id",
    "time",
    "responses",
    "covariates",
    "rtype",
    "interaction",
    "family",
    "link",
    "dispersion",
    "corstr",
    "tol",
    "maxit",
    "delimiter",
    "drop_incomplete",
    "out",
    "coef_csv",
    "corr_csv",
];

impl FitConfig {
    pub fn resolve(args: &FitArgs) -> Result<Self, Error> {
        let kv = match &args.config {
            Some(path) => read_key_values(path)?,
            None => KeyValues::default(),
        };
        kv.check_known(&FIT_KEYS)?;
        let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| kv.get(key).map(str::to_string));
        let path = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| kv.get(key).map(PathBuf::from));
        let switch = |flag: bool, key: &str| -> Result<bool, Error> {
            Ok(flag || (kv.contains(key) && kv.value::<bool>(key)?))
        };

        let data = path(&args.data, "data").ok_or_else(|| usage("--data is required"))?;
        let responses = list(&text(&args.responses, "responses").ok_or_else(|| usage("--responses is required"))?);
        let covariates = list(&text(&args.covariates, "covariates").unwrap_or_default());
        if responses.is_empty() {
            return Err(usage("--responses must name at least one column"));
        }
        let rtype = switch(args.rtype, "rtype")?;
        let interaction = text(&args.interaction, "interaction");
        let mut model = ModelSpec {
            responses: responses.clone(),
            covariates: covariates.clone(),
            include_rtype: rtype,
            interactions: Vec::new(),
        };
        if let Some(list) = interaction.as_deref().filter(|s| !s.trim().is_empty()) {
            if !rtype {
                return Err(usage("--interaction requires --rtype"));
            }
            model = model.with_interactions_one_based(&parse_index_list(list)?)?;
        }
        model.validate()?;

        let family: Family = text(&args.family, "family").as_deref().unwrap_or("gaussian").parse()?;
        let link: Link = match text(&args.link, "link") {
            Some(l) => l.parse()?,
            None => family.default_link(),
        };
        let dispersion = match text(&args.dispersion, "dispersion").as_deref().map(str::trim) {
            None | Some("estimate") => Dispersion::Estimate,
            Some(v) => Dispersion::Fixed(
                v.parse()
                    .map_err(|_| usage(format!("dispersion must be `estimate` or a number, got `{v}`")))?,
            ),
        };
        let family = FamilySpec::new(family, link, dispersion)?;
        let structure: CorStruct = text(&args.corstr, "corstr").as_deref().unwrap_or("independence").parse()?;

        let defaults = GeeControls::default();
        let tol = match args.tol {
            Some(t) => t,
            None if kv.contains("tol") => kv.value("tol")?,
            None => defaults.tol,
        };
        let max_iter = match args.maxit {
            Some(m) => m,
            None if kv.contains("maxit") => kv.value("maxit")?,
            None => defaults.max_iter,
        };
        if !(tol > 0.0 && tol.is_finite()) || max_iter == 0 {
            return Err(usage("--tol must be positive and --maxit at least 1"));
        }
        let controls = GeeControls {
            tol,
            max_iter,
            parallel: args.parallel,
        };
        let ingest = IngestOptions {
            delimiter: parse_delimiter(text(&args.delimiter, "delimiter").as_deref().unwrap_or(","))?,
            missing: if switch(args.drop_incomplete, "drop_incomplete")? {
                MissingPolicy::DropRow
            } else {
                MissingPolicy::Error
            },
        };
        Ok(Self {
            data,
            roles: ColumnRoles {
                subject: text(&args.id, "id").unwrap_or_else(|| "id".into()),
                time: text(&args.time, "time").unwrap_or_else(|| "time".into()),
                responses,
                covariates,
            },
            model,
            family,
            structure,
            controls,
            ingest,
            out: path(&args.out, "out").unwrap_or_else(|| PathBuf::from("fit.flexgee")),
            coef_csv: path(&args.coef_csv, "coef_csv"),
            corr_csv: path(&args.corr_csv, "corr_csv"),
        })
    }

    pub fn echo_pairs(&self) -> Vec<(String, String)> {
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let interactions = self.model.interactions.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>();
        vec![
            ("data".into(), self.data.display().to_string()),
            ("id".into(), self.roles.subject.clone()),
            ("time".into(), self.roles.time.clone()),
            ("responses".into(), self.roles.responses.join(",")),
            ("covariates".into(), self.roles.covariates.join(",")),
            ("rtype".into(), self.model.include_rtype.to_string()),
            ("interaction".into(), interactions.join(",")),
            ("family".into(), self.family.family().to_string()),
            ("link".into(), self.family.link().to_string()),
            (
                "dispersion".into(),
                match self.family.dispersion() {
                    Dispersion::Estimate => "estimate".into(),
                    Dispersion::Fixed(v) => v.to_string(),
                },
            ),
            ("corstr".into(), self.structure.to_string()),
            ("tol".into(), self.controls.tol.to_string()),
            ("maxit".into(), self.controls.max_iter.to_string()),
            (
                "delimiter".into(),
                match self.ingest.delimiter {
                    b'\t' => "tab".into(),
                    d => (d as char).to_string(),
                },
            ),
            (
                "drop_incomplete".into(),
                (self.ingest.missing == MissingPolicy::DropRow).to_string(),
            ),
            ("out".into(), self.out.display().to_string()),
            ("coef_csv".into(), opt(&self.coef_csv)),
            ("corr_csv".into(), opt(&self.corr_csv)),
        ]
    }
}

fn cmd_fit<W: Write>(args: FitArgs, out: &mut W) -> Result<i32, Error> {
    let config = FitConfig::resolve(&args)?;
    echo(out, &config.echo_pairs())?;
    let data = ingest_long(BufReader::new(File::open(&config.data)?), &config.roles, config.ingest)?;
    let problem = build_problem(&data, &config.model)?;
    writeln!(
        out,
        "{} subjects, {} rows, {} stacked observations, {} coefficients",
        data.n_subjects(),
        data.n_rows(),
        problem.n_rows(),
        problem.n_columns()
    )?;
    let fit = fit_gee(&problem, &config.family, config.structure, &config.controls)?;

    write_fit(&fit, create(&config.out)?)?;
    if let Some(path) = &config.coef_csv {
        write_coefficient_csv(&fit, create(path)?)?;
    }
    if let Some(path) = &config.corr_csv {
        write_correlation_csv(&fit, create(path)?)?;
    }
    print_fit(&fit, CovarianceSource::Robust, out)?;
    Ok(if fit.converged { 0 } else { 4 })
}

fn print_trace<W: Write>(fit: &GeeFit, out: &mut W) -> Result<(), Error> {
    for (i, step) in fit.trace.iter().enumerate() {
        writeln!(out, "iteration {:>3}: max |delta beta| = {step:.3e}", i + 1)?;
    }
    Ok(())
}

/// Coefficient table in the estimate / SE / Z layout, two decimals.
pub fn print_fit<W: Write>(fit: &GeeFit, source: CovarianceSource, out: &mut W) -> Result<(), Error> {
    print_trace(fit, out)?;
    writeln!(
        out,
        "{} after {} iterations; family {}",
        if fit.converged { "converged" } else { "NOT CONVERGED" },
        fit.iterations,
        fit.family
    )?;
    let kind = match source {
        CovarianceSource::Robust => "robust",
        CovarianceSource::ModelBased => "model-based",
    };
    let width = fit.labels.iter().map(String::len).max().unwrap_or(4).max(4);
    writeln!(out, "{:<width$} {:>9} {:>9} {:>9}   ({kind} SE)", "term", "estimate", "SE", "Z")?;
    for row in wald_statistics(fit) {
        let (se, z) = match source {
            CovarianceSource::Robust => (row.robust_se, row.robust_z),
            CovarianceSource::ModelBased => (row.model_se, row.model_z),
        };
        writeln!(out, "{:<width$} {:>9.2} {:>9.2} {:>9.2}", row.label, row.estimate, se, z)?;
    }
    writeln!(out, "dispersion {:.4}", fit.dispersion)?;
    let m = fit.max_cluster_size;
    writeln!(
        out,
        "working correlation: {} ({} parameters, cluster size {m})",
        fit.structure,
        fit.n_correlation_parameters()
    )?;
    match fit.correlation.alpha() {
        Some(alpha) => writeln!(out, "alpha {alpha:.4}")?,
        None if fit.structure == CorStruct::Unstructured && m <= 8 => {
            let r = fit.correlation.matrix(m)?;
            for i in 0..m {
                let row: Vec<String> = (0..m).map(|j| format!("{:>6.2}", r[(i, j)])).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        None => {}
    }
    for w in &fit.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(())
}

/// Full-precision coefficient table.
pub fn write_coefficient_csv<W: Write>(fit: &GeeFit, w: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["term", "estimate", "robust_se", "robust_z", "robust_p", "model_se", "model_z", "model_p"])?;
    for r in wald_statistics(fit) {
        w.write_record(
            std::iter::once(r.label.clone()).chain(
                [r.estimate, r.robust_se, r.robust_z, r.robust_p, r.model_se, r.model_z, r.model_p]
                    .iter()
                    .map(f64::to_string),
            ),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Working correlation matrix for the largest cluster, no header.
pub fn write_correlation_csv<W: Write>(fit: &GeeFit, w: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(w);
    let r = fit.correlation.matrix(fit.max_cluster_size)?;
    for i in 0..r.nrows() {
        w.write_record(r.row(i).iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

fn read_fit_file(path: &Path) -> Result<GeeFit, Error> {
    Ok(read_fit(BufReader::new(File::open(path)?))?)
}

fn cmd_report<W: Write>(args: ReportArgs, out: &mut W) -> Result<i32, Error> {
    let source = if args.model_based {
        CovarianceSource::ModelBased
    } else {
        CovarianceSource::Robust
    };
    let derive = args
        .derive
        .iter()
        .map(|d| match d.split_once('=') {
            Some(("response", name)) if !name.trim().is_empty() => Ok(name.trim().to_string()),
            _ => Err(usage(format!("--derive expects `response=<name>`, got `{d}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    echo(
        out,
        &[
            ("fit".into(), args.fit.display().to_string()),
            (
                "compare".into(),
                args.compare.as_ref().map_or("-".into(), |p| p.display().to_string()),
            ),
            ("derive".into(), derive.join(",")),
            ("covariance".into(), if args.model_based { "model-based" } else { "robust" }.into()),
        ],
    )?;
    let fit = read_fit_file(&args.fit)?;
    print_fit(&fit, source, out)?;
    if let Some(path) = &args.csv {
        write_coefficient_csv(&fit, create(path)?)?;
    }
    for response in &derive {
        let rows = per_response_coefficients(&fit, response, source)?;
        writeln!(out, "\ncoefficients for {response}")?;
        let width = rows.iter().map(|r| r.term.len()).max().unwrap_or(4).max(4);
        let or = fit.family.is_logit();
        writeln!(
            out,
            "{:<width$} {:>9} {:>9} {:>9}{}",
            "term",
            "estimate",
            "SE",
            "Z",
            if or { format!(" {:>9}", "OR") } else { String::new() }
        )?;
        for r in rows {
            write!(out, "{:<width$} {:>9.2} {:>9.2} {:>9.2}", r.term, r.estimate, r.std_error, r.z)?;
            if or {
                write!(out, " {:>9.2}", r.odds_ratio())?;
            }
            writeln!(out)?;
        }
    }
    if let Some(path) = &args.compare {
        let other = read_fit_file(path)?;
        writeln!(out, "\nstandard-error gain of {} relative to {}", path.display(), args.fit.display())?;
        let rows = efficiency_gain(&fit, &other, source)?;
        let width = rows.iter().map(|r| r.key.len()).max().unwrap_or(4).max(4);
        writeln!(out, "{:<width$} {:>9} {:>9} {:>9}", "term", "SE ref", "SE cmp", "gain %")?;
        for r in rows {
            writeln!(
                out,
                "{:<width$} {:>9.2} {:>9.2} {:>9.2}",
                r.key, r.se_reference, r.se_comparison, r.gain_percent
            )?;
        }
    }
    Ok(0)
}

fn cmd_simulate<W: Write>(args: SimulateArgs, out: &mut W) -> Result<i32, Error> {
    let mut config = SimConfig::default();
    let mut plan = McPlan::default();
    let mut known: Vec<&str> = SimConfig::KEYS.to_vec();
    known.extend(["models", "structures", "tol", "maxit"]);
    if let Some(path) = &args.config {
        let kv = read_key_values(path)?;
        kv.check_known(&known)?;
        config.apply(&kv)?;
        if let Some(m) = kv.get("models") {
            plan.variants = parse_variants(m)?;
        }
        if let Some(s) = kv.get("structures") {
            plan.structures = parse_structures(s)?;
        }
        if kv.contains("tol") {
            plan.controls.tol = kv.value("tol")?;
        }
        if kv.contains("maxit") {
            plan.controls.max_iter = kv.value("maxit")?;
        }
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.replications {
        config.replications = v;
    }
    if let Some(v) = args.subjects {
        config.n_subjects = v;
    }
    if let Some(v) = args.times {
        config.n_times = v;
    }
    if let Some(m) = &args.models {
        plan.variants = parse_variants(m)?;
    }
    if let Some(s) = &args.structures {
        plan.structures = parse_structures(s)?;
    }
    if let Some(t) = args.tol {
        plan.controls.tol = t;
    }
    if let Some(m) = args.maxit {
        plan.controls.max_iter = m;
    }
    plan.parallel = !args.serial;
    config.validate()?;

    let mut pairs = config.to_key_values();
    let joined = |v: Vec<String>| v.join(",");
    pairs.extend([
        ("models".into(), joined(plan.variants.iter().map(|v| v.to_string()).collect())),
        ("structures".into(), joined(plan.structures.iter().map(|s| s.to_string()).collect())),
        ("tol".into(), plan.controls.tol.to_string()),
        ("maxit".into(), plan.controls.max_iter.to_string()),
        ("parallel".into(), plan.parallel.to_string()),
        ("out".into(), args.out.display().to_string()),
    ]);
    echo(out, &pairs)?;

    let start = Instant::now();
    let (summary, reps) = monte_carlo(&config, &plan)?;
    summary.write_csv(create(&args.out)?)?;
    if let Some(path) = &args.raw {
        write_raw_draws(&plan, &reps, create(path)?)?;
    }
    for cell in &summary.cells {
        writeln!(
            out,
            "{:<13} {:<13} converged {:>5}  not converged {:>4}  failed {:>4}  fit time {:>8.2}s",
            cell.variant.as_str(),
            cell.structure.as_str(),
            cell.n_converged,
            cell.n_not_converged,
            cell.n_failed,
            cell.elapsed.as_secs_f64()
        )?;
        for p in &cell.params {
            writeln!(
                out,
                "    {:<6} truth {:>6.2}  mean {:>7.3}  bias {:>7.3}  mse {:>7.4}  coverage {:>5.3}",
                p.name, p.truth, p.mean, p.bias, p.mse, p.coverage
            )?;
        }
    }
    writeln!(out, "wall clock {:.2}s", start.elapsed().as_secs_f64())?;
    Ok(0)
}

fn parse_variants(text: &str) -> Result<Vec<ModelVariant>, Error> {
    Ok(split_list(text).map(str::parse).collect::<Result<Vec<_>, _>>()?)
}

fn parse_structures(text: &str) -> Result<Vec<CorStruct>, Error> {
    Ok(split_list(text).map(str::parse).collect::<Result<Vec<_>, _>>()?)
}

fn cmd_preprocess<W: Write>(args: PreprocessArgs, out: &mut W) -> Result<i32, Error> {
    let responses = list(&args.responses);
    let baseline_names = match &args.baseline_names {
        Some(names) => list(names),
        None => responses.iter().map(|r| format!("b{r}")).collect(),
    };
    let spec = PreprocessSpec {
        analysis_window: parse_window(&args.window)?,
        baseline_window: parse_window(&args.baseline)?,
        baseline_names,
        time_offset: args.time_offset,
        time_divisor: args.time_divisor,
        time_name: args.time_name.clone(),
    };
    let delimiter = parse_delimiter(&args.delimiter)?;
    let roles = ColumnRoles {
        subject: args.id.clone(),
        time: args.time.clone(),
        responses,
        covariates: list(&args.covariates),
    };
    echo(
        out,
        &[
            ("data".into(), args.data.display().to_string()),
            ("id".into(), roles.subject.clone()),
            ("time".into(), roles.time.clone()),
            ("responses".into(), roles.responses.join(",")),
            ("covariates".into(), roles.covariates.join(",")),
            ("baseline".into(), format!("{}:{}", spec.baseline_window.0, spec.baseline_window.1)),
            ("window".into(), format!("{}:{}", spec.analysis_window.0, spec.analysis_window.1)),
            ("baseline_names".into(), spec.baseline_names.join(",")),
            ("time_offset".into(), spec.time_offset.to_string()),
            ("time_divisor".into(), spec.time_divisor.to_string()),
            ("time_name".into(), spec.time_name.clone()),
            ("drop_incomplete".into(), args.drop_incomplete.to_string()),
            ("out".into(), args.out.display().to_string()),
        ],
    )?;
    spec.validate(roles.responses.len())?;
    let options = IngestOptions {
        delimiter,
        missing: if args.drop_incomplete {
            MissingPolicy::DropRow
        } else {
            MissingPolicy::Error
        },
    };
    let data = ingest_long(BufReader::new(File::open(&args.data)?), &roles, options)?;
    let derived = preprocess_baseline(&data, &spec)?;
    derived.write_csv(create(&args.out)?, delimiter)?;
    writeln!(
        out,
        "wrote {} rows for {} subjects to {}",
        derived.n_rows(),
        derived.n_subjects(),
        args.out.display()
    )?;
    Ok(0)
}
