//! Command-line front end.
//!
//! Human-readable summaries go to stdout; machine output goes to the file
//! named by `--out`. Errors print one `error: ...` line to stderr and map
//! to exit code 1 (usage), 2 (input/output) or 3 (numeric or infeasible).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classifier::{Classifier, ClassifierConfig};
use crate::data::{gen_synthetic, load_csv, report_csv, report_json, write_dataset_csv, write_text, CsvSchema, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{cross_test, sweep, Protocol, Selection};
use crate::lpm::{Assumption, Bandwidth};
use crate::neighborhood::{Metric, NeighborhoodMode};
use crate::rng::Rng;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "lpmbc", version, about = "Bayesian classification with local probabilistic models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every row of a query file.
    Predict(PredictArgs),
    /// Repeated stratified cross test with inner model selection.
    Bench(BenchArgs),
    /// Fixed-parameter cross tests over k fractions and assumptions.
    Sweep(SweepArgs),
    /// Write the two-class correlated Gaussian data set.
    Synth(SynthArgs),
    /// Run the invariant oracle suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    PerClass,
    Shared,
    Global,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AssumptionArg {
    Lua,
    Lga,
    Lca,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BandwidthArg {
    Unit,
    Silverman,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Chebychev,
    Euclidean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "per-class")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "silverman")]
    bandwidth: BandwidthArg,
    #[arg(long, value_enum, default_value = "chebychev")]
    metric: MetricArg,
}

impl ModelArgs {
    fn mode(&self, k: usize) -> NeighborhoodMode {
        match self.mode {
            ModeArg::PerClass => NeighborhoodMode::PerClass { k },
            ModeArg::Shared => NeighborhoodMode::Shared { k },
            ModeArg::Global => NeighborhoodMode::Global,
        }
    }

    fn bandwidth(&self) -> Bandwidth {
        match self.bandwidth {
            BandwidthArg::Unit => Bandwidth::Unit,
            BandwidthArg::Silverman => Bandwidth::Silverman,
        }
    }

    fn metric(&self) -> Metric {
        match self.metric {
            MetricArg::Chebychev => Metric::Chebychev,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }

    fn assumption(&self, a: AssumptionArg) -> Assumption {
        match a {
            AssumptionArg::Lua => Assumption::Lua,
            AssumptionArg::Lga => Assumption::LGA,
            AssumptionArg::Lca => Assumption::lca(self.bandwidth()),
        }
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    train: PathBuf,
    /// Feature rows, optionally followed by a label column that is ignored.
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "lga")]
    assumption: AssumptionArg,
    /// Neighborhood size; required unless the mode is global.
    #[arg(long)]
    k: Option<usize>,
    /// Use raw features instead of standardizing on the training set.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 8)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Candidate assumptions for selection (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    assumption: Vec<AssumptionArg>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    k_fracs: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lua,lga,lca")]
    assumption: Vec<AssumptionArg>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Off-diagonal covariance C, |C| <= 2.
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    /// Samples per class.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("error: {first}");
            return 1;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Predict(a) => predict_cmd(a, stdout).map(|_| 0),
        Command::Bench(a) => bench_cmd(a, stdout).map(|_| 0),
        Command::Sweep(a) => sweep_cmd(a, stdout).map(|_| 0),
        Command::Synth(a) => synth_cmd(a, stdout).map(|_| 0),
        Command::Verify(a) => verify_cmd(a, stdout),
    }
}

fn say(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

fn read_query(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d && record.len() != d + 1 {
            return Err(Error::Parse {
                row: line,
                column: 1,
                message: format!("expected {d} feature columns, found {}", record.len()),
            });
        }
        let row = record
            .iter()
            .take(d)
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("'{cell}' is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn predict_cmd(a: PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let train = load_csv(&a.train, &CsvSchema::default())?;
    let k = match (a.model.mode, a.k) {
        (ModeArg::Global, _) => 1,
        (_, Some(k)) => k,
        (_, None) => return Err(Error::invalid("--k is required unless --mode global")),
    };
    let config = ClassifierConfig::new(a.model.mode(k), a.model.assumption(a.assumption), a.model.metric())?;
    let classifier = Classifier::fit(train, config, !a.no_standardize)?;
    let queries = read_query(&a.query, classifier.train().n_features())?;

    let names = classifier.train().class_names().to_vec();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend(names.iter().map(|n| format!("p_{n}")));
    w.write_record(&header)?;
    let mut fallbacks = 0;
    for q in &queries {
        let p = classifier.predict(q)?;
        fallbacks += usize::from(p.prior_fallback);
        let mut record = vec![names[p.label].clone()];
        record.extend(p.posteriors.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            say(stdout, &format!("{} predictions written to {}\n", queries.len(), path.display()))?;
        }
        None => say(stdout, &text)?,
    }
    if fallbacks > 0 {
        say(stdout, &format!("{fallbacks} queries fell back to class frequencies\n"))?;
    }
    Ok(())
}

fn protocol(e: &EvalArgs, assumptions: Vec<Assumption>, selection: Selection) -> Protocol {
    Protocol {
        folds: e.folds,
        repeats: e.repeats,
        mode: e.model.mode(1),
        metric: e.model.metric(),
        assumptions,
        selection,
    }
}

fn bench_cmd(a: BenchArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_csv(&a.eval.data, &CsvSchema::default())?;
    let mut assumptions: Vec<Assumption> = if a.assumption.is_empty() {
        Assumption::standard_set(a.eval.model.bandwidth())
    } else {
        a.assumption.iter().map(|&x| a.eval.model.assumption(x)).collect()
    };
    if matches!(a.eval.model.mode, ModeArg::Global) {
        assumptions.retain(|x| *x != Assumption::Lua);
    }
    let p = protocol(&a.eval, assumptions, Selection::InnerCv { folds: 4 });
    let report = cross_test(&data, &dataset_name(&a.eval.data), &p, &Rng::new(a.eval.seed))?;
    let g = &report.aggregates;
    say(
        stdout,
        &format!(
            "{}: n={} d={} c={}  {} folds x {} repeats\nmean ACC {:.4} (sd {:.4})  mean MSE {:.4} (sd {:.4})\n",
            report.config.dataset,
            data.n_samples(),
            data.n_features(),
            data.n_classes(),
            p.folds,
            p.repeats,
            g.mean_acc,
            g.std_acc,
            g.mean_mse,
            g.std_mse
        ),
    )?;
    if let Some(path) = &a.eval.out {
        let text = match a.format {
            FormatArg::Json => report_json(&report)?,
            FormatArg::Csv => report_csv(&report)?,
        };
        write_text(path, &text)?;
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_csv(&a.eval.data, &CsvSchema::default())?;
    let assumptions: Vec<Assumption> = a.assumption.iter().map(|&x| a.eval.model.assumption(x)).collect();
    let p = protocol(&a.eval, assumptions.clone(), Selection::InnerCv { folds: 4 });
    let rows = sweep(&data, &a.k_fracs, &assumptions, &p, &Rng::new(a.eval.seed))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k_fraction", "assumption", "mean_acc", "mean_mse"])?;
    for r in &rows {
        w.write_record([r.k_fraction.to_string(), r.assumption.to_string(), r.mean_acc.to_string(), r.mean_mse.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    let mut summary = String::from("k_frac  assumption     ACC     MSE\n");
    for r in &rows {
        summary.push_str(&format!("{:>6.2}  {:<13} {:.4}  {:.4}\n", r.k_fraction, r.assumption.to_string(), r.mean_acc, r.mean_mse));
    }
    say(stdout, &summary)?;
    if let Some(path) = &a.eval.out {
        write_text(path, &text)?;
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = SyntheticSpec {
        n_per_class: a.n,
        covariance_c: a.c,
    };
    let data = gen_synthetic(&spec, &mut Rng::new(a.seed))?;
    write_dataset_csv(&data, &a.out)?;
    say(stdout, &format!("{} samples written to {}\n", data.n_samples(), a.out.display()))
}

fn verify_cmd(a: VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let suites = verify::run_all(a.seed)?;
    let mut all = true;
    for s in &suites {
        all &= s.ok();
        say(stdout, &format!("{s}\n"))?;
    }
    Ok(if all { 0 } else { 3 })
}
