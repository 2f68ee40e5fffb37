use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use era_gbdt::demo::degenerate_demo;
use era_gbdt::experiment::{best_by, grid_search, GridSpec, RecordWriter, RunRecord};
use era_gbdt::gbdt::fit_observed;
use era_gbdt::synth::{gen_memorization, gen_sine_wave, MemorizationSpec, SineWaveSpec};
use era_gbdt::{load_dataset, load_features, Alpha, Dataset, Error, GbdtModel, MetricReport, SplitType, TrainConfig};

#[derive(Parser)]
#[command(name = "era-gbdt", version, about = "Gradient boosted trees with era-aware split criteria")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "ERA_GBDT_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair.
    GenData {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Fit a model and write it with a run record.
    Train(TrainArgs),
    /// Write one prediction per row of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model on a labelled CSV file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        columns: Columns,
    },
    /// Random search over a parameter grid, every config under every split type.
    GridSearch(GridArgs),
    /// Show the four-row example where the pooled criterion picks a degenerate split.
    DemoDegenerate {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum Experiment {
    Sine(SineArgs),
    Memorization(MemorizationArgs),
}

#[derive(Args)]
struct SineArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_eras: Option<usize>,
    #[arg(long)]
    rows_per_era: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    shift_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    shift_high: Option<f64>,
    /// Fix the test era's shift instead of drawing it.
    #[arg(long, allow_hyphen_values = true)]
    test_shift: Option<f64>,
}

#[derive(Args)]
struct MemorizationArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    n_eras: Option<usize>,
    #[arg(long)]
    spiral_turns: Option<f64>,
    #[arg(long)]
    spiral_noise: Option<f64>,
    #[arg(long)]
    shortcut_scale: Option<f64>,
}

#[derive(Args, Clone)]
struct Columns {
    #[arg(long, default_value = "era")]
    era_column: String,
    #[arg(long, default_value = "target")]
    target_column: String,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct ConfigFlags {
    /// JSON file with any subset of the training parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// original, era or directional-era.
    #[arg(long)]
    split_type: Option<SplitType>,
    /// A number, or -inf / inf for the exact minimum / maximum.
    #[arg(long, allow_hyphen_values = true)]
    boltzmann_alpha: Option<Alpha>,
    #[arg(long)]
    l2_regularization: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    n_boosting_rounds: Option<usize>,
    #[arg(long)]
    max_leaves: Option<usize>,
    /// 0 means unlimited.
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_child_samples: Option<usize>,
    #[arg(long)]
    max_bins: Option<usize>,
    #[arg(long)]
    colsample_bytree: Option<f64>,
    #[arg(long)]
    random_seed: Option<u64>,
    /// Let the directional criterion accept splits with no pooled gain.
    #[arg(long)]
    no_directional_gain_floor: bool,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => serde_json::from_str(&read_text(path)?)
                .with_context(|| format!("parsing config file {}", path.display()))?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.split_type {
            c.split_type = v;
        }
        if let Some(v) = self.boltzmann_alpha {
            c.boltzmann_alpha = v;
        }
        if let Some(v) = self.l2_regularization {
            c.l2_regularization = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.n_boosting_rounds {
            c.n_boosting_rounds = v;
        }
        if let Some(v) = self.max_leaves {
            c.max_leaves = v;
        }
        if let Some(v) = self.max_depth {
            c.max_depth = (v > 0).then_some(v);
        }
        if let Some(v) = self.min_child_samples {
            c.min_child_samples = v;
        }
        if let Some(v) = self.max_bins {
            c.max_bins = v;
        }
        if let Some(v) = self.colsample_bytree {
            c.colsample_bytree = v;
        }
        if let Some(v) = self.random_seed {
            c.random_seed = v;
        }
        if self.no_directional_gain_floor {
            c.directional_gain_floor = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Optional held-out file; adds test metrics to the run record.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    /// Run record destination; stdout when omitted.
    #[arg(long)]
    record_out: Option<PathBuf>,
    #[command(flatten)]
    columns: Columns,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// JSON grid file; missing fields take the standard ranges.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    n_configs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV with one row per run, written as runs finish.
    #[arg(long)]
    out: PathBuf,
    /// Also write every run record as a JSON array.
    #[arg(long)]
    records_out: Option<PathBuf>,
    #[command(flatten)]
    columns: Columns,
}

/// Failed internal consistency check; exit code 3.
#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AssertionFailed {}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load(path: &Path, columns: &Columns) -> Result<Dataset> {
    load_dataset(path, &columns.era_column, &columns.target_column)
        .with_context(|| format!("loading {}", path.display()))
}

/// Columns of `ds` in the model's feature order.
fn model_columns(model: &GbdtModel, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    if ds.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: ds.n_features(),
        }
        .into());
    }
    model
        .feature_names
        .iter()
        .map(|name| {
            let i = ds
                .feature_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            Ok(ds.column(i).to_vec())
        })
        .collect()
}

fn gen_data(experiment: &Experiment) -> Result<()> {
    let (out_dir, train, test, spec) = match experiment {
        Experiment::Sine(a) => {
            let d = SineWaveSpec::default();
            let spec = SineWaveSpec {
                n_eras: a.n_eras.unwrap_or(d.n_eras),
                rows_per_era: a.rows_per_era.unwrap_or(d.rows_per_era),
                noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
                shift_range: (a.shift_low.unwrap_or(d.shift_range.0), a.shift_high.unwrap_or(d.shift_range.1)),
                test_shift: a.test_shift,
                seed: a.seed,
            };
            let data = gen_sine_wave(&spec)?;
            let spec = serde_json::json!({ "experiment": "sine", "spec": spec, "shifts": data.shifts });
            (&a.out_dir, data.train, data.test, spec)
        }
        Experiment::Memorization(a) => {
            let d = MemorizationSpec::default();
            let spec = MemorizationSpec {
                n_train: a.n_train.unwrap_or(d.n_train),
                n_test: a.n_test.unwrap_or(d.n_test),
                dims: a.dims.unwrap_or(d.dims),
                n_eras: a.n_eras.unwrap_or(d.n_eras),
                spiral_turns: a.spiral_turns.unwrap_or(d.spiral_turns),
                spiral_noise: a.spiral_noise.unwrap_or(d.spiral_noise),
                shortcut_scale: a.shortcut_scale.unwrap_or(d.shortcut_scale),
                seed: a.seed,
            };
            let data = gen_memorization(&spec)?;
            let spec = serde_json::json!({ "experiment": "memorization", "spec": spec });
            (&a.out_dir, data.train, data.test, spec)
        }
    };
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    train.save_csv(out_dir.join("train.csv"), "era", "target")?;
    test.save_csv(out_dir.join("test.csv"), "era", "target")?;
    write_json(Some(&out_dir.join("spec.json")), &spec)?;
    eprintln!(
        "wrote {} training and {} test rows to {}",
        train.n_rows(),
        test.n_rows(),
        out_dir.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let train = load(&args.train, &args.columns)?;
    let test = args.test.as_deref().map(|p| load(p, &args.columns)).transpose()?;
    let start = std::time::Instant::now();
    let fitted = fit_observed(&train, &config, |_, _| {})?;
    let wall_time_seconds = start.elapsed().as_secs_f64();
    fitted.model.save(&args.model_out)?;

    let train_metrics = MetricReport::compute(&fitted.train_predictions, train.targets(), train.eras())?;
    let test_metrics = match &test {
        Some(t) => {
            let pred = fitted.model.predict(&model_columns(&fitted.model, t)?)?;
            Some(MetricReport::compute(&pred, t.targets(), t.eras())?)
        }
        None => None,
    };
    let record = RunRecord {
        config_id: 0,
        split_type: config.split_type,
        config,
        train_metrics: Some(train_metrics),
        test_metrics,
        wall_time_seconds,
        error: None,
    };
    write_json(args.record_out.as_deref(), &record)
}

fn predict(model: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let model = GbdtModel::load(model)?;
    let columns = load_features(data, &model.feature_names).with_context(|| format!("loading {}", data.display()))?;
    let pred = model.predict(&columns)?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    writeln!(sink, "prediction")?;
    for p in pred {
        writeln!(sink, "{p}")?;
    }
    sink.flush()?;
    Ok(())
}

fn evaluate(model: &Path, data: &Path, out: Option<&Path>, columns: &Columns) -> Result<()> {
    let model = GbdtModel::load(model)?;
    let ds = load(data, columns)?;
    let pred = model.predict(&model_columns(&model, &ds)?)?;
    let report = MetricReport::compute(&pred, ds.targets(), ds.eras())?;
    write_json(out, &report)
}

fn grid(args: &GridArgs) -> Result<()> {
    let mut grid: GridSpec = match &args.grid {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing grid file {}", p.display()))?,
        None => GridSpec::standard(),
    };
    if let Some(n) = args.n_configs {
        grid.n_configs = n;
    }
    if let Some(s) = args.seed {
        grid.seed = s;
    }
    grid.validate()?;
    let train = load(&args.train, &args.columns)?;
    let test = load(&args.test, &args.columns)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut writer = RecordWriter::new(BufWriter::new(file));
    let records = grid_search(&train, &test, &grid, |r| {
        if let Some(e) = &r.error {
            eprintln!("config {} {}: {e}", r.config_id, r.split_type);
        }
        writer.write(r)
    })?;
    if let Some(p) = &args.records_out {
        write_json(Some(p), &records)?;
    }

    let classification = test.targets().iter().all(|&t| t == 0.0 || t == 1.0);
    for st in &grid.split_types {
        let summary = if classification {
            let pick = |r: &RunRecord| r.test_metrics.as_ref()?.accuracy;
            best_by(&records, *st, pick)
                .map(|r| format!("best test accuracy {:.4} (config {})", pick(r).unwrap_or(f64::NAN), r.config_id))
        } else {
            let pick = |r: &RunRecord| Some(-r.test_metrics.as_ref()?.mse);
            best_by(&records, *st, pick)
                .map(|r| format!("best test mse {:.4} (config {})", -pick(r).unwrap_or(f64::NAN), r.config_id))
        };
        println!("{:<16} {}", st.as_str(), summary.unwrap_or_else(|| "no successful runs".into()));
    }
    Ok(())
}

fn demo(json: bool) -> Result<()> {
    let report = degenerate_demo()?;
    if json {
        write_json(None, &report)?;
    } else {
        print!("{}", report.to_text());
    }
    if !report.passed {
        return Err(AssertionFailed("degenerate example produced unexpected splits".into()).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::GenData { experiment } => gen_data(experiment),
        Command::Train(args) => train(args),
        Command::Predict { model, data, out } => predict(model, data, out.as_deref()),
        Command::Evaluate {
            model,
            data,
            out,
            columns,
        } => evaluate(model, data, out.as_deref(), columns),
        Command::GridSearch(args) => grid(args),
        Command::DemoDegenerate { json } => demo(*json),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AssertionFailed>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig { .. }) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
