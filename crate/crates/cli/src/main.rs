//! `eta`: generate synthetic cities, train segment encoders and travel-time
//! regressors, and compare route-embedding strategies.
//!
//! Every command accepts `--config FILE`, a flat JSON object whose keys are the
//! long flag names (`{"encoder": "gat", "embed-epochs": 50}`); flags given on
//! the command line win. `ETA_THREADS` sets the number of worker threads.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on invalid arguments or
//! configuration, 3 when `run-experiment` finished with failed rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use eta_graph::checkpoint::{load_checkpoint, read_checkpoint_meta, save_checkpoint, Objective, TrainedEncoder};
use eta_graph::dgi::EpochRecord;
use eta_graph::encoders::EncoderKind;
use eta_graph::pipeline::{
    baseline_route_features, build_route_dataset, encoder_graph, evaluate_eta, experiment_matrix, histogram_csv,
    label_slug, load_dataset, metrics_json, route_embeddings, run_experiment, train_encoder, train_eta,
    write_experiment_outputs, Aggregation, Dataset, ModelSpec, PipelineConfig, COMPARISON_HEADER, HISTOGRAM_HEADER,
};
use eta_graph::regression::{load_regressor, regressor_dtype, save_regressor, RegressionEpoch};
use eta_graph::road::TripFilterConfig;
use eta_graph::route::RouteDataset;
use eta_graph::synth::{generate_dataset, CitySpec, DatasetPaths, TravelTimeModel, TripSpec};
use eta_graph::{DType, Scalar};
use serde::Deserialize;

/// Invalid arguments or configuration; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

/// Some experiment rows failed; outputs were still written. Exits with status 3.
#[derive(Debug, thiserror::Error)]
#[error("{0} of {1} rows failed")]
struct PartialFailure(usize, usize);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Gcn,
    #[value(alias = "graphsage", alias = "gs")]
    #[serde(alias = "graphsage", alias = "gs")]
    Sage,
    Gat,
}

impl From<KindArg> for EncoderKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gcn => EncoderKind::Gcn,
            KindArg::Sage => EncoderKind::Sage,
            KindArg::Gat => EncoderKind::Gat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ObjectiveArg {
    Dgi,
    #[value(alias = "lp")]
    #[serde(alias = "lp")]
    LinkPrediction,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Dgi => Objective::Dgi,
            ObjectiveArg::LinkPrediction => Objective::LinkPrediction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AggregationArg {
    Sum,
    #[value(alias = "virtual")]
    #[serde(alias = "virtual")]
    Vn,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Sum => Aggregation::Sum,
            AggregationArg::Vn => Aggregation::Virtual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Precision {
    F32,
    F64,
}

/// Declares a group of optional flags that can also come from the config file.
macro_rules! option_group {
    ($name:ident { $($(#[$meta:meta])* $field:ident: $ty:ty,)* }) => {
        #[derive(Args, Deserialize, Debug, Clone, Default)]
        #[serde(rename_all = "kebab-case")]
        struct $name {
            $($(#[$meta])* #[arg(long)] $field: Option<$ty>,)*
        }

        impl $name {
            const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Flags from `self`, falling back to `base`.
            fn or(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field),)* }
            }
        }
    };
}

option_group!(CommonOpts {
    /// Seed for every random choice.
    seed: u64,
    /// Floating-point precision for training and inference.
    #[arg(value_enum)]
    precision: Precision,
});

option_group!(DataOpts {
    /// Directory holding nodes.csv, edges.csv, trips.jsonl and weather.csv.
    data: PathBuf,
    /// Trips rebuilt more often than this are dropped.
    max_rebuild_count: u32,
    min_duration_s: f64,
    max_duration_s: f64,
    /// Leading fraction of the filtered trips used for training.
    train_fraction: f64,
});

option_group!(EmbedOpts {
    #[arg(value_enum)]
    encoder: KindArg,
    #[arg(value_enum)]
    objective: ObjectiveArg,
    /// Encoder depth, 1 to 3.
    layers: usize,
    #[arg(value_enum)]
    aggregation: AggregationArg,
    embed_epochs: usize,
    embed_lr: f64,
    /// Stop embedding training after this many epochs without a lower loss (0 disables).
    embed_patience: usize,
    /// Link-prediction positive edges per epoch.
    pairs_per_epoch: usize,
    /// Link-prediction negatives per positive edge.
    negatives: usize,
});

option_group!(RegOpts {
    reg_epochs: usize,
    reg_lr: f64,
    batch_size: usize,
    /// Hidden layer widths, comma separated.
    #[arg(value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Stop regression training after this many epochs without a better validation MAE (0 disables).
    reg_patience: usize,
    /// Width of the signed-error histogram bins, in seconds.
    histogram_bin_s: f64,
});

option_group!(GenOpts {
    segments: usize,
    trips: usize,
    span_days: u32,
    /// Probability that a trip is planted with rebuild_count >= 2.
    rebuild_probability: f64,
    /// Standard deviation of the log-normal duration noise.
    noise_sigma: f64,
});

#[derive(Args, Debug, Clone)]
struct ConfigArg {
    /// Flat JSON file with defaults for any of the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(name = "eta", version, about = "Travel-time estimation with unsupervised road-segment embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic city and trips into a directory.
    Generate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        gen: GenOpts,
    },
    /// Train a segment encoder; writes a checkpoint and loss.csv.
    TrainEmbed {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        embed: EmbedOpts,
    },
    /// Turn every filtered trip into a route vector plus augmentation.
    EmbedRoutes {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Encoder checkpoint; without one the mean raw segment features are used.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output tensor file; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Fit the travel-time regressor on a route dataset.
    TrainEta {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        routes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        reg: RegOpts,
    },
    /// Score a trained regressor on the test rows of a route dataset.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        routes: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        reg: RegOpts,
    },
    /// Run the six-row comparison and write comparison.csv with per-row metrics and histograms.
    RunExperiment {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Only rows whose label or slug is listed, comma separated.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        embed: EmbedOpts,
        #[command(flatten)]
        reg: RegOpts,
    },
    /// Render run-experiment outputs as a markdown table and one histogram CSV.
    Report {
        /// Directory written by run-experiment.
        #[arg(long)]
        input: PathBuf,
        /// Where report.md and histograms.csv go; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parsed config file, checked against the flags every group knows.
struct ConfigFile(serde_json::Value);

impl ConfigFile {
    fn load(arg: &ConfigArg) -> Result<Self> {
        let Some(path) = &arg.config else {
            return Ok(Self(serde_json::Value::Object(Default::default())));
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let Some(map) = value.as_object() else {
            return Err(usage(format!("config {} must be a JSON object", path.display())));
        };
        let known: Vec<String> = [CommonOpts::KEYS, DataOpts::KEYS, EmbedOpts::KEYS, RegOpts::KEYS, GenOpts::KEYS]
            .concat()
            .iter()
            .map(|k| k.replace('_', "-"))
            .collect();
        if let Some(key) = map.keys().find(|k| !known.contains(k)) {
            return Err(usage(format!("config {}: unknown key `{key}`", path.display())));
        }
        Ok(Self(value))
    }

    fn group<G: for<'de> Deserialize<'de>>(&self) -> Result<G> {
        serde_json::from_value(self.0.clone()).map_err(|e| usage(format!("config: {e}")))
    }
}

struct Common {
    seed: u64,
    precision: Precision,
}

fn common(flags: CommonOpts, file: &ConfigFile) -> Result<Common> {
    let o = flags.or(file.group()?);
    Ok(Common { seed: o.seed.unwrap_or(0), precision: o.precision.unwrap_or(Precision::F32) })
}

struct DataSettings {
    paths: DatasetPaths,
    filter: TripFilterConfig,
    train_fraction: f64,
}

fn data_settings(flags: DataOpts, file: &ConfigFile) -> Result<DataSettings> {
    let o = flags.or(file.group()?);
    let dir = o.data.ok_or_else(|| usage("--data is required"))?;
    let d = TripFilterConfig::default();
    let filter = TripFilterConfig {
        max_rebuild_count: o.max_rebuild_count.unwrap_or(d.max_rebuild_count),
        min_duration_s: o.min_duration_s.unwrap_or(d.min_duration_s),
        max_duration_s: o.max_duration_s.unwrap_or(d.max_duration_s),
        ..d
    };
    filter.validate().map_err(usage)?;
    let train_fraction = o.train_fraction.unwrap_or(PipelineConfig::default().train_fraction);
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(usage(format!("train-fraction must be in (0, 1), got {train_fraction}")));
    }
    Ok(DataSettings { paths: DatasetPaths::in_dir(&dir), filter, train_fraction })
}

struct EmbedSettings {
    kind: EncoderKind,
    objective: Objective,
    aggregation: Aggregation,
}

/// Fills the embedding part of `cfg` and returns the encoder choice.
fn embed_settings(flags: EmbedOpts, file: &ConfigFile, cfg: &mut PipelineConfig) -> Result<EmbedSettings> {
    let o = flags.or(file.group()?);
    let e = &mut cfg.embed;
    e.layers = o.layers.unwrap_or(e.layers);
    if !(1..=3).contains(&e.layers) {
        return Err(usage(format!("layers must be 1, 2 or 3, got {}", e.layers)));
    }
    e.epochs = o.embed_epochs.unwrap_or(e.epochs);
    e.learning_rate = o.embed_lr.unwrap_or(e.learning_rate);
    if !(e.learning_rate > 0.0) {
        return Err(usage("embed-lr must be positive"));
    }
    if let Some(p) = o.embed_patience {
        e.patience = (p > 0).then_some(p);
    }
    e.pairs_per_epoch = o.pairs_per_epoch.unwrap_or(e.pairs_per_epoch);
    e.negatives = o.negatives.unwrap_or(e.negatives);
    Ok(EmbedSettings {
        kind: o.encoder.unwrap_or(KindArg::Sage).into(),
        objective: o.objective.unwrap_or(ObjectiveArg::Dgi).into(),
        aggregation: o.aggregation.unwrap_or(AggregationArg::Sum).into(),
    })
}

fn reg_settings(flags: RegOpts, file: &ConfigFile, cfg: &mut PipelineConfig) -> Result<()> {
    let o = flags.or(file.group()?);
    let r = &mut cfg.regression;
    r.epochs = o.reg_epochs.unwrap_or(r.epochs);
    r.learning_rate = o.reg_lr.unwrap_or(r.learning_rate);
    r.batch_size = o.batch_size.unwrap_or(r.batch_size);
    if r.batch_size == 0 || !(r.learning_rate >= 0.0) {
        return Err(usage("batch-size must be positive and reg-lr non-negative"));
    }
    if let Some(p) = o.reg_patience {
        r.patience = (p > 0).then_some(p);
    }
    if let Some(h) = o.hidden {
        if h.contains(&0) {
            return Err(usage("hidden widths must be positive"));
        }
        cfg.mlp_hidden = h;
    }
    cfg.histogram_bin_s = o.histogram_bin_s.unwrap_or(cfg.histogram_bin_s);
    if !(cfg.histogram_bin_s > 0.0) {
        return Err(usage("histogram-bin-s must be positive"));
    }
    Ok(())
}

fn load_data(d: &DataSettings) -> Result<Dataset> {
    let data = load_dataset(&d.paths, &d.filter).with_context(|| format!("loading dataset from {}", d.paths.nodes.display()))?;
    if data.trips.len() < 3 {
        bail!("only {} trips survive filtering; need at least 3 to split", data.trips.len());
    }
    eprintln!("loaded {} segments, {} trips ({} rejected)", data.graph.n(), data.trips.len(), data.rejected);
    Ok(data)
}

fn loss_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,discriminator_accuracy\n");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.loss, r.discriminator_accuracy).expect("writing to a String");
    }
    out
}

fn curve_csv(history: &[RegressionEpoch]) -> String {
    let mut out = String::from("epoch,train_loss,val_mae\n");
    for r in history {
        writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_mae).expect("writing to a String");
    }
    out
}

const TRAINING_FILE: &str = "training.json";

#[derive(serde::Serialize, Deserialize)]
struct TrainingInfo {
    aggregation: Aggregation,
    seed: u64,
    epochs_run: usize,
}

fn cmd_generate(cfg: ConfigArg, out: PathBuf, common_flags: CommonOpts, gen: GenOpts) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    let c = common(common_flags, &file)?;
    let g = gen.or(file.group()?);
    let segments = g.segments.unwrap_or(2000);
    let count = g.trips.unwrap_or(20_000);
    if segments < 2 || count == 0 {
        return Err(usage("need at least 2 segments and 1 trip"));
    }
    let mut trips = TripSpec::new(count, c.seed);
    trips.span_days = g.span_days.unwrap_or(trips.span_days);
    trips.rebuild_probability = g.rebuild_probability.unwrap_or(trips.rebuild_probability);
    if trips.span_days == 0 || !(0.0..=1.0).contains(&trips.rebuild_probability) {
        return Err(usage("span-days must be positive and rebuild-probability in [0, 1]"));
    }
    let mut model = TravelTimeModel::default();
    model.noise_sigma = g.noise_sigma.unwrap_or(model.noise_sigma);
    if !(model.noise_sigma >= 0.0) {
        return Err(usage("noise-sigma must be non-negative"));
    }
    let ds = generate_dataset(&CitySpec::new(segments, c.seed), &trips, &model)?;
    ds.write(&out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} segments and {} trips to {}", ds.graph.n(), ds.trips.len(), out.display());
    Ok(())
}

fn train_embed<T: Scalar>(data: &Dataset, seed: u64, choice: &EmbedSettings, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let ext = encoder_graph(data, choice.aggregation)?;
    let (adj, x) = match &ext {
        Some(e) => (e.adjacency(), e.features()),
        None => (data.graph.adjacency(), data.graph.features()),
    };
    let (encoder, history) = train_encoder::<T>(adj, x, choice.objective, choice.kind, &cfg.embed)?;
    save_checkpoint(out, &encoder)?;
    fs::write(out.join("loss.csv"), loss_csv(&history))?;
    let info = TrainingInfo { aggregation: choice.aggregation, seed, epochs_run: history.len() };
    fs::write(out.join(TRAINING_FILE), serde_json::to_string_pretty(&info)? + "\n")?;
    if let Some(last) = history.last() {
        println!("trained {} epochs, final loss {:.6}, accuracy {:.4}", history.len(), last.loss, last.discriminator_accuracy);
    }
    Ok(())
}

fn cmd_train_embed(cfg: ConfigArg, out: PathBuf, common_flags: CommonOpts, data: DataOpts, embed: EmbedOpts) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    let c = common(common_flags, &file)?;
    let d = data_settings(data, &file)?;
    let mut pc = PipelineConfig::default().with_seed(c.seed);
    let choice = embed_settings(embed, &file, &mut pc)?;
    let dataset = load_data(&d)?;
    match c.precision {
        Precision::F32 => train_embed::<f32>(&dataset, c.seed, &choice, &pc, &out),
        Precision::F64 => train_embed::<f64>(&dataset, c.seed, &choice, &pc, &out),
    }
}

fn embed_with<T: Scalar>(data: &Dataset, dir: &Path, aggregation: Aggregation) -> Result<(DenseRows, ModelSpec)> {
    let encoder: TrainedEncoder<T> = load_checkpoint(dir)?;
    let spec = ModelSpec::Encoder { objective: encoder.objective, kind: encoder.encoder.config().kind, aggregation };
    let ext = encoder_graph(data, aggregation)?;
    Ok((route_embeddings(data, &encoder, ext.as_ref())?, spec))
}

type DenseRows = eta_graph::Matrix;

fn cmd_embed_routes(cfg: ConfigArg, checkpoint: Option<PathBuf>, out: PathBuf, common_flags: CommonOpts, data: DataOpts) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    common(common_flags, &file)?;
    let d = data_settings(data, &file)?;
    let dataset = load_data(&d)?;
    let train_count = dataset.split(d.train_fraction)?.train.len();
    let (part, spec, prefix) = match checkpoint {
        None => (baseline_route_features(&dataset)?, ModelSpec::Baseline, "mean_feature_"),
        Some(dir) => {
            let info: TrainingInfo = serde_json::from_str(
                &fs::read_to_string(dir.join(TRAINING_FILE)).with_context(|| format!("reading {}", dir.join(TRAINING_FILE).display()))?,
            )?;
            let meta = read_checkpoint_meta(&dir)?;
            let (part, spec) = match DType::from_code(meta.dtype_bytes) {
                Some(DType::F32) => embed_with::<f32>(&dataset, &dir, info.aggregation)?,
                Some(DType::F64) => embed_with::<f64>(&dataset, &dir, info.aggregation)?,
                None => bail!("checkpoint {} has unknown dtype {}", dir.display(), meta.dtype_bytes),
            };
            (part, spec, "z_")
        }
    };
    let ds = build_route_dataset(&dataset, &part, prefix, &spec.label(), train_count)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    ds.write(&out)?;
    println!("wrote {} route vectors of width {} to {}", ds.len(), ds.width(), out.display());
    Ok(())
}

fn train_eta_with<T: Scalar>(ds: &RouteDataset, cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let (model, history) = train_eta::<T>(ds, &cfg.mlp_hidden, &cfg.regression)?;
    save_regressor(out, &model)?;
    fs::write(out.join("curve.csv"), curve_csv(&history))?;
    let best = history.iter().map(|h| h.val_mae).fold(f64::INFINITY, f64::min);
    println!("trained {} epochs, best validation MAE {best:.4} s", history.len());
    Ok(())
}

fn cmd_train_eta(cfg: ConfigArg, routes: PathBuf, out: PathBuf, common_flags: CommonOpts, reg: RegOpts) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    let c = common(common_flags, &file)?;
    let mut pc = PipelineConfig::default().with_seed(c.seed);
    reg_settings(reg, &file, &mut pc)?;
    let ds = RouteDataset::load(&routes).with_context(|| format!("loading {}", routes.display()))?;
    match c.precision {
        Precision::F32 => train_eta_with::<f32>(&ds, &pc, &out),
        Precision::F64 => train_eta_with::<f64>(&ds, &pc, &out),
    }
}

fn cmd_evaluate(cfg: ConfigArg, routes: PathBuf, model: PathBuf, out: PathBuf, reg: RegOpts) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    let mut pc = PipelineConfig::default();
    reg_settings(reg, &file, &mut pc)?;
    let ds = RouteDataset::load(&routes).with_context(|| format!("loading {}", routes.display()))?;
    let eval = match regressor_dtype(&model)? {
        DType::F32 => evaluate_eta(&ds, &load_regressor::<f32>(&model)?, pc.histogram_bin_s)?,
        DType::F64 => evaluate_eta(&ds, &load_regressor::<f64>(&model)?, pc.histogram_bin_s)?,
    };
    fs::create_dir_all(&out)?;
    fs::write(out.join("metrics.json"), metrics_json(&eval.metrics))?;
    fs::write(out.join("histogram.csv"), histogram_csv(&eval.histogram))?;
    let m = eval.metrics;
    println!("test trips {}: MAE {:.4} s, RMSE {:.4} s, MAPE {:.4} %", m.count, m.mae, m.rmse, m.mape);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run_experiment(
    cfg: ConfigArg,
    out: PathBuf,
    only: Vec<String>,
    common_flags: CommonOpts,
    data: DataOpts,
    embed: EmbedOpts,
    reg: RegOpts,
) -> Result<()> {
    let file = ConfigFile::load(&cfg)?;
    let c = common(common_flags, &file)?;
    let d = data_settings(data, &file)?;
    let mut pc = PipelineConfig::default().with_seed(c.seed);
    pc.filter = d.filter;
    pc.train_fraction = d.train_fraction;
    embed_settings(embed, &file, &mut pc)?;
    reg_settings(reg, &file, &mut pc)?;
    let specs: Vec<ModelSpec> = experiment_matrix()
        .into_iter()
        .filter(|s| only.is_empty() || only.iter().any(|o| *o == s.label() || *o == s.slug()))
        .collect();
    if specs.is_empty() {
        return Err(usage(format!("--only matched no rows; rows are {}", experiment_matrix().iter().map(ModelSpec::slug).collect::<Vec<_>>().join(", "))));
    }
    let dataset = load_data(&d)?;
    let rows = match c.precision {
        Precision::F32 => run_experiment::<f32>(&dataset, &specs, &pc),
        Precision::F64 => run_experiment::<f64>(&dataset, &specs, &pc),
    };
    write_experiment_outputs(&out, &rows)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    for row in &rows {
        match &row.result {
            Ok(e) => println!("{:<20} MAE {:9.4}  RMSE {:9.4}  MAPE {:8.4}", row.spec.label(), e.metrics.mae, e.metrics.rmse, e.metrics.mape),
            Err(err) => println!("{:<20} failed: {err}", row.spec.label()),
        }
    }
    if failed > 0 {
        return Err(PartialFailure(failed, rows.len()).into());
    }
    Ok(())
}

/// Markdown table and a combined `config,bin_left,bin_right,count` CSV.
fn render_report(input: &Path) -> Result<(String, String)> {
    let comparison = input.join("comparison.csv");
    let text = fs::read_to_string(&comparison).with_context(|| format!("reading {}", comparison.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(COMPARISON_HEADER) {
        bail!("{} does not start with `{COMPARISON_HEADER}`", comparison.display());
    }
    let mut table = String::from("| Configuration | MAE, s | RMSE, s | MAPE, % |\n|---|---:|---:|---:|\n");
    let mut hist = format!("config,{HISTOGRAM_HEADER}\n");
    for line in lines.filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let [label, mae, rmse, mape] = fields[..] else {
            bail!("malformed row `{line}` in {}", comparison.display());
        };
        let cell = |v: &str| v.parse::<f64>().map_or_else(|_| v.to_string(), |x| format!("{x:.3}"));
        writeln!(table, "| {label} | {} | {} | {} |", cell(mae), cell(rmse), cell(mape)).expect("writing to a String");
        let path = input.join("histograms").join(format!("{}.csv", label_slug(label)));
        if let Ok(h) = fs::read_to_string(&path) {
            for row in h.lines().skip(1).filter(|l| !l.is_empty()) {
                writeln!(hist, "{label},{row}").expect("writing to a String");
            }
        }
    }
    Ok((table, hist))
}

fn cmd_report(input: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let (table, hist) = render_report(&input)?;
    let out = out.unwrap_or_else(|| input.clone());
    fs::create_dir_all(&out)?;
    fs::write(out.join("report.md"), &table)?;
    fs::write(out.join("histograms.csv"), hist)?;
    print!("{table}");
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ETA_THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| usage(format!("ETA_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate { cfg, out, common, gen } => cmd_generate(cfg, out, common, gen),
        Command::TrainEmbed { cfg, out, common, data, embed } => cmd_train_embed(cfg, out, common, data, embed),
        Command::EmbedRoutes { cfg, checkpoint, out, common, data } => cmd_embed_routes(cfg, checkpoint, out, common, data),
        Command::TrainEta { cfg, routes, out, common, reg } => cmd_train_eta(cfg, routes, out, common, reg),
        Command::Evaluate { cfg, routes, model, out, reg } => cmd_evaluate(cfg, routes, model, out, reg),
        Command::RunExperiment { cfg, out, only, common, data, embed, reg } => cmd_run_experiment(cfg, out, only, common, data, embed, reg),
        Command::Report { input, out } => cmd_report(input, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else if err.downcast_ref::<PartialFailure>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
