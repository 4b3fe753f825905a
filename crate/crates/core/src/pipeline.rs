//! End-to-end ETA pipeline: load and filter a dataset, train an unsupervised
//! encoder, turn trips into route vectors, fit the regressor and score it on
//! the held-out split. Shared by the command-line tool and the tests.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{CheckpointError, Objective, TrainedEncoder};
use crate::dgi::{train_dgi, DgiModel, DgiTrainConfig, EpochRecord, TrainError};
use crate::encoders::{EncoderConfig, EncoderError, EncoderKind, GraphOperators};
use crate::linkpred::{train_link_prediction, LinkPredConfig, LinkPredModel};
use crate::numeric::{DenseMatrix, SparseAdjacency};
use crate::regression::{
    compute_metrics, error_histogram, split_dataset, train_regressor, HistogramBin, MetricsReport, MlpConfig, RegressionEpoch,
    RegressionError, Regressor, RegressorTrainConfig, Split,
};
use crate::road::{filter_trips, load_graph, load_trips, DataError, RoadGraph, Trip, TripFilterConfig};
use crate::route::{
    aggregate_mean, aggregate_routes, aggregate_sum, push_augmentation, route_vector_columns, virtual_node_embeddings,
    AugmentStats, ExtendedGraph, RouteDataset, RouteError, Weather, WeatherTable,
};
use crate::scalar::Scalar;
use crate::synth::DatasetPaths;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

/// How a route's node embeddings become one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Virtual,
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "virtual" | "vn" => Ok(Aggregation::Virtual),
            other => Err(format!("unknown aggregation `{other}` (expected sum or virtual)")),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Virtual => "vn",
        })
    }
}

/// One configuration of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Per-route mean of the encoded segment features, no learned embedding.
    Baseline,
    Encoder { objective: Objective, kind: EncoderKind, aggregation: Aggregation },
}

fn kind_label(kind: EncoderKind) -> &'static str {
    match kind {
        EncoderKind::Gcn => "gcn",
        EncoderKind::Sage => "gs",
        EncoderKind::Gat => "gat",
    }
}

impl ModelSpec {
    /// Table label, e.g. `dgi(gs)+sum` or `graphsage(lp)+vn`.
    pub fn label(&self) -> String {
        match *self {
            ModelSpec::Baseline => "baseline(mlp-only)".into(),
            ModelSpec::Encoder { objective: Objective::Dgi, kind, aggregation } => format!("dgi({})+{aggregation}", kind_label(kind)),
            ModelSpec::Encoder { objective: Objective::LinkPrediction, kind, aggregation } => {
                let name = match kind {
                    EncoderKind::Sage => "graphsage",
                    other => kind_label(other),
                };
                format!("{name}(lp)+{aggregation}")
            }
        }
    }

    /// File-name friendly form of the label.
    pub fn slug(&self) -> String {
        label_slug(&self.label())
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// File-name form of a row label: runs of non-alphanumerics become one `-`.
pub fn label_slug(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

/// The six table rows, in table order.
pub fn experiment_matrix() -> Vec<ModelSpec> {
    use Aggregation::*;
    use EncoderKind::*;
    use Objective::*;
    vec![
        ModelSpec::Baseline,
        ModelSpec::Encoder { objective: LinkPrediction, kind: Sage, aggregation: Virtual },
        ModelSpec::Encoder { objective: LinkPrediction, kind: Sage, aggregation: Sum },
        ModelSpec::Encoder { objective: Dgi, kind: Gcn, aggregation: Sum },
        ModelSpec::Encoder { objective: Dgi, kind: Gat, aggregation: Sum },
        ModelSpec::Encoder { objective: Dgi, kind: Sage, aggregation: Sum },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainConfig {
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub patience: Option<usize>,
    /// Link-prediction positives per epoch.
    pub pairs_per_epoch: usize,
    /// Link-prediction negatives per positive.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        Self { layers: 2, epochs: 20, learning_rate: 0.001, patience: Some(20), pairs_per_epoch: 2048, negatives: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filter: TripFilterConfig,
    /// Fraction of the filtered trips, in dataset order, used for training.
    pub train_fraction: f64,
    pub embed: EmbedTrainConfig,
    pub mlp_hidden: Vec<usize>,
    pub regression: RegressorTrainConfig,
    pub histogram_bin_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: TripFilterConfig::default(),
            train_fraction: 5.0 / 6.0,
            embed: EmbedTrainConfig::default(),
            mlp_hidden: vec![256, 64],
            regression: RegressorTrainConfig::default(),
            histogram_bin_s: 30.0,
        }
    }
}

impl PipelineConfig {
    /// Sets every seed from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.embed.seed = seed;
        self.regression.seed = seed.wrapping_add(1);
        self
    }
}

/// A loaded dataset with trips already filtered.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: RoadGraph,
    pub trips: Vec<Trip>,
    pub rejected: usize,
    pub weather: WeatherTable,
}

impl Dataset {
    pub fn from_parts(graph: RoadGraph, trips: Vec<Trip>, weather: WeatherTable, filter: &TripFilterConfig) -> Self {
        let outcome = filter_trips(trips, filter);
        Self { graph, trips: outcome.kept, rejected: outcome.rejected.len(), weather }
    }

    pub fn train_count(&self, train_fraction: f64) -> usize {
        ((self.trips.len() as f64 * train_fraction).floor() as usize).max(1)
    }

    pub fn split(&self, train_fraction: f64) -> Result<Split, PipelineError> {
        Ok(split_dataset(self.trips.len(), self.train_count(train_fraction))?)
    }

    pub fn routes(&self) -> Vec<&[usize]> {
        self.trips.iter().map(|t| t.nodes.as_slice()).collect()
    }
}

/// Loads graph and trips and filters the trips. A missing weather file means
/// clear weather throughout.
pub fn load_dataset(paths: &DatasetPaths, filter: &TripFilterConfig) -> Result<Dataset, PipelineError> {
    filter.validate().map_err(PipelineError::Invalid)?;
    let graph = load_graph(&paths.nodes, &paths.edges)?;
    let trips = load_trips(&paths.trips, &graph)?;
    let weather =
        if paths.weather.exists() { WeatherTable::load(&paths.weather)? } else { WeatherTable::new(vec![(i64::MIN, Weather::Clear)]) };
    Ok(Dataset::from_parts(graph, trips, weather, filter))
}

/// Trains an encoder with the given objective on `adjacency`/`features`.
pub fn train_encoder<T: Scalar>(
    adjacency: &SparseAdjacency<f64>,
    features: &DenseMatrix<f64>,
    objective: Objective,
    kind: EncoderKind,
    cfg: &EmbedTrainConfig,
) -> Result<(TrainedEncoder<T>, Vec<EpochRecord>), PipelineError> {
    if !(cfg.learning_rate > 0.0) {
        return Err(PipelineError::Invalid("embedding learning rate must be positive".into()));
    }
    let ops = GraphOperators::<T>::new(adjacency);
    let x: DenseMatrix<T> = features.cast();
    let enc = EncoderConfig::new(kind, cfg.layers, features.cols()).with_seed(cfg.seed);
    match objective {
        Objective::Dgi => {
            let mut model = DgiModel::<T>::new(enc)?;
            let train = DgiTrainConfig { epochs: cfg.epochs, learning_rate: cfg.learning_rate, seed: cfg.seed, patience: cfg.patience };
            let history = train_dgi(&ops, &x, &mut model, &train)?;
            Ok((model.into(), history))
        }
        Objective::LinkPrediction => {
            let mut model = LinkPredModel::<T>::new(enc)?;
            let train = LinkPredConfig {
                epochs: cfg.epochs,
                learning_rate: cfg.learning_rate,
                seed: cfg.seed,
                pairs_per_epoch: cfg.pairs_per_epoch,
                negatives: cfg.negatives,
            };
            let history = train_link_prediction(&ops, &x, &mut model, &train)?;
            Ok((model.into(), history))
        }
    }
}

/// The graph an encoder is trained on: the road graph itself for summation,
/// or the road graph extended with one virtual vertex per filtered route.
pub fn encoder_graph(data: &Dataset, aggregation: Aggregation) -> Result<Option<ExtendedGraph>, PipelineError> {
    match aggregation {
        Aggregation::Sum => Ok(None),
        Aggregation::Virtual => Ok(Some(ExtendedGraph::new(&data.graph, data.routes())?)),
    }
}

/// One route-embedding row per trip.
pub fn route_embeddings<T: Scalar>(
    data: &Dataset,
    encoder: &TrainedEncoder<T>,
    ext: Option<&ExtendedGraph>,
) -> Result<DenseMatrix<f64>, PipelineError> {
    let routes = data.routes();
    let z = match ext {
        None => {
            let ops = GraphOperators::<T>::new(data.graph.adjacency());
            let emb = encoder.embed_nodes(&ops, &data.graph.features().cast())?.cast::<f64>();
            aggregate_routes(&routes, emb.cols(), |r| aggregate_sum(&emb, r))?
        }
        Some(ext) => {
            let ops = GraphOperators::<T>::new(ext.adjacency());
            let emb = encoder.embed_nodes(&ops, &ext.features().cast())?;
            virtual_node_embeddings(ext, &emb, &routes)?.cast()
        }
    };
    Ok(z)
}

/// Per-route mean of encoded segment features.
pub fn baseline_route_features(data: &Dataset) -> Result<DenseMatrix<f64>, PipelineError> {
    let x = data.graph.features();
    Ok(aggregate_routes(&data.routes(), x.cols(), |r| aggregate_mean(x, r))?)
}

/// Appends augmentation to every row of `route_part`; numeric augmentations are
/// scaled with statistics from the first `train_count` trips.
pub fn build_route_dataset(
    data: &Dataset,
    route_part: &DenseMatrix<f64>,
    column_prefix: &str,
    source: &str,
    train_count: usize,
) -> Result<RouteDataset, PipelineError> {
    assert_eq!(route_part.rows(), data.trips.len(), "one route row per trip");
    let stats = AugmentStats::fit(&data.trips[..train_count.min(data.trips.len())], &data.graph);
    let mut columns = route_vector_columns(column_prefix, route_part.cols());
    let width = columns.len();
    let mut values = Vec::with_capacity(data.trips.len() * width);
    for (i, trip) in data.trips.iter().enumerate() {
        values.extend_from_slice(route_part.row(i));
        push_augmentation(&mut values, trip, &data.graph, &data.weather, &stats)?;
    }
    columns.shrink_to_fit();
    Ok(RouteDataset {
        features: DenseMatrix::from_vec(data.trips.len(), width, values).map_err(RouteError::from)?,
        targets: data.trips.iter().map(|t| t.real_time_of_arrival_s).collect(),
        feature_columns: columns,
        source: source.to_string(),
        augment_stats: stats,
        train_count,
    })
}

fn rows_of(ds: &RouteDataset, range: std::ops::Range<usize>) -> (DenseMatrix<f64>, Vec<f64>) {
    let idx: Vec<usize> = range.clone().collect();
    (ds.features.select_rows(&idx), ds.targets[range].to_vec())
}

/// Fits the regressor on the training rows, selecting on validation rows.
pub fn train_eta<T: Scalar>(
    ds: &RouteDataset,
    hidden: &[usize],
    cfg: &RegressorTrainConfig,
) -> Result<(Regressor<T>, Vec<RegressionEpoch>), PipelineError> {
    let split = split_dataset(ds.len(), ds.train_count)?;
    let (tx, ty) = rows_of(ds, split.train);
    let (vx, vy) = rows_of(ds, split.val);
    let mlp = MlpConfig { input_dim: ds.width(), hidden: hidden.to_vec(), seed: cfg.seed.wrapping_add(17) };
    Ok(train_regressor(&tx, &ty, &vx, &vy, mlp, cfg)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub histogram: Vec<HistogramBin>,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
}

/// Scores a regressor on the test rows.
pub fn evaluate_eta<T: Scalar>(ds: &RouteDataset, model: &Regressor<T>, bin_width_s: f64) -> Result<Evaluation, PipelineError> {
    let split = split_dataset(ds.len(), ds.train_count)?;
    let (x, y) = rows_of(ds, split.test);
    let pred = model.predict(&x)?;
    let metrics = compute_metrics(&y, &pred)?;
    let histogram = error_histogram(&y, &pred, bin_width_s);
    Ok(Evaluation { metrics, histogram, targets: y, predictions: pred })
}

/// Route dataset for one table row, training an encoder when the row needs one.
pub fn route_dataset_for<T: Scalar>(data: &Dataset, spec: ModelSpec, cfg: &PipelineConfig) -> Result<RouteDataset, PipelineError> {
    let train_count = data.split(cfg.train_fraction)?.train.len();
    match spec {
        ModelSpec::Baseline => {
            let part = baseline_route_features(data)?;
            build_route_dataset(data, &part, "mean_feature_", &spec.label(), train_count)
        }
        ModelSpec::Encoder { objective, kind, aggregation } => {
            let ext = encoder_graph(data, aggregation)?;
            let (adj, x) = match &ext {
                Some(e) => (e.adjacency(), e.features()),
                None => (data.graph.adjacency(), data.graph.features()),
            };
            let (encoder, _) = train_encoder::<T>(adj, x, objective, kind, &cfg.embed)?;
            let part = route_embeddings(data, &encoder, ext.as_ref())?;
            build_route_dataset(data, &part, "z_", &spec.label(), train_count)
        }
    }
}

/// Runs one table row end to end.
pub fn run_model<T: Scalar>(data: &Dataset, spec: ModelSpec, cfg: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let ds = route_dataset_for::<T>(data, spec, cfg)?;
    let (model, _) = train_eta::<T>(&ds, &cfg.mlp_hidden, &cfg.regression)?;
    evaluate_eta(&ds, &model, cfg.histogram_bin_s)
}

#[derive(Debug)]
pub struct RowOutcome {
    pub spec: ModelSpec,
    pub result: Result<Evaluation, PipelineError>,
}

/// Runs every row; a failing row is recorded and the rest still run.
pub fn run_experiment<T: Scalar>(data: &Dataset, specs: &[ModelSpec], cfg: &PipelineConfig) -> Vec<RowOutcome> {
    specs.iter().map(|&spec| RowOutcome { spec, result: run_model::<T>(data, spec, cfg) }).collect()
}

pub const COMPARISON_HEADER: &str = "config,mae,rmse,mape";
pub const HISTOGRAM_HEADER: &str = "bin_left,bin_right,count";

/// `config,mae,rmse,mape`, six decimals; failed rows read `failed`.
pub fn comparison_csv(rows: &[RowOutcome]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for row in rows {
        match &row.result {
            Ok(e) => writeln!(out, "{},{:.6},{:.6},{:.6}", row.spec.label(), e.metrics.mae, e.metrics.rmse, e.metrics.mape),
            Err(_) => writeln!(out, "{},failed,failed,failed", row.spec.label()),
        }
        .expect("writing to a String");
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for b in bins {
        writeln!(out, "{},{},{}", b.left, b.right, b.count).expect("writing to a String");
    }
    out
}

pub fn metrics_json(m: &MetricsReport) -> String {
    serde_json::to_string_pretty(m).expect("metrics serialize") + "\n"
}

/// Writes `comparison.csv`, `metrics/<row>.json`, `histograms/<row>.csv` and,
/// for failed rows, `errors/<row>.txt` under `dir`.
pub fn write_experiment_outputs(dir: &Path, rows: &[RowOutcome]) -> Result<(), PipelineError> {
    for sub in ["metrics", "histograms", "errors"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    fs::write(dir.join("comparison.csv"), comparison_csv(rows))?;
    for row in rows {
        let slug = row.spec.slug();
        match &row.result {
            Ok(e) => {
                fs::write(dir.join("metrics").join(format!("{slug}.json")), metrics_json(&e.metrics))?;
                fs::write(dir.join("histograms").join(format!("{slug}.csv")), histogram_csv(&e.histogram))?;
            }
            Err(err) => fs::write(dir.join("errors").join(format!("{slug}.txt")), format!("{err}\n"))?,
        }
    }
    Ok(())
}
