//! Road network and trip data: schema, loading, validation, feature encoding
//! and trip filtering.

mod encode;
mod graph;
mod segment;
mod stats;
mod trips;

use std::path::PathBuf;

pub use encode::{
    encode_features, encode_segment, feature_names, NormStats, FEATURE_DIM, FLAGS_OFFSET, LANES_OFFSET, LENGTH_COLUMN,
    ROAD_CLASS_OFFSET, SPEED_OFFSET, STYLE_OFFSET, WIDTH_COLUMN,
};
pub use graph::{load_graph, RoadGraph, SegmentId, EDGES_HEADER, NODES_HEADER};
pub use segment::{RoadClass, SegmentFeatures, SpeedLimit, Style, MAX_LANES, SPEED_LIMITS_KMH};
pub use stats::{dataset_stats, StatsReport};
pub use trips::{
    effective_route_length, filter_trips, load_trips, reject_reason, write_trips, FilterOutcome, RejectReason, Trip,
    TripFilterConfig, TripRecord,
};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("line {line}, column `{column}`: {message}")]
    SchemaViolation { line: usize, column: String, message: String },
    #[error("line {line}: edge endpoint {segment_id} is not a known segment")]
    DanglingEdgeEndpoint { line: usize, segment_id: SegmentId },
    #[error("duplicate segment id {segment_id}")]
    DuplicateSegment { segment_id: SegmentId },
    #[error("unknown value `{value}` in column `{column}`")]
    UnknownCategory { column: String, value: String },
    #[error("line {line}: segment {segment_id} is not in the graph")]
    UnknownSegment { line: usize, segment_id: SegmentId },
    #[error("line {line}: consecutive segments {from} and {to} are not adjacent")]
    NonAdjacentConsecutiveNodes { line: usize, from: SegmentId, to: SegmentId },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
