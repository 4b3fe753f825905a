use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{RoadGraph, SegmentId};
use super::DataError;

/// One recorded route. `nodes` holds dense vertex indices of the graph the trip
/// was loaded against.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub nodes: Vec<usize>,
    pub dist_to_a_m: f64,
    pub dist_to_b_m: f64,
    pub start_point_part_m: f64,
    pub finish_point_part_m: f64,
    pub start_utc: i64,
    pub real_time_of_arrival_s: f64,
    pub real_dist_m: f64,
    pub rebuild_count: u32,
}

/// Wire form of a trip: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripRecord {
    pub nodes: Vec<SegmentId>,
    pub dist_to_a: f64,
    pub dist_to_b: f64,
    pub start_point_part: f64,
    pub finish_point_part: f64,
    pub start_utc: i64,
    pub real_time_of_arrival: f64,
    pub real_dist: f64,
    pub rebuild_count: u32,
}

impl Trip {
    pub fn duration_s(&self) -> f64 {
        self.real_time_of_arrival_s
    }

    pub fn to_record(&self, graph: &RoadGraph) -> TripRecord {
        TripRecord {
            nodes: self.nodes.iter().map(|&i| graph.id_of(i)).collect(),
            dist_to_a: self.dist_to_a_m,
            dist_to_b: self.dist_to_b_m,
            start_point_part: self.start_point_part_m,
            finish_point_part: self.finish_point_part_m,
            start_utc: self.start_utc,
            real_time_of_arrival: self.real_time_of_arrival_s,
            real_dist: self.real_dist_m,
            rebuild_count: self.rebuild_count,
        }
    }

    /// Resolves ids and checks every trip invariant against `graph`. `line` is
    /// used for error reporting only.
    pub fn from_record(rec: TripRecord, graph: &RoadGraph, line: usize) -> Result<Self, DataError> {
        let schema = |column: &str, message: String| DataError::SchemaViolation { line, column: column.into(), message };
        if rec.nodes.is_empty() {
            return Err(schema("nodes", "route must contain at least one segment".into()));
        }
        let nodes = rec
            .nodes
            .iter()
            .map(|&id| graph.index_of(id).ok_or(DataError::UnknownSegment { line, segment_id: id }))
            .collect::<Result<Vec<_>, _>>()?;
        for pair in nodes.windows(2) {
            if !graph.are_adjacent(pair[0], pair[1]) {
                return Err(DataError::NonAdjacentConsecutiveNodes { line, from: graph.id_of(pair[0]), to: graph.id_of(pair[1]) });
            }
        }
        let nonneg = [
            ("dist_to_a", rec.dist_to_a),
            ("dist_to_b", rec.dist_to_b),
            ("start_point_part", rec.start_point_part),
            ("finish_point_part", rec.finish_point_part),
        ];
        for (column, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(schema(column, format!("expected a finite non-negative value, found {v}")));
            }
        }
        for (column, v) in [("real_time_of_arrival", rec.real_time_of_arrival), ("real_dist", rec.real_dist)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(column, format!("expected a finite positive value, found {v}")));
            }
        }
        let first_len = graph.segment(nodes[0]).length_m;
        let last_len = graph.segment(*nodes.last().expect("non-empty")).length_m;
        if rec.start_point_part > first_len {
            return Err(schema("start_point_part", format!("{} exceeds first segment length {first_len}", rec.start_point_part)));
        }
        if rec.finish_point_part > last_len {
            return Err(schema("finish_point_part", format!("{} exceeds last segment length {last_len}", rec.finish_point_part)));
        }
        Ok(Self {
            nodes,
            dist_to_a_m: rec.dist_to_a,
            dist_to_b_m: rec.dist_to_b,
            start_point_part_m: rec.start_point_part,
            finish_point_part_m: rec.finish_point_part,
            start_utc: rec.start_utc,
            real_time_of_arrival_s: rec.real_time_of_arrival,
            real_dist_m: rec.real_dist,
            rebuild_count: rec.rebuild_count,
        })
    }
}

/// Loads a JSON-Lines trip file. The first invalid row aborts the load with its
/// 1-based line number; blank lines are skipped.
pub fn load_trips(path: &Path, graph: &RoadGraph) -> Result<Vec<Trip>, DataError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile(path.to_path_buf()),
        _ => DataError::Io(e),
    })?;
    let mut trips = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TripRecord = serde_json::from_str(&line).map_err(|e| DataError::SchemaViolation {
            line: line_no,
            column: "*".into(),
            message: e.to_string(),
        })?;
        trips.push(Trip::from_record(rec, graph, line_no)?);
    }
    Ok(trips)
}

pub fn write_trips(path: &Path, trips: &[Trip], graph: &RoadGraph) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in trips {
        serde_json::to_writer(&mut w, &t.to_record(graph))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Bounds for separating anomalous trips from the main volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripFilterConfig {
    pub max_rebuild_count: u32,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for TripFilterConfig {
    fn default() -> Self {
        Self { max_rebuild_count: 1, min_duration_s: 60.0, max_duration_s: 3.0 * 3600.0, min_nodes: 2, max_nodes: 500 }
    }
}

impl TripFilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_duration_s < self.max_duration_s) {
            return Err(format!("min_duration_s {} must be < max_duration_s {}", self.min_duration_s, self.max_duration_s));
        }
        if self.min_nodes >= self.max_nodes {
            return Err(format!("min_nodes {} must be < max_nodes {}", self.min_nodes, self.max_nodes));
        }
        Ok(())
    }
}

/// First bound a rejected trip violated, checked in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    RebuildCount,
    TooShort,
    TooLong,
    TooFewNodes,
    TooManyNodes,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<Trip>,
    /// `(position in the input, trip, reason)`.
    pub rejected: Vec<(usize, Trip, RejectReason)>,
}

pub fn reject_reason(trip: &Trip, cfg: &TripFilterConfig) -> Option<RejectReason> {
    if trip.rebuild_count > cfg.max_rebuild_count {
        Some(RejectReason::RebuildCount)
    } else if trip.real_time_of_arrival_s < cfg.min_duration_s {
        Some(RejectReason::TooShort)
    } else if trip.real_time_of_arrival_s > cfg.max_duration_s {
        Some(RejectReason::TooLong)
    } else if trip.nodes.len() < cfg.min_nodes {
        Some(RejectReason::TooFewNodes)
    } else if trip.nodes.len() > cfg.max_nodes {
        Some(RejectReason::TooManyNodes)
    } else {
        None
    }
}

/// Splits trips into those within bounds and those rejected, preserving order.
pub fn filter_trips(trips: impl IntoIterator<Item = Trip>, cfg: &TripFilterConfig) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for (i, t) in trips.into_iter().enumerate() {
        match reject_reason(&t, cfg) {
            None => out.kept.push(t),
            Some(r) => out.rejected.push((i, t, r)),
        }
    }
    out
}

/// Route length after trimming the unused parts of the first and last segment:
/// `Σ lengths − start_part − (len(last) − finish_part)`, clamped at zero.
pub fn effective_route_length(trip: &Trip, graph: &RoadGraph) -> f64 {
    let total: f64 = trip.nodes.iter().map(|&v| graph.segment(v).length_m).sum();
    let last_len = trip.nodes.last().map_or(0.0, |&v| graph.segment(v).length_m);
    (total - trip.start_point_part_m - (last_len - trip.finish_point_part_m)).max(0.0)
}
