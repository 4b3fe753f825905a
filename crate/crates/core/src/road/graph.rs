use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::encode::{encode_features, NormStats};
use super::segment::{RoadClass, SegmentFeatures, SpeedLimit, Style, MAX_LANES};
use super::DataError;
use crate::numeric::{DenseMatrix, SparseAdjacency};

/// External segment identifier as it appears in the CSV and trip files.
pub type SegmentId = u64;

pub const NODES_HEADER: [&str; 12] = [
    "segment_id",
    "road_class",
    "length",
    "width",
    "def_speed",
    "lanes",
    "barrier",
    "payment_flag",
    "turn_restrictions",
    "pedo_offset",
    "bad_road",
    "style",
];
pub const EDGES_HEADER: [&str; 2] = ["src_segment_id", "dst_segment_id"];

/// Immutable road network: vertices are road segments, adjacency encodes which
/// segments connect, and `features` holds the encoded attribute rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    adjacency: SparseAdjacency<f64>,
    features: DenseMatrix<f64>,
    segment_ids: Vec<SegmentId>,
    index_of: HashMap<SegmentId, usize>,
    raw_segments: Vec<SegmentFeatures>,
    norm_stats: NormStats,
}

impl RoadGraph {
    /// Builds and validates a graph, computing normalization statistics from
    /// this graph's own segments.
    pub fn new(
        segments: Vec<(SegmentId, SegmentFeatures)>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, DataError> {
        let stats = NormStats::from_segments(segments.iter().map(|(_, s)| s));
        Self::with_stats(segments, edges, stats)
    }

    /// Like [`RoadGraph::new`] but encodes features with externally supplied
    /// statistics (e.g. those of a training graph).
    pub fn with_stats(
        segments: Vec<(SegmentId, SegmentFeatures)>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        norm_stats: NormStats,
    ) -> Result<Self, DataError> {
        let n = segments.len();
        let mut index_of = HashMap::with_capacity(n);
        for (i, (id, seg)) in segments.iter().enumerate() {
            if index_of.insert(*id, i).is_some() {
                return Err(DataError::DuplicateSegment { segment_id: *id });
            }
            if !(seg.length_m > 0.0 && seg.length_m.is_finite()) || !(seg.width_m >= 0.0 && seg.width_m.is_finite()) {
                return Err(DataError::SchemaViolation {
                    line: i + 2,
                    column: "length".into(),
                    message: format!("segment {id}: length must be > 0 and width >= 0"),
                });
            }
            if seg.lanes > MAX_LANES {
                return Err(DataError::UnknownCategory { column: "lanes".into(), value: seg.lanes.to_string() });
            }
        }
        let edges: Vec<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(DataError::DanglingEdgeEndpoint { line: 0, segment_id: u.max(v) as u64 });
        }
        let adjacency = SparseAdjacency::from_undirected_edges(n, edges);
        let (segment_ids, raw_segments): (Vec<_>, Vec<_>) = segments.into_iter().unzip();
        let features = encode_features(&raw_segments, &norm_stats);
        if !features.is_finite() {
            return Err(DataError::SchemaViolation {
                line: 0,
                column: "features".into(),
                message: "encoded features contain non-finite values".into(),
            });
        }
        Ok(Self { adjacency, features, segment_ids, index_of, raw_segments, norm_stats })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn adjacency(&self) -> &SparseAdjacency<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix<f64> {
        &self.features
    }

    pub fn raw_segments(&self) -> &[SegmentFeatures] {
        &self.raw_segments
    }

    pub fn segment(&self, index: usize) -> &SegmentFeatures {
        &self.raw_segments[index]
    }

    pub fn segment_ids(&self) -> &[SegmentId] {
        &self.segment_ids
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm_stats
    }

    pub fn index_of(&self, id: SegmentId) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    pub fn id_of(&self, index: usize) -> SegmentId {
        self.segment_ids[index]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.contains(a, b)
    }

    /// Undirected edges as index pairs with `u < v`, in row order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| self.adjacency.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn load(nodes_path: &Path, edges_path: &Path) -> Result<Self, DataError> {
        load_graph(nodes_path, edges_path)
    }

    /// Writes the nodes and edges CSVs. Each undirected edge is written once.
    pub fn write(&self, nodes_path: &Path, edges_path: &Path) -> Result<(), DataError> {
        let mut w = BufWriter::new(File::create(nodes_path)?);
        writeln!(w, "{}", NODES_HEADER.join(","))?;
        for (id, s) in self.segment_ids.iter().zip(&self.raw_segments) {
            let flags: Vec<&str> = s.flags().iter().map(|&f| if f { "1" } else { "0" }).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                id,
                s.road_class,
                s.length_m,
                s.width_m,
                s.def_speed.kmh(),
                s.lanes,
                flags.join(","),
                s.style
            )?;
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(edges_path)?);
        writeln!(w, "{}", EDGES_HEADER.join(","))?;
        for (u, v) in self.undirected_edges() {
            writeln!(w, "{},{}", self.segment_ids[u], self.segment_ids[v])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile(path.to_path_buf()),
        _ => DataError::Io(e),
    })
}

fn check_header(reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<(), DataError> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(DataError::SchemaViolation {
            line: 1,
            column: "header".into(),
            message: format!("expected `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, line: usize) -> Result<&'a str, DataError> {
    rec.get(idx).map(str::trim).ok_or_else(|| DataError::SchemaViolation {
        line,
        column: NODES_HEADER.get(idx).copied().unwrap_or("?").into(),
        message: "missing field".into(),
    })
}

fn parse_num<V: std::str::FromStr>(text: &str, line: usize, column: &str) -> Result<V, DataError> {
    text.parse().map_err(|_| DataError::SchemaViolation {
        line,
        column: column.into(),
        message: format!("cannot parse `{text}`"),
    })
}

fn parse_flag(text: &str, line: usize, column: &str) -> Result<bool, DataError> {
    match text {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(DataError::SchemaViolation { line, column: column.into(), message: format!("expected 0 or 1, found `{text}`") }),
    }
}

fn parse_segment_row(rec: &csv::StringRecord, line: usize) -> Result<(SegmentId, SegmentFeatures), DataError> {
    if rec.len() != NODES_HEADER.len() {
        return Err(DataError::SchemaViolation {
            line,
            column: "*".into(),
            message: format!("expected {} fields, found {}", NODES_HEADER.len(), rec.len()),
        });
    }
    let id: SegmentId = parse_num(field(rec, 0, line)?, line, "segment_id")?;
    let road_class: RoadClass = field(rec, 1, line)?
        .parse()
        .map_err(|v| DataError::UnknownCategory { column: "road_class".into(), value: v })?;
    let length_m: f64 = parse_num(field(rec, 2, line)?, line, "length")?;
    let width_m: f64 = parse_num(field(rec, 3, line)?, line, "width")?;
    let speed: u32 = parse_num(field(rec, 4, line)?, line, "def_speed")?;
    let def_speed =
        SpeedLimit::new(speed).ok_or_else(|| DataError::UnknownCategory { column: "def_speed".into(), value: speed.to_string() })?;
    let lanes: u8 = parse_num(field(rec, 5, line)?, line, "lanes")?;
    if lanes > MAX_LANES {
        return Err(DataError::UnknownCategory { column: "lanes".into(), value: lanes.to_string() });
    }
    let mut flags = [false; 5];
    for (k, flag) in flags.iter_mut().enumerate() {
        *flag = parse_flag(field(rec, 6 + k, line)?, line, NODES_HEADER[6 + k])?;
    }
    let style: Style =
        field(rec, 11, line)?.parse().map_err(|v| DataError::UnknownCategory { column: "style".into(), value: v })?;
    if !(length_m > 0.0 && length_m.is_finite()) {
        return Err(DataError::SchemaViolation { line, column: "length".into(), message: "length must be > 0".into() });
    }
    if !(width_m >= 0.0 && width_m.is_finite()) {
        return Err(DataError::SchemaViolation { line, column: "width".into(), message: "width must be >= 0".into() });
    }
    let [barrier, payment_flag, turn_restrictions, pedo_offset, bad_road] = flags;
    Ok((
        id,
        SegmentFeatures {
            road_class,
            length_m,
            width_m,
            def_speed,
            lanes,
            barrier,
            payment_flag,
            turn_restrictions,
            pedo_offset,
            bad_road,
            style,
        },
    ))
}

/// Loads and validates a road graph from the nodes and edges CSV files.
pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<RoadGraph, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(open(nodes_path)?);
    check_header(&mut reader, &NODES_HEADER)?;
    let mut segments = Vec::new();
    let mut seen = HashMap::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let (id, seg) = parse_segment_row(&rec, line)?;
        if seen.insert(id, segments.len()).is_some() {
            return Err(DataError::DuplicateSegment { segment_id: id });
        }
        segments.push((id, seg));
    }

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(open(edges_path)?);
    check_header(&mut reader, &EDGES_HEADER)?;
    let mut edges = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() != 2 {
            return Err(DataError::SchemaViolation { line, column: "*".into(), message: "expected 2 fields".into() });
        }
        let src: SegmentId = parse_num(rec[0].trim(), line, "src_segment_id")?;
        let dst: SegmentId = parse_num(rec[1].trim(), line, "dst_segment_id")?;
        let lookup = |id: SegmentId| seen.get(&id).copied().ok_or(DataError::DanglingEdgeEndpoint { line, segment_id: id });
        edges.push((lookup(src)?, lookup(dst)?));
    }
    RoadGraph::new(segments, edges)
}
