//! Synthetic cities with a known travel-time process.
//!
//! The road graph is a grid of segments with a few diagonal shortcuts. Every
//! `major_every`-th row and column is a main street and the middle row is a
//! highway; the remaining cells are side streets, driveways and dirt roads.
//! Trip durations follow
//!
//! ```text
//! time = Σ_route length_i / speed_i × hour(h) × weekday(d) × weather(w) × exp(σ·ε),  ε ~ N(0, 1)
//! ```
//!
//! where `speed_i` depends on the speed limit, road class and surface of the
//! segment. Routes are the fastest path from a random source to the end of a
//! short random walk from it.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::road::{effective_route_length, write_trips, DataError, RoadClass, RoadGraph, SegmentFeatures, SegmentId, SpeedLimit, Style, Trip};
use crate::route::{calendar, Weather, WeatherLookup, WeatherTable};

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const TRIPS_FILE: &str = "trips.jsonl";
pub const WEATHER_FILE: &str = "weather.csv";

/// 2020-12-01 00:00:00 UTC.
pub const DEFAULT_START_UTC: i64 = 1_606_780_800;
const FIRST_SEGMENT_ID: SegmentId = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub n_segments: usize,
    /// Diagonal shortcuts as a fraction of the segment count.
    pub shortcut_fraction: f64,
    pub major_every: usize,
    pub seed: u64,
}

impl CitySpec {
    pub fn new(n_segments: usize, seed: u64) -> Self {
        Self { n_segments, shortcut_fraction: 0.05, major_every: 5, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeModel {
    /// Multiplier per hour of day.
    pub hour: [f64; 24],
    /// Multiplier per weekday, Monday first.
    pub weekday: [f64; 7],
    /// Multiplier per condition, indexed by [`Weather::index`].
    pub weather: [f64; 4],
    /// Standard deviation of the log-normal noise.
    pub noise_sigma: f64,
}

impl TravelTimeModel {
    /// No time-of-day, weekday or weather effect and no noise.
    pub fn flat() -> Self {
        Self { hour: [1.0; 24], weekday: [1.0; 7], weather: [1.0; 4], noise_sigma: 0.0 }
    }

    /// Speed actually driven on a segment, in m/s.
    pub fn segment_speed_mps(seg: &SegmentFeatures) -> f64 {
        let class_factor = match seg.road_class {
            RoadClass::Highway | RoadClass::FederalHighway | RoadClass::IntercityRoad => 0.9,
            RoadClass::MainCityStreet => 0.75,
            RoadClass::OtherCityStreet => 0.6,
            RoadClass::IntraQuarterDriveway => 0.5,
            RoadClass::DirtRoad => 0.45,
            RoadClass::FakeRoad | RoadClass::CyclePath | RoadClass::Walkway => 0.4,
        };
        let surface = if seg.bad_road { 0.7 } else { 1.0 };
        let barrier = if seg.barrier { 0.6 } else { 1.0 };
        let lanes = 1.0 + 0.05 * f64::from(seg.lanes.saturating_sub(1));
        seg.def_speed.kmh() as f64 / 3.6 * class_factor * surface * barrier * lanes
    }

    pub fn segment_time_s(seg: &SegmentFeatures) -> f64 {
        seg.length_m / Self::segment_speed_mps(seg)
    }

    /// Noise-free duration of a route started at `start_utc`.
    pub fn expected_time_s(&self, graph: &RoadGraph, nodes: &[usize], start_utc: i64, weather: Weather) -> f64 {
        let base: f64 = nodes.iter().map(|&v| Self::segment_time_s(graph.segment(v))).sum();
        let (hour, weekday) = calendar(start_utc);
        base * self.hour[hour] * self.weekday[weekday] * self.weather[weather.index()]
    }
}

impl Default for TravelTimeModel {
    fn default() -> Self {
        let bump = |h: f64, center: f64, width: f64| (-(h - center).powi(2) / (2.0 * width * width)).exp();
        let hour = std::array::from_fn(|h| {
            let h = h as f64;
            0.85 + 0.55 * bump(h, 8.5, 1.2) + 0.65 * bump(h, 18.0, 1.5) + 0.15 * bump(h, 13.0, 2.0)
        });
        Self { hour, weekday: [1.0, 1.0, 1.0, 1.0, 1.05, 0.85, 0.8], weather: [1.0, 1.15, 1.35, 1.1], noise_sigma: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSpec {
    pub count: usize,
    pub start_utc: i64,
    pub span_days: u32,
    /// Probability that a trip is planted with `rebuild_count ≥ 2`.
    pub rebuild_probability: f64,
    pub min_walk_steps: usize,
    pub max_walk_steps: usize,
    /// Durations are kept inside `[min_duration_s, max_duration_s]` by resampling.
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub seed: u64,
}

impl TripSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            start_utc: DEFAULT_START_UTC,
            span_days: 31,
            rebuild_probability: 0.03,
            min_walk_steps: 4,
            max_walk_steps: 40,
            min_duration_s: 60.0,
            max_duration_s: 10_800.0,
            seed,
        }
    }
}

fn grid_side(n: usize) -> usize {
    (n as f64).sqrt().ceil().max(1.0) as usize
}

fn sample_segment(class: RoadClass, rng: &mut ChaCha8Rng) -> SegmentFeatures {
    let speed = |kmh| SpeedLimit::new(kmh).expect("vocabulary speed");
    let mut seg = SegmentFeatures { road_class: class, ..Default::default() };
    match class {
        RoadClass::Highway => {
            seg.length_m = rng.gen_range(150.0..500.0);
            seg.width_m = rng.gen_range(14.0..22.0);
            seg.def_speed = speed(90);
            seg.lanes = rng.gen_range(3..=5);
            seg.turn_restrictions = rng.gen_bool(0.3);
            seg.style = if rng.gen_bool(0.1) { Style::Bridge } else { Style::Normal };
        }
        RoadClass::MainCityStreet => {
            seg.length_m = rng.gen_range(80.0..300.0);
            seg.width_m = rng.gen_range(10.0..16.0);
            seg.def_speed = speed(60);
            seg.lanes = rng.gen_range(2..=4);
            seg.turn_restrictions = rng.gen_bool(0.15);
            seg.pedo_offset = rng.gen_bool(0.1);
            seg.style = if rng.gen_bool(0.08) { Style::Crosswalk } else { Style::Normal };
        }
        RoadClass::IntraQuarterDriveway => {
            seg.length_m = rng.gen_range(30.0..120.0);
            seg.width_m = rng.gen_range(3.5..6.0);
            seg.def_speed = speed(20);
            seg.lanes = 1;
            seg.barrier = rng.gen_bool(0.2);
            seg.style = if rng.gen_bool(0.3) { Style::LivingZone } else { Style::Normal };
        }
        RoadClass::DirtRoad => {
            seg.length_m = rng.gen_range(50.0..250.0);
            seg.width_m = rng.gen_range(3.0..6.0);
            seg.def_speed = speed(15);
            seg.lanes = 1;
            seg.bad_road = rng.gen_bool(0.7);
            seg.style = if rng.gen_bool(0.05) { Style::Ford } else { Style::Undefined };
        }
        _ => {
            seg.length_m = rng.gen_range(50.0..220.0);
            seg.width_m = rng.gen_range(6.0..9.0);
            seg.def_speed = if rng.gen_bool(0.6) { speed(60) } else { speed(20) };
            seg.lanes = rng.gen_range(1..=2);
            seg.bad_road = rng.gen_bool(0.05);
            seg.payment_flag = rng.gen_bool(0.01);
            seg.style = match rng.gen_range(0..100) {
                0..=2 => Style::Crosswalk,
                3 => Style::Tunnel,
                4 => Style::Archway,
                _ => Style::Normal,
            };
        }
    }
    seg.length_m = (seg.length_m * 10.0).round() / 10.0;
    seg.width_m = (seg.width_m * 10.0).round() / 10.0;
    seg
}

/// Builds a connected grid city; deterministic in `spec.seed`.
pub fn generate_city(spec: &CitySpec) -> Result<RoadGraph, DataError> {
    let n = spec.n_segments;
    let side = grid_side(n);
    let major = spec.major_every.max(1);
    let highway_row = (n.div_ceil(side)) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let segments: Vec<(SegmentId, SegmentFeatures)> = (0..n)
        .map(|i| {
            let (r, c) = (i / side, i % side);
            let class = if r == highway_row && n >= 4 * side {
                RoadClass::Highway
            } else if r % major == 0 || c % major == 0 {
                RoadClass::MainCityStreet
            } else {
                match rng.gen_range(0..100) {
                    0..=14 => RoadClass::IntraQuarterDriveway,
                    15..=19 => RoadClass::DirtRoad,
                    _ => RoadClass::OtherCityStreet,
                }
            };
            (FIRST_SEGMENT_ID + i as SegmentId, sample_segment(class, &mut rng))
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..n {
        if (i + 1) % side != 0 && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + side < n {
            edges.push((i, i + side));
        }
    }
    let shortcuts = (spec.shortcut_fraction * n as f64).round() as usize;
    for _ in 0..shortcuts {
        let u = rng.gen_range(0..n);
        let (r, c) = (u / side, u % side);
        let c2 = if rng.gen_bool(0.5) { c + 1 } else { c.wrapping_sub(1) };
        if c2 < side && (r + 1) * side + c2 < n {
            edges.push((u, (r + 1) * side + c2));
        }
    }
    RoadGraph::new(segments, edges)
}

/// Hourly weather blocks from a sticky Markov chain covering the trip period.
pub fn generate_weather(start_utc: i64, span_days: u32, seed: u64) -> WeatherTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EA7_0000);
    let hours = span_days as i64 * 24 + 24;
    let mut current = Weather::Clear;
    let blocks = (0..hours)
        .map(|h| {
            if h > 0 && rng.gen_bool(0.15) {
                current = match rng.gen_range(0..100) {
                    0..=54 => Weather::Clear,
                    55..=74 => Weather::Rain,
                    75..=92 => Weather::Snow,
                    _ => Weather::Fog,
                };
            }
            (start_utc + h * 3600, current)
        })
        .collect();
    WeatherTable::new(blocks)
}

/// Fastest path by noise-free segment time; includes both endpoints.
pub fn fastest_path(graph: &RoadGraph, source: usize, target: usize) -> Option<Vec<usize>> {
    let n = graph.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let cost = |v: usize| TravelTimeModel::segment_time_s(graph.segment(v));
    dist[source] = 0.0;
    // Ordered by (distance bits, vertex); distances are non-negative so bit
    // order matches numeric order.
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d_bits, u))) = heap.pop() {
        let d = f64::from_bits(d_bits);
        if d > dist[u] {
            continue;
        }
        if u == target {
            break;
        }
        for &v in graph.adjacency().neighbors(u) {
            let nd = d + cost(v);
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    if !dist[target].is_finite() {
        return None;
    }
    let mut path = vec![target];
    while *path.last().unwrap() != source {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Some(path)
}

const MAX_ATTEMPTS: usize = 200;

/// Samples `spec.count` trips in chronological order; deterministic in
/// `spec.seed`. Trips whose duration would fall outside the configured bounds
/// are resampled, so the only rows a default filter rejects are the planted
/// `rebuild_count ≥ 2` ones.
pub fn generate_trips(graph: &RoadGraph, spec: &TripSpec, model: &TravelTimeModel, weather: &dyn WeatherLookup) -> Vec<Trip> {
    let n = graph.n();
    assert!(n >= 2, "need at least two segments for a route");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let span = spec.span_days as i64 * 86_400;
    let mut starts: Vec<i64> = (0..spec.count).map(|_| spec.start_utc + rng.gen_range(0..span.max(1))).collect();
    starts.sort_unstable();

    starts
        .into_iter()
        .map(|start_utc| {
            let cond = weather.condition_at(start_utc).unwrap_or(Weather::Clear);
            let mut best: Option<(Vec<usize>, f64)> = None;
            for attempt in 0..MAX_ATTEMPTS {
                let source = rng.gen_range(0..n);
                let steps = rng.gen_range(spec.min_walk_steps..=spec.max_walk_steps.max(spec.min_walk_steps)) + attempt / 20;
                let mut end = source;
                for _ in 0..steps {
                    let nb = graph.adjacency().neighbors(end);
                    end = nb[rng.gen_range(0..nb.len())];
                }
                if end == source {
                    continue;
                }
                let Some(nodes) = fastest_path(graph, source, end) else { continue };
                let noise: f64 = rng.sample::<f64, _>(StandardNormal);
                let time = model.expected_time_s(graph, &nodes, start_utc, cond) * (model.noise_sigma * noise).exp();
                let accepted = time >= spec.min_duration_s && time <= spec.max_duration_s;
                best = Some((nodes, time));
                if accepted {
                    break;
                }
            }
            let (nodes, time) = best.expect("graph admits a route");
            let first = graph.segment(nodes[0]).length_m;
            let last = graph.segment(*nodes.last().unwrap()).length_m;
            let round = |v: f64| (v * 10.0).round() / 10.0;
            let start_part = round(rng.gen_range(0.0..first));
            let finish_part = round(rng.gen_range(0.0..=last)).max(if nodes.len() == 1 { start_part } else { 0.0 });
            let rebuild_count = if rng.gen_bool(spec.rebuild_probability) {
                rng.gen_range(2..=4)
            } else if rng.gen_bool(0.03) {
                1
            } else {
                0
            };
            let mut trip = Trip {
                nodes,
                dist_to_a_m: round(rng.gen_range(0.0..40.0)),
                dist_to_b_m: round(rng.gen_range(0.0..40.0)),
                start_point_part_m: start_part,
                finish_point_part_m: finish_part,
                start_utc,
                real_time_of_arrival_s: time,
                real_dist_m: 0.0,
                rebuild_count,
            };
            trip.real_dist_m = round(effective_route_length(&trip, graph));
            trip
        })
        .collect()
}

/// Everything `generate` writes.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub graph: RoadGraph,
    pub trips: Vec<Trip>,
    pub weather: WeatherTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub trips: PathBuf,
    pub weather: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self { nodes: dir.join(NODES_FILE), edges: dir.join(EDGES_FILE), trips: dir.join(TRIPS_FILE), weather: dir.join(WEATHER_FILE) }
    }
}

pub fn generate_dataset(city: &CitySpec, trips: &TripSpec, model: &TravelTimeModel) -> Result<SyntheticDataset, DataError> {
    let graph = generate_city(city)?;
    let weather = generate_weather(trips.start_utc, trips.span_days, trips.seed);
    let trips = generate_trips(&graph, trips, model, &weather);
    Ok(SyntheticDataset { graph, trips, weather })
}

impl SyntheticDataset {
    /// Writes nodes, edges, trips and weather files into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> Result<DatasetPaths, DataError> {
        fs::create_dir_all(dir)?;
        let paths = DatasetPaths::in_dir(dir);
        self.graph.write(&paths.nodes, &paths.edges)?;
        write_trips(&paths.trips, &self.trips, &self.graph)?;
        self.weather.write(&paths.weather).map_err(|e| DataError::Io(std::io::Error::other(e.to_string())))?;
        Ok(paths)
    }
}
