use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RouteError;
use crate::road::{effective_route_length, RoadGraph, Trip};

/// Number of z-scored numeric columns: effective length, dist_to_a, dist_to_b.
pub const NUMERIC_AUGMENTS: usize = 3;
pub const HOURS: usize = 24;
pub const WEEKDAYS: usize = 7;
pub const WEATHER_KINDS: usize = Weather::ALL.len();
/// Columns appended after the route embedding.
pub const AUGMENT_DIM: usize = NUMERIC_AUGMENTS + HOURS + WEEKDAYS + WEATHER_KINDS;

pub const WEATHER_HEADER: [&str; 2] = ["block_start_utc", "condition"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Rain,
    Snow,
    Fog,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Clear, Weather::Rain, Weather::Snow, Weather::Fog];

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Rain => "rain",
            Weather::Snow => "snow",
            Weather::Fog => "fog",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Weather::ALL.into_iter().find(|w| w.as_str() == s).ok_or_else(|| format!("unknown weather `{s}`"))
    }
}

/// Weather condition in effect at a UTC timestamp.
pub trait WeatherLookup: Sync {
    fn condition_at(&self, utc: i64) -> Option<Weather>;
}

/// Same condition everywhere; stands in when no weather data is available.
#[derive(Debug, Clone, Copy)]
pub struct ConstantWeather(pub Weather);

impl WeatherLookup for ConstantWeather {
    fn condition_at(&self, _utc: i64) -> Option<Weather> {
        Some(self.0)
    }
}

/// Piecewise-constant weather: each block holds from its start until the next
/// block's start; the last block extends forever.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeatherTable {
    blocks: Vec<(i64, Weather)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeatherRow {
    block_start_utc: i64,
    condition: Weather,
}

impl WeatherTable {
    pub fn new(mut blocks: Vec<(i64, Weather)>) -> Self {
        blocks.sort_by_key(|&(t, _)| t);
        blocks.dedup_by_key(|&mut (t, _)| t);
        Self { blocks }
    }

    pub fn blocks(&self) -> &[(i64, Weather)] {
        &self.blocks
    }

    pub fn load(path: &Path) -> Result<Self, RouteError> {
        let mut reader = csv::Reader::from_path(path)?;
        if reader.headers()?.iter().ne(WEATHER_HEADER) {
            return Err(RouteError::Weather(format!("{}: expected header {}", path.display(), WEATHER_HEADER.join(","))));
        }
        let rows = reader
            .deserialize::<WeatherRow>()
            .map(|r| r.map(|r| (r.block_start_utc, r.condition)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(rows))
    }

    pub fn write(&self, path: &Path) -> Result<(), RouteError> {
        let mut w = csv::Writer::from_path(path)?;
        for &(block_start_utc, condition) in &self.blocks {
            w.serialize(WeatherRow { block_start_utc, condition })?;
        }
        w.flush()?;
        Ok(())
    }
}

impl WeatherLookup for WeatherTable {
    fn condition_at(&self, utc: i64) -> Option<Weather> {
        let k = self.blocks.partition_point(|&(t, _)| t <= utc);
        k.checked_sub(1).map(|k| self.blocks[k].1)
    }
}

/// `(hour of day, day of week)` of a UTC timestamp, with Monday = 0.
pub fn calendar(utc: i64) -> (usize, usize) {
    let day = utc.div_euclid(86_400);
    let hour = utc.rem_euclid(86_400) / 3600;
    // 1970-01-01 was a Thursday.
    let weekday = (day + 3).rem_euclid(7);
    (hour as usize, weekday as usize)
}

/// Effective route length, dist_to_a and dist_to_b in metres.
pub fn numeric_augments(trip: &Trip, graph: &RoadGraph) -> [f64; NUMERIC_AUGMENTS] {
    [effective_route_length(trip, graph), trip.dist_to_a_m, trip.dist_to_b_m]
}

/// Column means and population standard deviations of the numeric
/// augmentations, fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub mean: [f64; NUMERIC_AUGMENTS],
    pub std: [f64; NUMERIC_AUGMENTS],
}

impl AugmentStats {
    pub fn fit<'a>(trips: impl IntoIterator<Item = &'a Trip>, graph: &RoadGraph) -> Self {
        let rows: Vec<[f64; NUMERIC_AUGMENTS]> = trips.into_iter().map(|t| numeric_augments(t, graph)).collect();
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; NUMERIC_AUGMENTS];
        let mut std = [0.0; NUMERIC_AUGMENTS];
        for c in 0..NUMERIC_AUGMENTS {
            mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
            std[c] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn identity() -> Self {
        Self { mean: [0.0; NUMERIC_AUGMENTS], std: [1.0; NUMERIC_AUGMENTS] }
    }
}

/// Appends the augmentation columns for `trip` to `out`:
/// `[length_z, dist_to_a_z, dist_to_b_z | hour one-hot (24) | weekday one-hot (7) | weather one-hot (4)]`.
pub fn push_augmentation(
    out: &mut Vec<f64>,
    trip: &Trip,
    graph: &RoadGraph,
    weather: &dyn WeatherLookup,
    stats: &AugmentStats,
) -> Result<(), RouteError> {
    let raw = numeric_augments(trip, graph);
    for c in 0..NUMERIC_AUGMENTS {
        out.push((raw[c] - stats.mean[c]) / stats.std[c]);
    }
    let (hour, weekday) = calendar(trip.start_utc);
    let cond = weather
        .condition_at(trip.start_utc)
        .ok_or_else(|| RouteError::Weather(format!("no weather recorded at {}", trip.start_utc)))?;
    let start = out.len();
    out.resize(start + HOURS + WEEKDAYS + WEATHER_KINDS, 0.0);
    out[start + hour] = 1.0;
    out[start + HOURS + weekday] = 1.0;
    out[start + HOURS + WEEKDAYS + cond.index()] = 1.0;
    Ok(())
}

/// Route embedding followed by its augmentation.
pub fn augment_route_vector(
    z: &[f64],
    trip: &Trip,
    graph: &RoadGraph,
    weather: &dyn WeatherLookup,
    stats: &AugmentStats,
) -> Result<Vec<f64>, RouteError> {
    let mut out = Vec::with_capacity(z.len() + AUGMENT_DIM);
    out.extend_from_slice(z);
    push_augmentation(&mut out, trip, graph, weather, stats)?;
    Ok(out)
}

/// Column names of a route vector whose embedding part is `embed_dim` wide.
pub fn route_vector_columns(embed_prefix: &str, embed_dim: usize) -> Vec<String> {
    let mut cols: Vec<String> = (0..embed_dim).map(|i| format!("{embed_prefix}{i}")).collect();
    cols.extend(["length_z", "dist_to_a_z", "dist_to_b_z"].map(String::from));
    cols.extend((0..HOURS).map(|h| format!("hour_{h}")));
    cols.extend((0..WEEKDAYS).map(|d| format!("weekday_{d}")));
    cols.extend(Weather::ALL.iter().map(|w| format!("weather_{w}")));
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calendar_anchors() {
        // 2020-12-07 00:00:00 UTC, a Monday.
        assert_eq!(calendar(1_607_299_200), (0, 0));
        assert_eq!(calendar(1_607_299_200 + 13 * 3600 + 59), (13, 0));
        // 1970-01-01, a Thursday.
        assert_eq!(calendar(0), (0, 3));
        assert_eq!(calendar(-1), (23, 2));
    }

    #[test]
    fn weather_blocks() {
        let t = WeatherTable::new(vec![(100, Weather::Rain), (0, Weather::Clear)]);
        assert_eq!(t.condition_at(-1), None);
        assert_eq!(t.condition_at(0), Some(Weather::Clear));
        assert_eq!(t.condition_at(99), Some(Weather::Clear));
        assert_eq!(t.condition_at(100), Some(Weather::Rain));
        assert_eq!(t.condition_at(10_000), Some(Weather::Rain));
    }

    #[test]
    fn weather_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        let t = WeatherTable::new(vec![(0, Weather::Fog), (3600, Weather::Snow)]);
        t.write(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "block_start_utc,condition\n0,fog\n3600,snow\n");
        assert_eq!(WeatherTable::load(&path).unwrap(), t);
    }

    #[test]
    fn layout_width() {
        assert_eq!(AUGMENT_DIM, 3 + 24 + 7 + 4);
        assert_eq!(route_vector_columns("z", 128).len(), 128 + AUGMENT_DIM);
    }
}
