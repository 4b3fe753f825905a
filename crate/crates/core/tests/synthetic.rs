use std::fs;
use std::time::Instant;

use eta_graph::road::{
    filter_trips, load_graph, load_trips, write_trips, RoadClass, SegmentFeatures, SpeedLimit, TripFilterConfig,
};
use eta_graph::route::{calendar, Weather, WeatherLookup, WeatherTable};
use eta_graph::synth::{
    generate_city, generate_dataset, CitySpec, DatasetPaths, TravelTimeModel, TripSpec, EDGES_FILE, NODES_FILE,
    TRIPS_FILE, WEATHER_FILE,
};

fn small(seed: u64) -> (CitySpec, TripSpec) {
    (CitySpec::new(400, seed), TripSpec::new(3000, seed))
}

#[test]
fn output_is_byte_identical_per_seed() {
    let (city, trips) = small(7);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_dataset(&city, &trips, &TravelTimeModel::default()).unwrap().write(a.path()).unwrap();
    generate_dataset(&city, &trips, &TravelTimeModel::default()).unwrap().write(b.path()).unwrap();
    for file in [NODES_FILE, EDGES_FILE, TRIPS_FILE, WEATHER_FILE] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let (city, trips) = small(8);
    let c = tempfile::tempdir().unwrap();
    generate_dataset(&city, &trips, &TravelTimeModel::default()).unwrap().write(c.path()).unwrap();
    assert_ne!(fs::read(a.path().join(TRIPS_FILE)).unwrap(), fs::read(c.path().join(TRIPS_FILE)).unwrap());
}

#[test]
fn two_thousand_segment_city_is_fast_and_connected() {
    let start = Instant::now();
    let g = generate_city(&CitySpec::new(2000, 1)).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(g.n(), 2000);
    // Breadth-first search reaches every vertex.
    let mut seen = vec![false; g.n()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in g.adjacency().neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert!(g.raw_segments().iter().any(|s| s.road_class == RoadClass::Highway));
    assert!(g.raw_segments().iter().any(|s| s.road_class == RoadClass::MainCityStreet));
}

#[test]
fn trips_are_valid() {
    let (city, spec) = small(3);
    let ds = generate_dataset(&city, &spec, &TravelTimeModel::default()).unwrap();
    assert_eq!(ds.trips.len(), spec.count);
    let end = spec.start_utc + spec.span_days as i64 * 86_400;
    for pair in ds.trips.windows(2) {
        assert!(pair[0].start_utc <= pair[1].start_utc);
    }
    for t in &ds.trips {
        assert!(t.nodes.len() >= 2);
        for w in t.nodes.windows(2) {
            assert!(ds.graph.are_adjacent(w[0], w[1]));
        }
        assert!((spec.start_utc..end).contains(&t.start_utc));
        assert!(t.real_time_of_arrival_s >= spec.min_duration_s && t.real_time_of_arrival_s <= spec.max_duration_s);
        assert!(t.start_point_part_m <= ds.graph.segment(t.nodes[0]).length_m);
        assert!(t.real_dist_m > 0.0);
        assert!(ds.weather.condition_at(t.start_utc).is_some());
    }
}

#[test]
fn planted_rebuild_rate_is_within_three_sigma() {
    let spec = TripSpec::new(20_000, 11);
    let ds = generate_dataset(&CitySpec::new(2000, 11), &spec, &TravelTimeModel::default()).unwrap();
    let planted = ds.trips.iter().filter(|t| t.rebuild_count >= 2).count() as f64;
    let n = spec.count as f64;
    let p = spec.rebuild_probability;
    let sigma = (n * p * (1.0 - p)).sqrt();
    assert!((planted - n * p).abs() < 3.0 * sigma, "planted {planted}, expected {} ± {}", n * p, 3.0 * sigma);
}

#[test]
fn segment_speed_by_hand() {
    let seg = SegmentFeatures {
        road_class: RoadClass::MainCityStreet,
        length_m: 100.0,
        def_speed: SpeedLimit::new(60).unwrap(),
        lanes: 2,
        ..Default::default()
    };
    // 60 km/h · 0.75 (main street) · 1.05 (one extra lane).
    let v = 60.0 / 3.6 * 0.75 * 1.05;
    assert!((TravelTimeModel::segment_speed_mps(&seg) - v).abs() < 1e-12);
    let bad = SegmentFeatures { bad_road: true, barrier: true, ..seg.clone() };
    assert!((TravelTimeModel::segment_speed_mps(&bad) - v * 0.7 * 0.6).abs() < 1e-12);
    assert!((TravelTimeModel::segment_time_s(&seg) - 100.0 / v).abs() < 1e-12);
}

#[test]
fn flat_noise_free_durations_are_sums_of_segment_times() {
    let (city, spec) = small(4);
    let ds = generate_dataset(&city, &spec, &TravelTimeModel::flat()).unwrap();
    for t in ds.trips.iter().take(200) {
        let expected: f64 = t.nodes.iter().map(|&v| TravelTimeModel::segment_time_s(ds.graph.segment(v))).sum();
        assert!((t.real_time_of_arrival_s - expected).abs() < 1e-9 * expected);
    }
}

/// Solves the normal equations `XᵀX b = Xᵀy` by Gaussian elimination.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &t) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * t;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c && a[c][c] != 0.0 {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..k).map(|i| if a[i][i] == 0.0 { 0.0 } else { a[i][k] / a[i][i] }).collect()
}

#[test]
fn noise_free_durations_are_log_linear_in_route_time_and_calendar() {
    let model = TravelTimeModel { noise_sigma: 0.0, ..TravelTimeModel::default() };
    let (city, spec) = small(5);
    let ds = generate_dataset(&city, &spec, &model).unwrap();
    // Columns: log of the summed segment time, intercept, and one-hots for hour
    // 1..24, weekday 1..7 and weather 1..4 (the first level of each is the base).
    let rows: Vec<Vec<f64>> = ds
        .trips
        .iter()
        .map(|t| {
            let base: f64 = t.nodes.iter().map(|&v| TravelTimeModel::segment_time_s(ds.graph.segment(v))).sum();
            let (h, d) = calendar(t.start_utc);
            let w = ds.weather.condition_at(t.start_utc).unwrap().index();
            let mut r = vec![base.ln(), 1.0];
            r.extend((1..24).map(|k| f64::from(u8::from(h == k))));
            r.extend((1..7).map(|k| f64::from(u8::from(d == k))));
            r.extend((1..4).map(|k| f64::from(u8::from(w == k))));
            r
        })
        .collect();
    let y: Vec<f64> = ds.trips.iter().map(|t| t.real_time_of_arrival_s.ln()).collect();
    let b = least_squares(&rows, &y);
    let mape = rows
        .iter()
        .zip(&ds.trips)
        .map(|(r, t)| {
            let pred = r.iter().zip(&b).map(|(x, c)| x * c).sum::<f64>().exp();
            ((pred - t.real_time_of_arrival_s) / t.real_time_of_arrival_s).abs()
        })
        .sum::<f64>()
        / rows.len() as f64
        * 100.0;
    assert!(mape < 1.0, "mape {mape}");
    assert!((b[0] - 1.0).abs() < 1e-6, "route-time exponent {}", b[0]);
}

#[test]
fn calendar_hand_values() {
    // 2020-12-01 00:00 UTC was a Tuesday.
    assert_eq!(calendar(1_606_780_800), (0, 1));
    assert_eq!(calendar(1_606_780_800 + 5 * 86_400 + 13 * 3600 + 59), (13, 6));
    assert_eq!(calendar(-1), (23, 2));
}

#[test]
fn round_trip_and_filter() {
    let spec = TripSpec::new(3000, 9);
    let ds = generate_dataset(&CitySpec::new(400, 9), &spec, &TravelTimeModel::default()).unwrap();
    let first = tempfile::tempdir().unwrap();
    let paths = ds.write(first.path()).unwrap();
    assert_eq!(paths, DatasetPaths::in_dir(first.path()));

    let graph = load_graph(&paths.nodes, &paths.edges).unwrap();
    let trips = load_trips(&paths.trips, &graph).unwrap();
    let weather = WeatherTable::load(&paths.weather).unwrap();
    assert_eq!(graph, ds.graph);
    assert_eq!(trips, ds.trips);
    assert_eq!(weather.blocks(), ds.weather.blocks());

    let second = tempfile::tempdir().unwrap();
    let p2 = DatasetPaths::in_dir(second.path());
    graph.write(&p2.nodes, &p2.edges).unwrap();
    write_trips(&p2.trips, &trips, &graph).unwrap();
    let graph2 = load_graph(&p2.nodes, &p2.edges).unwrap();
    assert_eq!(graph2, graph);
    assert_eq!(load_trips(&p2.trips, &graph2).unwrap(), trips);
    assert_eq!(fs::read(&paths.trips).unwrap(), fs::read(&p2.trips).unwrap());

    let planted: Vec<usize> = trips.iter().enumerate().filter(|(_, t)| t.rebuild_count > 1).map(|(i, _)| i).collect();
    assert!(!planted.is_empty());
    assert!(trips.iter().any(|t| t.rebuild_count == 1));
    let outcome = filter_trips(trips.clone(), &TripFilterConfig::default());
    let rejected: Vec<usize> = outcome.rejected.iter().map(|r| r.0).collect();
    assert_eq!(rejected, planted);
    assert_eq!(outcome.kept.len() + planted.len(), trips.len());
}

#[test]
fn weather_lookup_uses_the_enclosing_block() {
    let table = WeatherTable::new(vec![(100, Weather::Rain), (0, Weather::Clear), (200, Weather::Snow)]);
    assert_eq!(table.condition_at(-5), None);
    assert_eq!(table.condition_at(0), Some(Weather::Clear));
    assert_eq!(table.condition_at(150), Some(Weather::Rain));
    assert_eq!(table.condition_at(10_000), Some(Weather::Snow));
}
