use serde::{Deserialize, Serialize};

use super::graph::RoadGraph;
use super::trips::Trip;

/// Network/trip summary in the shape of a per-city dataset description.
///
/// `vertex_coverage` is the fraction of segments visited by at least one trip.
/// `usage_median` is the median, over visited segments only, of the number of
/// trips that visit each segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub nodes: usize,
    pub adjacency_entries: usize,
    pub trips: usize,
    pub vertex_coverage: f64,
    pub usage_median: f64,
}

pub fn dataset_stats(graph: &RoadGraph, trips: &[Trip]) -> StatsReport {
    let n = graph.n();
    let mut usage = vec![0usize; n];
    let mut last_seen = vec![usize::MAX; n];
    for (t, trip) in trips.iter().enumerate() {
        for &v in &trip.nodes {
            if last_seen[v] != t {
                last_seen[v] = t;
                usage[v] += 1;
            }
        }
    }
    let mut used: Vec<usize> = usage.into_iter().filter(|&u| u > 0).collect();
    used.sort_unstable();
    let usage_median = match used.len() {
        0 => 0.0,
        k if k % 2 == 1 => used[k / 2] as f64,
        k => (used[k / 2 - 1] + used[k / 2]) as f64 / 2.0,
    };
    StatsReport {
        nodes: n,
        adjacency_entries: graph.adjacency().nnz(),
        trips: trips.len(),
        vertex_coverage: if n == 0 { 0.0 } else { used.len() as f64 / n as f64 },
        usage_median,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::segment::SegmentFeatures;

    fn graph(n: usize) -> RoadGraph {
        let segs = (0..n as u64).map(|i| (i, SegmentFeatures::default())).collect();
        RoadGraph::new(segs, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn trip(nodes: Vec<usize>) -> Trip {
        Trip {
            nodes,
            dist_to_a_m: 0.0,
            dist_to_b_m: 0.0,
            start_point_part_m: 0.0,
            finish_point_part_m: 0.0,
            start_utc: 0,
            real_time_of_arrival_s: 100.0,
            real_dist_m: 1.0,
            rebuild_count: 0,
        }
    }

    #[test]
    fn half_coverage_from_hand_count() {
        let g = graph(6);
        let s = dataset_stats(&g, &[trip(vec![0, 1, 2])]);
        assert_eq!(s.vertex_coverage, 0.5);
        assert_eq!(s.usage_median, 1.0);
        assert_eq!(s.adjacency_entries, 10);
    }

    #[test]
    fn full_coverage_and_even_median() {
        let g = graph(4);
        // usage per vertex: 0 -> 1, 1 -> 2, 2 -> 2, 3 -> 1 (repeat visits count once)
        let s = dataset_stats(&g, &[trip(vec![0, 1, 2, 1]), trip(vec![1, 2, 3])]);
        assert_eq!(s.vertex_coverage, 1.0);
        assert_eq!(s.usage_median, 1.5);
        assert_eq!(s.trips, 2);
    }
}
