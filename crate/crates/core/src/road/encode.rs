//! Fixed 44-column encoding of segment attributes.
//!
//! | columns | content                                   |
//! |---------|-------------------------------------------|
//! | 0..10   | road class one-hot ([`RoadClass::ALL`])   |
//! | 10      | length, z-scored                          |
//! | 11      | width, z-scored                           |
//! | 12..17  | speed limit one-hot (3, 15, 20, 60, 90)   |
//! | 17..23  | lanes one-hot (0..=5)                     |
//! | 23..28  | barrier, payment, turn restrictions, crosswalk offset, bad road |
//! | 28..44  | style one-hot ([`Style::ALL`])            |

use serde::{Deserialize, Serialize};

use super::segment::{RoadClass, SegmentFeatures, Style, MAX_LANES, SPEED_LIMITS_KMH};
use crate::numeric::DenseMatrix;

pub const ROAD_CLASS_OFFSET: usize = 0;
pub const LENGTH_COLUMN: usize = 10;
pub const WIDTH_COLUMN: usize = 11;
pub const SPEED_OFFSET: usize = 12;
pub const LANES_OFFSET: usize = 17;
pub const FLAGS_OFFSET: usize = 23;
pub const STYLE_OFFSET: usize = 28;
pub const FEATURE_DIM: usize = 44;

const _: () = assert!(STYLE_OFFSET + 16 == FEATURE_DIM);
const _: () = assert!(SPEED_OFFSET + SPEED_LIMITS_KMH.len() == LANES_OFFSET);
const _: () = assert!(LANES_OFFSET + MAX_LANES as usize + 1 == FLAGS_OFFSET);

/// Mean and population standard deviation of segment length and width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub length_mean: f64,
    pub length_std: f64,
    pub width_mean: f64,
    pub width_std: f64,
}

impl NormStats {
    pub fn from_segments<'a>(segments: impl IntoIterator<Item = &'a SegmentFeatures>) -> Self {
        let (mut n, mut sl, mut sl2, mut sw, mut sw2) = (0usize, 0.0, 0.0, 0.0, 0.0);
        for s in segments {
            n += 1;
            sl += s.length_m;
            sl2 += s.length_m * s.length_m;
            sw += s.width_m;
            sw2 += s.width_m * s.width_m;
        }
        if n == 0 {
            return Self { length_mean: 0.0, length_std: 1.0, width_mean: 0.0, width_std: 1.0 };
        }
        let nf = n as f64;
        let (lm, wm) = (sl / nf, sw / nf);
        let std = |sq: f64, mean: f64| {
            let var = (sq / nf - mean * mean).max(0.0);
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        };
        Self { length_mean: lm, length_std: std(sl2, lm), width_mean: wm, width_std: std(sw2, wm) }
    }
}

/// Encodes one segment into `out`, which must have length [`FEATURE_DIM`].
pub fn encode_segment(seg: &SegmentFeatures, stats: &NormStats, out: &mut [f64]) {
    assert_eq!(out.len(), FEATURE_DIM);
    out.fill(0.0);
    out[ROAD_CLASS_OFFSET + seg.road_class.index()] = 1.0;
    out[LENGTH_COLUMN] = (seg.length_m - stats.length_mean) / stats.length_std;
    out[WIDTH_COLUMN] = (seg.width_m - stats.width_mean) / stats.width_std;
    out[SPEED_OFFSET + seg.def_speed.index()] = 1.0;
    out[LANES_OFFSET + seg.lanes as usize] = 1.0;
    for (k, flag) in seg.flags().into_iter().enumerate() {
        out[FLAGS_OFFSET + k] = if flag { 1.0 } else { 0.0 };
    }
    out[STYLE_OFFSET + seg.style.index()] = 1.0;
}

/// Encodes all segments into an `n × 44` matrix.
pub fn encode_features(raw: &[SegmentFeatures], stats: &NormStats) -> DenseMatrix<f64> {
    let mut m = DenseMatrix::zeros(raw.len(), FEATURE_DIM);
    for (i, seg) in raw.iter().enumerate() {
        encode_segment(seg, stats, m.row_mut(i));
    }
    m
}

/// Column names in encoding order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = RoadClass::ALL.iter().map(|c| format!("class:{c}")).collect();
    names.push("length_z".into());
    names.push("width_z".into());
    names.extend(SPEED_LIMITS_KMH.iter().map(|s| format!("speed:{s}")));
    names.extend((0..=MAX_LANES).map(|l| format!("lanes:{l}")));
    names.extend(["barrier", "payment_flag", "turn_restrictions", "pedo_offset", "bad_road"].map(String::from));
    names.extend(Style::ALL.iter().map(|s| format!("style:{s}")));
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::segment::SpeedLimit;

    fn stats() -> NormStats {
        NormStats { length_mean: 100.0, length_std: 50.0, width_mean: 8.0, width_std: 2.0 }
    }

    #[test]
    fn default_segment_has_one_hot_per_block() {
        let mut row = [0.0; FEATURE_DIM];
        encode_segment(&SegmentFeatures::default(), &stats(), &mut row);
        let ones_in = |a: usize, b: usize| row[a..b].iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones_in(0, 10) + ones_in(12, 17) + ones_in(17, 23), 3);
        assert_eq!(ones_in(28, 44), 1);
        assert_eq!(row[LENGTH_COLUMN], 0.0);
        assert_eq!(row[WIDTH_COLUMN], -0.5);
    }

    #[test]
    fn hand_built_segment_matches_hand_encoding() {
        let seg = SegmentFeatures {
            road_class: RoadClass::Highway,
            length_m: 175.0,
            width_m: 11.0,
            def_speed: SpeedLimit::new(90).unwrap(),
            lanes: 4,
            barrier: true,
            payment_flag: false,
            turn_restrictions: true,
            pedo_offset: false,
            bad_road: true,
            style: Style::Tunnel,
        };
        let mut expected = [0.0; FEATURE_DIM];
        expected[5] = 1.0; // highway
        expected[10] = 1.5; // (175 - 100) / 50
        expected[11] = 1.5; // (11 - 8) / 2
        expected[16] = 1.0; // 90 km/h
        expected[21] = 1.0; // 4 lanes
        expected[23] = 1.0;
        expected[25] = 1.0;
        expected[27] = 1.0;
        expected[41] = 1.0; // tunnel is style 13
        let mut row = [0.0; FEATURE_DIM];
        encode_segment(&seg, &stats(), &mut row);
        assert_eq!(row, expected);
    }

    #[test]
    fn names_match_width() {
        assert_eq!(feature_names().len(), FEATURE_DIM);
    }

    #[test]
    fn constant_lengths_do_not_divide_by_zero() {
        let segs = vec![SegmentFeatures::default(); 3];
        let s = NormStats::from_segments(&segs);
        assert_eq!(s.length_std, 1.0);
        assert!(encode_features(&segs, &s).is_finite());
    }
}
