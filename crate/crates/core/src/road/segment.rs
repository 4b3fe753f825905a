//! Per-segment attributes and their fixed categorical vocabularies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in [`Self::ALL`]; also the one-hot column offset.
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(other.to_string()),
                }
            }
        }
    };
}

vocabulary! {
    /// General road segment category.
    RoadClass {
        FakeRoad => "fake road",
        IntraQuarterDriveway => "intra-quarter driveway",
        DirtRoad => "dirt road",
        OtherCityStreet => "other city street",
        MainCityStreet => "main city street",
        Highway => "highway",
        IntercityRoad => "intercity road",
        FederalHighway => "federal highway",
        CyclePath => "cycle path",
        Walkway => "walkway",
    }
}

vocabulary! {
    /// Additional segment category.
    Style {
        Undefined => "undefined",
        Archway => "archway",
        Crosswalk => "crosswalk",
        Stairway => "stairway",
        Bridge => "bridge",
        OvergroundWay => "overground way",
        Invisible => "invisible",
        Normal => "normal",
        ParkPath => "park path",
        ParkFootpath => "park footpath",
        Subway => "subway",
        PedestrianBridge => "pedestrian bridge",
        UndergroundWay => "underground way",
        Tunnel => "tunnel",
        LivingZone => "living zone",
        Ford => "ford",
    }
}

/// Allowed speed limits in km/h.
pub const SPEED_LIMITS_KMH: [u32; 5] = [3, 15, 20, 60, 90];
/// Allowed lane counts are `0..=MAX_LANES`.
pub const MAX_LANES: u8 = 5;

/// Speed limit restricted to [`SPEED_LIMITS_KMH`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SpeedLimit(u32);

impl SpeedLimit {
    pub fn new(kmh: u32) -> Option<Self> {
        SPEED_LIMITS_KMH.contains(&kmh).then_some(Self(kmh))
    }

    pub fn kmh(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        SPEED_LIMITS_KMH.iter().position(|&s| s == self.0).expect("validated on construction")
    }
}

impl TryFrom<u32> for SpeedLimit {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| v.to_string())
    }
}

impl From<SpeedLimit> for u32 {
    fn from(s: SpeedLimit) -> u32 {
        s.0
    }
}

/// Raw attributes of one road segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub road_class: RoadClass,
    pub length_m: f64,
    pub width_m: f64,
    pub def_speed: SpeedLimit,
    pub lanes: u8,
    pub barrier: bool,
    pub payment_flag: bool,
    pub turn_restrictions: bool,
    pub pedo_offset: bool,
    pub bad_road: bool,
    pub style: Style,
}

impl SegmentFeatures {
    /// Binary flags in column order.
    pub fn flags(&self) -> [bool; 5] {
        [self.barrier, self.payment_flag, self.turn_restrictions, self.pedo_offset, self.bad_road]
    }
}

impl Default for SegmentFeatures {
    fn default() -> Self {
        Self {
            road_class: RoadClass::OtherCityStreet,
            length_m: 100.0,
            width_m: 7.0,
            def_speed: SpeedLimit(60),
            lanes: 2,
            barrier: false,
            payment_flag: false,
            turn_restrictions: false,
            pedo_offset: false,
            bad_road: false,
            style: Style::Normal,
        }
    }
}
