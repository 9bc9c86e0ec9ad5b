//! Maps shipped with the crate.
//!
//! `map1` is an open field with a few bars, `map2` three bands of rooms
//! joined by narrow doors. Both carry 30 robot-sized movers. The `_partial`
//! variants have the same walls, no movers, and hidden blocks that show up
//! only when the robot gets close.

use crate::world::{MapDocument, MapError};

pub const NAMES: [&str; 4] = ["map1", "map2", "map1_partial", "map2_partial"];

const MAP1: &str = include_str!("../maps/map1.json");
const MAP2: &str = include_str!("../maps/map2.json");
const MAP1_PARTIAL: &str = include_str!("../maps/map1_partial.json");
const MAP2_PARTIAL: &str = include_str!("../maps/map2_partial.json");

/// JSON text of a bundled map.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "map1" => Some(MAP1),
        "map2" => Some(MAP2),
        "map1_partial" => Some(MAP1_PARTIAL),
        "map2_partial" => Some(MAP2_PARTIAL),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<Result<MapDocument, MapError>> {
    source(name).map(MapDocument::parse)
}
