//! Example instances shipped with the crate.

use crate::model::{parse_spec, ProblemSpec};

pub const EXAMPLE1: &str = include_str!("../specs/example1.json");
pub const EXAMPLE2: &str = include_str!("../specs/example2.json");
pub const FIG6: &str = include_str!("../specs/fig6.json");
pub const FIG6_1: &str = include_str!("../specs/fig6_1.json");

/// Looks up a bundled spec by file name (`example1.json`) or stem.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".json") {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        "fig6" => Some(FIG6),
        "fig6_1" => Some(FIG6_1),
        _ => None,
    }
}

pub fn example1() -> ProblemSpec {
    parse_spec(EXAMPLE1).expect("bundled example1 is valid")
}

pub fn example2() -> ProblemSpec {
    parse_spec(EXAMPLE2).expect("bundled example2 is valid")
}

pub fn fig6() -> ProblemSpec {
    parse_spec(FIG6).expect("bundled fig6 is valid")
}

pub fn fig6_1() -> ProblemSpec {
    parse_spec(FIG6_1).expect("bundled fig6_1 is valid")
}
