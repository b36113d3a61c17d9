//! Bundled example data.

use crate::data::LoadShareData;
use crate::io::{read_raw_records, RawComponentRecord};

/// Failure times (days) of the two motors in each of 18 two-motor systems.
pub const TWO_MOTOR_CSV: &str = include_str!("../data/two_motor.csv");

pub fn two_motor_records() -> Vec<RawComponentRecord> {
    read_raw_records(TWO_MOTOR_CSV.as_bytes()).expect("bundled data is valid")
}

/// Stage gaps `(min(a, b), |a − b|)` of the two-motor systems.
pub fn two_motor() -> LoadShareData {
    crate::io::read_raw_components(TWO_MOTOR_CSV.as_bytes()).expect("bundled data is valid")
}
