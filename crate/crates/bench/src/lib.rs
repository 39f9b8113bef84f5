//! Shared fixtures for the benchmarks.

use quadcav::{Grid, ModelParams};
use std::f64::consts::FRAC_PI_2;

pub fn desk_grid() -> Grid {
    Grid::new(128).expect("valid grid")
}

/// Closed system deep in the DW I region.
pub fn dw1_closed() -> ModelParams {
    ModelParams::new(20.0, 5.0, FRAC_PI_2, -300.0, 0.0).expect("valid params")
}

/// Dissipative system inside the unstable wedge.
pub fn unstable_open() -> ModelParams {
    ModelParams::new(15.0, 15.0, FRAC_PI_2, -300.0, 200.0).expect("valid params")
}
