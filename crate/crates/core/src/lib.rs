//! Simulation, preprocessing and hazard-state classification for
//! magnetic-adhesion tracked climbing robots.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod dynamics;
pub mod experiment;
pub mod models;
pub mod neural;
pub mod quality;
