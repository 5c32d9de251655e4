//! Nelson-Siegel and Nelson-Siegel-Svensson yield-curve calibration with a
//! bound-constrained genetic algorithm.

pub mod calibration;
pub mod cli;
pub mod curve;
pub mod ga;
pub mod ingest;
pub mod objective;
