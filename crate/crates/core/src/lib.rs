//! Raster fire-growth simulation with an elliptical spread kernel, and
//! derivative-free calibration of rate-of-spread adjustment factors against
//! observed fire scars.

pub mod calibrator;
pub mod dfo;
pub mod ellipse;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod landscape;
pub mod metrics;
pub mod objective;
pub mod raster;
pub mod simulator;

pub use calibrator::{
    calibrate, calibrate_objective, realtime_calibrate, run_benchmark, run_benchmark_parallel, BenchRow, BenchTable,
    CalibrationResult, CalibrationSpec, RealtimeStep,
};
pub use dfo::{Algorithm, OptOptions, OptResult, Termination};
pub use ellipse::{apply_factors, ellipse_rates, spread_rate, EllipseRates, FactorTuple, RosTriple};
pub use error::{Error, Result};
pub use landscape::{FuelId, FuelParams, IgnitionSpec, Landscape, WeatherRecord, WeatherStream};
pub use metrics::{Norm, WeightVector};
pub use objective::{make_objective, FireCase, RafObjective};
pub use raster::{BurnGrid, Raster, ScarSeries};
pub use simulator::{simulate, simulate_unadjusted, AdjustmentSet, Mode, SimConfig};
