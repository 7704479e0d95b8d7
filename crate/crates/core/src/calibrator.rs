//! Fitting adjustment factors to observed scars.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dfo::{Algorithm, OptOptions, OptResult};
use crate::error::{Error, Result};
use crate::landscape::{IgnitionSpec, Landscape, WeatherStream};
use crate::metrics::{Norm, WeightVector};
use crate::objective::{FireCase, RafObjective, DEFAULT_LOWER, DEFAULT_UPPER};
use crate::raster::ScarSeries;
use crate::simulator::{AdjustmentSet, Mode};

/// Initial step used for calibration when the options leave it unset.
/// The objective is piecewise constant in the factors, so the first
/// probes must be large enough to move at least one cell ignition.
pub const CALIBRATION_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub mode: Mode,
    pub mu: WeightVector,
    pub algorithm: Algorithm,
    pub opts: OptOptions,
    /// Start point; all ones when unset.
    pub x0: Option<AdjustmentSet>,
    /// Common `(lo, hi)` for every factor.
    pub bounds: (f64, f64),
    pub norm: Norm,
}

impl CalibrationSpec {
    pub fn new(mode: Mode, mu: WeightVector) -> Self {
        CalibrationSpec {
            mode,
            mu,
            algorithm: Algorithm::Bobyqa,
            opts: OptOptions::default().with_max_evals(200),
            x0: None,
            bounds: (DEFAULT_LOWER, DEFAULT_UPPER),
            norm: Norm::default(),
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_opts(mut self, opts: OptOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn with_start(mut self, x0: AdjustmentSet) -> Self {
        self.x0 = Some(x0);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub x_star: AdjustmentSet,
    pub initial_error: f64,
    pub final_error: f64,
    pub opt: OptResult,
    /// Evaluations rejected as out of the box or failing in the simulator.
    pub infeasible: usize,
}

/// Minimizes `objective` from the spec's start point. `spec.mu` and
/// `spec.mode` are ignored here; the objective already carries them.
pub fn calibrate_objective(objective: &RafObjective, spec: &CalibrationSpec) -> Result<CalibrationResult> {
    let x0 = match &spec.x0 {
        Some(set) => {
            if set.mode() != objective.mode() || !set.covers(objective.fuels()) {
                return Err(Error::invalid("start point does not match the calibration mode and fuels"));
            }
            // re-encode so FMS start points listing extra fuels still line up
            let v: Vec<f64> = objective
                .fuels()
                .iter()
                .flat_map(|&f| set.factors_for(f).expect("covered").to_array())
                .take(objective.dimension())
                .collect();
            v
        }
        None => vec![1.0; objective.dimension()],
    };
    if !objective.is_feasible(&x0) {
        return Err(Error::invalid(format!(
            "start point lies outside the factor bounds {:?}",
            objective.bounds()
        )));
    }

    let mut opts = spec.opts.clone();
    opts.bounds = Some(objective.box_bounds());
    opts.initial_step.get_or_insert(CALIBRATION_STEP);

    let infeasible_before = objective.infeasible_evaluations();
    let opt = spec.algorithm.minimize(|x: &[f64]| objective.value(x), &x0, &opts)?;
    let initial_error = opt.trace.first().map(|&(_, f)| f).unwrap_or(f64::INFINITY);
    Ok(CalibrationResult {
        x_star: objective.decode(&opt.x_best)?,
        initial_error,
        final_error: opt.f_best,
        infeasible: objective.infeasible_evaluations() - infeasible_before,
        opt,
    })
}

fn build_objective(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    observed: &ScarSeries,
    mu: WeightVector,
    spec: &CalibrationSpec,
) -> Result<RafObjective> {
    let case = FireCase::new(weather.clone(), *ign, observed.clone(), mu);
    Ok(RafObjective::new(land.clone(), vec![case], spec.mode)?
        .with_bounds(spec.bounds.0, spec.bounds.1)?
        .with_norm(spec.norm))
}

pub fn calibrate(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    observed: &ScarSeries,
    spec: &CalibrationSpec,
) -> Result<CalibrationResult> {
    let objective = build_objective(land, weather, ign, observed, spec.mu.clone(), spec)?;
    calibrate_objective(&objective, spec)
}

/// One hour (report period) of the real-time protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealtimeStep {
    /// Number of scars seen, 1-based.
    pub t: usize,
    pub timestamp: u32,
    /// Warm start, the previous step's optimum.
    pub start: AdjustmentSet,
    /// Error of `start` on the newly arrived scar alone.
    pub one_step_ahead_error: f64,
    pub result: CalibrationResult,
}

/// Re-fits after every new scar: step `t` uses scars `1..=t` with equal
/// weights `1/t`, starting from the optimum of step `t - 1` (all ones at
/// `t = 1`). `spec.mu` and `spec.x0` are ignored.
pub fn realtime_calibrate(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    stream: &ScarSeries,
    spec: &CalibrationSpec,
) -> Result<Vec<RealtimeStep>> {
    if stream.is_empty() {
        return Err(Error::invalid("empty scar stream"));
    }
    let fuels = land.fuel_types();
    let mut start = AdjustmentSet::identity(spec.mode, &fuels);
    let mut steps = Vec::with_capacity(stream.len());
    for t in 1..=stream.len() {
        let observed = stream.prefix(t);
        let mu = WeightVector::new(vec![1.0 / t as f64; t])?;
        let objective = build_objective(land, weather, ign, &observed, mu, spec)?;

        let sims = objective.simulate(&start)?;
        let latest = stream.grids()[t - 1].clone();
        let one_step_ahead_error = objective.norm().eval(&sims[0].grids()[t - 1], &latest)?;

        let step_spec = CalibrationSpec {
            x0: Some(start.clone()),
            ..spec.clone()
        };
        let result = calibrate_objective(&objective, &step_spec)?;
        steps.push(RealtimeStep {
            t,
            timestamp: stream.timestamps()[t - 1],
            start: std::mem::replace(&mut start, result.x_star.clone()),
            one_step_ahead_error,
            result,
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub neval: usize,
    /// Wall clock, minutes.
    pub runtime: f64,
    pub min_value: f64,
    pub initial_value: f64,
    pub termination: crate::dfo::Termination,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,NEVAL,RUNTIME,MinValue\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.6},{}\n", r.algorithm.name(), r.neval, r.runtime, r.min_value));
        }
        out
    }
}

fn bench_one(objective: &RafObjective, algorithm: Algorithm, spec: &CalibrationSpec) -> Result<BenchRow> {
    let spec = CalibrationSpec {
        algorithm,
        ..spec.clone()
    };
    let started = Instant::now();
    let res = calibrate_objective(objective, &spec)?;
    Ok(BenchRow {
        algorithm,
        neval: res.opt.neval,
        runtime: started.elapsed().as_secs_f64() / 60.0,
        min_value: res.final_error,
        initial_value: res.initial_error,
        termination: res.opt.termination,
    })
}

/// Runs each algorithm on the same objective with one shared budget.
pub fn run_benchmark(objective: &RafObjective, algorithms: &[Algorithm], spec: &CalibrationSpec) -> Result<BenchTable> {
    if algorithms.is_empty() {
        return Err(Error::invalid("benchmark needs at least one algorithm"));
    }
    let rows = algorithms
        .iter()
        .map(|&a| bench_one(objective, a, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchTable { rows })
}

/// As [`run_benchmark`], one thread per algorithm, each with its own copy
/// of the objective. Runtimes then include contention between threads.
pub fn run_benchmark_parallel(
    objective: &RafObjective,
    algorithms: &[Algorithm],
    spec: &CalibrationSpec,
) -> Result<BenchTable> {
    if algorithms.is_empty() {
        return Err(Error::invalid("benchmark needs at least one algorithm"));
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = algorithms
            .iter()
            .map(|&a| {
                let own = objective.clone();
                s.spawn(move || bench_one(&own, a, spec))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("benchmark thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BenchTable { rows })
}
