//! The calibration black box: decision vector in, weighted scar error out.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::landscape::{FuelId, IgnitionSpec, Landscape, WeatherStream};
use crate::metrics::{weighted_error, Norm, WeightVector};
use crate::raster::ScarSeries;
use crate::simulator::{dimension, simulate, AdjustmentSet, Mode, SimConfig};

pub const DEFAULT_LOWER: f64 = 0.01;
pub const DEFAULT_UPPER: f64 = 10.0;

/// One observed fire used for training.
#[derive(Debug, Clone)]
pub struct FireCase {
    pub weather: WeatherStream,
    pub ignition: IgnitionSpec,
    pub observed: ScarSeries,
    pub mu: WeightVector,
    /// Multiplier on this fire's error in the training sum.
    pub weight: f64,
}

impl FireCase {
    pub fn new(weather: WeatherStream, ignition: IgnitionSpec, observed: ScarSeries, mu: WeightVector) -> Self {
        FireCase {
            weather,
            ignition,
            observed,
            mu,
            weight: 1.0,
        }
    }
}

/// Simulation settings that reproduce the report times of `observed`.
///
/// Timestamps must be `r, 2r, ..., Tr` minutes for some interval `r`.
pub fn aligned_config(observed: &ScarSeries, dt: f64) -> Result<SimConfig> {
    let ts = observed.timestamps();
    let Some(&first) = ts.first() else {
        return Err(Error::invalid("observed scar series is empty"));
    };
    for (k, &t) in ts.iter().enumerate() {
        if u64::from(t) != (k as u64 + 1) * u64::from(first) {
            return Err(Error::invalid(format!(
                "observed timestamps {ts:?} are not evenly spaced report times"
            )));
        }
    }
    let cfg = SimConfig {
        horizon: *ts.last().expect("non-empty"),
        report_every: first,
        dt,
    };
    cfg.validate()?;
    Ok(cfg)
}

struct PreparedFire {
    case: FireCase,
    cfg: SimConfig,
}

/// Weighted scar-evolution error as a function of the flat factor vector.
///
/// Vectors with a negative, non-finite or out-of-box entry, and vectors that
/// make the simulator fail, score `+inf` and are counted as infeasible.
/// Counters are atomic, so a shared reference may be evaluated from several
/// threads.
pub struct RafObjective {
    land: Landscape,
    fires: Vec<PreparedFire>,
    mode: Mode,
    fuels: Vec<FuelId>,
    lower: f64,
    upper: f64,
    norm: Norm,
    evals: AtomicUsize,
    infeasible: AtomicUsize,
}

impl std::fmt::Debug for RafObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RafObjective")
            .field("mode", &self.mode)
            .field("fuels", &self.fuels)
            .field("fires", &self.fires.len())
            .field("bounds", &(self.lower, self.upper))
            .field("evals", &self.evaluations())
            .finish()
    }
}

impl Clone for RafObjective {
    /// Copies the problem with fresh counters.
    fn clone(&self) -> Self {
        RafObjective {
            land: self.land.clone(),
            fires: self
                .fires
                .iter()
                .map(|p| PreparedFire {
                    case: p.case.clone(),
                    cfg: p.cfg,
                })
                .collect(),
            mode: self.mode,
            fuels: self.fuels.clone(),
            lower: self.lower,
            upper: self.upper,
            norm: self.norm,
            evals: AtomicUsize::new(0),
            infeasible: AtomicUsize::new(0),
        }
    }
}

pub fn make_objective(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    observed: &ScarSeries,
    mu: &WeightVector,
    mode: Mode,
) -> Result<RafObjective> {
    let case = FireCase::new(weather.clone(), *ign, observed.clone(), mu.clone());
    RafObjective::new(land.clone(), vec![case], mode)
}

impl RafObjective {
    pub fn new(land: Landscape, fires: Vec<FireCase>, mode: Mode) -> Result<Self> {
        Self::with_step(land, fires, mode, 1.0)
    }

    /// As [`RafObjective::new`] with a simulation step of `dt` minutes.
    pub fn with_step(land: Landscape, fires: Vec<FireCase>, mode: Mode, dt: f64) -> Result<Self> {
        if fires.is_empty() {
            return Err(Error::invalid("at least one fire is needed"));
        }
        let fuels = land.fuel_types();
        if fuels.is_empty() {
            return Err(Error::invalid("landscape has no burnable fuel"));
        }
        let mut prepared = Vec::with_capacity(fires.len());
        for case in fires {
            if !(case.weight >= 0.0) || !case.weight.is_finite() {
                return Err(Error::invalid(format!("fire weight must be non-negative, got {}", case.weight)));
            }
            if case.mu.len() != case.observed.len() {
                return Err(Error::invalid(format!(
                    "{} weights for {} observed scars",
                    case.mu.len(),
                    case.observed.len()
                )));
            }
            if case.observed.grids()[0].rows() != land.rows() || case.observed.grids()[0].cols() != land.cols() {
                return Err(Error::DimensionMismatch {
                    expected_rows: land.rows(),
                    expected_cols: land.cols(),
                    rows: case.observed.grids()[0].rows(),
                    cols: case.observed.grids()[0].cols(),
                });
            }
            case.ignition.validate(&land)?;
            let cfg = aligned_config(&case.observed, dt)?;
            if u64::from(cfg.horizon) > case.weather.total_duration() {
                return Err(Error::invalid(format!(
                    "observations run to minute {} but the weather covers {} min",
                    cfg.horizon,
                    case.weather.total_duration()
                )));
            }
            prepared.push(PreparedFire { case, cfg });
        }
        Ok(RafObjective {
            land,
            fires: prepared,
            mode,
            fuels,
            lower: DEFAULT_LOWER,
            upper: DEFAULT_UPPER,
            norm: Norm::default(),
            evals: AtomicUsize::new(0),
            infeasible: AtomicUsize::new(0),
        })
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0 && lower < upper && upper.is_finite()) {
            return Err(Error::invalid(format!("bad factor bounds [{lower}, {upper}]")));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Fuel types in decision-vector order.
    pub fn fuels(&self) -> &[FuelId] {
        &self.fuels
    }

    pub fn dimension(&self) -> usize {
        dimension(self.mode, self.fuels.len())
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn box_bounds(&self) -> Vec<(f64, f64)> {
        vec![(self.lower, self.upper); self.dimension()]
    }

    pub fn landscape(&self) -> &Landscape {
        &self.land
    }

    pub fn fires(&self) -> impl Iterator<Item = &FireCase> {
        self.fires.iter().map(|p| &p.case)
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn evaluations(&self) -> usize {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn infeasible_evaluations(&self) -> usize {
        self.infeasible.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.evals.store(0, Ordering::Relaxed);
        self.infeasible.store(0, Ordering::Relaxed);
    }

    pub fn decode(&self, x: &[f64]) -> Result<AdjustmentSet> {
        AdjustmentSet::decode(self.mode, &self.fuels, x)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite() && *v >= self.lower && *v <= self.upper)
    }

    /// Counted evaluation. Only a wrong vector length is an error.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let set = self.decode(x)?;
        self.evals.fetch_add(1, Ordering::Relaxed);
        if !self.is_feasible(x) {
            self.infeasible.fetch_add(1, Ordering::Relaxed);
            return Ok(f64::INFINITY);
        }
        match self.error_of(&set) {
            Ok(v) => Ok(v),
            Err(_) => {
                self.infeasible.fetch_add(1, Ordering::Relaxed);
                Ok(f64::INFINITY)
            }
        }
    }

    /// Counted evaluation for optimizers; arity errors also give `+inf`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).unwrap_or(f64::INFINITY)
    }

    /// Uncounted error of an adjustment set, ignoring the box.
    pub fn error_of(&self, set: &AdjustmentSet) -> Result<f64> {
        if set.mode() != self.mode {
            return Err(Error::invalid("adjustment set layout does not match the objective mode"));
        }
        let mut total = 0.0;
        for (fire, sim) in self.fires.iter().zip(self.simulate(set)?) {
            total += fire.case.weight * weighted_error(&sim, &fire.case.observed, &fire.case.mu, self.norm)?;
        }
        Ok(total)
    }

    /// Simulated scar series of every fire under `set`.
    pub fn simulate(&self, set: &AdjustmentSet) -> Result<Vec<ScarSeries>> {
        if !set.covers(&self.fuels) {
            return Err(Error::invalid("adjustment set does not cover every fuel type"));
        }
        self.fires
            .iter()
            .map(|p| simulate(&self.land, &p.case.weather, &p.case.ignition, set, &p.cfg))
            .collect()
    }
}
