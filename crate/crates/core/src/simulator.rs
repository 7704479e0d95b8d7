//! Cellular-automaton fire growth.
//!
//! Each burning cell pushes fire along eight axes toward the centers of its
//! neighbors. Progress along axis `k` accumulates at the elliptical spread
//! rate for that bearing; once it covers the center-to-center distance the
//! neighbor ignites at the end of the step. Residual progress is discarded,
//! and a newly ignited cell starts emitting on the following step. A burning
//! cell becomes burned once every axis has delivered or faces a cell that can
//! no longer ignite.
//!
//! Bearings are measured counterclockwise from East (E=0, N=90, W=180,
//! S=270); grid rows grow southward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ellipse::{apply_factors, derive_flank_ros, ellipse_rates, spread_rate, FactorTuple, RosTriple};
use crate::error::{Error, Result};
use crate::landscape::{FuelId, FuelParams, IgnitionSpec, Landscape, WeatherRecord, WeatherStream, NON_FUEL};
use crate::raster::{BurnGrid, ScarSeries};

/// (row offset, col offset) of the eight axes in bearing order E, NE, N, NW, W, SW, S, SE.
const AXES: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn axis_bearing(k: usize) -> f64 {
    45.0 * k as f64
}

/// Supplies head/flank/back rates for a fuel under given weather.
pub trait RosProvider {
    fn ros(&self, fuel: &FuelParams, weather: &WeatherRecord, reference_wind: f64) -> Result<RosTriple>;
}

/// Linear wind scaling of the reference rates:
/// `hros = hros_ref * w / w_ref`, `bros = bros_ref`,
/// `lb = max(1, lb_ref * w / w_ref)`, `fros = (hros + bros) / (2 lb)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindScaledRos;

impl RosProvider for WindScaledRos {
    fn ros(&self, fuel: &FuelParams, weather: &WeatherRecord, reference_wind: f64) -> Result<RosTriple> {
        let wind_ratio = weather.wind_speed / reference_wind;
        let hros = fuel.hros_ref * wind_ratio;
        let bros = fuel.bros_ref;
        let lb = (fuel.lb_ref * wind_ratio).max(1.0);
        Ok(RosTriple::new(hros, derive_flank_ros(hros, bros, lb)?, bros))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Available,
    Burning,
    Burned,
    NonFuel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Fms,
}

/// ROS adjustment factors: one tuple for the whole landscape, or one per fuel type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustmentSet {
    Global(FactorTuple),
    Fms(BTreeMap<FuelId, FactorTuple>),
}

impl AdjustmentSet {
    pub fn identity(mode: Mode, fuels: &[FuelId]) -> Self {
        Self::uniform(mode, fuels, FactorTuple::IDENTITY)
    }

    /// Same tuple everywhere, in the requested layout.
    pub fn uniform(mode: Mode, fuels: &[FuelId], x: FactorTuple) -> Self {
        match mode {
            Mode::Global => AdjustmentSet::Global(x),
            Mode::Fms => AdjustmentSet::Fms(fuels.iter().map(|&f| (f, x)).collect()),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            AdjustmentSet::Global(_) => Mode::Global,
            AdjustmentSet::Fms(_) => Mode::Fms,
        }
    }

    pub fn factors_for(&self, fuel: FuelId) -> Option<FactorTuple> {
        match self {
            AdjustmentSet::Global(x) => Some(*x),
            AdjustmentSet::Fms(map) => map.get(&fuel).copied(),
        }
    }

    /// Flat decision vector: tuples in ascending fuel order, each as x1..x4.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            AdjustmentSet::Global(x) => x.to_array().to_vec(),
            AdjustmentSet::Fms(map) => map.values().flat_map(|x| x.to_array()).collect(),
        }
    }

    pub fn decode(mode: Mode, fuels: &[FuelId], v: &[f64]) -> Result<Self> {
        let expected = dimension(mode, fuels.len());
        if v.len() != expected {
            return Err(Error::Arity {
                expected,
                got: v.len(),
            });
        }
        Ok(match mode {
            Mode::Global => AdjustmentSet::Global(FactorTuple::from_slice(v)),
            Mode::Fms => AdjustmentSet::Fms(
                fuels
                    .iter()
                    .zip(v.chunks(4))
                    .map(|(&f, c)| (f, FactorTuple::from_slice(c)))
                    .collect(),
            ),
        })
    }

    pub fn covers(&self, fuels: &[FuelId]) -> bool {
        match self {
            AdjustmentSet::Global(_) => true,
            AdjustmentSet::Fms(map) => fuels.iter().all(|f| map.contains_key(f)),
        }
    }
}

/// Number of decision variables for `mode` over `n_fuels` fuel types.
pub fn dimension(mode: Mode, n_fuels: usize) -> usize {
    match mode {
        Mode::Global => 4,
        Mode::Fms => 4 * n_fuels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Minutes.
    pub horizon: u32,
    /// Minutes between emitted burn grids.
    pub report_every: u32,
    /// Step length, minutes.
    pub dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 420,
            report_every: 60,
            dt: 1.0,
        }
    }
}

impl SimConfig {
    pub fn new(horizon: u32, report_every: u32) -> Self {
        SimConfig {
            horizon,
            report_every,
            ..Default::default()
        }
    }

    fn steps(&self, minutes: u32) -> Result<u64> {
        let n = f64::from(minutes) / self.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "{minutes} min is not a whole number of {}-min steps",
                self.dt
            )));
        }
        Ok(rounded as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.report_every == 0 || self.horizon == 0 {
            return Err(Error::invalid("horizon and report interval must be positive"));
        }
        if !self.horizon.is_multiple_of(self.report_every) {
            return Err(Error::invalid(format!(
                "horizon {} is not a multiple of the report interval {}",
                self.horizon, self.report_every
            )));
        }
        self.steps(self.report_every)?;
        Ok(())
    }

    pub fn report_times(&self) -> Vec<u32> {
        (1..=self.horizon / self.report_every)
            .map(|k| k * self.report_every)
            .collect()
    }
}

#[derive(Debug, Clone)]
struct BurningCell {
    idx: usize,
    progress: [f64; 8],
    resolved: [bool; 8],
}

/// Mutable state of one fire run, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct FireGrowth<'a> {
    land: &'a Landscape,
    weather: &'a WeatherStream,
    states: Vec<CellState>,
    burning: Vec<BurningCell>,
    /// Dense fuel index per cell (unused for non-fuel cells).
    fuel_index: Vec<usize>,
    /// Axis rates, m/min, indexed by `[record][fuel index]`.
    rates: Vec<Vec<[f64; 8]>>,
    distances: [f64; 8],
    dt: f64,
    steps: u64,
}

impl<'a> FireGrowth<'a> {
    /// Prepares a run. `x = None` uses the provider's rates without any
    /// adjustment step.
    pub fn new<P: RosProvider>(
        provider: &P,
        land: &'a Landscape,
        weather: &'a WeatherStream,
        x: Option<&AdjustmentSet>,
        dt: f64,
    ) -> Result<Self> {
        let fuels = land.fuel_types();
        if let Some(x) = x {
            if !x.covers(&fuels) {
                return Err(Error::invalid(
                    "fuel-specific adjustment set does not cover every fuel type in the landscape",
                ));
            }
        }
        let dense: BTreeMap<FuelId, usize> = fuels.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let grid = land.fuel_grid();
        let states = grid
            .as_slice()
            .iter()
            .map(|&c| if c == NON_FUEL { CellState::NonFuel } else { CellState::Available })
            .collect();
        let fuel_index = grid
            .as_slice()
            .iter()
            .map(|c| dense.get(c).copied().unwrap_or(usize::MAX))
            .collect();

        let mut rates = Vec::with_capacity(weather.records().len());
        for rec in weather.records() {
            let mut per_fuel = Vec::with_capacity(fuels.len());
            for &fuel in &fuels {
                let params = land.params(fuel).ok_or(Error::UnknownFuel(fuel))?;
                let ros = provider.ros(params, rec, weather.reference_wind())?;
                let er = match x {
                    Some(set) => apply_factors(ros, set.factors_for(fuel).expect("covered"))?,
                    None => ellipse_rates(ros)?,
                };
                let mut axis = [0.0; 8];
                for (k, r) in axis.iter_mut().enumerate() {
                    *r = spread_rate(&er, axis_bearing(k) - rec.wind_heading);
                }
                per_fuel.push(axis);
            }
            rates.push(per_fuel);
        }

        let s = land.cell_size();
        let d = s * std::f64::consts::SQRT_2;
        Ok(FireGrowth {
            land,
            weather,
            states,
            burning: Vec::new(),
            fuel_index,
            rates,
            distances: [s, d, s, d, s, d, s, d],
            dt,
            steps: 0,
        })
    }

    pub fn clock(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.states[row * self.land.cols() + col]
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    pub fn burning_count(&self) -> usize {
        self.burning.len()
    }

    pub fn ignite(&mut self, row: usize, col: usize) -> Result<()> {
        IgnitionSpec::new(row, col).validate(self.land)?;
        let idx = row * self.land.cols() + col;
        if self.states[idx] == CellState::Available {
            self.states[idx] = CellState::Burning;
            self.burning.push(BurningCell {
                idx,
                progress: [0.0; 8],
                resolved: [false; 8],
            });
        }
        Ok(())
    }

    fn neighbor(&self, idx: usize, k: usize) -> Option<usize> {
        let cols = self.land.cols() as isize;
        let rows = self.land.rows() as isize;
        let (dr, dc) = AXES[k];
        let r = (idx as isize) / cols + dr;
        let c = (idx as isize) % cols + dc;
        (r >= 0 && r < rows && c >= 0 && c < cols).then(|| (r * cols + c) as usize)
    }

    /// Advances the fire by one step.
    pub fn step(&mut self) {
        let record = self.weather.record_index_at(self.clock());
        let mut ignitions = Vec::new();
        let mut burning = std::mem::take(&mut self.burning);
        for cell in &mut burning {
            let rates = &self.rates[record][self.fuel_index[cell.idx]];
            for k in 0..8 {
                if cell.resolved[k] {
                    continue;
                }
                match self.neighbor(cell.idx, k) {
                    Some(nb) if self.states[nb] == CellState::Available => {
                        cell.progress[k] += rates[k] * self.dt;
                        if cell.progress[k] >= self.distances[k] {
                            cell.progress[k] = self.distances[k];
                            cell.resolved[k] = true;
                            ignitions.push(nb);
                        }
                    }
                    _ => cell.resolved[k] = true,
                }
            }
        }
        for nb in ignitions {
            if self.states[nb] == CellState::Available {
                self.states[nb] = CellState::Burning;
                burning.push(BurningCell {
                    idx: nb,
                    progress: [0.0; 8],
                    resolved: [false; 8],
                });
            }
        }
        self.steps += 1;

        burning.retain_mut(|cell| {
            for k in 0..8 {
                if !cell.resolved[k] {
                    let open = matches!(self.neighbor(cell.idx, k), Some(nb) if self.states[nb] == CellState::Available);
                    if !open {
                        cell.resolved[k] = true;
                    }
                }
            }
            if cell.resolved.iter().all(|&r| r) {
                self.states[cell.idx] = CellState::Burned;
                false
            } else {
                true
            }
        });
        self.burning = burning;
    }

    /// Cells that are burning or burned.
    pub fn burn_grid(&self) -> BurnGrid {
        let data = self
            .states
            .iter()
            .map(|s| matches!(s, CellState::Burning | CellState::Burned))
            .collect();
        BurnGrid::from_vec(self.land.rows(), self.land.cols(), data).expect("landscape shape")
    }
}

/// Runs a fire and returns the cumulative burn grid at every report time.
pub fn simulate_with<P: RosProvider>(
    provider: &P,
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    x: Option<&AdjustmentSet>,
    cfg: &SimConfig,
) -> Result<ScarSeries> {
    cfg.validate()?;
    ign.validate(land)?;
    if u64::from(cfg.horizon) > weather.total_duration() {
        return Err(Error::invalid(format!(
            "horizon {} min exceeds weather coverage of {} min",
            cfg.horizon,
            weather.total_duration()
        )));
    }
    let per_report = cfg.steps(cfg.report_every)?;
    let total = cfg.steps(cfg.horizon)?;
    let ignite_at = (f64::from(ign.start_time) / cfg.dt).ceil() as u64;

    let mut fire = FireGrowth::new(provider, land, weather, x, cfg.dt)?;
    let mut grids = Vec::with_capacity((total / per_report) as usize);
    for s in 0..=total {
        if s == ignite_at {
            fire.ignite(ign.row, ign.col)?;
        }
        if s > 0 && s % per_report == 0 {
            grids.push(fire.burn_grid());
        }
        if s == total {
            break;
        }
        fire.step();
    }
    ScarSeries::new(grids, cfg.report_times())
}

/// Runs a fire with adjustment factors applied to the default wind-scaled rates.
pub fn simulate(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    x: &AdjustmentSet,
    cfg: &SimConfig,
) -> Result<ScarSeries> {
    simulate_with(&WindScaledRos, land, weather, ign, Some(x), cfg)
}

/// Runs a fire straight from the default rates, without any adjustment step.
pub fn simulate_unadjusted(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    cfg: &SimConfig,
) -> Result<ScarSeries> {
    simulate_with(&WindScaledRos, land, weather, ign, None, cfg)
}
