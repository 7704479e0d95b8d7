//! Small deterministic fire instances with known answers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ellipse::FactorTuple;
use crate::error::{Error, Result};
use crate::io;
use crate::landscape::{FuelId, FuelParams, IgnitionSpec, Landscape, WeatherStream, DEFAULT_REFERENCE_WIND};
use crate::raster::{Raster, ScarSeries};
use crate::simulator::{simulate, AdjustmentSet, SimConfig};

/// Hidden global factors used by the recovery fixtures.
pub const HIDDEN_GLOBAL: FactorTuple = FactorTuple {
    hros: 1.4,
    fros: 1.1,
    bros: 1.8,
    ecc: 1.15,
};

/// Seven hourly reports.
pub const HORIZON: u32 = 420;
pub const REPORT_EVERY: u32 = 60;

#[derive(Debug, Clone)]
pub struct FixtureCase {
    pub name: String,
    pub landscape: Landscape,
    pub weather: WeatherStream,
    pub ignition: IgnitionSpec,
    pub hidden_x: AdjustmentSet,
    pub config: SimConfig,
}

impl FixtureCase {
    /// Scars produced by the hidden factors.
    pub fn target(&self) -> Result<ScarSeries> {
        generate_target(&self.landscape, &self.weather, &self.ignition, &self.hidden_x, &self.config)
    }

    pub fn fuels(&self) -> Vec<FuelId> {
        self.landscape.fuel_types()
    }
}

pub fn generate_target(
    land: &Landscape,
    weather: &WeatherStream,
    ign: &IgnitionSpec,
    hidden_x: &AdjustmentSet,
    cfg: &SimConfig,
) -> Result<ScarSeries> {
    simulate(land, weather, ign, hidden_x, cfg)
}

fn seven_hours(wind_speed: f64, wind_heading: f64) -> WeatherStream {
    WeatherStream::constant(wind_speed, wind_heading, HORIZON, DEFAULT_REFERENCE_WIND).expect("valid constant weather")
}

/// 5x5 single-fuel grid, no wind elongation: every axis spreads at
/// 100 m/min over 100 m cells, so orthogonal neighbours ignite after one
/// minute and diagonal ones after two.
pub fn circle_5x5() -> FixtureCase {
    let grid = Raster::filled(5, 5, 1);
    let table = BTreeMap::from([(1, FuelParams::new("circle", 100.0, 100.0, 1.0))]);
    FixtureCase {
        name: "circle-5x5".into(),
        landscape: Landscape::new(grid, 100.0, table).expect("valid landscape"),
        weather: seven_hours(DEFAULT_REFERENCE_WIND, 0.0),
        ignition: IgnitionSpec::new(2, 2),
        hidden_x: AdjustmentSet::Global(FactorTuple::IDENTITY),
        config: SimConfig::new(HORIZON, REPORT_EVERY),
    }
}

/// 20x20 single-fuel grid with a steady east wind and a nearly circular
/// baseline ellipse. The fire starts west of centre; under the hidden
/// factors it burns more cells than the baseline in every period.
pub fn homogeneous_20x20() -> FixtureCase {
    let grid = Raster::filled(20, 20, 1);
    let table = BTreeMap::from([(1, FuelParams::new("grass", 0.6, 0.18, 1.02))]);
    FixtureCase {
        name: "homogeneous-20x20".into(),
        landscape: Landscape::new(grid, 30.0, table).expect("valid landscape"),
        weather: seven_hours(DEFAULT_REFERENCE_WIND, 0.0),
        ignition: IgnitionSpec::new(10, 5),
        hidden_x: AdjustmentSet::Global(HIDDEN_GLOBAL),
        config: SimConfig::new(HORIZON, REPORT_EVERY),
    }
}

/// Per-fuel hidden tuples of the striped fixture, in fuel order 1..=8.
pub const STRIPE_HIDDEN: [[f64; 4]; 8] = [
    [1.4, 1.1, 1.8, 1.15],
    [0.8, 1.0, 1.2, 0.9],
    [1.2, 0.7, 1.0, 1.05],
    [2.1, 1.3, 0.6, 1.1],
    [0.6, 0.9, 1.5, 0.95],
    [1.0, 1.3, 0.8, 1.2],
    [1.7, 0.5, 1.1, 0.85],
    [0.9, 1.2, 2.4, 1.0],
];

/// 24x24 grid of eight vertical fuel stripes, three columns each, with the
/// wind blowing across the stripes from a western ignition.
pub fn striped_8_fuels() -> FixtureCase {
    let (rows, cols) = (24, 24);
    let data = (0..rows * cols).map(|i| (i % cols / 3) as FuelId + 1).collect();
    let grid = Raster::from_vec(rows, cols, data).expect("shape");
    let mut table = BTreeMap::new();
    for id in 1..=8u32 {
        let k = f64::from(id);
        table.insert(
            id,
            FuelParams::new(format!("stripe-{id}"), 1.3 + 0.05 * k, 0.15 + 0.01 * k, 1.3 + 0.05 * k),
        );
    }
    let hidden = STRIPE_HIDDEN
        .iter()
        .enumerate()
        .map(|(i, v)| (i as FuelId + 1, FactorTuple::from_slice(v)))
        .collect();
    FixtureCase {
        name: "striped-8".into(),
        landscape: Landscape::new(grid, 30.0, table).expect("valid landscape"),
        weather: seven_hours(DEFAULT_REFERENCE_WIND, 0.0),
        ignition: IgnitionSpec::new(12, 3),
        hidden_x: AdjustmentSet::Fms(hidden),
        config: SimConfig::new(HORIZON, REPORT_EVERY),
    }
}

pub fn all() -> Vec<FixtureCase> {
    vec![circle_5x5(), homogeneous_20x20(), striped_8_fuels()]
}

pub fn by_name(name: &str) -> Result<FixtureCase> {
    all()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Invalid(format!("unknown fixture '{name}'")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub name: String,
    pub fuel_grid: String,
    pub fuel_table: String,
    pub weather: String,
    pub ignition: String,
    pub reference_wind: f64,
    pub hidden_x: AdjustmentSet,
    pub horizon: u32,
    pub report_every: u32,
    pub scars: Vec<String>,
    pub timestamps: Vec<u32>,
}

/// File name of the scar reported at `minute`.
pub fn scar_file_name(minute: u32) -> String {
    format!("scar_{minute:04}.asc")
}

/// Writes inputs, target scars and `fixture.json` into `dir`.
pub fn write_fixture(case: &FixtureCase, dir: &Path) -> Result<FixtureManifest> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    io::write_fuel_grid(&case.landscape, &dir.join("fuels.asc"))?;
    io::write_fuel_table(case.landscape.fuel_table(), &dir.join("fuels.csv"))?;
    io::write_weather(&case.weather, &dir.join("weather.csv"))?;
    io::write_ignition(&case.ignition, &dir.join("ignition.csv"))?;
    let target = case.target()?;
    let mut scars = Vec::with_capacity(target.len());
    for (minute, grid) in target.iter() {
        let name = scar_file_name(minute);
        io::write_burn_grid(grid, case.landscape.cell_size(), &dir.join(&name))?;
        scars.push(name);
    }
    let manifest = FixtureManifest {
        name: case.name.clone(),
        fuel_grid: "fuels.asc".into(),
        fuel_table: "fuels.csv".into(),
        weather: "weather.csv".into(),
        ignition: "ignition.csv".into(),
        reference_wind: case.weather.reference_wind(),
        hidden_x: case.hidden_x.clone(),
        horizon: case.config.horizon,
        report_every: case.config.report_every,
        scars,
        timestamps: target.timestamps().to_vec(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    io::write_atomic(&dir.join("fixture.json"), json.as_bytes())?;
    Ok(manifest)
}

/// A fixture read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedFixture {
    pub manifest: FixtureManifest,
    pub landscape: Landscape,
    pub weather: WeatherStream,
    pub ignition: IgnitionSpec,
    pub scars: ScarSeries,
}

pub fn load_fixture(dir: &Path) -> Result<LoadedFixture> {
    let path = dir.join("fixture.json");
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let manifest: FixtureManifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    let landscape = io::load_landscape(&dir.join(&manifest.fuel_grid), &dir.join(&manifest.fuel_table))?;
    let weather = io::load_weather(&dir.join(&manifest.weather), manifest.reference_wind)?;
    let ignition = io::load_ignition(&dir.join(&manifest.ignition))?;
    let paths: Vec<_> = manifest.scars.iter().map(|s| dir.join(s)).collect();
    let scars = io::load_scars(&paths, &manifest.timestamps)?;
    Ok(LoadedFixture {
        manifest,
        landscape,
        weather,
        ignition,
        scars,
    })
}
