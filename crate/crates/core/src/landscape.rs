//! Landscape, fuel, weather and ignition inputs of a fire run.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Integer fuel code. Code 0 is non-fuel.
pub type FuelId = u32;

pub const NON_FUEL: FuelId = 0;

/// Default raster cell edge, meters (one hectare cells).
pub const DEFAULT_CELL_SIZE: f64 = 100.0;

/// Reference rates of spread for one fuel type, at the stream's reference wind speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelParams {
    pub name: String,
    /// Head rate of spread, m/min.
    pub hros_ref: f64,
    /// Back rate of spread, m/min.
    pub bros_ref: f64,
    /// Length-to-breadth ratio, >= 1.
    pub lb_ref: f64,
}

impl FuelParams {
    pub fn new(name: impl Into<String>, hros_ref: f64, bros_ref: f64, lb_ref: f64) -> Self {
        FuelParams {
            name: name.into(),
            hros_ref,
            bros_ref,
            lb_ref,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lb_ref >= 1.0) || !self.lb_ref.is_finite() {
            return Err(Error::InvalidLengthToBreadth(self.lb_ref));
        }
        if !(self.bros_ref >= 0.0) || !self.hros_ref.is_finite() || self.hros_ref < self.bros_ref {
            return Err(Error::invalid(format!(
                "fuel '{}': need hros_ref >= bros_ref >= 0, got hros_ref={} bros_ref={}",
                self.name, self.hros_ref, self.bros_ref
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    cell_size: f64,
    fuel: Raster<FuelId>,
    fuel_table: BTreeMap<FuelId, FuelParams>,
}

impl Landscape {
    pub fn new(
        fuel: Raster<FuelId>,
        cell_size: f64,
        fuel_table: BTreeMap<FuelId, FuelParams>,
    ) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
        }
        for params in fuel_table.values() {
            params.validate()?;
        }
        for &code in fuel.as_slice() {
            if code != NON_FUEL && !fuel_table.contains_key(&code) {
                return Err(Error::UnknownFuel(code));
            }
        }
        Ok(Landscape {
            cell_size,
            fuel,
            fuel_table,
        })
    }

    pub fn rows(&self) -> usize {
        self.fuel.rows()
    }

    pub fn cols(&self) -> usize {
        self.fuel.cols()
    }

    pub fn cell_count(&self) -> usize {
        self.fuel.len()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn fuel_grid(&self) -> &Raster<FuelId> {
        &self.fuel
    }

    pub fn fuel_table(&self) -> &BTreeMap<FuelId, FuelParams> {
        &self.fuel_table
    }

    pub fn fuel_at(&self, row: usize, col: usize) -> FuelId {
        *self.fuel.get(row, col)
    }

    pub fn params(&self, id: FuelId) -> Option<&FuelParams> {
        self.fuel_table.get(&id)
    }

    /// Fuel types present in the grid, ascending. Code 0 is excluded.
    pub fn fuel_types(&self) -> Vec<FuelId> {
        self.fuel
            .as_slice()
            .iter()
            .copied()
            .filter(|&c| c != NON_FUEL)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// One constant-weather interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    /// km/h.
    pub wind_speed: f64,
    /// Direction the fire head points, degrees counterclockwise from East.
    pub wind_heading: f64,
    /// Minutes.
    pub duration: u32,
}

/// Default reference wind speed, km/h, at which fuel-table rates apply unscaled.
pub const DEFAULT_REFERENCE_WIND: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherStream {
    records: Vec<WeatherRecord>,
    reference_wind: f64,
}

impl WeatherStream {
    pub fn new(records: Vec<WeatherRecord>, reference_wind: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("weather stream is empty"));
        }
        if !(reference_wind > 0.0) || !reference_wind.is_finite() {
            return Err(Error::invalid(format!(
                "reference wind must be positive, got {reference_wind}"
            )));
        }
        for (i, r) in records.iter().enumerate() {
            if !(r.wind_speed >= 0.0) || !r.wind_speed.is_finite() {
                return Err(Error::invalid(format!(
                    "weather record {}: negative wind speed {}",
                    i + 1,
                    r.wind_speed
                )));
            }
            if !(0.0..360.0).contains(&r.wind_heading) {
                return Err(Error::invalid(format!(
                    "weather record {}: heading {} outside [0, 360)",
                    i + 1,
                    r.wind_heading
                )));
            }
            if r.duration == 0 {
                return Err(Error::invalid(format!("weather record {}: zero duration", i + 1)));
            }
        }
        Ok(WeatherStream {
            records,
            reference_wind,
        })
    }

    /// Single constant record covering `duration` minutes.
    pub fn constant(wind_speed: f64, wind_heading: f64, duration: u32, reference_wind: f64) -> Result<Self> {
        Self::new(
            vec![WeatherRecord {
                wind_speed,
                wind_heading,
                duration,
            }],
            reference_wind,
        )
    }

    pub fn records(&self) -> &[WeatherRecord] {
        &self.records
    }

    pub fn reference_wind(&self) -> f64 {
        self.reference_wind
    }

    pub fn total_duration(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.duration)).sum()
    }

    /// Index of the record active at `minute` (the last one past the end).
    pub fn record_index_at(&self, minute: f64) -> usize {
        let mut end = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            end += f64::from(r.duration);
            if minute < end {
                return i;
            }
        }
        self.records.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgnitionSpec {
    pub row: usize,
    pub col: usize,
    /// Minutes after the start of the weather stream.
    pub start_time: u32,
}

impl IgnitionSpec {
    pub fn new(row: usize, col: usize) -> Self {
        IgnitionSpec {
            row,
            col,
            start_time: 0,
        }
    }

    pub fn validate(&self, land: &Landscape) -> Result<()> {
        if !land.fuel_grid().contains(self.row, self.col) {
            return Err(Error::invalid(format!(
                "ignition ({}, {}) outside {}x{} grid",
                self.row,
                self.col,
                land.rows(),
                land.cols()
            )));
        }
        if land.fuel_at(self.row, self.col) == NON_FUEL {
            return Err(Error::invalid(format!(
                "ignition ({}, {}) is on a non-fuel cell",
                self.row, self.col
            )));
        }
        Ok(())
    }
}
