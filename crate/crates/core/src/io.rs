//! Text formats: ASCII-grid rasters, CSV fuel and weather tables, ignition lines.
//!
//! Rasters use the common GIS ASCII grid layout: a `key value` header
//! (`ncols`, `nrows`, optional `xllcorner`/`yllcorner`, `cellsize`,
//! `NODATA_value`) followed by `nrows` lines of `ncols` space-separated
//! values, northernmost row first. Fuel code 0 and the NODATA value both
//! decode to non-fuel.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{
    FuelId, FuelParams, IgnitionSpec, Landscape, WeatherRecord, WeatherStream, NON_FUEL,
};
use crate::raster::{BurnGrid, Raster, ScarSeries};

pub const DEFAULT_NODATA: i64 = -9999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `contents` next to `path` and renames it into place, so a failed
/// write never leaves a truncated artifact behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

/// Parses an ASCII grid into its header and raw body tokens.
fn parse_ascii_grid<'a>(path: &Path, text: &'a str) -> Result<(GridHeader, Vec<Vec<&'a str>>)> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = 0.0;
    let mut yll = 0.0;
    let mut cellsize = None;
    let mut nodata = None;
    let mut body = Vec::new();

    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    while let Some(line) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| Error::parse(path, format!("header key '{key}' has no value")))?;
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::parse(path, format!("bad header value '{v}' for '{key}'")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(num(value)? as usize),
            "nrows" => nrows = Some(num(value)? as usize),
            "xllcorner" | "xllcenter" => xll = num(value)?,
            "yllcorner" | "yllcenter" => yll = num(value)?,
            "cellsize" => cellsize = Some(num(value)?),
            "nodata_value" => nodata = Some(num(value)?),
            other => return Err(Error::parse(path, format!("unknown header key '{other}'"))),
        }
        lines.next();
    }
    for line in lines {
        body.push(line.split_whitespace().collect::<Vec<_>>());
    }

    let header = GridHeader {
        ncols: ncols.ok_or_else(|| Error::parse(path, "missing ncols"))?,
        nrows: nrows.ok_or_else(|| Error::parse(path, "missing nrows"))?,
        xllcorner: xll,
        yllcorner: yll,
        cellsize: cellsize.ok_or_else(|| Error::parse(path, "missing cellsize"))?,
        nodata,
    };
    if header.ncols == 0 || header.nrows == 0 {
        return Err(Error::parse(path, "grid must have at least one row and column"));
    }
    if body.len() != header.nrows || body.iter().any(|r| r.len() != header.ncols) {
        let found_cols = body.iter().map(Vec::len).find(|&c| c != header.ncols);
        return Err(Error::DimensionMismatch {
            expected_rows: header.nrows,
            expected_cols: header.ncols,
            rows: body.len(),
            cols: found_cols.unwrap_or(header.ncols),
        });
    }
    Ok((header, body))
}

/// Reads an integer fuel-code raster. NODATA cells become fuel code 0.
pub fn load_fuel_grid(path: &Path) -> Result<(GridHeader, Raster<FuelId>)> {
    let text = read_to_string(path)?;
    let (header, body) = parse_ascii_grid(path, &text)?;
    let mut data = Vec::with_capacity(header.nrows * header.ncols);
    for tok in body.iter().flatten() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(path, format!("non-numeric fuel code '{tok}'")))?;
        if header.nodata == Some(v) {
            data.push(NON_FUEL);
        } else if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
            data.push(v as FuelId);
        } else {
            return Err(Error::parse(path, format!("invalid fuel code '{tok}'")));
        }
    }
    Ok((header, Raster::from_vec(header.nrows, header.ncols, data)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FuelRow {
    id: FuelId,
    name: String,
    hros_ref: f64,
    bros_ref: f64,
    lb_ref: f64,
}

pub fn load_fuel_table(path: &Path) -> Result<BTreeMap<FuelId, FuelParams>> {
    let text = read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut table = BTreeMap::new();
    for row in rdr.deserialize::<FuelRow>() {
        let row = row.map_err(|e| Error::parse(path, e.to_string()))?;
        if row.id == NON_FUEL {
            return Err(Error::parse(path, "fuel id 0 is reserved for non-fuel"));
        }
        let params = FuelParams::new(row.name, row.hros_ref, row.bros_ref, row.lb_ref);
        params.validate()?;
        if table.insert(row.id, params).is_some() {
            return Err(Error::parse(path, format!("duplicate fuel id {}", row.id)));
        }
    }
    Ok(table)
}

pub fn load_landscape(fuel_grid_path: &Path, fuel_table_path: &Path) -> Result<Landscape> {
    let (header, grid) = load_fuel_grid(fuel_grid_path)?;
    let table = load_fuel_table(fuel_table_path)?;
    Landscape::new(grid, header.cellsize, table)
}

/// Reads a weather CSV (`wind_speed,wind_heading,duration`).
pub fn load_weather(path: &Path, reference_wind: f64) -> Result<WeatherStream> {
    let text = read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let records = rdr
        .deserialize::<WeatherRecord>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(path, e.to_string()))?;
    if records.is_empty() {
        return Err(Error::parse(path, "weather file has no records"));
    }
    WeatherStream::new(records, reference_wind)
}

/// Reads a one-line ignition CSV `row,col[,start_time]`; a header line is optional.
pub fn load_ignition(path: &Path) -> Result<IgnitionSpec> {
    let text = read_to_string(path)?;
    let line = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .find(|l| !l.starts_with(|c: char| c.is_ascii_alphabetic()))
        .ok_or_else(|| Error::parse(path, "no ignition record"))?;
    parse_ignition(line).map_err(|m| Error::parse(path, m))
}

/// Parses `row,col[,start_time]`.
pub fn parse_ignition(s: &str) -> Result<IgnitionSpec, String> {
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(format!("expected row,col[,start_time], got '{s}'"));
    }
    let int = |v: &str| v.parse::<u64>().map_err(|_| format!("bad ignition field '{v}'"));
    Ok(IgnitionSpec {
        row: int(fields[0])? as usize,
        col: int(fields[1])? as usize,
        start_time: fields.get(2).map(|v| int(v)).transpose()?.unwrap_or(0) as u32,
    })
}

fn grid_header_text(rows: usize, cols: usize, cell_size: f64, nodata: i64) -> String {
    format!(
        "ncols {cols}\nnrows {rows}\nxllcorner 0\nyllcorner 0\ncellsize {cell_size}\nNODATA_value {nodata}\n"
    )
}

fn raster_text<T>(raster: &Raster<T>, cell_size: f64, fmt: impl Fn(&T) -> String) -> String {
    let mut out = grid_header_text(raster.rows(), raster.cols(), cell_size, DEFAULT_NODATA);
    for row in raster.as_slice().chunks(raster.cols()) {
        let line: Vec<String> = row.iter().map(&fmt).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_burn_grid(grid: &BurnGrid, cell_size: f64, path: &Path) -> Result<()> {
    let text = raster_text(grid, cell_size, |&b| if b { "1" } else { "0" }.to_string());
    write_atomic(path, text.as_bytes())
}

pub fn load_burn_grid(path: &Path) -> Result<BurnGrid> {
    let text = read_to_string(path)?;
    let (header, body) = parse_ascii_grid(path, &text)?;
    let data = body
        .iter()
        .flatten()
        .map(|&tok| match tok {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::NonBinary(other.to_string())),
        })
        .collect::<Result<Vec<_>>>()?;
    Raster::from_vec(header.nrows, header.ncols, data)
}

/// Loads an ordered set of burn grids with their report times (minutes).
pub fn load_scars<P: AsRef<Path>>(paths: &[P], timestamps: &[u32]) -> Result<ScarSeries> {
    if paths.len() != timestamps.len() {
        return Err(Error::invalid(format!(
            "{} scar files but {} timestamps",
            paths.len(),
            timestamps.len()
        )));
    }
    let grids = paths
        .iter()
        .map(|p| load_burn_grid(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ScarSeries::new(grids, timestamps.to_vec())
}

pub fn write_fuel_grid(land: &Landscape, path: &Path) -> Result<()> {
    let text = raster_text(land.fuel_grid(), land.cell_size(), |c| c.to_string());
    write_atomic(path, text.as_bytes())
}

pub fn write_fuel_table(table: &BTreeMap<FuelId, FuelParams>, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for (&id, p) in table {
        wtr.serialize(FuelRow {
            id,
            name: p.name.clone(),
            hros_ref: p.hros_ref,
            bros_ref: p.bros_ref,
            lb_ref: p.lb_ref,
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn write_weather(weather: &WeatherStream, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in weather.records() {
        wtr.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn write_ignition(ign: &IgnitionSpec, path: &Path) -> Result<()> {
    let text = format!("row,col,start_time\n{},{},{}\n", ign.row, ign.col, ign.start_time);
    write_atomic(path, text.as_bytes())
}

/// Renders a burn grid as a binary PGM (burned = black on white).
pub fn render_pgm(grid: &BurnGrid, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", grid.cols(), grid.rows()).into_bytes();
    bytes.extend(grid.as_slice().iter().map(|&b| if b { 0u8 } else { 255u8 }));
    write_atomic(path, &bytes)
}
