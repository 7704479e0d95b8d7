use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rosfit::calibrator::{self, CalibrationSpec, RealtimeStep};
use rosfit::dfo::{Algorithm, OptOptions, DEFAULT_XTOL_ABS};
use rosfit::ellipse::FactorTuple;
use rosfit::fixtures;
use rosfit::io;
use rosfit::landscape::{IgnitionSpec, Landscape, WeatherStream, DEFAULT_REFERENCE_WIND};
use rosfit::metrics::{self, Norm, WeightVector};
use rosfit::objective::{FireCase, RafObjective, DEFAULT_LOWER, DEFAULT_UPPER};
use rosfit::raster::ScarSeries;
use rosfit::simulator::{simulate, AdjustmentSet, Mode, SimConfig};
use rosfit::Error;

#[derive(Parser, Debug)]
#[command(name = "rosfit", version, about = "Raster fire growth and rate-of-spread factor calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the fire model and write one burn grid per report period
    Simulate(SimulateArgs),
    /// Print agreement metrics between two burn grids
    Compare(CompareArgs),
    /// Fit adjustment factors to an observed scar series
    Calibrate(CalibrateArgs),
    /// Re-fit after every observed scar, warm-starting from the last fit
    Realtime(CalibrateArgs),
    /// Run several optimizers on the same calibration problem
    Benchmark(BenchmarkArgs),
    /// Write one of the built-in synthetic instances to disk
    Fixture(FixtureArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Fuel-code grid (ESRI ASCII)
    #[arg(long)]
    fuels: PathBuf,
    /// Fuel table CSV: id,name,hros_ref,bros_ref,lb_ref
    #[arg(long)]
    fuel_table: PathBuf,
    /// Weather CSV: wind_speed,wind_heading,duration
    #[arg(long)]
    weather: PathBuf,
    /// Ignition CSV with row,col[,start_time]
    #[arg(long, conflicts_with = "ignite", required_unless_present = "ignite")]
    ignition: Option<PathBuf>,
    /// Ignition as row,col[,start_time]
    #[arg(long, value_parser = io::parse_ignition)]
    ignite: Option<IgnitionSpec>,
    /// Wind speed (km/h) at which the fuel table rates apply
    #[arg(long, default_value_t = DEFAULT_REFERENCE_WIND)]
    reference_wind: f64,
    /// Simulation step, minutes
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
}

struct Inputs {
    land: Landscape,
    weather: WeatherStream,
    ignition: IgnitionSpec,
}

impl InputArgs {
    fn load(&self) -> rosfit::Result<Inputs> {
        let land = io::load_landscape(&self.fuels, &self.fuel_table)?;
        let weather = io::load_weather(&self.weather, self.reference_wind)?;
        let ignition = match (&self.ignition, self.ignite) {
            (Some(path), _) => io::load_ignition(path)?,
            (None, Some(ign)) => ign,
            (None, None) => return Err(Error::Invalid("an ignition is required".into())),
        };
        ignition.validate(&land)?;
        Ok(Inputs {
            land,
            weather,
            ignition,
        })
    }

    fn describe(&self) -> Value {
        json!({
            "fuels": self.fuels,
            "fuel_table": self.fuel_table,
            "weather": self.weather,
            "ignition_file": self.ignition,
            "ignite": self.ignite,
            "reference_wind": self.reference_wind,
            "dt": self.dt,
        })
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Minutes to simulate
    #[arg(long, default_value_t = 420)]
    horizon: u32,
    /// Minutes between emitted grids
    #[arg(long, default_value_t = 60)]
    report_every: u32,
    /// Global factors x1,x2,x3,x4
    #[arg(long, value_delimiter = ',', num_args = 4, conflicts_with = "factors_file")]
    factors: Option<Vec<f64>>,
    /// Adjustment set JSON (for example the x_star of a calibration result)
    #[arg(long)]
    factors_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write PGM images of every grid
    #[arg(long)]
    render: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MuPreset {
    Uniform,
    FinalOnly,
    CustomFile,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormArg {
    Frobenius,
    Hamming,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Observed scar grids, in time order
    #[arg(long, num_args = 1.., required = true)]
    scars: Vec<PathBuf>,
    /// Minutes of each scar; defaults to report-every, 2 x report-every, ...
    #[arg(long, value_delimiter = ',')]
    timestamps: Option<Vec<u32>>,
    #[arg(long, default_value_t = 60)]
    report_every: u32,
    #[arg(long, value_enum, default_value = "global")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MuPreset::Uniform)]
    mu: MuPreset,
    /// Weights file (numbers separated by commas or whitespace) for --mu custom-file
    #[arg(long, required_if_eq("mu", "custom-file"))]
    mu_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormArg::Frobenius)]
    norm: NormArg,
    #[arg(long, default_value_t = DEFAULT_LOWER)]
    lower: f64,
    #[arg(long, default_value_t = DEFAULT_UPPER)]
    upper: f64,
    #[arg(long, default_value_t = 200)]
    max_evals: usize,
    /// Wall-clock limit per optimization, seconds
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_XTOL_ABS)]
    xtol: f64,
    /// Initial simplex scale, poll step or trust-region radius
    #[arg(long, default_value_t = calibrator::CALIBRATION_STEP)]
    initial_step: f64,
    /// Interpolation points of the quadratic model (default 2n+1)
    #[arg(long)]
    m_points: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    Global,
    Fms,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Global => Mode::Global,
            ModeArg::Fms => Mode::Fms,
        }
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// nelder-mead, pattern-search, bobyqa or newuoa
    #[arg(long, default_value = "bobyqa")]
    algorithm: Algorithm,
    /// Also write PGM images of the fitted scars
    #[arg(long)]
    render: bool,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "bobyqa,newuoa,nelder-mead,pattern-search")]
    algorithms: Vec<Algorithm>,
    /// Run the algorithms on separate threads
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// circle-5x5, homogeneous-20x20 or striped-8
    name: String,
    #[arg(long)]
    out: PathBuf,
}

struct Problem {
    inputs: Inputs,
    observed: ScarSeries,
    mu: WeightVector,
    spec: CalibrationSpec,
}

impl ProblemArgs {
    fn load(&self, algorithm: Algorithm) -> rosfit::Result<Problem> {
        let inputs = self.input.load()?;
        let timestamps = match &self.timestamps {
            Some(ts) => ts.clone(),
            None => (1..=self.scars.len() as u32).map(|k| k * self.report_every).collect(),
        };
        let observed = io::load_scars(&self.scars, &timestamps)?;
        let mu = match self.mu {
            MuPreset::Uniform => WeightVector::uniform(observed.len())?,
            MuPreset::FinalOnly => WeightVector::final_only(observed.len())?,
            MuPreset::CustomFile => {
                let path = self.mu_file.as_ref().expect("clap requires --mu-file");
                read_weights(path)?
            }
        };
        let opts = OptOptions {
            xtol_abs: self.xtol,
            max_evals: self.max_evals,
            max_time: self.max_time,
            bounds: None,
            m_points: self.m_points,
            initial_step: Some(self.initial_step),
        };
        let spec = CalibrationSpec {
            mode: self.mode.into(),
            mu: mu.clone(),
            algorithm,
            opts,
            x0: None,
            bounds: (self.lower, self.upper),
            norm: match self.norm {
                NormArg::Frobenius => Norm::Frobenius,
                NormArg::Hamming => Norm::Hamming,
            },
        };
        Ok(Problem {
            inputs,
            observed,
            mu,
            spec,
        })
    }

    fn objective(&self, p: &Problem) -> rosfit::Result<RafObjective> {
        let case = FireCase::new(
            p.inputs.weather.clone(),
            p.inputs.ignition,
            p.observed.clone(),
            p.mu.clone(),
        );
        Ok(
            RafObjective::with_step(p.inputs.land.clone(), vec![case], p.spec.mode, self.input.dt)?
                .with_bounds(self.lower, self.upper)?
                .with_norm(p.spec.norm),
        )
    }

    fn describe(&self, p: &Problem) -> Value {
        json!({
            "inputs": self.input.describe(),
            "scars": self.scars,
            "timestamps": p.observed.timestamps(),
            "mode": p.spec.mode,
            "mu_preset": self.mu,
            "mu": p.mu.as_slice(),
            "norm": self.norm,
            "bounds": [self.lower, self.upper],
            "options": p.spec.opts,
        })
    }
}

fn read_weights(path: &Path) -> rosfit::Result<WeightVector> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("bad weight '{s}'"),
            })
        })
        .collect::<rosfit::Result<Vec<_>>>()?;
    WeightVector::new(values)
}

fn ensure_dir(dir: &Path) -> rosfit::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> rosfit::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    io::write_atomic(path, text.as_bytes())
}

fn write_manifest(dir: &Path, command: &str, settings: Value, outputs: &[String]) -> rosfit::Result<()> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "deterministic": true,
        "settings": settings,
        "outputs": outputs,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn write_series(
    series: &ScarSeries,
    cell_size: f64,
    dir: &Path,
    prefix: &str,
    render: bool,
    outputs: &mut Vec<String>,
) -> rosfit::Result<()> {
    for (minute, grid) in series.iter() {
        let name = format!("{prefix}_{minute:04}.asc");
        io::write_burn_grid(grid, cell_size, &dir.join(&name))?;
        outputs.push(name);
        if render {
            let name = format!("{prefix}_{minute:04}.pgm");
            io::render_pgm(grid, &dir.join(&name))?;
            outputs.push(name);
        }
    }
    Ok(())
}

fn trace_csv(trace: &[(usize, f64)]) -> String {
    let mut out = String::from("neval,f_best\n");
    for (n, f) in trace {
        out.push_str(&format!("{n},{f}\n"));
    }
    out
}

fn run_simulate(args: &SimulateArgs) -> rosfit::Result<()> {
    let inputs = args.input.load()?;
    let fuels = inputs.land.fuel_types();
    let set = match (&args.factors, &args.factors_file) {
        (Some(v), _) => AdjustmentSet::Global(FactorTuple::from_slice(v)),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        (None, None) => AdjustmentSet::identity(Mode::Global, &fuels),
    };
    if !set.covers(&fuels) {
        return Err(Error::Invalid("factor set does not cover every fuel in the landscape".into()));
    }
    let cfg = SimConfig {
        horizon: args.horizon,
        report_every: args.report_every,
        dt: args.input.dt,
    };
    let series = simulate(&inputs.land, &inputs.weather, &inputs.ignition, &set, &cfg)?;

    ensure_dir(&args.out)?;
    let mut outputs = Vec::new();
    write_series(&series, inputs.land.cell_size(), &args.out, "scar", args.render, &mut outputs)?;
    let settings = json!({
        "inputs": args.input.describe(),
        "ignition": inputs.ignition,
        "config": cfg,
        "factors": set,
        "burned_cells": series.grids().iter().map(|g| g.burned_count()).collect::<Vec<_>>(),
    });
    write_manifest(&args.out, "simulate", settings, &outputs)
}

fn run_compare(args: &CompareArgs) -> rosfit::Result<()> {
    let a = io::load_burn_grid(&args.a)?;
    let b = io::load_burn_grid(&args.b)?;
    let c = metrics::compare(&a, &b)?;
    match args.format {
        Format::Csv => {
            println!("frobenius,hamming,mse,ssim,ssim_windowed");
            println!("{},{},{},{},{}", c.frobenius, c.hamming, c.mse, c.ssim, c.ssim_windowed);
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&c).map_err(|e| Error::Invalid(e.to_string()))?),
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    algorithm: Algorithm,
    mode: Mode,
    fuels: &'a [u32],
    x: &'a [f64],
    x_star: &'a AdjustmentSet,
    initial_error: f64,
    final_error: f64,
    neval: usize,
    elapsed: f64,
    termination: rosfit::Termination,
    infeasible: usize,
}

fn run_calibrate(args: &CalibrateArgs) -> rosfit::Result<()> {
    let p = args.problem.load(args.algorithm)?;
    let objective = args.problem.objective(&p)?;
    let res = calibrator::calibrate_objective(&objective, &p.spec)?;

    let out = &args.problem.out;
    ensure_dir(out)?;
    let report = CalibrationReport {
        algorithm: args.algorithm,
        mode: p.spec.mode,
        fuels: objective.fuels(),
        x: &res.opt.x_best,
        x_star: &res.x_star,
        initial_error: res.initial_error,
        final_error: res.final_error,
        neval: res.opt.neval,
        elapsed: res.opt.elapsed,
        termination: res.opt.termination,
        infeasible: res.infeasible,
    };
    write_json(&out.join("result.json"), &report)?;
    io::write_atomic(&out.join("trace.csv"), trace_csv(&res.opt.trace).as_bytes())?;
    let mut outputs = vec!["result.json".to_string(), "trace.csv".to_string()];
    if args.render {
        let fitted = objective.simulate(&res.x_star)?;
        write_series(&fitted[0], p.inputs.land.cell_size(), out, "fitted", true, &mut outputs)?;
    }
    let mut settings = args.problem.describe(&p);
    settings["algorithm"] = json!(args.algorithm);
    write_manifest(out, "calibrate", settings, &outputs)?;
    println!(
        "{}: error {} -> {} in {} evaluations",
        args.algorithm, res.initial_error, res.final_error, res.opt.neval
    );
    Ok(())
}

#[derive(Serialize)]
struct RealtimeRow<'a> {
    t: usize,
    timestamp: u32,
    start: &'a AdjustmentSet,
    one_step_ahead_error: f64,
    x_star: &'a AdjustmentSet,
    initial_error: f64,
    final_error: f64,
    neval: usize,
    termination: rosfit::Termination,
}

fn realtime_rows(steps: &[RealtimeStep]) -> Vec<RealtimeRow<'_>> {
    steps
        .iter()
        .map(|s| RealtimeRow {
            t: s.t,
            timestamp: s.timestamp,
            start: &s.start,
            one_step_ahead_error: s.one_step_ahead_error,
            x_star: &s.result.x_star,
            initial_error: s.result.initial_error,
            final_error: s.result.final_error,
            neval: s.result.opt.neval,
            termination: s.result.opt.termination,
        })
        .collect()
}

fn run_realtime(args: &CalibrateArgs) -> rosfit::Result<()> {
    let p = args.problem.load(args.algorithm)?;
    if args.problem.input.dt != 1.0 {
        return Err(Error::Invalid("realtime runs use the default 1-minute step".into()));
    }
    let steps = calibrator::realtime_calibrate(&p.inputs.land, &p.inputs.weather, &p.inputs.ignition, &p.observed, &p.spec)?;

    let out = &args.problem.out;
    ensure_dir(out)?;
    write_json(&out.join("realtime.json"), &realtime_rows(&steps))?;
    let mut trace = String::from("t,neval,f_best\n");
    for s in &steps {
        for (n, f) in &s.result.opt.trace {
            trace.push_str(&format!("{},{n},{f}\n", s.t));
        }
    }
    io::write_atomic(&out.join("trace.csv"), trace.as_bytes())?;
    let mut settings = args.problem.describe(&p);
    settings["algorithm"] = json!(args.algorithm);
    write_manifest(out, "realtime", settings, &["realtime.json".into(), "trace.csv".into()])?;
    println!("t,one_step_ahead_error,initial_error,final_error,neval");
    for s in &steps {
        println!(
            "{},{},{},{},{}",
            s.t, s.one_step_ahead_error, s.result.initial_error, s.result.final_error, s.result.opt.neval
        );
    }
    Ok(())
}

fn run_benchmark(args: &BenchmarkArgs) -> rosfit::Result<()> {
    let p = args.problem.load(Algorithm::Bobyqa)?;
    let objective = args.problem.objective(&p)?;
    let table = if args.parallel {
        calibrator::run_benchmark_parallel(&objective, &args.algorithms, &p.spec)?
    } else {
        calibrator::run_benchmark(&objective, &args.algorithms, &p.spec)?
    };
    let out = &args.problem.out;
    ensure_dir(out)?;
    io::write_atomic(&out.join("benchmark.csv"), table.to_csv().as_bytes())?;
    write_json(&out.join("benchmark.json"), &table)?;
    let mut settings = args.problem.describe(&p);
    settings["algorithms"] = json!(args.algorithms);
    settings["parallel"] = json!(args.parallel);
    write_manifest(out, "benchmark", settings, &["benchmark.csv".into(), "benchmark.json".into()])?;
    print!("{}", table.to_csv());
    Ok(())
}

fn run_fixture(args: &FixtureArgs) -> rosfit::Result<()> {
    let case = fixtures::by_name(&args.name)?;
    let manifest = fixtures::write_fixture(&case, &args.out)?;
    println!("wrote {} to {}", manifest.name, args.out.display());
    Ok(())
}

fn run(cli: &Cli) -> rosfit::Result<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Compare(a) => run_compare(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Realtime(a) => run_realtime(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Fixture(a) => run_fixture(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
