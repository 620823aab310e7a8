//! Command-line front end: simulate a scenario, fuse recorded streams,
//! inspect a filtration snapshot, convert vehicle counts, or estimate the
//! traffic-to-PM lag.
//!
//! Exit codes: 0 on success, 1 for bad usage or bad data, 2 when an
//! internal invariant breaks (a bug worth reporting).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sheaf_fusion::emissions::{
    base_pattern, emitted_mass, estimate_lag, DailySeries, EmissionFactorTable, GuidebookMode,
    SeriesKind, ShiftMode, VehicleCounts,
};
use sheaf_fusion::error::{Error, Result};
use sheaf_fusion::experiment::{fuse_streams, snapshot_filtration, write_series_csv};
use sheaf_fusion::ingest::{
    read_readings, read_streams, timeline_to_records, write_readings, SensorStream,
};
use sheaf_fusion::sheaf::GuidebookMap;
use sheaf_fusion::simulation::{
    default_network, sample_streams, SignalSpec, DAILY_ANGULAR_FREQUENCY,
};
use sheaf_fusion::topology::{Network, TopologyConfig};

#[derive(Parser)]
#[command(
    name = "sheaf-fusion",
    version,
    about = "Sheaf-based fusion for heterogeneous sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the stock four-sensor network and write a readings CSV.
    Simulate(SimulateArgs),
    /// Fuse a readings CSV into a PM2.5 series, optionally scored against
    /// a reference stream.
    Fuse(FuseArgs),
    /// Report the consistency filtration, selection, and covers at one
    /// instant.
    Filtration(FiltrationArgs),
    /// Convert vehicle counts to emitted mass or concentration.
    Convert(ConvertArgs),
    /// Estimate the lag between a vehicle-derived and a measured PM
    /// profile.
    Lag(LagArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Where to write the readings CSV.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed; every sensor draws an independent stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated span in seconds.
    #[arg(long, default_value_t = 172_800)]
    duration_s: u64,
    /// Sine amplitude, µg/m³.
    #[arg(long, default_value_t = 50.0)]
    amplitude: f64,
    /// Sine offset, µg/m³.
    #[arg(long, default_value_t = 150.0)]
    offset: f64,
    /// Angular frequency in rad/s; the default is one cycle per day.
    #[arg(long, default_value_t = DAILY_ANGULAR_FREQUENCY)]
    angular_frequency: f64,
}

#[derive(Args)]
struct FuseArgs {
    /// Readings CSV to fuse.
    #[arg(long)]
    readings: PathBuf,
    /// Topology TOML; the stock four-sensor network when omitted.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Sensor id in the readings to treat as ground truth. It must not be
    /// a network vertex; it joins the timeline and scores every estimate.
    #[arg(long)]
    reference: Option<String>,
    /// Write the summary report as JSON here (stdout gets a short text
    /// summary either way).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the per-step series as CSV here.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Window for the series' trailing error averages, seconds.
    #[arg(long, default_value_t = 3_600)]
    ma_window_s: i64,
}

#[derive(Args)]
struct FiltrationArgs {
    /// Readings CSV to snapshot.
    #[arg(long)]
    readings: PathBuf,
    /// Topology TOML; the stock four-sensor network when omitted.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Instant to snapshot, in seconds; every sensor's latest reading at
    /// or before this time is used.
    #[arg(long)]
    at: i64,
    /// Write the report as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    /// Vehicle counts as TYPE=COUNT, e.g. --count two-wheeled=200
    /// --count four-wheeled=30.
    #[arg(long = "count", value_name = "TYPE=COUNT", required = true)]
    counts: Vec<String>,
    /// Kilometres travelled by each vehicle on the segment.
    #[arg(long, default_value_t = 1.0)]
    vkt_km: f64,
    /// Emission-factor TOML; built-in factors when omitted.
    #[arg(long)]
    ef: Option<PathBuf>,
    /// "mass" for grams emitted, "concentration" for µg/m³ over the
    /// segment-sized box.
    #[arg(long, default_value = "mass")]
    mode: String,
}

#[derive(Args)]
struct LagArgs {
    /// Readings CSV holding one vehicle-derived stream (count pairs are
    /// converted with the built-in guidebook).
    #[arg(long)]
    vehicle: PathBuf,
    /// Readings CSV holding one measured PM stream.
    #[arg(long)]
    sensor: PathBuf,
    /// Largest lag to try, hours (1–23).
    #[arg(long, default_value_t = 12)]
    max_lag: usize,
    /// "circular" wraps the vehicle profile around midnight;
    /// "truncated" leaves the first lag hours of the base unobserved.
    #[arg(long, default_value = "circular")]
    shift: String,
    /// Write the reconstructed base (non-traffic) daily profile as CSV
    /// here.
    #[arg(long)]
    base: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Fuse(args) => fuse(args),
        Command::Filtration(args) => filtration(args),
        Command::Convert(args) => convert(args),
        Command::Lag(args) => lag(args),
    }
}

fn load_network(path: &Option<PathBuf>) -> Result<Network> {
    let config = match path {
        Some(p) => TopologyConfig::load(p)?,
        None => TopologyConfig::default(),
    };
    config.build()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal {
        what: format!("report serialization failed: {e}"),
    })?;
    Ok(std::fs::write(path, text + "\n")?)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal {
        what: format!("report serialization failed: {e}"),
    })?;
    println!("{text}");
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let signal = SignalSpec {
        amplitude: args.amplitude,
        offset: args.offset,
        duration_s: args.duration_s,
        angular_frequency: args.angular_frequency,
    };
    let timeline = sample_streams(&default_network(), &signal, args.seed)?;
    let records = timeline_to_records(&timeline);
    write_readings(&args.out, &records)?;
    println!(
        "wrote {} readings from {} sensors over {} s to {}",
        records.len(),
        timeline.sensors().len(),
        args.duration_s,
        args.out.display()
    );
    Ok(())
}

fn fuse(args: FuseArgs) -> Result<()> {
    let network = load_network(&args.topology)?;
    let mut expected = network.vertex_dims();
    if let Some(id) = &args.reference {
        if expected.insert(id.clone(), 1).is_some() {
            return Err(Error::SensorMismatch {
                what: format!("reference {id:?} is itself a network vertex"),
            });
        }
    }
    let streams = read_streams(&args.readings, &expected)?;
    let report = fuse_streams(&network, &streams, args.reference.as_deref())?;
    if let Some(path) = &args.series {
        write_series_csv(path, &report.rows, args.ma_window_s)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    println!(
        "fused {} snapshots; mean accepted tolerance {:.3}, mean radius {:.3}",
        report.steps, report.mean_epsilon_c, report.mean_radius
    );
    if let Some(score) = &report.score {
        println!(
            "vs {}: naive {:.2} % MAPE, fused {:.2} % MAPE ({} %)",
            score.reference,
            score.naive_mape_pct,
            score.sheaf_mape_pct,
            score
                .improvement_pct
                .map(|i| format!("{i:+.2}"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }
    Ok(())
}

fn filtration(args: FiltrationArgs) -> Result<()> {
    let network = load_network(&args.topology)?;
    let streams = read_streams(&args.readings, &network.vertex_dims())?;
    let report = snapshot_filtration(&network, &streams, args.at)?;
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!(
                "filtration at {} s: radius {:.3}, kept {} of {} faces; wrote {}",
                report.t_s,
                report.radius,
                report.selected.len(),
                report.entries.len(),
                path.display()
            );
        }
        None => print_json(&report)?,
    }
    Ok(())
}

fn convert(args: ConvertArgs) -> Result<()> {
    let factors = match &args.ef {
        Some(path) => EmissionFactorTable::load(path)?,
        None => EmissionFactorTable::default(),
    };
    let mut counts = BTreeMap::new();
    for pair in &args.counts {
        let (name, value) = pair.split_once('=').ok_or_else(|| Error::Config {
            what: format!("--count takes TYPE=COUNT, got {pair:?}"),
        })?;
        let value: f64 = value.parse().map_err(|_| Error::Config {
            what: format!("bad count {value:?} for vehicle type {name:?}"),
        })?;
        if counts.insert(name.to_string(), value).is_some() {
            return Err(Error::Config {
                what: format!("vehicle type {name:?} given twice"),
            });
        }
    }
    let counts = VehicleCounts::new(counts, args.vkt_km)?;
    let mass = emitted_mass(&counts, &factors)?;

    #[derive(serde::Serialize)]
    struct Conversion {
        mode: GuidebookMode,
        vkt_km: f64,
        per_type_g: BTreeMap<String, f64>,
        total_g: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        concentration_ug_m3: Option<f64>,
    }
    let concentration = match parse_mode(&args.mode)? {
        GuidebookMode::Mass => None,
        GuidebookMode::Concentration => Some(sheaf_fusion::emissions::concentration(
            mass.total_g,
            args.vkt_km,
        )?),
    };
    print_json(&Conversion {
        mode: parse_mode(&args.mode)?,
        vkt_km: args.vkt_km,
        per_type_g: mass.per_type.clone(),
        total_g: mass.total_g,
        concentration_ug_m3: concentration,
    })
}

fn parse_mode(s: &str) -> Result<GuidebookMode> {
    match s {
        "mass" => Ok(GuidebookMode::Mass),
        "concentration" => Ok(GuidebookMode::Concentration),
        other => Err(Error::Config {
            what: format!("bad mode {other:?} (expected \"mass\" or \"concentration\")"),
        }),
    }
}

fn parse_shift(s: &str) -> Result<ShiftMode> {
    match s {
        "circular" => Ok(ShiftMode::Circular),
        "truncated" => Ok(ShiftMode::Truncated),
        other => Err(Error::Config {
            what: format!("bad shift {other:?} (expected \"circular\" or \"truncated\")"),
        }),
    }
}

/// Load a readings file that must hold exactly one sensor, converting
/// camera count pairs to mass via the built-in guidebook.
fn single_pm_stream(path: &Path) -> Result<SensorStream> {
    let records = read_readings(path)?;
    let mut id: Option<String> = None;
    let mut readings = Vec::new();
    let guidebook = GuidebookMap::two_class_mass();
    for record in records {
        match &id {
            None => id = Some(record.sensor_id.clone()),
            Some(seen) if *seen != record.sensor_id => {
                return Err(Error::SensorMismatch {
                    what: format!(
                        "{} holds streams for both {seen:?} and {:?}; pass one sensor per file",
                        path.display(),
                        record.sensor_id
                    ),
                });
            }
            Some(_) => {}
        }
        let pm = match record.values.len() {
            1 => record.values[0],
            _ => guidebook.apply_counts(&record.values)?,
        };
        readings.push((record.timestamp_s, vec![pm]));
    }
    let id = id.ok_or_else(|| Error::EmptyStream {
        id: path.display().to_string(),
    })?;
    Ok(SensorStream { id, readings })
}

fn lag(args: LagArgs) -> Result<()> {
    let vehicle_stream = single_pm_stream(&args.vehicle)?;
    let sensor_stream = single_pm_stream(&args.sensor)?;
    let vehicle = DailySeries::new(
        SeriesKind::VehicleDerived,
        sheaf_fusion::ingest::hourly_means(&vehicle_stream)?,
    )?;
    let sensor = DailySeries::new(
        SeriesKind::Sensor,
        sheaf_fusion::ingest::hourly_means(&sensor_stream)?,
    )?;
    let estimate = estimate_lag(&vehicle, &sensor, args.max_lag)?;
    let shift = parse_shift(&args.shift)?;
    if let Some(path) = &args.base {
        let base = base_pattern(&sensor, &vehicle, estimate.lag_hours, shift)?;
        let mut text = String::from("hour,base\n");
        for (hour, value) in base.hours().iter().enumerate() {
            text.push_str(&format!("{hour},{value}\n"));
        }
        std::fs::write(path, text)?;
    }
    print_json(&estimate)
}
