//! End-to-end fusion runs and their scoring.
//!
//! This module strings the pipeline together: sample (or load) sensor
//! streams, collapse them into hold-last snapshots, propagate each
//! snapshot, and fuse. Every step yields three competing estimates of the
//! same concentration:
//!
//! * **naive** — the plain mean of the sensors' own values (counts
//!   converted to µg/m³ first);
//! * **without cutoff** — the mean over *all* faces of their lifted
//!   values, i.e. fusion that trusts everyone; on a network whose lifted
//!   multisets balance every sensor equally, this agrees with naive to
//!   float precision, which is a useful invariant and a useless estimator;
//! * **fused** — the self-filtered estimate from
//!   [`select_consistent`](crate::consistency::select_consistent), which
//!   is the point of the whole exercise.
//!
//! Scoring is mean absolute percentage error against the ground truth (in
//! simulation) or against a held-out reference stream (in the field).

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{
    filtration_landmarks_with_cap, select_consistent, selection_cutoff, Landmark,
    DEFAULT_VERTEX_CAP,
};
use crate::error::{Error, Result};
use crate::ingest::SensorStream;
use crate::sheaf::{Assignment, FiltrationEntry, PropagationResult};
use crate::simulation::{
    ground_truth, sample_streams, SensorSpec, SignalSpec, TimeStep,
};
use crate::topology::{Network, TopologyConfig};

/// Mean absolute percentage error of `estimates` against `truth`.
pub fn mape(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            a: estimates.len(),
            b: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut sum = 0.0;
    for (index, (e, t)) in estimates.iter().zip(truth).enumerate() {
        if !(*t > 0.0) {
            return Err(Error::NonPositiveTruth { index });
        }
        sum += (e - t).abs() / t;
    }
    Ok(sum / estimates.len() as f64 * 100.0)
}

/// The baseline estimator: mean of the vertices' own values, each
/// expressed in µg/m³.
pub fn naive_average(network: &Network, assignment: &Assignment) -> Result<f64> {
    let dims = network.vertex_dims();
    let mut sum = 0.0;
    for vertex in dims.keys() {
        let value = assignment
            .get(vertex)
            .ok_or_else(|| Error::UncoveredVertex { id: vertex.clone() })?;
        sum += network.vertex_pm(vertex, value)?;
    }
    Ok(sum / dims.len() as f64)
}

/// Fusion with the filter switched off: mean over every non-vertex face of
/// that face's mean lifted value.
pub fn sheaf_average_without_cutoff(result: &PropagationResult) -> Result<f64> {
    let thresholds = result.thresholds();
    if thresholds.is_empty() {
        return Err(Error::EmptyFiltration);
    }
    let mut sum = 0.0;
    for face in thresholds.keys() {
        let lifted = result.lifted_at(face).expect("threshold keys are faces");
        let count: usize = lifted.iter().map(Vec::len).sum();
        let total: f64 = lifted.iter().flatten().sum();
        sum += total / count as f64;
    }
    Ok(sum / thresholds.len() as f64)
}

/// One fused snapshot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusedStep {
    pub t_s: i64,
    pub naive: f64,
    pub fused: f64,
    pub without_cutoff: f64,
    /// Tolerance actually spent by the selection.
    pub epsilon_c: f64,
    /// Consistency radius of the snapshot.
    pub radius: f64,
}

/// Propagate and fuse every snapshot.
pub fn fuse_steps(network: &Network, steps: &[TimeStep]) -> Result<Vec<FusedStep>> {
    steps
        .iter()
        .map(|step| {
            let mut result = network.sheaf.propagate(&step.assignment)?;
            result.timestamp_s = Some(step.t_s);
            let selection = select_consistent(&result.filtration(), &result)?;
            Ok(FusedStep {
                t_s: step.t_s,
                naive: naive_average(network, &step.assignment)?,
                fused: selection.value_c,
                without_cutoff: sheaf_average_without_cutoff(&result)?,
                epsilon_c: selection.epsilon_c,
                radius: result.consistency_radius(),
            })
        })
        .collect()
}

/// One output row: a fused step plus the truth it should have matched,
/// when a truth is available.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t_s: i64,
    pub truth: Option<f64>,
    pub naive: f64,
    pub fused: f64,
    pub without_cutoff: f64,
    pub epsilon_c: f64,
    pub radius: f64,
}

impl SeriesRow {
    fn from_step(step: &FusedStep, truth: Option<f64>) -> Self {
        SeriesRow {
            t_s: step.t_s,
            truth,
            naive: step.naive,
            fused: step.fused,
            without_cutoff: step.without_cutoff,
            epsilon_c: step.epsilon_c,
            radius: step.radius,
        }
    }
}

/// Trailing moving average of the absolute percentage error of one
/// estimate column, over a window of `window_s` seconds ending at each
/// row. Rows without truth contribute nothing and get `None`.
fn moving_average_error(
    rows: &[SeriesRow],
    window_s: i64,
    estimate: impl Fn(&SeriesRow) -> f64,
) -> Vec<Option<f64>> {
    let errs: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            r.truth
                .filter(|&t| t > 0.0)
                .map(|t| (estimate(r) - t).abs() / t * 100.0)
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut start = 0;
    for (i, row) in rows.iter().enumerate() {
        while rows[start].t_s <= row.t_s - window_s {
            start += 1;
        }
        let window: Vec<f64> = errs[start..=i].iter().flatten().copied().collect();
        out.push(if window.is_empty() {
            None
        } else {
            Some(window.iter().sum::<f64>() / window.len() as f64)
        });
    }
    out
}

/// Write fused rows as CSV, adding trailing moving-average error columns
/// for the naive and fused estimates (blank where no truth is known).
pub fn write_series_csv(
    path: impl AsRef<Path>,
    rows: &[SeriesRow],
    window_s: i64,
) -> Result<()> {
    let naive_ma = moving_average_error(rows, window_s, |r| r.naive);
    let fused_ma = moving_average_error(rows, window_s, |r| r.fused);
    let mut writer = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_record([
            "t_s",
            "truth",
            "naive",
            "fused",
            "without_cutoff",
            "epsilon_c",
            "radius",
            "naive_err_ma_pct",
            "fused_err_ma_pct",
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, r) in rows.iter().enumerate() {
        writer
            .write_record([
                r.t_s.to_string(),
                opt(r.truth),
                r.naive.to_string(),
                r.fused.to_string(),
                r.without_cutoff.to_string(),
                r.epsilon_c.to_string(),
                r.radius.to_string(),
                opt(naive_ma[i]),
                opt(fused_ma[i]),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}

/// A full simulation study: the network, the signal, the instruments, and
/// the seeds to repeat it over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub signal: SignalSpec,
    pub sensors: Vec<SensorSpec>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            signal: SignalSpec::default(),
            sensors: crate::simulation::default_network(),
            seeds: (0..30).collect(),
        }
    }
}

/// Scores for one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Each sensor's own accuracy, measured at its own sampling instants.
    pub per_sensor_mape_pct: BTreeMap<String, f64>,
    pub naive_mape_pct: f64,
    pub sheaf_mape_pct: f64,
    pub without_cutoff_mape_pct: f64,
    /// Relative improvement of fused over naive, in percent of the naive
    /// error; `None` when the naive error is (numerically) zero.
    pub improvement_pct: Option<f64>,
}

/// One seed's scores together with its full fused series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub outcome: SeedOutcome,
    pub rows: Vec<SeriesRow>,
}

fn improvement(naive: f64, fused: f64) -> Option<f64> {
    (naive.abs() > 1e-9).then(|| (naive - fused) / naive * 100.0)
}

/// Simulate one seed and score every estimator against the ground truth.
pub fn run_seed(
    network: &Network,
    signal: &SignalSpec,
    sensors: &[SensorSpec],
    seed: u64,
) -> Result<SeedRun> {
    let timeline = sample_streams(sensors, signal, seed)?;
    let steps = timeline.hold_last_steps();
    let fused = fuse_steps(network, &steps)?;
    let rows: Vec<SeriesRow> = fused
        .iter()
        .map(|step| SeriesRow::from_step(step, Some(ground_truth(step.t_s as f64, signal))))
        .collect();
    let truth: Vec<f64> = rows.iter().map(|r| r.truth.unwrap()).collect();
    let series = |pick: fn(&SeriesRow) -> f64| -> Result<f64> {
        mape(&rows.iter().map(pick).collect::<Vec<f64>>(), &truth)
    };
    let naive_mape_pct = series(|r| r.naive)?;
    let sheaf_mape_pct = series(|r| r.fused)?;
    let without_cutoff_mape_pct = series(|r| r.without_cutoff)?;

    let mut per_sensor_mape_pct = BTreeMap::new();
    for spec in sensors {
        let mut estimates = Vec::new();
        let mut truths = Vec::new();
        for event in timeline.events().iter().filter(|e| e.sensor == spec.id) {
            estimates.push(network.vertex_pm(&spec.id, &event.value)?);
            truths.push(ground_truth(event.t_s as f64, signal));
        }
        per_sensor_mape_pct.insert(spec.id.clone(), mape(&estimates, &truths)?);
    }

    Ok(SeedRun {
        outcome: SeedOutcome {
            seed,
            per_sensor_mape_pct,
            naive_mape_pct,
            sheaf_mape_pct,
            without_cutoff_mape_pct,
            improvement_pct: improvement(naive_mape_pct, sheaf_mape_pct),
        },
        rows,
    })
}

/// Aggregate scores over all seeds of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seeds: Vec<SeedOutcome>,
    pub mean_per_sensor_mape_pct: BTreeMap<String, f64>,
    pub mean_naive_mape_pct: f64,
    pub mean_sheaf_mape_pct: f64,
    pub mean_without_cutoff_mape_pct: f64,
    /// Improvement of the mean fused error over the mean naive error.
    pub mean_improvement_pct: Option<f64>,
    /// Share of seeds where fused beat naive outright.
    pub sheaf_win_rate_pct: f64,
}

/// Run every seed of the experiment (in parallel) and aggregate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.seeds.is_empty() {
        return Err(Error::Config {
            what: "experiment needs at least one seed".into(),
        });
    }
    let network = config.topology.build()?;
    let outcomes: Vec<SeedOutcome> = config
        .seeds
        .par_iter()
        .map(|&seed| Ok(run_seed(&network, &config.signal, &config.sensors, seed)?.outcome))
        .collect::<Result<_>>()?;

    let n = outcomes.len() as f64;
    let mean = |pick: fn(&SeedOutcome) -> f64| outcomes.iter().map(pick).sum::<f64>() / n;
    let mut mean_per_sensor_mape_pct = BTreeMap::new();
    for outcome in &outcomes {
        for (id, m) in &outcome.per_sensor_mape_pct {
            *mean_per_sensor_mape_pct.entry(id.clone()).or_insert(0.0) += m / n;
        }
    }
    let mean_naive_mape_pct = mean(|o| o.naive_mape_pct);
    let mean_sheaf_mape_pct = mean(|o| o.sheaf_mape_pct);
    let wins = outcomes
        .iter()
        .filter(|o| o.sheaf_mape_pct < o.naive_mape_pct)
        .count();
    Ok(ExperimentReport {
        mean_per_sensor_mape_pct,
        mean_naive_mape_pct,
        mean_sheaf_mape_pct,
        mean_without_cutoff_mape_pct: mean(|o| o.without_cutoff_mape_pct),
        mean_improvement_pct: improvement(mean_naive_mape_pct, mean_sheaf_mape_pct),
        sheaf_win_rate_pct: wins as f64 / n * 100.0,
        seeds: outcomes,
    })
}

/// Scores of a field run against a held-out reference stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceScore {
    pub reference: String,
    pub naive_mape_pct: f64,
    pub sheaf_mape_pct: f64,
    pub without_cutoff_mape_pct: f64,
    pub improvement_pct: Option<f64>,
}

/// A fused field run: per-step rows plus summary numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamReport {
    #[serde(skip_serializing)]
    pub rows: Vec<SeriesRow>,
    pub steps: usize,
    pub mean_epsilon_c: f64,
    pub mean_radius: f64,
    pub score: Option<ReferenceScore>,
}

/// Fuse recorded streams. `reference`, if given, names an extra scalar
/// stream (not a network vertex) treated as the truth: it joins the
/// hold-last timeline, and each snapshot is scored against its held value.
pub fn fuse_streams(
    network: &Network,
    streams: &BTreeMap<String, SensorStream>,
    reference: Option<&str>,
) -> Result<StreamReport> {
    let dims = network.vertex_dims();
    for vertex in dims.keys() {
        if !streams.contains_key(vertex) {
            return Err(Error::EmptyStream { id: vertex.clone() });
        }
    }
    if let Some(id) = reference {
        let stream = streams.get(id).ok_or_else(|| Error::EmptyStream {
            id: id.to_string(),
        })?;
        if dims.contains_key(id) {
            return Err(Error::SensorMismatch {
                what: format!("reference {id:?} is itself a network vertex"),
            });
        }
        if stream.readings.iter().any(|(_, v)| v.len() != 1) {
            return Err(Error::SensorMismatch {
                what: format!("reference {id:?} must be a scalar stream"),
            });
        }
    }
    for id in streams.keys() {
        if !dims.contains_key(id.as_str()) && reference != Some(id.as_str()) {
            return Err(Error::SensorMismatch {
                what: format!("stream {id:?} matches no network vertex"),
            });
        }
    }
    let timeline = crate::ingest::streams_to_timeline(streams)?;
    let steps = timeline.hold_last_steps();
    let fused = fuse_steps(network, &steps)?;
    let rows: Vec<SeriesRow> = fused
        .iter()
        .zip(&steps)
        .map(|(step, snapshot)| {
            let truth = reference.map(|id| {
                snapshot.assignment.get(id).expect("reference is held")[0]
            });
            SeriesRow::from_step(step, truth)
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = rows.len() as f64;
    let score = match reference {
        None => None,
        Some(id) => {
            let truth: Vec<f64> = rows.iter().map(|r| r.truth.unwrap()).collect();
            let col = |pick: fn(&SeriesRow) -> f64| -> Result<f64> {
                mape(&rows.iter().map(pick).collect::<Vec<f64>>(), &truth)
            };
            let naive_mape_pct = col(|r| r.naive)?;
            let sheaf_mape_pct = col(|r| r.fused)?;
            Some(ReferenceScore {
                reference: id.to_string(),
                naive_mape_pct,
                sheaf_mape_pct,
                without_cutoff_mape_pct: col(|r| r.without_cutoff)?,
                improvement_pct: improvement(naive_mape_pct, sheaf_mape_pct),
            })
        }
    };
    Ok(StreamReport {
        steps: rows.len(),
        mean_epsilon_c: rows.iter().map(|r| r.epsilon_c).sum::<f64>() / n,
        mean_radius: rows.iter().map(|r| r.radius).sum::<f64>() / n,
        rows,
        score,
    })
}

/// The full consistency picture of one instant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiltrationReport {
    pub t_s: i64,
    pub entries: Vec<FiltrationEntry>,
    pub radius: f64,
    pub cutoff: f64,
    pub selected: Vec<String>,
    pub eliminated: Vec<String>,
    pub epsilon_c: f64,
    pub value_c: f64,
    /// Landmark sweep of maximal consistent vertex sets; omitted when the
    /// network exceeds the subset-search cap.
    pub landmarks: Option<Vec<Landmark>>,
}

/// Snapshot the network at time `t_s` under hold-last-value and report its
/// filtration, selection, and (for small networks) landmark covers.
pub fn snapshot_filtration(
    network: &Network,
    streams: &BTreeMap<String, SensorStream>,
    t_s: i64,
) -> Result<FiltrationReport> {
    let dims = network.vertex_dims();
    let mut assignment = Assignment::new();
    for vertex in dims.keys() {
        let stream = streams.get(vertex).ok_or_else(|| Error::EmptyStream {
            id: vertex.clone(),
        })?;
        let held = stream
            .readings
            .iter()
            .take_while(|(t, _)| *t <= t_s)
            .last()
            .ok_or_else(|| Error::WarmUp {
                t_s,
                missing: vertex.clone(),
            })?;
        assignment.set(vertex, held.1.clone());
    }
    let mut result = network.sheaf.propagate(&assignment)?;
    result.timestamp_s = Some(t_s);
    let filtration = result.filtration();
    let selection = select_consistent(&filtration, &result)?;
    let landmarks = if dims.len() <= DEFAULT_VERTEX_CAP {
        Some(filtration_landmarks_with_cap(
            &network.sheaf,
            &assignment,
            DEFAULT_VERTEX_CAP,
        )?)
    } else {
        None
    };
    Ok(FiltrationReport {
        t_s,
        entries: filtration.entries().to_vec(),
        radius: filtration.radius(),
        cutoff: selection_cutoff(&filtration)?,
        selected: selection.faces_c,
        eliminated: selection.eliminated,
        epsilon_c: selection.epsilon_c,
        value_c: selection.value_c,
        landmarks,
    })
}
