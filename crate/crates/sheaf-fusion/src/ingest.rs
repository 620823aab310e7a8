//! Reading sensor streams from CSV and back.
//!
//! The interchange format is one observation per row:
//!
//! ```csv
//! timestamp_s,sensor_id,v1,v2
//! 600,C1,200,30
//! 615,S1,12.4
//! ```
//!
//! `timestamp_s` is integer seconds, `sensor_id` names a vertex, and one
//! or two value columns carry the stalk coordinates (cameras report count
//! pairs, dust sensors single concentrations). The header row is optional
//! on input and recognized by its first field; an empty trailing `v2` is
//! treated as absent, so fixed-width exports from spreadsheets load
//! unchanged. Floats are written with the shortest representation that
//! round-trips, which makes write→read→write byte-stable.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulation::{Event, EventTimeline};

/// Header row written at the top of every readings file.
pub const READINGS_HEADER: [&str; 4] = ["timestamp_s", "sensor_id", "v1", "v2"];

/// One CSV row: a timestamped stalk value for one sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadingRecord {
    pub timestamp_s: i64,
    pub sensor_id: String,
    pub values: Vec<f64>,
}

/// Everything one sensor reported, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorStream {
    pub id: String,
    pub readings: Vec<(i64, Vec<f64>)>,
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let what = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        _ => Error::MalformedRow { line, what },
    }
}

/// Parse a readings file into `(line, record)` pairs.
fn read_rows(path: impl AsRef<Path>) -> Result<Vec<(u64, ReadingRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if i == 0 && record.get(0) == Some(READINGS_HEADER[0]) {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        let bad = |what: String| Error::MalformedRow { line, what };
        if record.len() < 3 || record.len() > 4 {
            return Err(bad(format!(
                "expected 3 or 4 fields (timestamp_s,sensor_id,v1[,v2]), got {}",
                record.len()
            )));
        }
        let timestamp_s: i64 = record[0]
            .parse()
            .map_err(|_| bad(format!("bad timestamp {:?}", &record[0])))?;
        let sensor_id = record[1].to_string();
        if sensor_id.is_empty() {
            return Err(bad("empty sensor id".into()));
        }
        let mut values = Vec::new();
        for field in record.iter().skip(2) {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("bad value {field:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(bad("row carries no values".into()));
        }
        rows.push((
            line,
            ReadingRecord {
                timestamp_s,
                sensor_id,
                values,
            },
        ));
    }
    Ok(rows)
}

/// Read a readings file.
pub fn read_readings(path: impl AsRef<Path>) -> Result<Vec<ReadingRecord>> {
    Ok(read_rows(path)?.into_iter().map(|(_, r)| r).collect())
}

/// Read a readings file and group it per sensor, validating against the
/// expected sensors and their stalk dimensions. Timestamps must strictly
/// increase within each sensor, and every expected sensor must appear.
pub fn read_streams(
    path: impl AsRef<Path>,
    expected: &BTreeMap<String, usize>,
) -> Result<BTreeMap<String, SensorStream>> {
    let mut streams: BTreeMap<String, SensorStream> = expected
        .keys()
        .map(|id| {
            (
                id.clone(),
                SensorStream {
                    id: id.clone(),
                    readings: Vec::new(),
                },
            )
        })
        .collect();
    for (line, record) in read_rows(path)? {
        let dim = *expected
            .get(&record.sensor_id)
            .ok_or_else(|| Error::UnknownSensor {
                id: record.sensor_id.clone(),
                line,
            })?;
        if record.values.len() != dim {
            return Err(Error::MalformedRow {
                line,
                what: format!(
                    "sensor {} carries {} values, expected {dim}",
                    record.sensor_id,
                    record.values.len()
                ),
            });
        }
        let stream = streams.get_mut(&record.sensor_id).unwrap();
        if let Some(&(last, _)) = stream.readings.last() {
            if record.timestamp_s <= last {
                return Err(Error::NonMonotoneTimestamps {
                    id: record.sensor_id.clone(),
                    line,
                });
            }
        }
        stream.readings.push((record.timestamp_s, record.values));
    }
    for (id, stream) in &streams {
        if stream.readings.is_empty() {
            return Err(Error::EmptyStream { id: id.clone() });
        }
    }
    Ok(streams)
}

/// Write a readings file. The header's `v2` column appears only when some
/// row actually has a second value.
pub fn write_readings(path: impl AsRef<Path>, records: &[ReadingRecord]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    let widest = records.iter().map(|r| r.values.len()).max().unwrap_or(1);
    writer
        .write_record(&READINGS_HEADER[..2 + widest])
        .map_err(csv_error)?;
    for r in records {
        let mut fields = vec![r.timestamp_s.to_string(), r.sensor_id.clone()];
        fields.extend(r.values.iter().map(|v| v.to_string()));
        writer.write_record(&fields).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Merge per-sensor streams into one time-ordered timeline. The sensor
/// order is the map's key order.
pub fn streams_to_timeline(streams: &BTreeMap<String, SensorStream>) -> Result<EventTimeline> {
    let sensors: Vec<String> = streams.keys().cloned().collect();
    let events = streams
        .values()
        .flat_map(|s| {
            s.readings.iter().map(|(t_s, value)| Event {
                t_s: *t_s,
                sensor: s.id.clone(),
                value: value.clone(),
            })
        })
        .collect();
    EventTimeline::new(sensors, events)
}

/// Flatten a timeline back into CSV rows, in timeline order.
pub fn timeline_to_records(timeline: &EventTimeline) -> Vec<ReadingRecord> {
    timeline
        .events()
        .iter()
        .map(|e| ReadingRecord {
            timestamp_s: e.t_s,
            sensor_id: e.sensor.clone(),
            values: e.value.clone(),
        })
        .collect()
}

/// Mean value per hour of day (0–23) for a scalar stream, folding all
/// days together. Every hour must be observed at least once.
pub fn hourly_means(stream: &SensorStream) -> Result<[f64; 24]> {
    let mut sums = [0.0f64; 24];
    let mut counts = [0usize; 24];
    for (t_s, values) in &stream.readings {
        if values.len() != 1 {
            return Err(Error::SensorMismatch {
                what: format!(
                    "hourly means need a scalar stream, but {} carries {} values",
                    stream.id,
                    values.len()
                ),
            });
        }
        let hour = (t_s.rem_euclid(86_400) / 3_600) as usize;
        sums[hour] += values[0];
        counts[hour] += 1;
    }
    let mut means = [0.0f64; 24];
    for hour in 0..24 {
        if counts[hour] == 0 {
            return Err(Error::MissingHour { hour });
        }
        means[hour] = sums[hour] / counts[hour] as f64;
    }
    Ok(means)
}
