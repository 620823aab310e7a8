//! Synthetic traffic-pollution scenarios: a sinusoidal ground truth, noisy
//! sensors sampling it on their own clocks, and the hold-last-value
//! discipline that turns asynchronous streams into per-instant snapshots.
//!
//! The simulated site is a road segment whose PM2.5 concentration follows
//! a slow daily sine wave. Two kinds of instruments watch it: dust sensors
//! report the concentration directly (µg/m³), while traffic cameras report
//! vehicle counts from which a concentration can be derived — so their
//! noisy observation is pushed through [`inverse_guidebook`] to produce a
//! count pair that converts back to exactly the observed value. Noise is
//! multiplicative, zero-mean Gaussian, with the standard deviation scaled
//! by √(π/2) so that a sensor's configured percentage equals its expected
//! absolute percentage error (for half-normal |X|, E|X| = σ·√(2/π)).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::emissions::{EmissionFactorTable, VehicleCounts, FOUR_WHEELED, TWO_WHEELED};
use crate::error::{Error, Result};
use crate::sheaf::Assignment;

/// One cycle per day, in radians per second.
pub const DAILY_ANGULAR_FREQUENCY: f64 = std::f64::consts::TAU / 86_400.0;

/// Vehicle mix assumed when inverting a concentration into counts:
/// two-wheeled to four-wheeled.
pub const DEFAULT_COUNT_RATIO: (f64, f64) = (200.0, 30.0);

/// The ground-truth signal: `offset + amplitude·sin(ω·t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    pub amplitude: f64,
    pub offset: f64,
    /// Total simulated time in seconds.
    pub duration_s: u64,
    /// Radians per second; defaults to one cycle per day.
    pub angular_frequency: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            amplitude: 50.0,
            offset: 150.0,
            duration_s: 172_800,
            angular_frequency: DAILY_ANGULAR_FREQUENCY,
        }
    }
}

impl SignalSpec {
    /// Reject signals that dip below zero concentration or are otherwise
    /// malformed.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("offset", self.offset),
            ("angular_frequency", self.angular_frequency),
        ] {
            if !v.is_finite() {
                return Err(Error::Config {
                    what: format!("signal {name} must be finite, got {v}"),
                });
            }
        }
        if self.amplitude < 0.0 {
            return Err(Error::Config {
                what: format!("signal amplitude must be >= 0, got {}", self.amplitude),
            });
        }
        if self.offset < self.amplitude {
            return Err(Error::NegativeSignal {
                offset: self.offset,
                amplitude: self.amplitude,
            });
        }
        Ok(())
    }
}

/// True concentration at time `t_s`.
pub fn ground_truth(t_s: f64, signal: &SignalSpec) -> f64 {
    signal.offset + signal.amplitude * (signal.angular_frequency * t_s).sin()
}

/// What a sensor reports: concentrations directly, or vehicle counts that
/// imply one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    Camera,
    Dust,
}

/// One simulated instrument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: String,
    /// Expected absolute percentage error of a single observation.
    pub noise_pct: f64,
    /// Sampling period in seconds.
    pub period_s: u64,
    pub kind: SensorKind,
}

impl SensorSpec {
    fn validate(&self) -> Result<()> {
        if !self.noise_pct.is_finite() || self.noise_pct < 0.0 {
            return Err(Error::BadSensorSpec {
                id: self.id.clone(),
                what: format!("noise_pct must be finite and >= 0, got {}", self.noise_pct),
            });
        }
        if self.period_s == 0 {
            return Err(Error::BadSensorSpec {
                id: self.id.clone(),
                what: "period_s must be positive".into(),
            });
        }
        Ok(())
    }
}

/// The stock four-instrument network: two slow, noisy cameras and two
/// fast dust sensors of different grades.
pub fn default_network() -> Vec<SensorSpec> {
    let spec = |id: &str, noise_pct: f64, period_s: u64, kind: SensorKind| SensorSpec {
        id: id.to_string(),
        noise_pct,
        period_s,
        kind,
    };
    vec![
        spec("C1", 11.7, 600, SensorKind::Camera),
        spec("C2", 16.9, 600, SensorKind::Camera),
        spec("S1", 2.8, 15, SensorKind::Dust),
        spec("S2", 8.3, 15, SensorKind::Dust),
    ]
}

/// Vehicle counts (possibly fractional) whose derived concentration equals
/// `pm`, holding the two-wheeled : four-wheeled mix at `ratio` over a 1 km
/// segment.
pub fn inverse_guidebook(
    pm: f64,
    ratio: (f64, f64),
    factors: &EmissionFactorTable,
) -> Result<VehicleCounts> {
    if !pm.is_finite() || pm < 0.0 {
        return Err(Error::NegativePm { value: pm });
    }
    let (two, four) = ratio;
    if !two.is_finite() || !four.is_finite() || two < 0.0 || four < 0.0 {
        return Err(Error::Config {
            what: format!("count ratio components must be finite and >= 0, got ({two}, {four})"),
        });
    }
    let per_unit = two * factors.factor(TWO_WHEELED)? + four * factors.factor(FOUR_WHEELED)?;
    if per_unit <= 0.0 {
        return Err(Error::Config {
            what: "count ratio emits no mass; cannot invert a concentration".into(),
        });
    }
    let alpha = pm / per_unit;
    VehicleCounts::pair(alpha * two, alpha * four, 1.0)
}

/// One observation: a sensor's stalk value at an instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_s: i64,
    pub sensor: String,
    pub value: Vec<f64>,
}

/// A merged, time-ordered stream of observations from a fixed sensor set.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTimeline {
    sensors: Vec<String>,
    events: Vec<Event>,
}

/// A full-network snapshot: every sensor's most recent value as of `t_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStep {
    pub t_s: i64,
    pub assignment: Assignment,
    /// Sensors that actually reported at `t_s`; the rest are held values.
    pub fresh: Vec<String>,
}

impl EventTimeline {
    /// Build a timeline over `sensors`, sorting `events` by time (ties in
    /// sensor declaration order). Every event must name a known sensor.
    pub fn new(sensors: Vec<String>, events: Vec<Event>) -> Result<Self> {
        let index_of = |id: &str| -> Result<usize> {
            sensors
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::SensorMismatch {
                    what: format!("event names unknown sensor {id}"),
                })
        };
        let mut keyed: Vec<(i64, usize, Event)> = events
            .into_iter()
            .map(|e| Ok((e.t_s, index_of(&e.sensor)?, e)))
            .collect::<Result<_>>()?;
        keyed.sort_by_key(|&(t, i, _)| (t, i));
        Ok(EventTimeline {
            sensors,
            events: keyed.into_iter().map(|(_, _, e)| e).collect(),
        })
    }

    pub fn sensors(&self) -> &[String] {
        &self.sensors
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Collapse the stream into per-instant snapshots under hold-last-value:
    /// each distinct timestamp with at least one event yields a step whose
    /// assignment carries the latest value of every sensor. Instants before
    /// all sensors have reported at least once (the warm-up) are skipped.
    pub fn hold_last_steps(&self) -> Vec<TimeStep> {
        let mut held = Assignment::new();
        let mut steps = Vec::new();
        let mut i = 0;
        while i < self.events.len() {
            let t = self.events[i].t_s;
            let mut fresh = Vec::new();
            while i < self.events.len() && self.events[i].t_s == t {
                let event = &self.events[i];
                held.set(&event.sensor, event.value.clone());
                fresh.push(event.sensor.clone());
                i += 1;
            }
            if held.len() == self.sensors.len() {
                steps.push(TimeStep {
                    t_s: t,
                    assignment: held.clone(),
                    fresh,
                });
            }
        }
        steps
    }
}

/// Simulate every sensor against the signal, merging their observations
/// into one timeline. Deterministic in `seed`; each sensor draws from its
/// own RNG stream, so adding or reordering sensors never perturbs the
/// others' noise.
pub fn sample_streams(
    sensors: &[SensorSpec],
    signal: &SignalSpec,
    seed: u64,
) -> Result<EventTimeline> {
    signal.validate()?;
    for (i, spec) in sensors.iter().enumerate() {
        spec.validate()?;
        if sensors[..i].iter().any(|other| other.id == spec.id) {
            return Err(Error::BadSensorSpec {
                id: spec.id.clone(),
                what: "duplicate sensor id".into(),
            });
        }
    }
    let factors = EmissionFactorTable::default();
    let mut events = Vec::new();
    for (i, spec) in sensors.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let sigma = spec.noise_pct / 100.0 * (std::f64::consts::PI / 2.0).sqrt();
        let noise = Normal::new(0.0, sigma).expect("validated noise level");
        let mut t = spec.period_s;
        while t <= signal.duration_s {
            let truth = ground_truth(t as f64, signal);
            let observed = (truth * (1.0 + rng.sample(noise))).max(0.0);
            let value = match spec.kind {
                SensorKind::Dust => vec![observed],
                SensorKind::Camera => {
                    let counts = inverse_guidebook(observed, DEFAULT_COUNT_RATIO, &factors)?;
                    counts.in_order(&[TWO_WHEELED, FOUR_WHEELED])?
                }
            };
            events.push(Event {
                t_s: t as i64,
                sensor: spec.id.clone(),
                value,
            });
            t += spec.period_s;
        }
    }
    EventTimeline::new(sensors.iter().map(|s| s.id.clone()).collect(), events)
}
