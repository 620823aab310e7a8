//! Traffic-to-PM emission arithmetic and daily-profile alignment.
//!
//! The guidebook model turns vehicle counts into emitted particulate mass:
//! for each vehicle type `m`, `E_m = N_m · EF_m · VKT_m` grams, where `EF_m`
//! is the type's emission factor in g/km and `VKT_m` the kilometres each
//! counted vehicle is assumed to drive. Mass dilutes into a nominal box to
//! give a concentration in µg/m³:
//!
//! ```text
//! C_m = E_m · 10^6 / (VKT_m · 1000)^3
//! ```
//!
//! The default factor table carries the two road classes used throughout
//! the crate (`two-wheeled` 0.047 g/km, `four-wheeled` 0.117 g/km).
//!
//! The second half of this module aligns *daily profiles*: a 24-hour
//! vehicle-derived PM pattern `p_v` lags the pattern `p_s` seen by a dust
//! sensor downstream (transport takes hours). [`estimate_lag`] recovers the
//! lag as the shift maximizing the mean-removed Pearson correlation between
//! `p_v[0..24−ℓ]` and `p_s[ℓ..]` (truncated overlap, so no sample is
//! compared to itself wrapped around); [`base_pattern`] then splits the
//! sensor pattern into "traffic arriving `lag` hours late" plus a residual
//! base line, and [`total_pm25`] reassembles a prediction for today from
//! yesterday's base line and today's counts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vehicle type id for two-wheelers (motorbikes, scooters).
pub const TWO_WHEELED: &str = "two-wheeled";
/// Vehicle type id for four-wheelers (cars, light trucks).
pub const FOUR_WHEELED: &str = "four-wheeled";

/// Emission factors in grams of PM2.5 per vehicle-kilometre, by type.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionFactorTable {
    factors: BTreeMap<String, f64>,
}

impl Default for EmissionFactorTable {
    /// The built-in two-class table: 0.047 g/km for two-wheelers,
    /// 0.117 g/km for four-wheelers.
    fn default() -> Self {
        EmissionFactorTable {
            factors: [
                (TWO_WHEELED.to_string(), 0.047),
                (FOUR_WHEELED.to_string(), 0.117),
            ]
            .into_iter()
            .collect(),
        }
    }
}

/// On-disk representation of an emission-factor file:
///
/// ```toml
/// [factors]
/// two-wheeled = 0.047
/// four-wheeled = 0.117
/// ```
#[derive(Serialize, Deserialize)]
struct EfFileRepr {
    factors: BTreeMap<String, f64>,
}

impl EmissionFactorTable {
    /// Build a table, rejecting non-positive or non-finite factors.
    pub fn new(factors: BTreeMap<String, f64>) -> Result<Self> {
        for (name, &value) in &factors {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveFactor {
                    name: name.clone(),
                    value,
                });
            }
        }
        Ok(EmissionFactorTable { factors })
    }

    /// Factor for one type; unknown types are an error rather than zero —
    /// silently dropping a vehicle class would bias every downstream mass.
    pub fn factor(&self, name: &str) -> Result<f64> {
        self.factors
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVehicleType {
                name: name.to_string(),
            })
    }

    /// All `(type, factor)` pairs, alphabetically by type.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.factors.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Parse the TOML representation.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let repr: EfFileRepr = toml::from_str(s).map_err(|e| Error::Config {
            what: format!("emission factor file: {e}"),
        })?;
        Self::new(repr.factors)
    }

    /// Serialize to the TOML representation.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&EfFileRepr {
            factors: self.factors.clone(),
        })
        .expect("a flat string-to-number map always serializes")
    }

    /// Load from a TOML file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config {
            what: format!("{}: {e}", path.display()),
        })
    }

    /// Write the TOML representation to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml_string())?)
    }
}

/// A snapshot of vehicle counts, with the per-vehicle distance assumption.
///
/// Counts are nonnegative reals, not integers: counts recovered by
/// inverting the guidebook map from a PM value are fractional, and integer
/// data loses nothing by being stored as `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleCounts {
    counts: BTreeMap<String, f64>,
    vkt_km: f64,
}

impl VehicleCounts {
    /// Build a counts snapshot; counts must be nonnegative and finite,
    /// `vkt_km` strictly positive.
    pub fn new(counts: BTreeMap<String, f64>, vkt_km: f64) -> Result<Self> {
        for (name, &value) in &counts {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeCount {
                    name: name.clone(),
                    value,
                });
            }
        }
        if !(vkt_km > 0.0) || !vkt_km.is_finite() {
            return Err(Error::NonPositiveVkt { value: vkt_km });
        }
        Ok(VehicleCounts { counts, vkt_km })
    }

    /// Convenience constructor for the built-in two-class split.
    pub fn pair(two_wheeled: f64, four_wheeled: f64, vkt_km: f64) -> Result<Self> {
        Self::new(
            [
                (TWO_WHEELED.to_string(), two_wheeled),
                (FOUR_WHEELED.to_string(), four_wheeled),
            ]
            .into_iter()
            .collect(),
            vkt_km,
        )
    }

    /// Count for one type (`None` if the type was never counted).
    pub fn get(&self, name: &str) -> Option<f64> {
        self.counts.get(name).copied()
    }

    /// All `(type, count)` pairs, alphabetically by type.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Counts as a vector in a caller-chosen type order — the order used
    /// for camera stalk coordinates, which must not depend on map iteration
    /// order.
    pub fn in_order<S: AsRef<str>>(&self, types: &[S]) -> Result<Vec<f64>> {
        types
            .iter()
            .map(|t| {
                self.get(t.as_ref()).ok_or_else(|| Error::UnknownVehicleType {
                    name: t.as_ref().to_string(),
                })
            })
            .collect()
    }

    /// Kilometres each counted vehicle is assumed to drive.
    pub fn vkt_km(&self) -> f64 {
        self.vkt_km
    }
}

/// Emitted PM2.5 mass, per vehicle type and in total.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmittedMass {
    /// Grams per vehicle type.
    pub per_type: BTreeMap<String, f64>,
    /// Total grams.
    pub total_g: f64,
}

/// Emitted mass for a counts snapshot: `E_m = N_m · EF_m · VKT` per type.
/// Every counted type must have an emission factor.
pub fn emitted_mass(counts: &VehicleCounts, factors: &EmissionFactorTable) -> Result<EmittedMass> {
    let mut per_type = BTreeMap::new();
    let mut total_g = 0.0;
    for (name, n) in counts.entries() {
        let mass = n * factors.factor(name)? * counts.vkt_km();
        total_g += mass;
        per_type.insert(name.to_string(), mass);
    }
    Ok(EmittedMass { per_type, total_g })
}

/// Dilute an emitted mass into the nominal `(VKT · 1000 m)³` box:
/// micrograms per cubic metre.
pub fn concentration(mass_g: f64, vkt_km: f64) -> Result<f64> {
    if !(vkt_km > 0.0) || !vkt_km.is_finite() {
        return Err(Error::NonPositiveVkt { value: vkt_km });
    }
    let side_m = vkt_km * 1000.0;
    Ok(mass_g * 1e6 / (side_m * side_m * side_m))
}

/// Which value the guidebook map reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidebookMode {
    /// Total emitted mass in grams — the default.
    #[default]
    Mass,
    /// Diluted concentration in µg/m³.
    Concentration,
}

/// The guidebook map: counts in, one PM value out, per [`GuidebookMode`].
pub fn guidebook_value(
    counts: &VehicleCounts,
    factors: &EmissionFactorTable,
    mode: GuidebookMode,
) -> Result<f64> {
    let mass = emitted_mass(counts, factors)?.total_g;
    match mode {
        GuidebookMode::Mass => Ok(mass),
        GuidebookMode::Concentration => concentration(mass, counts.vkt_km()),
    }
}

/// What a 24-hour profile describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    /// PM derived from vehicle counts at the source.
    VehicleDerived,
    /// PM observed by a dust sensor.
    Sensor,
    /// Residual base line after removing lagged traffic.
    Base,
}

/// A 24-hour profile: one finite value per clock hour.
#[derive(Clone, Debug, PartialEq)]
pub struct DailySeries {
    kind: SeriesKind,
    hours: [f64; 24],
}

impl DailySeries {
    /// Build a profile, rejecting non-finite entries.
    pub fn new(kind: SeriesKind, hours: [f64; 24]) -> Result<Self> {
        for (hour, v) in hours.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteSeries { hour });
            }
        }
        Ok(DailySeries { kind, hours })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn hours(&self) -> &[f64; 24] {
        &self.hours
    }
}

/// Result of a lag search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LagEstimate {
    /// The maximizing shift, in whole hours.
    pub lag_hours: usize,
    /// Pearson correlation at that shift.
    pub correlation: f64,
    /// True when no shift produced a well-defined correlation (a constant
    /// profile on either side). The lag is reported as 0 in that case and
    /// should not be trusted.
    pub degenerate: bool,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Estimate how many whole hours the sensor profile lags the vehicle
/// profile.
///
/// For each candidate `ℓ ∈ 0..=max_lag_hours` the correlation between
/// `vehicle[0..24−ℓ]` and `sensor[ℓ..]` is computed on the truncated
/// overlap; the largest wins and exact ties go to the smaller lag. Shifts
/// whose overlap is constant on either side are skipped; if every shift is
/// skipped the estimate is degenerate (see [`LagEstimate::degenerate`]).
pub fn estimate_lag(
    vehicle: &DailySeries,
    sensor: &DailySeries,
    max_lag_hours: usize,
) -> Result<LagEstimate> {
    if !(1..=23).contains(&max_lag_hours) {
        return Err(Error::BadLagDomain {
            max_lag: max_lag_hours,
        });
    }
    let pv = vehicle.hours();
    let ps = sensor.hours();
    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=max_lag_hours {
        let n = 24 - lag;
        let Some(r) = pearson(&pv[..n], &ps[lag..]) else {
            continue;
        };
        match best {
            Some((_, best_r)) if r <= best_r => {}
            _ => best = Some((lag, r)),
        }
    }
    Ok(match best {
        Some((lag_hours, correlation)) => LagEstimate {
            lag_hours,
            correlation,
            degenerate: false,
        },
        None => LagEstimate {
            lag_hours: 0,
            correlation: 0.0,
            degenerate: true,
        },
    })
}

/// How to shift the vehicle profile when splitting off the base line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShiftMode {
    /// Wrap around midnight: hour `h` of the sensor sees hour
    /// `(h − lag) mod 24` of the vehicle profile (yesterday's late traffic
    /// explains the early-morning sensor reading). The default, and the
    /// mode under which [`total_pm25`] reconstructs the sensor profile
    /// exactly.
    #[default]
    Circular,
    /// No wrap: the first `lag` hours keep the sensor value unchanged
    /// (traffic contribution treated as unknown rather than wrapped).
    Truncated,
}

fn lagged_hour(hour: usize, lag_hours: usize) -> usize {
    (hour + 24 - lag_hours) % 24
}

/// Split the sensor profile into lagged traffic plus a base line:
/// `base[h] = sensor[h] − vehicle[(h − lag) mod 24]` in circular mode.
pub fn base_pattern(
    sensor: &DailySeries,
    vehicle: &DailySeries,
    lag_hours: usize,
    mode: ShiftMode,
) -> Result<DailySeries> {
    if lag_hours > 23 {
        return Err(Error::BadLag { lag: lag_hours });
    }
    let mut hours = [0.0; 24];
    for (h, slot) in hours.iter_mut().enumerate() {
        *slot = match mode {
            ShiftMode::Truncated if h < lag_hours => sensor.hours()[h],
            _ => sensor.hours()[h] - vehicle.hours()[lagged_hour(h, lag_hours)],
        };
    }
    DailySeries::new(SeriesKind::Base, hours)
}

/// Predicted total PM2.5 at `hour` today: yesterday's base line plus
/// today's vehicle-derived PM arriving `lag_hours` late (circularly).
pub fn total_pm25(
    base_prev: &DailySeries,
    vehicle_today: &DailySeries,
    lag_hours: usize,
    hour: usize,
) -> Result<f64> {
    if lag_hours > 23 {
        return Err(Error::BadLag { lag: lag_hours });
    }
    if hour > 23 {
        return Err(Error::BadHour { hour });
    }
    Ok(base_prev.hours()[hour] + vehicle_today.hours()[lagged_hour(hour, lag_hours)])
}
