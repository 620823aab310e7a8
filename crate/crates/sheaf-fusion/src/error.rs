//! Error type shared across the crate.
//!
//! Variants are grouped roughly by the stage that raises them: complex and
//! DAG construction, sheaf assembly, propagation, consistency analysis,
//! emissions arithmetic, simulation, ingestion, and experiment scoring.
//! [`Error::exit_code`] maps an error onto the process exit convention used
//! by the CLI: `1` for bad input or bad usage, `2` for a broken internal
//! invariant (a bug, not a user mistake).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- simplicial complexes and attachment DAGs ---
    #[error("generator set is empty; a complex needs at least one generating face")]
    EmptyGenerators,
    #[error("a face needs at least one vertex")]
    EmptyFace,
    #[error("no vertices declared")]
    NoVertices,
    #[error("face {name:?} is not part of the complex")]
    FaceNotInComplex { name: String },
    #[error("vertex {id:?} is not part of the complex")]
    UnknownVertex { id: String },
    #[error("duplicate face name {name:?}")]
    DuplicateFace { name: String },
    #[error("face {face:?} references unknown child {child:?}")]
    UnknownChild { face: String, child: String },
    #[error("face {face:?} lists child {child:?} twice")]
    DuplicateChild { face: String, child: String },
    #[error(
        "face {face:?} mixes children from levels {low} and {high}; \
         children must all sit exactly one level down"
    )]
    MixedChildLevels { face: String, low: usize, high: usize },
    #[error("face {face:?} declares no children; non-vertex faces need at least one")]
    ChildlessFace { face: String },

    // --- sheaf assembly ---
    #[error("unknown face {name:?} in {context}")]
    UnknownFace { name: String, context: String },
    #[error("stalk for {name:?} declared twice")]
    DuplicateStalk { name: String },
    #[error("stalk dimension must be at least 1 (face {name:?})")]
    ZeroDimStalk { name: String },
    #[error("{source_face:?} -> {target:?} is not an edge of the base DAG")]
    NotAnEdge { source_face: String, target: String },
    #[error("edge {source_face:?} -> {target:?} has no restriction map")]
    MissingRestriction { source_face: String, target: String },
    #[error("edge {source_face:?} -> {target:?} has more than one restriction map")]
    DuplicateRestriction { source_face: String, target: String },
    #[error("{context}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("bad linear map: {what}")]
    BadLinearMap { what: String },

    // --- propagation and sections ---
    #[error("spread needs at least two values, got {got}")]
    SpreadTooFew { got: usize },
    #[error("no value assigned to vertex {id:?}")]
    UncoveredVertex { id: String },
    #[error("value for face {face:?} is not finite")]
    NonFiniteValue { face: String },
    #[error("assignment has no value for face {name:?}")]
    PartialAssignment { name: String },

    // --- consistency analysis ---
    #[error("{n} vertices exceed the brute-force cap of {cap}; raise the cap explicitly if you mean it")]
    VertexCapExceeded { n: usize, cap: usize },
    #[error("filtration is empty; nothing to select")]
    EmptyFiltration,

    // --- emissions and daily series ---
    #[error("no emission factor for vehicle type {name:?}")]
    UnknownVehicleType { name: String },
    #[error("emission factor for {name:?} must be positive, got {value}")]
    NonPositiveFactor { name: String, value: f64 },
    #[error("vehicle count for {name:?} must be nonnegative, got {value}")]
    NegativeCount { name: String, value: f64 },
    #[error("distance driven must be positive, got {value} km")]
    NonPositiveVkt { value: f64 },
    #[error("PM value must be nonnegative, got {value}")]
    NegativePm { value: f64 },
    #[error("lag search bound must lie in 1..=23 hours, got {max_lag}")]
    BadLagDomain { max_lag: usize },
    #[error("lag must lie in 0..=23 hours, got {lag}")]
    BadLag { lag: usize },
    #[error("hour index must lie in 0..=23, got {hour}")]
    BadHour { hour: usize },
    #[error("daily series value at hour {hour} is not finite")]
    NonFiniteSeries { hour: usize },
    #[error("no samples fall in clock hour {hour}; cannot build a daily profile")]
    MissingHour { hour: usize },

    // --- simulation ---
    #[error("signal floor is negative: offset {offset} - amplitude {amplitude} < 0")]
    NegativeSignal { offset: f64, amplitude: f64 },
    #[error("sensor {id:?}: {what}")]
    BadSensorSpec { id: String, what: String },

    // --- ingestion ---
    #[error("line {line}: {what}")]
    MalformedRow { line: u64, what: String },
    #[error("unknown sensor id {id:?} (line {line})")]
    UnknownSensor { id: String, line: u64 },
    #[error("sensor {id:?}: timestamps must be strictly increasing (line {line})")]
    NonMonotoneTimestamps { id: String, line: u64 },
    #[error("sensor {id:?} has no readings")]
    EmptyStream { id: String },
    #[error("no reading from sensor {missing:?} at or before {t_s} s; the network is still warming up")]
    WarmUp { t_s: i64, missing: String },

    // --- experiment scoring ---
    #[error("estimate and truth series differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("truth value at index {index} is not positive; relative error is undefined")]
    NonPositiveTruth { index: usize },
    #[error("series is empty")]
    EmptySeries,
    #[error("streams and topology disagree: {what}")]
    SensorMismatch { what: String },

    // --- configuration and I/O ---
    #[error("invalid configuration: {what}")]
    Config { what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("internal invariant violated: {what}")]
    Internal { what: String },
}

impl Error {
    /// Process exit code for this error: `2` for internal invariant
    /// violations, `1` for everything user-facing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal { .. } => 2,
            _ => 1,
        }
    }
}
