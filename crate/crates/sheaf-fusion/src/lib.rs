//! Sheaf-based fusion for heterogeneous sensor networks.
//!
//! A network of dissimilar instruments — traffic cameras counting
//! vehicles, dust sensors reading µg/m³ — can be compared only after
//! saying *how* readings translate between units and *where* they are
//! supposed to agree. This crate encodes both statements as a sheaf: an
//! attachment DAG built over the sensors ([`simplicial`]), a data space
//! (stalk) per face, and a restriction map per edge ([`sheaf`]). From
//! there everything is mechanical:
//!
//! * [`Sheaf::propagate`](sheaf::Sheaf::propagate) pushes sensor values
//!   along every path of the DAG and measures, per face, the spread of
//!   what arrives — the face's consistency threshold;
//! * the sorted thresholds form a consistency filtration whose maximum is
//!   the consistency radius of the snapshot;
//! * [`consistency`] turns thresholds into maximal consistent sensor
//!   sets, cover ranks, and a self-filtering fusion rule that discards
//!   faces more than half a standard deviation above the mean threshold;
//! * [`emissions`], [`simulation`], [`topology`], [`ingest`], and
//!   [`experiment`] supply the traffic-pollution domain: count-to-PM2.5
//!   conversion, synthetic scenarios, declarative TOML networks, CSV
//!   stream I/O, and scored end-to-end runs.
//!
//! The stock four-sensor network fuses two noisy cameras with two dust
//! sensors and beats the naive average by letting disagreement, measured
//! sheaf-theoretically, decide whom to trust:
//!
//! ```
//! use sheaf_fusion::{Assignment, TopologyConfig};
//!
//! let network = TopologyConfig::default().build()?;
//! let assignment = Assignment::new()
//!     .with("C1", vec![200.0, 30.0]) // two- and four-wheeler counts
//!     .with("C2", vec![100.0, 0.0])
//!     .with_scalar("S1", 12.91) // µg/m³
//!     .with_scalar("S2", 20.0);
//! let result = network.sheaf.propagate(&assignment)?;
//!
//! // C1 and S1 agree exactly; C2 and S2 do not.
//! assert_eq!(result.threshold("CS1"), Some(0.0));
//! assert!(result.threshold("CS2").unwrap() > 10.0);
//! assert!(result.consistency_radius() > 10.0);
//! # Ok::<(), sheaf_fusion::Error>(())
//! ```

pub mod consistency;
pub mod emissions;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod sheaf;
pub mod simplicial;
pub mod simulation;
pub mod topology;

pub use error::{Error, Result};
pub use sheaf::{Assignment, ConsistencyFiltration, PropagationResult, Sheaf};
pub use simplicial::{AttachmentDag, SimplicialComplex};
pub use topology::{Network, TopologyConfig};
