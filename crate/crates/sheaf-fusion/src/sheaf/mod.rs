//! Sheaves of sensor data on attachment DAGs.
//!
//! A sheaf assigns to every DAG node a *stalk* — a finite-dimensional real
//! vector space holding that node's kind of data — and to every attachment
//! edge a *restriction map* sending child data into the parent's stalk. A
//! camera's stalk is a vehicle-count vector; a dust sensor's is a scalar
//! concentration; the map on a camera's outgoing edges is the guidebook
//! conversion from counts to PM, so that by the time values meet at a
//! shared face they are expressed in comparable units.
//!
//! The defining property of a sheaf of this kind is *functoriality*: any
//! two edge paths from the same node to the same ancestor must compose to
//! the same map. [`Sheaf::build`] checks dimensions exactly but cannot
//! decide map equality symbolically, so [`Sheaf::validate_functoriality`]
//! samples random stalk values through every parallel path pair and reports
//! (not fails on) deviations beyond a tolerance.
//!
//! Submodules supply the two numeric workhorses: [`spread`] measures how
//! much a multiset of stalk values disagrees, and the propagation machinery
//! in this module's sibling (`Sheaf::propagate` and friends) pushes vertex
//! data up the DAG and turns per-face disagreement into consistency
//! structure.

mod propagate;
mod spread;

pub use propagate::{
    Assignment, ConsistencyFiltration, FiltrationEntry, PropagationResult, EQUALITY_TOLERANCE,
};
pub use spread::{spread, CovarianceEstimator, SpreadConvention, SpreadOptions};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emissions::{EmissionFactorTable, GuidebookMode};
use crate::error::{Error, Result};
use crate::simplicial::AttachmentDag;

/// Default stalk unit: micrograms per cubic metre.
pub const PM_UNIT: &str = "µg/m³";

/// Stalk declaration for one face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StalkSpec {
    /// Face (node) name.
    pub face: String,
    /// Stalk dimension; must be at least 1.
    pub dim: usize,
    /// Unit of the stalk coordinates, for reporting.
    pub unit: String,
}

impl StalkSpec {
    pub fn new(face: impl Into<String>, dim: usize, unit: impl Into<String>) -> Self {
        StalkSpec {
            face: face.into(),
            dim,
            unit: unit.into(),
        }
    }

    /// A 1-dimensional PM stalk.
    pub fn scalar(face: impl Into<String>) -> Self {
        Self::new(face, 1, PM_UNIT)
    }
}

/// The guidebook conversion as a restriction map: a count vector in a fixed
/// type order goes in, one PM value (mass or concentration) comes out.
///
/// Emission factors and the distance assumption are resolved once at
/// construction, so application is a dot product.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidebookMap {
    types: Vec<String>,
    factors: EmissionFactorTable,
    mode: GuidebookMode,
    vkt_km: f64,
    weights: Vec<f64>,
    scale: f64,
}

impl GuidebookMap {
    /// Build the map for a fixed, duplicate-free type order. Every type
    /// must have an emission factor.
    pub fn new(
        types: Vec<String>,
        factors: EmissionFactorTable,
        mode: GuidebookMode,
        vkt_km: f64,
    ) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Config {
                what: "guidebook map needs at least one vehicle type".into(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &types {
            if !seen.insert(t.as_str()) {
                return Err(Error::Config {
                    what: format!("guidebook map lists vehicle type {t:?} twice"),
                });
            }
        }
        if !(vkt_km > 0.0) || !vkt_km.is_finite() {
            return Err(Error::NonPositiveVkt { value: vkt_km });
        }
        let weights = types
            .iter()
            .map(|t| Ok(factors.factor(t)? * vkt_km))
            .collect::<Result<Vec<f64>>>()?;
        let side_m = vkt_km * 1000.0;
        let scale = match mode {
            GuidebookMode::Mass => 1.0,
            GuidebookMode::Concentration => 1e6 / (side_m * side_m * side_m),
        };
        Ok(GuidebookMap {
            types,
            factors,
            mode,
            vkt_km,
            weights,
            scale,
        })
    }

    /// The built-in two-class map: `[two-wheeled, four-wheeled]` counts to
    /// emitted mass over 1 km.
    pub fn two_class_mass() -> Self {
        Self::new(
            vec![
                crate::emissions::TWO_WHEELED.to_string(),
                crate::emissions::FOUR_WHEELED.to_string(),
            ],
            EmissionFactorTable::default(),
            GuidebookMode::Mass,
            1.0,
        )
        .expect("the built-in table covers both built-in types")
    }

    /// Vehicle types, in stalk coordinate order.
    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn mode(&self) -> GuidebookMode {
        self.mode
    }

    pub fn vkt_km(&self) -> f64 {
        self.vkt_km
    }

    pub fn factors(&self) -> &EmissionFactorTable {
        &self.factors
    }

    /// Expected input dimension.
    pub fn arity(&self) -> usize {
        self.types.len()
    }

    /// Apply to a count vector in this map's type order.
    pub fn apply_counts(&self, counts: &[f64]) -> Result<f64> {
        if counts.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                context: "guidebook map input".into(),
                expected: self.arity(),
                got: counts.len(),
            });
        }
        let mass: f64 = counts
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| c * w)
            .sum();
        Ok(mass * self.scale)
    }
}

/// A restriction map on one attachment edge.
#[derive(Clone, Debug, PartialEq)]
pub enum RestrictionMap {
    /// The identity; child and parent stalks must share a dimension.
    Identity,
    /// A dense matrix, row-major: `rows × cols` maps a `cols`-dimensional
    /// child stalk into a `rows`-dimensional parent stalk.
    Linear(Vec<Vec<f64>>),
    /// The guidebook counts-to-PM conversion.
    Guidebook(GuidebookMap),
    /// Maps applied left to right. An empty chain acts as the identity.
    Composite(Vec<RestrictionMap>),
}

impl RestrictionMap {
    /// Apply to a child value, producing a parent value.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            RestrictionMap::Identity => Ok(x.to_vec()),
            RestrictionMap::Linear(rows) => rows
                .iter()
                .map(|row| {
                    if row.len() != x.len() {
                        return Err(Error::DimensionMismatch {
                            context: "linear map input".into(),
                            expected: row.len(),
                            got: x.len(),
                        });
                    }
                    Ok(row.iter().zip(x).map(|(a, b)| a * b).sum())
                })
                .collect(),
            RestrictionMap::Guidebook(gb) => Ok(vec![gb.apply_counts(x)?]),
            RestrictionMap::Composite(chain) => {
                let mut cur = x.to_vec();
                for m in chain {
                    cur = m.apply(&cur)?;
                }
                Ok(cur)
            }
        }
    }

    /// Output dimension for a given input dimension, validating shape along
    /// the way (ragged or empty matrices, arity mismatches).
    pub fn output_dim(&self, input: usize) -> Result<usize> {
        match self {
            RestrictionMap::Identity => Ok(input),
            RestrictionMap::Linear(rows) => {
                if rows.is_empty() {
                    return Err(Error::BadLinearMap {
                        what: "matrix has no rows".into(),
                    });
                }
                let width = rows[0].len();
                if width == 0 {
                    return Err(Error::BadLinearMap {
                        what: "matrix rows are empty".into(),
                    });
                }
                if rows.iter().any(|r| r.len() != width) {
                    return Err(Error::BadLinearMap {
                        what: "ragged matrix".into(),
                    });
                }
                if width != input {
                    return Err(Error::DimensionMismatch {
                        context: "linear map input".into(),
                        expected: width,
                        got: input,
                    });
                }
                Ok(rows.len())
            }
            RestrictionMap::Guidebook(gb) => {
                if input != gb.arity() {
                    return Err(Error::DimensionMismatch {
                        context: "guidebook map input".into(),
                        expected: gb.arity(),
                        got: input,
                    });
                }
                Ok(1)
            }
            RestrictionMap::Composite(chain) => {
                let mut dim = input;
                for m in chain {
                    dim = m.output_dim(dim)?;
                }
                Ok(dim)
            }
        }
    }

    /// True for the literal identity variant. (A numerically-identity
    /// matrix or an empty composite is not recognized; this is a syntactic
    /// check used when picking conversion maps out of a topology.)
    pub fn is_identity(&self) -> bool {
        matches!(self, RestrictionMap::Identity)
    }
}

/// A restriction map declaration: child face, parent face, map.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionSpec {
    pub source: String,
    pub target: String,
    pub map: RestrictionMap,
}

impl RestrictionSpec {
    pub fn new(source: impl Into<String>, target: impl Into<String>, map: RestrictionMap) -> Self {
        RestrictionSpec {
            source: source.into(),
            target: target.into(),
            map,
        }
    }
}

/// A sheaf: an attachment DAG with a stalk per node and a restriction map
/// per edge.
#[derive(Clone, Debug)]
pub struct Sheaf {
    base: AttachmentDag,
    dims: Vec<usize>,
    units: Vec<String>,
    /// `maps[parent][k]` is the map on the edge from `children[k]` to
    /// `parent`.
    maps: Vec<Vec<RestrictionMap>>,
    options: SpreadOptions,
}

impl Sheaf {
    /// Assemble a sheaf with default spread options. Faces missing from
    /// `stalks` default to scalar PM stalks; every edge must receive
    /// exactly one map, and all map shapes are checked against the stalk
    /// dimensions.
    pub fn build(
        base: AttachmentDag,
        stalks: &[StalkSpec],
        maps: Vec<RestrictionSpec>,
    ) -> Result<Self> {
        Self::build_with_options(base, stalks, maps, SpreadOptions::default())
    }

    /// [`Self::build`] with explicit spread options.
    pub fn build_with_options(
        base: AttachmentDag,
        stalks: &[StalkSpec],
        maps: Vec<RestrictionSpec>,
        options: SpreadOptions,
    ) -> Result<Self> {
        let n = base.len();
        let mut dims = vec![1usize; n];
        let mut units = vec![PM_UNIT.to_string(); n];
        let mut declared = vec![false; n];
        for s in stalks {
            let idx = base
                .node_index(&s.face)
                .ok_or_else(|| Error::UnknownFace {
                    name: s.face.clone(),
                    context: "stalk declaration".into(),
                })?;
            if declared[idx] {
                return Err(Error::DuplicateStalk {
                    name: s.face.clone(),
                });
            }
            if s.dim == 0 {
                return Err(Error::ZeroDimStalk {
                    name: s.face.clone(),
                });
            }
            declared[idx] = true;
            dims[idx] = s.dim;
            units[idx] = s.unit.clone();
        }

        let mut slots: Vec<Vec<Option<RestrictionMap>>> = base
            .nodes()
            .iter()
            .map(|node| vec![None; node.children().len()])
            .collect();
        for spec in maps {
            let ci = base
                .node_index(&spec.source)
                .ok_or_else(|| Error::UnknownFace {
                    name: spec.source.clone(),
                    context: "restriction map source".into(),
                })?;
            let pi = base
                .node_index(&spec.target)
                .ok_or_else(|| Error::UnknownFace {
                    name: spec.target.clone(),
                    context: "restriction map target".into(),
                })?;
            let pos = base.nodes()[pi]
                .children()
                .iter()
                .position(|&c| c == ci)
                .ok_or_else(|| Error::NotAnEdge {
                    source_face: spec.source.clone(),
                    target: spec.target.clone(),
                })?;
            if slots[pi][pos].is_some() {
                return Err(Error::DuplicateRestriction {
                    source_face: spec.source,
                    target: spec.target,
                });
            }
            let out = spec.map.output_dim(dims[ci])?;
            if out != dims[pi] {
                return Err(Error::DimensionMismatch {
                    context: format!("map {} -> {}", spec.source, spec.target),
                    expected: dims[pi],
                    got: out,
                });
            }
            slots[pi][pos] = Some(spec.map);
        }
        let mut built = Vec::with_capacity(n);
        for (pi, row) in slots.into_iter().enumerate() {
            let mut maps_row = Vec::with_capacity(row.len());
            for (pos, slot) in row.into_iter().enumerate() {
                match slot {
                    Some(m) => maps_row.push(m),
                    None => {
                        let child = base.nodes()[pi].children()[pos];
                        return Err(Error::MissingRestriction {
                            source_face: base.nodes()[child].name().to_string(),
                            target: base.nodes()[pi].name().to_string(),
                        });
                    }
                }
            }
            built.push(maps_row);
        }
        Ok(Sheaf {
            base,
            dims,
            units,
            maps: built,
            options,
        })
    }

    /// The constant scalar sheaf on a DAG: every stalk is 1-dimensional PM
    /// and every edge carries the identity. Infallible, and the right base
    /// case for homogeneous networks.
    pub fn with_identity_maps(base: AttachmentDag) -> Self {
        let n = base.len();
        let maps = base
            .nodes()
            .iter()
            .map(|node| vec![RestrictionMap::Identity; node.children().len()])
            .collect();
        Sheaf {
            dims: vec![1; n],
            units: vec![PM_UNIT.to_string(); n],
            maps,
            options: SpreadOptions::default(),
            base,
        }
    }

    pub fn base(&self) -> &AttachmentDag {
        &self.base
    }

    pub fn options(&self) -> SpreadOptions {
        self.options
    }

    /// Stalk dimensions, indexed like the base DAG's nodes.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Stalk dimension of a named face.
    pub fn stalk_dim(&self, face: &str) -> Option<usize> {
        self.base.node_index(face).map(|i| self.dims[i])
    }

    /// Stalk unit of a named face.
    pub fn stalk_unit(&self, face: &str) -> Option<&str> {
        self.base.node_index(face).map(|i| self.units[i].as_str())
    }

    /// The map on the edge into `parent` from its `child_pos`-th child.
    pub fn edge_map(&self, parent: usize, child_pos: usize) -> &RestrictionMap {
        &self.maps[parent][child_pos]
    }

    /// Sample random stalk values through every pair of parallel edge paths
    /// and report composites that disagree beyond `tolerance`.
    ///
    /// Deterministic (internally seeded) and report-only: a violation means
    /// the declared maps do not form a sheaf, which the caller may accept,
    /// log, or escalate. Inputs are drawn uniformly from `[0, 100)` per
    /// coordinate.
    pub fn validate_functoriality(&self, samples: usize, tolerance: f64) -> FunctorialityReport {
        let parents = self.base.parent_edges();
        let mut rng = ChaCha8Rng::seed_from_u64(0xF0C7_A117);
        let mut report = FunctorialityReport {
            samples,
            tolerance,
            checked_path_pairs: 0,
            violations: Vec::new(),
        };
        for s in 0..self.base.len() {
            // Enumerate all upward paths out of `s`, grouped by endpoint.
            let mut paths: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
            let mut stack: Vec<(usize, Vec<(usize, usize)>)> = vec![(s, Vec::new())];
            while let Some((u, path)) = stack.pop() {
                for &(p, pos) in &parents[u] {
                    let mut extended = path.clone();
                    extended.push((p, pos));
                    paths.push((p, extended.clone()));
                    stack.push((p, extended));
                }
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, (end, _)) in paths.iter().enumerate() {
                groups.entry(*end).or_default().push(i);
            }
            let multi: Vec<&Vec<usize>> = groups.values().filter(|g| g.len() > 1).collect();
            if multi.is_empty() {
                continue;
            }
            let mut deviations: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for _ in 0..samples {
                let x: Vec<f64> = (0..self.dims[s])
                    .map(|_| rng.random_range(0.0..100.0))
                    .collect();
                for group in &multi {
                    let reference = self.apply_path(&paths[group[0]].1, &x);
                    for &other in &group[1..] {
                        let value = self.apply_path(&paths[other].1, &x);
                        let dev = reference
                            .iter()
                            .zip(&value)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        let entry = deviations.entry((group[0], other)).or_insert(0.0);
                        *entry = entry.max(dev);
                    }
                }
            }
            for ((first, other), dev) in deviations {
                report.checked_path_pairs += 1;
                if dev > tolerance {
                    report.violations.push(FunctorialityViolation {
                        source: self.base.nodes()[s].name().to_string(),
                        target: self.base.nodes()[paths[first].0].name().to_string(),
                        max_deviation: dev,
                        path_a: self.path_names(s, &paths[first].1),
                        path_b: self.path_names(s, &paths[other].1),
                    });
                }
            }
        }
        report
    }

    fn apply_path(&self, edges: &[(usize, usize)], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for &(parent, pos) in edges {
            cur = self.maps[parent][pos]
                .apply(&cur)
                .expect("edge maps were dimension-checked at build time");
        }
        cur
    }

    fn path_names(&self, source: usize, edges: &[(usize, usize)]) -> Vec<String> {
        let mut names = vec![self.base.nodes()[source].name().to_string()];
        for &(parent, _) in edges {
            names.push(self.base.nodes()[parent].name().to_string());
        }
        names
    }
}

/// Outcome of [`Sheaf::validate_functoriality`].
#[derive(Clone, Debug)]
pub struct FunctorialityReport {
    /// Random inputs pushed through each path family.
    pub samples: usize,
    /// Largest accepted deviation.
    pub tolerance: f64,
    /// Parallel path pairs compared.
    pub checked_path_pairs: usize,
    /// Path pairs whose composites disagreed beyond the tolerance.
    pub violations: Vec<FunctorialityViolation>,
}

impl FunctorialityReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One disagreeing path pair: the composites out of `source` into `target`
/// along `path_a` and `path_b` differ by up to `max_deviation`.
#[derive(Clone, Debug)]
pub struct FunctorialityViolation {
    pub source: String,
    pub target: String,
    pub max_deviation: f64,
    pub path_a: Vec<String>,
    pub path_b: Vec<String>,
}
