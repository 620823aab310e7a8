//! Propagation of vertex data up the attachment DAG, and the consistency
//! structure read off from it.
//!
//! Sensors only produce data at vertices. [`Sheaf::propagate`] pushes an
//! [`Assignment`] of vertex values along every directed path of the base
//! DAG: a face receives one *lifted* value per path from a vertex into it,
//! in child-declaration order, so the same reading can appear several times
//! with different histories. The spread of that lifted multiset is the
//! face's *consistency threshold* — the smallest tolerance at which the
//! face's sensors can be said to agree. A face reached by a single path has
//! nothing to disagree with and gets threshold 0.
//!
//! Sorting faces by threshold yields the [`ConsistencyFiltration`]: the
//! order in which faces "become consistent" as the tolerance ε grows. Its
//! largest entry is the *consistency radius*, the smallest ε at which the
//! whole assignment is ε-consistent.
//!
//! Two section notions close the loop. A *global section* assigns a value
//! to every face such that every edge map sends child value to parent value
//! (within [`EQUALITY_TOLERANCE`], since these are floats). An
//! ε-*approximate section* (pseudosection) relaxes equality two ways: the
//! spread of each face's lifted multiset stays within ε, and so does the
//! spread after swapping any single lifted entry for the face's own value.
//! With face values taken as lifted means ([`PropagationResult::
//! induced_assignment`]), replacing an entry by the mean never increases
//! spread, so the second clause comes for free — but it bites for any other
//! choice of face values, which is why it is checked.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{spread, Sheaf};
use crate::error::{Error, Result};

/// Absolute tolerance under which two floating-point stalk values count as
/// equal (global-section checks, landmark deduplication, and the
/// "zero radius" test all share it).
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

/// A partial assignment of stalk values to named faces.
///
/// Propagation only reads vertex entries; section checks require full
/// coverage. Values are plain `Vec<f64>` in the face's stalk coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    values: BTreeMap<String, Vec<f64>>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set a face's value, replacing any previous one.
    pub fn set(&mut self, face: impl Into<String>, value: Vec<f64>) {
        self.values.insert(face.into(), value);
    }

    /// Set a scalar-stalk face's value.
    pub fn set_scalar(&mut self, face: impl Into<String>, value: f64) {
        self.set(face, vec![value]);
    }

    /// Builder-style [`Self::set`].
    pub fn with(mut self, face: impl Into<String>, value: Vec<f64>) -> Self {
        self.set(face, value);
        self
    }

    /// Builder-style [`Self::set_scalar`].
    pub fn with_scalar(mut self, face: impl Into<String>, value: f64) -> Self {
        self.set_scalar(face, value);
        self
    }

    pub fn get(&self, face: &str) -> Option<&[f64]> {
        self.values.get(face).map(Vec::as_slice)
    }

    /// `(face, value)` pairs in face-name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FromIterator<(String, Vec<f64>)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (String, Vec<f64>)>>(iter: T) -> Self {
        Assignment {
            values: iter.into_iter().collect(),
        }
    }
}

/// Everything produced by one propagation pass: the lifted value multisets
/// and the per-face consistency thresholds, both keyed by face name in base
/// DAG node order.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    lifted: IndexMap<String, Vec<Vec<f64>>>,
    thresholds: IndexMap<String, f64>,
    /// Event time this snapshot belongs to, if any.
    pub timestamp_s: Option<i64>,
}

impl PropagationResult {
    /// Lifted multisets for every face (vertices included, with their
    /// single own value), in node order.
    pub fn lifted(&self) -> &IndexMap<String, Vec<Vec<f64>>> {
        &self.lifted
    }

    /// The lifted multiset of one face.
    pub fn lifted_at(&self, face: &str) -> Option<&[Vec<f64>]> {
        self.lifted.get(face).map(Vec::as_slice)
    }

    /// Consistency thresholds of the non-vertex faces, in node order.
    pub fn thresholds(&self) -> &IndexMap<String, f64> {
        &self.thresholds
    }

    /// Threshold of one non-vertex face.
    pub fn threshold(&self, face: &str) -> Option<f64> {
        self.thresholds.get(face).copied()
    }

    /// The consistency radius: the largest face threshold (0 when the DAG
    /// has no non-vertex faces).
    pub fn consistency_radius(&self) -> f64 {
        self.thresholds.values().fold(0.0, |acc, &t| acc.max(t))
    }

    /// Componentwise mean of a face's lifted multiset.
    pub fn lifted_mean(&self, face: &str) -> Option<Vec<f64>> {
        let vals = self.lifted.get(face)?;
        let dim = vals.first()?.len();
        let mut mean = vec![0.0; dim];
        for v in vals {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let n = vals.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        Some(mean)
    }

    /// The full assignment induced by this propagation: every face gets the
    /// mean of its lifted multiset (a vertex's mean is its own value). This
    /// is the canonical way to extend vertex data to the faces before a
    /// section check.
    pub fn induced_assignment(&self) -> Assignment {
        self.lifted
            .keys()
            .map(|name| {
                (
                    name.clone(),
                    self.lifted_mean(name)
                        .expect("every propagated face has at least one lifted value"),
                )
            })
            .collect()
    }

    /// Faces sorted by ascending threshold (ties alphabetically).
    pub fn filtration(&self) -> ConsistencyFiltration {
        ConsistencyFiltration::from_entries(
            self.thresholds.iter().map(|(k, &v)| (k.clone(), v)),
        )
    }
}

/// One face of a consistency filtration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiltrationEntry {
    pub face: String,
    pub epsilon: f64,
}

/// Non-vertex faces ordered by the tolerance at which they become
/// consistent: ascending threshold, ties broken alphabetically so equal
/// thresholds still have one canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyFiltration {
    entries: Vec<FiltrationEntry>,
    radius: f64,
}

impl ConsistencyFiltration {
    /// Order `(face, threshold)` pairs into a filtration. The radius is the
    /// largest threshold (0 for an empty input).
    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut entries: Vec<FiltrationEntry> = entries
            .into_iter()
            .map(|(face, epsilon)| FiltrationEntry { face, epsilon })
            .collect();
        entries.sort_by(|a, b| {
            a.epsilon
                .partial_cmp(&b.epsilon)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.face.cmp(&b.face))
        });
        let radius = entries.iter().fold(0.0f64, |acc, e| acc.max(e.epsilon));
        ConsistencyFiltration { entries, radius }
    }

    pub fn entries(&self) -> &[FiltrationEntry] {
        &self.entries
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Sheaf {
    /// Push vertex data up the DAG, collecting every face's lifted multiset
    /// and threshold.
    ///
    /// Requires a finite value of the right dimension for every vertex;
    /// non-vertex entries in the assignment are ignored.
    pub fn propagate(&self, assignment: &Assignment) -> Result<PropagationResult> {
        let nodes = self.base().nodes();
        let mut lifted: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.is_vertex() {
                let value = assignment
                    .get(node.name())
                    .ok_or_else(|| Error::UncoveredVertex {
                        id: node.name().to_string(),
                    })?;
                if value.len() != self.dims()[i] {
                    return Err(Error::DimensionMismatch {
                        context: format!("value for vertex {}", node.name()),
                        expected: self.dims()[i],
                        got: value.len(),
                    });
                }
                if value.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteValue {
                        face: node.name().to_string(),
                    });
                }
                lifted.push(vec![value.to_vec()]);
            } else {
                let mut values = Vec::new();
                for (k, &child) in node.children().iter().enumerate() {
                    let map = self.edge_map(i, k);
                    for x in &lifted[child] {
                        values.push(map.apply(x)?);
                    }
                }
                lifted.push(values);
            }
        }

        let mut lifted_map = IndexMap::with_capacity(nodes.len());
        let mut thresholds = IndexMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if !node.is_vertex() {
                let t = if lifted[i].len() < 2 {
                    // A single attachment path carries no disagreement.
                    0.0
                } else {
                    spread(&lifted[i], self.options()).map_err(|e| Error::Internal {
                        what: format!("spread failed on propagated values: {e}"),
                    })?
                };
                thresholds.insert(node.name().to_string(), t);
            }
            lifted_map.insert(node.name().to_string(), std::mem::take(&mut lifted[i]));
        }
        Ok(PropagationResult {
            lifted: lifted_map,
            thresholds,
            timestamp_s: None,
        })
    }

    /// Does `assignment` cover every face and commute with every edge map
    /// (within [`EQUALITY_TOLERANCE`])?
    pub fn is_global_section(&self, assignment: &Assignment) -> Result<bool> {
        let nodes = self.base().nodes();
        for (i, node) in nodes.iter().enumerate() {
            let value = assignment
                .get(node.name())
                .ok_or_else(|| Error::PartialAssignment {
                    name: node.name().to_string(),
                })?;
            if value.len() != self.dims()[i] {
                return Err(Error::DimensionMismatch {
                    context: format!("value for face {}", node.name()),
                    expected: self.dims()[i],
                    got: value.len(),
                });
            }
        }
        for (i, node) in nodes.iter().enumerate() {
            let parent_value = assignment.get(node.name()).expect("checked above");
            for (k, &child) in node.children().iter().enumerate() {
                let child_value = assignment.get(nodes[child].name()).expect("checked above");
                let moved = self.edge_map(i, k).apply(child_value)?;
                let agrees = moved
                    .iter()
                    .zip(parent_value)
                    .all(|(a, b)| (a - b).abs() <= EQUALITY_TOLERANCE);
                if !agrees {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Is `assignment` an ε-approximate section?
    ///
    /// Clause one: every face's lifted multiset has spread at most
    /// `epsilon`. Clause two: for every non-vertex face, replacing any
    /// single lifted entry with the face's *assigned* value keeps the
    /// spread at most `epsilon`. The assignment must therefore cover the
    /// non-vertex faces as well — [`PropagationResult::induced_assignment`]
    /// is the usual source.
    pub fn is_pseudosection(&self, assignment: &Assignment, epsilon: f64) -> Result<bool> {
        let result = self.propagate(assignment)?;
        if result.thresholds.values().any(|&t| t > epsilon) {
            return Ok(false);
        }
        for (i, node) in self.base().nodes().iter().enumerate() {
            if node.is_vertex() {
                continue;
            }
            let own = assignment
                .get(node.name())
                .ok_or_else(|| Error::PartialAssignment {
                    name: node.name().to_string(),
                })?;
            if own.len() != self.dims()[i] {
                return Err(Error::DimensionMismatch {
                    context: format!("value for face {}", node.name()),
                    expected: self.dims()[i],
                    got: own.len(),
                });
            }
            let lifted = result
                .lifted_at(node.name())
                .expect("propagation covers every face");
            if lifted.len() < 2 {
                // Swapping the only entry leaves a one-element multiset,
                // whose spread is 0 by convention.
                continue;
            }
            let mut modified = lifted.to_vec();
            for j in 0..lifted.len() {
                modified[j] = own.to_vec();
                let s = spread(&modified, self.options())?;
                if s > epsilon {
                    return Ok(false);
                }
                modified[j] = lifted[j].clone();
            }
        }
        Ok(true)
    }
}
