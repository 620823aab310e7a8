//! Consistent vertex sets, filtration landmarks, and self-filtered
//! selection.
//!
//! The consistency filtration says *when* each face starts agreeing as the
//! tolerance ε grows; this module answers the complementary questions of
//! *who* agrees and *what to do about it*.
//!
//! **Who**: a vertex set `W` is ε-consistent when every non-vertex face
//! whose sensors all lie inside `W` has threshold at most ε. (Restricting
//! the sheaf to `W` keeps exactly those faces, and their lifted multisets
//! are unchanged, so the restricted radius is the max of their thresholds.)
//! [`maximal_consistent_vertex_sets`] enumerates all subsets — brute force,
//! guarded by a vertex cap — and keeps the maximal ones, which always form
//! an antichain covering every vertex (singletons are vacuously
//! consistent). [`cover_rank`] condenses a cover into one number, the size
//! of its downward closure beyond the `n + 1` sets every cover generates;
//! ranks grow from 0 (all singletons) to `2^n − (n+1)` (everyone agrees)
//! as ε sweeps the [`filtration_landmarks`].
//!
//! **What**: [`select_consistent`] drops the faces whose threshold exceeds
//! one half standard deviation above the mean threshold — the data-driven
//! cutoff — and averages the surviving faces' lifted values into a fused
//! estimate. The sheaf thereby filters its own outliers: a sensor that
//! disagrees with everyone inflates precisely the thresholds of the faces
//! it feeds, and those faces are the ones removed.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sheaf::{
    Assignment, ConsistencyFiltration, PropagationResult, Sheaf, EQUALITY_TOLERANCE,
};

/// Largest vertex count the subset search accepts unless a caller raises
/// the cap explicitly: `2^16` subsets is instant, `2^32` is not.
pub const DEFAULT_VERTEX_CAP: usize = 16;

/// A family of vertex sets over a fixed universe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexCover {
    /// All vertices, in base-DAG order.
    pub universe: Vec<String>,
    /// The sets, sorted by their vertex lists.
    pub sets: Vec<BTreeSet<String>>,
}

impl VertexCover {
    /// Universe size.
    pub fn n(&self) -> usize {
        self.universe.len()
    }
}

/// One landmark of the filtration: a tolerance at which the maximal
/// consistent sets change shape, with the cover and its rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Landmark {
    pub epsilon: f64,
    pub cover: VertexCover,
    pub rank: i64,
}

/// Outcome of the self-filtered selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistentSelection {
    /// Mean over the selected faces of each face's mean lifted value.
    pub value_c: f64,
    /// Largest threshold among the selected faces: the tolerance actually
    /// spent to call them consistent.
    pub epsilon_c: f64,
    /// Selected faces, in ascending threshold order.
    pub faces_c: Vec<String>,
    /// The cutoff that did the splitting: mean + ½·std of all thresholds.
    pub cutoff: f64,
    /// Rejected faces, in ascending threshold order.
    pub eliminated: Vec<String>,
}

/// `(support mask, threshold)` per non-vertex face, plus the vertex
/// universe, extracted from a propagation pass.
fn face_supports(sheaf: &Sheaf, result: &PropagationResult) -> (Vec<String>, Vec<(u64, f64)>) {
    let base = sheaf.base();
    let universe: Vec<String> = base
        .vertex_names()
        .into_iter()
        .map(str::to_string)
        .collect();
    let bit_of = |name: &str| -> u64 {
        1u64 << universe
            .iter()
            .position(|v| v == name)
            .expect("supports only mention level-0 nodes")
    };
    let faces = base
        .nodes()
        .iter()
        .filter(|node| !node.is_vertex())
        .map(|node| {
            let mask = node.support().iter().map(|v| bit_of(v)).fold(0, |a, b| a | b);
            let threshold = result
                .threshold(node.name())
                .expect("propagation covers every non-vertex face");
            (mask, threshold)
        })
        .collect();
    (universe, faces)
}

/// All maximal ε-consistent subsets as bitmasks over a universe of `n`
/// vertices.
fn maximal_masks(n: usize, faces: &[(u64, f64)], epsilon: f64) -> Vec<u64> {
    let total: u64 = 1 << n;
    let consistent: Vec<bool> = (0..total)
        .map(|mask| {
            faces
                .iter()
                .all(|&(support, t)| (support & !mask) != 0 || t <= epsilon)
        })
        .collect();
    (0..total)
        .filter(|&mask| {
            consistent[mask as usize]
                && (0..n).all(|b| {
                    let bit = 1u64 << b;
                    mask & bit != 0 || !consistent[(mask | bit) as usize]
                })
        })
        .collect()
}

fn masks_to_cover(universe: Vec<String>, masks: Vec<u64>) -> VertexCover {
    let mut sets: Vec<BTreeSet<String>> = masks
        .into_iter()
        .map(|mask| {
            universe
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect();
    sets.sort_by(|a, b| {
        a.iter()
            .collect::<Vec<_>>()
            .cmp(&b.iter().collect::<Vec<_>>())
    });
    VertexCover { universe, sets }
}

fn covers_at(
    sheaf: &Sheaf,
    result: &PropagationResult,
    epsilon: f64,
    cap: usize,
) -> Result<VertexCover> {
    let (universe, faces) = face_supports(sheaf, result);
    let n = universe.len();
    if n > cap {
        return Err(Error::VertexCapExceeded { n, cap });
    }
    let masks = maximal_masks(n, &faces, epsilon);
    Ok(masks_to_cover(universe, masks))
}

/// Maximal ε-consistent vertex sets of an assignment, by exhaustive subset
/// search (default vertex cap [`DEFAULT_VERTEX_CAP`]).
pub fn maximal_consistent_vertex_sets(
    sheaf: &Sheaf,
    assignment: &Assignment,
    epsilon: f64,
) -> Result<VertexCover> {
    maximal_consistent_vertex_sets_with_cap(sheaf, assignment, epsilon, DEFAULT_VERTEX_CAP)
}

/// [`maximal_consistent_vertex_sets`] with an explicit vertex cap. The
/// search touches `2^n` subsets; raising the cap is a statement that you
/// accept the cost.
pub fn maximal_consistent_vertex_sets_with_cap(
    sheaf: &Sheaf,
    assignment: &Assignment,
    epsilon: f64,
    cap: usize,
) -> Result<VertexCover> {
    let result = sheaf.propagate(assignment)?;
    covers_at(sheaf, &result, epsilon, cap)
}

/// Rank of a cover: the number of distinct nonempty, non-singleton sets in
/// its downward closure — equivalently `|↓A| − (n + 1)`, counting the empty
/// set and all `n` singletons as given. 0 for the all-singletons cover,
/// `2^n − (n + 1)` when one set holds every vertex.
pub fn cover_rank(cover: &VertexCover) -> Result<i64> {
    let n = cover.n();
    let bit_of = |name: &String| -> Result<u64> {
        cover
            .universe
            .iter()
            .position(|v| v == name)
            .map(|b| 1u64 << b)
            .ok_or_else(|| Error::UnknownVertex { id: name.clone() })
    };
    let mut down: HashSet<u64> = HashSet::new();
    down.insert(0);
    for set in &cover.sets {
        let mut mask = 0u64;
        for v in set {
            mask |= bit_of(v)?;
        }
        // Standard submask walk; includes `mask` itself and the empty set.
        let mut sub = mask;
        loop {
            down.insert(sub);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
    }
    Ok(down.len() as i64 - (n as i64 + 1))
}

/// The filtration's landmark tolerances — 0 plus every distinct face
/// threshold (merged within [`EQUALITY_TOLERANCE`]) — each with its maximal
/// consistent cover and rank. Covers only change shape at these values, so
/// the list is a complete description of the sweep.
pub fn filtration_landmarks(sheaf: &Sheaf, assignment: &Assignment) -> Result<Vec<Landmark>> {
    filtration_landmarks_with_cap(sheaf, assignment, DEFAULT_VERTEX_CAP)
}

/// [`filtration_landmarks`] with an explicit vertex cap.
pub fn filtration_landmarks_with_cap(
    sheaf: &Sheaf,
    assignment: &Assignment,
    cap: usize,
) -> Result<Vec<Landmark>> {
    let result = sheaf.propagate(assignment)?;
    let mut thresholds: Vec<f64> = result.thresholds().values().copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("thresholds are finite"));
    let mut epsilons = vec![0.0];
    for t in thresholds {
        if t - epsilons.last().unwrap() > EQUALITY_TOLERANCE {
            epsilons.push(t);
        }
    }
    epsilons
        .into_iter()
        .map(|epsilon| {
            let cover = covers_at(sheaf, &result, epsilon, cap)?;
            let rank = cover_rank(&cover)?;
            Ok(Landmark {
                epsilon,
                cover,
                rank,
            })
        })
        .collect()
}

/// The data-driven selection cutoff: mean threshold plus one half of the
/// (population) standard deviation of the thresholds.
pub fn selection_cutoff(filtration: &ConsistencyFiltration) -> Result<f64> {
    if filtration.is_empty() {
        return Err(Error::EmptyFiltration);
    }
    let eps: Vec<f64> = filtration.entries().iter().map(|e| e.epsilon).collect();
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    let var = eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(mean + 0.5 * var.sqrt())
}

/// Split a filtration at a cutoff: `(kept, eliminated)`, both in ascending
/// threshold order. Faces exactly at the cutoff are kept.
pub fn select_faces(filtration: &ConsistencyFiltration, cutoff: f64) -> (Vec<String>, Vec<String>) {
    let mut kept = Vec::new();
    let mut eliminated = Vec::new();
    for entry in filtration.entries() {
        if entry.epsilon <= cutoff {
            kept.push(entry.face.clone());
        } else {
            eliminated.push(entry.face.clone());
        }
    }
    (kept, eliminated)
}

/// Self-filtered fusion: drop the faces above the [`selection_cutoff`] and
/// average what the rest saw.
///
/// `value_c` is the unweighted mean over the selected faces of each face's
/// mean lifted value (all lifted components pooled); `epsilon_c` is the
/// largest threshold actually admitted. The cutoff sits at or above the
/// smallest threshold, so at least one face always survives.
pub fn select_consistent(
    filtration: &ConsistencyFiltration,
    result: &PropagationResult,
) -> Result<ConsistentSelection> {
    let cutoff = selection_cutoff(filtration)?;
    let (faces_c, eliminated) = select_faces(filtration, cutoff);
    let mut sum = 0.0;
    let mut epsilon_c = 0.0f64;
    for entry in filtration.entries() {
        if entry.epsilon > cutoff {
            continue;
        }
        let lifted = result
            .lifted_at(&entry.face)
            .ok_or_else(|| Error::UnknownFace {
                name: entry.face.clone(),
                context: "selection against a propagation result".into(),
            })?;
        let count: usize = lifted.iter().map(Vec::len).sum();
        let total: f64 = lifted.iter().flatten().sum();
        sum += total / count as f64;
        epsilon_c = epsilon_c.max(entry.epsilon);
    }
    Ok(ConsistentSelection {
        value_c: sum / faces_c.len() as f64,
        epsilon_c,
        faces_c,
        cutoff,
        eliminated,
    })
}
