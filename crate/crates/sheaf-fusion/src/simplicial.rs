//! Abstract simplicial complexes and their attachment DAGs.
//!
//! A sensor network is modeled as an abstract simplicial complex: vertices
//! are sensors, and a face `{v0, …, vd}` asserts that those sensors jointly
//! observe something comparable. A complex is a family of finite vertex sets
//! closed under taking subsets — if `{C1, S1}` is a face, so are `{C1}` and
//! `{S1}`.
//!
//! The *attachment DAG* of a complex has one node per face and an edge from
//! each face to every face directly attached above it (one dimension up,
//! sharing all but one vertex). Data flows along this DAG: a value observed
//! at a sensor is pushed up through every chain of attachments, and the
//! number of distinct directed paths from a vertex to a face determines how
//! many copies of that vertex's value the face sees. That multiplicity is
//! what makes the downstream consistency measures sensitive to *where* a
//! disagreement sits, not just how large it is.
//!
//! [`AttachmentDag`] can also be built directly from layered declarations
//! ([`AttachmentDag::from_layers`]) without materializing a complex first.
//! That is the form used by topology config files, where coarse faces like
//! "all cameras" are named explicitly and attach to whatever the author
//! says they attach to, as long as every child sits exactly one level down.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};

/// A face of a simplicial complex: a finite, nonempty set of vertex ids.
///
/// Vertices are stored sorted and deduplicated, so two faces are equal
/// exactly when they cover the same vertices, and the derived `Ord` gives a
/// canonical, deterministic ordering (by vertex list, lexicographically).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Face {
    vertices: Vec<String>,
}

impl Face {
    /// Build a face from any collection of vertex ids. Duplicates collapse;
    /// an empty collection is rejected.
    pub fn new<I, S>(vertices: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = vertices.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::EmptyFace);
        }
        Ok(Face { vertices: v })
    }

    /// A single-vertex face.
    pub fn vertex(id: impl Into<String>) -> Self {
        Face {
            vertices: vec![id.into()],
        }
    }

    /// The sorted vertex ids.
    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    /// Dimension = number of vertices − 1.
    pub fn dimension(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Canonical name: the sorted vertex ids joined with `,`.
    pub fn name(&self) -> String {
        self.vertices.join(",")
    }

    /// Is this a 0-dimensional face?
    pub fn is_vertex(&self) -> bool {
        self.vertices.len() == 1
    }

    /// Set inclusion: does `self` contain every vertex of `other`?
    pub fn contains(&self, other: &Face) -> bool {
        // Both sides are sorted, so a single merge walk suffices.
        let mut mine = self.vertices.iter();
        'outer: for want in &other.vertices {
            for have in mine.by_ref() {
                match have.cmp(want) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// An abstract simplicial complex: a set of faces closed under subsets.
///
/// The only constructor is [`SimplicialComplex::from_generators`], which
/// closes the generating faces downward, so closure is an invariant rather
/// than a precondition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    faces: BTreeSet<Face>,
}

impl SimplicialComplex {
    /// Close a set of generating faces under subsets.
    ///
    /// Every nonempty subset of every generator becomes a face. The closure
    /// of a size-`k` generator has `2^k − 1` faces, so this is exponential
    /// in the largest generator — fine for sensor networks, hostile to
    /// 30-vertex cliques.
    pub fn from_generators<I>(generators: I) -> Result<Self>
    where
        I: IntoIterator<Item = Face>,
    {
        let mut faces = BTreeSet::new();
        let mut any = false;
        for g in generators {
            any = true;
            for subset in g.vertices().iter().powerset() {
                if subset.is_empty() {
                    continue;
                }
                // Subsets of a sorted list come out sorted, and generators
                // are already deduplicated.
                faces.insert(Face {
                    vertices: subset.into_iter().cloned().collect(),
                });
            }
        }
        if !any {
            return Err(Error::EmptyGenerators);
        }
        Ok(SimplicialComplex { faces })
    }

    /// All faces in canonical order (by dimension is *not* guaranteed here;
    /// the order is the lexicographic `Face` order).
    pub fn faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter()
    }

    /// Faces of one dimension, in canonical order.
    pub fn faces_of_dimension(&self, dim: usize) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(move |f| f.dimension() == dim)
    }

    /// The vertex ids of the complex, sorted.
    pub fn vertex_ids(&self) -> Vec<&str> {
        self.faces
            .iter()
            .filter(|f| f.is_vertex())
            .map(|f| f.vertices[0].as_str())
            .collect()
    }

    /// Number of faces.
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    /// A complex with no faces (only reachable via [`Self::induced_subcomplex`]
    /// with an empty vertex set).
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Largest face dimension, or `None` for the empty complex.
    pub fn dimension(&self) -> Option<usize> {
        self.faces.iter().map(Face::dimension).max()
    }

    /// Membership test.
    pub fn contains(&self, face: &Face) -> bool {
        self.faces.contains(face)
    }

    /// The star of a face: every face that contains it (itself included).
    pub fn star(&self, face: &Face) -> Result<Vec<&Face>> {
        if !self.faces.contains(face) {
            return Err(Error::FaceNotInComplex { name: face.name() });
        }
        Ok(self.faces.iter().filter(|k| k.contains(face)).collect())
    }

    /// The subcomplex induced by a vertex subset: all faces whose vertices
    /// lie entirely inside `vertices`.
    ///
    /// Unknown vertices are rejected. An *empty* subset is allowed and
    /// produces the empty complex — callers that treat emptiness as
    /// meaningful (e.g. "no sensor survives at this tolerance") can check
    /// [`Self::is_empty`].
    pub fn induced_subcomplex<S: AsRef<str>>(&self, vertices: &[S]) -> Result<SimplicialComplex> {
        let known: BTreeSet<&str> = self.vertex_ids().into_iter().collect();
        let mut keep: BTreeSet<&str> = BTreeSet::new();
        for v in vertices {
            let v = v.as_ref();
            if !known.contains(v) {
                return Err(Error::UnknownVertex { id: v.to_string() });
            }
            keep.insert(v);
        }
        let faces = self
            .faces
            .iter()
            .filter(|f| f.vertices.iter().all(|v| keep.contains(v.as_str())))
            .cloned()
            .collect();
        Ok(SimplicialComplex { faces })
    }

    /// The attachment DAG of the complex: one node per face at level
    /// `dimension`, with edges from each face to every face one dimension up
    /// that contains it. Children of a node are its codimension-1 subfaces
    /// in canonical order.
    pub fn attachment_dag(&self) -> AttachmentDag {
        let mut nodes: Vec<DagNode> = Vec::with_capacity(self.faces.len());
        let mut index: HashMap<String, usize> = HashMap::with_capacity(self.faces.len());
        let max_dim = self.dimension().map_or(0, |d| d);
        for dim in 0..=max_dim {
            for face in self.faces_of_dimension(dim) {
                let children = if dim == 0 {
                    Vec::new()
                } else {
                    // All (dim-1)-subfaces exist by closure; combinations of
                    // a sorted list are generated in lexicographic order,
                    // which is exactly the canonical child order.
                    face.vertices()
                        .iter()
                        .combinations(dim)
                        .map(|sub| {
                            let name = sub.iter().map(|s| s.as_str()).join(",");
                            index[&name]
                        })
                        .collect()
                };
                let idx = nodes.len();
                index.insert(face.name(), idx);
                nodes.push(DagNode {
                    name: face.name(),
                    level: dim,
                    children,
                    support: face.vertices().iter().cloned().collect(),
                });
            }
        }
        AttachmentDag { nodes, index }
    }
}

/// A non-vertex node declaration for [`AttachmentDag::from_layers`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredFace {
    /// Node name; must be unique across vertices and faces.
    pub name: String,
    /// Names of the nodes this face attaches over. All children must sit on
    /// the same level, and the face lands one level above them.
    pub children: Vec<String>,
}

/// One node of an attachment DAG.
#[derive(Clone, Debug)]
pub struct DagNode {
    name: String,
    level: usize,
    children: Vec<usize>,
    support: BTreeSet<String>,
}

impl DagNode {
    /// Node name (canonical face name, or the declared alias).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Level in the DAG; vertices are level 0.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Child node indices, in declaration order. The order is load-bearing:
    /// it fixes the order of the lifted value multiset during propagation.
    pub fn children(&self) -> &[usize] {
        &self.children
    }

    /// The level-0 descendants (sensor ids) under this node.
    pub fn support(&self) -> &BTreeSet<String> {
        &self.support
    }

    /// Is this a level-0 node?
    pub fn is_vertex(&self) -> bool {
        self.level == 0
    }
}

/// The attachment DAG underlying a sheaf: nodes in a topologically sorted
/// order (every child index is smaller than its parent's index), with named
/// lookup.
#[derive(Clone, Debug)]
pub struct AttachmentDag {
    nodes: Vec<DagNode>,
    index: HashMap<String, usize>,
}

impl AttachmentDag {
    /// Build a DAG from explicit layers: named vertices plus face
    /// declarations in dependency order (children before parents).
    ///
    /// Levels are inferred: a face whose children are vertices sits at level
    /// 1, and so on. A face whose children span two different levels is
    /// rejected — attachment edges always climb exactly one level.
    pub fn from_layers<S: AsRef<str>>(vertices: &[S], faces: &[LayeredFace]) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::NoVertices);
        }
        let mut nodes: Vec<DagNode> = Vec::with_capacity(vertices.len() + faces.len());
        let mut index: HashMap<String, usize> = HashMap::new();
        for v in vertices {
            let name = v.as_ref().to_string();
            if index.contains_key(&name) {
                return Err(Error::DuplicateFace { name });
            }
            index.insert(name.clone(), nodes.len());
            nodes.push(DagNode {
                support: [name.clone()].into_iter().collect(),
                name,
                level: 0,
                children: Vec::new(),
            });
        }
        for face in faces {
            let name = face.name.clone();
            if index.contains_key(&name) {
                return Err(Error::DuplicateFace { name });
            }
            if face.children.is_empty() {
                return Err(Error::ChildlessFace { face: name });
            }
            let mut children = Vec::with_capacity(face.children.len());
            let mut support = BTreeSet::new();
            let mut seen = BTreeSet::new();
            for child in &face.children {
                let &ci = index.get(child).ok_or_else(|| Error::UnknownChild {
                    face: name.clone(),
                    child: child.clone(),
                })?;
                if !seen.insert(ci) {
                    return Err(Error::DuplicateChild {
                        face: name.clone(),
                        child: child.clone(),
                    });
                }
                children.push(ci);
                support.extend(nodes[ci].support.iter().cloned());
            }
            let child_levels: BTreeSet<usize> =
                children.iter().map(|&c| nodes[c].level).collect();
            if child_levels.len() > 1 {
                return Err(Error::MixedChildLevels {
                    face: name,
                    low: *child_levels.iter().next().unwrap(),
                    high: *child_levels.iter().next_back().unwrap(),
                });
            }
            let level = child_levels.into_iter().next().unwrap() + 1;
            index.insert(name.clone(), nodes.len());
            nodes.push(DagNode {
                name,
                level,
                children,
                support,
            });
        }
        Ok(AttachmentDag { nodes, index })
    }

    /// Nodes in topological order (children always precede parents).
    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    /// Index of a node by name.
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Node lookup by name.
    pub fn node(&self, name: &str) -> Option<&DagNode> {
        self.node_index(name).map(|i| &self.nodes[i])
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the DAG has no nodes. (Constructors reject this, so it only
    /// matters for code handling DAGs generically.)
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of attachment edges.
    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).sum()
    }

    /// All edges as `(child, parent)` index pairs, grouped by parent.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(p, n)| n.children.iter().map(move |&c| (c, p)))
    }

    /// Indices of the level-0 nodes, in node order.
    pub fn vertex_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_vertex())
            .map(|(i, _)| i)
    }

    /// Names of the level-0 nodes, in node order.
    pub fn vertex_names(&self) -> Vec<&str> {
        self.vertex_indices()
            .map(|i| self.nodes[i].name.as_str())
            .collect()
    }

    /// For each node, the list of `(parent index, child position)` pairs in
    /// which it appears as a child.
    pub fn parent_edges(&self) -> Vec<Vec<(usize, usize)>> {
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for (p, node) in self.nodes.iter().enumerate() {
            for (pos, &c) in node.children.iter().enumerate() {
                parents[c].push((p, pos));
            }
        }
        parents
    }

    /// Number of distinct directed paths from each vertex into each node,
    /// summed over vertices: the size of the lifted multiset the node sees
    /// during propagation. Level-0 nodes count themselves once.
    pub fn path_count(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        if n.is_vertex() {
            1
        } else {
            n.children.iter().map(|&c| self.path_count(c)).sum()
        }
    }
}
