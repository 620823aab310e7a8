//! Declarative network descriptions: a TOML-serializable topology that
//! builds into a ready-to-propagate [`Sheaf`].
//!
//! A [`TopologyConfig`] names the sensors (with their stalk dimensions and
//! units), the faces that relate them (with one restriction map per
//! child), and a guidebook section shared by every `"guidebook"` map. Its
//! [`Default`] is the stock four-sensor network: cameras `C1`/`C2` hold
//! vehicle-count pairs, dust sensors `S1`/`S2` hold concentrations, the
//! four camera–dust pairs and the two same-kind pairs are compared, and
//! two aggregation layers (`I`, `L`, then `K`) stack on top.
//!
//! [`TopologyConfig::build`] returns a [`Network`], which couples the
//! sheaf with a per-vertex recipe for expressing any vertex value in
//! µg/m³ — identity for scalar stalks, the vertex's own conversion map
//! otherwise — so callers can compare heterogeneous sensors on one scale.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emissions::{EmissionFactorTable, GuidebookMode, FOUR_WHEELED, TWO_WHEELED};
use crate::error::{Error, Result};
use crate::sheaf::{
    GuidebookMap, RestrictionMap, RestrictionSpec, Sheaf, SpreadOptions, StalkSpec, PM_UNIT,
};
use crate::simplicial::{AttachmentDag, LayeredFace};

/// One sensor vertex: a name plus the shape of what it reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDecl {
    pub name: String,
    #[serde(default = "default_stalk_dim")]
    pub stalk_dim: usize,
    #[serde(default = "default_unit")]
    pub unit: String,
}

fn default_stalk_dim() -> usize {
    1
}

fn default_unit() -> String {
    PM_UNIT.to_string()
}

/// One non-vertex face: its children and, optionally, one map per child
/// (omitted means identity everywhere).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceDecl {
    pub name: String,
    pub children: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<MapDecl>,
}

/// A restriction map, as declared: the name of a built-in (`"identity"`
/// or `"guidebook"`), an explicit matrix, or a composition applied left
/// to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapDecl {
    Named(String),
    Linear { linear: Vec<Vec<f64>> },
    Composite { composite: Vec<MapDecl> },
}

/// Settings shared by every `"guidebook"` map in the topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidebookSection {
    /// Vehicle types, in stalk coordinate order.
    pub types: Vec<String>,
    /// Emission factors in g/km, keyed by type.
    pub factors: BTreeMap<String, f64>,
    pub mode: GuidebookMode,
    pub vkt_km: f64,
}

impl Default for GuidebookSection {
    fn default() -> Self {
        GuidebookSection {
            types: vec![TWO_WHEELED.to_string(), FOUR_WHEELED.to_string()],
            factors: EmissionFactorTable::default()
                .entries()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            mode: GuidebookMode::Mass,
            vkt_km: 1.0,
        }
    }
}

/// A whole network, ready to serialize or build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default)]
    pub spread: SpreadOptions,
    #[serde(default)]
    pub guidebook: GuidebookSection,
    pub vertices: Vec<VertexDecl>,
    pub faces: Vec<FaceDecl>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        let camera = |name: &str| VertexDecl {
            name: name.to_string(),
            stalk_dim: 2,
            unit: "vehicles".to_string(),
        };
        let dust = |name: &str| VertexDecl {
            name: name.to_string(),
            stalk_dim: 1,
            unit: PM_UNIT.to_string(),
        };
        let named = |s: &str| MapDecl::Named(s.to_string());
        let face = |name: &str, children: &[&str], maps: &[&str]| FaceDecl {
            name: name.to_string(),
            children: children.iter().map(|c| c.to_string()).collect(),
            maps: maps.iter().map(|m| named(m)).collect(),
        };
        TopologyConfig {
            spread: SpreadOptions::default(),
            guidebook: GuidebookSection::default(),
            vertices: vec![camera("C1"), camera("C2"), dust("S1"), dust("S2")],
            faces: vec![
                face("CS1", &["C1", "S1"], &["guidebook", "identity"]),
                face("CS2", &["C2", "S2"], &["guidebook", "identity"]),
                face("CS3", &["C1", "S2"], &["guidebook", "identity"]),
                face("CS4", &["C2", "S1"], &["guidebook", "identity"]),
                face("C", &["C1", "C2"], &["guidebook", "guidebook"]),
                face("S", &["S1", "S2"], &[]),
                face("I", &["CS1", "CS2", "CS3", "CS4"], &[]),
                face("L", &["C", "S"], &[]),
                face("K", &["I", "L"], &[]),
            ],
        }
    }
}

impl TopologyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config {
            what: format!("bad topology: {e}"),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("topology configs serialize cleanly")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml_string())?)
    }

    /// Resolve every declaration and assemble the sheaf.
    pub fn build(&self) -> Result<Network> {
        let vertex_names: Vec<&str> = self.vertices.iter().map(|v| v.name.as_str()).collect();
        let layers: Vec<LayeredFace> = self
            .faces
            .iter()
            .map(|f| LayeredFace {
                name: f.name.clone(),
                children: f.children.clone(),
            })
            .collect();
        let dag = AttachmentDag::from_layers(&vertex_names, &layers)?;

        let guidebook = GuidebookMap::new(
            self.guidebook.types.clone(),
            EmissionFactorTable::new(self.guidebook.factors.clone())?,
            self.guidebook.mode,
            self.guidebook.vkt_km,
        )?;

        let stalks: Vec<StalkSpec> = self
            .vertices
            .iter()
            .map(|v| StalkSpec::new(&v.name, v.stalk_dim, &v.unit))
            .collect();

        let mut specs = Vec::new();
        let mut resolved: Vec<Vec<RestrictionMap>> = Vec::with_capacity(self.faces.len());
        for decl in &self.faces {
            let maps: Vec<RestrictionMap> = if decl.maps.is_empty() {
                vec![RestrictionMap::Identity; decl.children.len()]
            } else if decl.maps.len() == decl.children.len() {
                decl.maps
                    .iter()
                    .map(|m| resolve_map(m, &guidebook))
                    .collect::<Result<_>>()?
            } else {
                return Err(Error::Config {
                    what: format!(
                        "face {} declares {} maps for {} children",
                        decl.name,
                        decl.maps.len(),
                        decl.children.len()
                    ),
                });
            };
            for (child, map) in decl.children.iter().zip(&maps) {
                specs.push(RestrictionSpec::new(child, &decl.name, map.clone()));
            }
            resolved.push(maps);
        }

        let sheaf = Sheaf::build_with_options(dag, &stalks, specs, self.spread)?;

        let mut pm_maps = BTreeMap::new();
        for vertex in &self.vertices {
            let map = if vertex.stalk_dim == 1 {
                RestrictionMap::Identity
            } else {
                self.concentration_map(vertex, &resolved)?
            };
            pm_maps.insert(vertex.name.clone(), map);
        }
        Ok(Network { sheaf, pm_maps })
    }

    /// Find how a multi-dimensional vertex gets expressed as a scalar: the
    /// first declared outgoing map that lands in one dimension.
    fn concentration_map(
        &self,
        vertex: &VertexDecl,
        resolved: &[Vec<RestrictionMap>],
    ) -> Result<RestrictionMap> {
        for (decl, maps) in self.faces.iter().zip(resolved) {
            for (child, map) in decl.children.iter().zip(maps) {
                if child == &vertex.name && matches!(map.output_dim(vertex.stalk_dim), Ok(1)) {
                    return Ok(map.clone());
                }
            }
        }
        Err(Error::Config {
            what: format!(
                "vertex {} has a {}-dimensional stalk but no declared map into a scalar",
                vertex.name, vertex.stalk_dim
            ),
        })
    }
}

fn resolve_map(decl: &MapDecl, guidebook: &GuidebookMap) -> Result<RestrictionMap> {
    match decl {
        MapDecl::Named(name) => match name.as_str() {
            "identity" => Ok(RestrictionMap::Identity),
            "guidebook" => Ok(RestrictionMap::Guidebook(guidebook.clone())),
            other => Err(Error::Config {
                what: format!("unknown map name {other:?} (expected \"identity\" or \"guidebook\")"),
            }),
        },
        MapDecl::Linear { linear } => Ok(RestrictionMap::Linear(linear.clone())),
        MapDecl::Composite { composite } => Ok(RestrictionMap::Composite(
            composite
                .iter()
                .map(|m| resolve_map(m, guidebook))
                .collect::<Result<_>>()?,
        )),
    }
}

/// A built topology: the sheaf plus per-vertex conversions to µg/m³.
#[derive(Clone, Debug)]
pub struct Network {
    pub sheaf: Sheaf,
    pm_maps: BTreeMap<String, RestrictionMap>,
}

impl Network {
    /// Express one vertex's stalk value as a concentration.
    pub fn vertex_pm(&self, vertex: &str, value: &[f64]) -> Result<f64> {
        let map = self.pm_maps.get(vertex).ok_or_else(|| Error::UnknownVertex {
            id: vertex.to_string(),
        })?;
        let dim = self
            .sheaf
            .stalk_dim(vertex)
            .expect("pm_maps only holds known vertices");
        if value.len() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("value at vertex {vertex}"),
                expected: dim,
                got: value.len(),
            });
        }
        Ok(map.apply(value)?[0])
    }

    /// Stalk dimension per vertex, keyed by name.
    pub fn vertex_dims(&self) -> BTreeMap<String, usize> {
        self.pm_maps
            .keys()
            .map(|v| {
                let dim = self.sheaf.stalk_dim(v).expect("vertex is in the sheaf");
                (v.clone(), dim)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::Assignment;
    use approx::assert_relative_eq;

    #[test]
    fn default_topology_builds_the_stock_network() {
        let network = TopologyConfig::default().build().unwrap();
        let dag = network.sheaf.base();
        assert_eq!(dag.len(), 13);
        assert_eq!(dag.vertex_names(), ["C1", "C2", "S1", "S2"]);
        let k = dag.node_index("K").unwrap();
        assert_eq!(dag.path_count(k), 12);
        assert_eq!(network.sheaf.stalk_dim("C1"), Some(2));
        assert_eq!(network.sheaf.stalk_dim("S1"), Some(1));
        assert_eq!(network.sheaf.stalk_unit("C1"), Some("vehicles"));
        assert_eq!(network.sheaf.stalk_unit("K"), Some(PM_UNIT));
    }

    #[test]
    fn built_network_reproduces_known_thresholds() {
        let network = TopologyConfig::default().build().unwrap();
        let assignment = Assignment::new()
            .with("C1", vec![200.0, 30.0])
            .with("C2", vec![100.0, 0.0])
            .with_scalar("S1", 12.91)
            .with_scalar("S2", 20.0);
        let result = network.sheaf.propagate(&assignment).unwrap();
        assert_relative_eq!(
            result.consistency_radius(),
            10.818733752154177,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            result.threshold("L").unwrap(),
            6.2545610024472005,
            max_relative = 1e-12
        );
    }

    #[test]
    fn vertex_pm_converts_counts_and_passes_scalars() {
        let network = TopologyConfig::default().build().unwrap();
        assert_eq!(network.vertex_pm("C1", &[200.0, 30.0]).unwrap(), 12.91);
        assert_eq!(network.vertex_pm("C2", &[100.0, 0.0]).unwrap(), 4.7);
        assert_eq!(network.vertex_pm("S1", &[8.25]).unwrap(), 8.25);
        assert!(network.vertex_pm("S1", &[1.0, 2.0]).is_err());
        assert!(network.vertex_pm("nope", &[1.0]).is_err());
        let dims = network.vertex_dims();
        assert_eq!(dims["C1"], 2);
        assert_eq!(dims["S2"], 1);
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let config = TopologyConfig::default();
        let text = config.to_toml_string();
        let back = TopologyConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let text = r#"
            [[vertices]]
            name = "a"

            [[vertices]]
            name = "b"

            [[faces]]
            name = "ab"
            children = ["a", "b"]
        "#;
        let config = TopologyConfig::from_toml_str(text).unwrap();
        assert_eq!(config.vertices[0].stalk_dim, 1);
        assert_eq!(config.vertices[0].unit, PM_UNIT);
        let network = config.build().unwrap();
        let result = network
            .sheaf
            .propagate(
                &Assignment::new()
                    .with_scalar("a", 1.0)
                    .with_scalar("b", 3.0),
            )
            .unwrap();
        assert_relative_eq!(
            result.threshold("ab").unwrap(),
            2.0_f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn explicit_maps_parse_in_every_shape() {
        let text = r#"
            [[vertices]]
            name = "cam"
            stalk_dim = 2
            unit = "vehicles"

            [[vertices]]
            name = "pm"

            [[faces]]
            name = "pair"
            children = ["cam", "pm"]
            maps = [
                { composite = ["guidebook", { linear = [[2.0]] }] },
                { linear = [[2.0]] },
            ]
        "#;
        let network = TopologyConfig::from_toml_str(text).unwrap().build().unwrap();
        let result = network
            .sheaf
            .propagate(
                &Assignment::new()
                    .with("cam", vec![100.0, 0.0])
                    .with_scalar("pm", 4.7),
            )
            .unwrap();
        // Both routes double their input, so the pair agrees exactly.
        assert_eq!(result.threshold("pair"), Some(0.0));
        assert_eq!(result.lifted_at("pair").unwrap()[0], [9.4]);
    }

    #[test]
    fn config_errors_are_caught() {
        let wrong_arity = TopologyConfig {
            faces: {
                let mut faces = TopologyConfig::default().faces;
                faces[0].maps.pop();
                faces
            },
            ..TopologyConfig::default()
        };
        assert!(matches!(
            wrong_arity.build(),
            Err(Error::Config { .. })
        ));

        let unknown_name = TopologyConfig {
            faces: {
                let mut faces = TopologyConfig::default().faces;
                faces[0].maps[0] = MapDecl::Named("teleport".into());
                faces
            },
            ..TopologyConfig::default()
        };
        assert!(matches!(unknown_name.build(), Err(Error::Config { .. })));

        // A wide stalk with no outgoing map at all cannot be expressed as
        // a concentration. (Any attached vertex lands in some scalar face
        // stalk eventually, so only an isolated one can be stranded.)
        let stranded = TopologyConfig {
            vertices: vec![VertexDecl {
                name: "cam".into(),
                stalk_dim: 2,
                unit: "vehicles".into(),
            }],
            faces: vec![],
            ..TopologyConfig::default()
        };
        // The sheaf itself builds; picking the µg/m³ view is what fails.
        assert!(matches!(stranded.build(), Err(Error::Config { .. })));
    }

    #[test]
    fn spread_options_flow_into_the_sheaf() {
        let text = r#"
            [spread]
            convention = "mean-trace"
            estimator = "population"

            [[vertices]]
            name = "a"

            [[vertices]]
            name = "b"

            [[faces]]
            name = "ab"
            children = ["a", "b"]
        "#;
        let network = TopologyConfig::from_toml_str(text).unwrap().build().unwrap();
        let result = network
            .sheaf
            .propagate(
                &Assignment::new()
                    .with_scalar("a", 0.0)
                    .with_scalar("b", 2.0),
            )
            .unwrap();
        // Population variance 1, divided again by n = 2, square-rooted.
        assert_relative_eq!(
            result.threshold("ab").unwrap(),
            0.5_f64.sqrt(),
            max_relative = 1e-12
        );
    }
}
