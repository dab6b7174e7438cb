//! Target-QA instance files: a JSON object keyed by cell-line id.
//!
//! Fields this crate does not know about are kept in `extra` maps and
//! written back unchanged. Output is canonical: keys sorted, two-space
//! indentation, trailing newline.

use super::BenchError;
use crate::graph::{EntityGraph, EntityId};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

/// Parallel lists naming a set of entities, optionally scored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityList {
    #[serde(default)]
    pub hgnc_symbols: Vec<String>,
    #[serde(default)]
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl EntityList {
    pub fn from_ids(graph: &EntityGraph, ids: &[EntityId], scores: Option<Vec<f64>>) -> Self {
        Self {
            hgnc_symbols: ids.iter().map(|&i| graph.name(i).to_string()).collect(),
            indices: ids.iter().map(|i| i.0).collect(),
            scores,
            extra: BTreeMap::new(),
        }
    }

    pub fn ids(&self) -> Vec<EntityId> {
        self.indices.iter().map(|&i| EntityId(i)).collect()
    }

    /// `(id, score)` pairs; missing scores count as 0.
    pub fn scored(&self) -> Vec<(EntityId, f64)> {
        let scores = self.scores.as_deref().unwrap_or(&[]);
        self.indices
            .iter()
            .enumerate()
            .map(|(k, &i)| (EntityId(i), scores.get(k).copied().unwrap_or(0.0)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty() && self.hgnc_symbols.is_empty() && self.scores.is_none() && self.extra.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub disease_protein: EntityList,
    pub ppi_neighbors: EntityList,
    #[serde(default)]
    pub protein_relationships: Vec<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QaInput {
    pub top_k_gene: EntityList,
    pub top_k_transcript: EntityList,
    pub top_k_protein: EntityList,
    pub knowledge_graph: KnowledgeGraph,
    /// Scored candidates from an upstream proposer, when one exists.
    #[serde(default, skip_serializing_if = "EntityList::is_empty")]
    pub init_candidates: EntityList,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    /// Key of the instance in its file.
    #[serde(skip)]
    pub cell_line_id: String,
    pub cell_line_name: String,
    pub sample_dti_index: usize,
    pub disease: String,
    pub disease_bmgc_id: String,
    pub input: QaInput,
    pub ground_truth_answer: EntityList,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl QaInstance {
    pub fn targets(&self) -> Vec<EntityId> {
        self.ground_truth_answer.ids()
    }

    /// Checks that every id resolves in `graph`, names agree where given,
    /// and the target list is non-empty and duplicate-free.
    pub fn validate(&self, graph: &EntityGraph) -> Result<(), BenchError> {
        let id = &self.cell_line_id;
        let lists = [
            ("input.top_k_gene", &self.input.top_k_gene),
            ("input.top_k_transcript", &self.input.top_k_transcript),
            ("input.top_k_protein", &self.input.top_k_protein),
            ("input.knowledge_graph.disease_protein", &self.input.knowledge_graph.disease_protein),
            ("input.knowledge_graph.ppi_neighbors", &self.input.knowledge_graph.ppi_neighbors),
            ("input.init_candidates", &self.input.init_candidates),
            ("ground_truth_answer", &self.ground_truth_answer),
        ];
        for (path, list) in lists {
            let fail = |message: String| BenchError::SchemaViolation { path: format!("{id}.{path}"), message };
            for (k, &i) in list.indices.iter().enumerate() {
                if i >= graph.num_nodes() {
                    return Err(fail(format!("index {i} outside graph of {} nodes", graph.num_nodes())));
                }
                if let Some(name) = list.hgnc_symbols.get(k) {
                    if name != graph.name(EntityId(i)) {
                        return Err(fail(format!("symbol {name} does not match node {i}")));
                    }
                }
            }
            if !list.hgnc_symbols.is_empty() && list.hgnc_symbols.len() != list.indices.len() {
                return Err(fail("hgnc_symbols and indices differ in length".into()));
            }
        }
        let fail = |message: &str| BenchError::SchemaViolation {
            path: format!("{id}.ground_truth_answer.indices"),
            message: message.into(),
        };
        if self.ground_truth_answer.indices.is_empty() {
            return Err(fail("target list is empty"));
        }
        let mut seen = HashSet::new();
        if !self.ground_truth_answer.indices.iter().all(|i| seen.insert(i)) {
            return Err(fail("target list has duplicates"));
        }
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> BenchError {
    BenchError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Parses an instance file, reporting schema errors with their field path.
pub fn parse_instances(text: &str) -> Result<Vec<QaInstance>, BenchError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let map: BTreeMap<String, QaInstance> = serde_path_to_error::deserialize(de).map_err(|e| {
        BenchError::SchemaViolation { path: e.path().to_string(), message: e.inner().to_string() }
    })?;
    Ok(map
        .into_iter()
        .map(|(k, mut inst)| {
            inst.cell_line_id = k;
            inst
        })
        .collect())
}

pub fn instances_to_string(instances: &[QaInstance]) -> Result<String, BenchError> {
    let mut map = serde_json::Map::new();
    for inst in instances {
        let v = serde_json::to_value(inst).map_err(|e| BenchError::SchemaViolation {
            path: inst.cell_line_id.clone(),
            message: e.to_string(),
        })?;
        if map.insert(inst.cell_line_id.clone(), v).is_some() {
            return Err(BenchError::SchemaViolation {
                path: inst.cell_line_id.clone(),
                message: "duplicate cell-line id".into(),
            });
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json value serialises");
    s.push('\n');
    Ok(s)
}

pub fn read_instances(path: &Path) -> Result<Vec<QaInstance>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_instances(&text)
}

pub fn write_instances(path: &Path, instances: &[QaInstance]) -> Result<(), BenchError> {
    std::fs::write(path, instances_to_string(instances)?).map_err(|e| io_err(path, e))
}

/// Reads a file holding exactly one instance.
pub fn read_instance(path: &Path) -> Result<QaInstance, BenchError> {
    let mut all = read_instances(path)?;
    if all.len() != 1 {
        return Err(BenchError::SchemaViolation {
            path: String::new(),
            message: format!("expected one instance, found {}", all.len()),
        });
    }
    Ok(all.remove(0))
}

pub fn write_instance(path: &Path, instance: &QaInstance) -> Result<(), BenchError> {
    write_instances(path, std::slice::from_ref(instance))
}
