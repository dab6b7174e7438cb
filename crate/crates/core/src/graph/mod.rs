//! Layered text-omic signaling graph.
//!
//! Nodes live on one of four layers (promoter, gene, transcript, protein).
//! Internal edges follow the central dogma between adjacent layers; PPI edges
//! connect proteins and are stored in both directions.

mod features;
mod io;

pub use features::{text_embedding, text_matrix, NodeFeatureTable};
pub use io::{parse_graph_tsv, read_graph_dir, write_graph_dir, GraphFiles};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Dense node index, `0..num_nodes`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub usize);

impl EntityId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityLayer {
    Promoter,
    Gene,
    Transcript,
    Protein,
}

impl EntityLayer {
    pub const ALL: [EntityLayer; 4] = [
        EntityLayer::Promoter,
        EntityLayer::Gene,
        EntityLayer::Transcript,
        EntityLayer::Protein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLayer::Promoter => "promoter",
            EntityLayer::Gene => "gene",
            EntityLayer::Transcript => "transcript",
            EntityLayer::Protein => "protein",
        }
    }

    /// Layer that an internal edge leaving this layer must enter.
    pub fn downstream(self) -> Option<EntityLayer> {
        match self {
            EntityLayer::Promoter => Some(EntityLayer::Gene),
            EntityLayer::Gene => Some(EntityLayer::Transcript),
            EntityLayer::Transcript => Some(EntityLayer::Protein),
            EntityLayer::Protein => None,
        }
    }
}

impl fmt::Display for EntityLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityLayer {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "promoter" | "pm" => Ok(EntityLayer::Promoter),
            "gene" | "g" => Ok(EntityLayer::Gene),
            "transcript" | "t" => Ok(EntityLayer::Transcript),
            "protein" | "p" => Ok(EntityLayer::Protein),
            other => Err(GraphError::Parse(format!("unknown layer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Internal,
    Ppi,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Internal => "internal",
            EdgeKind::Ppi => "ppi",
        }
    }
}

impl FromStr for EdgeKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "internal" | "in" => Ok(EdgeKind::Internal),
            "ppi" => Ok(EdgeKind::Ppi),
            other => Err(GraphError::Parse(format!("unknown edge kind `{other}`"))),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("duplicate {kind:?} edge {src} -> {tgt}")]
    DuplicateEdge { src: EntityId, tgt: EntityId, kind: EdgeKind },
    #[error("{kind:?} edge {src} ({src_layer}) -> {tgt} ({tgt_layer}) violates layer constraints")]
    LayerViolation {
        src: EntityId,
        tgt: EntityId,
        kind: EdgeKind,
        src_layer: EntityLayer,
        tgt_layer: EntityLayer,
    },
    #[error("edge {src} -> {tgt} references a node outside 0..{num_nodes}")]
    DanglingEndpoint { src: EntityId, tgt: EntityId, num_nodes: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(EntityId),
    #[error("seed {0} is not a protein")]
    NonProteinSeed(EntityId),
    #[error("node ids must be dense 0..M; got {0}")]
    NonDenseIds(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub layer: EntityLayer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub src: EntityId,
    pub tgt: EntityId,
    pub kind: EdgeKind,
    pub relation: String,
}

/// Permitted `(source layer, target layer, relation tag)` triple.
pub type RelationRule = (EntityLayer, EntityLayer, String);

/// Input to [`EntityGraph::build`]. PPI edges are undirected pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub whitelist: Vec<RelationRule>,
}

impl GraphSpec {
    pub fn add_node(&mut self, name: impl Into<String>, layer: EntityLayer) -> EntityId {
        self.nodes.push(NodeSpec { name: name.into(), layer });
        EntityId(self.nodes.len() - 1)
    }

    pub fn add_edge(&mut self, src: EntityId, tgt: EntityId, kind: EdgeKind, relation: impl Into<String>) {
        self.edges.push(EdgeSpec { src, tgt, kind, relation: relation.into() });
    }

    /// Whitelist covering the standard central-dogma relations and PPI.
    pub fn default_whitelist() -> Vec<RelationRule> {
        vec![
            (EntityLayer::Promoter, EntityLayer::Gene, "promotes".to_string()),
            (EntityLayer::Gene, EntityLayer::Transcript, "transcription".to_string()),
            (EntityLayer::Transcript, EntityLayer::Protein, "translation".to_string()),
            (EntityLayer::Protein, EntityLayer::Protein, "ppi".to_string()),
        ]
    }
}

/// Immutable layered graph.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityGraph {
    layers: Vec<EntityLayer>,
    names: Vec<String>,
    internal_edges: Vec<(EntityId, EntityId)>,
    ppi_edges: Vec<(EntityId, EntityId)>,
    relation: HashMap<(EntityId, EntityId), String>,
    whitelist: BTreeSet<RelationRule>,
    ppi_out: Vec<Vec<EntityId>>,
    internal_out: Vec<Vec<EntityId>>,
    name_index: HashMap<String, Vec<EntityId>>,
}

impl EntityGraph {
    /// Validates and builds a graph. PPI pairs are expanded to both
    /// directions; the same unordered pair given twice is a duplicate.
    pub fn build(spec: &GraphSpec) -> Result<Self, GraphError> {
        let m = spec.nodes.len();
        let layers: Vec<EntityLayer> = spec.nodes.iter().map(|n| n.layer).collect();
        let names: Vec<String> = spec.nodes.iter().map(|n| n.name.clone()).collect();
        let mut internal_edges = Vec::new();
        let mut ppi_edges = Vec::new();
        let mut relation: HashMap<(EntityId, EntityId), String> = HashMap::new();

        for e in &spec.edges {
            if e.src.0 >= m || e.tgt.0 >= m {
                return Err(GraphError::DanglingEndpoint { src: e.src, tgt: e.tgt, num_nodes: m });
            }
            if e.src == e.tgt {
                return Err(GraphError::SelfLoop(e.src));
            }
            let (sl, tl) = (layers[e.src.0], layers[e.tgt.0]);
            let layer_ok = match e.kind {
                EdgeKind::Internal => sl.downstream() == Some(tl),
                EdgeKind::Ppi => sl == EntityLayer::Protein && tl == EntityLayer::Protein,
            };
            if !layer_ok {
                return Err(GraphError::LayerViolation {
                    src: e.src,
                    tgt: e.tgt,
                    kind: e.kind,
                    src_layer: sl,
                    tgt_layer: tl,
                });
            }
            let duplicate = GraphError::DuplicateEdge { src: e.src, tgt: e.tgt, kind: e.kind };
            match e.kind {
                EdgeKind::Internal => {
                    if relation.contains_key(&(e.src, e.tgt)) {
                        return Err(duplicate);
                    }
                    relation.insert((e.src, e.tgt), e.relation.clone());
                    internal_edges.push((e.src, e.tgt));
                }
                EdgeKind::Ppi => {
                    if relation.contains_key(&(e.src, e.tgt)) || relation.contains_key(&(e.tgt, e.src)) {
                        return Err(duplicate);
                    }
                    relation.insert((e.src, e.tgt), e.relation.clone());
                    relation.insert((e.tgt, e.src), e.relation.clone());
                    ppi_edges.push((e.src, e.tgt));
                    ppi_edges.push((e.tgt, e.src));
                }
            }
        }

        let mut ppi_out = vec![Vec::new(); m];
        for &(s, t) in &ppi_edges {
            ppi_out[s.0].push(t);
        }
        let mut internal_out = vec![Vec::new(); m];
        for &(s, t) in &internal_edges {
            internal_out[s.0].push(t);
        }
        let mut name_index: HashMap<String, Vec<EntityId>> = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            name_index.entry(n.clone()).or_default().push(EntityId(i));
        }

        Ok(Self {
            layers,
            names,
            internal_edges,
            ppi_edges,
            relation,
            whitelist: spec.whitelist.iter().cloned().collect(),
            ppi_out,
            internal_out,
            name_index,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, id: EntityId) -> EntityLayer {
        self.layers[id.0]
    }

    pub fn layers(&self) -> &[EntityLayer] {
        &self.layers
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn internal_edges(&self) -> &[(EntityId, EntityId)] {
        &self.internal_edges
    }

    /// Directed PPI edges (each undirected pair appears twice).
    pub fn ppi_edges(&self) -> &[(EntityId, EntityId)] {
        &self.ppi_edges
    }

    /// Undirected PPI pairs in insertion order, oriented as they were added
    /// to the [`GraphSpec`].
    pub fn ppi_pairs(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.ppi_edges.iter().step_by(2).copied()
    }

    pub fn num_ppi_pairs(&self) -> usize {
        self.ppi_edges.len() / 2
    }

    pub fn ppi_neighbors(&self, id: EntityId) -> &[EntityId] {
        &self.ppi_out[id.0]
    }

    pub fn has_ppi_edge(&self, src: EntityId, tgt: EntityId) -> bool {
        self.layer_of(src) == Some(EntityLayer::Protein)
            && self.layer_of(tgt) == Some(EntityLayer::Protein)
            && self.relation.contains_key(&(src, tgt))
    }

    pub fn relation(&self, src: EntityId, tgt: EntityId) -> Option<&str> {
        self.relation.get(&(src, tgt)).map(String::as_str)
    }

    pub fn whitelist(&self) -> &BTreeSet<RelationRule> {
        &self.whitelist
    }

    pub fn proteins(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.nodes_in_layer(EntityLayer::Protein)
    }

    pub fn nodes_in_layer(&self, layer: EntityLayer) -> impl Iterator<Item = EntityId> + '_ {
        self.layers
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == layer)
            .map(|(i, _)| EntityId(i))
    }

    pub fn ids_by_name(&self, name: &str) -> &[EntityId] {
        self.name_index.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Protein reached by following internal edges downstream, if any.
    /// Proteins map to themselves.
    pub fn cognate_protein(&self, id: EntityId) -> Option<EntityId> {
        let mut cur = id;
        loop {
            if self.layers[cur.0] == EntityLayer::Protein {
                return Some(cur);
            }
            cur = *self.internal_out[cur.0].first()?;
        }
    }

    fn layer_of(&self, id: EntityId) -> Option<EntityLayer> {
        self.layers.get(id.0).copied()
    }

    /// Seeds plus every protein within `hops` PPI hops, and every PPI edge
    /// with both endpoints in that set. Nodes are returned in ascending id
    /// order; edges in storage order.
    pub fn retrieve_subgraph(
        &self,
        seeds: &[EntityId],
        hops: usize,
    ) -> Result<(Vec<EntityId>, Vec<(EntityId, EntityId)>), GraphError> {
        let mut dist: HashMap<EntityId, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for &s in seeds {
            if self.layer_of(s) != Some(EntityLayer::Protein) {
                return Err(GraphError::NonProteinSeed(s));
            }
            if dist.insert(s, 0).is_none() {
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            if d == hops {
                continue;
            }
            for &v in &self.ppi_out[u.0] {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    queue.push_back(v);
                }
            }
        }
        let mut nodes: Vec<EntityId> = dist.into_keys().collect();
        nodes.sort_unstable();
        let member: BTreeSet<EntityId> = nodes.iter().copied().collect();
        let edges = self
            .ppi_edges
            .iter()
            .copied()
            .filter(|(s, t)| member.contains(s) && member.contains(t))
            .collect();
        Ok((nodes, edges))
    }

    /// True iff `src != tgt`, the graph stores a relation `src -> tgt`, and
    /// `(layer(src), layer(tgt), relation)` is whitelisted. Out-of-range ids
    /// are never permitted.
    pub fn is_permitted_edge(&self, src: EntityId, tgt: EntityId) -> bool {
        if src == tgt {
            return false;
        }
        let (Some(sl), Some(tl)) = (self.layer_of(src), self.layer_of(tgt)) else {
            return false;
        };
        match self.relation.get(&(src, tgt)) {
            Some(rel) => self.whitelist.contains(&(sl, tl, rel.clone())),
            None => false,
        }
    }

    /// Reconstructs a [`GraphSpec`] equivalent to this graph (PPI as pairs).
    pub fn to_spec(&self) -> GraphSpec {
        let nodes = self
            .names
            .iter()
            .zip(&self.layers)
            .map(|(name, &layer)| NodeSpec { name: name.clone(), layer })
            .collect();
        let mut edges: Vec<EdgeSpec> = self
            .internal_edges
            .iter()
            .map(|&(s, t)| EdgeSpec {
                src: s,
                tgt: t,
                kind: EdgeKind::Internal,
                relation: self.relation[&(s, t)].clone(),
            })
            .collect();
        edges.extend(self.ppi_pairs().map(|(s, t)| EdgeSpec {
            src: s,
            tgt: t,
            kind: EdgeKind::Ppi,
            relation: self.relation[&(s, t)].clone(),
        }));
        GraphSpec { nodes, edges, whitelist: self.whitelist.iter().cloned().collect() }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn chain() -> (GraphSpec, [EntityId; 5]) {
        let mut s = GraphSpec { whitelist: GraphSpec::default_whitelist(), ..Default::default() };
        let pm0 = s.add_node("PM0", EntityLayer::Promoter);
        let g0 = s.add_node("G0", EntityLayer::Gene);
        let t0 = s.add_node("T0", EntityLayer::Transcript);
        let p0 = s.add_node("P0", EntityLayer::Protein);
        let p1 = s.add_node("P1", EntityLayer::Protein);
        s.add_edge(pm0, g0, EdgeKind::Internal, "promotes");
        s.add_edge(g0, t0, EdgeKind::Internal, "transcription");
        s.add_edge(t0, p0, EdgeKind::Internal, "translation");
        s.add_edge(p0, p1, EdgeKind::Ppi, "ppi");
        (s, [pm0, g0, t0, p0, p1])
    }

    #[test]
    fn minimal_central_dogma_chain() {
        let (s, [pm0, _, _, p0, p1]) = chain();
        let g = EntityGraph::build(&s).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.internal_edges().len(), 3);
        assert_eq!(g.num_ppi_pairs(), 1);
        assert_eq!(g.ppi_edges(), &[(p0, p1), (p1, p0)]);
        assert_eq!(g.cognate_protein(pm0), Some(p0));
        assert_eq!(g.cognate_protein(p1), Some(p1));
    }

    #[test]
    fn protein_into_gene_is_a_layer_violation() {
        let (mut s, [_, g0, _, p0, _]) = chain();
        s.add_edge(p0, g0, EdgeKind::Internal, "translation");
        match EntityGraph::build(&s) {
            Err(GraphError::LayerViolation { src, tgt, .. }) => assert_eq!((src, tgt), (p0, g0)),
            other => panic!("expected LayerViolation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_dangling_and_self_loops() {
        let (mut s, [_, _, _, p0, p1]) = chain();
        s.add_edge(p1, p0, EdgeKind::Ppi, "ppi");
        assert!(matches!(EntityGraph::build(&s), Err(GraphError::DuplicateEdge { .. })));

        let (mut s, [_, _, _, p0, _]) = chain();
        s.add_edge(p0, EntityId(99), EdgeKind::Ppi, "ppi");
        assert!(matches!(EntityGraph::build(&s), Err(GraphError::DanglingEndpoint { .. })));

        let (mut s, [_, _, _, p0, _]) = chain();
        s.add_edge(p0, p0, EdgeKind::Ppi, "ppi");
        assert_eq!(EntityGraph::build(&s), Err(GraphError::SelfLoop(p0)));
    }

    #[test]
    fn permitted_edges_follow_whitelist() {
        let (s, [pm0, g0, _, p0, p1]) = chain();
        let g = EntityGraph::build(&s).unwrap();
        assert!(g.is_permitted_edge(p0, p1));
        assert!(g.is_permitted_edge(p1, p0));
        assert!(!g.is_permitted_edge(p0, p0));
        assert!(g.is_permitted_edge(pm0, g0));
        assert!(!g.is_permitted_edge(g0, pm0));

        let mut s2 = s.clone();
        s2.whitelist.retain(|r| r.2 != "ppi");
        let g2 = EntityGraph::build(&s2).unwrap();
        assert!(!g2.is_permitted_edge(p0, p1));
    }

    fn path_graph(n: usize) -> EntityGraph {
        let mut s = GraphSpec { whitelist: GraphSpec::default_whitelist(), ..Default::default() };
        let ids: Vec<_> = (0..n).map(|i| s.add_node(format!("P{i}"), EntityLayer::Protein)).collect();
        for w in ids.windows(2) {
            s.add_edge(w[0], w[1], EdgeKind::Ppi, "ppi");
        }
        EntityGraph::build(&s).unwrap()
    }

    #[test]
    fn retrieval_zero_and_one_hop() {
        let g = path_graph(3);
        let (n, e) = g.retrieve_subgraph(&[EntityId(2)], 0).unwrap();
        assert_eq!(n, vec![EntityId(2)]);
        assert!(e.is_empty());
        let (n, e) = g.retrieve_subgraph(&[EntityId(0)], 1).unwrap();
        assert_eq!(n, vec![EntityId(0), EntityId(1)]);
        assert_eq!(e, vec![(EntityId(0), EntityId(1)), (EntityId(1), EntityId(0))]);
    }

    #[test]
    fn retrieval_rejects_non_protein_seed() {
        let (s, [_, g0, ..]) = chain();
        let g = EntityGraph::build(&s).unwrap();
        assert_eq!(g.retrieve_subgraph(&[g0], 1), Err(GraphError::NonProteinSeed(g0)));
    }

    pub(crate) fn random_protein_graph(n: usize, p: f64, seed: u64) -> EntityGraph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = GraphSpec { whitelist: GraphSpec::default_whitelist(), ..Default::default() };
        let ids: Vec<_> = (0..n).map(|i| s.add_node(format!("P{i}"), EntityLayer::Protein)).collect();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    s.add_edge(ids[i], ids[j], EdgeKind::Ppi, "ppi");
                }
            }
        }
        EntityGraph::build(&s).unwrap()
    }

    /// Hop distances by repeated frontier expansion over an adjacency matrix.
    fn matrix_reach(g: &EntityGraph, seeds: &[EntityId], h: usize) -> Vec<EntityId> {
        let n = g.num_nodes();
        let mut adj = vec![vec![false; n]; n];
        for &(s, t) in g.ppi_edges() {
            adj[s.0][t.0] = true;
        }
        let mut reach = vec![false; n];
        for s in seeds {
            reach[s.0] = true;
        }
        for _ in 0..h {
            let prev = reach.clone();
            for u in 0..n {
                if prev[u] {
                    for v in 0..n {
                        if adj[u][v] {
                            reach[v] = true;
                        }
                    }
                }
            }
        }
        (0..n).filter(|&i| reach[i]).map(EntityId).collect()
    }

    #[test]
    fn two_hop_retrieval_matches_matrix_oracle() {
        for seed in 0..10 {
            let g = random_protein_graph(30, 0.08, seed);
            let seeds = [EntityId(seed as usize % 30), EntityId((seed as usize * 7 + 3) % 30)];
            let (nodes, edges) = g.retrieve_subgraph(&seeds, 2).unwrap();
            assert_eq!(nodes, matrix_reach(&g, &seeds, 2));
            let expect: Vec<_> = g
                .ppi_edges()
                .iter()
                .copied()
                .filter(|(s, t)| nodes.contains(s) && nodes.contains(t))
                .collect();
            assert_eq!(edges, expect);
        }
    }

    #[test]
    fn permitted_matches_bruteforce_lookup() {
        let g = random_protein_graph(20, 0.2, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = EntityId(rng.random_range(0..20));
            let t = EntityId(rng.random_range(0..20));
            let brute = s != t
                && g.ppi_edges().contains(&(s, t))
                && g.whitelist()
                    .iter()
                    .any(|r| r.0 == EntityLayer::Protein && r.1 == EntityLayer::Protein && r.2 == "ppi");
            assert_eq!(g.is_permitted_edge(s, t), brute);
            assert_eq!(g.is_permitted_edge(s, t), g.is_permitted_edge(s, t));
        }
    }

    proptest! {
        #[test]
        fn retrieval_monotone_and_closed(seed in 0u64..500, h in 0usize..4, s0 in 0usize..25) {
            let g = random_protein_graph(25, 0.1, seed);
            let (a, ea) = g.retrieve_subgraph(&[EntityId(s0)], h).unwrap();
            let (b, _) = g.retrieve_subgraph(&[EntityId(s0)], h + 1).unwrap();
            prop_assert!(a.iter().all(|x| b.contains(x)));
            prop_assert!(ea.iter().all(|(s, t)| a.contains(s) && a.contains(t)));
        }
    }
}
