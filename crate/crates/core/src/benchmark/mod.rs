//! Synthetic Target-QA benchmark with a planted class-discriminative motif.
//!
//! Node layout of the generated graph: promoters, genes, transcripts, then
//! proteins. Chain `i` links promoter, gene and transcript `i` to protein
//! `i`. Proteins are split into communities with dense intra-community PPI
//! and sparse links between communities; the motif edges are always present
//! and no other PPI edge joins two motif proteins.
//!
//! Edge probabilities are degree-corrected: each protein draws a standard
//! normal propensity `z` and pair probabilities scale with
//! `exp(degree_spread * (z_a + z_b))`.
//!
//! Every sample draws one latent factor per community. Proteins, and the
//! chain entities of proteins, carry
//! `hub_expression * z + coexpression * factor + noise`, which makes PPI
//! structure visible in the omic profiles. Class-1 samples add `signal` to
//! every entity incident to the motif.
//!
//! All randomness comes from a ChaCha8 stream seeded with the spec's seed.

mod instance;

pub use instance::{
    instances_to_string, parse_instances, read_instance, read_instances, write_instance, write_instances, EntityList,
    KnowledgeGraph, QaInput, QaInstance,
};

use crate::graph::{EdgeKind, EntityGraph, EntityId, EntityLayer, GraphError, GraphSpec};
use crate::pretrain::{PretrainError, SampleSet};
use crate::seed;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("infeasible synthetic spec: {0}")]
    SpecInfeasible(String),
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Samples(#[from] PretrainError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub proteins: usize,
    /// Number of promoter/gene/transcript chains, attached to proteins `0..chains`.
    pub chains: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Motif edges over protein-local indices.
    pub motif: Vec<(usize, usize)>,
    pub signal: f64,
    pub noise: f64,
    pub coexpression: f64,
    /// Log-scale spread of per-protein interaction propensities.
    pub degree_spread: f64,
    /// Weight of a protein's propensity in its baseline expression.
    pub hub_expression: f64,
    /// Sample count per class; index = class label.
    pub samples_per_class: Vec<usize>,
    pub train_fraction: f64,
    pub gamma: usize,
    pub k: usize,
    /// Disease proteins per instance, of which `motif_disease` lie on the motif.
    pub disease_proteins: usize,
    pub motif_disease: usize,
    pub hops: usize,
    pub text_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            proteins: 60,
            chains: 20,
            communities: 4,
            p_in: 0.25,
            p_out: 0.01,
            motif: vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)],
            signal: 3.0,
            noise: 1.0,
            coexpression: 0.8,
            degree_spread: 1.2,
            hub_expression: 1.0,
            samples_per_class: vec![50, 150],
            train_fraction: 0.8,
            gamma: 10,
            k: 10,
            disease_proteins: 5,
            motif_disease: 2,
            hops: 1,
            text_dim: 4,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn motif_proteins(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.motif.iter().flat_map(|&(a, b)| [a, b]).collect();
        set.into_iter().collect()
    }

    /// Global id of protein `i` in the generated graph.
    pub fn protein_id(&self, i: usize) -> EntityId {
        EntityId(3 * self.chains + i)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::SpecInfeasible(m));
        if self.proteins < 2 {
            return bad("need at least two proteins".into());
        }
        if self.chains > self.proteins {
            return bad(format!("{} chains exceed {} proteins", self.chains, self.proteins));
        }
        if self.communities == 0 || self.communities > self.proteins {
            return bad("community count must lie in 1..=proteins".into());
        }
        for p in [self.p_in, self.p_out, self.train_fraction] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.motif.is_empty() {
            return bad("motif has no edges".into());
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.motif {
            if a >= self.proteins || b >= self.proteins || a == b {
                return bad(format!("motif edge ({a}, {b}) is not a protein pair"));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return bad(format!("motif edge ({a}, {b}) repeated"));
            }
        }
        if self.gamma == 0 || self.gamma > self.proteins {
            return bad(format!("gamma {} must lie in 1..={}", self.gamma, self.proteins));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.samples_per_class.len() < 2 || self.samples_per_class.contains(&0) {
            return bad("need at least two classes with samples".into());
        }
        let n_motif = self.motif_proteins().len();
        if self.motif_disease > self.disease_proteins
            || self.motif_disease > n_motif
            || self.disease_proteins - self.motif_disease > self.proteins - n_motif
        {
            return bad("disease protein counts do not fit the protein layer".into());
        }
        if !(self.noise >= 0.0 && self.signal.is_finite() && self.coexpression.is_finite()) {
            return bad("signal, noise and coexpression must be finite, noise non-negative".into());
        }
        Ok(())
    }

    pub fn community(&self, protein: usize) -> usize {
        protein % self.communities
    }
}

/// Everything [`synth_benchmark`] produces.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub graph: EntityGraph,
    pub samples: SampleSet,
    pub instances: Vec<QaInstance>,
    /// Motif edges as global id pairs.
    pub motif_edges: Vec<(EntityId, EntityId)>,
}

/// Builds the graph; also returns each protein's standardised propensity.
fn build_graph(spec: &SynthSpec, rng: &mut seed::Rng) -> Result<(EntityGraph, Vec<f64>), BenchError> {
    let mut g = GraphSpec { whitelist: GraphSpec::default_whitelist(), ..Default::default() };
    let c = spec.chains;
    for i in 0..c {
        g.add_node(format!("PROM{i}"), EntityLayer::Promoter);
    }
    for i in 0..c {
        g.add_node(format!("GENE{i}"), EntityLayer::Gene);
    }
    for i in 0..c {
        g.add_node(format!("TX{i}"), EntityLayer::Transcript);
    }
    for i in 0..spec.proteins {
        g.add_node(format!("PROT{i}"), EntityLayer::Protein);
    }
    for i in 0..c {
        g.add_edge(EntityId(i), EntityId(c + i), EdgeKind::Internal, "promotes");
        g.add_edge(EntityId(c + i), EntityId(2 * c + i), EdgeKind::Internal, "transcription");
        g.add_edge(EntityId(2 * c + i), spec.protein_id(i), EdgeKind::Internal, "translation");
    }
    let latent: Vec<f64> = (0..spec.proteins).map(|_| StandardNormal.sample(rng)).collect();
    let weight: Vec<f64> = latent.iter().map(|z| (spec.degree_spread * z).exp()).collect();
    let mean_w = weight.iter().sum::<f64>() / weight.len() as f64;
    let motif_nodes: BTreeSet<usize> = spec.motif_proteins().into_iter().collect();
    let motif: BTreeSet<(usize, usize)> = spec.motif.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    for a in 0..spec.proteins {
        for b in a + 1..spec.proteins {
            let base = if spec.community(a) == spec.community(b) { spec.p_in } else { spec.p_out };
            let p = (base * weight[a] * weight[b] / (mean_w * mean_w)).min(1.0);
            let draw = rng.random_bool(p);
            let keep = if motif.contains(&(a, b)) {
                true
            } else {
                draw && !(motif_nodes.contains(&a) && motif_nodes.contains(&b))
            };
            if keep {
                g.add_edge(spec.protein_id(a), spec.protein_id(b), EdgeKind::Ppi, "ppi");
            }
        }
    }
    Ok((EntityGraph::build(&g)?, latent))
}

/// Protein-local index of the protein a node belongs to (itself or its chain).
fn owner_protein(spec: &SynthSpec, node: usize) -> usize {
    let c = spec.chains;
    if node < 3 * c {
        node % c
    } else {
        node - 3 * c
    }
}

fn synth_profile(
    spec: &SynthSpec,
    graph: &EntityGraph,
    latent: &[f64],
    label: usize,
    motif: &BTreeSet<usize>,
    rng: &mut seed::Rng,
) -> Vec<f64> {
    let factors: Vec<f64> = (0..spec.communities).map(|_| StandardNormal.sample(rng)).collect();
    (0..graph.num_nodes())
        .map(|node| {
            let owner = owner_protein(spec, node);
            let noise: f64 = StandardNormal.sample(rng);
            let mut v = spec.hub_expression * latent[owner]
                + spec.coexpression * factors[spec.community(owner)]
                + spec.noise * noise;
            if label == 1 && motif.contains(&owner) {
                v += spec.signal;
            }
            v
        })
        .collect()
}

/// The `k` highest-valued nodes of `layer`, value descending, ties by id.
pub fn select_top_k(profile: &[f64], graph: &EntityGraph, layer: EntityLayer, k: usize) -> Vec<(EntityId, f64)> {
    let mut v: Vec<(EntityId, f64)> = graph.nodes_in_layer(layer).map(|id| (id, profile[id.0])).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

fn entity_list(graph: &EntityGraph, top: &[(EntityId, f64)]) -> EntityList {
    let ids: Vec<EntityId> = top.iter().map(|t| t.0).collect();
    EntityList::from_ids(graph, &ids, Some(top.iter().map(|t| t.1).collect()))
}

fn build_instance(
    spec: &SynthSpec,
    graph: &EntityGraph,
    profile: &[f64],
    n: usize,
    rng: &mut seed::Rng,
) -> Result<QaInstance, BenchError> {
    let motif = spec.motif_proteins();
    let motif_set: BTreeSet<usize> = motif.iter().copied().collect();
    let others: Vec<usize> = (0..spec.proteins).filter(|p| !motif_set.contains(p)).collect();
    let mut disease: Vec<EntityId> = sample(rng, motif.len(), spec.motif_disease)
        .into_iter()
        .map(|i| spec.protein_id(motif[i]))
        .chain(
            sample(rng, others.len(), spec.disease_proteins - spec.motif_disease)
                .into_iter()
                .map(|i| spec.protein_id(others[i])),
        )
        .collect();
    disease.sort_unstable();
    let disease_scores: Vec<f64> = disease.iter().map(|_| (rng.random_range(0.5..1.0) * 1e4f64).round() / 1e4).collect();

    let (nodes, edges) = graph.retrieve_subgraph(&disease, spec.hops)?;
    let seeds: BTreeSet<EntityId> = disease.iter().copied().collect();
    let neighbors: Vec<EntityId> = nodes.into_iter().filter(|n| !seeds.contains(n)).collect();
    let relationships = edges
        .iter()
        .filter(|(s, t)| s < t)
        .map(|&(s, t)| format!("{} -> {}", graph.name(s), graph.name(t)))
        .collect();

    let mut ranked_motif: Vec<EntityId> = motif.iter().map(|&p| spec.protein_id(p)).collect();
    ranked_motif.sort_by(|a, b| profile[b.0].total_cmp(&profile[a.0]).then(a.cmp(b)));
    let mut targets: Vec<EntityId> = ranked_motif.into_iter().take(spec.gamma).collect();
    let mut rest: Vec<EntityId> = others.iter().map(|&p| spec.protein_id(p)).collect();
    rest.sort_by(|a, b| profile[b.0].total_cmp(&profile[a.0]).then(a.cmp(b)));
    targets.extend(rest.into_iter().take(spec.gamma - targets.len()));

    let mut extra = BTreeMap::new();
    extra.insert("gamma".to_string(), serde_json::json!(spec.gamma));
    Ok(QaInstance {
        cell_line_id: format!("SYN-{n:06}"),
        cell_line_name: format!("SYNCL{n}"),
        sample_dti_index: n,
        disease: "synthetic carcinoma".into(),
        disease_bmgc_id: "SYN_DS00001".into(),
        input: QaInput {
            top_k_gene: entity_list(graph, &select_top_k(profile, graph, EntityLayer::Gene, spec.k)),
            top_k_transcript: entity_list(graph, &select_top_k(profile, graph, EntityLayer::Transcript, spec.k)),
            top_k_protein: entity_list(graph, &select_top_k(profile, graph, EntityLayer::Protein, spec.k)),
            knowledge_graph: KnowledgeGraph {
                disease_protein: EntityList::from_ids(graph, &disease, Some(disease_scores)),
                ppi_neighbors: EntityList::from_ids(graph, &neighbors, None),
                protein_relationships: relationships,
                extra: BTreeMap::new(),
            },
            init_candidates: EntityList::default(),
            extra: BTreeMap::new(),
        },
        ground_truth_answer: EntityList::from_ids(graph, &targets, None),
        extra,
    })
}

/// Builds the graph, labelled samples with a train/test split, and one QA
/// instance per class-1 sample.
pub fn synth_benchmark(spec: &SynthSpec) -> Result<Benchmark, BenchError> {
    spec.validate()?;
    let mut graph_rng = seed::rng(seed::derive_str(spec.seed, "graph"));
    let (graph, latent) = build_graph(spec, &mut graph_rng)?;

    let motif: BTreeSet<usize> = spec.motif_proteins().into_iter().collect();
    let mut sample_rng = seed::rng(seed::derive_str(spec.seed, "samples"));
    let mut labels = Vec::new();
    for (c, &n) in spec.samples_per_class.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c, n));
    }
    // interleave classes deterministically so sample ids carry no label order
    let perm = sample(&mut sample_rng, labels.len(), labels.len()).into_vec();
    let labels: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
    let omics: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| synth_profile(spec, &graph, &latent, y, &motif, &mut sample_rng))
        .collect();

    let mut inst_rng = seed::rng(seed::derive_str(spec.seed, "instances"));
    let mut instances = Vec::new();
    for (n, (&y, profile)) in labels.iter().zip(&omics).enumerate() {
        if y == 1 {
            instances.push(build_instance(spec, &graph, profile, n, &mut inst_rng)?);
        }
    }
    let samples = SampleSet::with_random_split(
        omics,
        labels,
        spec.samples_per_class.len(),
        spec.train_fraction,
        seed::derive_str(spec.seed, "split"),
    )?;
    let motif_edges = spec.motif.iter().map(|&(a, b)| (spec.protein_id(a), spec.protein_id(b))).collect();
    Ok(Benchmark { graph, samples, instances, motif_edges })
}
