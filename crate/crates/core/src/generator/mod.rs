//! Reward-guided subgraph generation.
//!
//! A policy grows a subgraph one directed edge at a time over a candidate
//! set of proteins. Each proposed edge is scored by a frozen graph
//! classifier (immediate term), by the mean classifier score of simulated
//! continuations (rollout term) and by a rule penalty for edges the relation
//! whitelist does not permit. The edge is kept only when the total is
//! strictly positive; every attempt updates the policy with a
//! reward-weighted cross-entropy loss.

mod policy;
mod reward;
mod text;
mod train;

pub use policy::{policy_step, Action, PolicyParams};
pub use reward::{compute_reward, RewardBreakdown, RewardModel, SubgraphClassifier};
pub use text::{parse_subgraph, verbalize_subgraph};
pub use train::{train_generate, GenerationProblem, GenerationResult, RunSummary, StepRecord};

use crate::graph::{EntityGraph, EntityId};
use crate::pretrain::PretrainError;
use crate::tensor::{Tensor, TensorError};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("disease, proposer and omic seed lists are all empty")]
    AllSourcesEmpty,
    #[error("no legal (source, target) action")]
    NoLegalAction,
    #[error("classifier failure: {0}")]
    ClassifierFailure(String),
    #[error("no run accepted any edge")]
    AllRunsEmpty,
    #[error("cannot parse subgraph text: {0}")]
    Parse(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<PretrainError> for GenError {
    fn from(e: PretrainError) -> Self {
        GenError::ClassifierFailure(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Start-set size.
    pub eta: usize,
    /// Number of rollouts averaged into the reward.
    pub rollouts: usize,
    pub rollout_depth: usize,
    pub lambda: f64,
    pub lambda_rule: f64,
    /// Class whose probability the generator maximises.
    pub target_class: usize,
    /// Consecutive rejections that end an epoch.
    pub patience: usize,
    /// Exclude targets the whitelist does not permit from the target mask.
    pub mask_invalid_targets: bool,
    /// Apply the loss on rejected steps as well as accepted ones.
    pub loss_on_rejected: bool,
    /// Carry policy parameters over between retry runs.
    pub warm_start: bool,
    pub hidden: usize,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            eta: 20,
            rollouts: 5,
            rollout_depth: 10,
            lambda: 1.0,
            lambda_rule: 1.0,
            target_class: 1,
            patience: 15,
            mask_invalid_targets: true,
            loss_on_rejected: true,
            warm_start: false,
            hidden: 8,
            clip_norm: Some(1.0),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.into()));
        if self.eta == 0 {
            return bad("eta must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda_rule >= 0.0) {
            return bad("reward weights must be non-negative");
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        Ok(())
    }
}

/// Hyperparameters of one retry run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub epochs: usize,
    pub lr: f64,
    pub max_nodes: usize,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrySchedule {
    pub runs: Vec<RunSettings>,
}

impl RetrySchedule {
    /// Epochs 5, 4, 3 then 2; learning rate `0.001 (1 + w)`; node budget
    /// from 200 down by 25 to 100; step budget from 50 down by 5 to 20.
    pub fn standard(omega: usize) -> Self {
        let runs = (0..omega)
            .map(|w| RunSettings {
                epochs: 5usize.saturating_sub(w).max(2),
                lr: 0.001 * (1 + w) as f64,
                max_nodes: 200usize.saturating_sub(25 * w).max(100),
                max_steps: 50usize.saturating_sub(5 * w).max(20),
            })
            .collect();
        Self { runs }
    }

    pub fn omega(&self) -> usize {
        self.runs.len()
    }
}

/// Partial subgraph: ordered node set, ordered directed edges, attempted
/// step count and per-step acceptance flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationState {
    pub nodes: Vec<EntityId>,
    pub edges: Vec<(EntityId, EntityId)>,
    pub step: usize,
    pub accepted: Vec<bool>,
}

impl GenerationState {
    pub fn from_start(start: &[EntityId]) -> Self {
        let mut s = Self::default();
        for &n in start {
            if !s.nodes.contains(&n) {
                s.nodes.push(n);
            }
        }
        s
    }

    pub fn has_edge(&self, src: EntityId, tgt: EntityId) -> bool {
        self.edges.contains(&(src, tgt))
    }

    /// Adds the edge and its target node; no bookkeeping of steps.
    pub fn push_edge(&mut self, src: EntityId, tgt: EntityId) {
        debug_assert!(!self.has_edge(src, tgt));
        for n in [src, tgt] {
            if !self.nodes.contains(&n) {
                self.nodes.push(n);
            }
        }
        self.edges.push((src, tgt));
    }

    /// Greedy acceptance: adds the edge iff `reward.total > 0`, then counts
    /// the attempt. Returns whether the edge was added.
    pub fn apply_step(&mut self, src: EntityId, tgt: EntityId, reward: &RewardBreakdown) -> bool {
        let accepted = reward.total > 0.0 && !self.has_edge(src, tgt) && src != tgt;
        if accepted {
            self.push_edge(src, tgt);
        }
        self.step += 1;
        self.accepted.push(accepted);
        accepted
    }

    /// Nodes incident to at least one edge, in order of first appearance.
    pub fn edge_nodes(&self) -> Vec<EntityId> {
        let mut seen = HashSet::new();
        self.edges.iter().flat_map(|&(s, t)| [s, t]).filter(|n| seen.insert(*n)).collect()
    }
}

/// Sorts by score descending then id ascending and keeps the first `eta`.
fn top_eta(list: &[(EntityId, f64)], eta: usize) -> Vec<EntityId> {
    let mut v = list.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<EntityId> = Vec::new();
    for (id, _) in v {
        if out.len() == eta {
            break;
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Start-set cascade: Top-η disease seeds, else Top-η proposer seeds, else
/// η omic seeds sampled uniformly without replacement.
pub fn select_start_set(
    disease: &[(EntityId, f64)],
    init: &[(EntityId, f64)],
    omic: &[EntityId],
    eta: usize,
    rng: &mut impl Rng,
) -> Result<Vec<EntityId>, GenError> {
    if eta == 0 {
        return Err(GenError::InvalidConfig("eta must be at least 1".into()));
    }
    if !disease.is_empty() {
        return Ok(top_eta(disease, eta));
    }
    if !init.is_empty() {
        return Ok(top_eta(init, eta));
    }
    if omic.is_empty() {
        return Err(GenError::AllSourcesEmpty);
    }
    let mut pool: Vec<EntityId> = Vec::new();
    for &id in omic {
        if !pool.contains(&id) {
            pool.push(id);
        }
    }
    let k = eta.min(pool.len());
    let mut picked: Vec<EntityId> = sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Deduplicated union of the three lists in order of first occurrence.
pub fn build_candidate_set(init: &[EntityId], sub: &[EntityId], omic: &[EntityId]) -> Vec<EntityId> {
    let mut seen = HashSet::new();
    init.iter().chain(sub).chain(omic).copied().filter(|id| seen.insert(*id)).collect()
}

/// Candidate nodes with their feature rows and pairwise whitelist status.
#[derive(Clone, Debug)]
pub struct CandidateContext {
    pub ids: Vec<EntityId>,
    pub index: HashMap<EntityId, usize>,
    pub feats: Tensor,
    /// `permitted[i][j]` for candidate-local indices.
    pub permitted: Vec<Vec<bool>>,
}

impl CandidateContext {
    /// `node_features` holds one row per graph node.
    pub fn new(graph: &EntityGraph, ids: Vec<EntityId>, node_features: &Tensor) -> Result<Self, GenError> {
        if ids.is_empty() {
            return Err(GenError::AllSourcesEmpty);
        }
        if let Some(bad) = ids.iter().find(|id| id.0 >= node_features.rows() || id.0 >= graph.num_nodes()) {
            return Err(TensorError::ShapeMismatch(format!("candidate {} has no feature row", bad.0)).into());
        }
        let rows: Vec<usize> = ids.iter().map(|i| i.0).collect();
        let feats = node_features.select_rows(&rows);
        let permitted = ids.iter().map(|&s| ids.iter().map(|&t| graph.is_permitted_edge(s, t)).collect()).collect();
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(Self { ids, index, feats, permitted })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn local(&self, id: EntityId) -> usize {
        self.index[&id]
    }
}
