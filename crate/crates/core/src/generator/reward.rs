use super::policy::MaskRules;
use super::{CandidateContext, GenConfig, GenError, GenerationState, PolicyParams};
use crate::exec::Exec;
use crate::graph::EntityId;
use crate::pretrain::ClassifierBundle;
use crate::seed;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Scores a partial subgraph with a class distribution.
pub trait RewardModel: Sync {
    fn num_classes(&self) -> usize;
    fn class_probs(&self, state: &GenerationState) -> Result<Vec<f64>, GenError>;
}

/// Frozen classifier over the edge-induced subgraph, with node rows taken
/// from precomputed embeddings (one row per graph node).
#[derive(Clone, Debug)]
pub struct SubgraphClassifier {
    pub bundle: ClassifierBundle,
    pub embeddings: Tensor,
}

impl SubgraphClassifier {
    pub fn new(bundle: ClassifierBundle, embeddings: Tensor) -> Self {
        Self { bundle, embeddings }
    }
}

impl RewardModel for SubgraphClassifier {
    fn num_classes(&self) -> usize {
        self.bundle.num_classes()
    }

    /// Nodes without edges are only scored when the subgraph has no edges.
    fn class_probs(&self, state: &GenerationState) -> Result<Vec<f64>, GenError> {
        let nodes = if state.edges.is_empty() { state.nodes.clone() } else { state.edge_nodes() };
        if nodes.iter().any(|n| n.0 >= self.embeddings.rows()) {
            return Err(GenError::ClassifierFailure("node outside the embedding table".into()));
        }
        let local: HashMap<EntityId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let rows: Vec<usize> = nodes.iter().map(|n| n.0).collect();
        let edges: Vec<(usize, usize)> = state.edges.iter().map(|(s, t)| (local[s], local[t])).collect();
        Ok(self.bundle.classify_subgraph(&self.embeddings.select_rows(&rows), &edges)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub immediate: f64,
    pub rollout_mean: f64,
    pub rule: f64,
    pub total: f64,
    /// Target-class probability at the end of each rollout.
    pub rollout_probs: Vec<f64>,
}

pub(crate) fn target_prob(model: &dyn RewardModel, state: &GenerationState, target: usize) -> Result<f64, GenError> {
    let probs = model.class_probs(state)?;
    probs
        .get(target)
        .copied()
        .ok_or_else(|| GenError::ClassifierFailure(format!("class {target} outside {} outputs", probs.len())))
}

/// Continues from `state` for up to `depth` steps, accepting every action.
pub(crate) fn rollout(
    policy: &PolicyParams,
    ctx: &CandidateContext,
    state: &GenerationState,
    rules: MaskRules,
    depth: usize,
    seed: u64,
) -> Result<GenerationState, GenError> {
    let mut rng = seed::rng(seed);
    let mut s = state.clone();
    for _ in 0..depth {
        match policy.step(ctx, &s, rules, &mut rng) {
            Ok(a) => s.push_edge(a.src, a.tgt),
            Err(GenError::NoLegalAction) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(s)
}

/// Reward of `state_after`, the state with the newly proposed edge `added`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn reward_with_rules(
    model: &dyn RewardModel,
    policy: &PolicyParams,
    ctx: &CandidateContext,
    state_after: &GenerationState,
    added: (EntityId, EntityId),
    cfg: &GenConfig,
    rules: MaskRules,
    depth: usize,
    seed: u64,
    exec: Exec,
) -> Result<RewardBreakdown, GenError> {
    let base = 1.0 / model.num_classes() as f64;
    let immediate = target_prob(model, state_after, cfg.target_class)? - base;
    let rollout_probs = exec
        .map_range(cfg.rollouts, |l| {
            let end = rollout(policy, ctx, state_after, rules, depth, seed::derive(seed, l as u64))?;
            target_prob(model, &end, cfg.target_class)
        })
        .into_iter()
        .collect::<Result<Vec<f64>, GenError>>()?;
    let rollout_mean = if rollout_probs.is_empty() {
        0.0
    } else {
        rollout_probs.iter().map(|p| p - base).sum::<f64>() / rollout_probs.len() as f64
    };
    let (s, t) = added;
    let rule = if ctx.permitted[ctx.local(s)][ctx.local(t)] { 0.0 } else { -1.0 };
    let total = immediate + cfg.lambda * rollout_mean + cfg.lambda_rule * rule;
    Ok(RewardBreakdown { immediate, rollout_mean, rule, total, rollout_probs })
}

/// Immediate, rollout and rule terms for the last edge of `state_after`.
/// Rollouts run `depth` accepting steps from independent substreams of
/// `seed`.
pub fn compute_reward(
    model: &dyn RewardModel,
    policy: &PolicyParams,
    ctx: &CandidateContext,
    state_after: &GenerationState,
    cfg: &GenConfig,
    depth: usize,
    seed: u64,
) -> Result<RewardBreakdown, GenError> {
    let added = *state_after
        .edges
        .last()
        .ok_or_else(|| GenError::ClassifierFailure("reward needs at least one edge".into()))?;
    let rules = MaskRules { mask_invalid_targets: cfg.mask_invalid_targets, max_nodes: usize::MAX };
    reward_with_rules(model, policy, ctx, state_after, added, cfg, rules, depth, seed, Exec::Sequential)
}
