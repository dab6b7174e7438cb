use super::policy::MaskRules;
use super::reward::{reward_with_rules, target_prob, RewardBreakdown};
use super::{
    build_candidate_set, select_start_set, CandidateContext, GenConfig, GenError, GenerationState, PolicyParams,
    RetrySchedule, RewardModel, RunSettings,
};
use crate::benchmark::QaInstance;
use crate::exec::Exec;
use crate::graph::{EntityGraph, EntityId};
use crate::seed;
use crate::tensor::{clip_grad_norm, Adam, Tensor};
use serde::{Deserialize, Serialize};

/// Candidates and start set for one instance.
#[derive(Clone, Debug)]
pub struct GenerationProblem {
    pub ctx: CandidateContext,
    pub start: Vec<EntityId>,
}

impl GenerationProblem {
    /// Proposer candidates, disease proteins with their retrieved
    /// neighbours, and the omic top-K proteins together with the proteins
    /// downstream of the top-K genes and transcripts.
    pub fn from_instance(
        graph: &EntityGraph,
        instance: &QaInstance,
        embeddings: &Tensor,
        eta: usize,
        seed: u64,
    ) -> Result<Self, GenError> {
        let input = &instance.input;
        let kg = &input.knowledge_graph;
        let mut sub = kg.disease_protein.ids();
        sub.extend(kg.ppi_neighbors.ids());
        let mut omic = input.top_k_protein.ids();
        for list in [&input.top_k_gene, &input.top_k_transcript] {
            omic.extend(list.ids().into_iter().filter_map(|i| graph.cognate_protein(i)));
        }
        let init = input.init_candidates.ids();
        let start = select_start_set(
            &kg.disease_protein.scored(),
            &input.init_candidates.scored(),
            &omic,
            eta,
            &mut seed::rng(seed),
        )?;
        let ids = build_candidate_set(&init, &sub, &omic);
        Ok(Self { ctx: CandidateContext::new(graph, ids, embeddings)?, start })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub src: EntityId,
    pub tgt: EntityId,
    pub reward: RewardBreakdown,
    pub accepted: bool,
    /// `None` when the step did not update the policy.
    pub loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub omega: usize,
    pub settings: RunSettings,
    /// Target-class probability of the run's subgraph; `None` when no edge
    /// was ever accepted.
    pub score: Option<f64>,
    pub best_epoch: Option<usize>,
    pub subgraph: GenerationState,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub best: GenerationState,
    pub best_run: usize,
    pub score: f64,
    pub runs: Vec<RunSummary>,
}

struct Run<'a> {
    model: &'a dyn RewardModel,
    ctx: &'a CandidateContext,
    start: &'a [EntityId],
    cfg: &'a GenConfig,
    settings: RunSettings,
    rules: MaskRules,
    seed: u64,
    exec: Exec,
}

impl Run<'_> {
    /// One epoch from the start set; returns the final state.
    fn epoch(
        &self,
        epoch: usize,
        policy: &mut PolicyParams,
        adam: &mut Adam,
        log: &mut Vec<StepRecord>,
    ) -> Result<GenerationState, GenError> {
        let mut state = GenerationState::from_start(self.start);
        let mut rng = seed::rng(seed::derive(self.seed, epoch as u64));
        let mut rejected = 0;
        while state.step < self.settings.max_steps && state.nodes.len() < self.settings.max_nodes {
            let action = match policy.step(self.ctx, &state, self.rules, &mut rng) {
                Ok(a) => a,
                Err(GenError::NoLegalAction) => break,
                Err(e) => return Err(e),
            };
            let before = state.clone();
            let mut after = state.clone();
            after.push_edge(action.src, action.tgt);
            let depth = self.cfg.rollout_depth.min(self.settings.max_steps - state.step - 1);
            let reward_seed = seed::derive(seed::derive(self.seed, epoch as u64), state.step as u64 + 1);
            let reward = reward_with_rules(
                self.model,
                policy,
                self.ctx,
                &after,
                (action.src, action.tgt),
                self.cfg,
                self.rules,
                depth,
                reward_seed,
                self.exec,
            )?;
            let accepted = state.apply_step(action.src, action.tgt, &reward);
            let loss = if accepted || self.cfg.loss_on_rejected {
                let (loss, mut grads) =
                    policy.weighted_loss(self.ctx, &before, self.rules, action.src, action.tgt, reward.total)?;
                if let Some(c) = self.cfg.clip_norm {
                    clip_grad_norm(&mut grads, c);
                }
                adam.step(&mut policy.params, &grads)?;
                Some(loss)
            } else {
                None
            };
            log.push(StepRecord { epoch, step: before.step, src: action.src, tgt: action.tgt, reward, accepted, loss });
            rejected = if accepted { 0 } else { rejected + 1 };
            if rejected >= self.cfg.patience {
                break;
            }
        }
        Ok(state)
    }
}

/// Runs every schedule entry and keeps the highest-scoring subgraph (ties go
/// to the earliest run). Within a run each epoch restarts from the start set
/// with the updated policy, and the best epoch stands for the run.
pub fn train_generate(
    model: &dyn RewardModel,
    ctx: &CandidateContext,
    start: &[EntityId],
    cfg: &GenConfig,
    schedule: &RetrySchedule,
    exec: Exec,
) -> Result<GenerationResult, GenError> {
    cfg.validate()?;
    if start.is_empty() {
        return Err(GenError::AllSourcesEmpty);
    }
    if let Some(bad) = start.iter().find(|s| !ctx.index.contains_key(s)) {
        return Err(GenError::InvalidConfig(format!("start node {bad} is not a candidate")));
    }
    if cfg.target_class >= model.num_classes() {
        return Err(GenError::InvalidConfig(format!("target class {} out of range", cfg.target_class)));
    }
    let d_in = ctx.feats.cols();
    let mut policy = PolicyParams::new(d_in, cfg.hidden, seed::derive_str(cfg.seed, "policy"));
    let mut runs = Vec::with_capacity(schedule.omega());
    for (omega, &settings) in schedule.runs.iter().enumerate() {
        let run_seed = seed::derive(cfg.seed, omega as u64);
        if omega > 0 && !cfg.warm_start {
            policy = PolicyParams::new(d_in, cfg.hidden, seed::derive_str(run_seed, "policy"));
        }
        let mut adam = Adam::new(&policy.params, settings.lr);
        let run = Run {
            model,
            ctx,
            start,
            cfg,
            settings,
            rules: MaskRules { mask_invalid_targets: cfg.mask_invalid_targets, max_nodes: settings.max_nodes },
            seed: run_seed,
            exec,
        };
        let mut steps = Vec::new();
        let mut best: Option<(f64, usize, GenerationState)> = None;
        for epoch in 0..settings.epochs {
            let state = run.epoch(epoch, &mut policy, &mut adam, &mut steps)?;
            if state.edges.is_empty() {
                continue;
            }
            let score = target_prob(model, &state, cfg.target_class)?;
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, epoch, state));
            }
        }
        let (score, best_epoch, subgraph) = match best {
            Some((s, e, g)) => (Some(s), Some(e), g),
            None => (None, None, GenerationState::from_start(start)),
        };
        runs.push(RunSummary { omega, settings, score, best_epoch, subgraph, steps });
    }
    let mut winner: Option<(usize, f64)> = None;
    for r in &runs {
        if let Some(s) = r.score {
            if winner.is_none_or(|(_, w)| s > w) {
                winner = Some((r.omega, s));
            }
        }
    }
    let (best_run, score) = winner.ok_or(GenError::AllRunsEmpty)?;
    Ok(GenerationResult { best: runs[best_run].subgraph.clone(), best_run, score, runs })
}
