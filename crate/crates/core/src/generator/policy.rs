use super::{CandidateContext, GenError, GenerationState};
use crate::graph::EntityId;
use crate::seed;
use crate::tensor::{masked_softmax, Bound, Checkpoint, EdgeIndex, GatLayer, Mlp, ParamSet, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Message layer over the partial subgraph, source head, and target head
/// fed with `[x_j, x_src]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub params: ParamSet,
    pub msg: GatLayer,
    pub src_head: Mlp,
    pub tgt_head: Mlp,
    pub d_in: usize,
}

/// One sampled action with the distributions it was drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub src: EntityId,
    pub tgt: EntityId,
    pub log_p_src: f64,
    pub log_p_tgt: f64,
    /// Source probabilities over candidates (zero outside the mask).
    pub src_probs: Vec<f64>,
    pub tgt_probs: Vec<f64>,
}

/// Which candidates may be sampled, given the current state.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MaskRules {
    pub mask_invalid_targets: bool,
    pub max_nodes: usize,
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

impl PolicyParams {
    pub fn new(d_in: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut params = ParamSet::new();
        let msg = GatLayer::new(&mut params, "msg", d_in, hidden, &mut rng);
        let src_head = Mlp::new(&mut params, "src_head", &[hidden, hidden, 1], &mut rng);
        let tgt_head = Mlp::new(&mut params, "tgt_head", &[2 * hidden, hidden, 1], &mut rng);
        Self { params, msg, src_head, tgt_head, d_in }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::json!({ "model": "policy", "d_in": self.d_in, "hidden": self.msg.d_out });
        Checkpoint::from_params(&self.params, meta)
    }

    fn embed(&self, tape: &mut Tape, p: &Bound, ctx: &CandidateContext, state: &GenerationState) -> Result<Var, GenError> {
        let local: Vec<(usize, usize)> = state.edges.iter().map(|&(s, t)| (ctx.local(s), ctx.local(t))).collect();
        let ei = EdgeIndex::with_self_loops(ctx.len(), &local)?;
        let x = tape.leaf(ctx.feats.clone());
        Ok(self.msg.forward(tape, p, x, &ei))
    }

    fn tgt_logits(&self, tape: &mut Tape, p: &Bound, x: Var, n: usize, src: usize) -> Var {
        let xs = tape.gather_rows(x, &vec![src; n]);
        let pair = tape.concat_cols(x, xs);
        self.tgt_head.forward(tape, p, pair)
    }

    pub(crate) fn src_mask(ctx: &CandidateContext, state: &GenerationState, rules: MaskRules) -> Vec<bool> {
        let mut mask = vec![false; ctx.len()];
        for &n in &state.nodes {
            if let Some(&i) = ctx.index.get(&n) {
                mask[i] = Self::tgt_mask(ctx, state, rules, i).iter().any(|&m| m);
            }
        }
        mask
    }

    pub(crate) fn tgt_mask(ctx: &CandidateContext, state: &GenerationState, rules: MaskRules, src: usize) -> Vec<bool> {
        let full = state.nodes.len() >= rules.max_nodes;
        let src_id = ctx.ids[src];
        (0..ctx.len())
            .map(|j| {
                let tgt = ctx.ids[j];
                j != src
                    && !state.has_edge(src_id, tgt)
                    && (!rules.mask_invalid_targets || ctx.permitted[src][j])
                    && (!full || state.nodes.contains(&tgt))
            })
            .collect()
    }

    /// Samples a source from the current nodes, then a target for it.
    pub(crate) fn step(
        &self,
        ctx: &CandidateContext,
        state: &GenerationState,
        rules: MaskRules,
        rng: &mut impl Rng,
    ) -> Result<Action, GenError> {
        let src_mask = Self::src_mask(ctx, state, rules);
        if !src_mask.iter().any(|&m| m) {
            return Err(GenError::NoLegalAction);
        }
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = self.embed(&mut tape, &p, ctx, state)?;
        let sl = self.src_head.forward(&mut tape, &p, x);
        let src_probs = masked_softmax(tape.value(sl).data(), &src_mask)?;
        let src = sample_index(&src_probs, rng);
        let tgt_mask = Self::tgt_mask(ctx, state, rules, src);
        let tl = self.tgt_logits(&mut tape, &p, x, ctx.len(), src);
        let tgt_probs = masked_softmax(tape.value(tl).data(), &tgt_mask)?;
        let tgt = sample_index(&tgt_probs, rng);
        Ok(Action {
            src: ctx.ids[src],
            tgt: ctx.ids[tgt],
            log_p_src: src_probs[src].ln(),
            log_p_tgt: tgt_probs[tgt].ln(),
            src_probs,
            tgt_probs,
        })
    }

    /// `weight * (CE_src + CE_tgt)` for a fixed action taken from `state`,
    /// and its parameter gradients.
    pub(crate) fn weighted_loss(
        &self,
        ctx: &CandidateContext,
        state: &GenerationState,
        rules: MaskRules,
        src: EntityId,
        tgt: EntityId,
        weight: f64,
    ) -> Result<(f64, Vec<Tensor>), GenError> {
        let (s, t) = (ctx.local(src), ctx.local(tgt));
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = self.embed(&mut tape, &p, ctx, state)?;
        let sl = self.src_head.forward(&mut tape, &p, x);
        let ce_src = tape.masked_cross_entropy(sl, &Self::src_mask(ctx, state, rules), s)?;
        let tl = self.tgt_logits(&mut tape, &p, x, ctx.len(), s);
        let ce_tgt = tape.masked_cross_entropy(tl, &Self::tgt_mask(ctx, state, rules, s), t)?;
        let ce = tape.add(ce_src, ce_tgt);
        let loss = tape.scale(ce, weight);
        let g = tape.backward(loss)?;
        Ok((tape.value(loss).item(), p.grads(&tape, &g)))
    }
}

/// Policy step under the given masking rules (public entry point).
pub fn policy_step(
    policy: &PolicyParams,
    state: &GenerationState,
    ctx: &CandidateContext,
    mask_invalid_targets: bool,
    max_nodes: usize,
    rng: &mut impl Rng,
) -> Result<Action, GenError> {
    policy.step(ctx, state, MaskRules { mask_invalid_targets, max_nodes }, rng)
}
