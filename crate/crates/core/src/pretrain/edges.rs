use super::metrics::{average_precision, roc_auc};
use super::{mean_grads, ClassifierBundle, GraphContext, PretrainConfig, PretrainError, SampleSet};
use crate::exec::Exec;
use crate::graph::EntityGraph;
use crate::seed;
use crate::tensor::{clip_grad_norm, sigmoid, Adam, EdgeIndex, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub auc: f64,
    pub ap: f64,
    pub held_out_pairs: usize,
    pub loss_history: Vec<f64>,
}

/// Splits the training pairs for one epoch: each pair is masked with
/// probability `p`; masked pairs become positives, the rest carry messages.
/// At least one pair is masked.
pub fn split_epoch_edges(
    pairs: &[(usize, usize)],
    p: f64,
    rng: &mut impl Rng,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut mp = Vec::with_capacity(pairs.len());
    let mut pos = Vec::new();
    for &e in pairs {
        if rng.random_bool(p) {
            pos.push(e);
        } else {
            mp.push(e);
        }
    }
    if pos.is_empty() && !mp.is_empty() {
        let i = rng.random_range(0..mp.len());
        pos.push(mp.remove(i));
    }
    (mp, pos)
}

fn undirected(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Uniform protein pairs that are not PPI edges.
fn sample_negatives(n: usize, count: usize, known: &HashSet<(usize, usize)>, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let capacity = n * n.saturating_sub(1) / 2 - known.len().min(n * n.saturating_sub(1) / 2);
    let mut out = Vec::with_capacity(count);
    if capacity == 0 {
        return out;
    }
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !known.contains(&undirected(a, b)) {
            out.push((a, b));
        }
    }
    out
}

/// Both orientations of every pair, with the matching labels.
fn oriented(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut us = Vec::new();
    let mut vs = Vec::new();
    let mut labels = Vec::new();
    for (set, y) in [(pos, 1.0), (neg, 0.0)] {
        for &(a, b) in set {
            us.extend([a, b]);
            vs.extend([b, a]);
            labels.extend([y, y]);
        }
    }
    (us, vs, labels)
}

impl ClassifierBundle {
    /// Link logits for protein pairs `(us[i], vs[i])` given message-passing
    /// edges over protein-local indices.
    fn link_loss_and_grads(
        &self,
        ctx: &GraphContext,
        input: &Tensor,
        mp: &EdgeIndex,
        us: &[usize],
        vs: &[usize],
        labels: &[f64],
        dropout: f64,
        rng: &mut seed::Rng,
    ) -> Result<(f64, Vec<Tensor>), PretrainError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone());
        let h = self.encode_var(&mut tape, &p, x, &ctx.internal, Some((dropout, rng)));
        let hp = tape.gather_rows(h, &ctx.proteins);
        let z = self.gnn_ppi.forward(&mut tape, &p, hp, mp);
        let zu = tape.gather_rows(z, us);
        let zv = tape.gather_rows(z, vs);
        let pair = tape.concat_cols(zu, zv);
        let logits = self.decoder.forward(&mut tape, &p, pair);
        let loss = tape.bce_with_logits(logits, labels);
        let g = tape.backward(loss)?;
        Ok((tape.value(loss).item(), p.grads(&tape, &g)))
    }

    fn link_scores(&self, ctx: &GraphContext, input: &Tensor, mp: &EdgeIndex, us: &[usize], vs: &[usize]) -> Vec<f64> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone());
        let h = self.encode_var(&mut tape, &p, x, &ctx.internal, None);
        let hp = tape.gather_rows(h, &ctx.proteins);
        let z = self.gnn_ppi.forward(&mut tape, &p, hp, mp);
        let zu = tape.gather_rows(z, us);
        let zv = tape.gather_rows(z, vs);
        let pair = tape.concat_cols(zu, zv);
        let logits = self.decoder.forward(&mut tape, &p, pair);
        tape.value(logits).data().iter().map(|&l| sigmoid(l)).collect()
    }
}

/// Stage 1: masked PPI-edge link prediction.
///
/// A fixed fraction of PPI pairs is withheld from training entirely and used
/// to report AUC and average precision after the last epoch. Each epoch
/// masks the remaining pairs with probability `mask_ratio`, passes messages
/// over the unmasked ones and trains the decoder to separate masked pairs
/// from freshly drawn non-edges.
pub fn pretrain_edges(
    mut bundle: ClassifierBundle,
    graph: &EntityGraph,
    samples: &SampleSet,
    cfg: &PretrainConfig,
    exec: Exec,
) -> Result<(ClassifierBundle, EdgeMetrics), PretrainError> {
    cfg.validate()?;
    samples.validate()?;
    if graph.num_ppi_pairs() == 0 {
        return Err(PretrainError::NoPpiEdges);
    }
    if samples.train.is_empty() {
        return Err(PretrainError::InvalidSamples("no training samples".into()));
    }
    let ctx = GraphContext::new(graph)?;
    let inputs = samples.inputs(graph, bundle.dims.text_dim)?;
    let n_prot = ctx.proteins.len();
    let all_pairs: Vec<(usize, usize)> = graph
        .ppi_pairs()
        .map(|(a, b)| undirected(ctx.local[a.0].unwrap(), ctx.local[b.0].unwrap()))
        .collect();
    let known: HashSet<(usize, usize)> = all_pairs.iter().copied().collect();

    let mut rng = seed::rng(seed::derive_str(cfg.seed, "edges"));
    let mut shuffled = all_pairs.clone();
    shuffled.shuffle(&mut rng);
    let n_hold = if shuffled.len() < 2 {
        0
    } else {
        (((shuffled.len() as f64) * cfg.eval_fraction).round() as usize).clamp(1, shuffled.len() - 1)
    };
    let held_out = shuffled[..n_hold].to_vec();
    let mut train_pairs = shuffled[n_hold..].to_vec();
    train_pairs.sort_unstable();

    let mut adam = Adam::new(&bundle.params, cfg.lr);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (mp_pairs, pos) = split_epoch_edges(&train_pairs, cfg.mask_ratio, &mut rng);
        let neg = sample_negatives(n_prot, pos.len() * cfg.negative_ratio, &known, &mut rng);
        let (us, vs, labels) = oriented(&pos, &neg);
        let mp_directed: Vec<(usize, usize)> = mp_pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        let mp = EdgeIndex::with_self_loops(n_prot, &mp_directed)?;

        let mut order = samples.train.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step_seed = seed::derive(seed::derive(cfg.seed, epoch as u64), b as u64);
            let results = exec.map(batch, |&i| {
                let mut r = seed::rng(seed::derive(step_seed, i as u64));
                bundle.link_loss_and_grads(&ctx, &inputs[i], &mp, &us, &vs, &labels, cfg.dropout, &mut r)
            });
            let mut grads = Vec::with_capacity(results.len());
            for r in results {
                let (loss, g) = r?;
                epoch_loss += loss;
                grads.push(g);
            }
            let mut g = mean_grads(grads);
            if let Some(c) = cfg.clip_norm {
                clip_grad_norm(&mut g, c);
            }
            adam.step(&mut bundle.params, &g)?;
        }
        history.push(epoch_loss / order.len() as f64);
    }

    // Evaluation: messages over every training pair, scores averaged over
    // samples, held-out pairs ranked against every non-edge.
    let eval_pos = if held_out.is_empty() { train_pairs.clone() } else { held_out.clone() };
    let eval_neg: Vec<(usize, usize)> = (0..n_prot)
        .flat_map(|a| (a + 1..n_prot).map(move |b| (a, b)))
        .filter(|p| !known.contains(p))
        .collect();
    let (us, vs, _) = oriented(&eval_pos, &eval_neg);
    let mp_directed: Vec<(usize, usize)> = train_pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let mp = EdgeIndex::with_self_loops(n_prot, &mp_directed)?;
    let eval_idx: Vec<usize> = samples.train.iter().copied().take(cfg.eval_samples.max(1)).collect();
    let per_sample = exec.map(&eval_idx, |&i| bundle.link_scores(&ctx, &inputs[i], &mp, &us, &vs));
    let mut scores = vec![0.0; us.len()];
    for s in &per_sample {
        for (a, b) in scores.iter_mut().zip(s) {
            *a += b / per_sample.len() as f64;
        }
    }
    // one score per unordered pair: mean of both orientations
    let pair_scores: Vec<f64> = scores.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    let (pos_s, neg_s) = pair_scores.split_at(eval_pos.len());
    let metrics = EdgeMetrics {
        auc: roc_auc(pos_s, neg_s).unwrap_or(0.5),
        ap: average_precision(pos_s, neg_s).unwrap_or(0.0),
        held_out_pairs: held_out.len(),
        loss_history: history,
    };
    Ok((bundle, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::random_protein_graph;
    use crate::pretrain::ModelDims;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn masked_and_message_edges_are_disjoint(n in 1usize..60, p in 0.01f64..0.99, seed in 0u64..1000) {
            let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i + 1)).collect();
            let (mp, pos) = split_epoch_edges(&pairs, p, &mut seed::rng(seed));
            let a: HashSet<_> = mp.iter().collect();
            prop_assert!(pos.iter().all(|e| !a.contains(e)));
            prop_assert_eq!(mp.len() + pos.len(), n);
            prop_assert!(!pos.is_empty());
        }
    }

    #[test]
    fn negatives_avoid_edges_and_loops() {
        let known: HashSet<_> = [(0, 1), (1, 2)].into_iter().collect();
        let neg = sample_negatives(4, 200, &known, &mut seed::rng(1));
        assert_eq!(neg.len(), 200);
        assert!(neg.iter().all(|&(a, b)| a != b && !known.contains(&undirected(a, b))));
        let full: HashSet<_> = [(0, 1)].into_iter().collect();
        assert!(sample_negatives(2, 5, &full, &mut seed::rng(1)).is_empty());
    }

    #[test]
    fn no_ppi_edges_is_an_error() {
        let g = random_protein_graph(5, 0.0, 1);
        let s = SampleSet::new(vec![vec![0.0; 5]; 2], vec![0, 1], vec![0], vec![1], 2).unwrap();
        let b = ClassifierBundle::new(ModelDims::default(), 0).unwrap();
        let r = pretrain_edges(b, &g, &s, &PretrainConfig::default(), Exec::Sequential);
        assert!(matches!(r, Err(PretrainError::NoPpiEdges)));
    }

    #[test]
    fn short_run_is_deterministic_and_finite() {
        let g = random_protein_graph(12, 0.3, 4);
        let omics: Vec<Vec<f64>> = (0..6).map(|i| (0..12).map(|j| ((i * j) % 5) as f64 * 0.3).collect()).collect();
        let s = SampleSet::new(omics, vec![0, 1, 0, 1, 0, 1], vec![0, 1, 2, 3], vec![4, 5], 2).unwrap();
        let cfg = PretrainConfig { epochs: 3, ..PretrainConfig::default() };
        let run = |exec| {
            let b = ClassifierBundle::new(ModelDims::default(), 2).unwrap();
            pretrain_edges(b, &g, &s, &cfg, exec).unwrap()
        };
        let (b1, m1) = run(Exec::Sequential);
        let (b2, m2) = run(Exec::Parallel);
        assert_eq!(b1, b2);
        assert_eq!(m1, m2);
        assert!(b1.params.is_finite());
        assert!((0.0..=1.0).contains(&m1.auc));
        // the classification head is untouched by link prediction
        let fresh = ClassifierBundle::new(ModelDims::default(), 2).unwrap();
        for &(w, _) in &b1.head.layers {
            assert_eq!(b1.params.get(w), fresh.params.get(w));
        }
    }
}
