use super::metrics::{accuracy, f1_score};
use super::{mean_grads, ClassifierBundle, GraphContext, PretrainConfig, PretrainError, SampleSet};
use crate::exec::Exec;
use crate::graph::EntityGraph;
use crate::seed;
use crate::tensor::{clip_grad_norm, Adam, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub train_acc: f64,
    pub test_acc: f64,
    pub f1: f64,
    pub loss_history: Vec<f64>,
}

/// Duplicates random members of every smaller class until all classes in
/// `idx` have the size of the largest one. The original indices come first.
pub fn oversample(idx: &[usize], labels: &[usize], num_classes: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut by_class = vec![Vec::new(); num_classes];
    for &i in idx {
        by_class[labels[i]].push(i);
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = idx.to_vec();
    for members in by_class.iter().filter(|m| !m.is_empty()) {
        for _ in members.len()..target {
            out.push(members[rng.random_range(0..members.len())]);
        }
    }
    out
}

impl ClassifierBundle {
    fn class_loss_and_grads(
        &self,
        ctx: &GraphContext,
        input: &Tensor,
        label: usize,
        dropout: f64,
        rng: &mut seed::Rng,
    ) -> Result<(f64, Vec<Tensor>), PretrainError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone());
        let h = self.encode_var(&mut tape, &p, x, &ctx.internal, Some((dropout, rng)));
        let hp = tape.gather_rows(h, &ctx.proteins);
        let logits = self.logits_var(&mut tape, &p, hp, &ctx.ppi);
        let mask = vec![true; self.dims.num_classes];
        let loss = tape.masked_cross_entropy(logits, &mask, label)?;
        let g = tape.backward(loss)?;
        Ok((tape.value(loss).item(), p.grads(&tape, &g)))
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Stage 2: graph-level classification over the PPI layer.
///
/// The training split is oversampled to class parity; each sample is
/// encoded over the whole graph, protein rows pass through the PPI stack and
/// are mean-pooled into class logits. Accuracy and F1 are reported on the
/// untouched test split.
pub fn train_classifier(
    mut bundle: ClassifierBundle,
    graph: &EntityGraph,
    samples: &SampleSet,
    cfg: &PretrainConfig,
    exec: Exec,
) -> Result<(ClassifierBundle, ClassifierMetrics), PretrainError> {
    cfg.validate()?;
    samples.validate()?;
    if samples.num_classes != bundle.dims.num_classes {
        return Err(PretrainError::InvalidSamples(format!(
            "samples have {} classes, model has {}",
            samples.num_classes, bundle.dims.num_classes
        )));
    }
    let mut classes: Vec<usize> = samples.train.iter().map(|&i| samples.labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PretrainError::SingleClassTrainSet);
    }
    let ctx = GraphContext::new(graph)?;
    let inputs = samples.inputs(graph, bundle.dims.text_dim)?;
    let mut rng = seed::rng(seed::derive_str(cfg.seed, "classify"));
    let balanced = oversample(&samples.train, &samples.labels, samples.num_classes, &mut rng);

    let mut adam = Adam::new(&bundle.params, cfg.lr);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order = balanced.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step_seed = seed::derive(seed::derive(cfg.seed ^ 0x5eed, epoch as u64), b as u64);
            let results = exec.map_range(batch.len(), |k| {
                let i = batch[k];
                let mut r = seed::rng(seed::derive(step_seed, k as u64));
                bundle.class_loss_and_grads(&ctx, &inputs[i], samples.labels[i], cfg.dropout, &mut r)
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

    let predict = |idx: &[usize]| -> Result<Vec<usize>, PretrainError> {
        exec.map(idx, |&i| bundle.predict_sample(&ctx, &inputs[i]).map(|p| argmax(&p)))
            .into_iter()
            .collect()
    };
    let truth = |idx: &[usize]| idx.iter().map(|&i| samples.labels[i]).collect::<Vec<_>>();
    let train_pred = predict(&samples.train)?;
    let test_pred = predict(&samples.test)?;
    let metrics = ClassifierMetrics {
        train_acc: accuracy(&train_pred, &truth(&samples.train)),
        test_acc: accuracy(&test_pred, &truth(&samples.test)),
        f1: f1_score(&test_pred, &truth(&samples.test), samples.num_classes),
        loss_history: history,
    };
    Ok((bundle, metrics))
}

/// Class probabilities of every sample in `idx` under a trained bundle.
pub fn predict_samples(
    bundle: &ClassifierBundle,
    graph: &EntityGraph,
    samples: &SampleSet,
    idx: &[usize],
    exec: Exec,
) -> Result<Vec<Vec<f64>>, PretrainError> {
    let ctx = GraphContext::new(graph)?;
    let inputs = samples.inputs(graph, bundle.dims.text_dim)?;
    exec.map(idx, |&i| bundle.predict_sample(&ctx, &inputs[i])).into_iter().collect()
}
