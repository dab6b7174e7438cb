//! Two-stage pretraining of the graph classifier: masked PPI-edge link
//! prediction, then graph-level status classification.
//!
//! The resulting [`ClassifierBundle`] is frozen and reused by the generator
//! as a step-wise reward model through [`ClassifierBundle::classify_subgraph`].

mod classify;
mod edges;
pub mod metrics;

pub use classify::{oversample, predict_samples, train_classifier, ClassifierMetrics};
pub use edges::{pretrain_edges, split_epoch_edges, EdgeMetrics};

use crate::graph::{text_matrix, EntityGraph, EntityId, NodeFeatureTable};
use crate::seed;
use crate::tensor::{Checkpoint, EdgeIndex, GatStack, Mlp, ParamSet, Tape, Tensor, TensorError, Var, LEAKY_SLOPE};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("graph has no PPI edges")]
    NoPpiEdges,
    #[error("training split contains a single class")]
    SingleClassTrainSet,
    #[error("subgraph has no nodes")]
    EmptySubgraph,
    #[error("invalid pretraining config: {0}")]
    InvalidConfig(String),
    #[error("invalid sample set: {0}")]
    InvalidSamples(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Bernoulli probability of masking each training PPI edge per epoch.
    pub mask_ratio: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Negative pairs drawn per masked positive pair.
    pub negative_ratio: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub clip_norm: Option<f64>,
    /// Fraction of PPI pairs withheld from training for link-prediction metrics.
    pub eval_fraction: f64,
    /// Samples whose scores are averaged when evaluating link prediction.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            mask_ratio: 0.1,
            epochs: 30,
            lr: 0.001,
            negative_ratio: 1,
            batch_size: 4,
            dropout: 0.0,
            clip_norm: Some(1.0),
            eval_fraction: 0.15,
            eval_samples: 16,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), PretrainError> {
        let bad = |m: &str| Err(PretrainError::InvalidConfig(m.into()));
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return bad("mask_ratio must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return bad("eval_fraction must lie in [0, 1)");
        }
        if self.negative_ratio == 0 {
            return bad("negative_ratio must be at least 1");
        }
        Ok(())
    }
}

/// Layer widths of the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub text_dim: usize,
    pub hidden: usize,
    pub gat_layers: usize,
    pub decoder_hidden: usize,
    pub num_classes: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self { text_dim: 4, hidden: 8, gat_layers: 2, decoder_hidden: 4, num_classes: 2 }
    }
}

impl ModelDims {
    /// Width of a node input row: omic value, presence flag, text embedding.
    pub fn input_dim(&self) -> usize {
        self.text_dim + 2
    }

    pub fn validate(&self) -> Result<(), PretrainError> {
        if self.num_classes < 2 {
            return Err(PretrainError::InvalidConfig("at least two classes required".into()));
        }
        if self.hidden == 0 || self.gat_layers == 0 || self.decoder_hidden == 0 {
            return Err(PretrainError::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder, internal and PPI graph attention stacks, classification head
/// and link-prediction decoder, all sharing one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierBundle {
    pub dims: ModelDims,
    pub params: ParamSet,
    pub enc_cross: Mlp,
    pub gnn_in: GatStack,
    pub gnn_ppi: GatStack,
    pub head: Mlp,
    pub decoder: Mlp,
}

impl ClassifierBundle {
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self, PretrainError> {
        dims.validate()?;
        let mut rng = seed::rng(seed);
        let mut params = ParamSet::new();
        let h = dims.hidden;
        let gat_dims = vec![h; dims.gat_layers + 1];
        let enc_cross = Mlp::new(&mut params, "enc_cross", &[dims.input_dim(), h, h], &mut rng);
        let gnn_in = GatStack::new(&mut params, "gnn_in", &gat_dims, &mut rng);
        let gnn_ppi = GatStack::new(&mut params, "gnn_ppi", &gat_dims, &mut rng);
        let head = Mlp::new(&mut params, "head", &[h, h, dims.num_classes], &mut rng);
        let decoder = Mlp::new(&mut params, "decoder", &[2 * h, dims.decoder_hidden, 1], &mut rng);
        Ok(Self { dims, params, enc_cross, gnn_in, gnn_ppi, head, decoder })
    }

    pub fn num_classes(&self) -> usize {
        self.dims.num_classes
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::json!({ "model": "classifier", "dims": self.dims });
        Checkpoint::from_params(&self.params, meta)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, PretrainError> {
        let dims: ModelDims = serde_json::from_value(ck.meta["dims"].clone())
            .map_err(|e| TensorError::Checkpoint(format!("classifier dims: {e}")))?;
        let mut bundle = Self::new(dims, 0)?;
        ck.load_into(&mut bundle.params)?;
        Ok(bundle)
    }

    fn check_input(&self, x: &Tensor, rows: usize) -> Result<(), PretrainError> {
        if x.rows() != rows || x.cols() != self.dims.input_dim() {
            return Err(TensorError::ShapeMismatch(format!(
                "node inputs are {}x{}, expected {}x{}",
                x.rows(),
                x.cols(),
                rows,
                self.dims.input_dim()
            ))
            .into());
        }
        Ok(())
    }

    /// `GNN_in(ENC_cross(x))` over the internal edges; `dropout` applies to
    /// the encoder output when a generator is supplied.
    pub(crate) fn encode_var(
        &self,
        tape: &mut Tape,
        p: &crate::tensor::Bound,
        x: Var,
        internal: &EdgeIndex,
        dropout: Option<(f64, &mut seed::Rng)>,
    ) -> Var {
        let mut h = self.enc_cross.forward(tape, p, x);
        h = tape.leaky_relu(h, LEAKY_SLOPE);
        if let Some((rate, rng)) = dropout {
            if rate > 0.0 {
                h = tape.dropout(h, rate, rng);
            }
        }
        self.gnn_in.forward(tape, p, h, internal)
    }

    /// Class logits (`1 x C`) for node rows `h` connected by `edges`.
    pub(crate) fn logits_var(&self, tape: &mut Tape, p: &crate::tensor::Bound, h: Var, edges: &EdgeIndex) -> Var {
        let z = self.gnn_ppi.forward(tape, p, h, edges);
        let pooled = tape.mean_rows(z);
        self.head.forward(tape, p, pooled)
    }

    /// Node embeddings `H_in` (`M x hidden`) for one sample.
    pub fn encode_nodes(&self, graph: &EntityGraph, features: &NodeFeatureTable) -> Result<Tensor, PretrainError> {
        let ctx = GraphContext::new(graph)?;
        self.encode_with(&ctx, &features.input_matrix())
    }

    pub(crate) fn encode_with(&self, ctx: &GraphContext, input: &Tensor) -> Result<Tensor, PretrainError> {
        self.check_input(input, ctx.num_nodes)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone());
        let h = self.encode_var(&mut tape, &p, x, &ctx.internal, None);
        Ok(tape.value(h).clone())
    }

    /// Class probabilities of the subgraph made of the given node rows and
    /// local edges.
    pub fn classify_subgraph(&self, node_features: &Tensor, edges: &[(usize, usize)]) -> Result<Vec<f64>, PretrainError> {
        if node_features.rows() == 0 {
            return Err(PretrainError::EmptySubgraph);
        }
        if node_features.cols() != self.dims.hidden {
            return Err(TensorError::ShapeMismatch(format!(
                "subgraph features have {} columns, expected {}",
                node_features.cols(),
                self.dims.hidden
            ))
            .into());
        }
        let ei = EdgeIndex::with_self_loops(node_features.rows(), edges)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let h = tape.leaf(node_features.clone());
        let logits = self.logits_var(&mut tape, &p, h, &ei);
        Ok(crate::tensor::softmax(tape.value(logits).data()))
    }

    /// Class probabilities for a full sample: encoder over the whole graph,
    /// then the PPI stack over protein rows.
    pub(crate) fn predict_sample(&self, ctx: &GraphContext, input: &Tensor) -> Result<Vec<f64>, PretrainError> {
        self.check_input(input, ctx.num_nodes)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone());
        let h = self.encode_var(&mut tape, &p, x, &ctx.internal, None);
        let hp = tape.gather_rows(h, &ctx.proteins);
        let logits = self.logits_var(&mut tape, &p, hp, &ctx.ppi);
        Ok(crate::tensor::softmax(tape.value(logits).data()))
    }
}

/// Graph structure in the index form the models consume.
#[derive(Clone, Debug)]
pub(crate) struct GraphContext {
    pub num_nodes: usize,
    pub internal: EdgeIndex,
    /// Global ids of protein rows, in id order.
    pub proteins: Vec<usize>,
    /// Protein-local index per global id.
    pub local: Vec<Option<usize>>,
    /// All PPI edges over protein-local indices (with self-loops).
    pub ppi: EdgeIndex,
}

impl GraphContext {
    pub fn new(graph: &EntityGraph) -> Result<Self, PretrainError> {
        let m = graph.num_nodes();
        let internal: Vec<(usize, usize)> = graph.internal_edges().iter().map(|&(s, t)| (s.0, t.0)).collect();
        let proteins: Vec<usize> = graph.proteins().map(|p| p.0).collect();
        let mut local = vec![None; m];
        for (i, &p) in proteins.iter().enumerate() {
            local[p] = Some(i);
        }
        let ppi = Self::local_pairs(&local, graph.ppi_edges());
        Ok(Self {
            num_nodes: m,
            internal: EdgeIndex::with_self_loops(m, &internal)?,
            ppi: EdgeIndex::with_self_loops(proteins.len(), &ppi)?,
            proteins,
            local,
        })
    }

    pub fn local_pairs(local: &[Option<usize>], edges: &[(EntityId, EntityId)]) -> Vec<(usize, usize)> {
        edges
            .iter()
            .map(|&(s, t)| (local[s.0].expect("PPI endpoint is a protein"), local[t.0].expect("PPI endpoint is a protein")))
            .collect()
    }
}

/// Omic profiles with class labels and a train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub num_classes: usize,
    /// One value per graph node, per sample.
    pub omics: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SampleSet {
    pub fn new(
        omics: Vec<Vec<f64>>,
        labels: Vec<usize>,
        train: Vec<usize>,
        test: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, PretrainError> {
        let s = Self { num_classes, omics, labels, train, test };
        s.validate()?;
        Ok(s)
    }

    /// Random split putting `round(train_fraction * n)` samples in train.
    pub fn with_random_split(
        omics: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        train_fraction: f64,
        seed: u64,
    ) -> Result<Self, PretrainError> {
        let n = labels.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::rng(seed));
        let n_train = ((n as f64) * train_fraction).round() as usize;
        let mut train = idx[..n_train.min(n)].to_vec();
        let mut test = idx[n_train.min(n)..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Self::new(omics, labels, train, test, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<(), PretrainError> {
        let bad = |m: String| Err(PretrainError::InvalidSamples(m));
        let n = self.labels.len();
        if self.omics.len() != n {
            return bad(format!("{} omic profiles for {} labels", self.omics.len(), n));
        }
        if let Some(w) = self.omics.first().map(Vec::len) {
            if self.omics.iter().any(|o| o.len() != w) {
                return bad("omic profiles differ in length".into());
            }
        }
        if self.omics.iter().flatten().any(|v| !v.is_finite()) {
            return bad("omic values must be finite".into());
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= self.num_classes) {
            return bad(format!("label {y} outside 0..{}", self.num_classes));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return bad(format!("split index {i} out of range"));
            }
            if seen[i] {
                return bad(format!("sample {i} appears twice in the split"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return bad("split does not cover every sample".into());
        }
        Ok(())
    }

    /// Model input matrices for every sample.
    pub(crate) fn inputs(&self, graph: &EntityGraph, text_dim: usize) -> Result<Vec<Tensor>, PretrainError> {
        let text = text_matrix(graph, text_dim);
        self.omics
            .iter()
            .map(|o| {
                if o.len() != graph.num_nodes() {
                    return Err(PretrainError::InvalidSamples(format!(
                        "profile has {} values, graph has {} nodes",
                        o.len(),
                        graph.num_nodes()
                    )));
                }
                let wrapped: Vec<Option<f64>> = o.iter().map(|&v| Some(v)).collect();
                Ok(NodeFeatureTable::with_text(&wrapped, text.clone()).input_matrix())
            })
            .collect()
    }
}

/// Sums per-sample gradients in order and divides by the count.
pub(crate) fn mean_grads(per_sample: Vec<Vec<Tensor>>) -> Vec<Tensor> {
    let n = per_sample.len() as f64;
    let mut it = per_sample.into_iter();
    let mut acc = it.next().expect("at least one sample");
    for g in it {
        for (a, b) in acc.iter_mut().zip(&g) {
            a.add_assign(b);
        }
    }
    for a in &mut acc {
        *a = a.scale(1.0 / n);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::random_protein_graph;
    use crate::graph::{EdgeKind, EntityLayer, GraphSpec};
    use proptest::prelude::*;

    fn chain_graph() -> EntityGraph {
        let mut s = GraphSpec::default();
        let pm = s.add_node("PM0", EntityLayer::Promoter);
        let g = s.add_node("G0", EntityLayer::Gene);
        let t = s.add_node("T0", EntityLayer::Transcript);
        let p0 = s.add_node("P0", EntityLayer::Protein);
        let p1 = s.add_node("P1", EntityLayer::Protein);
        s.add_edge(pm, g, EdgeKind::Internal, "promotes");
        s.add_edge(g, t, EdgeKind::Internal, "transcription");
        s.add_edge(t, p0, EdgeKind::Internal, "translation");
        s.add_edge(p0, p1, EdgeKind::Ppi, "ppi");
        s.whitelist = GraphSpec::default_whitelist();
        EntityGraph::build(&s).unwrap()
    }

    fn zero_params(b: &mut ClassifierBundle) {
        for t in b.params.tensors_mut() {
            *t = Tensor::zeros(t.rows(), t.cols());
        }
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let g = chain_graph();
        let mut b = ClassifierBundle::new(ModelDims::default(), 3).unwrap();
        zero_params(&mut b);
        let table = NodeFeatureTable::from_dense(&g, &[0.0; 5], 4);
        let h = b.encode_nodes(&g, &table).unwrap();
        assert_eq!(h.shape(), [5, 8]);
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_internal_edges_means_self_loop_attention_only() {
        let g = random_protein_graph(4, 0.5, 1);
        let b = ClassifierBundle::new(ModelDims::default(), 5).unwrap();
        let omic = [0.3, -1.0, 2.0, 0.1];
        let table = NodeFeatureTable::from_dense(&g, &omic, 4);
        let h = b.encode_nodes(&g, &table).unwrap();
        // self-loop-only attention reduces each GAT layer to x W
        let x = table.input_matrix();
        let mut tape = Tape::new();
        let p = b.params.bind(&mut tape);
        let xv = tape.leaf(x);
        let e = b.enc_cross.forward(&mut tape, &p, xv);
        let mut z = tape.value(e).map(|v| crate::tensor::leaky_relu(v, LEAKY_SLOPE));
        for (i, layer) in b.gnn_in.layers.iter().enumerate() {
            if i > 0 {
                z = z.map(|v| crate::tensor::leaky_relu(v, LEAKY_SLOPE));
            }
            z = z.matmul(b.params.get(layer.weight));
        }
        assert!(h.max_abs_diff(&z) < 1e-12);
    }

    #[test]
    fn encoding_is_deterministic() {
        let g = chain_graph();
        let run = || {
            let b = ClassifierBundle::new(ModelDims::default(), 11).unwrap();
            let t = NodeFeatureTable::from_dense(&g, &[0.5, 1.0, -0.25, 2.0, 0.0], 4);
            b.encode_nodes(&g, &t).unwrap()
        };
        let (a, b) = (run(), run());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn encode_rejects_wrong_width() {
        let g = chain_graph();
        let b = ClassifierBundle::new(ModelDims::default(), 1).unwrap();
        let t = NodeFeatureTable::from_dense(&g, &[0.0; 5], 3);
        assert!(matches!(b.encode_nodes(&g, &t), Err(PretrainError::Tensor(TensorError::ShapeMismatch(_)))));
    }

    #[test]
    fn zero_head_gives_uniform() {
        let mut b = ClassifierBundle::new(ModelDims { num_classes: 3, ..ModelDims::default() }, 2).unwrap();
        for &(w, bias) in &b.head.layers {
            let [r, c] = b.params.get(w).shape();
            *b.params.get_mut(w) = Tensor::zeros(r, c);
            *b.params.get_mut(bias) = Tensor::zeros(1, c);
        }
        let x = Tensor::filled(3, 8, 0.7);
        let probs = b.classify_subgraph(&x, &[(0, 1), (1, 2)]).unwrap();
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_subgraph_is_an_error() {
        let b = ClassifierBundle::new(ModelDims::default(), 2).unwrap();
        assert!(matches!(b.classify_subgraph(&Tensor::zeros(0, 8), &[]), Err(PretrainError::EmptySubgraph)));
    }

    /// Dense re-evaluation of the subgraph classifier from raw parameters.
    fn dense_classify(b: &ClassifierBundle, x: &Tensor, edges: &[(usize, usize)]) -> Vec<f64> {
        let mut z = x.clone();
        for (i, layer) in b.gnn_ppi.layers.iter().enumerate() {
            if i > 0 {
                z = z.map(|v| crate::tensor::leaky_relu(v, LEAKY_SLOPE));
            }
            let h = z.matmul(b.params.get(layer.weight));
            let n = h.rows();
            let (a_s, a_t) = (b.params.get(layer.attn_src), b.params.get(layer.attn_tgt));
            let dot = |r: usize, a: &Tensor| (0..h.cols()).map(|k| h.get(r, k) * a.get(k, 0)).sum::<f64>();
            let mut out = Tensor::zeros(n, h.cols());
            for i in 0..n {
                let mut nb: Vec<usize> = edges.iter().filter(|e| e.1 == i && e.0 != i).map(|e| e.0).collect();
                nb.push(i);
                let s: Vec<f64> = nb.iter().map(|&j| crate::tensor::leaky_relu(dot(j, a_s) + dot(i, a_t), 0.2)).collect();
                let m = s.iter().cloned().fold(f64::MIN, f64::max);
                let zsum: f64 = s.iter().map(|v| (v - m).exp()).sum();
                for (&j, sv) in nb.iter().zip(&s) {
                    let a = (sv - m).exp() / zsum;
                    for k in 0..h.cols() {
                        out.set(i, k, out.get(i, k) + a * h.get(j, k));
                    }
                }
            }
            z = out;
        }
        let mut pooled = Tensor::zeros(1, z.cols());
        for i in 0..z.rows() {
            for k in 0..z.cols() {
                pooled.set(0, k, pooled.get(0, k) + z.get(i, k) / z.rows() as f64);
            }
        }
        let mut y = pooled;
        for (i, &(w, bias)) in b.head.layers.iter().enumerate() {
            if i > 0 {
                y = y.map(|v| crate::tensor::leaky_relu(v, LEAKY_SLOPE));
            }
            y = y.matmul(b.params.get(w));
            y.add_assign(b.params.get(bias));
        }
        let m = y.data().iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = y.data().iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn classify_matches_dense_oracle() {
        let b = ClassifierBundle::new(ModelDims::default(), 9).unwrap();
        let mut rng = seed::rng(4);
        let x = Tensor::from_vec(4, 8, (0..32).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect());
        let edges = [(0, 1), (1, 0), (1, 2), (3, 2), (2, 3)];
        let got = b.classify_subgraph(&x, &edges).unwrap();
        let want = dense_classify(&b, &x, &edges);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn single_node_is_head_of_its_encoding() {
        let b = ClassifierBundle::new(ModelDims::default(), 21).unwrap();
        let x = Tensor::from_vec(1, 8, (0..8).map(|i| i as f64 * 0.1 - 0.3).collect());
        let got = b.classify_subgraph(&x, &[]).unwrap();
        assert_eq!(got, dense_classify(&b, &x, &[]));
    }

    #[test]
    fn checkpoint_round_trip_rebuilds_bundle() {
        let b = ClassifierBundle::new(ModelDims { num_classes: 3, ..ModelDims::default() }, 8).unwrap();
        let ck = Checkpoint::from_json(&b.to_checkpoint().to_json()).unwrap();
        assert_eq!(ClassifierBundle::from_checkpoint(&ck).unwrap(), b);
    }

    #[test]
    fn sample_set_validation() {
        let o = vec![vec![0.0; 2]; 3];
        assert!(SampleSet::new(o.clone(), vec![0, 1, 0], vec![0, 1], vec![2], 2).is_ok());
        assert!(SampleSet::new(o.clone(), vec![0, 2, 0], vec![0, 1], vec![2], 2).is_err());
        assert!(SampleSet::new(o.clone(), vec![0, 1, 0], vec![0, 1], vec![1, 2], 2).is_err());
        assert!(SampleSet::new(o, vec![0, 1, 0], vec![0], vec![2], 2).is_err());
    }

    proptest! {
        #[test]
        fn classify_output_is_a_distribution(
            seed in 0u64..500,
            k in 1usize..7,
            scale in 0.1f64..20.0,
        ) {
            let b = ClassifierBundle::new(ModelDims { num_classes: 3, ..ModelDims::default() }, seed).unwrap();
            let mut rng = seed::rng(seed + 1);
            let x = Tensor::from_vec(k, 8, (0..k * 8).map(|_| scale * rand::Rng::random_range(&mut rng, -1.0..1.0)).collect());
            let edges: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).filter(|&(i, j)| (i * 7 + j * 3) % 4 == 0).collect();
            let p = b.classify_subgraph(&x, &edges).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
