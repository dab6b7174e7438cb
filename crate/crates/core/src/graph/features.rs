use super::EntityGraph;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// Deterministic pseudo text embedding: SHA-256 of the name seeds a ChaCha8
/// stream that yields `dim` standard-normal values.
pub fn text_embedding(name: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(name.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Text embeddings of every node name, one row per node.
pub fn text_matrix(graph: &EntityGraph, text_dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(graph.num_nodes() * text_dim);
    for name in graph.names() {
        data.extend(text_embedding(name, text_dim));
    }
    Tensor::from_vec(graph.num_nodes(), text_dim, data)
}

/// Per-node inputs for one sample: one omic scalar per node with a presence
/// flag, plus the node's text embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatureTable {
    pub omic: Vec<f64>,
    pub present: Vec<bool>,
    pub text_embed: Tensor,
}

impl NodeFeatureTable {
    /// Builds the table; `None` entries are stored as 0 with `present = false`.
    pub fn new(graph: &EntityGraph, omic: &[Option<f64>], text_dim: usize) -> Self {
        assert_eq!(omic.len(), graph.num_nodes(), "one omic value per node");
        Self::with_text(omic, text_matrix(graph, text_dim))
    }

    /// Same as [`NodeFeatureTable::new`] with precomputed text embeddings.
    pub fn with_text(omic: &[Option<f64>], text_embed: Tensor) -> Self {
        assert_eq!(omic.len(), text_embed.rows(), "one omic value per node");
        let present: Vec<bool> = omic.iter().map(|v| v.is_some_and(f64::is_finite)).collect();
        let omic = omic
            .iter()
            .map(|v| v.filter(|x| x.is_finite()).unwrap_or(0.0))
            .collect();
        Self { omic, present, text_embed }
    }

    pub fn from_dense(graph: &EntityGraph, omic: &[f64], text_dim: usize) -> Self {
        let wrapped: Vec<Option<f64>> = omic.iter().map(|&v| Some(v)).collect();
        Self::new(graph, &wrapped, text_dim)
    }

    pub fn num_nodes(&self) -> usize {
        self.omic.len()
    }

    /// `[omic, presence, text_embed...]` per row.
    pub fn input_matrix(&self) -> Tensor {
        let d = self.text_embed.cols();
        let mut out = Tensor::zeros(self.num_nodes(), d + 2);
        for i in 0..self.num_nodes() {
            out.set(i, 0, self.omic[i]);
            out.set(i, 1, if self.present[i] { 1.0 } else { 0.0 });
            for j in 0..d {
                out.set(i, 2 + j, self.text_embed.get(i, j));
            }
        }
        out
    }

    pub fn input_dim(&self) -> usize {
        self.text_embed.cols() + 2
    }
}
