//! Process-reward-guided subgraph generation over layered text-omic signaling
//! graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: the layered entity graph (promoter, gene, transcript, protein),
//!   its relation whitelist, TSV IO and h-hop protein retrieval.
//! - [`tensor`]: a small dense autodiff core with graph attention layers,
//!   feed-forward stacks, masked softmax and Adam.
//! - [`pretrain`]: masked-edge link prediction and graph-level status
//!   classification; the trained classifier becomes the step-wise reward model.
//! - [`generator`]: the edge-by-edge policy, rollout + rule reward, greedy
//!   acceptance and the multi-run retry schedule.
//! - [`benchmark`]: synthetic planted-motif graphs, omic profiles and QA
//!   instance files.
//! - [`eval`]: precision / recall / F1 / Jaccard / Hit@k scoring and cohort
//!   aggregation.
//! - [`pipeline`]: stage orchestration with seeded reproducibility and run
//!   manifests.
//!
//! Data-parallel loops (rollouts, per-sample gradients, batch evaluation,
//! per-instance generation) go through [`exec::Exec`], which uses rayon when
//! the `parallel` feature is enabled and falls back to plain iteration
//! otherwise.

pub mod benchmark;
pub mod eval;
pub mod exec;
pub mod generator;
pub mod graph;
pub mod pipeline;
pub mod pretrain;
pub mod seed;
pub mod tensor;

pub use exec::Exec;
pub use graph::{EntityGraph, EntityId, EntityLayer};
pub use tensor::Tensor;
