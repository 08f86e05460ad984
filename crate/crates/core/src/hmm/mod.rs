//! Left-to-right unit graphs, Viterbi decoding, forced alignment and
//! segmental training.

mod align;
mod dictionary;
mod graph;
mod scorer;
mod train;
mod viterbi;

pub use align::{force_align, force_align_emissions, Alignment};
pub use dictionary::Dictionary;
pub use graph::{build_graph, DecodeGraph, GraphNode};
pub use scorer::{Emissions, Scorer};
pub use train::{viterbi_train_step, TrainStep};
pub use viterbi::{collapse, constrained_score, free_loop_viterbi, path_loglik, viterbi, StatePath};
