//! Maximum-likelihood pronunciation estimation from several utterances of a
//! word.
//!
//! The exact search for the unit sequence shared by K utterances is
//! exponential in K. [`joint_viterbi2`] solves the two-utterance case exactly;
//! [`estimate_pronunciation`] folds K utterances into a growing master
//! utterance with K-1 pairwise alignments; [`brute_force_pronunciation`]
//! enumerates candidate sequences and serves as the exact reference on small
//! instances.

mod estimate;
mod joint;
mod oracle;
mod update;

pub use estimate::{estimate_pronunciation, estimate_pronunciation_emissions, EstimateConfig, MergeOrder, PronunciationEstimate};
pub use joint::{align_masters, joint_viterbi2, joint_viterbi2_emissions, Column, JointAlignment, MasterUtterance};
pub use oracle::{brute_force_pronunciation, ENUMERATION_LIMIT};
pub use update::{format_estimation_report, update_dictionary, DictionaryUpdate, EstimationRecord, Segmentation, UpdateConfig};
