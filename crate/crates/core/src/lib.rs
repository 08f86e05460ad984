//! Joint learning of data-driven sub-word units ("abstract acoustic
//! elements") and a pronunciation dictionary from transcribed feature
//! utterances, with GMM and neural-network emission models and isolated-word
//! and continuous decoders for evaluation.
//!
//! All numeric types are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

pub mod acoustic;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod hmm;
pub mod mlp;
pub mod pipeline;
pub mod pronunciation;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type FeatureMatrixF64 = corpus::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = corpus::FeatureMatrix<f32>;
pub type CorpusF64 = corpus::Corpus<f64>;
pub type CorpusF32 = corpus::Corpus<f32>;
pub type GmmEmissionF64 = acoustic::GmmEmission<f64>;
pub type GmmEmissionF32 = acoustic::GmmEmission<f32>;
pub type AcousticModelSetF64 = acoustic::AcousticModelSet<f64>;
pub type AcousticModelSetF32 = acoustic::AcousticModelSet<f32>;
pub type EmissionsF64 = hmm::Emissions<f64>;
pub type EmissionsF32 = hmm::Emissions<f32>;
pub type JointAlignmentF64 = pronunciation::JointAlignment<f64>;
pub type JointAlignmentF32 = pronunciation::JointAlignment<f32>;
pub type MlpModelF64 = mlp::MlpModel<f64>;
pub type MlpModelF32 = mlp::MlpModel<f32>;
