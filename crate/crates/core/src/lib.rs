//! Sparse Ising graph recovery by exact Bayesian model selection on spin
//! pairs.
//!
//! The numerical core is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`.

pub mod classifier;
pub mod data;
pub mod error;
pub mod evidence;
pub mod metrics;
pub mod model_zoo;
pub mod pipeline;
pub mod plm;
pub mod quadrature;
pub mod recovery;
pub mod scalar;
pub mod synth;
pub mod timeseries;

pub use classifier::{decide, CacheSet, DecisionCache, SparsityPrior};
pub use data::{Encoding, SampleMatrix};
pub use error::{Error, Result};
pub use evidence::PairStats;
pub use model_zoo::ModelId;
pub use recovery::{ConfidenceGraph, Correction};

/// Sample moments with `f64` entries.
pub type Moments = evidence::Moments<f64>;
/// Parameter vector with `f64` entries.
pub type Theta = model_zoo::ThetaVector<f64>;
/// Per-model evidence with `f64` entries.
pub type Evidence = evidence::EvidenceResult<f64>;
/// Pair confidence with `f64` entries.
pub type Confidence = classifier::Confidence<f64>;
