//! Coordinated review campaign detection over signed reviewer networks.
//!
//! The pipeline: ingest a review log, score pairwise behavioral proximity
//! between reviewers, assemble a signed user-user network, sample positive
//! random walks, jointly train direct and indirect user embeddings, and rank
//! users by how tightly their embeddings cluster with their nearest peers.

pub mod error;
pub mod features;
pub mod kv;
pub mod metrics;
pub mod network;
pub mod review;
pub mod scoring;
pub mod synth;
pub mod trainer;
pub mod walks;

pub use error::{Error, Result};
pub use features::{FeatureConfig, PairFeatures, TimeUnit, ZetaMode};
pub use metrics::EvalReport;
pub use network::{Edge, IndicatorState, SignedNetwork, SparseMatrix};
pub use review::{Column, Dataset, LabelSet, ReviewRecord, Schema};
pub use scoring::SpamicityRanking;
pub use synth::{CampaignSpec, RatingPolicy};
pub use trainer::{EmbeddingState, EpochStats, LearningRate, TrainConfig, TrainOutput};
pub use walks::{NegativeSamplingTable, WalkConfig, WalkCorpus};
