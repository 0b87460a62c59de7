//! Aesthetic-space learning from crowd statistics.
//!
//! The pipeline turns per-image view/fave counts into a scalar score,
//! samples score-constrained triplets, trains a feed-forward encoder with a
//! triplet loss plus a norm-ordering term, and ranks images (or video frames)
//! by the Euclidean norm of their embeddings.
//!
//! All randomness flows through [`rng::seeded`], a ChaCha8 stream keyed by a
//! 64-bit seed, so every stage is reproducible.

pub mod data;
pub mod encoder;
pub mod error;
pub mod loss;
pub mod ranker;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trainer;
pub mod video;

pub use data::{compute_score, Dataset, ImageRecord, Score};
pub use encoder::EncoderParams;
pub use error::{Error, Result};
pub use loss::{LossConfig, TripletLossResult};
pub use ranker::{AgreementTable, RankedList};
pub use sampler::{PairRef, Sampler, SamplerConfig, SamplerStats, Triplet};
pub use synth::SynthConfig;
pub use trainer::{TrainConfig, TrainLog};
pub use video::{KalmanConfig, PeakConfig};
