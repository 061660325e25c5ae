//! Online one-shot and few-shot skeleton-based action recognition.
//!
//! A stream of 3D body poses is repaired, normalized into a hip-centred,
//! torso-scaled frame, turned into per-frame feature vectors and encoded
//! by a dilated causal temporal convolution network into 256-dim motion
//! embeddings. Occurrences of an anchor action are then detected in a
//! target stream by embedding distance, and the detections are scored
//! with windowed precision/recall/F1.

pub mod error;
pub mod eval;
pub mod features;
pub mod matcher;
pub mod normalization;
pub mod pipeline;
pub mod skeleton;
pub mod tcn;

pub use error::{Error, Result};
pub use eval::{EvalReport, MatchResult, SweepGame, SweepResult};
pub use features::{FeatureFrame, FeatureSet};
pub use matcher::{AnchorRepresentation, DetectionTimeline, Metric, Threshold};
pub use normalization::{FrameTransform, NormalizationConfig, ScaleMode};
pub use pipeline::{GameOutcome, OnlineEncoder, Pipeline, PipelineConfig};
pub use skeleton::{AnnotationSet, GameRecord, Interval, JointTopology, Pose, SkeletonSequence};
pub use tcn::{Embedding, EmbeddingStreamState, TcnConfig, TcnModel};
