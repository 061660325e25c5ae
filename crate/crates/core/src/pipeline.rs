//! End-to-end composition from raw skeleton streams to detections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{match_detections, MatchResult, SweepGame};
use crate::features::{assemble_features, frame_features, FeatureSet};
use crate::matcher::{
    detect_stream, dynamic_threshold, AnchorRepresentation, DetectionTimeline, Metric, Threshold,
};
use crate::normalization::{
    compute_frame_transform, normalize_pose, normalize_sequence, FrameTransform,
    NormalizationConfig,
};
use crate::skeleton::{
    repair_pose, resample, GameRecord, Interval, JointTopology, Pose, SkeletonSequence,
};
use crate::tcn::{Embedding, EmbeddingStreamState, TcnModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub normalization: NormalizationConfig,
    pub features: FeatureSet,
    pub metric: Metric,
    pub m: usize,
    pub alpha: f64,
    pub dynamic: bool,
    pub frame_skip: usize,
    /// Matching window for scoring; `None` uses the encoder window.
    pub match_window: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            normalization: NormalizationConfig::default(),
            features: FeatureSet::default(),
            metric: Metric::Cos,
            m: 3,
            alpha: 0.4,
            dynamic: true,
            frame_skip: 1,
            match_window: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if self.features.is_empty() {
            return Err(Error::Argument("empty feature set".into()));
        }
        if self.m == 0 {
            return Err(Error::Argument("m must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.frame_skip == 0 {
            return Err(Error::Argument("frame skip must be at least 1".into()));
        }
        if self.match_window == Some(0) {
            return Err(Error::Argument("match window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything produced for one game.
#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub anchor: AnchorRepresentation,
    pub timeline: DetectionTimeline,
    pub matches: MatchResult,
    /// Ground truth in the (possibly resampled) target frame numbering.
    pub gt: Vec<Interval>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    model: TcnModel,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, model: TcnModel) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, model })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> &TcnModel {
        &self.model
    }

    pub fn match_window(&self) -> usize {
        self.config.match_window.unwrap_or(self.model.window_w())
    }

    fn check_topology(&self, topo: &JointTopology) -> Result<()> {
        let len = self.config.features.len_for(topo);
        if len != self.model.config().input_dim {
            return Err(Error::Shape(format!(
                "feature set {} gives {len} values for this topology, encoder expects {}",
                self.config.features,
                self.model.config().input_dim
            )));
        }
        Ok(())
    }

    /// Repaired, resampled world sequence and its normalized counterpart.
    pub fn prepare(&self, seq: &SkeletonSequence) -> Result<(SkeletonSequence, SkeletonSequence)> {
        let (repaired, _) = repair_pose(seq)?;
        let world = resample(&repaired, self.config.frame_skip)?;
        let (norm, _) = normalize_sequence(&world, &self.config.normalization)?;
        Ok((world, norm))
    }

    /// Flattened feature vectors, one per kept frame.
    pub fn features(&self, seq: &SkeletonSequence) -> Result<Vec<Vec<f64>>> {
        let (world, norm) = self.prepare(seq)?;
        Ok(assemble_features(&world, &norm, self.config.features)?
            .iter()
            .map(|f| f.to_vec())
            .collect())
    }

    /// Streaming embeddings: frame `n` only sees frames up to `n`.
    pub fn encode_sequence(&self, seq: &SkeletonSequence) -> Result<Vec<Embedding>> {
        self.check_topology(&seq.topology)?;
        let feats = self.features(seq)?;
        let mut state = EmbeddingStreamState::new(&self.model);
        feats
            .iter()
            .map(|f| self.model.stream_step(&mut state, f))
            .collect()
    }

    /// Anchor built from the last `m` embeddings of a whole sequence.
    pub fn anchor_from_sequences(
        &self,
        seqs: &[SkeletonSequence],
        label: &str,
    ) -> Result<AnchorRepresentation> {
        let per_seq = seqs
            .iter()
            .map(|s| self.encode_sequence(s))
            .collect::<Result<Vec<_>>>()?;
        AnchorRepresentation::build(&per_seq, self.config.m, label)
    }

    pub fn classify(
        &self,
        anchors: &[AnchorRepresentation],
        segment: &SkeletonSequence,
    ) -> Result<String> {
        let emb = self.encode_sequence(segment)?;
        let last = emb
            .last()
            .ok_or_else(|| Error::Argument("segment has no frames".into()))?;
        crate::matcher::classify_segment(anchors, last, self.config.metric)
    }

    /// Per anchor interval, the anchor embeddings from its start to its end frame.
    fn anchor_segments(
        &self,
        anchor_seqs: &[SkeletonSequence],
        game: &GameRecord,
    ) -> Result<Vec<Vec<Embedding>>> {
        if anchor_seqs.is_empty() {
            return Err(Error::Argument("no anchor sequence".into()));
        }
        if anchor_seqs.len() != 1 && anchor_seqs.len() != game.anchor_intervals.len() {
            return Err(Error::Annotation(format!(
                "game {}: {} anchor sequences for {} anchor intervals",
                game.id,
                anchor_seqs.len(),
                game.anchor_intervals.len()
            )));
        }
        if game.anchor_intervals.is_empty() {
            return Err(Error::Annotation(format!(
                "game {}: anchor interval list is empty",
                game.id
            )));
        }
        let encoded = anchor_seqs
            .iter()
            .map(|s| self.encode_sequence(s))
            .collect::<Result<Vec<_>>>()?;
        let stride = self.config.frame_skip;
        game.anchor_intervals
            .iter()
            .enumerate()
            .map(|(i, iv)| {
                let emb = &encoded[if encoded.len() == 1 { 0 } else { i }];
                let iv = iv.downsample(stride);
                if iv.end >= emb.len() {
                    return Err(Error::Annotation(format!(
                        "game {}: anchor interval ends at frame {} but the anchor has {} frames",
                        game.id,
                        iv.end,
                        emb.len()
                    )));
                }
                Ok(emb[iv.start..=iv.end].to_vec())
            })
            .collect()
    }

    fn scaled(&self, iv: &Interval, len: usize, what: &str, id: &str) -> Result<Interval> {
        let iv = iv.downsample(self.config.frame_skip);
        if iv.end >= len {
            return Err(Error::Annotation(format!(
                "game {id}: {what} interval ends at {} beyond {len} frames",
                iv.end
            )));
        }
        Ok(iv)
    }

    /// Embeddings and annotations of one game, ready for threshold sweeps.
    pub fn sweep_game(
        &self,
        anchor_seqs: &[SkeletonSequence],
        target: &SkeletonSequence,
        game: &GameRecord,
    ) -> Result<SweepGame> {
        let anchor_sequences = self.anchor_segments(anchor_seqs, game)?;
        let target_emb = self.encode_sequence(target)?;
        let n = target_emb.len();
        let gt = game
            .target_intervals
            .iter()
            .map(|iv| self.scaled(iv, n, "target", &game.id))
            .collect::<Result<Vec<_>>>()?;
        let idle = game
            .idle_interval
            .as_ref()
            .map(|iv| {
                self.scaled(iv, n, "idle", &game.id)
                    .map(|iv| target_emb[iv.start..=iv.end].to_vec())
            })
            .transpose()?;
        Ok(SweepGame {
            id: game.id.clone(),
            class_label: game.class_label.clone(),
            anchor_sequences,
            target: target_emb,
            gt,
            idle,
        })
    }

    /// Detects the anchor action across the target and scores it against the
    /// game's ground truth.
    pub fn run_game(
        &self,
        anchor_seqs: &[SkeletonSequence],
        target: &SkeletonSequence,
        game: &GameRecord,
    ) -> Result<GameOutcome> {
        let g = self.sweep_game(anchor_seqs, target, game)?;
        self.run_prepared(&g)
    }

    pub fn run_prepared(&self, g: &SweepGame) -> Result<GameOutcome> {
        let cfg = &self.config;
        let anchor =
            AnchorRepresentation::build(&g.anchor_sequences, cfg.m, g.class_label.clone())?;
        let threshold = match (&g.idle, cfg.dynamic) {
            (Some(idle), true) => dynamic_threshold(cfg.alpha, &anchor, idle, cfg.metric)?,
            _ => Threshold::fixed(cfg.alpha),
        };
        let timeline = detect_stream(&anchor, &g.target, threshold, cfg.metric)?;
        let matches = match_detections(&timeline.detections(), &g.gt, self.match_window())?;
        Ok(GameOutcome {
            anchor,
            timeline,
            matches,
            gt: g.gt.clone(),
        })
    }
}

pub fn emit_timeline(timeline: &DetectionTimeline, path: impl AsRef<Path>) -> Result<()> {
    timeline.write_csv(path)
}

/// Frame-by-frame encoder for live streams. Invalid joints take their last
/// valid value; degenerate frames reuse the previous body frame.
#[derive(Debug, Clone)]
pub struct OnlineEncoder<'a> {
    pipeline: &'a Pipeline,
    topology: JointTopology,
    state: EmbeddingStreamState,
    prev_transform: Option<FrameTransform>,
    last_valid: Vec<Option<crate::skeleton::Point>>,
}

impl<'a> OnlineEncoder<'a> {
    pub fn new(pipeline: &'a Pipeline, topology: JointTopology) -> Result<Self> {
        pipeline.check_topology(&topology)?;
        let j = topology.num_joints();
        Ok(Self {
            pipeline,
            topology,
            state: EmbeddingStreamState::new(&pipeline.model),
            prev_transform: None,
            last_valid: vec![None; j],
        })
    }

    pub fn push(&mut self, pose: &Pose) -> Result<Embedding> {
        let j = self.topology.num_joints();
        if pose.joints.len() != j {
            return Err(Error::Shape(format!(
                "pose has {} joints, topology has {j}",
                pose.joints.len()
            )));
        }
        let mut pose = pose.clone();
        for (i, (p, ok)) in pose
            .joints
            .iter_mut()
            .zip(pose.valid.iter_mut())
            .enumerate()
        {
            if *ok {
                self.last_valid[i] = Some(*p);
            } else {
                *p = self.last_valid[i].ok_or_else(|| Error::UnrecoverableJoint {
                    joint: i,
                    name: self.topology.joint_names()[i].clone(),
                })?;
                *ok = true;
            }
        }
        let cfg = &self.pipeline.config;
        let tf = compute_frame_transform(
            &pose,
            &self.topology,
            &cfg.normalization,
            self.prev_transform.as_ref(),
        )?;
        self.prev_transform = Some(tf);
        let norm = normalize_pose(&pose, &tf);
        let feats = frame_features(&pose, &norm, &self.topology, cfg.features).to_vec();
        self.pipeline.model.stream_step(&mut self.state, &feats)
    }
}
