//! View, location and scale normalization of poses.
//!
//! Each frame gets its own body frame `H`: the origin sits at the hip
//! midpoint, `X` points from the left hip to the right hip, `Y` is the
//! direction towards the spine keypoint made orthogonal to `X`, and
//! `Z = X × Y`. The pose is then scaled so the torso has a fixed length.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{JointTopology, Point, Pose, SkeletonSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    PerFrame,
    SequenceMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub torso_target_length: f64,
    pub degenerate_epsilon: f64,
    pub scale_mode: ScaleMode,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            torso_target_length: 1.0,
            degenerate_epsilon: 1e-8,
            scale_mode: ScaleMode::PerFrame,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.torso_target_length.is_finite() && self.torso_target_length > 0.0) {
            return Err(Error::Argument(
                "torso target length must be positive".into(),
            ));
        }
        if !(self.degenerate_epsilon.is_finite() && self.degenerate_epsilon > 0.0) {
            return Err(Error::Argument(
                "degenerate epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// World-to-body transform of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    /// Columns are the body frame's X, Y and Z axes expressed in world coordinates.
    pub rotation: Matrix3<f64>,
    pub origin: Point,
    pub scale: f64,
}

impl FrameTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            origin: Point::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.rotation.tr_mul(&(p - self.origin)) * self.scale
    }
}

/// Torso length `‖spine_shoulder − spine_base‖` of a world-frame pose.
pub fn torso_length(pose: &Pose, topo: &JointTopology) -> f64 {
    let d = topo.designations();
    (pose.joints[d.spine_shoulder] - pose.joints[d.spine_base]).norm()
}

fn body_axes(
    pose: &Pose,
    topo: &JointTopology,
    eps: f64,
) -> std::result::Result<(Point, Matrix3<f64>), (Point, &'static str)> {
    let d = topo.designations();
    let left = pose.joints[d.hip_left];
    let right = pose.joints[d.hip_right];
    let origin = (left + right) * 0.5;
    let hip = right - left;
    let hip_len = hip.norm();
    if !(hip_len >= eps) {
        return Err((origin, "hip joints coincide"));
    }
    let x = hip / hip_len;
    let spine = pose.joints[d.spine_mid] - origin;
    let spine_perp = spine - x * x.dot(&spine);
    let perp_len = spine_perp.norm();
    if !(perp_len >= eps) {
        return Err((origin, "spine is collinear with the hips"));
    }
    let y = spine_perp / perp_len;
    let z = x.cross(&y);
    Ok((origin, Matrix3::from_columns(&[x, y, z])))
}

/// Builds the frame transform of `pose`. When the pose is degenerate and `prev`
/// is given, its rotation and scale are kept with the current hip midpoint.
pub fn compute_frame_transform(
    pose: &Pose,
    topo: &JointTopology,
    cfg: &NormalizationConfig,
    prev: Option<&FrameTransform>,
) -> Result<FrameTransform> {
    let eps = cfg.degenerate_epsilon;
    let torso = torso_length(pose, topo);
    let axes = body_axes(pose, topo, eps).and_then(|(origin, rot)| {
        if torso >= eps {
            Ok((origin, rot))
        } else {
            Err((origin, "torso length below epsilon"))
        }
    });
    match axes {
        Ok((origin, rotation)) => Ok(FrameTransform {
            rotation,
            origin,
            scale: cfg.torso_target_length / torso,
        }),
        Err((origin, reason)) => match prev {
            Some(p) => Ok(FrameTransform { origin, ..*p }),
            None => Err(Error::DegeneratePose {
                frame: pose.frame_index,
                reason,
            }),
        },
    }
}

pub fn normalize_pose(pose: &Pose, tf: &FrameTransform) -> Pose {
    Pose {
        joints: pose.joints.iter().map(|p| tf.apply(p)).collect(),
        ..pose.clone()
    }
}

/// Normalizes every frame, threading the previous transform through degenerate
/// frames. A degenerate leading run borrows the first valid transform.
pub fn normalize_sequence(
    seq: &SkeletonSequence,
    cfg: &NormalizationConfig,
) -> Result<(SkeletonSequence, Vec<FrameTransform>)> {
    cfg.validate()?;
    if let Some(i) = seq.poses.iter().position(|p| !p.is_fully_valid()) {
        return Err(Error::Argument(format!(
            "pose {i} has invalid joints; repair the sequence first"
        )));
    }
    let topo = &seq.topology;
    let median_scale = match cfg.scale_mode {
        ScaleMode::PerFrame => None,
        ScaleMode::SequenceMedian => {
            let mut lengths: Vec<f64> = seq
                .poses
                .iter()
                .map(|p| torso_length(p, topo))
                .filter(|l| *l >= cfg.degenerate_epsilon)
                .collect();
            if lengths.is_empty() {
                if seq.poses.is_empty() {
                    None
                } else {
                    return Err(Error::DegeneratePose {
                        frame: 0,
                        reason: "no frame has a usable torso",
                    });
                }
            } else {
                lengths.sort_by(f64::total_cmp);
                let n = lengths.len();
                let median = if n % 2 == 1 {
                    lengths[n / 2]
                } else {
                    0.5 * (lengths[n / 2 - 1] + lengths[n / 2])
                };
                Some(cfg.torso_target_length / median)
            }
        }
    };

    // Seed for a degenerate first frame: the first transform that can be built.
    let mut prev: Option<FrameTransform> = None;
    if let Some(first) = seq.poses.first() {
        if compute_frame_transform(first, topo, cfg, None).is_err() {
            prev = seq
                .poses
                .iter()
                .find_map(|p| compute_frame_transform(p, topo, cfg, None).ok());
            if prev.is_none() {
                return Err(Error::DegeneratePose {
                    frame: 0,
                    reason: "no frame yields a body frame",
                });
            }
        }
    }

    let mut transforms = Vec::with_capacity(seq.len());
    let mut poses = Vec::with_capacity(seq.len());
    for pose in &seq.poses {
        let mut tf = compute_frame_transform(pose, topo, cfg, prev.as_ref())?;
        if let Some(s) = median_scale {
            tf.scale = s;
        }
        poses.push(normalize_pose(pose, &tf));
        transforms.push(tf);
        prev = Some(tf);
    }
    let out = SkeletonSequence {
        topology: topo.clone(),
        fps: seq.fps,
        poses,
        normalized: true,
    };
    Ok((out, transforms))
}
