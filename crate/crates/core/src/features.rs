//! Per-frame pose features: normalized coordinates, pairwise joint distances
//! and bone elevation/azimuth angles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{JointTopology, Pose, SkeletonSequence};

/// Which feature groups go into a frame vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSet {
    /// Raw world coordinates.
    pub coords: bool,
    /// Coordinates in the normalized body frame.
    pub normalized: bool,
    /// Pairwise distances and bone angles.
    pub geometric: bool,
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self {
            coords: false,
            normalized: true,
            geometric: true,
        }
    }
}

impl FeatureSet {
    pub fn all() -> Self {
        Self {
            coords: true,
            normalized: true,
            geometric: true,
        }
    }

    /// Length of a frame vector for `joints` joints and `bones` bones.
    pub fn len(&self, joints: usize, bones: usize) -> usize {
        let mut n = 0;
        if self.coords {
            n += 3 * joints;
        }
        if self.normalized {
            n += 3 * joints;
        }
        if self.geometric {
            n += joints * joints.saturating_sub(1) / 2 + 2 * bones;
        }
        n
    }

    pub fn len_for(&self, topo: &JointTopology) -> usize {
        self.len(topo.num_joints(), topo.num_bones())
    }

    pub fn is_empty(&self) -> bool {
        !(self.coords || self.normalized || self.geometric)
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Parses a comma set such as `norm,geom`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = FeatureSet {
            coords: false,
            normalized: false,
            geometric: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "coords" => set.coords = true,
                "norm" => set.normalized = true,
                "geom" => set.geometric = true,
                other => return Err(Error::Argument(format!("unknown feature group {other:?}"))),
            }
        }
        if set.is_empty() {
            return Err(Error::Argument("empty feature set".into()));
        }
        Ok(set)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.coords, "coords"),
            (self.normalized, "norm"),
            (self.geometric, "geom"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        f.write_str(&parts.join(","))
    }
}

/// Feature groups of one frame. Disabled groups are empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureFrame {
    pub coords: Vec<f64>,
    pub normalized_coords: Vec<f64>,
    pub pairwise_distances: Vec<f64>,
    pub bone_angles: Vec<f64>,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.coords.len()
            + self.normalized_coords.len()
            + self.pairwise_distances.len()
            + self.bone_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation `[coords | normalized | distances | angles]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.coords);
        v.extend_from_slice(&self.normalized_coords);
        v.extend_from_slice(&self.pairwise_distances);
        v.extend_from_slice(&self.bone_angles);
        v
    }
}

fn flatten(pose: &Pose) -> Vec<f64> {
    pose.joints.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

/// Distances `‖x_i − x_j‖` for every pair `i < j` in lexicographic order.
pub fn pairwise_distances(pose: &Pose) -> Vec<f64> {
    let j = pose.joints.len();
    let mut out = Vec::with_capacity(j * j.saturating_sub(1) / 2);
    for a in 0..j {
        for b in a + 1..j {
            out.push((pose.joints[a] - pose.joints[b]).norm());
        }
    }
    out
}

/// Elevation then azimuth of every bone, measured in world coordinates.
/// Elevation is the angle above the X-Z plane, azimuth is `atan2(z, x)` in
/// `(−π, π]`. Zero-length bones and vertical bones get azimuth 0.
pub fn bone_angles(pose: &Pose, topo: &JointTopology) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * topo.num_bones());
    for &(p, c) in topo.bones() {
        let v = pose.joints[c] - pose.joints[p];
        let len = v.norm();
        if !(len > 0.0) {
            out.extend([0.0, 0.0]);
            continue;
        }
        let elevation = (v.y / len).clamp(-1.0, 1.0).asin();
        let azimuth = if v.x == 0.0 && v.z == 0.0 {
            0.0
        } else {
            let a = v.z.atan2(v.x);
            if a <= -PI {
                PI
            } else {
                a
            }
        };
        out.extend([elevation, azimuth]);
    }
    out
}

/// Features of one frame from its world pose and normalized pose.
pub fn frame_features(
    world: &Pose,
    normalized: &Pose,
    topo: &JointTopology,
    set: FeatureSet,
) -> FeatureFrame {
    FeatureFrame {
        coords: if set.coords {
            flatten(world)
        } else {
            Vec::new()
        },
        normalized_coords: if set.normalized {
            flatten(normalized)
        } else {
            Vec::new()
        },
        pairwise_distances: if set.geometric {
            pairwise_distances(normalized)
        } else {
            Vec::new()
        },
        bone_angles: if set.geometric {
            bone_angles(world, topo)
        } else {
            Vec::new()
        },
    }
}

pub fn assemble_features(
    seq_world: &SkeletonSequence,
    seq_norm: &SkeletonSequence,
    set: FeatureSet,
) -> Result<Vec<FeatureFrame>> {
    if seq_world.len() != seq_norm.len() {
        return Err(Error::Shape(format!(
            "world sequence has {} frames, normalized has {}",
            seq_world.len(),
            seq_norm.len()
        )));
    }
    if seq_world.topology.num_joints() != seq_norm.topology.num_joints() {
        return Err(Error::Shape("sequences use different topologies".into()));
    }
    if set.is_empty() {
        return Err(Error::Argument("empty feature set".into()));
    }
    let topo = &seq_world.topology;
    Ok(seq_world
        .poses
        .iter()
        .zip(&seq_norm.poses)
        .map(|(w, n)| frame_features(w, n, topo, set))
        .collect())
}
