//! Skeleton stream data model, JSONL ingestion and annotation files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

pub const SEQUENCE_FORMAT: &str = "moveseq-seq/1";

/// Joint indices the normalization relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Designations {
    pub hip_left: usize,
    pub hip_right: usize,
    pub spine_mid: usize,
    pub spine_base: usize,
    pub spine_shoulder: usize,
}

impl Designations {
    fn as_array(&self) -> [usize; 5] {
        [
            self.hip_left,
            self.hip_right,
            self.spine_mid,
            self.spine_base,
            self.spine_shoulder,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTopology {
    joint_names: Vec<String>,
    bones: Vec<(usize, usize)>,
    designations: Designations,
    mirror_map: Vec<usize>,
}

impl JointTopology {
    pub fn new(
        joint_names: Vec<String>,
        bones: Vec<(usize, usize)>,
        designations: Designations,
        mirror_map: Vec<usize>,
    ) -> Result<Self> {
        let j = joint_names.len();
        if j == 0 {
            return Err(Error::Topology("no joints".into()));
        }
        for (i, &(p, c)) in bones.iter().enumerate() {
            if p >= j || c >= j {
                return Err(Error::Topology(format!(
                    "bone {i} ({p},{c}) out of range for {j} joints"
                )));
            }
            if p == c {
                return Err(Error::Topology(format!(
                    "bone {i} connects joint {p} to itself"
                )));
            }
            if bones[..i]
                .iter()
                .any(|&(q, d)| (q, d) == (p, c) || (q, d) == (c, p))
            {
                return Err(Error::Topology(format!("duplicate bone ({p},{c})")));
            }
        }
        let des = designations.as_array();
        for (i, &d) in des.iter().enumerate() {
            if d >= j {
                return Err(Error::Topology(format!(
                    "designated joint {d} out of range"
                )));
            }
            if des[..i].contains(&d) {
                return Err(Error::Topology(format!("joint {d} designated twice")));
            }
        }
        if mirror_map.len() != j {
            return Err(Error::Topology(format!(
                "mirror map has {} entries, expected {j}",
                mirror_map.len()
            )));
        }
        for (i, &m) in mirror_map.iter().enumerate() {
            if m >= j || mirror_map[m] != i {
                return Err(Error::Topology(format!(
                    "mirror map is not an involution at joint {i}"
                )));
            }
        }
        Ok(Self {
            joint_names,
            bones,
            designations,
            mirror_map,
        })
    }

    /// The 25-joint Kinect v2 body with 24 bones.
    pub fn kinect_v2() -> Self {
        const NAMES: [&str; 25] = [
            "spine_base",
            "spine_mid",
            "neck",
            "head",
            "shoulder_left",
            "elbow_left",
            "wrist_left",
            "hand_left",
            "shoulder_right",
            "elbow_right",
            "wrist_right",
            "hand_right",
            "hip_left",
            "knee_left",
            "ankle_left",
            "foot_left",
            "hip_right",
            "knee_right",
            "ankle_right",
            "foot_right",
            "spine_shoulder",
            "hand_tip_left",
            "thumb_left",
            "hand_tip_right",
            "thumb_right",
        ];
        let bones = vec![
            (0, 1),
            (1, 20),
            (20, 2),
            (2, 3),
            (20, 4),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 21),
            (6, 22),
            (20, 8),
            (8, 9),
            (9, 10),
            (10, 11),
            (11, 23),
            (10, 24),
            (0, 12),
            (12, 13),
            (13, 14),
            (14, 15),
            (0, 16),
            (16, 17),
            (17, 18),
            (18, 19),
        ];
        let mut mirror: Vec<usize> = (0..25).collect();
        for (l, r) in [
            (4, 8),
            (5, 9),
            (6, 10),
            (7, 11),
            (12, 16),
            (13, 17),
            (14, 18),
            (15, 19),
            (21, 23),
            (22, 24),
        ] {
            mirror[l] = r;
            mirror[r] = l;
        }
        let designations = Designations {
            hip_left: 12,
            hip_right: 16,
            spine_mid: 1,
            spine_base: 0,
            spine_shoulder: 20,
        };
        Self::new(
            NAMES.iter().map(|s| s.to_string()).collect(),
            bones,
            designations,
            mirror,
        )
        .expect("kinect topology is valid")
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn num_bones(&self) -> usize {
        self.bones.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn bones(&self) -> &[(usize, usize)] {
        &self.bones
    }

    pub fn designations(&self) -> &Designations {
        &self.designations
    }

    pub fn mirror_map(&self) -> &[usize] {
        &self.mirror_map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    /// Dense position of the pose in its sequence.
    pub frame_index: usize,
    /// Frame number as read from the file, kept through resampling.
    pub source_frame: usize,
    pub joints: Vec<Point>,
    pub valid: Vec<bool>,
}

impl Pose {
    /// A pose with every joint valid.
    pub fn new(frame_index: usize, joints: Vec<Point>) -> Self {
        let valid = joints.iter().map(is_finite).collect();
        Self {
            frame_index,
            source_frame: frame_index,
            joints,
            valid,
        }
    }

    pub fn is_fully_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }
}

fn is_finite(p: &Point) -> bool {
    p.iter().all(|c| c.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub topology: JointTopology,
    pub fps: f64,
    pub poses: Vec<Pose>,
    /// Set once the poses are expressed in the normalized body frame.
    pub normalized: bool,
}

impl SkeletonSequence {
    pub fn new(topology: JointTopology, fps: f64, poses: Vec<Pose>) -> Result<Self> {
        let seq = Self {
            topology,
            fps,
            poses,
            normalized: false,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Argument(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        let j = self.topology.num_joints();
        for (i, pose) in self.poses.iter().enumerate() {
            if pose.joints.len() != j || pose.valid.len() != j {
                return Err(Error::Shape(format!(
                    "pose {i} has {} joints, topology has {j}",
                    pose.joints.len()
                )));
            }
            if i > 0 && pose.source_frame <= self.poses[i - 1].source_frame {
                return Err(Error::Argument(format!(
                    "frame numbers not increasing at pose {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_sequence(BufReader::new(file))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let topo = &self.topology;
        let header = HeaderRecord {
            format: SEQUENCE_FORMAT.to_string(),
            fps: self.fps,
            joints: topo.joint_names.clone(),
            bones: topo.bones.iter().map(|&(p, c)| [p, c]).collect(),
            designations: topo.designations,
            mirror_map: topo.mirror_map.clone(),
            normalized: self.normalized.then_some(true),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for pose in &self.poses {
            let joints: Vec<[Option<f64>; 3]> = pose
                .joints
                .iter()
                .zip(&pose.valid)
                .map(|(p, &ok)| {
                    let c = |v: f64| (ok && v.is_finite()).then_some(v);
                    [c(p.x), c(p.y), c(p.z)]
                })
                .collect();
            let rec = FrameRecordOut {
                frame: pose.source_frame,
                joints,
            };
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    format: String,
    fps: f64,
    joints: Vec<String>,
    bones: Vec<[usize; 2]>,
    designations: Designations,
    mirror_map: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalized: Option<bool>,
}

#[derive(Deserialize)]
struct FrameRecordIn {
    frame: usize,
    joints: Vec<Option<[Option<f64>; 3]>>,
}

#[derive(Serialize)]
struct FrameRecordOut {
    frame: usize,
    joints: Vec<[Option<f64>; 3]>,
}

/// Parses a `moveseq-seq/1` JSONL stream. Null or missing coordinates mark the
/// joint invalid; the stored value is NaN.
pub fn parse_sequence<R: BufRead>(reader: R) -> Result<SkeletonSequence> {
    let mut lines = reader.lines().enumerate();
    let (header_no, header_line) = loop {
        match lines.next() {
            None => return Err(Error::parse(1, "missing header")),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
                if !line.trim().is_empty() {
                    break (i + 1, line);
                }
            }
        }
    };
    let header: HeaderRecord = serde_json::from_str(&header_line)
        .map_err(|e| Error::parse(header_no, format!("malformed header: {e}")))?;
    if header.format != SEQUENCE_FORMAT {
        return Err(Error::parse(
            header_no,
            format!("unsupported format {:?}", header.format),
        ));
    }
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(Error::parse(
            header_no,
            format!("fps must be positive, got {}", header.fps),
        ));
    }
    let topology = JointTopology::new(
        header.joints,
        header.bones.iter().map(|b| (b[0], b[1])).collect(),
        header.designations,
        header.mirror_map,
    )
    .map_err(|e| Error::parse(header_no, e.to_string()))?;
    let j = topology.num_joints();

    let mut poses: Vec<Pose> = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecordIn = serde_json::from_str(&line)
            .map_err(|e| Error::parse(line_no, format!("malformed frame: {e}")))?;
        if rec.joints.len() != j {
            return Err(Error::parse(
                line_no,
                format!(
                    "joint count mismatch: expected {j}, got {}",
                    rec.joints.len()
                ),
            ));
        }
        if let Some(prev) = poses.last() {
            if rec.frame <= prev.source_frame {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "non-monotone frames: {} follows {}",
                        rec.frame, prev.source_frame
                    ),
                ));
            }
        }
        let mut joints = Vec::with_capacity(j);
        let mut valid = Vec::with_capacity(j);
        for c in rec.joints {
            let p = match c {
                Some([Some(x), Some(y), Some(z)]) => Point::new(x, y, z),
                _ => Point::repeat(f64::NAN),
            };
            valid.push(is_finite(&p));
            joints.push(p);
        }
        poses.push(Pose {
            frame_index: poses.len(),
            source_frame: rec.frame,
            joints,
            valid,
        });
    }
    Ok(SkeletonSequence {
        topology,
        fps: header.fps,
        poses,
        normalized: header.normalized.unwrap_or(false),
    })
}

/// Replaces invalid joints by their most recent valid value, or the first
/// later valid value when none precedes them. Returns the repaired sequence and
/// the number of joint values replaced.
pub fn repair_pose(seq: &SkeletonSequence) -> Result<(SkeletonSequence, usize)> {
    let mut out = seq.clone();
    let mut repaired = 0;
    for j in 0..seq.topology.num_joints() {
        let first_valid = seq.poses.iter().position(|p| p.valid[j]);
        let Some(first_valid) = first_valid else {
            if seq.poses.is_empty() {
                continue;
            }
            return Err(Error::UnrecoverableJoint {
                joint: j,
                name: seq.topology.joint_names[j].clone(),
            });
        };
        let mut last = seq.poses[first_valid].joints[j];
        for pose in out.poses.iter_mut() {
            if pose.valid[j] {
                last = pose.joints[j];
            } else {
                pose.joints[j] = last;
                pose.valid[j] = true;
                repaired += 1;
            }
        }
    }
    Ok((out, repaired))
}

/// Keeps every `stride`-th pose starting at the first one.
pub fn resample(seq: &SkeletonSequence, stride: usize) -> Result<SkeletonSequence> {
    if stride == 0 {
        return Err(Error::Argument("stride must be at least 1".into()));
    }
    let poses = seq
        .poses
        .iter()
        .step_by(stride)
        .enumerate()
        .map(|(i, p)| Pose {
            frame_index: i,
            ..p.clone()
        })
        .collect();
    Ok(SkeletonSequence {
        topology: seq.topology.clone(),
        fps: seq.fps / stride as f64,
        poses,
        normalized: seq.normalized,
    })
}

/// Inclusive frame range, written as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::Annotation(format!(
                "interval [{start}, {end}] has start > end"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    /// Maps the interval onto a sequence resampled with `stride`.
    pub fn downsample(&self, stride: usize) -> Interval {
        Interval {
            start: self.start / stride,
            end: self.end / stride,
        }
    }
}

impl TryFrom<[usize; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [usize; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [usize; 2] {
    fn from(i: Interval) -> Self {
        [i.start, i.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub anchor_intervals: Vec<Interval>,
    #[serde(default)]
    pub target_intervals: Vec<Interval>,
    #[serde(default)]
    pub idle_interval: Option<Interval>,
}

impl GameRecord {
    /// Checks interval consistency against the anchor and target lengths.
    pub fn validate(&self, anchor_len: usize, target_len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Annotation(format!("game {}: {msg}", self.id)));
        if self.anchor_intervals.is_empty() {
            return bad("no anchor intervals".into());
        }
        for iv in &self.anchor_intervals {
            if iv.end >= anchor_len {
                return bad(format!(
                    "anchor interval [{}, {}] beyond {anchor_len} frames",
                    iv.start, iv.end
                ));
            }
        }
        for iv in &self.target_intervals {
            if iv.end >= target_len {
                return bad(format!(
                    "target interval [{}, {}] beyond {target_len} frames",
                    iv.start, iv.end
                ));
            }
        }
        if let Some(idle) = &self.idle_interval {
            if idle.end >= target_len {
                return bad(format!(
                    "idle interval [{}, {}] beyond {target_len} frames",
                    idle.start, idle.end
                ));
            }
            if self.target_intervals.iter().any(|t| t.overlaps(idle)) {
                return bad("idle interval overlaps a target interval".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub games: Vec<GameRecord>,
}

impl AnnotationSet {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: AnnotationSet =
            serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        for g in &set.games {
            if let Some(idle) = &g.idle_interval {
                if g.target_intervals.iter().any(|t| t.overlaps(idle)) {
                    return Err(Error::Annotation(format!(
                        "game {}: idle interval overlaps a target interval",
                        g.id
                    )));
                }
            }
        }
        Ok(set)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("annotations serialize");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn game(&self, id: &str) -> Option<&GameRecord> {
        self.games.iter().find(|g| g.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_frame_seq() -> SkeletonSequence {
        let topo = JointTopology::kinect_v2();
        let poses = (0..2)
            .map(|f| {
                Pose::new(
                    f,
                    (0..25)
                        .map(|j| Point::new(j as f64 * 0.01, 0.1 * f as f64 + 1.0 / 3.0, -0.7))
                        .collect(),
                )
            })
            .collect();
        SkeletonSequence::new(topo, 30.0, poses).unwrap()
    }

    #[test]
    fn kinect_topology_shape() {
        let t = JointTopology::kinect_v2();
        assert_eq!(t.num_joints(), 25);
        assert_eq!(t.num_bones(), 24);
        for j in 0..25 {
            assert_eq!(t.mirror_map()[t.mirror_map()[j]], j);
        }
    }

    #[test]
    fn topology_rejects_bad_bones_and_mirrors() {
        let names: Vec<String> = (0..5).map(|i| format!("j{i}")).collect();
        let des = Designations {
            hip_left: 0,
            hip_right: 1,
            spine_mid: 2,
            spine_base: 3,
            spine_shoulder: 4,
        };
        let id: Vec<usize> = (0..5).collect();
        assert!(JointTopology::new(names.clone(), vec![(0, 5)], des, id.clone()).is_err());
        assert!(JointTopology::new(names.clone(), vec![(0, 1), (1, 0)], des, id.clone()).is_err());
        assert!(JointTopology::new(names.clone(), vec![], des, vec![1, 2, 0, 3, 4]).is_err());
        let dup = Designations {
            spine_mid: 0,
            ..des
        };
        assert!(JointTopology::new(names.clone(), vec![], dup, id.clone()).is_err());
        assert!(JointTopology::new(names, vec![(0, 1)], des, id).is_ok());
    }

    #[test]
    fn round_trip_two_frames() {
        let seq = two_frame_seq();
        let text = seq.to_jsonl_string();
        let back = parse_sequence(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.topology.num_joints(), 25);
        assert_eq!(back, seq);
    }

    #[test]
    fn null_coordinate_marks_joint_invalid() {
        let seq = two_frame_seq();
        let text = seq.to_jsonl_string();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
        rec["joints"][7][1] = serde_json::Value::Null;
        lines[2] = rec.to_string();
        let back = parse_sequence(lines.join("\n").as_bytes()).unwrap();
        assert!(!back.poses[1].valid[7]);
        assert!(back.poses[1].joints[7].y.is_nan());
        assert_eq!(back.poses[1].valid.iter().filter(|v| !**v).count(), 1);
        assert!(back.poses[0].is_fully_valid());
    }

    #[test]
    fn joint_count_mismatch_names_line() {
        let seq = two_frame_seq();
        let text = seq.to_jsonl_string();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut rec: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        rec["joints"].as_array_mut().unwrap().pop();
        lines[1] = rec.to_string();
        let err = parse_sequence(lines.join("\n").as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("joint count mismatch"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_and_bad_header() {
        let seq = two_frame_seq();
        let text = seq.to_jsonl_string();
        let lines: Vec<&str> = text.lines().collect();
        let swapped = [lines[0], lines[2], lines[1]].join("\n");
        assert!(matches!(
            parse_sequence(swapped.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        let bad = text.replacen("moveseq-seq/1", "other/2", 1);
        assert!(matches!(
            parse_sequence(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_sequence("{not json".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn repair_carries_forward_and_back_fills() {
        let mut seq = two_frame_seq();
        let extra: Vec<Pose> = (2..6)
            .map(|f| {
                Pose::new(
                    f,
                    (0..25)
                        .map(|j| Point::new(f as f64, j as f64, 0.0))
                        .collect(),
                )
            })
            .collect();
        seq.poses.extend(extra);
        // invalid at frame 5, valid at 4
        seq.poses[5].joints[3] = Point::repeat(f64::NAN);
        seq.poses[5].valid[3] = false;
        // invalid only at frame 0, valid at 1
        seq.poses[0].joints[9] = Point::repeat(f64::NAN);
        seq.poses[0].valid[9] = false;
        let (fixed, count) = repair_pose(&seq).unwrap();
        assert_eq!(count, 2);
        assert_eq!(fixed.poses[5].joints[3], seq.poses[4].joints[3]);
        assert_eq!(fixed.poses[0].joints[9], seq.poses[1].joints[9]);
        assert!(fixed.poses.iter().all(Pose::is_fully_valid));
        let (again, count) = repair_pose(&fixed).unwrap();
        assert_eq!(count, 0);
        assert_eq!(again, fixed);
    }

    #[test]
    fn repair_rejects_always_invalid_joint() {
        let mut seq = two_frame_seq();
        for p in &mut seq.poses {
            p.valid[4] = false;
        }
        assert!(matches!(
            repair_pose(&seq),
            Err(Error::UnrecoverableJoint { joint: 4, .. })
        ));
    }

    #[test]
    fn resample_counts_and_fps() {
        let topo = JointTopology::kinect_v2();
        let poses = (0..10)
            .map(|f| Pose::new(f, vec![Point::new(f as f64, 0.0, 0.0); 25]))
            .collect();
        let seq = SkeletonSequence::new(topo, 30.0, poses).unwrap();
        let half = resample(&seq, 2).unwrap();
        assert_eq!(half.len(), 5);
        assert_eq!(half.fps, 15.0);
        assert_eq!(
            half.poses.iter().map(|p| p.frame_index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            half.poses
                .iter()
                .map(|p| p.source_frame)
                .collect::<Vec<_>>(),
            vec![0, 2, 4, 6, 8]
        );
        assert_eq!(resample(&seq, 1).unwrap(), seq);
        assert!(matches!(resample(&seq, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn annotation_file_schema() {
        let json = r#"{"games":[{"id":"g1","class":"waving","anchor_intervals":[[0,39]],"target_intervals":[[60,99]],"idle_interval":[0,50]}]}"#;
        let set: AnnotationSet = serde_json::from_str(json).unwrap();
        let g = &set.games[0];
        assert_eq!(g.class_label, "waving");
        assert_eq!(g.target_intervals[0], Interval { start: 60, end: 99 });
        assert!(g.validate(40, 160).is_ok());
        assert!(g.validate(30, 160).is_err());
        let back: AnnotationSet =
            serde_json::from_str(&serde_json::to_string(&set).unwrap()).unwrap();
        assert_eq!(back, set);
        let reversed = r#"{"games":[{"id":"g","class":"c","anchor_intervals":[[5,2]]}]}"#;
        assert!(serde_json::from_str::<AnnotationSet>(reversed).is_err());
        let overlap = GameRecord {
            idle_interval: Some(Interval { start: 50, end: 70 }),
            ..g.clone()
        };
        assert!(overlap.validate(40, 160).is_err());
    }
}
