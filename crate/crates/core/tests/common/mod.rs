//! Synthetic skeletons and fixtures shared by the integration tests.
#![allow(dead_code)]

use moveseq::{GameRecord, Interval, JointTopology, Pose, SkeletonSequence};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type P = Vector3<f64>;

pub type Rand = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standing Kinect v2 body, metres, Y up, facing -Z.
pub fn rest_pose() -> Vec<P> {
    let mut j = vec![P::zeros(); 25];
    j[0] = P::new(0.0, 0.90, 0.0);
    j[1] = P::new(0.0, 1.15, 0.0);
    j[2] = P::new(0.0, 1.45, 0.0);
    j[3] = P::new(0.0, 1.60, 0.0);
    j[20] = P::new(0.0, 1.38, 0.0);
    // left side; the right side mirrors it in X
    let left: [(usize, P); 10] = [
        (4, P::new(-0.18, 1.40, 0.0)),
        (5, P::new(-0.21, 1.15, 0.0)),
        (6, P::new(-0.22, 0.92, 0.0)),
        (7, P::new(-0.22, 0.85, 0.0)),
        (21, P::new(-0.22, 0.78, 0.0)),
        (22, P::new(-0.19, 0.84, -0.03)),
        (12, P::new(-0.10, 0.88, 0.0)),
        (13, P::new(-0.11, 0.48, 0.0)),
        (14, P::new(-0.11, 0.08, 0.0)),
        (15, P::new(-0.11, 0.03, -0.10)),
    ];
    let mirror = [
        (4, 8),
        (5, 9),
        (6, 10),
        (7, 11),
        (21, 23),
        (22, 24),
        (12, 16),
        (13, 17),
        (14, 18),
        (15, 19),
    ];
    for (i, p) in left {
        j[i] = p;
        let r = mirror.iter().find(|(l, _)| *l == i).unwrap().1;
        j[r] = P::new(-p.x, p.y, p.z);
    }
    j
}

/// Rotates `joints[idx]` about `pivot` by `angle` around `axis`.
fn swing(joints: &mut [P], idx: &[usize], pivot: usize, axis: P, angle: f64) {
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
    let c = joints[pivot];
    for &i in idx {
        joints[i] = c + rot * (joints[i] - c);
    }
}

const RIGHT_ARM: [usize; 6] = [9, 10, 11, 23, 24, 8];
const RIGHT_FOREARM: [usize; 4] = [10, 11, 23, 24];
const LEFT_LEG: [usize; 3] = [13, 14, 15];
const LEFT_SHIN: [usize; 2] = [14, 15];

/// Right arm raised, forearm waving with a 20-frame period.
pub fn wave(t: usize) -> Vec<P> {
    let mut j = rest_pose();
    let lift = (t as f64 / 8.0).min(1.0);
    swing(&mut j, &RIGHT_ARM[..5], 8, P::z(), 2.3 * lift);
    let phase = (t as f64) * std::f64::consts::TAU / 20.0;
    swing(&mut j, &RIGHT_FOREARM, 9, P::z(), 0.6 * phase.sin() * lift);
    j
}

/// Left leg kicking forward.
pub fn kick(t: usize) -> Vec<P> {
    let mut j = rest_pose();
    let phase = (t as f64) * std::f64::consts::TAU / 24.0;
    let a = 0.9 * (0.5 - 0.5 * phase.cos());
    swing(&mut j, &LEFT_LEG, 12, P::x(), -a);
    swing(&mut j, &LEFT_SHIN, 13, P::x(), 0.8 * a);
    j
}

/// Standing still with a slight sway.
pub fn idle(t: usize) -> Vec<P> {
    let mut j = rest_pose();
    let s = 0.01 * ((t as f64) * 0.21).sin();
    for p in j.iter_mut() {
        p.x += s * (p.y - 0.9);
    }
    j
}

/// Places a pose somewhere in the room: yaw, offset and body size.
pub fn place(joints: &[P], yaw: f64, offset: P, scale: f64) -> Vec<P> {
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw);
    joints.iter().map(|p| rot * p * scale + offset).collect()
}

pub fn sequence(frames: Vec<Vec<P>>) -> SkeletonSequence {
    let poses = frames
        .into_iter()
        .enumerate()
        .map(|(i, j)| Pose::new(i, j))
        .collect();
    SkeletonSequence::new(JointTopology::kinect_v2(), 30.0, poses).unwrap()
}

pub fn motion(f: fn(usize) -> Vec<P>, range: std::ops::Range<usize>) -> Vec<Vec<P>> {
    range.map(f).collect()
}

/// A random non-degenerate body: the rest pose with every joint jittered.
pub fn random_body(rng: &mut impl Rng) -> Vec<P> {
    rest_pose()
        .into_iter()
        .map(|p| {
            p + P::new(
                rng.random_range(-0.08..0.08),
                rng.random_range(-0.08..0.08),
                rng.random_range(-0.08..0.08),
            )
        })
        .collect()
}

pub fn random_rotation(rng: &mut impl Rng) -> Rotation3<f64> {
    loop {
        let axis = P::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if axis.norm() > 0.1 {
            return Rotation3::from_axis_angle(
                &Unit::new_normalize(axis),
                rng.random_range(-3.1..3.1),
            );
        }
    }
}

pub fn random_frames(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Self-match game: the anchor waves; the target idles, repeats the anchor
/// verbatim over frames 60..=99 and idles again.
pub struct SelfMatch {
    pub anchor: SkeletonSequence,
    pub target: SkeletonSequence,
    pub unrelated: SkeletonSequence,
    pub game: GameRecord,
}

pub fn self_match_fixture() -> SelfMatch {
    let anchor_frames = motion(wave, 0..40);
    let mut target_frames = motion(idle, 0..60);
    target_frames.extend(anchor_frames.iter().cloned());
    target_frames.extend(motion(idle, 100..160));
    let mut unrelated = motion(idle, 0..60);
    unrelated.extend(motion(kick, 0..40));
    unrelated.extend(motion(idle, 100..160));
    let game = GameRecord {
        id: "wave01".into(),
        class_label: "wave".into(),
        anchor_intervals: vec![Interval::new(0, 39).unwrap()],
        target_intervals: vec![Interval::new(60, 99).unwrap()],
        idle_interval: Some(Interval::new(0, 29).unwrap()),
    };
    SelfMatch {
        anchor: sequence(anchor_frames),
        target: sequence(target_frames),
        unrelated: sequence(unrelated),
        game,
    }
}

/// Exhaustive reference for the detection matcher.
pub fn brute_force_match(detections: &[usize], gt: &[Interval], w: usize) -> (usize, usize, usize) {
    let hit = |iv: &Interval, n: usize| iv.start <= n && n <= iv.end + w;
    let tp = gt
        .iter()
        .filter(|iv| detections.iter().any(|&n| hit(iv, n)))
        .count();
    let mut free: Vec<usize> = detections
        .iter()
        .copied()
        .filter(|&n| !gt.iter().any(|iv| hit(iv, n)))
        .collect();
    free.sort_unstable();
    free.dedup();
    // fewest windows of w + 1 consecutive frames covering every unmatched frame
    let max = free.last().map_or(0, |&n| n + 1);
    let mut cover = vec![0usize; max + w + 2];
    for x in (0..max).rev() {
        cover[x] = if free.binary_search(&x).is_ok() {
            1 + cover[x + w + 1]
        } else {
            cover[x + 1]
        };
    }
    (tp, cover.first().copied().unwrap_or(0), gt.len() - tp)
}
