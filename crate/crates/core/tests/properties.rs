mod common;

use common::{random_body, rest_pose, rng, P};
use moveseq::features::{bone_angles, frame_features, pairwise_distances};
use moveseq::matcher::{classify_segment, cosine_distance, js_distance};
use moveseq::normalization::{compute_frame_transform, normalize_sequence};
use moveseq::skeleton::{repair_pose, resample, Designations};
use moveseq::*;
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::Rng;

fn rotation(axis: (f64, f64, f64), angle: f64) -> Rotation3<f64> {
    let a = Vector3::new(axis.0, axis.1, axis.2);
    if a.norm() < 1e-3 {
        Rotation3::identity()
    } else {
        Rotation3::from_axis_angle(&Unit::new_normalize(a), angle)
    }
}

fn axis() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
}

fn offset() -> impl Strategy<Value = P> {
    (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64).prop_map(|(x, y, z)| P::new(x, y, z))
}

fn body_sequence(seed: u64, n: usize) -> SkeletonSequence {
    let mut r = rng(seed);
    common::sequence((0..n).map(|_| random_body(&mut r)).collect())
}

fn moved(seq: &SkeletonSequence, rot: &Rotation3<f64>, t: P, s: f64) -> SkeletonSequence {
    let mut out = seq.clone();
    for p in &mut out.poses {
        for j in &mut p.joints {
            *j = rot * *j * s + t;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_sequence_is_rigid_and_scale_invariant(
        seed in any::<u64>(), ax in axis(), angle in -3.1..3.1f64, t in offset(), s in 0.2..5.0f64,
    ) {
        let seq = body_sequence(seed, 6);
        let cfg = NormalizationConfig::default();
        let (a, _) = normalize_sequence(&seq, &cfg).unwrap();
        let (b, _) = normalize_sequence(&moved(&seq, &rotation(ax, angle), t, s), &cfg).unwrap();
        for (p, q) in a.poses.iter().zip(&b.poses) {
            for (x, y) in p.joints.iter().zip(&q.joints) {
                prop_assert!((x - y).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn hips_land_on_the_x_axis(seed in any::<u64>()) {
        let seq = body_sequence(seed, 3);
        let d = *seq.topology.designations();
        let (norm, transforms) = normalize_sequence(&seq, &NormalizationConfig::default()).unwrap();
        for (p, tf) in norm.poses.iter().zip(&transforms) {
            let (l, r) = (p.joints[d.hip_left], p.joints[d.hip_right]);
            prop_assert!((l.x + r.x).abs() < 1e-9 && r.x > 0.0);
            prop_assert!(l.y.abs() < 1e-9 && l.z.abs() < 1e-9 && r.y.abs() < 1e-9 && r.z.abs() < 1e-9);
            prop_assert!((tf.rotation.determinant() - 1.0).abs() < 1e-9);
            // spine_mid sits in the upper half of the X-Y plane
            let m = p.joints[d.spine_mid];
            prop_assert!(m.y > 0.0 && m.z.abs() < 1e-9);
        }
    }

    #[test]
    fn feature_length_matches_formula(joints in 5usize..40, extra_bones in 0usize..30, seed in any::<u64>()) {
        let mut r = rng(seed);
        // spanning chain plus random extra bones
        let mut bones: Vec<(usize, usize)> = (1..joints).map(|c| (c - 1, c)).collect();
        for _ in 0..extra_bones {
            let (a, b) = (r.random_range(0..joints), r.random_range(0..joints));
            if a != b && !bones.iter().any(|&(p, c)| (p, c) == (a, b) || (p, c) == (b, a)) {
                bones.push((a, b));
            }
        }
        let des = Designations { hip_left: 0, hip_right: 1, spine_mid: 2, spine_base: 3, spine_shoulder: 4 };
        let names = (0..joints).map(|i| format!("j{i}")).collect();
        let topo = JointTopology::new(names, bones, des, (0..joints).collect()).unwrap();
        let pose = Pose::new(0, (0..joints).map(|_| P::new(r.random(), r.random(), r.random())).collect());
        for set in ["norm", "geom", "coords", "norm,geom", "coords,norm,geom"] {
            let set: FeatureSet = set.parse().unwrap();
            let f = frame_features(&pose, &pose, &topo, set);
            prop_assert_eq!(f.len(), set.len_for(&topo));
            prop_assert_eq!(f.to_vec().len(), set.len(joints, topo.num_bones()));
        }
        let geom = frame_features(&pose, &pose, &topo, "geom".parse().unwrap());
        prop_assert_eq!(geom.pairwise_distances.len(), joints * (joints - 1) / 2);
        prop_assert_eq!(geom.bone_angles.len(), 2 * topo.num_bones());
    }

    #[test]
    fn distance_vector_rebuilds_a_symmetric_matrix(seed in any::<u64>()) {
        let pose = Pose::new(0, random_body(&mut rng(seed)));
        let d = pairwise_distances(&pose);
        let j = pose.joints.len();
        let mut m = vec![vec![f64::NAN; j]; j];
        let mut k = 0;
        for a in 0..j {
            m[a][a] = 0.0;
            for b in a + 1..j {
                m[a][b] = d[k];
                m[b][a] = d[k];
                k += 1;
            }
        }
        prop_assert_eq!(k, d.len());
        for a in 0..j {
            prop_assert_eq!(m[a][a], 0.0);
            for b in 0..j {
                prop_assert_eq!(m[a][b], m[b][a]);
                prop_assert!((m[a][b] - (pose.joints[a] - pose.joints[b]).norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bone_angles_ignore_translation_and_scale(seed in any::<u64>(), t in offset(), s in 0.2..5.0f64) {
        let topo = JointTopology::kinect_v2();
        let body = random_body(&mut rng(seed));
        let a = bone_angles(&Pose::new(0, body.clone()), &topo);
        let b = bone_angles(&Pose::new(0, body.iter().map(|p| p * s + t).collect()), &topo);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn yaw_shifts_the_azimuth_of_a_horizontal_bone(angle in -3.0..3.0f64) {
        let topo = JointTopology::kinect_v2();
        let mut joints = vec![P::zeros(); 25];
        // bone 1 runs spine_mid -> spine_shoulder; make it point along +X
        joints[1] = P::new(0.0, 1.0, 0.0);
        joints[20] = P::new(1.0, 1.0, 0.0);
        // atan2(z, x) turns the opposite way to a right-handed yaw
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), -angle);
        let rotated: Vec<P> = joints.iter().map(|p| rot * p).collect();
        let before = bone_angles(&Pose::new(0, joints), &topo);
        let after = bone_angles(&Pose::new(0, rotated), &topo);
        prop_assert!(before[3].abs() < 1e-12);
        prop_assert!((after[3] - angle).abs() < 1e-9);
        prop_assert!((after[2] - before[2]).abs() < 1e-12);
    }

    #[test]
    fn feature_frame_invariance_split(seed in any::<u64>(), ax in axis(), angle in 0.3..3.0f64, t in offset(), s in 0.2..5.0f64) {
        let topo = JointTopology::kinect_v2();
        let cfg = NormalizationConfig::default();
        let seq = body_sequence(seed, 1);
        let feats = |q: &SkeletonSequence| {
            let (n, _) = normalize_sequence(q, &cfg).unwrap();
            frame_features(&q.poses[0], &n.poses[0], &topo, FeatureSet::default()).to_vec()
        };
        let base = feats(&seq);
        let shifted = feats(&moved(&seq, &Rotation3::identity(), t, s));
        for (x, y) in base.iter().zip(&shifted) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        let rot = rotation(ax, angle);
        let turned = feats(&moved(&seq, &rot, P::zeros(), 1.0));
        for (x, y) in base[..375].iter().zip(&turned[..375]) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        if rot != Rotation3::identity() {
            let moved_angles = base[375..].iter().zip(&turned[375..]).any(|(x, y)| (x - y).abs() > 1e-6);
            prop_assert!(moved_angles);
        }
    }

    #[test]
    fn cosine_ignores_positive_scaling(seed in any::<u64>(), s in 0.01..100.0f64) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..32).map(|_| r.random_range(0.0..2.0)).collect();
        let b: Vec<f64> = (0..32).map(|_| r.random_range(0.0..2.0)).collect();
        let scaled: Vec<f64> = b.iter().map(|v| v * s).collect();
        prop_assert!((cosine_distance(&a, &b).unwrap() - cosine_distance(&a, &scaled).unwrap()).abs() < 1e-12);
        let anchors: Vec<AnchorRepresentation> = (0..4)
            .map(|k| {
                let e: Vec<f64> = (0..32).map(|_| r.random_range(0.0..2.0)).collect();
                AnchorRepresentation::build(&[vec![e]], 1, format!("c{k}")).unwrap()
            })
            .collect();
        prop_assert_eq!(
            classify_segment(&anchors, &b, Metric::Cos).unwrap(),
            classify_segment(&anchors, &scaled, Metric::Cos).unwrap()
        );
    }

    #[test]
    fn js_stays_in_range_for_large_inputs(seed in any::<u64>(), scale in 1.0..500.0f64) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..64).map(|_| r.random_range(0.0..scale)).collect();
        let b: Vec<f64> = (0..64).map(|_| r.random_range(0.0..scale)).collect();
        let d = js_distance(&a, &b).unwrap();
        prop_assert!(d.is_finite() && (0.0..=1.0).contains(&d));
    }

    #[test]
    fn jsonl_round_trip_is_exact(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let mut seq = body_sequence(seed, n);
        // ugly values: tiny, huge, negative zero, many digits
        seq.poses[0].joints[3] = P::new(1e-300, -0.0, 123456789.123456789);
        let drop = r.random_range(0..25);
        seq.poses[n - 1].joints[drop] = P::new(f64::NAN, f64::NAN, f64::NAN);
        seq.poses[n - 1].valid[drop] = false;
        let text = seq.to_jsonl_string();
        let back = moveseq::skeleton::parse_sequence(text.as_bytes()).unwrap();
        prop_assert_eq!(back.to_jsonl_string(), text);
        for (p, q) in seq.poses.iter().zip(&back.poses) {
            prop_assert_eq!(&p.valid, &q.valid);
            for ((x, y), ok) in p.joints.iter().zip(&q.joints).zip(&p.valid) {
                if *ok {
                    prop_assert!(x.iter().zip(y.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
                }
            }
        }
    }

    #[test]
    fn resample_composes(n in 1usize..60, a in 1usize..5, b in 1usize..5) {
        let seq = common::sequence((0..n).map(common::wave).collect());
        let twice = resample(&resample(&seq, a).unwrap(), b).unwrap();
        let once = resample(&seq, a * b).unwrap();
        prop_assert_eq!(twice.len(), once.len());
        for (p, q) in twice.poses.iter().zip(&once.poses) {
            prop_assert_eq!(&p.joints, &q.joints);
            prop_assert_eq!(p.source_frame, q.source_frame);
        }
    }

    #[test]
    fn repair_is_idempotent(seed in any::<u64>(), holes in 0usize..40) {
        let mut r = rng(seed);
        let mut seq = body_sequence(seed, 10);
        for _ in 0..holes {
            let (f, j) = (r.random_range(0..10), r.random_range(0..25));
            seq.poses[f].joints[j] = P::new(f64::NAN, f64::NAN, f64::NAN);
            seq.poses[f].valid[j] = false;
        }
        // keep at least one valid sample per joint
        seq.poses[4] = Pose::new(4, rest_pose());
        let (once, _) = repair_pose(&seq).unwrap();
        let (twice, fixed) = repair_pose(&once).unwrap();
        prop_assert_eq!(fixed, 0);
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn degenerate_frame_keeps_previous_rotation() {
    let topo = JointTopology::kinect_v2();
    let cfg = NormalizationConfig::default();
    let good = Pose::new(
        0,
        common::place(&rest_pose(), 0.7, P::new(1.0, 0.0, 2.0), 1.3),
    );
    let prev = compute_frame_transform(&good, &topo, &cfg, None).unwrap();
    let mut bad = good.clone();
    let d = *topo.designations();
    bad.joints[d.hip_right] = bad.joints[d.hip_left];
    let tf = compute_frame_transform(&bad, &topo, &cfg, Some(&prev)).unwrap();
    assert_eq!(tf.rotation, prev.rotation);
    assert_eq!(tf.scale, prev.scale);
    assert_eq!(tf.origin, bad.joints[d.hip_left]);
    assert!(compute_frame_transform(&bad, &topo, &cfg, None).is_err());
}
