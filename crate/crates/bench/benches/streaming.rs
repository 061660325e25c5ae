use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use moveseq::eval::match_detections;
use moveseq::features::frame_features;
use moveseq::matcher::{cosine_distance, js_distance};
use moveseq::normalization::{compute_frame_transform, normalize_pose};
use moveseq::{
    EmbeddingStreamState, FeatureSet, Interval, JointTopology, NormalizationConfig, OnlineEncoder,
    Pipeline, PipelineConfig, TcnConfig, TcnModel,
};
use moveseq_bench::{frames, pose};

fn encoder(c: &mut Criterion) {
    let model = TcnModel::init_seeded(TcnConfig::default(), 1).unwrap();
    let input = frames(64, 423);

    c.bench_function("stream_step", |b| {
        let mut state = EmbeddingStreamState::new(&model);
        for f in &input[..32] {
            model.stream_step(&mut state, f).unwrap();
        }
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % input.len();
            black_box(model.stream_step(&mut state, &input[i]).unwrap())
        })
    });

    c.bench_function("forward_window", |b| {
        b.iter(|| black_box(model.forward_window(&input[..32]).unwrap()))
    });

    let pipeline = Pipeline::new(PipelineConfig::default(), model.clone()).unwrap();
    c.bench_function("online_encoder_push", |b| {
        let mut enc = OnlineEncoder::new(&pipeline, JointTopology::kinect_v2()).unwrap();
        let mut t = 0;
        b.iter(|| {
            t += 1;
            black_box(enc.push(&pose(t)).unwrap())
        })
    });
}

fn features(c: &mut Criterion) {
    let topo = JointTopology::kinect_v2();
    let cfg = NormalizationConfig::default();
    let p = pose(3);
    c.bench_function("normalize_and_features", |b| {
        b.iter(|| {
            let tf = compute_frame_transform(&p, &topo, &cfg, None).unwrap();
            let n = normalize_pose(&p, &tf);
            black_box(frame_features(&p, &n, &topo, FeatureSet::default()).to_vec())
        })
    });
}

fn matching(c: &mut Criterion) {
    let v = frames(2, 256);
    let (a, z) = (
        v[0].iter().map(|x| x.abs()).collect::<Vec<_>>(),
        v[1].iter().map(|x| x.abs()).collect::<Vec<_>>(),
    );
    c.bench_function("cosine_distance_256", |b| {
        b.iter(|| black_box(cosine_distance(&a, &z).unwrap()))
    });
    c.bench_function("js_distance_256", |b| {
        b.iter(|| black_box(js_distance(&a, &z).unwrap()))
    });

    let gt: Vec<Interval> = (0..20)
        .map(|k| Interval::new(k * 300, k * 300 + 60).unwrap())
        .collect();
    c.bench_function("match_detections_6000", |b| {
        b.iter_batched(
            || (0..6000).filter(|n| n % 7 == 0).collect::<Vec<usize>>(),
            |dets| black_box(match_detections(&dets, &gt, 32).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, encoder, features, matching);
criterion_main!(benches);
