use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use canids_bench::random_rows;
use canids_core::baselines::knn_fit;
use canids_core::canbus::{crc15, decode_frame, encode_frame, CanFrame};
use canids_core::nn::{adam_step, AdamHyper, AdamState};
use canids_core::plenet::{build_plenet, to_tensor};

fn codec(c: &mut Criterion) {
    let frame = CanFrame::new(0x316, &[0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6F]).unwrap();
    let bits = encode_frame(&frame);
    c.bench_function("crc15_83_bits", |b| b.iter(|| crc15(black_box(&bits[..83]))));
    c.bench_function("encode_frame_dlc8", |b| b.iter(|| encode_frame(black_box(&frame))));
    c.bench_function("decode_frame_dlc8", |b| b.iter(|| decode_frame(black_box(&bits)).unwrap()));
}

fn network(c: &mut Criterion) {
    let net = build_plenet(0);
    let rows = random_rows(64, 1);
    let xs: Vec<_> = rows.iter().map(|r| to_tensor(&net, r).unwrap()).collect();
    let ys: Vec<usize> = rows.iter().map(|r| r.y.index()).collect();
    c.bench_function("plenet_forward", |b| b.iter(|| net.forward(black_box(&xs[0])).unwrap()));
    c.bench_function("plenet_train_step_batch64", |b| {
        let mut model = net.clone();
        let mut state = AdamState::new(model.params(), AdamHyper::default());
        b.iter(|| {
            let (_, grads) = model.loss_and_grad(&xs, &ys).unwrap();
            adam_step(model.params_mut(), &grads, &mut state).unwrap();
        })
    });
}

fn knn(c: &mut Criterion) {
    let model = knn_fit(&random_rows(10_000, 2)).unwrap();
    let q = random_rows(1, 3)[0].x;
    c.bench_function("knn_k12_n10000", |b| b.iter(|| model.predict(black_box(&q), 12).unwrap()));
}

criterion_group!(benches, codec, network, knn);
criterion_main!(benches);
