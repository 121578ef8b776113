use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use skipnas_core::analysis::wl_refine;
use skipnas_core::autodiff::{Tape, TrainMask};
use skipnas_core::data::{build_batch, synthesize_diameter_dataset, DiameterClass, GraphRecord};
use skipnas_core::ops::Dropout;
use skipnas_core::supernet::{reference_architecture, Mode, NoiseSource, SuperNet, SuperNetConfig};

fn trees(count: usize) -> Vec<GraphRecord> {
    let classes = [DiameterClass { diameter: 5, count }, DiameterClass { diameter: 14, count }];
    synthesize_diameter_dataset(&classes, 7, 30).unwrap()
}

fn propagate(c: &mut Criterion) {
    let records = trees(32);
    let idx: Vec<usize> = (0..records.len()).collect();
    let batch = build_batch(&records, &idx).unwrap();
    let mut group = c.benchmark_group("propagate");
    for width in [16, 64, 128] {
        let h = Array2::from_elem((batch.nodes(), width), 0.5);
        let w = Array2::from_elem((width, width), 0.01);
        group.bench_with_input(BenchmarkId::new("adj_matmul", width), &width, |b, _| {
            b.iter(|| {
                let tape = Tape::new(TrainMask::Frozen);
                let x = tape.constant(h.clone());
                let y = x.propagate(batch.normalized_adjacency()).unwrap();
                black_box(y.matmul(tape.constant(w.clone())).unwrap().value())
            })
        });
    }
    group.finish();
}

fn supernet_forward(c: &mut Criterion) {
    let records = trees(32);
    let idx: Vec<usize> = (0..records.len()).collect();
    let batch = build_batch(&records, &idx).unwrap();
    let config = SuperNetConfig {
        hidden: 32,
        ..SuperNetConfig::full(8, 1, 2)
    };
    let (net, store) = SuperNet::build(config).unwrap();
    let arch = reference_architecture();
    let mut group = c.benchmark_group("supernet");
    group.sample_size(20);
    group.bench_function("relaxed_forward_backward_b8", |b| {
        let mut noise = NoiseSource::sampled(3);
        b.iter(|| {
            let tape = Tape::new(TrainMask::All);
            let mode = Mode::Relaxed {
                temperature: 1.0,
                noise: &mut noise,
            };
            let out = net.forward(&tape, &store, &batch, mode, &mut Dropout::disabled()).unwrap();
            let loss = out.logits.cross_entropy(batch.labels()).unwrap();
            black_box(tape.backward(loss).unwrap());
        })
    });
    group.bench_function("discrete_forward_reference", |b| {
        b.iter(|| {
            let tape = Tape::new(TrainMask::Frozen);
            let out = net.forward(&tape, &store, &batch, Mode::Discrete(&arch), &mut Dropout::disabled()).unwrap();
            black_box(out.logits.value())
        })
    });
    group.finish();
}

fn wl(c: &mut Criterion) {
    let records = trees(8);
    c.bench_function("wl_refine_trees", |b| {
        b.iter(|| {
            for r in &records {
                black_box(wl_refine(r, 30, None));
            }
        })
    });
}

criterion_group!(benches, propagate, supernet_forward, wl);
criterion_main!(benches);
