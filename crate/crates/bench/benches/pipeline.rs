use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fstrm::config::PipelineConfig;
use fstrm::hankel::{default_rows, HankelOperator};
use fstrm::pipeline::analyze_frame;
use fstrm_bench::harmonic_frame;

const SIZES: [usize; 4] = [819, 1024, 2048, 4096];

fn frame_pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze_frame");
    for n in SIZES {
        let frame = harmonic_frame(n, 1);
        for fb in [true, false] {
            let cfg = PipelineConfig {
                frame_len: n,
                hop: n,
                forward_backward: fb,
                ..PipelineConfig::default()
            };
            let id = BenchmarkId::new(if fb { "fb" } else { "plain" }, n);
            g.bench_with_input(id, &frame, |b, f| {
                b.iter(|| analyze_frame(f, black_box(&f.samples), &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn hankel_products(c: &mut Criterion) {
    let mut g = c.benchmark_group("hankel_matvec");
    for n in SIZES {
        let op = HankelOperator::new(harmonic_frame(n, 2).samples, default_rows(n)).unwrap();
        let mut ws = op.workspace();
        let v = vec![1.0 / (op.cols() as f64).sqrt(); op.cols()];
        let mut out = vec![0.0; op.rows()];
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| op.hv_into(black_box(&v), &mut out, &mut ws).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, frame_pipeline, hankel_products);
criterion_main!(benches);
