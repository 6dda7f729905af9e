use criterion::{black_box, criterion_group, criterion_main, Criterion};

use graylearn::{
    backward, ece, empirical_risk, forward, gen_blobs, GlOptions, LossMethod, ModelParams,
    Prediction, PredictionSet, Probs,
};

fn bench_forward_backward(c: &mut Criterion) {
    let params = ModelParams::init_gaussian(&[16, 128, 128, 4], 7).unwrap();
    let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("forward_2x128", |b| {
        b.iter(|| forward(black_box(&params), black_box(&x)).unwrap())
    });
    let trace = forward(&params, &x).unwrap();
    let probs = Probs::from_logits(trace.logits()).unwrap();
    let grad_probs: Vec<f64> = probs.values.iter().map(|v| v - 0.25).collect();
    c.bench_function("backward_2x128", |b| {
        b.iter(|| {
            let grad_logits = probs.backward(black_box(&grad_probs)).unwrap();
            backward(&params, &trace, &x, &grad_logits).unwrap()
        })
    });
}

fn bench_batch_risk(c: &mut Criterion) {
    let data = gen_blobs(16, 4, 16, 2.0, 0.8, 11).unwrap();
    let params = ModelParams::init_gaussian(&[16, 128, 128, 4], 13).unwrap();
    let batch: Vec<usize> = (0..16).collect();
    let opts = GlOptions::default();
    for method in [LossMethod::Gl, LossMethod::Standard, LossMethod::Nl] {
        c.bench_function(&format!("batch16_risk_{}", method.name()), |b| {
            b.iter(|| empirical_risk(method, &opts, black_box(&params), &data, &batch).unwrap())
        });
    }
}

fn bench_ece(c: &mut Criterion) {
    let preds = PredictionSet {
        predictions: (0..10_000)
            .map(|i| Prediction {
                predicted: i % 7 + 1,
                confidence: ((i * 37 % 1000) as f64 + 1.0) / 1001.0,
                true_label: i % 5 + 1,
            })
            .collect(),
    };
    c.bench_function("ece_10k", |b| b.iter(|| ece(black_box(&preds)).unwrap()));
}

criterion_group!(benches, bench_forward_backward, bench_batch_risk, bench_ece);
criterion_main!(benches);
