use spreadfgl_core::imputation::{self, AutoencoderParams, AssessorParams};
use spreadfgl_core::rng::Rng;
use spreadfgl_core::tensor::{self, Matrix};
use std::time::Instant;

fn time<F: FnMut()>(label: &str, flops: f64, mut f: F) {
    let t0 = Instant::now();
    let mut reps = 0;
    while t0.elapsed().as_secs_f64() < 1.0 {
        f();
        reps += 1;
    }
    let secs = t0.elapsed().as_secs_f64() / reps as f64;
    println!("{label}: {:.1} ms, {:.2} Gflop/s", secs * 1e3, flops / secs / 1e9);
}

fn main() {
    let mut rng = Rng::new(1);
    let a = Matrix::from_fn(2708, 1433, |_, _| rng.normal());
    let w = Matrix::from_fn(1433, 16, |_, _| rng.normal());
    time("matmul 2708x1433 * 1433x16", 2.0 * 2708.0 * 1433.0 * 16.0, || {
        std::hint::black_box(tensor::matmul(&a, &w));
    });
    let b = Matrix::from_fn(2708, 16, |_, _| rng.normal());
    time("matmul_at_b (2708x1433)^T * 2708x16", 2.0 * 2708.0 * 1433.0 * 16.0, || {
        std::hint::black_box(tensor::matmul_at_b(&a, &b));
    });
    let wt = w.transpose(); // 16 x 1433
    time("matmul_a_bt 2708x16 * (1433x16)^T... (dZ * W^T shape)", 2.0 * 2708.0 * 1433.0 * 16.0, || {
        std::hint::black_box(tensor::matmul_a_bt(&b, &wt.transpose()));
    });

    // One full AE loss+grads at Cora scale.
    let c = 7usize;
    let d = 1433usize;
    let n = 2708usize;
    let ae = AutoencoderParams::init(c, d, &mut rng);
    let assessor = AssessorParams::init(c, &mut rng);
    let s = Matrix::from_fn(n, c, |_, _| rng.normal());
    let h = tensor::row_softmax(&Matrix::from_fn(n, c, |_, _| rng.normal()));
    let masks = imputation::masks_for(&h, 1.0 / c as f64);
    let t0 = Instant::now();
    let reps = 5;
    for _ in 0..reps {
        std::hint::black_box(imputation::autoencoder_loss(&ae, &assessor, &s, &h, &masks));
    }
    println!("ae_loss+grads (n=2708,d=1433): {:.1} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let t0 = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(imputation::ae_forward(&ae, &s));
    }
    println!("ae_forward: {:.1} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
