// Prints the per-outer-iteration AE loss at Cora scale to see where the
// plateau actually is.
use spreadfgl_core::imputation::{self, ImputationCfg, ImputationModels, GlobalEmbedding};
use spreadfgl_core::rng::Rng;
use spreadfgl_core::tensor::{self, Matrix};

fn main() {
    let mut rng = Rng::new(3);
    let n = 2708usize;
    let c = 7usize;
    let d = 1433usize;
    let h = tensor::row_softmax(&Matrix::from_fn(n, c, |_, _| 2.0 * rng.normal()));
    let ge = GlobalEmbedding { h, owner_of: (0..n).map(|i| (i % 6, i / 6)).collect() };
    let mut models = ImputationModels::init(c, d, &mut Rng::new(10));
    let masks = imputation::masks_for(&ge.h, 1.0 / 7.0);
    let mut noise = Rng::new(42);
    // Replicate the training loop manually, printing L_AE per outer iteration.
    let cfg = ImputationCfg { k: 5, theta: 1.0 / 7.0, beta: 0.001, t_ae: 5, t_as: 3, tol: 0.0, window: 3, max_outer: 1 };
    let _ = cfg;
    for outer in 0..60 {
        let s = Matrix::from_fn(n, c, |_, _| noise.normal());
        let mut last = 0.0;
        for _ in 0..5 {
            let (loss, grads) = imputation::autoencoder_loss(&models.ae, &models.assessor, &s, &ge.h, &masks);
            last = loss;
            let mut flat = models.ae.to_flat();
            let mut gflat = models.ae.encoder.grads_flat(&grads.encoder);
            gflat.extend(models.ae.decoder.grads_flat(&grads.decoder));
            // Reuse the real optimizer state path via a fresh Adam is wrong; emulate with models' own.
            models_step(&mut models, &mut flat, &gflat);
            models.ae.load_flat(&flat);
        }
        let (_, h_bar) = imputation::ae_forward(&models.ae, &s);
        for _ in 0..3 {
            let (_, grads) = imputation::assessor_loss(&models.assessor, &ge.h, &h_bar, &masks);
            let mut flat = models.assessor.net.to_flat();
            let gflat = models.assessor.net.grads_flat(&grads);
            assessor_step(&mut models, &mut flat, &gflat);
            models.assessor.net.load_flat(&flat);
        }
        println!("outer {outer}: L_AE {last:.6}");
    }
}

use spreadfgl_core::optim::{OptimKind, Optimizer};
use std::sync::OnceLock;
static AE_OPT: OnceLock<std::sync::Mutex<Option<Optimizer>>> = OnceLock::new();
static AS_OPT: OnceLock<std::sync::Mutex<Option<Optimizer>>> = OnceLock::new();
fn models_step(models: &mut ImputationModels, flat: &mut [f64], g: &[f64]) {
    let m = AE_OPT.get_or_init(|| std::sync::Mutex::new(None));
    let mut m = m.lock().unwrap();
    let opt = m.get_or_insert_with(|| Optimizer::new(OptimKind::Adam, models.ae.flat_len()));
    opt.step(flat, g, 0.001);
}
fn assessor_step(models: &mut ImputationModels, flat: &mut [f64], g: &[f64]) {
    let m = AS_OPT.get_or_init(|| std::sync::Mutex::new(None));
    let mut m = m.lock().unwrap();
    let opt = m.get_or_insert_with(|| Optimizer::new(OptimKind::Adam, models.assessor.net.flat_len()));
    opt.step(flat, g, 0.001);
}
