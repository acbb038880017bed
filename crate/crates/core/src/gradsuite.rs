//! Randomized gradient verification across every trainable model: the
//! classifier loss (with and without the trace term), the autoencoder loss,
//! and the assessor loss, each checked against central differences over the
//! full flat parameter vector.
//!
//! Central differences carry a cancellation-noise floor of roughly
//! u * |f| / eps per entry; gradient entries whose analytic and numeric
//! values both sit under a floor four orders of magnitude below the typical
//! gradient scale carry no checkable signal and are counted as skipped
//! rather than compared. Every entry above the floor must agree to 1e-4.

use crate::gnn::{self, ClassifierParams, LocalTask};
use crate::graph::Graph;
use crate::imputation::{self, AssessorParams, AutoencoderParams};
use crate::rng::Rng;
use crate::tensor::Matrix;

pub const THRESHOLD: f64 = 1e-4;
const EPS: f64 = 1e-6;
/// Entries where both |analytic| and |central difference| fall below this
/// are below the f64 noise floor of the probe.
const SIGNAL_FLOOR: f64 = 1e-5;
/// Instances whose smallest ReLU pre-activation sits inside this margin are
/// redrawn: a probe straddling the kink checks a point where the loss is
/// not differentiable, which grad_check's contract excludes.
const KINK_MARGIN: f64 = 1e-4;
const MAX_REDRAWS: usize = 200;

#[derive(Debug, Clone)]
pub struct SuiteLine {
    pub name: &'static str,
    pub instances: usize,
    pub max_err: f64,
    pub entries_checked: usize,
    pub entries_skipped: usize,
}

impl SuiteLine {
    pub fn passed(&self) -> bool {
        self.max_err < THRESHOLD
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    max_err: f64,
    checked: usize,
    skipped: usize,
}

fn flat_check(f: impl Fn(&[f64]) -> f64, flat0: &[f64], analytic: &[f64]) -> Tally {
    let scale = f(flat0).abs().max(1.0);
    let floor = SIGNAL_FLOOR * scale;
    let mut x = flat0.to_vec();
    let mut tally = Tally::default();
    for i in 0..flat0.len() {
        let orig = flat0[i];
        x[i] = orig + EPS;
        let fp = f(&x);
        x[i] = orig - EPS;
        let fm = f(&x);
        x[i] = orig;
        let cd = (fp - fm) / (2.0 * EPS);
        let a = analytic[i];
        if a.abs() < floor && cd.abs() < floor {
            tally.skipped += 1;
            continue;
        }
        let rel = (a - cd).abs() / (a.abs() + cd.abs() + 1e-12);
        tally.max_err = tally.max_err.max(rel);
        tally.checked += 1;
    }
    tally
}

fn random_task(rng: &mut Rng) -> LocalTask {
    let n = 6 + rng.below(6);
    let d = 3 + rng.below(3);
    let c = 3 + rng.below(2);
    let features = Matrix::from_fn(n, d, |_, _| rng.normal());
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.next_f64() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let train_ids: Vec<usize> = (0..n).filter(|_| rng.next_f64() < 0.6).collect();
    let train_ids = if train_ids.is_empty() { vec![0] } else { train_ids };
    let train_labels = train_ids.iter().map(|&u| labels[u]).collect();
    let graph = Graph::new(n, &edges, features, labels, c).unwrap();
    LocalTask {
        graph,
        n_real: n,
        train_ids,
        train_labels,
        global_ids: (0..n as u32).collect(),
    }
}

fn classifier_instance(rng: &mut Rng, lambda: f64) -> Tally {
    let (t, p) = loop {
        let t = random_task(rng);
        let d = t.graph.feature_dim();
        let c = t.graph.num_classes();
        let hidden = 3 + rng.below(3);
        let p = ClassifierParams::init(d, hidden, c, rng);
        if gnn::min_relu_preactivation_abs(&p, &t) > KINK_MARGIN {
            break (t, p);
        }
    };
    let d = t.graph.feature_dim();
    let c = t.graph.num_classes();
    let hidden = p.hidden();
    let (_, grads) = gnn::loss_and_grads(&p, &t, lambda).unwrap();
    flat_check(
        |flat| {
            let q = ClassifierParams::from_flat(d, hidden, c, flat).unwrap();
            gnn::loss_and_grads(&q, &t, lambda).unwrap().0
        },
        &p.to_flat(),
        &grads.to_flat(),
    )
}

fn ae_kink_margin(
    ae: &AutoencoderParams,
    assessor: &AssessorParams,
    s: &Matrix,
    masks: &Matrix,
) -> f64 {
    let (x_bar, h_bar) = imputation::ae_forward(ae, s);
    let fake_in = h_bar.hadamard(masks);
    ae.encoder
        .min_relu_preactivation_abs(s)
        .min(ae.decoder.min_relu_preactivation_abs(&x_bar))
        .min(assessor.net.min_relu_preactivation_abs(&fake_in))
}

fn autoencoder_instance(rng: &mut Rng) -> Tally {
    let (ae, assessor, s, h, masks) = {
        let mut redraws = 0;
        loop {
            let c = 3 + rng.below(2);
            let d = 3 + rng.below(3);
            let n = 4 + rng.below(4);
            let ae = AutoencoderParams::init(c, d, rng);
            let assessor = AssessorParams::init(c, rng);
            let s = Matrix::from_fn(n, c, |_, _| rng.normal());
            let h = crate::tensor::row_softmax(&Matrix::from_fn(n, c, |_, _| rng.normal()));
            let masks = imputation::masks_for(&h, 1.0 / c as f64);
            if ae_kink_margin(&ae, &assessor, &s, &masks) > KINK_MARGIN {
                break (ae, assessor, s, h, masks);
            }
            redraws += 1;
            assert!(redraws < MAX_REDRAWS, "cannot find a kink-free instance");
        }
    };

    let (_, grads) = imputation::autoencoder_loss(&ae, &assessor, &s, &h, &masks);
    let mut analytic = ae.encoder.grads_flat(&grads.encoder);
    analytic.extend(ae.decoder.grads_flat(&grads.decoder));
    flat_check(
        |flat| {
            let mut m = ae.clone();
            m.load_flat(flat);
            imputation::autoencoder_loss(&m, &assessor, &s, &h, &masks).0
        },
        &ae.to_flat(),
        &analytic,
    )
}

fn assessor_instance(rng: &mut Rng) -> Tally {
    let (assessor, h, h_bar, masks) = {
        let mut redraws = 0;
        loop {
            let c = 3 + rng.below(2);
            let n = 4 + rng.below(4);
            let assessor = AssessorParams::init(c, rng);
            let ae = AutoencoderParams::init(c, 4, rng);
            let s = Matrix::from_fn(n, c, |_, _| rng.normal());
            let h = crate::tensor::row_softmax(&Matrix::from_fn(n, c, |_, _| rng.normal()));
            let (_, h_bar) = imputation::ae_forward(&ae, &s);
            let masks = imputation::masks_for(&h, 1.0 / c as f64);
            let margin = assessor
                .net
                .min_relu_preactivation_abs(&h.hadamard(&masks))
                .min(assessor.net.min_relu_preactivation_abs(&h_bar.hadamard(&masks)));
            if margin > KINK_MARGIN {
                break (assessor, h, h_bar, masks);
            }
            redraws += 1;
            assert!(redraws < MAX_REDRAWS, "cannot find a kink-free instance");
        }
    };

    let (_, grads) = imputation::assessor_loss(&assessor, &h, &h_bar, &masks);
    let analytic = assessor.net.grads_flat(&grads);
    flat_check(
        |flat| {
            let mut a = assessor.clone();
            a.net.load_flat(flat);
            imputation::assessor_loss(&a, &h, &h_bar, &masks).0
        },
        &assessor.net.to_flat(),
        &analytic,
    )
}

type FamilyRun = Box<dyn Fn(&mut Rng) -> Tally>;

/// Runs `instances` randomized checks per loss family; each line reports the
/// worst relative error over every checkable entry.
pub fn run_suite(instances: usize, seed: u64) -> Vec<SuiteLine> {
    let root = Rng::new(seed);
    let families: Vec<(&'static str, FamilyRun)> = vec![
        ("classifier", Box::new(|r: &mut Rng| classifier_instance(r, 0.0))),
        ("classifier+trace", Box::new(|r: &mut Rng| classifier_instance(r, 1.0))),
        ("autoencoder", Box::new(autoencoder_instance)),
        ("assessor", Box::new(assessor_instance)),
    ];
    families
        .into_iter()
        .map(|(name, run)| {
            let mut rng = root.fork(name);
            let mut max_err = 0.0f64;
            let mut checked = 0;
            let mut skipped = 0;
            for _ in 0..instances {
                let t = run(&mut rng);
                max_err = max_err.max(t.max_err);
                checked += t.checked;
                skipped += t.skipped;
            }
            SuiteLine {
                name,
                instances,
                max_err,
                entries_checked: checked,
                entries_skipped: skipped,
            }
        })
        .collect()
}
