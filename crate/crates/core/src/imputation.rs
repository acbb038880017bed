//! Adaptive graph-imputation generator and versatile assessor: fuse client
//! embeddings into globally-shared information, score node similarity and
//! keep top-k candidate links, adversarially train the autoencoder against
//! the assessor under the negative-sampling mask, and patch client
//! subgraphs with ghost neighbors carrying generated features.

use crate::error::{Error, Result};
use crate::gnn::LocalTask;
use crate::graph::Graph;
use crate::nn::{Activation, Mlp, MlpGrads};
use crate::optim::{OptimKind, Optimizer};
use crate::rng::Rng;
use crate::tensor::Matrix;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

/// Assessor outputs are clamped into [CLAMP, 1 - CLAMP] before logs.
const CLAMP: f64 = 1e-7;

/// Vertical concatenation of client classifier outputs, with the owner of
/// every row.
#[derive(Debug, Clone)]
pub struct GlobalEmbedding {
    /// |V^j| x c, rows are probability vectors.
    pub h: Matrix,
    /// Per row: (client id, local node id).
    pub owner_of: Vec<(usize, usize)>,
}

/// Fuses per-client embeddings in ascending client-id order.
pub fn fuse(embeddings: &[(usize, Matrix)]) -> Result<GlobalEmbedding> {
    if embeddings.is_empty() {
        return Err(Error::InvalidArg("fuse: no embeddings".into()));
    }
    let c = embeddings[0].1.cols();
    for w in embeddings.windows(2) {
        assert!(w[0].0 < w[1].0, "fuse expects ascending client ids");
    }
    let total: usize = embeddings.iter().map(|(_, m)| m.rows()).sum();
    let mut h = Matrix::zeros(total, c);
    let mut owner_of = Vec::with_capacity(total);
    let mut at = 0;
    for (client, m) in embeddings {
        if m.cols() != c {
            return Err(Error::InvalidArg(format!(
                "fuse: client {client} has {} columns, expected {c}",
                m.cols()
            )));
        }
        for r in 0..m.rows() {
            h.row_mut(at).copy_from_slice(m.row(r));
            owner_of.push((*client, r));
            at += 1;
        }
    }
    Ok(GlobalEmbedding { h, owner_of })
}

/// Per-row top-k most similar rows by dot product (the similarity topology
/// H H^T), ties broken toward the smaller id; self excluded.
pub fn candidate_lists(ge: &GlobalEmbedding, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = ge.h.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArg(format!(
            "candidate k must satisfy 1 <= k < {n}, got {k}"
        )));
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let hu = ge.h.row(u);
            let mut scored: Vec<(f64, usize)> = (0..n)
                .filter(|&v| v != u)
                .map(|v| {
                    let hv = ge.h.row(v);
                    let dot: f64 = hu.iter().zip(hv).map(|(a, b)| a * b).sum();
                    (dot, v)
                })
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            scored.truncate(k);
            scored.into_iter().map(|(_, v)| v).collect()
        })
        .collect();
    Ok(rows)
}

/// Candidate links as deduplicated unordered pairs (u < v).
pub fn candidate_links(ge: &GlobalEmbedding, k: usize) -> Result<Vec<(usize, usize)>> {
    let lists = candidate_lists(ge, k)?;
    let mut edges: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(u, vs)| vs.iter().map(move |&v| (u.min(v), u.max(v))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

/// Autoencoder: encoder {c, 16, d} (ReLU, then linear output = potential
/// features), decoder {d, 16, c} (ReLU, then row-softmax output).
#[derive(Debug, Clone)]
pub struct AutoencoderParams {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl AutoencoderParams {
    pub fn init(c: usize, d: usize, rng: &mut Rng) -> Self {
        Self {
            encoder: Mlp::new(
                &[c, 16, d],
                &[Activation::Relu, Activation::Linear],
                &mut rng.fork("encoder"),
            ),
            decoder: Mlp::new(
                &[d, 16, c],
                &[Activation::Relu, Activation::RowSoftmax],
                &mut rng.fork("decoder"),
            ),
        }
    }

    pub fn flat_len(&self) -> usize {
        self.encoder.flat_len() + self.decoder.flat_len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.encoder.to_flat();
        out.extend(self.decoder.to_flat());
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let split = self.encoder.flat_len();
        self.encoder.load_flat(&flat[..split]);
        self.decoder.load_flat(&flat[split..]);
    }
}

/// Assessor: fully connected {c, 128, 16, 1}, ReLU hidden, sigmoid output.
#[derive(Debug, Clone)]
pub struct AssessorParams {
    pub net: Mlp,
}

impl AssessorParams {
    pub fn init(c: usize, rng: &mut Rng) -> Self {
        Self {
            net: Mlp::new(
                &[c, 128, 16, 1],
                &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
                rng,
            ),
        }
    }
}

/// Encoder/decoder pass on the noise matrix: X-bar = f(S), H-bar = h(X-bar).
pub fn ae_forward(ae: &AutoencoderParams, s: &Matrix) -> (Matrix, Matrix) {
    let x_bar = ae.encoder.forward(s);
    let h_bar = ae.decoder.forward(&x_bar);
    (x_bar, h_bar)
}

/// Negative-sampling mask of one embedding row: 1 where the attribute
/// strictly exceeds theta, 0 otherwise (equality counts as negative).
pub fn negative_mask(h_row: &[f64], theta: f64) -> Vec<f64> {
    assert!(theta > 0.0 && theta < 1.0, "theta must lie in (0,1), got {theta}");
    h_row.iter().map(|&x| if x > theta { 1.0 } else { 0.0 }).collect()
}

/// Stacked masks for every row of H.
pub fn masks_for(h: &Matrix, theta: f64) -> Matrix {
    let mut m = Matrix::zeros(h.rows(), h.cols());
    for r in 0..h.rows() {
        m.row_mut(r).copy_from_slice(&negative_mask(h.row(r), theta));
    }
    m
}

fn clamped(a: f64) -> f64 {
    a.clamp(CLAMP, 1.0 - CLAMP)
}

/// d/da of ln-terms through the clamp: zero slope where the clamp is active.
fn clamp_gate(a: f64) -> f64 {
    if a > CLAMP && a < 1.0 - CLAMP {
        1.0
    } else {
        0.0
    }
}

/// Assessor objective (minimized):
/// (1/n) sum_u [ ln(1 - Assor(h_u o e_u)) + ln Assor(h-bar_u o e_u) ],
/// driving Assor(real) -> 1 and Assor(fake) -> 0. Gradients cover the
/// assessor parameters only.
pub fn assessor_loss(
    assessor: &AssessorParams,
    h: &Matrix,
    h_bar: &Matrix,
    masks: &Matrix,
) -> (f64, MlpGrads) {
    let n = h.rows() as f64;
    let real_in = h.hadamard(masks);
    let fake_in = h_bar.hadamard(masks);

    let real_cache = assessor.net.forward_cache(&real_in);
    let fake_cache = assessor.net.forward_cache(&fake_in);
    let a_real = real_cache.acts.last().unwrap();
    let a_fake = fake_cache.acts.last().unwrap();

    let mut loss = 0.0;
    for r in 0..h.rows() {
        loss += (1.0 - clamped(a_real.at(r, 0))).ln() + clamped(a_fake.at(r, 0)).ln();
    }
    loss /= n;

    let d_real = a_real.map(|a| -clamp_gate(a) / ((1.0 - clamped(a)) * n));
    let d_fake = a_fake.map(|a| clamp_gate(a) / (clamped(a) * n));
    let (mut grads, _) = assessor.net.backward(&real_cache, d_real);
    let (g2, _) = assessor.net.backward(&fake_cache, d_fake);
    grads.add_assign(&g2);
    (loss, grads)
}

/// Autoencoder gradients, encoder then decoder.
#[derive(Debug, Clone)]
pub struct AeGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
}

/// Autoencoder objective (minimized):
/// (1/n) sum_u [ ln(1 - Assor(h-bar_u o e_u))
///              + || (h_u - h-bar_u) o (1 - e_u) ||^2 ].
/// Gradients flow through decoder and encoder but never into the assessor.
/// `s` is the noise the autoencoder maps; H-bar is recomputed internally so
/// the chain to the parameters stays intact.
pub fn autoencoder_loss(
    ae: &AutoencoderParams,
    assessor: &AssessorParams,
    s: &Matrix,
    h: &Matrix,
    masks: &Matrix,
) -> (f64, AeGrads) {
    let n = h.rows() as f64;
    let enc_cache = ae.encoder.forward_cache(s);
    let x_bar = enc_cache.acts.last().unwrap();
    let dec_cache = ae.decoder.forward_cache(x_bar);
    let h_bar = dec_cache.acts.last().unwrap();

    let fake_in = h_bar.hadamard(masks);
    let as_cache = assessor.net.forward_cache(&fake_in);
    let a_fake = as_cache.acts.last().unwrap();

    let inv_masks = masks.map(|m| 1.0 - m);
    let mut loss = 0.0;
    for r in 0..h.rows() {
        loss += (1.0 - clamped(a_fake.at(r, 0))).ln();
        for j in 0..h.cols() {
            let diff = (h.at(r, j) - h_bar.at(r, j)) * inv_masks.at(r, j);
            loss += diff * diff;
        }
    }
    loss /= n;

    // Adversarial term: back through the assessor to its input, gated by the mask.
    let d_a = a_fake.map(|a| -clamp_gate(a) / ((1.0 - clamped(a)) * n));
    let (_assessor_grads_dropped, d_fake_in) = assessor.net.backward(&as_cache, d_a);
    let mut d_h_bar = d_fake_in.hadamard(masks);
    // Reconstruction term on the masked-out coordinates.
    for r in 0..h.rows() {
        let row = d_h_bar.row_mut(r);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot += 2.0 * (h_bar.at(r, j) - h.at(r, j)) * inv_masks.at(r, j) / n;
        }
    }

    let (dec_grads, d_x_bar) = ae.decoder.backward(&dec_cache, d_h_bar);
    let (enc_grads, _) = ae.encoder.backward(&enc_cache, d_x_bar);
    (
        loss,
        AeGrads {
            encoder: enc_grads,
            decoder: dec_grads,
        },
    )
}

/// Generated cross-subgraph candidate links plus generated features, rows
/// aligned with the fused embedding.
#[derive(Debug, Clone)]
pub struct PotentialGraph {
    pub edges: Vec<(usize, usize)>,
    pub x_bar: Matrix,
    pub k: usize,
}

/// Schedule and convergence knobs for one imputation training run.
#[derive(Debug, Clone, Copy)]
pub struct ImputationCfg {
    pub k: usize,
    pub theta: f64,
    pub beta: f64,
    pub t_ae: usize,
    pub t_as: usize,
    pub tol: f64,
    pub window: usize,
    pub max_outer: usize,
}

impl ImputationCfg {
    pub fn validate(&self) -> Result<()> {
        if self.t_ae == 0 {
            return Err(Error::Config("ae_iters (T_ae) must be >= 1".into()));
        }
        if self.t_as == 0 {
            return Err(Error::Config("as_iters (T_as) must be >= 1".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0,1), got {}", self.theta)));
        }
        if self.beta <= 0.0 {
            return Err(Error::Config("beta must be > 0".into()));
        }
        Ok(())
    }
}

/// Generator + assessor state for one edge server, persistent across
/// imputation rounds.
#[derive(Debug, Clone)]
pub struct ImputationModels {
    pub ae: AutoencoderParams,
    pub assessor: AssessorParams,
    ae_opt: Optimizer,
    as_opt: Optimizer,
}

impl ImputationModels {
    pub fn init(c: usize, d: usize, rng: &mut Rng) -> Self {
        let ae = AutoencoderParams::init(c, d, &mut rng.fork("ae"));
        let assessor = AssessorParams::init(c, &mut rng.fork("assessor"));
        let ae_opt = Optimizer::new(OptimKind::Adam, ae.flat_len());
        let as_opt = Optimizer::new(OptimKind::Adam, assessor.net.flat_len());
        Self {
            ae,
            assessor,
            ae_opt,
            as_opt,
        }
    }
}

/// Alternating adversarial training until the autoencoder loss settles
/// (relative change below `tol` across `window` outer iterations) or
/// `max_outer` is hit; emits the potential graph.
pub fn train_imputation(
    models: &mut ImputationModels,
    ge: &GlobalEmbedding,
    cfg: &ImputationCfg,
    noise_rng: &mut Rng,
) -> Result<PotentialGraph> {
    cfg.validate()?;
    let n = ge.h.rows();
    let c = ge.h.cols();
    let masks = masks_for(&ge.h, cfg.theta);

    let mut history: Vec<f64> = Vec::new();
    let mut last_s = Matrix::zeros(n, c);
    for _outer in 0..cfg.max_outer {
        let s = Matrix::from_fn(n, c, |_, _| noise_rng.normal());
        let mut last_ae_loss = f64::NAN;
        for _ in 0..cfg.t_ae {
            let (loss, grads) = autoencoder_loss(&models.ae, &models.assessor, &s, &ge.h, &masks);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "autoencoder loss diverged (outer iteration {_outer})"
                )));
            }
            last_ae_loss = loss;
            let mut flat = models.ae.to_flat();
            let mut gflat = models.ae.encoder.grads_flat(&grads.encoder);
            gflat.extend(models.ae.decoder.grads_flat(&grads.decoder));
            models.ae_opt.step(&mut flat, &gflat, cfg.beta);
            models.ae.load_flat(&flat);
        }

        let (_, h_bar) = ae_forward(&models.ae, &s);
        for _ in 0..cfg.t_as {
            let (loss, grads) = assessor_loss(&models.assessor, &ge.h, &h_bar, &masks);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "assessor loss diverged (outer iteration {_outer})"
                )));
            }
            let mut flat = models.assessor.net.to_flat();
            let gflat = models.assessor.net.grads_flat(&grads);
            models.as_opt.step(&mut flat, &gflat, cfg.beta);
            models.assessor.net.load_flat(&flat);
        }

        history.push(last_ae_loss);
        last_s = s;
        if history.len() > cfg.window {
            let prev = history[history.len() - 1 - cfg.window];
            let cur = *history.last().unwrap();
            if (cur - prev).abs() / (prev.abs() + 1e-12) < cfg.tol {
                break;
            }
        }
    }

    let (x_bar, _) = ae_forward(&models.ae, &last_s);
    let edges = candidate_links(ge, cfg.k)?;
    Ok(PotentialGraph {
        edges,
        x_bar,
        k: cfg.k,
    })
}

/// Patches one client's task with ghost neighbors along cross-client
/// candidate links. `base` must be the pristine (unpatched) task; previous
/// ghosts are implicitly discarded by rebuilding from it. Intra-client
/// candidates are dropped -- the local subgraph already carries its real
/// structure.
pub fn graph_fix(
    base: &LocalTask,
    pg: &PotentialGraph,
    owner_of: &[(usize, usize)],
    client_id: usize,
) -> LocalTask {
    let d = base.graph.feature_dim();
    let mut ghost_feats: Vec<f64> = Vec::new();
    let mut new_edges: Vec<(u32, u32)> = base.graph.edges().to_vec();
    let mut next = base.n_real as u32;

    let mut attach = |local: usize, remote_row: usize, ghost_feats: &mut Vec<f64>, next: &mut u32| {
        ghost_feats.extend_from_slice(pg.x_bar.row(remote_row));
        new_edges.push((local as u32, *next));
        *next += 1;
    };

    for &(ru, rv) in &pg.edges {
        let (cu, lu) = owner_of[ru];
        let (cv, lv) = owner_of[rv];
        if cu == cv {
            continue;
        }
        if cu == client_id {
            attach(lu, rv, &mut ghost_feats, &mut next);
        }
        if cv == client_id {
            attach(lv, ru, &mut ghost_feats, &mut next);
        }
    }

    let n_ghosts = (next as usize) - base.n_real;
    let n_total = base.n_real + n_ghosts;
    let mut data = base.graph.features().data().to_vec();
    data.extend_from_slice(&ghost_feats);
    let features = Matrix::from_vec(n_total, d, data);
    let mut labels = base.graph.labels().to_vec();
    labels.extend(std::iter::repeat_n(0, n_ghosts));
    let graph = Graph::new(
        n_total,
        &new_edges,
        features,
        labels,
        base.graph.num_classes(),
    )
    .expect("patched graph is valid by construction");

    LocalTask {
        graph,
        n_real: base.n_real,
        train_ids: base.train_ids.clone(),
        train_labels: base.train_labels.clone(),
        global_ids: base.global_ids.clone(),
    }
}

/// Debug export: candidate links with similarity scores, plus the generated
/// features in the nodes.tsv format.
pub fn export_potential(pg: &PotentialGraph, ge: &GlobalEmbedding, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut links = std::io::BufWriter::new(std::fs::File::create(dir.join("potential_links.tsv"))?);
    for &(u, v) in &pg.edges {
        let score: f64 = ge.h.row(u).iter().zip(ge.h.row(v)).map(|(a, b)| a * b).sum();
        writeln!(links, "{u}\t{v}\t{score}")?;
    }
    links.flush()?;
    let mut feats = std::io::BufWriter::new(std::fs::File::create(dir.join("potential_features.tsv"))?);
    for u in 0..pg.x_bar.rows() {
        let row: Vec<String> = pg.x_bar.row(u).iter().map(|v| format!("{v}")).collect();
        writeln!(feats, "{u}\t0\t{}", row.join(" "))?;
    }
    feats.flush()?;
    Ok(())
}
