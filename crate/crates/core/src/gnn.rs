//! Local node classifier: 2-layer GraphSAGE with full-neighborhood mean
//! aggregation and self/neighbor concatenation, cross-entropy loss with an
//! optional trace regularizer on the output layer, and hand-derived
//! gradients.

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::optim::Optimizer;
use crate::partition::Subgraph;
use crate::rng::Rng;
use crate::tensor::{self, Matrix};

/// Classifier weights. The leading factor 2 in both weight shapes houses
/// the self/neighbor concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w1: Matrix, // 2*d_in x hidden
    pub b1: Vec<f64>,
    pub w2: Matrix, // 2*hidden x c
    pub b2: Vec<f64>,
}

impl ClassifierParams {
    pub fn init(d_in: usize, hidden: usize, c: usize, rng: &mut Rng) -> Self {
        let bound1 = 1.0 / ((2 * d_in) as f64).sqrt();
        let w1 = Matrix::from_fn(2 * d_in, hidden, |_, _| rng.uniform(-bound1, bound1));
        let bound2 = 1.0 / ((2 * hidden) as f64).sqrt();
        let w2 = Matrix::from_fn(2 * hidden, c, |_, _| rng.uniform(-bound2, bound2));
        Self {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; c],
        }
    }

    pub fn zeros(d_in: usize, hidden: usize, c: usize) -> Self {
        Self {
            w1: Matrix::zeros(2 * d_in, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(2 * hidden, c),
            b2: vec![0.0; c],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows() / 2
    }

    pub fn classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn flat_len(d_in: usize, hidden: usize, c: usize) -> usize {
        2 * d_in * hidden + hidden + 2 * hidden * c + c
    }

    /// Flat layout: W1, b1, W2, b2 in declaration order, row-major. This is
    /// also the aggregation and checkpoint wire format.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.w1.data().len() + self.b1.len() + self.w2.data().len() + self.b2.len(),
        );
        out.extend_from_slice(self.w1.data());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.data());
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn from_flat(d_in: usize, hidden: usize, c: usize, flat: &[f64]) -> Result<Self> {
        let expect = Self::flat_len(d_in, hidden, c);
        if flat.len() != expect {
            return Err(Error::InvalidArg(format!(
                "flat parameter vector has {} entries, expected {expect}",
                flat.len()
            )));
        }
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &flat[at..at + len];
            at += len;
            s.to_vec()
        };
        Ok(Self {
            w1: Matrix::from_vec(2 * d_in, hidden, take(2 * d_in * hidden)),
            b1: take(hidden),
            w2: Matrix::from_vec(2 * hidden, c, take(2 * hidden * c)),
            b2: take(c),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.w1.all_finite()
            && self.w2.all_finite()
            && self.b1.iter().all(|x| x.is_finite())
            && self.b2.iter().all(|x| x.is_finite())
    }
}

/// A client's training view: its (possibly ghost-patched) subgraph and the
/// training ids/labels, which only ever reference real nodes.
#[derive(Debug, Clone)]
pub struct LocalTask {
    pub graph: Graph,
    /// Real rows are 0..n_real; ghost rows (if any) follow.
    pub n_real: usize,
    pub train_ids: Vec<usize>,
    pub train_labels: Vec<usize>,
    /// Global node ids of the real rows.
    pub global_ids: Vec<u32>,
}

impl LocalTask {
    pub fn from_subgraph(sub: &Subgraph, split: &Split) -> Self {
        let mut train_ids = Vec::new();
        let mut train_labels = Vec::new();
        for (local, &global) in sub.global_ids.iter().enumerate() {
            if split.train_mask[global as usize] {
                train_ids.push(local);
                train_labels.push(sub.graph.labels()[local]);
            }
        }
        Self {
            graph: sub.graph.clone(),
            n_real: sub.graph.node_count(),
            train_ids,
            train_labels,
            global_ids: sub.global_ids.clone(),
        }
    }

    /// [X || mean-neighbor X], the fixed input of layer 1.
    pub fn input_concat(&self) -> Matrix {
        let agg = mean_aggregate(&self.graph, self.graph.features());
        concat_cols(self.graph.features(), &agg)
    }
}

/// Degree-normalized mean over the full neighborhood; isolated nodes
/// aggregate a zero vector.
pub fn mean_aggregate(g: &Graph, h: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for u in 0..g.node_count() {
        let neigh = g.neighbors(u);
        if neigh.is_empty() {
            continue;
        }
        let inv = 1.0 / neigh.len() as f64;
        let row = out.row_mut(u);
        for &v in neigh {
            for (o, x) in row.iter_mut().zip(h.row(v as usize)) {
                *o += x;
            }
        }
        for o in row.iter_mut() {
            *o *= inv;
        }
    }
    out
}

/// Adjoint of `mean_aggregate`: routes d(agg)[u] back to every neighbor of
/// u with weight 1/deg(u).
fn mean_aggregate_backprop(g: &Graph, d_agg: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(d_agg.rows(), d_agg.cols());
    for u in 0..g.node_count() {
        let neigh = g.neighbors(u);
        if neigh.is_empty() {
            continue;
        }
        let inv = 1.0 / neigh.len() as f64;
        for &v in neigh {
            let src = d_agg.row(u);
            let dst = out.row_mut(v as usize);
            for (o, x) in dst.iter_mut().zip(src) {
                *o += inv * x;
            }
        }
    }
    out
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows(), b.rows(), "concat row mismatch");
    let (n, ca, cb) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, ca + cb);
    for r in 0..n {
        let row = out.row_mut(r);
        row[..ca].copy_from_slice(a.row(r));
        row[ca..].copy_from_slice(b.row(r));
    }
    out
}

struct ForwardParts {
    h1: Matrix,
    c1: Matrix,
    out: Matrix,
}

fn forward_parts(p: &ClassifierParams, g: &Graph, c0: &Matrix) -> ForwardParts {
    let mut z1 = tensor::matmul(c0, &p.w1);
    z1.add_row_vector(&p.b1);
    let h1 = z1.map(|x| x.max(0.0));
    let c1 = concat_cols(&h1, &mean_aggregate(g, &h1));
    let mut z2 = tensor::matmul(&c1, &p.w2);
    z2.add_row_vector(&p.b2);
    let out = tensor::row_softmax(&z2);
    ForwardParts { h1, c1, out }
}

/// Smallest |pre-activation| feeding the ReLU layer; used by the gradient
/// suite to keep finite-difference probes away from the kink.
pub fn min_relu_preactivation_abs(p: &ClassifierParams, t: &LocalTask) -> f64 {
    let c0 = t.input_concat();
    let mut z1 = tensor::matmul(&c0, &p.w1);
    z1.add_row_vector(&p.b1);
    z1.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Full forward pass; one softmaxed row per node (ghosts included).
pub fn forward(p: &ClassifierParams, t: &LocalTask) -> Matrix {
    assert_eq!(
        t.graph.feature_dim(),
        p.input_dim(),
        "feature dim {} does not match classifier input dim {}",
        t.graph.feature_dim(),
        p.input_dim()
    );
    forward_parts(p, &t.graph, &t.input_concat()).out
}

/// Mean cross-entropy over the training nodes plus, when `trace_lambda > 0`,
/// `lambda * Tr(W2 W2^T)`; gradients are analytic through both layers and
/// the aggregation.
pub fn loss_and_grads(
    p: &ClassifierParams,
    t: &LocalTask,
    trace_lambda: f64,
) -> Result<(f64, ClassifierParams)> {
    let c0 = t.input_concat();
    loss_and_grads_with_input(p, t, &c0, trace_lambda)
}

fn loss_and_grads_with_input(
    p: &ClassifierParams,
    t: &LocalTask,
    c0: &Matrix,
    trace_lambda: f64,
) -> Result<(f64, ClassifierParams)> {
    if t.train_ids.is_empty() {
        return Err(Error::InvalidArg("task has no training nodes".into()));
    }
    let parts = forward_parts(p, &t.graph, c0);
    let n_train = t.train_ids.len() as f64;
    let c = p.classes();
    let hidden = p.hidden();

    let mut loss = 0.0;
    let mut d_z2 = Matrix::zeros(parts.out.rows(), c);
    for (&u, &y) in t.train_ids.iter().zip(&t.train_labels) {
        loss -= parts.out.at(u, y).max(f64::MIN_POSITIVE).ln();
        let row = d_z2.row_mut(u);
        for (j, r) in row.iter_mut().enumerate() {
            *r = (parts.out.at(u, j) - if j == y { 1.0 } else { 0.0 }) / n_train;
        }
    }
    loss /= n_train;
    if trace_lambda > 0.0 {
        loss += trace_lambda * p.w2.frobenius_sq();
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "classifier loss (train nodes: {})",
            t.train_ids.len()
        )));
    }

    let mut g_w2 = tensor::matmul_at_b(&parts.c1, &d_z2);
    if trace_lambda > 0.0 {
        g_w2.axpy(2.0 * trace_lambda, &p.w2);
    }
    let g_b2 = d_z2.col_sums();

    let d_c1 = tensor::matmul_a_bt(&d_z2, &p.w2);
    let n = parts.out.rows();
    let mut d_h1_self = Matrix::zeros(n, hidden);
    let mut d_agg = Matrix::zeros(n, hidden);
    for r in 0..n {
        let src = d_c1.row(r);
        d_h1_self.row_mut(r).copy_from_slice(&src[..hidden]);
        d_agg.row_mut(r).copy_from_slice(&src[hidden..]);
    }
    let mut d_h1 = mean_aggregate_backprop(&t.graph, &d_agg);
    d_h1.axpy(1.0, &d_h1_self);

    let relu_mask = parts.h1.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
    let d_z1 = d_h1.hadamard(&relu_mask);
    let g_w1 = tensor::matmul_at_b(c0, &d_z1);
    let g_b1 = d_z1.col_sums();

    Ok((
        loss,
        ClassifierParams {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
        },
    ))
}

/// `T_l` full-batch optimizer steps; the per-step losses come back with the
/// updated parameters. Aborts on a non-finite loss.
pub fn local_sgd_round(
    p: &ClassifierParams,
    t: &LocalTask,
    alpha: f64,
    t_l: usize,
    optimizer: &mut Optimizer,
    trace_lambda: f64,
) -> Result<(ClassifierParams, Vec<f64>)> {
    assert!(t_l >= 1, "T_l must be >= 1");
    let c0 = t.input_concat();
    let mut params = p.clone();
    let mut losses = Vec::with_capacity(t_l);
    for _ in 0..t_l {
        let (loss, grads) = loss_and_grads_with_input(&params, t, &c0, trace_lambda)?;
        losses.push(loss);
        let mut flat = params.to_flat();
        optimizer.step(&mut flat, &grads.to_flat(), alpha);
        params = ClassifierParams::from_flat(p.input_dim(), p.hidden(), p.classes(), &flat)?;
        if !params.all_finite() {
            return Err(Error::NonFinite("classifier parameters after update".into()));
        }
    }
    Ok((params, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::OptimKind;
    use crate::tensor::grad_check;

    fn task_from(
        n: usize,
        edges: &[(u32, u32)],
        features: Matrix,
        labels: Vec<usize>,
        c: usize,
        train_ids: Vec<usize>,
    ) -> LocalTask {
        let train_labels = train_ids.iter().map(|&u| labels[u]).collect();
        let graph = Graph::new(n, edges, features, labels, c).unwrap();
        LocalTask {
            graph,
            n_real: n,
            train_ids,
            train_labels,
            global_ids: (0..n as u32).collect(),
        }
    }

    fn random_task(seed: u64, n: usize, d: usize, c: usize) -> LocalTask {
        let mut rng = Rng::new(seed);
        let features = Matrix::from_fn(n, d, |_, _| rng.normal());
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let mut edges = Vec::new();
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                if rng.next_f64() < 0.35 {
                    edges.push((u, v));
                }
            }
        }
        let train_ids: Vec<usize> = (0..n).filter(|_| rng.next_f64() < 0.6).collect();
        let train_ids = if train_ids.is_empty() { vec![0] } else { train_ids };
        task_from(n, &edges, features, labels, c, train_ids)
    }

    #[test]
    fn isolated_node_zero_weights_is_uniform() {
        let t = task_from(1, &[], Matrix::zeros(1, 4), vec![0], 5, vec![0]);
        let p = ClassifierParams::zeros(4, 3, 5);
        let out = forward(&p, &t);
        for j in 0..5 {
            assert!((out.at(0, j) - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_nodes_get_identical_rows() {
        let features = Matrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![0.3, -1.0, 2.0]]);
        let t = task_from(2, &[(0, 1)], features, vec![0, 0], 3, vec![0]);
        let p = ClassifierParams::init(3, 4, 3, &mut Rng::new(17));
        let out = forward(&p, &t);
        for j in 0..3 {
            assert!((out.at(0, j) - out.at(1, j)).abs() < 1e-15);
        }
    }

    /// Straight-line per-entry recomputation of the two-layer propagation,
    /// kept independent of the Matrix kernels.
    fn forward_oracle(p: &ClassifierParams, t: &LocalTask) -> Vec<Vec<f64>> {
        let g = &t.graph;
        let x = g.features();
        let d = x.cols();
        let hidden = p.hidden();
        let c = p.classes();
        let n = g.node_count();

        let embed = |inputs: &dyn Fn(usize) -> Vec<f64>,
                     w: &Matrix,
                     b: &[f64],
                     width_in: usize,
                     width_out: usize| {
            let mut rows = Vec::with_capacity(n);
            for u in 0..n {
                let self_row = inputs(u);
                let mut mean = vec![0.0; width_in];
                let neigh = g.neighbors(u);
                for &v in neigh {
                    let r = inputs(v as usize);
                    for (m, x) in mean.iter_mut().zip(&r) {
                        *m += x;
                    }
                }
                if !neigh.is_empty() {
                    for m in mean.iter_mut() {
                        *m /= neigh.len() as f64;
                    }
                }
                let mut z = vec![0.0; width_out];
                for (j, zj) in z.iter_mut().enumerate() {
                    let mut acc = b[j];
                    for k in 0..width_in {
                        acc += self_row[k] * w.at(k, j);
                        acc += mean[k] * w.at(width_in + k, j);
                    }
                    *zj = acc;
                }
                rows.push(z);
            }
            rows
        };

        let layer1 = embed(&|u| x.row(u).to_vec(), &p.w1, &p.b1, d, hidden);
        let h1: Vec<Vec<f64>> = layer1
            .iter()
            .map(|r| r.iter().map(|&v| v.max(0.0)).collect())
            .collect();
        let layer2 = embed(&|u| h1[u].clone(), &p.w2, &p.b2, hidden, c);
        layer2
            .into_iter()
            .map(|z| {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
                let s: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / s).collect()
            })
            .collect()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn forward_matches_straight_line_oracle() {
        let t = random_task(21, 5, 3, 4);
        let p = ClassifierParams::init(3, 6, 4, &mut Rng::new(22));
        let got = forward(&p, &t);
        let want = forward_oracle(&p, &t);
        for u in 0..5 {
            for j in 0..4 {
                assert!(
                    (got.at(u, j) - want[u][j]).abs() < 1e-12,
                    "mismatch at ({u},{j})"
                );
            }
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let t = random_task(30, 9, 4, 3);
        let p = ClassifierParams::init(4, 5, 3, &mut Rng::new(31));
        let out = forward(&p, &t);
        for u in 0..out.rows() {
            let s: f64 = out.row(u).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn permuting_node_ids_permutes_rows() {
        let t = random_task(40, 7, 3, 3);
        let p = ClassifierParams::init(3, 4, 3, &mut Rng::new(41));
        let n = t.graph.node_count();

        let mut perm: Vec<usize> = (0..n).collect();
        Rng::new(42).shuffle(&mut perm); // perm[new] = old
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let features = Matrix::from_fn(n, 3, |r, c| t.graph.features().at(perm[r], c));
        let labels: Vec<usize> = perm.iter().map(|&o| t.graph.labels()[o]).collect();
        let edges: Vec<(u32, u32)> = t
            .graph
            .edges()
            .iter()
            .map(|&(u, v)| (inv[u as usize] as u32, inv[v as usize] as u32))
            .collect();
        let tp = task_from(n, &edges, features, labels, 3, vec![0]);

        let base = forward(&p, &t);
        let permuted = forward(&p, &tp);
        for new in 0..n {
            for j in 0..3 {
                assert!((permuted.at(new, j) - base.at(perm[new], j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniform_predictions_give_ln_c() {
        let t = random_task(50, 6, 4, 7);
        let p = ClassifierParams::zeros(4, 3, 7);
        let (loss, _) = loss_and_grads(&p, &t, 0.0).unwrap();
        assert!((loss - (7.0f64).ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn trace_term_of_identity_is_k() {
        let t = random_task(51, 4, 2, 4);
        // hidden = 2 so W2 is square 4x4; set it to I.
        let mut p = ClassifierParams::zeros(2, 2, 4);
        p.w2 = Matrix::from_fn(4, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        let (with, _) = loss_and_grads(&p, &t, 1.0).unwrap();
        let (without, _) = loss_and_grads(&p, &t, 0.0).unwrap();
        assert_eq!(with - without, 4.0);
    }

    #[test]
    fn trace_difference_is_exactly_frobenius() {
        let t = random_task(52, 8, 3, 3);
        let p = ClassifierParams::init(3, 4, 3, &mut Rng::new(53));
        let (with, _) = loss_and_grads(&p, &t, 1.0).unwrap();
        let (without, _) = loss_and_grads(&p, &t, 0.0).unwrap();
        // (ce + f) - ce is exact up to one rounding of the sum.
        let ulp = f64::EPSILON * with.abs();
        assert!((with - without - p.w2.frobenius_sq()).abs() <= ulp);
    }

    #[test]
    fn zero_training_nodes_is_an_error() {
        let mut t = random_task(54, 4, 2, 2);
        t.train_ids.clear();
        t.train_labels.clear();
        assert!(loss_and_grads(&p_of(&t), &t, 0.0).is_err());
    }

    fn p_of(t: &LocalTask) -> ClassifierParams {
        ClassifierParams::init(t.graph.feature_dim(), 4, t.graph.num_classes(), &mut Rng::new(1))
    }

    fn check_block(
        t: &LocalTask,
        p: &ClassifierParams,
        lambda: f64,
        pick: impl Fn(&ClassifierParams) -> Matrix,
        put: impl Fn(&mut ClassifierParams, Matrix),
    ) -> f64 {
        let (_, grads) = loss_and_grads(p, t, lambda).unwrap();
        let x0 = pick(p);
        let analytic = pick(&grads);
        let f = |m: &Matrix| {
            let mut q = p.clone();
            put(&mut q, m.clone());
            loss_and_grads(&q, t, lambda).unwrap().0
        };
        grad_check(f, &x0, &analytic, 1e-5).unwrap()
    }

    /// Max grad_check error over every trainable block.
    pub(crate) fn classifier_grad_error(t: &LocalTask, p: &ClassifierParams, lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        worst = worst.max(check_block(t, p, lambda, |p| p.w1.clone(), |p, m| p.w1 = m));
        worst = worst.max(check_block(
            t,
            p,
            lambda,
            |p| Matrix::from_vec(1, p.b1.len(), p.b1.clone()),
            |p, m| p.b1 = m.data().to_vec(),
        ));
        worst = worst.max(check_block(t, p, lambda, |p| p.w2.clone(), |p, m| p.w2 = m));
        worst = worst.max(check_block(
            t,
            p,
            lambda,
            |p| Matrix::from_vec(1, p.b2.len(), p.b2.clone()),
            |p, m| p.b2 = m.data().to_vec(),
        ));
        worst
    }

    #[test]
    fn gradients_pass_finite_difference_check() {
        let t = random_task(60, 10, 4, 3);
        let p = ClassifierParams::init(4, 5, 3, &mut Rng::new(61));
        let err = classifier_grad_error(&t, &p, 0.0);
        assert!(err < 1e-4, "err {err}");
        let err = classifier_grad_error(&t, &p, 1.0);
        assert!(err < 1e-4, "err with trace {err}");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let t = random_task(70, 6, 3, 3);
        let p = ClassifierParams::init(3, 4, 3, &mut Rng::new(71));
        let mut opt = Optimizer::new(OptimKind::Adam, p.to_flat().len());
        let (after, losses) = local_sgd_round(&p, &t, 0.0, 5, &mut opt, 0.0).unwrap();
        assert_eq!(after, p);
        assert_eq!(losses.len(), 5);
    }

    #[test]
    fn training_descends_on_separable_toy() {
        // Two clusters of four nodes with opposite features.
        let features = Matrix::from_fn(8, 2, |r, c| {
            let sign = if r < 4 { 1.0 } else { -1.0 };
            sign * if c == 0 { 1.0 } else { 0.5 }
        });
        let edges = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)];
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let t = task_from(8, &edges, features, labels, 2, (0..8).collect());
        let p = ClassifierParams::init(2, 4, 2, &mut Rng::new(80));
        let mut opt = Optimizer::new(OptimKind::Adam, p.to_flat().len());
        let (_, losses) = local_sgd_round(&p, &t, 0.01, 10, &mut opt, 0.0).unwrap();
        assert!(
            losses[9] < losses[0],
            "no descent: first {} last {}",
            losses[0],
            losses[9]
        );
    }

    #[test]
    fn local_round_is_bit_deterministic() {
        let t = random_task(90, 8, 3, 3);
        let p = ClassifierParams::init(3, 4, 3, &mut Rng::new(91));
        let run = || {
            let mut opt = Optimizer::new(OptimKind::Adam, p.to_flat().len());
            local_sgd_round(&p, &t, 0.01, 7, &mut opt, 0.5).unwrap()
        };
        let (pa, la) = run();
        let (pb, lb) = run();
        assert_eq!(pa.to_flat(), pb.to_flat());
        assert_eq!(la, lb);
    }

    #[test]
    fn flat_roundtrip_is_identity() {
        let p = ClassifierParams::init(5, 3, 4, &mut Rng::new(100));
        let flat = p.to_flat();
        let q = ClassifierParams::from_flat(5, 3, 4, &flat).unwrap();
        assert_eq!(p, q);
        assert_eq!(flat.len(), ClassifierParams::flat_len(5, 3, 4));
    }
}
