//! Small fully-connected networks with hand-derived backprop. Backs the
//! graph-imputation autoencoder and the assessor.

use crate::rng::Rng;
use crate::tensor::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    RowSoftmax,
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Matrix, // in x out
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations of every layer for one forward pass; `acts[0]` is the input
/// and `acts[L]` the output.
pub struct MlpCache {
    pub acts: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.axpy(1.0, &b.w);
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.w.data().iter().chain(l.b.iter()))
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn apply(act: Activation, z: Matrix) -> Matrix {
    match act {
        Activation::Linear => z,
        Activation::Relu => z.map(|x| x.max(0.0)),
        Activation::Sigmoid => z.map(|x| 1.0 / (1.0 + (-x).exp())),
        Activation::RowSoftmax => tensor::row_softmax(&z),
    }
}

/// dL/dZ from dL/dA; every activation derivative here is a function of the
/// output activation alone.
fn backprop_activation(act: Activation, a: &Matrix, da: Matrix) -> Matrix {
    match act {
        Activation::Linear => da,
        Activation::Relu => {
            let mask = a.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
            da.hadamard(&mask)
        }
        Activation::Sigmoid => {
            let deriv = a.map(|x| x * (1.0 - x));
            da.hadamard(&deriv)
        }
        Activation::RowSoftmax => {
            let mut dz = Matrix::zeros(a.rows(), a.cols());
            for r in 0..a.rows() {
                let arow = a.row(r);
                let darow = da.row(r);
                let dot: f64 = arow.iter().zip(darow).map(|(x, y)| x * y).sum();
                let out = dz.row_mut(r);
                for j in 0..arow.len() {
                    out[j] = arow[j] * (darow[j] - dot);
                }
            }
            dz
        }
    }
}

impl Mlp {
    /// `widths[0]` is the input width; `acts[i]` activates the layer into
    /// `widths[i + 1]`. Weights init uniform +-1/sqrt(fan_in).
    pub fn new(widths: &[usize], acts: &[Activation], rng: &mut Rng) -> Self {
        assert_eq!(widths.len(), acts.len() + 1, "widths/activations mismatch");
        let mut layers = Vec::with_capacity(acts.len());
        for (i, &act) in acts.iter().enumerate() {
            let fan_in = widths[i];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Matrix::from_fn(fan_in, widths[i + 1], |_, _| rng.uniform(-bound, bound));
            layers.push(Dense {
                w,
                b: vec![0.0; widths[i + 1]],
                act,
            });
        }
        Self { layers }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        self.forward_cache(x).acts.pop().unwrap()
    }

    /// Smallest |pre-activation| feeding a ReLU anywhere in the net
    /// (infinity when there is none). A finite-difference probe is only
    /// trustworthy when this clears the perturbation radius.
    pub fn min_relu_preactivation_abs(&self, x: &Matrix) -> f64 {
        let mut min = f64::INFINITY;
        let mut a = x.clone();
        for layer in &self.layers {
            let mut z = tensor::matmul(&a, &layer.w);
            z.add_row_vector(&layer.b);
            if layer.act == Activation::Relu {
                for &v in z.data() {
                    min = min.min(v.abs());
                }
            }
            a = apply(layer.act, z);
        }
        min
    }

    pub fn forward_cache(&self, x: &Matrix) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let mut z = tensor::matmul(acts.last().unwrap(), &layer.w);
            z.add_row_vector(&layer.b);
            acts.push(apply(layer.act, z));
        }
        MlpCache { acts }
    }

    /// Backprop `d_out` (gradient w.r.t. the network output) through every
    /// layer; returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, d_out: Matrix) -> (MlpGrads, Matrix) {
        let mut da = d_out;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_out = &cache.acts[l + 1];
            let a_in = &cache.acts[l];
            let dz = backprop_activation(layer.act, a_out, da);
            let gw = tensor::matmul_at_b(a_in, &dz);
            let gb = dz.col_sums();
            da = tensor::matmul_a_bt(&dz, &layer.w);
            grads.push(LayerGrads { w: gw, b: gb });
        }
        grads.reverse();
        (MlpGrads { layers: grads }, da)
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w: Matrix::zeros(l.w.rows(), l.w.cols()),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn flat_len(&self) -> usize {
        self.layers.iter().map(|l| l.w.data().len() + l.b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.flat_len(), "flat parameter length mismatch");
        let mut at = 0;
        for l in &mut self.layers {
            let wlen = l.w.data().len();
            let (rows, cols) = (l.w.rows(), l.w.cols());
            l.w = Matrix::from_vec(rows, cols, flat[at..at + wlen].to_vec());
            at += wlen;
            let blen = l.b.len();
            l.b.copy_from_slice(&flat[at..at + blen]);
            at += blen;
        }
    }

    pub fn grads_flat(&self, grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for l in &grads.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;

    fn toy_mlp(seed: u64) -> Mlp {
        Mlp::new(
            &[3, 4, 2],
            &[Activation::Relu, Activation::RowSoftmax],
            &mut Rng::new(seed),
        )
    }

    #[test]
    fn forward_shapes() {
        let mlp = toy_mlp(1);
        let x = Matrix::zeros(5, 3);
        let y = mlp.forward(&x);
        assert_eq!((y.rows(), y.cols()), (5, 2));
        for r in 0..5 {
            let s: f64 = y.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences_through_softmax() {
        let mlp = toy_mlp(2);
        let mut rng = Rng::new(3);
        let x = Matrix::from_fn(4, 3, |_, _| rng.normal());
        let targets = [0usize, 1, 1, 0];

        // Loss: mean CE against fixed targets.
        let loss_of = |net: &Mlp| -> f64 {
            let out = net.forward(&x);
            -(0..4).map(|r| out.at(r, targets[r]).ln()).sum::<f64>() / 4.0
        };

        let cache = mlp.forward_cache(&x);
        let out = cache.acts.last().unwrap();
        let d_out = Matrix::from_fn(4, 2, |r, c| {
            if targets[r] == c { -1.0 / (4.0 * out.at(r, c)) } else { 0.0 }
        });
        let (grads, _) = mlp.backward(&cache, d_out);

        // Check the first layer's weights entry-wise via grad_check.
        let w0 = mlp.layers[0].w.clone();
        let f = |w: &Matrix| {
            let mut net = mlp.clone();
            net.layers[0].w = w.clone();
            loss_of(&net)
        };
        let err = grad_check(f, &w0, &grads.layers[0].w, 1e-6).unwrap();
        assert!(err < 1e-5, "err {err}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mlp = Mlp::new(
            &[3, 5, 1],
            &[Activation::Relu, Activation::Sigmoid],
            &mut Rng::new(7),
        );
        let mut rng = Rng::new(8);
        let x = Matrix::from_fn(2, 3, |_, _| rng.normal());

        let loss_of = |input: &Matrix| mlp.forward(input).data().iter().sum::<f64>();
        let cache = mlp.forward_cache(&x);
        let d_out = Matrix::from_fn(2, 1, |_, _| 1.0);
        let (_, dx) = mlp.backward(&cache, d_out);
        let err = grad_check(loss_of, &x, &dx, 1e-6).unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn flat_roundtrip_is_identity() {
        let mut mlp = toy_mlp(5);
        let flat = mlp.to_flat();
        let orig = flat.clone();
        mlp.load_flat(&flat);
        assert_eq!(mlp.to_flat(), orig);
    }
}
