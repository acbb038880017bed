//! Flat-vector optimizers. Adam(0.9, 0.999, 1e-8) is the default; plain SGD
//! stays available behind the config switch.

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimKind, len: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Drops accumulated moments (used when global parameters overwrite
    /// local ones).
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len(), "optimizer length mismatch");
        match self.kind {
            OptimKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimKind::Adam => {
                assert_eq!(params.len(), self.m.len(), "optimizer state length mismatch");
                self.t += 1;
                let bc1 = 1.0 - BETA1.powi(self.t as i32);
                let bc2 = 1.0 - BETA2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= lr * mhat / (vhat.sqrt() + EPS);
                }
            }
        }
    }
}
