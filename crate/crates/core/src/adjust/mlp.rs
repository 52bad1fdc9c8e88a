//! One-hidden-layer perceptron with logistic units and a linear output,
//! trained by full-batch Adam on a weighted, weight-decayed squared error.

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    /// Penalty on the squared connection weights (biases are free).
    pub weight_decay: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 8,
            weight_decay: 1e-3,
            epochs: 2000,
            learning_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    /// `hidden × inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

impl Mlp {
    /// Glorot-uniform initial weights, zero biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        Mlp {
            inputs,
            hidden,
            w1: (0..inputs * hidden)
                .map(|_| rng.random_range(-a1..a1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-a2..a2)).collect(),
            b2: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let a: f64 = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out += self.w2[j] * sigmoid(a);
        }
        out
    }

    fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn pack(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    fn unpack(&mut self, p: &[f64]) {
        let (n1, h) = (self.w1.len(), self.hidden);
        self.w1.copy_from_slice(&p[..n1]);
        self.b1.copy_from_slice(&p[n1..n1 + h]);
        self.w2.copy_from_slice(&p[n1 + h..n1 + 2 * h]);
        self.b2 = p[n1 + 2 * h];
    }

    /// Penalised loss and its gradient in packed order. `w` sums to 1.
    fn loss_grad(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        w: &DVector<f64>,
        decay: f64,
        grad: &mut [f64],
    ) -> f64 {
        let (d, h) = (self.inputs, self.hidden);
        let n1 = self.w1.len();
        // w1 is row-major h×d, i.e. column-major d×h
        let w1t = DMatrixView::from_slice(&self.w1, d, h);
        let mut z = x * w1t;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let b = self.b1[j];
            col.apply(|a| *a = sigmoid(*a + b));
        }
        let w2 = DVectorView::from_slice(&self.w2, h);
        let mut g_out = &z * w2;
        let mut loss = 0.0;
        for i in 0..g_out.len() {
            let err = g_out[i] + self.b2 - y[i];
            loss += w[i] * err * err;
            g_out[i] = 2.0 * w[i] * err;
        }
        grad[n1 + 2 * h] = g_out.sum();
        let gw2 = z.tr_mul(&g_out);
        for j in 0..h {
            let wj = self.w2[j];
            grad[n1 + h + j] = gw2[j] + 2.0 * decay * wj;
            let mut col = z.column_mut(j);
            col.zip_apply(&g_out, |zv, g| *zv = g * wj * *zv * (1.0 - *zv));
            grad[n1 + j] = col.sum();
        }
        // z now holds the pre-activation gradients; dL/dW1ᵀ = Xᵀ·GA (d×h)
        let gw1 = x.tr_mul(&z);
        grad[..n1].copy_from_slice(gw1.as_slice());
        let mut penalty = 0.0;
        for k in 0..n1 {
            penalty += self.w1[k] * self.w1[k];
            grad[k] += 2.0 * decay * self.w1[k];
        }
        penalty += self.w2.iter().map(|v| v * v).sum::<f64>();
        loss + decay * penalty
    }

    /// Trains in place. Fails if the loss becomes non-finite or ends above
    /// its starting value.
    pub fn train(
        &mut self,
        x: &[f64],
        y: &[f64],
        weights: &[f64],
        cfg: &MlpConfig,
    ) -> Result<TrainReport> {
        let n = y.len();
        if x.len() != n * self.inputs || weights.len() != n || n == 0 {
            return Err(Error::Contract("training data dimensions disagree".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateWeights);
        }
        let w = DVector::from_iterator(n, weights.iter().map(|v| v / total));
        let x = DMatrix::from_row_slice(n, self.inputs, x);
        let y = DVector::from_column_slice(y);
        let mut params = self.pack();
        let mut grad = vec![0.0; params.len()];
        let mut adam = Adam::new(params.len());
        let initial_loss = self.loss_grad(&x, &y, &w, cfg.weight_decay, &mut grad);
        let mut loss = initial_loss;
        for epoch in 0..cfg.epochs {
            if epoch > 0 {
                loss = self.loss_grad(&x, &y, &w, cfg.weight_decay, &mut grad);
            }
            if !loss.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "loss became {loss} at epoch {epoch} (initial {initial_loss:.4e})"
                )));
            }
            adam.step(&mut params, &grad, cfg.learning_rate);
            self.unpack(&params);
        }
        let final_loss = self.loss_grad(&x, &y, &w, cfg.weight_decay, &mut grad);
        if !final_loss.is_finite() || final_loss > initial_loss {
            return Err(Error::NonConvergence(format!(
                "loss went from {initial_loss:.4e} to {final_loss:.4e} over {} epochs",
                cfg.epochs
            )));
        }
        Ok(TrainReport {
            initial_loss,
            final_loss,
        })
    }
}
