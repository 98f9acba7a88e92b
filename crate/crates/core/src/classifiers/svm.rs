use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::classifiers::{check_training_data, TrainedModel};
use crate::error::{Error, Result};

pub const SMO_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Poly { degree: u32 },
    Sigmoid,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Rbf => "rbf",
            Kernel::Poly { .. } => "poly",
            Kernel::Sigmoid => "sigmoid",
        }
    }

    pub fn eval(&self, gamma: f64, u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
        match self {
            Kernel::Rbf => {
                let d2: f64 = u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Poly { degree } => (gamma * u.dot(&v) + 1.0).powi(*degree as i32),
            Kernel::Sigmoid => (gamma * u.dot(&v) + 1.0).tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub kernel: Kernel,
    pub gamma: f64,
}

impl SvmParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.gamma > 0.0) {
            return Err(Error::invalid(format!("SVM needs C > 0 and gamma > 0, got {self:?}")));
        }
        if let Kernel::Poly { degree } = self.kernel {
            if degree == 0 {
                return Err(Error::invalid("poly degree must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Support vectors with their signed duals `alpha_i * y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub support_vectors: Array2<f64>,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub width: usize,
    pub seed: u64,
    /// Largest KKT violation `m(alpha) - M(alpha)` when the solver stopped.
    pub kkt_gap: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        self.support_vectors
            .rows()
            .into_iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Precomputed Gram matrix, reusable across values of C.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub kernel: Kernel,
    pub gamma: f64,
    pub k: Array2<f64>,
}

impl KernelMatrix {
    pub fn new(x: &Array2<f64>, kernel: Kernel, gamma: f64) -> Self {
        let n = x.nrows();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(gamma, x.row(i), x.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        Self { kernel, gamma, k }
    }

    /// Solves the C-SVC dual with second-order working-set selection.
    pub fn fit(&self, x: &Array2<f64>, y: &[f64], c: f64, seed: u64) -> Result<SvmModel> {
        check_training_data(x, y)?;
        let params = SvmParams {
            c,
            kernel: self.kernel,
            gamma: self.gamma,
        };
        params.validate()?;
        let n = y.len();
        let k = &self.k;
        let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let max_iter = (10 * n * n).max(1000);
        let is_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
        let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

        let mut gap = f64::INFINITY;
        let mut iter = 0;
        while iter < max_iter {
            let mut i = usize::MAX;
            let mut g_max = f64::NEG_INFINITY;
            for t in 0..n {
                if is_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                    g_max = -y[t] * grad[t];
                    i = t;
                }
            }
            let mut g_min = f64::INFINITY;
            let mut j = usize::MAX;
            let mut best = f64::INFINITY;
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                g_min = g_min.min(v);
                if i == usize::MAX {
                    continue;
                }
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    if -(b * b) / a < best {
                        best = -(b * b) / a;
                        j = t;
                    }
                }
            }
            gap = g_max - g_min;
            if i == usize::MAX || j == usize::MAX || gap < SMO_TOLERANCE {
                break;
            }
            iter += 1;

            let (old_ai, old_aj) = (alpha[i], alpha[j]);
            let mut a = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
            if a <= 0.0 {
                a = TAU;
            }
            if y[i] != y[j] {
                let delta = (-grad[i] - grad[j]) / a;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 && alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                } else if diff <= 0.0 && alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 && alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                } else if diff <= 0.0 && alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / a;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c && alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                } else if sum <= c && alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c && alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                } else if sum <= c && alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
            for t in 0..n {
                grad[t] += q(t, i) * di + q(t, j) * dj;
            }
        }
        if gap >= SMO_TOLERANCE {
            log::warn!("SMO stopped after {iter} iterations with KKT gap {gap:.3e}");
        }

        // offset: average over free vectors, else the midpoint of the bounds
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < c {
                sum_free += yg;
                n_free += 1;
            } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        let mut support_vectors = Array2::zeros((sv.len(), x.ncols()));
        for (r, &t) in sv.iter().enumerate() {
            support_vectors.row_mut(r).assign(&x.row(t));
        }
        Ok(SvmModel {
            kernel: self.kernel,
            gamma: self.gamma,
            support_vectors,
            dual_coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
            bias: -rho,
            width: x.ncols(),
            seed,
            kkt_gap: gap,
            iterations: iter,
        })
    }
}

pub fn train_svm(x: &Array2<f64>, y: &[f64], p: &SvmParams, seed: u64) -> Result<TrainedModel> {
    check_training_data(x, y)?;
    p.validate()?;
    Ok(TrainedModel::Svm(KernelMatrix::new(x, p.kernel, p.gamma).fit(x, y, p.c, seed)?))
}
