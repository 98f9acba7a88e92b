use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::classifiers::{check_training_data, TrainedModel};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 5000;
pub const OBJECTIVE_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

impl Penalty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub penalty: Penalty,
    #[serde(rename = "C")]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl LogRegModel {
    pub fn margin(&self, x: ArrayView1<f64>) -> f64 {
        x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias
    }

    pub fn probability(&self, x: ArrayView1<f64>) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegTrace {
    /// Objective after every accepted iterate, starting from zero weights.
    pub objective: Vec<f64>,
    /// Norm of the proximal gradient mapping at the returned point.
    pub gradient_norm: f64,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(-m)) without overflow.
fn log_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: &'a Array2<f64>,
    y: Array1<f64>,
    penalty: Penalty,
    lambda: f64,
}

impl Problem<'_> {
    /// `y * (x w + b)`; linear in the parameters.
    fn margins(&self, z: &Array1<f64>) -> Array1<f64> {
        let d = self.x.ncols();
        let mut m = self.x.dot(&z.slice(ndarray::s![..d]));
        m += z[d];
        m *= &self.y;
        m
    }

    fn regulariser(&self, z: &Array1<f64>) -> f64 {
        let w = z.slice(ndarray::s![..self.x.ncols()]);
        match self.penalty {
            Penalty::L1 => self.lambda * w.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::L2 => self.lambda * 0.5 * w.dot(&w),
        }
    }

    fn objective(&self, z: &Array1<f64>, margins: &Array1<f64>) -> f64 {
        margins.iter().map(|&m| log_loss(m)).sum::<f64>() + self.regulariser(z)
    }

    /// Gradient of the smooth part (the l2 term counts as smooth).
    fn smooth_gradient(&self, z: &Array1<f64>, margins: &Array1<f64>) -> Array1<f64> {
        let d = self.x.ncols();
        let coef = ndarray::Zip::from(&self.y).and(margins).map_collect(|&yi, &m| -yi * sigmoid(-m));
        let mut g = Array1::zeros(d + 1);
        g.slice_mut(ndarray::s![..d]).assign(&self.x.t().dot(&coef));
        g[d] = coef.sum();
        if self.penalty == Penalty::L2 {
            g.slice_mut(ndarray::s![..d]).scaled_add(self.lambda, &z.slice(ndarray::s![..d]));
        }
        g
    }

    fn prox(&self, mut v: Array1<f64>, step: f64) -> Array1<f64> {
        if self.penalty == Penalty::L1 {
            let t = self.lambda * step;
            let d = self.x.ncols();
            for w in v.slice_mut(ndarray::s![..d]).iter_mut() {
                *w = w.signum() * (w.abs() - t).max(0.0);
            }
        }
        v
    }

    /// Bound on the Lipschitz constant of the smooth gradient.
    fn lipschitz(&self, seed: u64) -> f64 {
        let d = self.x.ncols();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = Array1::<f64>::from_shape_fn(d + 1, |_| rng.gen_range(0.5..1.5));
        let mut sigma2: f64 = 0.0;
        for _ in 0..100 {
            let norm = v.dot(&v).sqrt();
            v /= norm;
            let xv = self.x.dot(&v.slice(ndarray::s![..d])) + v[d];
            let mut next = Array1::zeros(d + 1);
            next.slice_mut(ndarray::s![..d]).assign(&self.x.t().dot(&xv));
            next[d] = xv.sum();
            let s = next.dot(&v);
            let done = (s - sigma2).abs() <= 1e-10 * s;
            sigma2 = s;
            v = next;
            if done {
                break;
            }
        }
        let l = 0.25 * sigma2 * 1.01;
        let l = if self.penalty == Penalty::L2 { l + self.lambda } else { l };
        l.max(1e-12)
    }
}

/// Monotone FISTA on the penalised log-likelihood. The seed only starts the
/// power iteration used for the step size.
pub fn train_logreg_traced(
    x: &Array2<f64>,
    y: &[f64],
    p: &LogRegParams,
    seed: u64,
) -> Result<(LogRegModel, LogRegTrace)> {
    check_training_data(x, y)?;
    if !(p.c > 0.0 && p.c.is_finite()) {
        return Err(Error::invalid(format!("LR needs C > 0, got {}", p.c)));
    }
    let problem = Problem {
        x,
        y: Array1::from(y.to_vec()),
        penalty: p.penalty,
        lambda: 1.0 / p.c,
    };
    let d = x.ncols();
    let l = problem.lipschitz(seed);

    let mut cur = Array1::zeros(d + 1);
    let mut cur_m = problem.margins(&cur);
    let mut cur_obj = problem.objective(&cur, &cur_m);
    let mut look = cur.clone();
    let mut look_m = cur_m.clone();
    let mut t = 1.0f64;
    let mut history = vec![cur_obj];
    let mut iterations = 0;
    let mut converged = false;

    let mapping_norm = |z: &Array1<f64>, m: &Array1<f64>| {
        let g = problem.smooth_gradient(z, m);
        let next = problem.prox(z - &(&g / l), 1.0 / l);
        (z - &next).dot(&(z - &next)).sqrt() * l
    };

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = problem.smooth_gradient(&look, &look_m);
        let cand = problem.prox(&look - &(&g / l), 1.0 / l);
        let cand_m = problem.margins(&cand);
        let cand_obj = problem.objective(&cand, &cand_m);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let decrease = cur_obj - cand_obj.min(cur_obj);
        // margins are linear in the parameters, so the extrapolated point's
        // margins follow from ones already computed
        if cand_obj <= cur_obj {
            let b = (t - 1.0) / t_next;
            look = &cand + &((&cand - &cur) * b);
            look_m = &cand_m + &((&cand_m - &cur_m) * b);
            cur = cand;
            cur_m = cand_m;
            cur_obj = cand_obj;
        } else {
            let a = t / t_next;
            look = &cur + &((&cand - &cur) * a);
            look_m = &cur_m + &((&cand_m - &cur_m) * a);
        }
        t = t_next;
        history.push(cur_obj);

        if decrease < OBJECTIVE_TOLERANCE && mapping_norm(&cur, &cur_m) <= GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
    }
    let gradient_norm = mapping_norm(&cur, &cur_m);
    if !converged {
        log::debug!("LR stopped at {MAX_ITERATIONS} iterations, gradient mapping {gradient_norm:.3e}");
    }
    let model = LogRegModel {
        weights: cur.slice(ndarray::s![..d]).to_vec(),
        bias: cur[d],
        seed,
        iterations,
    };
    Ok((
        model,
        LogRegTrace {
            objective: history,
            gradient_norm,
            converged,
        },
    ))
}

pub fn train_logreg(x: &Array2<f64>, y: &[f64], p: &LogRegParams, seed: u64) -> Result<TrainedModel> {
    Ok(TrainedModel::LogReg(train_logreg_traced(x, y, p, seed)?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn params(penalty: Penalty, c: f64) -> LogRegParams {
        LogRegParams { penalty, c }
    }

    #[test]
    fn separable_line_is_fit() {
        let x = array![[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]];
        let y = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
        let (m, _) = train_logreg_traced(&x, &y, &params(Penalty::L2, 1e3), 0).unwrap();
        for (row, &t) in x.rows().into_iter().zip(&y) {
            assert_eq!(if m.probability(row) >= 0.5 { 1.0 } else { -1.0 }, t);
        }
    }

    #[test]
    fn strong_l1_zeroes_noise_weights() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((80, 40), |_| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (0..80).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (m, _) = train_logreg_traced(&x, &y, &params(Penalty::L1, 1e-3), 0).unwrap();
        let zeros = m.weights.iter().filter(|w| **w == 0.0).count();
        assert!(zeros * 10 >= 9 * m.weights.len(), "{zeros} zero weights");
    }

    #[test]
    fn mirrored_data_has_no_bias() {
        let x = array![[1.0, 0.5], [2.0, -0.3], [0.4, 1.2], [-1.0, -0.5], [-2.0, 0.3], [-0.4, -1.2]];
        let y = [1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
        for penalty in [Penalty::L1, Penalty::L2] {
            let (m, _) = train_logreg_traced(&x, &y, &params(penalty, 1.0), 0).unwrap();
            assert!(m.bias.abs() < 1e-6, "{penalty:?} bias {}", m.bias);
        }
    }

    #[test]
    fn gradient_vanishes_at_the_l2_solution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((60, 5), |_| StandardNormal.sample(&mut rng));
        let noise: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .zip(&noise)
            .map(|(r, e)| if r[0] + 0.5 * r[1] + 0.3 * e > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let p = params(Penalty::L2, 1.0);
        let (m, trace) = train_logreg_traced(&x, &y, &p, 0).unwrap();
        assert!(trace.converged);
        // independent gradient of the full objective
        let mut g = vec![0.0; 6];
        for (row, &t) in x.rows().into_iter().zip(&y) {
            let s = -t / (1.0 + (t * m.margin(row)).exp());
            for j in 0..5 {
                g[j] += s * row[j];
            }
            g[5] += s;
        }
        for j in 0..5 {
            g[j] += m.weights[j];
        }
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= GRADIENT_TOLERANCE);
    }

    #[test]
    fn rejects_bad_c() {
        let x = array![[0.0], [1.0]];
        assert!(train_logreg(&x, &[-1.0, 1.0], &params(Penalty::L2, 0.0), 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn objective_never_increases(seed in 0u64..1000, l1 in any::<bool>(), logc in -3i32..4) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((20, 4), |_| StandardNormal.sample(&mut rng));
            let mut y: Vec<f64> = (0..20).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let p = params(if l1 { Penalty::L1 } else { Penalty::L2 }, 10f64.powi(logc));
            let (_, trace) = train_logreg_traced(&x, &y, &p, seed).unwrap();
            prop_assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
