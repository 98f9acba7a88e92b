use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::{EmbeddingRunner, EMBEDDING_DIM};

/// Non-zeros per input coordinate in the sparse projection.
const FAN_OUT: usize = 16;

/// Deterministic stand-in for the pretrained network: a seeded sparse random
/// projection of the L2-normalised, flattened mel window, followed by ReLU.
///
/// Each input coordinate feeds `FAN_OUT` randomly chosen outputs with random
/// sign, so the map is linear and seed-determined but never materialises a
/// dense 512 x (256 * frames) matrix. Projections are built lazily per input
/// width and shared between threads.
#[derive(Debug)]
pub struct StubRunner {
    seed: u64,
    cache: Mutex<HashMap<usize, Arc<Vec<(u16, f32)>>>>,
}

impl StubRunner {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn projection(&self, dim: usize) -> Arc<Vec<(u16, f32)>> {
        let mut cache = self.cache.lock().unwrap();
        cache
            .entry(dim)
            .or_insert_with(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (dim as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let w = 1.0 / (FAN_OUT as f32).sqrt();
                Arc::new(
                    (0..dim * FAN_OUT)
                        .map(|_| {
                            let row = rng.gen_range(0..EMBEDDING_DIM) as u16;
                            (row, if rng.gen::<bool>() { w } else { -w })
                        })
                        .collect(),
                )
            })
            .clone()
    }

    /// The linear part, applied to an already flattened input.
    pub fn project(&self, flat: &[f64]) -> Vec<f64> {
        let p = self.projection(flat.len());
        let mut out = vec![0.0; EMBEDDING_DIM];
        for (j, &x) in flat.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for &(row, w) in &p[j * FAN_OUT..(j + 1) * FAN_OUT] {
                out[row as usize] += w as f64 * x;
            }
        }
        out
    }
}

impl EmbeddingRunner for StubRunner {
    fn embed(&self, mel_window: &Array2<f64>) -> Result<Vec<f64>, String> {
        let flat: Vec<f64> = mel_window.iter().cloned().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err("mel window contains non-finite energies".into());
        }
        let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit: Vec<f64> = if norm > 0.0 {
            flat.iter().map(|v| v / norm).collect()
        } else {
            flat
        };
        Ok(self.project(&unit).into_iter().map(|v| v.max(0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((256, 20), |_| rng.gen::<f64>())
    }

    #[test]
    fn deterministic_per_seed() {
        let w = window(1);
        let a = StubRunner::new(3).embed(&w).unwrap();
        let b = StubRunner::new(3).embed(&w).unwrap();
        let c = StubRunner::new(4).embed(&w).unwrap();
        assert_eq!(a.len(), EMBEDDING_DIM);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&v| v >= 0.0));
        assert!(a.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn projection_is_linear_and_normalisation_removes_gain() {
        let r = StubRunner::new(11);
        let w = window(2);
        let flat: Vec<f64> = w.iter().cloned().collect();
        let doubled: Vec<f64> = flat.iter().map(|v| 2.0 * v).collect();
        for (a, b) in r.project(&doubled).iter().zip(r.project(&flat)) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let x = r.embed(&w).unwrap();
        let y = r.embed(&w.mapv(|v| 2.0 * v)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn silent_window_maps_to_zero() {
        let out = StubRunner::new(0).embed(&Array2::zeros((256, 5))).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }
}
