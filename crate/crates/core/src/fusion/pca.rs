use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Principal axes of a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `(k, d)`, orthonormal rows ordered by decreasing variance.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub target_variance: f64,
}

impl PcaModel {
    /// Every non-degenerate component of the centred data.
    pub fn fit_full(x: &Array2<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n < 2 {
            return Err(Error::invalid(format!("PCA needs at least 2 rows, got {n}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA input".into()));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let centred = x - &mean;

        // decompose whichever orientation is tall so the axes come out as
        // left or right singular vectors of the smaller problem
        let (singular, axes): (Vec<f64>, DMatrix<f64>) = if n >= d {
            let m = DMatrix::from_row_slice(n, d, centred.as_slice().unwrap());
            let svd = m.svd(false, true);
            (svd.singular_values.iter().cloned().collect(), svd.v_t.unwrap().transpose())
        } else {
            let m = DMatrix::from_column_slice(d, n, centred.as_slice().unwrap());
            let svd = m.svd(true, false);
            (svd.singular_values.iter().cloned().collect(), svd.u.unwrap())
        };

        let mut order: Vec<usize> = (0..singular.len()).collect();
        order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));
        let s_max = singular.iter().cloned().fold(0.0, f64::max);
        let tol = s_max * n.max(d) as f64 * f64::EPSILON;
        let keep: Vec<usize> = order.into_iter().filter(|&i| singular[i] > tol).collect();

        let total: f64 = keep.iter().map(|&i| singular[i] * singular[i]).sum();
        let mut components = Array2::zeros((keep.len(), d));
        for (r, &i) in keep.iter().enumerate() {
            let col = axes.column(i);
            // deterministic sign: largest-magnitude loading is positive
            let pivot = (0..d).fold(0, |b, j| if col[j].abs() > col[b].abs() { j } else { b });
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[[r, j]] = sign * col[j];
            }
        }
        let explained_variance: Vec<f64> = keep.iter().map(|&i| singular[i].powi(2) / (n - 1) as f64).collect();
        let explained_variance_ratio = keep.iter().map(|&i| singular[i].powi(2) / total).collect();
        Ok(Self {
            mean,
            components,
            explained_variance,
            explained_variance_ratio,
            target_variance: 1.0,
        })
    }

    /// Keeps the fewest leading components whose cumulative ratio reaches
    /// `target`.
    pub fn truncate(&self, target: f64) -> Result<Self> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::invalid(format!("target variance {target} must lie in (0, 1]")));
        }
        let mut acc = 0.0;
        let mut k = self.explained_variance_ratio.len();
        for (i, r) in self.explained_variance_ratio.iter().enumerate() {
            acc += r;
            if acc >= target - 1e-12 {
                k = i + 1;
                break;
            }
        }
        Ok(Self {
            mean: self.mean.clone(),
            components: self.components.slice(ndarray::s![..k, ..]).to_owned(),
            explained_variance: self.explained_variance[..k].to_vec(),
            explained_variance_ratio: self.explained_variance_ratio[..k].to_vec(),
            target_variance: target,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "PCA fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok((x - &self.mean).dot(&self.components.t()))
    }

    /// Maps projected coordinates back into the input space.
    pub fn inverse_transform(&self, z: &Array2<f64>) -> Array2<f64> {
        z.dot(&self.components) + &self.mean
    }
}

/// Centred SVD, truncated to the smallest component count reaching
/// `target_variance`.
pub fn fit_pca(x: &Array2<f64>, target_variance: f64) -> Result<PcaModel> {
    PcaModel::fit_full(x)?.truncate(target_variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn points_on_a_line_need_one_component() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| i as f64 * if j == 0 { 1.0 } else { 2.0 } + 3.0);
        let p = fit_pca(&x, 0.95).unwrap();
        assert_eq!(p.n_components(), 1);
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        let axis = p.components.row(0);
        assert!((axis[0] - 1.0 / 5f64.sqrt()).abs() < 1e-12 && (axis[1] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn isotropic_cloud_needs_both_axes() {
        let x = gaussian(1000, 2, 1);
        let p = fit_pca(&x, 0.95).unwrap();
        assert_eq!(p.n_components(), 2);
        // eigenvalue oracle: the 2x2 sample covariance in closed form
        let c = x.t().dot(&(&x - &x.mean_axis(Axis(0)).unwrap())) / 999.0;
        let (a, b, d) = (c[[0, 0]], c[[0, 1]], c[[1, 1]]);
        let disc = ((a - d).powi(2) / 4.0 + b * b).sqrt();
        let eig = [(a + d) / 2.0 + disc, (a + d) / 2.0 - disc];
        for (got, want) in p.explained_variance.iter().zip(eig) {
            assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn projected_covariance_is_diagonal_eigenvalues() {
        let mut x = gaussian(400, 5, 2);
        for (j, s) in [3.0, 2.0, 1.5, 1.0, 0.5].iter().enumerate() {
            x.column_mut(j).mapv_inplace(|v| v * s);
        }
        let p = fit_pca(&x, 1.0).unwrap();
        let z = p.transform(&x).unwrap();
        let cov = z.t().dot(&z) / 399.0;
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { p.explained_variance[i] } else { 0.0 };
                assert!((cov[[i, j]] - want).abs() <= 0.05 * p.explained_variance[i.max(j)].max(1e-9));
            }
        }
    }

    #[test]
    fn wide_matrix_uses_the_small_side() {
        let x = gaussian(12, 300, 3);
        let p = PcaModel::fit_full(&x).unwrap();
        assert_eq!(p.n_components(), 11);
        let g = p.components.dot(&p.components.t());
        for i in 0..11 {
            for j in 0..11 {
                assert!((g[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(fit_pca(&Array2::zeros((1, 3)), 0.9).is_err());
        assert!(fit_pca(&gaussian(5, 2, 0), 0.0).is_err());
        assert!(fit_pca(&gaussian(5, 2, 0), 1.5).is_err());
        let mut x = gaussian(5, 2, 0);
        x[[1, 1]] = f64::INFINITY;
        assert!(fit_pca(&x, 0.9).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn minimal_k_and_idempotent_projection(
            seed in 0u64..500, n in 3usize..30, d in 1usize..12, target in 0.05f64..1.0,
        ) {
            let x = gaussian(n, d, seed);
            let p = fit_pca(&x, target).unwrap();
            let r = &p.explained_variance_ratio;
            prop_assert!(r.iter().all(|&v| v > 0.0));
            prop_assert!(r.windows(2).all(|w| w[0] >= w[1] - 1e-15));
            let cum: f64 = r.iter().sum();
            prop_assert!(cum >= target - 1e-12);
            prop_assert!(cum - r[r.len() - 1] < target - 1e-12);

            let z = p.transform(&x).unwrap();
            let again = p.transform(&p.inverse_transform(&z)).unwrap();
            for (a, b) in z.iter().zip(again.iter()) {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
            }
            let g = p.components.dot(&p.components.t());
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g[[i, j]] - e).abs() < 1e-8);
                }
            }
        }
    }
}
