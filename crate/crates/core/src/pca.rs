//! Spatial averaging of latents and exact 4×4 principal component analysis.

use serde::{Deserialize, Serialize};

use crate::codec::{LatentTensor, LATENT_CHANNELS};
use crate::error::{Error, Result};

/// Spatial means of the four latent channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVec4(pub [f64; 4]);

impl LatentVec4 {
    pub fn dot(&self, other: &[f64; 4]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Mean vector, descending eigenvalues of the sample covariance, and the
/// matching unit eigenvectors (one per row).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: LatentVec4,
    pub eigenvalues: [f64; 4],
    pub eigenvectors: [[f64; 4]; 4],
    pub explained: [f64; 4],
}

impl PcaResult {
    /// Sanity checks for a result loaded from disk.
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .mean
            .0
            .iter()
            .chain(&self.eigenvalues)
            .chain(self.eigenvectors.iter().flatten())
            .chain(&self.explained)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("PCA result contains non-finite values".into()));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Data(
                "PCA eigenvalues are not in descending order".into(),
            ));
        }
        for i in 0..4 {
            for j in 0..4 {
                let d = dot4(&self.eigenvectors[i], &self.eigenvectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                if (d - want).abs() > 1e-6 {
                    return Err(Error::Data(format!(
                        "PCA eigenvectors {i} and {j} are not orthonormal (dot {d})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn spatial_mean(z: &LatentTensor) -> Result<LatentVec4> {
    let n = z.plane_len();
    if n == 0 {
        return Err(Error::invalid("cannot average an empty latent"));
    }
    Ok(LatentVec4(std::array::from_fn(|k| {
        z.channel(k).iter().sum::<f64>() / n as f64
    })))
}

/// Eigen-decomposition of a symmetric 4×4 matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `k` in row `k`,
/// unsorted.
pub fn symmetric_eigen(matrix: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    const N: usize = LATENT_CHANNELS;
    const MAX_SWEEPS: usize = 64;
    let mut a = matrix;
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|p| (p + 1..N).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                // Once converging, drop elements that no longer affect either diagonal.
                let negligible = 1e2 * apq.abs();
                if sweep > 3
                    && a[p][p].abs() + negligible == a[p][p].abs()
                    && a[q][q].abs() + negligible == a[q][q].abs()
                {
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                #[allow(clippy::needless_range_loop)]
                for k in 0..N {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = std::array::from_fn(|k| a[k][k]);
    let vectors = std::array::from_fn(|k| std::array::from_fn(|i| v[i][k]));
    (values, vectors)
}

/// Sample covariance (divisor `n − 1`) of the vectors about their mean.
pub fn covariance(vectors: &[LatentVec4]) -> Result<(LatentVec4, [[f64; 4]; 4])> {
    if vectors.len() < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    if vectors.iter().flat_map(|v| v.0).any(|x| !x.is_finite()) {
        return Err(Error::Data("PCA input contains non-finite values".into()));
    }
    let n = vectors.len() as f64;
    let origin = vectors[0].0;
    let shifted: Vec<[f64; 4]> = vectors
        .iter()
        .map(|v| std::array::from_fn(|k| v.0[k] - origin[k]))
        .collect();
    let offset: [f64; 4] = std::array::from_fn(|k| shifted.iter().map(|d| d[k]).sum::<f64>() / n);
    let mut cov = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let s: f64 = shifted
                .iter()
                .map(|d| (d[i] - offset[i]) * (d[j] - offset[j]))
                .sum();
            cov[i][j] = s / (n - 1.0);
            cov[j][i] = cov[i][j];
        }
    }
    let mean = std::array::from_fn(|k| origin[k] + offset[k]);
    Ok((LatentVec4(mean), cov))
}

/// PCA of 4-vectors. Eigenvalues are sorted descending and clamped at zero;
/// each eigenvector is signed so that its largest-magnitude entry is
/// positive. When all variance is zero, `explained` is all zeros.
pub fn fit_pca(vectors: &[LatentVec4]) -> Result<PcaResult> {
    let (mean, cov) = covariance(vectors)?;
    let (values, vectors4) = symmetric_eigen(cov);
    let mut order: [usize; 4] = [0, 1, 2, 3];
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues = order.map(|k| values[k].max(0.0));
    let eigenvectors = order.map(|k| {
        let mut e = vectors4[k];
        let lead = (0..4).fold(
            0,
            |best, i| if e[i].abs() > e[best].abs() { i } else { best },
        );
        if e[lead] < 0.0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
        e
    });
    let total: f64 = eigenvalues.iter().sum();
    let explained = if total > 0.0 {
        eigenvalues.map(|l| l / total)
    } else {
        [0.0; 4]
    };
    Ok(PcaResult {
        mean,
        eigenvalues,
        eigenvectors,
        explained,
    })
}

/// Scores `(v − mean)·e_k` for all four components.
pub fn project(p: &PcaResult, v: &LatentVec4) -> [f64; 4] {
    let centered: [f64; 4] = std::array::from_fn(|k| v.0[k] - p.mean.0[k]);
    p.eigenvectors.map(|e| dot4(&centered, &e))
}

/// Replaces every latent 4-vector `v` by `(v·e_k) e_k` (uncentered), for
/// `k` in `1..=4`.
pub fn pc_filter_latent(z: &LatentTensor, p: &PcaResult, k: usize) -> Result<LatentTensor> {
    if !(1..=4).contains(&k) {
        return Err(Error::invalid(format!(
            "principal component {k} outside 1..=4"
        )));
    }
    let e = p.eigenvectors[k - 1];
    let mut out = z.clone();
    for idx in 0..z.plane_len() {
        let s = dot4(&z.vector_at(idx), &e);
        out.set_vector_at(idx, e.map(|x| s * x));
    }
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn mean_of_constant_and_checkerboard() {
        let z = LatentTensor::constant(3, 5, [1.0, -2.0, 0.25, 7.0]);
        assert_eq!(spatial_mean(&z).unwrap().0, [1.0, -2.0, 0.25, 7.0]);
        let mut z = LatentTensor::zeros(4, 4);
        for (i, v) in z.channel_mut(0).iter_mut().enumerate() {
            *v = if (i / 4 + i % 4) % 2 == 0 { 1.0 } else { -1.0 };
        }
        assert_eq!(spatial_mean(&z).unwrap().0[0], 0.0);
    }

    #[test]
    fn mean_matches_double_loop() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let z = LatentTensor::new(4, 4, data.clone()).unwrap();
        let got = spatial_mean(&z).unwrap();
        for k in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += data[k * 16 + i * 4 + j];
                }
            }
            assert!((got.0[k] - s / 16.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_variance_gives_zero_eigenvalues() {
        let v = LatentVec4([0.3, -0.1, 2.0, 5.0]);
        let p = fit_pca(&[v, v, v]).unwrap();
        assert_eq!(p.eigenvalues, [0.0; 4]);
    }

    #[test]
    fn single_axis() {
        let p = fit_pca(&[
            LatentVec4([1.0, 0.0, 0.0, 0.0]),
            LatentVec4([-1.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(p.eigenvalues, [2.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.eigenvectors[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.explained[0], 1.0);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_pca(&[LatentVec4([0.0; 4])]),
            Err(Error::InvalidArgument(_))
        ));
        let bad = [LatentVec4([0.0; 4]), LatentVec4([f64::NAN, 0.0, 0.0, 0.0])];
        assert!(matches!(fit_pca(&bad), Err(Error::Data(_))));
    }

    #[test]
    fn projection_examples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let vs: Vec<LatentVec4> = (0..30)
            .map(|_| LatentVec4(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        let p = fit_pca(&vs).unwrap();
        let at_mean = project(&p, &p.mean);
        assert!(at_mean.iter().all(|s| s.abs() < 1e-15));
        let shifted = LatentVec4(std::array::from_fn(|k| p.mean.0[k] + p.eigenvectors[1][k]));
        let s = project(&p, &shifted);
        for (k, want) in [0.0, 1.0, 0.0, 0.0].iter().enumerate() {
            assert!((s[k] - want).abs() < 1e-12);
        }
        let v = vs[7];
        let s = project(&p, &v);
        for k in 0..4 {
            let mut want = 0.0;
            for i in 0..4 {
                want += (v.0[i] - p.mean.0[i]) * p.eigenvectors[k][i];
            }
            assert!((s[k] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pc_filter_examples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        let vs: Vec<LatentVec4> = (0..30)
            .map(|_| LatentVec4(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        let p = fit_pca(&vs).unwrap();
        let on_axis = LatentTensor::constant(2, 3, p.eigenvectors[1]);
        let kept = pc_filter_latent(&on_axis, &p, 2).unwrap();
        for (a, b) in kept.data().iter().zip(on_axis.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let off_axis = LatentTensor::constant(2, 3, p.eigenvectors[0]);
        let gone = pc_filter_latent(&off_axis, &p, 2).unwrap();
        assert!(gone.data().iter().all(|v| v.abs() < 1e-12));

        let data: Vec<f64> = (0..4 * 12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = LatentTensor::new(3, 4, data).unwrap();
        let f = pc_filter_latent(&z, &p, 1).unwrap();
        let e = p.eigenvectors[0];
        for idx in 0..12 {
            let v: Vec<f64> = (0..4).map(|k| z.data()[k * 12 + idx]).collect();
            let s: f64 = (0..4).map(|k| v[k] * e[k]).sum();
            for k in 0..4 {
                assert!((f.data()[k * 12 + idx] - s * e[k]).abs() < 1e-14);
            }
        }
        assert!(matches!(
            pc_filter_latent(&z, &p, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            pc_filter_latent(&z, &p, 5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn order_invariance_and_determinism() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(14);
        let mut vs: Vec<LatentVec4> = (0..40)
            .map(|_| LatentVec4(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        let a = fit_pca(&vs).unwrap();
        assert_eq!(a, fit_pca(&vs).unwrap());
        vs.reverse();
        vs.swap(3, 17);
        let b = fit_pca(&vs).unwrap();
        for k in 0..4 {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-12);
            for i in 0..4 {
                assert!((a.eigenvectors[k][i] - b.eigenvectors[k][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn validate_rejects_non_orthonormal() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(15);
        let vs: Vec<LatentVec4> = (0..10)
            .map(|_| LatentVec4(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        let mut p = fit_pca(&vs).unwrap();
        p.validate().unwrap();
        p.eigenvectors[0][0] += 0.1;
        assert!(matches!(p.validate(), Err(Error::Data(_))));
    }
}
