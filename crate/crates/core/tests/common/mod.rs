//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use latent_probe::ImageTensor;
use rand::Rng;

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> ImageTensor {
    let data = (0..h * w * c).map(|_| rng.gen::<f64>()).collect();
    ImageTensor::new(h, w, c, data).unwrap()
}

/// A noisy, partly correlated copy of `a`, clamped to `[0, 1]`.
pub fn perturbed(rng: &mut impl Rng, a: &ImageTensor, amount: f64) -> ImageTensor {
    let data = a
        .data()
        .iter()
        .map(|v| (v + amount * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0))
        .collect();
    ImageTensor::new(a.height(), a.width(), a.channels(), data).unwrap()
}

/// Per-window SSIM with an explicit 2D Gaussian window and two-pass
/// weighted moments.
pub fn brute_ssim(a: &ImageTensor, b: &ImageTensor) -> f64 {
    const N: usize = 11;
    let sigma = 1.5f64;
    let mut window = [[0.0f64; N]; N];
    let mut total = 0.0;
    for (i, row) in window.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *w = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += *w;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (h, w, ch) = (a.height(), a.width(), a.channels());
    let mut sum = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - N {
        for q0 in 0..=w - N {
            let mut per_channel = 0.0;
            for k in 0..ch {
                let px = |img: &ImageTensor, i: usize, j: usize| img.get(r0 + i, q0 + j, k);
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..N {
                    for j in 0..N {
                        let wt = window[i][j] / total;
                        mx += wt * px(a, i, j);
                        my += wt * px(b, i, j);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..N {
                    for j in 0..N {
                        let wt = window[i][j] / total;
                        let (dx, dy) = (px(a, i, j) - mx, px(b, i, j) - my);
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cxy += wt * dx * dy;
                    }
                }
                per_channel += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
            sum += per_channel / ch as f64;
            count += 1;
        }
    }
    sum / count as f64
}

pub fn direct_mse(a: &ImageTensor, b: &ImageTensor) -> f64 {
    let n = a.data().len() as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n
}

pub fn direct_psnr(a: &ImageTensor, b: &ImageTensor) -> f64 {
    10.0 * (1.0 / direct_mse(a, b)).log10()
}

/// Two-pass sample covariance.
pub fn oracle_covariance(vs: &[[f64; 4]]) -> [[f64; 4]; 4] {
    let n = vs.len() as f64;
    let mut mean = [0.0; 4];
    for v in vs {
        for k in 0..4 {
            mean[k] += v[k] / n;
        }
    }
    let mut cov = [[0.0; 4]; 4];
    for v in vs {
        for i in 0..4 {
            for j in 0..4 {
                cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    cov
}

/// Classical Jacobi: rotate away the largest off-diagonal element until
/// the off-diagonal mass vanishes. Returns eigenvalues descending with
/// eigenvectors as rows.
pub fn jacobi_oracle(m: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut a = m;
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..1000 {
        let (mut p, mut q, mut big) = (0, 1, 0.0);
        for i in 0..4 {
            for j in i + 1..4 {
                if a[i][j].abs() > big {
                    (p, q, big) = (i, j, a[i][j].abs());
                }
            }
        }
        let scale: f64 = (0..4).map(|i| a[i][i].abs()).fold(0.0, f64::max);
        if big <= 1e-300 || big <= scale * 1e-18 {
            break;
        }
        let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
        let (s, c) = theta.sin_cos();
        // A ← Jᵀ A J with J the (p, q) plane rotation.
        for k in 0..4 {
            let (akp, akq) = (a[k][p], a[k][q]);
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
        }
        for k in 0..4 {
            let (apk, aqk) = (a[p][k], a[q][k]);
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
        }
        for row in v.iter_mut() {
            let (vp, vq) = (row[p], row[q]);
            row[p] = c * vp - s * vq;
            row[q] = s * vp + c * vq;
        }
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.map(|k| a[k][k]);
    let vectors = order.map(|k| [v[0][k], v[1][k], v[2][k], v[3][k]]);
    (values, vectors)
}

pub fn abs_cos(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Random datasets of 4-vectors with varied size, spread and anisotropy.
pub fn random_pca_dataset(rng: &mut impl Rng) -> Vec<[f64; 4]> {
    let n = rng.gen_range(5..60);
    let scales: [f64; 4] = std::array::from_fn(|_| 10f64.powf(rng.gen_range(-1.5..1.0)));
    let mix: [[f64; 4]; 4] =
        std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
    (0..n)
        .map(|_| {
            let raw: [f64; 4] = std::array::from_fn(|k| scales[k] * rng.gen_range(-1.0..1.0));
            std::array::from_fn(|i| (0..4).map(|j| mix[i][j] * raw[j]).sum::<f64>() + 0.3)
        })
        .collect()
}
