//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use patchmosaic::GrayImage;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise_image(side: u32, rng: &mut impl RngCore) -> GrayImage {
    let mut pixels = vec![0u8; (side * side) as usize];
    rng.fill_bytes(&mut pixels);
    GrayImage::new(side, side, pixels).unwrap()
}

/// Smooth gradients and stripes plus a little noise; gives k-means real structure.
pub fn structured_image(side: u32, rng: &mut impl Rng) -> GrayImage {
    let fx: f64 = rng.random_range(0.01..0.2);
    let fy: f64 = rng.random_range(0.01..0.2);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt: f64 = rng.random_range(-0.5..0.5);
    let mut noise = vec![0u8; (side * side) as usize];
    rng.fill_bytes(&mut noise);
    GrayImage::from_fn(side, side, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let wave = (fx * xf + tilt * fy * yf + phase).sin() * 70.0 + (fy * yf).cos() * 40.0;
        let n = (noise[(y * side + x) as usize] % 16) as f64;
        (128.0 + wave + n - 8.0).clamp(0.0, 255.0) as u8
    })
}

pub fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

/// Centering computed independently of the library's implementation.
pub fn centered(values: &[u8]) -> Vec<f64> {
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
    values.iter().map(|&v| v as f64 - mean).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Exhaustive lowest-index nearest centroid.
pub fn brute_nearest(query: &[f64], centroids: &[Vec<f64>]) -> usize {
    let d: Vec<f64> = centroids.iter().map(|c| dist2(query, c)).collect();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    d.iter().position(|&x| x == min).unwrap()
}

/// Histogram matching by ranks: a pixel whose value has cumulative count r in
/// the source takes the r-th smallest reference value.
pub fn rank_map(source: &[u8], reference: &[u8]) -> Vec<u8> {
    let mut sorted = reference.to_vec();
    sorted.sort_unstable();
    source
        .iter()
        .map(|&v| {
            let rank = source.iter().filter(|&&s| s <= v).count();
            sorted[rank - 1]
        })
        .collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major).
/// Returns eigenvalues and eigenvectors (as rows) sorted by descending eigenvalue.
pub fn jacobi_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * d + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| m[b * d + b].total_cmp(&m[a * d + a]));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..d).map(|k| v[k * d + i]).collect())
        .collect();
    (values, vectors)
}

/// Population covariance of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let m = rows.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m)
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= m);
    cov
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
