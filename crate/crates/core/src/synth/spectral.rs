//! Spectral clustering: Gaussian-kernel similarity, normalized
//! Laplacian, k smallest eigenvectors, then seeded k-means on the
//! (row-normalized) spectral embedding.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of the positive pairwise distances; `None` when all rows
/// coincide.
fn median_positive_distance(rows: &[&[f64]]) -> Option<f64> {
    let mut dists = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let d = sq_dist(a, b).sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(dists[dists.len() / 2])
}

/// Seeded k-means (k-means++ initialization, Lloyd iterations). Empty
/// clusters are reseeded from the point farthest from its centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<Vec<u32>> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::Config(format!("kmeans needs 1 <= k <= {n}, got {k}")));
    }
    let dim = points[0].len();

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut assign = vec![0u32; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best as u32 {
                assign[i] = best as u32;
                changed = true;
            }
        }
        // recompute centers
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let c = assign[i] as usize;
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its current center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centers[assign[a] as usize]);
                        let db = sq_dist(&points[b], &centers[assign[b] as usize]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = points[far].clone();
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centers[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assign)
}

/// Cluster the rows of `vectors` into `k` groups.
pub fn spectral_cluster(
    vectors: &crate::autodiff::Tensor,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    let n = vectors.rows();
    if k == 0 {
        return Err(Error::Config("cluster count must be >= 1".into()));
    }
    if n < k {
        return Err(Error::Config(format!("{n} rows cannot form {k} clusters")));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let rows: Vec<&[f64]> = (0..n).map(|r| vectors.row(r)).collect();
    let sigma = median_positive_distance(&rows).ok_or(Error::DegenerateClustering)?;

    // Gaussian-kernel similarity
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = 1.0;
        for j in i + 1..n {
            let w = (-sq_dist(rows[i], rows[j]) / (2.0 * sigma * sigma)).exp();
            s[(i, j)] = w;
            s[(j, i)] = w;
        }
    }
    // symmetric normalized Laplacian: I - D^{-1/2} S D^{-1/2}
    let deg: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let norm = (deg[i] * deg[j]).sqrt();
            let v = if norm > 0.0 { s[(i, j)] / norm } else { 0.0 };
            l[(i, j)] = if i == j { 1.0 - v } else { -v };
        }
    }
    let eig = l.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    // spectral embedding: k smallest eigenvectors as columns, rows
    // normalized to unit length
    let mut points = vec![vec![0.0; k]; n];
    for (c, &col) in order.iter().take(k).enumerate() {
        for i in 0..n {
            points[i][c] = eig.eigenvectors[(i, col)];
        }
    }
    for p in &mut points {
        let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in p.iter_mut() {
                *v /= norm;
            }
        }
    }
    kmeans(&points, k, rng)
}
