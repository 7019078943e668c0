//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;

use crate::error::{MixError, Result};

pub struct KMeans {
    /// Row-major k × dim centers.
    pub centers: Vec<f64>,
    pub labels: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `points` (row-major, `dim` columns) into `k` groups.
///
/// Fails with [`MixError::Degenerate`] when a cluster empties.
pub fn kmeans<R: Rng + ?Sized>(
    points: &[f64],
    dim: usize,
    k: usize,
    rng: &mut R,
    max_iter: usize,
) -> Result<KMeans> {
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(MixError::InvalidParams(format!("cannot form {k} clusters from {n} points")));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut cum = 0.0;
            d2.iter()
                .position(|&d| {
                    cum += d;
                    u < cum
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &c));
        }
        centers.extend_from_slice(&c);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, l) in labels.iter_mut().enumerate() {
            let best = (0..k)
                .map(|c| (c, sq_dist(row(i), &centers[c * dim..(c + 1) * dim])))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
                .0;
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        centers.iter_mut().for_each(|c| *c = 0.0);
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (c, v) in centers[l * dim..(l + 1) * dim].iter_mut().zip(row(i)) {
                *c += v;
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(MixError::Degenerate(format!("k-means cluster {empty} is empty")));
        }
        for (c, &cnt) in counts.iter().enumerate() {
            for v in &mut centers[c * dim..(c + 1) * dim] {
                *v /= cnt as f64;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(KMeans { centers, labels })
}
