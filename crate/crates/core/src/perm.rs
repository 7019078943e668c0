//! Label permutations and log-permanents of small matrices.

use crate::numeric::{ln_gamma, log_sum_exp};

/// All permutations of `0..g` in lexicographic order, identity first.
pub fn permutations(g: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..g).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..g).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..g).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

pub fn ln_factorial(g: usize) -> f64 {
    ln_gamma(g as f64 + 1.0)
}

/// log Σ_ρ Π_g exp(a[g][ρ(g)]) over all permutations ρ, for a row-major
/// g × g matrix of logs. Subset dynamic programme, O(2^g g).
pub fn log_permanent(a: &[f64], g: usize) -> f64 {
    assert_eq!(a.len(), g * g);
    if g == 1 {
        return a[0];
    }
    let row_max: Vec<f64> = a.chunks(g).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    if row_max.iter().all(|m| m.is_finite()) {
        let shifted: Vec<f64> = a
            .chunks(g)
            .zip(&row_max)
            .flat_map(|(r, m)| r.iter().map(move |x| (x - m).exp()))
            .collect();
        let mut dp = vec![0.0f64; 1 << g];
        dp[0] = 1.0;
        for mask in 0..(1usize << g) {
            let d = dp[mask];
            if d == 0.0 {
                continue;
            }
            let row = mask.count_ones() as usize;
            if row == g {
                continue;
            }
            for col in 0..g {
                if mask & (1 << col) == 0 {
                    dp[mask | (1 << col)] += d * shifted[row * g + col];
                }
            }
        }
        let full = dp[(1 << g) - 1];
        if full > 0.0 && full.is_finite() {
            return full.ln() + row_max.iter().sum::<f64>();
        }
    }
    // log-domain fallback
    let mut dp = vec![f64::NEG_INFINITY; 1 << g];
    dp[0] = 0.0;
    for mask in 0..(1usize << g) {
        let d = dp[mask];
        if d == f64::NEG_INFINITY {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == g {
            continue;
        }
        for col in 0..g {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                dp[next] = log_sum_exp(&[dp[next], d + a[row * g + col]]);
            }
        }
    }
    dp[(1 << g) - 1]
}
