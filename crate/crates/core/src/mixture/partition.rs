use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};

/// Allocation vector z with labels in `0..g` (zero-based; CSV output is one-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllocationVector {
    labels: Vec<usize>,
    g: usize,
}

impl AllocationVector {
    pub fn new(labels: Vec<usize>, g: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(MixError::InvalidData("empty allocation".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= g) {
            return Err(MixError::InvalidData(format!("label {bad} outside 0..{g}")));
        }
        Ok(AllocationVector { labels, g })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Ambient number of components G.
    pub fn g(&self) -> usize {
        self.g
    }

    /// Occupancy counts n_g.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.g];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Number of non-empty clusters G₊.
    pub fn g_plus(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }

    /// Applies the relabeling `old label l → perm[l]`.
    pub fn relabeled(&self, perm: &[usize]) -> AllocationVector {
        AllocationVector {
            labels: self.labels.iter().map(|&l| perm[l]).collect(),
            g: self.g,
        }
    }

    /// Labels renumbered in order of first appearance, so equal partitions
    /// compare equal.
    pub fn canonical(&self) -> Vec<usize> {
        canonical_labels(&self.labels)
    }
}

pub(crate) fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        if l >= map.len() {
            map.resize(l + 1, usize::MAX);
        }
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
        out.push(map[l]);
    }
    out
}

/// Fuzzy classification matrix τ (n × G, row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMatrix {
    n: usize,
    g: usize,
    tau: Vec<f64>,
}

impl ClassificationMatrix {
    pub fn new(n: usize, g: usize, tau: Vec<f64>) -> Result<Self> {
        if n == 0 || g == 0 || tau.len() != n * g {
            return Err(MixError::Dimension(format!("τ needs {n}×{g} entries")));
        }
        for (i, row) in tau.chunks(g).enumerate() {
            if row.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                return Err(MixError::InvalidParams(format!("row {i} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(MixError::InvalidParams(format!("row {i} sums to {s}")));
            }
        }
        Ok(ClassificationMatrix { n, g, tau })
    }

    /// Hard 0/1 matrix of an allocation.
    pub fn from_allocation(z: &AllocationVector) -> Self {
        let g = z.g();
        let mut tau = vec![0.0; z.n() * g];
        for (i, &l) in z.labels().iter().enumerate() {
            tau[i * g + l] = 1.0;
        }
        ClassificationMatrix { n: z.n(), g, tau }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.tau[i * self.g..(i + 1) * self.g]
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.tau[i * self.g + g]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.tau
    }

    /// Column sums Σᵢ τ_ig.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.g];
        for row in self.tau.chunks(self.g) {
            for (a, t) in s.iter_mut().zip(row) {
                *a += t;
            }
        }
        s
    }
}
