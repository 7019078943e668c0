//! Sparse finite mixtures and random-partition quantities.
//!
//! An overfitted mixture with a shrinking Dirichlet prior D_G(e₀) leaves
//! superfluous components empty, so the number of non-empty components
//! G₊ is read off the allocations of each draw.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::gibbs::{run_chain, ChainOptions, E0Hyper, GibbsOutput, RGPrior};
use crate::mixture::{AllocationVector, Dataset};
use crate::numeric::{ln_gamma, sample_beta};
use crate::perm::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum E0Mode {
    Fixed { value: f64 },
    /// e₀ ~ Gamma(shape, rate).
    Gamma { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePriorConfig {
    #[serde(rename = "G")]
    pub g: usize,
    pub e0: E0Mode,
    pub base: RGPrior,
}

impl SparsePriorConfig {
    /// G = 10 with e₀ ~ Gamma(1, 200) on top of the Richardson–Green prior.
    pub fn default_for(data: &Dataset) -> Result<Self> {
        Ok(SparsePriorConfig {
            g: 10,
            e0: E0Mode::Gamma { shape: 1.0, rate: 200.0 },
            base: RGPrior::richardson_green(data)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0 {
            return Err(MixError::InvalidParams("G must be positive".into()));
        }
        match self.e0 {
            E0Mode::Fixed { value } if !(value > 0.0) => {
                Err(MixError::InvalidParams(format!("e0 = {value} must be positive")))
            }
            E0Mode::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => Err(MixError::InvalidParams(
                format!("e0 hyperprior Gamma({shape}, {rate}) needs positive parameters"),
            )),
            _ => self.base.validate(),
        }
    }
}

/// Gibbs chain for the overfitted mixture; under the Gamma hyperprior e₀ is
/// updated by random-walk Metropolis–Hastings on log e₀ each sweep.
pub fn run_sparse_chain(
    data: &Dataset,
    config: &SparsePriorConfig,
    draws: usize,
    burn_in: usize,
    seed: u64,
) -> Result<GibbsOutput> {
    config.validate()?;
    let mut opts = ChainOptions::new(draws, burn_in, seed);
    let prior = match config.e0 {
        E0Mode::Fixed { value } => config.base.clone().with_e0(value),
        E0Mode::Gamma { shape, rate } => {
            opts.e0_hyper = Some(E0Hyper { shape, rate });
            config.base.clone().with_e0(shape / rate)
        }
    };
    run_chain(data, config.g, &prior, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPlusPosterior {
    pub counts: BTreeMap<usize, usize>,
    pub mode: usize,
    pub probabilities: BTreeMap<usize, f64>,
}

impl GPlusPosterior {
    pub fn prob(&self, g: usize) -> f64 {
        self.probabilities.get(&g).copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["G_plus", "count", "probability"])?;
        for (g, c) in &self.counts {
            wtr.write_record([g.to_string(), c.to_string(), self.probabilities[g].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Tabulates G₊ over the stored draws; the mode is the smallest most frequent value.
pub fn gplus_posterior(output: &GibbsOutput) -> Result<GPlusPosterior> {
    if output.draws == 0 {
        return Err(MixError::InvalidParams("no draws".into()));
    }
    let mut counts = BTreeMap::new();
    for gp in output.g_plus() {
        *counts.entry(gp).or_insert(0usize) += 1;
    }
    let mut mode = 0;
    let mut best = 0;
    for (&g, &c) in &counts {
        if c > best {
            best = c;
            mode = g;
        }
    }
    let total = output.draws as f64;
    let probabilities = counts.iter().map(|(&g, &c)| (g, c as f64 / total)).collect();
    Ok(GPlusPosterior {
        counts,
        mode,
        probabilities,
    })
}

/// Per draw, the total weight of the components outside the `keep` largest;
/// with `keep` the G₊ mode this should concentrate at zero.
pub fn superfluous_weight(output: &GibbsOutput, keep: usize) -> Vec<f64> {
    (0..output.draws)
        .map(|m| {
            let mut w = output.weights_at(m).to_vec();
            w.sort_by(|a, b| b.total_cmp(a));
            w.iter().skip(keep).sum()
        })
        .collect()
}

/// log p(z | G, e₀) for a labelled allocation under η ~ D_G(e₀).
pub fn partition_prior_finite(z: &AllocationVector, e0: f64) -> f64 {
    let g = z.g() as f64;
    let n = z.n() as f64;
    let mut out = ln_gamma(g * e0) - ln_gamma(n + g * e0);
    for c in z.counts() {
        if c > 0 {
            out += ln_gamma(c as f64 + e0) - ln_gamma(e0);
        }
    }
    out
}

/// log probability of the unlabelled set partition induced by z: the
/// labelled prior times the G!/(G − G₊)! labellings of its clusters.
pub fn partition_prior_finite_unlabelled(z: &AllocationVector, e0: f64) -> f64 {
    let k = z.g_plus();
    partition_prior_finite(z, e0) + ln_factorial(z.g()) - ln_factorial(z.g() - k)
}

fn cluster_sizes(labels: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *map.entry(l).or_insert(0) += 1;
    }
    let mut v: Vec<usize> = map.into_values().collect();
    v.sort_unstable();
    v
}

fn check_pyp(alpha: f64, beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) || !(alpha > -beta) {
        return Err(MixError::InvalidParams(format!(
            "Pitman–Yor parameters need 0 ≤ β < 1 and α > −β (got α = {alpha}, β = {beta})"
        )));
    }
    Ok(())
}

/// log p(partition) under a Dirichlet process with concentration α;
/// `labels` are arbitrary cluster names.
pub fn dp_partition_prior(labels: &[usize], alpha: f64) -> Result<f64> {
    pyp_partition_prior(labels, alpha, 0.0)
}

/// Exchangeable partition probability of the Pitman–Yor process,
/// Π_{j<K}(α + jβ) Π_c (1 − β)_{n_c−1} / (α + 1)_{n−1}.
pub fn pyp_partition_prior(labels: &[usize], alpha: f64, beta: f64) -> Result<f64> {
    check_pyp(alpha, beta)?;
    let sizes = cluster_sizes(labels);
    let k = sizes.len();
    let mut out = -ln_rising(alpha + 1.0, labels.len().saturating_sub(1));
    for j in 1..k {
        out += (alpha + j as f64 * beta).ln();
    }
    for &s in &sizes {
        out += ln_rising(1.0 - beta, s - 1);
    }
    Ok(out)
}

/// log of the rising factorial x(x+1)…(x+m−1).
fn ln_rising(x: f64, m: usize) -> f64 {
    (0..m).map(|j| (x + j as f64).ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictive {
    /// Probability of joining each non-empty cluster, keyed by label.
    pub existing: BTreeMap<usize, f64>,
    /// Probability of opening a new cluster (over all empty components).
    pub new: f64,
}

impl Predictive {
    pub fn total(&self) -> f64 {
        self.existing.values().sum::<f64>() + self.new
    }
}

/// Allocation probabilities of observation i given the other n − 1 under
/// the finite mixture with η ~ D_G(e₀) integrated out.
pub fn pred_prob_finite(z_minus_i: &AllocationVector, e0: f64) -> Result<Predictive> {
    if !(e0 > 0.0) {
        return Err(MixError::InvalidParams(format!("e0 = {e0}")));
    }
    let g = z_minus_i.g() as f64;
    let denom = z_minus_i.n() as f64 + e0 * g;
    let counts = z_minus_i.counts();
    let existing = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, (c as f64 + e0) / denom))
        .collect();
    let k = z_minus_i.g_plus() as f64;
    Ok(Predictive {
        existing,
        new: e0 * (g - k) / denom,
    })
}

pub fn pred_prob_dp(labels_minus_i: &[usize], alpha: f64) -> Result<Predictive> {
    pred_prob_pyp(labels_minus_i, alpha, 0.0)
}

/// Pitman–Yor predictive: (N_g − β)/(n−1+α) for an existing cluster and
/// (α + Kβ)/(n−1+α) for a new one.
pub fn pred_prob_pyp(labels_minus_i: &[usize], alpha: f64, beta: f64) -> Result<Predictive> {
    check_pyp(alpha, beta)?;
    let denom = labels_minus_i.len() as f64 + alpha;
    if !(denom > 0.0) {
        return Err(MixError::InvalidParams("empty conditioning set with α ≤ 0".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels_minus_i {
        *counts.entry(l).or_insert(0) += 1;
    }
    let k = counts.len() as f64;
    Ok(Predictive {
        existing: counts.into_iter().map(|(l, c)| (l, (c as f64 - beta) / denom)).collect(),
        new: (alpha + k * beta) / denom,
    })
}

/// Weights from ν_g ~ Be(e₀, (G − g)e₀), ν_G = 1; distributed as D_G(e₀).
pub fn finite_stick_weights(e0: f64, g: usize, seed: u64) -> Result<Vec<f64>> {
    if !(e0 > 0.0) || g == 0 {
        return Err(MixError::InvalidParams(format!("e0 = {e0}, G = {g}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest = 1.0;
    let mut w = Vec::with_capacity(g);
    for k in 1..g {
        let nu = sample_beta(&mut rng, e0, (g - k) as f64 * e0);
        w.push(rest * nu);
        rest *= 1.0 - nu;
    }
    w.push(rest);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickWeights {
    pub weights: Vec<f64>,
    /// Stick length left after truncation, 1 − Σ weights.
    pub remainder: f64,
}

/// First `g_trunc` Pitman–Yor weights from ν_g ~ Be(1 − β, α + gβ).
pub fn pyp_stick_weights(beta: f64, alpha: f64, g_trunc: usize, seed: u64) -> Result<StickWeights> {
    check_pyp(alpha, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest = 1.0;
    let mut weights = Vec::with_capacity(g_trunc);
    for k in 1..=g_trunc {
        let nu = sample_beta(&mut rng, 1.0 - beta, alpha + k as f64 * beta);
        weights.push(rest * nu);
        rest *= 1.0 - nu;
    }
    Ok(StickWeights {
        weights,
        remainder: rest,
    })
}

fn check_labels(labels: &[u32], n: usize) -> Result<usize> {
    if n == 0 || labels.is_empty() || labels.len() % n != 0 {
        return Err(MixError::Dimension(format!("{} labels are not a multiple of n = {n}", labels.len())));
    }
    Ok(labels.len() / n)
}

/// Posterior similarity matrix π̂_ij = frequency of z_i = z_j (n × n, row-major).
pub fn association_matrix(labels: &[u32], n: usize) -> Result<Vec<f64>> {
    let m = check_labels(labels, n)?;
    let mut same = vec![0u32; n * n];
    for z in labels.chunks(n) {
        for i in 0..n {
            let zi = z[i];
            let row = &mut same[i * n..(i + 1) * n];
            for j in i + 1..n {
                row[j] += (z[j] == zi) as u32;
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
        for j in i + 1..n {
            let p = same[i * n + j] as f64 / m as f64;
            out[i * n + j] = p;
            out[j * n + i] = p;
        }
    }
    Ok(out)
}

/// Binder loss Σ_{i<j} [1{zᵢ=zⱼ}(1 − π̂ᵢⱼ) + 1{zᵢ≠zⱼ}π̂ᵢⱼ].
pub fn binder_loss<T: PartialEq>(z: &[T], assoc: &[f64]) -> f64 {
    let n = z.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p = assoc[i * n + j];
            loss += if z[i] == z[j] { 1.0 - p } else { p };
        }
    }
    loss
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderResult {
    /// Canonical labels (first appearance order), zero-based.
    pub labels: Vec<usize>,
    /// Index of the first draw carrying this partition.
    pub draw: usize,
    pub loss: f64,
    pub clusters: usize,
}

impl BinderResult {
    /// One-based labels, one per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for l in &self.labels {
            writeln!(w, "{}", l + 1)?;
        }
        Ok(())
    }
}

fn canonical(z: &[u32]) -> Vec<usize> {
    let mut map: HashMap<u32, usize> = HashMap::new();
    z.iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Sampled partition minimizing the Binder loss; ties go to the earliest draw.
pub fn binder_partition(labels: &[u32], n: usize) -> Result<BinderResult> {
    let assoc = association_matrix(labels, n)?;
    binder_partition_with(labels, n, &assoc)
}

pub fn binder_partition_with(labels: &[u32], n: usize, assoc: &[f64]) -> Result<BinderResult> {
    check_labels(labels, n)?;
    let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
    let mut best: Option<BinderResult> = None;
    for (m, z) in labels.chunks(n).enumerate() {
        let c = canonical(z);
        if seen.insert(c.clone(), ()).is_some() {
            continue;
        }
        let loss = binder_loss(&c, assoc);
        if best.as_ref().map_or(true, |b| loss < b.loss) {
            let clusters = c.iter().max().map_or(0, |x| x + 1);
            best = Some(BinderResult {
                labels: c,
                draw: m,
                loss,
                clusters,
            });
        }
    }
    Ok(best.expect("at least one draw"))
}

/// Writes an n × n matrix as headerless CSV.
pub fn write_matrix_csv<W: Write>(mat: &[f64], n: usize, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in mat.chunks(n) {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_labelled(n: usize, g: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|z: Vec<usize>| {
                    (0..g).map(move |l| {
                        let mut z = z.clone();
                        z.push(l);
                        z
                    })
                })
                .collect();
        }
        out
    }

    /// Restricted growth strings enumerate set partitions once each.
    fn set_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![0]];
        for _ in 1..n {
            out = out
                .into_iter()
                .flat_map(|z: Vec<usize>| {
                    let k = z.iter().max().unwrap() + 1;
                    (0..=k).map(move |l| {
                        let mut z = z.clone();
                        z.push(l);
                        z
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn finite_prior_normalizes_over_labelled_allocations() {
        for &(n, g, e0) in &[(8, 2, 0.7), (5, 3, 0.01), (6, 4, 4.0)] {
            let total: f64 = all_labelled(n, g)
                .into_iter()
                .map(|z| partition_prior_finite(&AllocationVector::new(z, g).unwrap(), e0).exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "n={n} G={g}: {total}");
        }
    }

    #[test]
    fn unlabelled_finite_prior_normalizes_over_set_partitions() {
        let (n, g, e0) = (7, 4, 0.3);
        let total: f64 = set_partitions(n)
            .into_iter()
            .filter(|z| z.iter().max().unwrap() < &g)
            .map(|z| partition_prior_finite_unlabelled(&AllocationVector::new(z, g).unwrap(), e0).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn single_observation_is_uniform() {
        let z = AllocationVector::new(vec![2], 5).unwrap();
        assert!((partition_prior_finite(&z, 0.37) + 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dp_and_pyp_priors_normalize_over_bell_partitions() {
        let parts = set_partitions(6);
        assert_eq!(parts.len(), 203);
        for &(a, b) in &[(1.3, 0.0), (0.5, 0.25), (-0.2, 0.4)] {
            let total: f64 = parts.iter().map(|z| pyp_partition_prior(z, a, b).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-10, "α={a} β={b}: {total}");
        }
        // DP closed form α^K Γ(α)/Γ(n+α) Π Γ(n_c)
        let z = [0, 0, 1, 2, 1, 0];
        let a: f64 = 0.8;
        let want = 3.0 * a.ln() + ln_gamma(a) - ln_gamma(6.0 + a) + ln_gamma(3.0) + ln_gamma(2.0);
        assert!((dp_partition_prior(&z, a).unwrap() - want).abs() < 1e-12);
        assert!(pyp_partition_prior(&z, -0.5, 0.2).is_err());
    }

    #[test]
    fn predictive_probabilities_sum_to_one() {
        let z = AllocationVector::new(vec![0, 0, 3, 1, 3, 3, 0], 6).unwrap();
        let f = pred_prob_finite(&z, 0.2).unwrap();
        assert!((f.total() - 1.0).abs() < 1e-15);
        let full = AllocationVector::new(vec![0, 1, 1, 2], 3).unwrap();
        assert_eq!(pred_prob_finite(&full, 1.0).unwrap().new, 0.0);
        let d = pred_prob_dp(z.labels(), 1.5).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-15);
        let p = pred_prob_pyp(z.labels(), 1.5, 0.3).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-15);
        assert!((p.existing[&3] - 2.7 / 8.5).abs() < 1e-15);
    }

    #[test]
    fn finite_predictive_tends_to_dp() {
        let alpha = 2.0;
        let g = 10_000;
        let z = AllocationVector::new(vec![0, 0, 1, 4, 4, 4], g).unwrap();
        let f = pred_prob_finite(&z, alpha / g as f64).unwrap();
        let d = pred_prob_dp(z.labels(), alpha).unwrap();
        assert!((f.new - d.new).abs() < 1e-3);
        for (k, v) in &d.existing {
            assert!((f.existing[k] - v).abs() < 1e-3);
        }
    }

    #[test]
    fn finite_sticks_match_dirichlet_moments() {
        assert_eq!(finite_stick_weights(0.5, 1, 1).unwrap(), vec![1.0]);
        let reps = 100_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for s in 0..reps {
            let w = finite_stick_weights(1.0, 3, s + 1_000_000).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..3 {
                sum[k] += w[k];
                sq[k] += w[k] * w[k];
            }
        }
        // D_3(1): mean 1/3, variance (1/3)(2/3)/4 = 1/18
        let sd_mean = (1.0f64 / 18.0 / reps as f64).sqrt();
        for k in 0..3 {
            let m = sum[k] / reps as f64;
            assert!((m - 1.0 / 3.0).abs() < 3.0 * sd_mean, "weight {k}: {m}");
            let v = sq[k] / reps as f64 - m * m;
            assert!((v - 1.0 / 18.0).abs() < 0.002);
        }
    }

    #[test]
    fn dp_sticks_have_beta_mean() {
        let alpha = 1.5;
        let reps = 100_000;
        let m: f64 = (0..reps).map(|s| pyp_stick_weights(0.0, alpha, 1, s).unwrap().weights[0]).sum::<f64>() / reps as f64;
        let sd = (alpha / ((1.0 + alpha).powi(2) * (2.0 + alpha)) / reps as f64).sqrt();
        assert!((m - 1.0 / (1.0 + alpha)).abs() < 3.0 * sd);
        let st = pyp_stick_weights(0.3, 1.0, 20, 4).unwrap();
        assert!((st.weights.iter().sum::<f64>() + st.remainder - 1.0).abs() < 1e-12);
        assert!(st.remainder > 0.0);
    }

    #[test]
    fn binder_on_identical_draws() {
        let z = [2u32, 2, 0, 0, 1];
        let labels: Vec<u32> = z.iter().copied().cycle().take(5 * 120).collect();
        let a = association_matrix(&labels, 5).unwrap();
        for i in 0..5 {
            assert_eq!(a[i * 5 + i], 1.0);
            for j in 0..5 {
                assert_eq!(a[i * 5 + j], a[j * 5 + i]);
            }
        }
        let b = binder_partition(&labels, 5).unwrap();
        assert_eq!(b.loss, 0.0);
        assert_eq!(b.labels, vec![0, 0, 1, 1, 2]);
        assert_eq!(b.clusters, 3);
        assert_eq!(b.draw, 0);
    }

    #[test]
    fn binder_minimizes_over_sampled_partitions() {
        let draws: Vec<Vec<u32>> = vec![
            vec![0, 0, 1, 1],
            vec![1, 1, 0, 0],
            vec![0, 0, 0, 1],
            vec![0, 1, 1, 1],
            vec![0, 0, 1, 1],
        ];
        let flat: Vec<u32> = draws.concat();
        let a = association_matrix(&flat, 4).unwrap();
        let b = binder_partition_with(&flat, 4, &a).unwrap();
        for d in &draws {
            assert!(b.loss <= binder_loss(d, &a) + 1e-12);
        }
        assert_eq!(b.draw, 0);
    }
}
