//! Gibbs sampling for univariate Gaussian mixtures under the
//! Richardson–Green prior.
//!
//! A sweep samples, in order, σ²_g | μ_g, C₀, z; μ_g | σ²_g, z; C₀ | σ²;
//! e₀ | z (sparse chains only); η | z; z | θ; and finally applies a random
//! label permutation when requested. Components left empty by z are drawn
//! from their prior, which is what the conditionals reduce to at n_g = 0.
//!
//! Every stored sweep also records the moments of p(μ_g | σ²_g, z, y),
//! p(σ²_g | μ_g, C₀, z, y) and p(η | z) evaluated at that sweep's final
//! state; the marginal-likelihood estimators build their importance
//! densities from them.

mod io;
mod prior;
mod resolve;

pub use prior::{C0Prior, ComponentPrior, Concentration, Moments, RGPrior};
pub use resolve::{point_estimates, posterior_mode, resolve_labels};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MixError, Result};
use crate::mixture::{AllocationVector, Dataset, MixtureParams};
use crate::numeric::{
    derive_seed, ln_gamma, log_sum_exp, sample_dirichlet, sample_gamma, sample_inv_gamma,
    sample_normal, LN_2PI,
};

const TAG_SWEEP: u64 = 0x6962_6273;

/// Gamma hyperprior e₀ ~ Gamma(shape, rate) updated by random-walk
/// Metropolis–Hastings on log e₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E0Hyper {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    /// Stored draws M.
    pub draws: usize,
    pub burn_in: usize,
    pub permute: bool,
    pub seed: u64,
    /// When false, z is drawn from η alone and the chain targets the prior.
    pub use_likelihood: bool,
    pub e0_hyper: Option<E0Hyper>,
    /// Initial allocation; by default observations are split into G
    /// contiguous groups by rank.
    pub init: Option<AllocationVector>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            draws: 12_000,
            burn_in: 2_000,
            permute: true,
            seed: 0,
            use_likelihood: true,
            e0_hyper: None,
            init: None,
        }
    }
}

impl ChainOptions {
    pub fn new(draws: usize, burn_in: usize, seed: u64) -> Self {
        ChainOptions {
            draws,
            burn_in,
            seed,
            ..ChainOptions::default()
        }
    }

    pub fn permute(mut self, on: bool) -> Self {
        self.permute = on;
        self
    }
}

/// Stored draws of a chain. Per-draw arrays are row-major with G (or n)
/// entries per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsOutput {
    pub g: usize,
    pub n: usize,
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub permute: bool,
    /// True after [`resolve_labels`].
    pub resolved: bool,
    pub prior: RGPrior,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
    pub c0: Vec<f64>,
    pub e0: Option<Vec<f64>>,
    /// Zero-based labels, n per draw.
    pub labels: Vec<u32>,
    pub counts: Vec<u32>,
    pub sum_y: Vec<f64>,
    pub sum_y2: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub mu_bb: Vec<f64>,
    pub var_c: Vec<f64>,
    pub var_cc: Vec<f64>,
    /// Dirichlet parameters of p(η | z).
    pub alpha: Vec<f64>,
    /// ℓ_O(θ^(m)).
    pub log_lik: Vec<f64>,
    /// log p(θ^(m)), with C₀ integrated out under the Gamma hyperprior.
    pub log_prior: Vec<f64>,
}

impl GibbsOutput {
    fn span(&self, m: usize) -> std::ops::Range<usize> {
        m * self.g..(m + 1) * self.g
    }

    pub fn weights_at(&self, m: usize) -> &[f64] {
        &self.weights[self.span(m)]
    }

    pub fn means_at(&self, m: usize) -> &[f64] {
        &self.means[self.span(m)]
    }

    pub fn vars_at(&self, m: usize) -> &[f64] {
        &self.vars[self.span(m)]
    }

    pub fn counts_at(&self, m: usize) -> &[u32] {
        &self.counts[self.span(m)]
    }

    pub fn labels_at(&self, m: usize) -> &[u32] {
        &self.labels[m * self.n..(m + 1) * self.n]
    }

    pub fn alpha_at(&self, m: usize) -> &[f64] {
        &self.alpha[self.span(m)]
    }

    pub fn moments_at(&self, m: usize, g: usize) -> Moments {
        let k = m * self.g + g;
        Moments {
            b: self.mu_b[k],
            bb: self.mu_bb[k],
            c: self.var_c[k],
            cc: self.var_cc[k],
        }
    }

    pub fn params(&self, m: usize) -> Result<MixtureParams> {
        MixtureParams::univariate(self.weights_at(m), self.means_at(m), self.vars_at(m))
    }

    pub fn allocation(&self, m: usize) -> AllocationVector {
        let labels = self.labels_at(m).iter().map(|&l| l as usize).collect();
        AllocationVector::new(labels, self.g).expect("stored labels are in range")
    }

    /// Number of non-empty components per draw.
    pub fn g_plus(&self) -> Vec<usize> {
        (0..self.draws)
            .map(|m| self.counts_at(m).iter().filter(|&&c| c > 0).count())
            .collect()
    }

    /// log p(y | θ^(m)) + log p(θ^(m)).
    pub fn log_posterior(&self, m: usize) -> f64 {
        self.log_lik[m] + self.log_prior[m]
    }

    /// Relabels draw m so that new component h is old component `perm[h]`.
    pub(crate) fn permute_draw(&mut self, m: usize, perm: &[usize]) {
        let g = self.g;
        let base = m * g;
        macro_rules! apply {
            ($($v:expr),*) => {$(
                let old: Vec<_> = $v[base..base + g].to_vec();
                for (h, &p) in perm.iter().enumerate() {
                    $v[base + h] = old[p];
                }
            )*};
        }
        apply!(
            self.weights, self.means, self.vars, self.counts, self.sum_y, self.sum_y2, self.mu_b,
            self.mu_bb, self.var_c, self.var_cc, self.alpha
        );
        let mut inv = vec![0u32; g];
        for (h, &p) in perm.iter().enumerate() {
            inv[p] = h as u32;
        }
        for l in &mut self.labels[m * self.n..(m + 1) * self.n] {
            *l = inv[*l as usize];
        }
    }
}

struct State {
    eta: Vec<f64>,
    mu: Vec<f64>,
    var: Vec<f64>,
    c0: f64,
    e0: Option<f64>,
    z: Vec<u32>,
    counts: Vec<u32>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl State {
    fn tally(&mut self, y: &[f64]) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.s1.iter_mut().for_each(|c| *c = 0.0);
        self.s2.iter_mut().for_each(|c| *c = 0.0);
        for (&l, &v) in self.z.iter().zip(y) {
            let l = l as usize;
            self.counts[l] += 1;
            self.s1[l] += v;
            self.s2[l] += v * v;
        }
    }
}

/// log p(z | e₀) for a symmetric Dirichlet with η integrated out.
pub(crate) fn log_allocation_prior(counts: &[u32], e0: f64) -> f64 {
    let g = counts.len() as f64;
    let n: u32 = counts.iter().sum();
    let mut out = ln_gamma(g * e0) - ln_gamma(n as f64 + g * e0);
    for &c in counts {
        if c > 0 {
            out += ln_gamma(c as f64 + e0) - ln_gamma(e0);
        }
    }
    out
}

/// ℓ_O for univariate parameters.
pub(crate) fn univariate_log_lik(y: &[f64], eta: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    let g = eta.len();
    let consts: Vec<f64> = (0..g)
        .map(|k| {
            if eta[k] > 0.0 {
                eta[k].ln() - 0.5 * (LN_2PI + var[k].ln())
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut buf = vec![0.0; g];
    y.iter()
        .map(|&v| {
            for k in 0..g {
                let d = v - mu[k];
                buf[k] = consts[k] - 0.5 * d * d / var[k];
            }
            log_sum_exp(&buf)
        })
        .sum()
}

fn rank_split(y: &[f64], g: usize) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut z = vec![0u32; y.len()];
    for (rank, &i) in idx.iter().enumerate() {
        z[i] = (rank * g / y.len()) as u32;
    }
    z
}

/// Runs a Gibbs chain and stores `opts.draws` sweeps after `opts.burn_in`.
pub fn run_chain(data: &Dataset, g: usize, prior: &RGPrior, opts: &ChainOptions) -> Result<GibbsOutput> {
    if data.dim() != 1 {
        return Err(MixError::Unsupported("the Gibbs sampler is univariate".into()));
    }
    if g == 0 {
        return Err(MixError::InvalidParams("G must be positive".into()));
    }
    if opts.draws == 0 {
        return Err(MixError::InvalidParams("need at least one stored draw".into()));
    }
    prior.validate()?;
    let base_alpha = prior.alpha(g)?;
    if opts.e0_hyper.is_some() && !matches!(prior.e0, Concentration::Symmetric(_)) {
        return Err(MixError::InvalidParams("a hyperprior on e₀ needs a symmetric Dirichlet".into()));
    }
    let y = data.values();
    let n = y.len();

    let z = match &opts.init {
        Some(z0) => {
            if z0.n() != n || z0.g() != g {
                return Err(MixError::Dimension("initial allocation does not match the data".into()));
            }
            z0.labels().iter().map(|&l| l as u32).collect()
        }
        None => rank_split(y, g),
    };
    let mut st = State {
        eta: vec![1.0 / g as f64; g],
        mu: vec![prior.m; g],
        var: vec![0.0; g],
        c0: prior.c0_start(),
        e0: opts.e0_hyper.map(|_| base_alpha[0]),
        z,
        counts: vec![0; g],
        s1: vec![0.0; g],
        s2: vec![0.0; g],
    };
    if opts.use_likelihood {
        st.tally(y);
    }
    let (_, data_var) = data.moments();
    for k in 0..g {
        if st.counts[k] > 0 {
            let nk = st.counts[k] as f64;
            st.mu[k] = st.s1[k] / nk;
        }
        st.var[k] = data_var[0].max(f64::MIN_POSITIVE);
    }

    let m_total = opts.draws;
    let mut out = GibbsOutput {
        g,
        n,
        draws: m_total,
        burn_in: opts.burn_in,
        seed: opts.seed,
        permute: opts.permute,
        resolved: false,
        prior: prior.clone(),
        weights: Vec::with_capacity(m_total * g),
        means: Vec::with_capacity(m_total * g),
        vars: Vec::with_capacity(m_total * g),
        c0: Vec::with_capacity(m_total),
        e0: opts.e0_hyper.map(|_| Vec::with_capacity(m_total)),
        labels: Vec::with_capacity(m_total * n),
        counts: Vec::with_capacity(m_total * g),
        sum_y: Vec::with_capacity(m_total * g),
        sum_y2: Vec::with_capacity(m_total * g),
        mu_b: Vec::with_capacity(m_total * g),
        mu_bb: Vec::with_capacity(m_total * g),
        var_c: Vec::with_capacity(m_total * g),
        var_cc: Vec::with_capacity(m_total * g),
        alpha: Vec::with_capacity(m_total * g),
        log_lik: Vec::with_capacity(m_total),
        log_prior: Vec::with_capacity(m_total),
    };

    let mut log_step = 1.0f64;
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut logp = vec![0.0; g];
    let perm_base: Vec<usize> = (0..g).collect();

    for sweep in 0..opts.burn_in + opts.draws {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, TAG_SWEEP, sweep as u64));

        for k in 0..g {
            let nk = if opts.use_likelihood { st.counts[k] as f64 } else { 0.0 };
            let (c, cc) = prior.var_conditional(nk, st.s1[k], st.s2[k], st.mu[k], st.c0);
            st.var[k] = sample_inv_gamma(&mut rng, c, cc);
            let (b, bb) = prior.mu_conditional(nk, st.s1[k], st.var[k]);
            st.mu[k] = sample_normal(&mut rng, b, bb);
        }
        if let C0Prior::Gamma { shape, rate } = prior.c0 {
            let inv: f64 = st.var.iter().map(|v| 1.0 / v).sum();
            st.c0 = sample_gamma(&mut rng, shape + g as f64 * prior.ig_shape, rate + inv);
        }
        if let (Some(h), Some(e0)) = (opts.e0_hyper, st.e0) {
            let target = |e: f64| {
                log_allocation_prior(&st.counts, e) + (h.shape - 1.0) * e.ln() - h.rate * e + e.ln()
            };
            let prop = (e0.ln() + log_step * sample_normal(&mut rng, 0.0, 1.0)).exp();
            proposed += 1;
            if prop > 0.0 && prop.is_finite() && rng.random::<f64>().ln() < target(prop) - target(e0) {
                st.e0 = Some(prop);
                accepted += 1;
            }
            if sweep < opts.burn_in && proposed == 100 {
                let rate = accepted as f64 / proposed as f64;
                if rate < 0.2 {
                    log_step /= 1.5;
                } else if rate > 0.5 {
                    log_step *= 1.5;
                }
                accepted = 0;
                proposed = 0;
            }
        }
        let alpha: Vec<f64> = match st.e0 {
            Some(e0) => st.counts.iter().map(|&c| e0 + c as f64).collect(),
            None => base_alpha.iter().zip(&st.counts).map(|(a, &c)| a + c as f64).collect(),
        };
        st.eta = sample_dirichlet(&mut rng, &alpha);

        let consts: Vec<f64> = (0..g)
            .map(|k| {
                if st.eta[k] > 0.0 {
                    st.eta[k].ln() - 0.5 * (LN_2PI + st.var[k].ln())
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        if opts.use_likelihood {
            let half_prec: Vec<f64> = st.var.iter().map(|v| 0.5 / v).collect();
            for (zi, &v) in st.z.iter_mut().zip(y) {
                for k in 0..g {
                    let d = v - st.mu[k];
                    logp[k] = consts[k] - d * d * half_prec[k];
                }
                *zi = crate::numeric::sample_log_categorical(&mut rng, &logp) as u32;
            }
            st.tally(y);
        } else {
            let log_eta: Vec<f64> = st.eta.iter().map(|w| w.ln()).collect();
            for zi in st.z.iter_mut() {
                *zi = crate::numeric::sample_log_categorical(&mut rng, &log_eta) as u32;
            }
            st.counts.iter_mut().for_each(|c| *c = 0);
            for &l in &st.z {
                st.counts[l as usize] += 1;
            }
        }

        if opts.permute && g > 1 {
            let mut perm = perm_base.clone();
            perm.shuffle(&mut rng);
            let re = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&p| v[p]).collect() };
            st.eta = re(&st.eta);
            st.mu = re(&st.mu);
            st.var = re(&st.var);
            st.s1 = re(&st.s1);
            st.s2 = re(&st.s2);
            st.counts = perm.iter().map(|&p| st.counts[p]).collect();
            let mut inv = vec![0u32; g];
            for (h, &p) in perm.iter().enumerate() {
                inv[p] = h as u32;
            }
            st.z.iter_mut().for_each(|l| *l = inv[*l as usize]);
        }

        if st.var.iter().any(|v| !(*v > 0.0) || !v.is_finite())
            || st.mu.iter().any(|m| !m.is_finite())
            || !(st.c0 > 0.0)
        {
            return Err(MixError::Sampler {
                sweep,
                msg: "non-finite parameter draw".into(),
            });
        }

        if sweep < opts.burn_in {
            continue;
        }
        let alpha: Vec<f64> = match st.e0 {
            Some(e0) => st.counts.iter().map(|&c| e0 + c as f64).collect(),
            None => base_alpha.iter().zip(&st.counts).map(|(a, &c)| a + c as f64).collect(),
        };
        for k in 0..g {
            let nk = if opts.use_likelihood { st.counts[k] as f64 } else { 0.0 };
            let mo = prior.moments(nk, st.s1[k], st.s2[k], st.mu[k], st.var[k], st.c0);
            out.mu_b.push(mo.b);
            out.mu_bb.push(mo.bb);
            out.var_c.push(mo.c);
            out.var_cc.push(mo.cc);
        }
        out.weights.extend_from_slice(&st.eta);
        out.means.extend_from_slice(&st.mu);
        out.vars.extend_from_slice(&st.var);
        out.c0.push(st.c0);
        if let (Some(v), Some(e0)) = (out.e0.as_mut(), st.e0) {
            v.push(e0);
        }
        out.labels.extend_from_slice(&st.z);
        out.counts.extend_from_slice(&st.counts);
        out.sum_y.extend_from_slice(&st.s1);
        out.sum_y2.extend_from_slice(&st.s2);
        out.alpha.extend_from_slice(&alpha);
        out.log_lik.push(univariate_log_lik(y, &st.eta, &st.mu, &st.var));
        let lp = match st.e0 {
            Some(e0) => prior.clone().with_e0(e0).log_prior(&st.eta, &st.mu, &st.var),
            None => prior.log_prior(&st.eta, &st.mu, &st.var),
        };
        out.log_prior.push(lp);
    }
    Ok(out)
}
