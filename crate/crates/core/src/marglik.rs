//! Marginal likelihoods p(y | G) from Gibbs output.
//!
//! Importance densities are Rao–Blackwellized mixtures of the stored
//! conditional densities p(η|z) Π_g p(μ_g|σ²_g, z, y) p(σ²_g|μ_g, C₀, z, y).
//! The random-permutation form averages S stored sweeps of a chain run with
//! random permutation moves; the fully symmetric form averages S₀ sweeps
//! over all G! relabelings, evaluated as a permanent so that the cost is
//! O(2^G G) per sweep rather than O(G!).

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::gibbs::{posterior_mode, univariate_log_lik, C0Prior, ComponentPrior, GibbsOutput, RGPrior};
use crate::mixture::{Dataset, MixtureParams};
use crate::numeric::{
    autocorrelation_factor, batch_means_se, derive_seed, ln_gamma, log_add_exp, log_mean_exp,
    log_sum_exp, mean, sample_dirichlet, sample_gamma, sample_inv_gamma, sample_normal, variance,
    LN_2PI,
};
use crate::perm::{ln_factorial, log_permanent};

const TAG_Q: u64 = 0x7164;
/// Largest G for which G!-expanded structures are built.
pub const MAX_FULL_G: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    #[serde(rename = "R")]
    RandomPermutation,
    #[serde(rename = "F")]
    Full,
}

impl Symmetry {
    pub fn tag(self) -> &'static str {
        match self {
            Symmetry::RandomPermutation => "R",
            Symmetry::Full => "F",
        }
    }
}

/// One stored sweep: Dirichlet parameters and per-component moments, with
/// normalizing constants precomputed.
#[derive(Debug, Clone)]
struct Block {
    alpha: Vec<f64>,
    ln_gamma_alpha: Vec<f64>,
    ln_gamma_total: f64,
    b: Vec<f64>,
    half_prec: Vec<f64>,
    normal_const: Vec<f64>,
    c: Vec<f64>,
    cc: Vec<f64>,
    ig_const: Vec<f64>,
}

impl Block {
    fn from_output(out: &GibbsOutput, m: usize) -> Block {
        let g = out.g;
        let alpha = out.alpha_at(m).to_vec();
        let mut blk = Block {
            ln_gamma_alpha: alpha.iter().map(|&a| ln_gamma(a)).collect(),
            ln_gamma_total: ln_gamma(alpha.iter().sum()),
            alpha,
            b: Vec::with_capacity(g),
            half_prec: Vec::with_capacity(g),
            normal_const: Vec::with_capacity(g),
            c: Vec::with_capacity(g),
            cc: Vec::with_capacity(g),
            ig_const: Vec::with_capacity(g),
        };
        for k in 0..g {
            let mo = out.moments_at(m, k);
            blk.b.push(mo.b);
            blk.half_prec.push(0.5 / mo.bb);
            blk.normal_const.push(-0.5 * (LN_2PI + mo.bb.ln()));
            blk.c.push(mo.c);
            blk.cc.push(mo.cc);
            blk.ig_const.push(mo.c * mo.cc.ln() - ln_gamma(mo.c));
        }
        blk
    }

    /// log of the factor of block component h evaluated at slot g of θ.
    #[inline]
    fn pair(&self, h: usize, th: &Evaluated, g: usize) -> f64 {
        let a1 = self.alpha[h] - 1.0;
        let dir = if a1 == 0.0 { 0.0 } else { a1 * th.ln_eta[g] };
        let d = th.mu[g] - self.b[h];
        dir - self.ln_gamma_alpha[h] + self.normal_const[h] - d * d * self.half_prec[h] + self.ig_const[h]
            - (self.c[h] + 1.0) * th.ln_var[g]
            - self.cc[h] * th.inv_var[g]
    }
}

/// θ with the logarithms the densities need.
struct Evaluated<'a> {
    mu: &'a [f64],
    ln_eta: Vec<f64>,
    ln_var: Vec<f64>,
    inv_var: Vec<f64>,
}

impl<'a> Evaluated<'a> {
    fn new(eta: &[f64], mu: &'a [f64], var: &[f64]) -> Self {
        Evaluated {
            mu,
            ln_eta: eta.iter().map(|w| w.ln()).collect(),
            ln_var: var.iter().map(|v| v.ln()).collect(),
            inv_var: var.iter().map(|v| 1.0 / v).collect(),
        }
    }
}

/// A proposal density q_G(θ) over univariate mixture parameters.
pub trait Proposal {
    fn g(&self) -> usize;
    fn tag(&self) -> &'static str;
    fn log_density(&self, eta: &[f64], mu: &[f64], var: &[f64]) -> f64;
    /// Draws (η, μ, σ²).
    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>);
}

#[derive(Debug, Clone)]
pub struct ImportanceDensity {
    g: usize,
    symmetry: Symmetry,
    blocks: Vec<Block>,
}

impl ImportanceDensity {
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Number of stored sweeps (S for the random form, S₀ for the full form).
    pub fn particles(&self) -> usize {
        self.blocks.len()
    }

    /// Number of mixture terms S (S₀·G! for the full form).
    pub fn terms(&self) -> usize {
        match self.symmetry {
            Symmetry::RandomPermutation => self.blocks.len(),
            Symmetry::Full => self.blocks.len() * (1..=self.g).product::<usize>(),
        }
    }

    fn block_log_density(&self, blk: &Block, th: &Evaluated, scratch: &mut [f64]) -> f64 {
        let g = self.g;
        match self.symmetry {
            Symmetry::RandomPermutation => {
                blk.ln_gamma_total + (0..g).map(|k| blk.pair(k, th, k)).sum::<f64>()
            }
            Symmetry::Full => {
                for slot in 0..g {
                    for h in 0..g {
                        scratch[slot * g + h] = blk.pair(h, th, slot);
                    }
                }
                blk.ln_gamma_total + log_permanent(scratch, g) - ln_factorial(g)
            }
        }
    }
}

impl Proposal for ImportanceDensity {
    fn g(&self) -> usize {
        self.g
    }

    fn tag(&self) -> &'static str {
        self.symmetry.tag()
    }

    fn log_density(&self, eta: &[f64], mu: &[f64], var: &[f64]) -> f64 {
        if var.iter().any(|&v| !(v > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let th = Evaluated::new(eta, mu, var);
        let mut scratch = vec![0.0; self.g * self.g];
        let vals: Vec<f64> = self
            .blocks
            .iter()
            .map(|b| self.block_log_density(b, &th, &mut scratch))
            .collect();
        log_mean_exp(&vals)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.g;
        let blk = &self.blocks[rng.random_range(0..self.blocks.len())];
        let mut slot_of: Vec<usize> = (0..g).collect();
        if self.symmetry == Symmetry::Full {
            slot_of.shuffle(rng);
        }
        let alpha: Vec<f64> = slot_of.iter().map(|&h| blk.alpha[h]).collect();
        let eta = sample_dirichlet(rng, &alpha);
        let mut mu = Vec::with_capacity(g);
        let mut var = Vec::with_capacity(g);
        for &h in &slot_of {
            mu.push(sample_normal(rng, blk.b[h], 0.5 / blk.half_prec[h]));
            var.push(sample_inv_gamma(rng, blk.c[h], blk.cc[h]));
        }
        (eta, mu, var)
    }
}

fn evenly_spaced(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| j * total / k).collect()
}

/// Random-permutation density from S evenly thinned sweeps.
pub fn build_density_random(output: &GibbsOutput, s: usize) -> Result<ImportanceDensity> {
    if !output.permute && output.g > 1 {
        return Err(MixError::InvalidParams(
            "the random-permutation density needs a chain run with permutation moves".into(),
        ));
    }
    if s == 0 || s > output.draws {
        return Err(MixError::InvalidParams(format!("S = {s} with M = {}", output.draws)));
    }
    Ok(ImportanceDensity {
        g: output.g,
        symmetry: Symmetry::RandomPermutation,
        blocks: evenly_spaced(output.draws, s).into_iter().map(|m| Block::from_output(output, m)).collect(),
    })
}

/// Fully symmetric density from S₀ evenly thinned sweeps and all G! relabelings.
pub fn build_density_full(output: &GibbsOutput, s0: usize) -> Result<ImportanceDensity> {
    if output.g > MAX_FULL_G {
        return Err(MixError::Unsupported(format!(
            "the fully symmetric density is limited to G ≤ {MAX_FULL_G} (got G = {})",
            output.g
        )));
    }
    if s0 == 0 || s0 > output.draws {
        return Err(MixError::InvalidParams(format!("S0 = {s0} with M = {}", output.draws)));
    }
    Ok(ImportanceDensity {
        g: output.g,
        symmetry: Symmetry::Full,
        blocks: evenly_spaced(output.draws, s0).into_iter().map(|m| Block::from_output(output, m)).collect(),
    })
}

/// The prior itself as a proposal; importance sampling then reduces to
/// averaging the likelihood over prior draws.
pub struct PriorProposal<'a> {
    pub prior: &'a RGPrior,
    pub g: usize,
}

impl Proposal for PriorProposal<'_> {
    fn g(&self) -> usize {
        self.g
    }

    fn tag(&self) -> &'static str {
        "prior"
    }

    fn log_density(&self, eta: &[f64], mu: &[f64], var: &[f64]) -> f64 {
        self.prior.log_prior(eta, mu, var)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.prior;
        let alpha = p.alpha(self.g).expect("prior matches G");
        let eta = sample_dirichlet(rng, &alpha);
        let c0 = match p.c0 {
            C0Prior::Gamma { shape, rate } => sample_gamma(rng, shape, rate),
            C0Prior::Fixed { value } => value,
        };
        let var: Vec<f64> = (0..self.g).map(|_| sample_inv_gamma(rng, p.ig_shape, c0)).collect();
        let mu = var
            .iter()
            .map(|&v| match p.component {
                ComponentPrior::Independent => sample_normal(rng, p.m, p.r2),
                ComponentPrior::Conjugate { kappa } => sample_normal(rng, p.m, v / kappa),
            })
            .collect();
        (eta, mu, var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    IS,
    RI,
    BS,
    Chib,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    #[serde(rename = "G")]
    pub g: usize,
    pub estimator: Estimator,
    /// "F", "R", "prior", or "-" for Chib's estimator.
    pub density: String,
    pub log_value: f64,
    pub se: f64,
    /// Bridge-sampling iterations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Log target log p(y|θ) + log p(θ) and log q(θ) at a set of points.
struct Evaluations {
    log_target: Vec<f64>,
    log_q: Vec<f64>,
}

fn draw_from_q<Q: Proposal + ?Sized>(q: &Q, prior: &RGPrior, data: &Dataset, l: usize, seed: u64) -> Evaluations {
    let y = data.values();
    let mut ev = Evaluations {
        log_target: Vec::with_capacity(l),
        log_q: Vec::with_capacity(l),
    };
    for i in 0..l {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_Q, i as u64));
        let (eta, mu, var) = q.sample(&mut rng);
        ev.log_target.push(univariate_log_lik(y, &eta, &mu, &var) + prior.log_prior(&eta, &mu, &var));
        ev.log_q.push(q.log_density(&eta, &mu, &var));
    }
    ev
}

fn eval_at_chain<Q: Proposal + ?Sized>(q: &Q, prior: &RGPrior, output: &GibbsOutput, data: &Dataset) -> Evaluations {
    let y = data.values();
    let mut ev = Evaluations {
        log_target: Vec::with_capacity(output.draws),
        log_q: Vec::with_capacity(output.draws),
    };
    for m in 0..output.draws {
        let (eta, mu, var) = (output.weights_at(m), output.means_at(m), output.vars_at(m));
        ev.log_target.push(univariate_log_lik(y, eta, mu, var) + prior.log_prior(eta, mu, var));
        ev.log_q.push(q.log_density(eta, mu, var));
    }
    ev
}

fn check_inputs<Q: Proposal + ?Sized>(q: &Q, data: &Dataset, output: Option<&GibbsOutput>) -> Result<()> {
    if data.dim() != 1 {
        return Err(MixError::Unsupported("marginal likelihoods are univariate".into()));
    }
    if let Some(out) = output {
        if out.g != q.g() || out.n != data.n() {
            return Err(MixError::Dimension("chain does not match the density or the data".into()));
        }
    }
    Ok(())
}

fn is_from(ev: &Evaluations, g: usize, tag: &str) -> Result<EvidenceEstimate> {
    let logw: Vec<f64> = ev.log_target.iter().zip(&ev.log_q).map(|(t, q)| t - q).collect();
    let max = logw.iter().copied().filter(|w| !w.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MixError::WeightUnderflow(format!(
            "every importance weight is {max}; the {tag} density does not cover the posterior"
        )));
    }
    let w: Vec<f64> = logw.iter().map(|lw| if lw.is_nan() { 0.0 } else { (lw - max).exp() }).collect();
    let mw = mean(&w);
    let l = w.len() as f64;
    let ess = w.iter().sum::<f64>().powi(2) / w.iter().map(|x| x * x).sum::<f64>();
    Ok(EvidenceEstimate {
        g,
        estimator: Estimator::IS,
        density: tag.into(),
        log_value: max + mw.ln(),
        se: (variance(&w) / l).sqrt() / mw,
        iterations: None,
        ess: Some(ess),
        warning: None,
    })
}

fn ri_from(ev: &Evaluations, g: usize, tag: &str) -> Result<EvidenceEstimate> {
    let logv: Vec<f64> = ev.log_q.iter().zip(&ev.log_target).map(|(q, t)| q - t).collect();
    let max = logv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MixError::WeightUnderflow(format!(
            "the {tag} density vanishes at every posterior draw"
        )));
    }
    let v: Vec<f64> = logv.iter().map(|lv| (lv - max).exp()).collect();
    let mv = mean(&v);
    Ok(EvidenceEstimate {
        g,
        estimator: Estimator::RI,
        density: tag.into(),
        log_value: -(max + mv.ln()),
        se: batch_means_se(&v) / mv,
        iterations: None,
        ess: None,
        warning: None,
    })
}

const BS_MAX_ITER: usize = 500;

fn bs_from(q_ev: &Evaluations, mc_ev: &Evaluations, start: f64, tol: f64, g: usize, tag: &str) -> Result<EvidenceEstimate> {
    let (ll, lm) = ((q_ev.log_q.len() as f64).ln(), (mc_ev.log_q.len() as f64).ln());
    // log(L q + M p/p̂)
    let denom = |lq: f64, lp: f64, lz: f64| log_add_exp(ll + lq, lm + lp - lz);
    let mut lz = start;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut num = vec![0.0; q_ev.log_q.len()];
    let mut den = vec![0.0; mc_ev.log_q.len()];
    while iterations < BS_MAX_ITER {
        iterations += 1;
        for (k, (lp, lq)) in q_ev.log_target.iter().zip(&q_ev.log_q).enumerate() {
            num[k] = lp - denom(*lq, *lp, lz);
        }
        for (k, (lp, lq)) in mc_ev.log_target.iter().zip(&mc_ev.log_q).enumerate() {
            den[k] = lq - denom(*lq, *lp, lz);
        }
        let next = log_mean_exp(&num) - log_mean_exp(&den);
        if !next.is_finite() {
            return Err(MixError::WeightUnderflow("bridge sampling iterate is not finite".into()));
        }
        last_change = (next - lz).abs();
        lz = next;
        if last_change < tol {
            break;
        }
    }
    if last_change >= tol {
        return Err(MixError::NoConvergence {
            iterations,
            last_change,
        });
    }
    // relative MSE of the bridge estimator
    let f1: Vec<f64> = q_ev
        .log_target
        .iter()
        .zip(&q_ev.log_q)
        .map(|(lp, lq)| (lp - lz - denom(*lq, *lp, lz)).exp())
        .collect();
    let f2: Vec<f64> = mc_ev
        .log_target
        .iter()
        .zip(&mc_ev.log_q)
        .map(|(lp, lq)| (lq - denom(*lq, *lp, lz)).exp())
        .collect();
    let (l, m) = (f1.len() as f64, f2.len() as f64);
    let re2 = variance(&f1) / (l * mean(&f1).powi(2))
        + autocorrelation_factor(&f2) * variance(&f2) / (m * mean(&f2).powi(2));
    Ok(EvidenceEstimate {
        g,
        estimator: Estimator::BS,
        density: tag.into(),
        log_value: lz,
        se: re2.sqrt(),
        iterations: Some(iterations),
        ess: None,
        warning: None,
    })
}

/// Importance sampling from L draws of q.
pub fn estimate_is<Q: Proposal + ?Sized>(q: &Q, prior: &RGPrior, data: &Dataset, l: usize, seed: u64) -> Result<EvidenceEstimate> {
    check_inputs(q, data, None)?;
    is_from(&draw_from_q(q, prior, data, l, seed), q.g(), q.tag())
}

/// Reciprocal importance sampling at the stored posterior draws.
pub fn estimate_ri<Q: Proposal + ?Sized>(q: &Q, prior: &RGPrior, output: &GibbsOutput, data: &Dataset) -> Result<EvidenceEstimate> {
    check_inputs(q, data, Some(output))?;
    ri_from(&eval_at_chain(q, prior, output, data), q.g(), q.tag())
}

/// Bridge sampling started from the importance-sampling estimate on the
/// same L draws, iterated until successive log values differ by < `tol`.
pub fn estimate_bs<Q: Proposal + ?Sized>(
    q: &Q,
    prior: &RGPrior,
    output: &GibbsOutput,
    data: &Dataset,
    l: usize,
    tol: f64,
    seed: u64,
) -> Result<EvidenceEstimate> {
    Ok(estimate_all(q, prior, output, data, l, tol, seed)?.2)
}

/// IS, RI and BS sharing one set of density evaluations.
pub fn estimate_all<Q: Proposal + ?Sized>(
    q: &Q,
    prior: &RGPrior,
    output: &GibbsOutput,
    data: &Dataset,
    l: usize,
    tol: f64,
    seed: u64,
) -> Result<(EvidenceEstimate, EvidenceEstimate, EvidenceEstimate)> {
    check_inputs(q, data, Some(output))?;
    let q_ev = draw_from_q(q, prior, data, l, seed);
    let mc_ev = eval_at_chain(q, prior, output, data);
    let is = is_from(&q_ev, q.g(), q.tag())?;
    let ri = ri_from(&mc_ev, q.g(), q.tag())?;
    let bs = bs_from(&q_ev, &mc_ev, is.log_value, tol, q.g(), q.tag())?;
    Ok((is, ri, bs))
}

fn conjugate_fixed(prior: &RGPrior) -> Result<(f64, f64)> {
    match (prior.component, prior.c0) {
        (ComponentPrior::Conjugate { kappa }, C0Prior::Fixed { value }) => Ok((kappa, value)),
        _ => Err(MixError::Unsupported(
            "closed-form complete-data posteriors need the conjugate prior with fixed C0".into(),
        )),
    }
}

/// Normal-inverse-gamma posterior of one component given (n, Σy, Σy²).
#[derive(Clone, Copy)]
struct Nig {
    m: f64,
    kappa: f64,
    a: f64,
    c: f64,
}

fn nig_posterior(prior: &RGPrior, kappa: f64, c0: f64, n: f64, s1: f64, s2: f64) -> Nig {
    let kn = kappa + n;
    let mn = (kappa * prior.m + s1) / kn;
    Nig {
        m: mn,
        kappa: kn,
        a: prior.ig_shape + 0.5 * n,
        c: c0 + 0.5 * (s2 + kappa * prior.m * prior.m - kn * mn * mn).max(0.0),
    }
}

impl Nig {
    fn ln_pdf(&self, mu: f64, var: f64) -> f64 {
        let d = mu - self.m;
        -0.5 * (LN_2PI + (var / self.kappa).ln()) - 0.5 * d * d * self.kappa / var
            + self.a * self.c.ln()
            - ln_gamma(self.a)
            - (self.a + 1.0) * var.ln()
            - self.c / var
    }
}

/// Chib's estimator log p(y|θ°) + log p(θ°) − log p̂(θ°|y) under the
/// conjugate prior with fixed C₀, where p̂(θ°|y) averages the exact
/// complete-data posterior over the stored allocations. With `corrected`
/// the average also runs over all G! relabelings of every allocation.
///
/// θ° defaults to the chain's posterior-mode surrogate.
pub fn estimate_chib(
    output: &GibbsOutput,
    prior: &RGPrior,
    data: &Dataset,
    theta_o: Option<&MixtureParams>,
    corrected: bool,
) -> Result<EvidenceEstimate> {
    let (kappa, c0) = conjugate_fixed(prior)?;
    let g = output.g;
    if corrected && g > MAX_FULL_G {
        return Err(MixError::Unsupported(format!(
            "the permutation-corrected estimator is limited to G ≤ {MAX_FULL_G}"
        )));
    }
    if output.n != data.n() {
        return Err(MixError::Dimension("chain does not match the data".into()));
    }
    let theta = match theta_o {
        Some(t) => t.clone(),
        None => posterior_mode(output)?.1,
    };
    if theta.g() != g || theta.dim() != 1 {
        return Err(MixError::Dimension("θ° does not match the chain".into()));
    }
    let (eta, mu, var) = (theta.weights().to_vec(), theta.means(), theta.variances());
    let ln_eta: Vec<f64> = eta.iter().map(|w| w.ln()).collect();
    let mut scratch = vec![0.0; g * g];
    let mut ordinates = Vec::with_capacity(output.draws);
    for m in 0..output.draws {
        let alpha = output.alpha_at(m);
        let nig: Vec<Nig> = (0..g)
            .map(|h| {
                let k = m * g + h;
                nig_posterior(prior, kappa, c0, output.counts[k] as f64, output.sum_y[k], output.sum_y2[k])
            })
            .collect();
        let pair = |slot: usize, h: usize| {
            let a1 = alpha[h] - 1.0;
            let dir = if a1 == 0.0 { 0.0 } else { a1 * ln_eta[slot] };
            dir - ln_gamma(alpha[h]) + nig[h].ln_pdf(mu[slot], var[slot])
        };
        let total = ln_gamma(alpha.iter().sum());
        let v = if corrected {
            for slot in 0..g {
                for h in 0..g {
                    scratch[slot * g + h] = pair(slot, h);
                }
            }
            total + log_permanent(&scratch, g) - ln_factorial(g)
        } else {
            total + (0..g).map(|k| pair(k, k)).sum::<f64>()
        };
        ordinates.push(v);
    }
    let max = ordinates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MixError::WeightUnderflow("posterior ordinate vanished at θ°".into()));
    }
    let scaled: Vec<f64> = ordinates.iter().map(|o| (o - max).exp()).collect();
    let ms = mean(&scaled);
    let log_ordinate = max + ms.ln();
    let log_value = univariate_log_lik(data.values(), &eta, &mu, &var) + prior.log_prior(&eta, &mu, &var) - log_ordinate;
    Ok(EvidenceEstimate {
        g,
        estimator: Estimator::Chib,
        density: if corrected { "corrected".into() } else { "uncorrected".into() },
        log_value,
        se: batch_means_se(&scaled) / ms,
        iterations: None,
        ess: None,
        warning: (!corrected && g > 1).then(|| {
            "uncorrected ordinate: biased by up to log G! unless the chain visits all label permutations".to_string()
        }),
    })
}

/// Largest lattice G^n accepted by [`brute_force_evidence`].
pub const MAX_LATTICE: f64 = 1e7;

/// Exact log p(y | G) by summing p(y|z) p(z|G) over all Gⁿ allocations,
/// under the conjugate prior with fixed C₀.
pub fn brute_force_evidence(data: &Dataset, g: usize, prior: &RGPrior) -> Result<f64> {
    let (kappa, c0) = conjugate_fixed(prior)?;
    prior.validate()?;
    if data.dim() != 1 {
        return Err(MixError::Unsupported("enumeration is univariate".into()));
    }
    let y = data.values();
    let n = y.len();
    if (g as f64).powi(n as i32) > MAX_LATTICE {
        return Err(MixError::Unsupported(format!("{g}^{n} allocations exceed {MAX_LATTICE:e}")));
    }
    let alpha = prior.alpha(g)?;
    let a_sum: f64 = alpha.iter().sum();
    let a = prior.ig_shape;
    let cluster = |cnt: usize, s1: f64, s2: f64| {
        let p = nig_posterior(prior, kappa, c0, cnt as f64, s1, s2);
        ln_gamma(p.a) - ln_gamma(a) + a * c0.ln() - p.a * p.c.ln() + 0.5 * (kappa / p.kappa).ln()
            - 0.5 * cnt as f64 * LN_2PI
    };
    let dir_tab: Vec<Vec<f64>> = alpha
        .iter()
        .map(|&e| (0..=n).map(|c| ln_gamma(c as f64 + e) - ln_gamma(e)).collect())
        .collect();
    let z_const = ln_gamma(a_sum) - ln_gamma(n as f64 + a_sum);

    let mut z = vec![0usize; n];
    let mut acc = f64::NEG_INFINITY;
    let mut cnt = vec![0usize; g];
    let mut s1 = vec![0.0; g];
    let mut s2 = vec![0.0; g];
    loop {
        cnt.iter_mut().for_each(|c| *c = 0);
        s1.iter_mut().for_each(|c| *c = 0.0);
        s2.iter_mut().for_each(|c| *c = 0.0);
        for (&l, &v) in z.iter().zip(y) {
            cnt[l] += 1;
            s1[l] += v;
            s2[l] += v * v;
        }
        let mut term = z_const;
        for k in 0..g {
            term += dir_tab[k][cnt[k]] + cluster(cnt[k], s1[k], s2[k]);
        }
        acc = log_add_exp(acc, term);
        // odometer increment
        let mut i = 0;
        loop {
            if i == n {
                return Ok(acc);
            }
            z[i] += 1;
            if z[i] < g {
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

/// Prior on the number of components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GPrior {
    /// G − 1 ~ Poisson(1).
    Poisson,
    Uniform,
}

impl GPrior {
    pub fn log_prob(self, g: usize) -> f64 {
        match self {
            GPrior::Poisson => -1.0 - ln_factorial(g - 1),
            GPrior::Uniform => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsEntry {
    #[serde(rename = "G")]
    pub g: usize,
    #[serde(rename = "G_other")]
    pub g_other: usize,
    pub log_odds: f64,
}

/// Log posterior odds of G against G′ for every pair G < G′.
pub fn posterior_odds(log_evidence: &BTreeMap<usize, f64>, prior: GPrior) -> Result<Vec<OddsEntry>> {
    if log_evidence.len() < 2 {
        return Err(MixError::InvalidParams("posterior odds need at least two values of G".into()));
    }
    if log_evidence.contains_key(&0) {
        return Err(MixError::InvalidParams("G must be positive".into()));
    }
    let mut out = Vec::new();
    for (&g, &lg) in log_evidence {
        for (&h, &lh) in log_evidence.range(g + 1..) {
            out.push(OddsEntry {
                g,
                g_other: h,
                log_odds: lg - lh + prior.log_prob(g) - prior.log_prob(h),
            });
        }
    }
    Ok(out)
}

/// Posterior probabilities p(G | y) from log evidences.
pub fn posterior_probabilities(log_evidence: &BTreeMap<usize, f64>, prior: GPrior) -> BTreeMap<usize, f64> {
    let lp: Vec<f64> = log_evidence.iter().map(|(&g, &l)| l + prior.log_prob(g)).collect();
    let norm = log_sum_exp(&lp);
    log_evidence.keys().zip(lp).map(|(&g, l)| (g, (l - norm).exp())).collect()
}

/// Writes estimates as CSV with columns G, estimator, density, log_value, se.
pub fn write_estimates_csv<W: Write>(estimates: &[EvidenceEstimate], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["G", "estimator", "density", "log_value", "se"])?;
    for e in estimates {
        wtr.write_record([
            e.g.to_string(),
            format!("{:?}", e.estimator),
            e.density.clone(),
            e.log_value.to_string(),
            e.se.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
