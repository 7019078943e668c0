//! Maximum-likelihood fitting: EM with restarts, componentwise EM with
//! message-length annihilation, and the entropy-penalized fitter that
//! maximizes the conditional classification likelihood L_cc.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::kmeans::kmeans;
use crate::mixture::{
    component_dim, log_weighted_density_matrix, CovarianceFamily, Dataset, Gaussian,
    MixtureParams,
};
use crate::numeric::{derive_seed, log_sum_exp, sample_dirichlet};

const TAG_RESTART: u64 = 0x454d;
const TAG_MML: u64 = 0x4d4d4c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MixtureParams,
    /// ℓ_O at the returned parameters.
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective per iteration: ℓ_O for EM, log L_cc for [`bem_fit`].
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// k-means++ labels followed by an M-step.
    KMeans,
    /// Dirichlet(1) responsibilities followed by an M-step.
    RandomResponsibilities,
    /// Alternates: even restarts k-means, odd restarts random responsibilities.
    Mixed,
    /// Start the first restart from these parameters; later restarts as [`InitPolicy::Mixed`].
    Params(MixtureParams),
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    pub init: InitPolicy,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            init: InitPolicy::Mixed,
            tol: 1e-8,
            max_iter: 2000,
            restarts: 10,
            seed: 0,
        }
    }
}

impl EmOptions {
    pub fn with_seed(seed: u64) -> Self {
        EmOptions {
            seed,
            ..EmOptions::default()
        }
    }
}

/// Unvalidated parameter arrays; `cov` is G blocks of r × r.
#[derive(Clone)]
struct Raw {
    weights: Vec<f64>,
    means: Vec<f64>,
    cov: Vec<f64>,
}

impl Raw {
    fn from_params(p: &MixtureParams) -> Raw {
        Raw {
            weights: p.weights().to_vec(),
            means: p.components().iter().flat_map(|c| c.mean().to_vec()).collect(),
            cov: p.components().iter().flat_map(|c| c.cov().to_vec()).collect(),
        }
    }

    fn lerp(&self, other: &Raw, t: f64) -> Raw {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
        };
        Raw {
            weights: mix(&self.weights, &other.weights),
            means: mix(&self.means, &other.means),
            cov: mix(&self.cov, &other.cov),
        }
    }

    fn build(&self, r: usize, var_floor: &[f64]) -> Result<MixtureParams> {
        let g = self.weights.len();
        let total: f64 = self.weights.iter().sum();
        let weights: Vec<f64> = self.weights.iter().map(|w| w / total).collect();
        let comps = (0..g)
            .map(|k| {
                let cov = self.cov[k * r * r..(k + 1) * r * r].to_vec();
                for a in 0..r {
                    if !(cov[a * r + a] > var_floor[a]) {
                        return Err(MixError::Degenerate(format!("component {} collapsed", k + 1)));
                    }
                }
                Gaussian::new(self.means[k * r..(k + 1) * r].to_vec(), cov)
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureParams::new(weights, comps)
    }
}

/// Per-coordinate variance below which a component counts as collapsed.
fn variance_floor(data: &Dataset) -> Vec<f64> {
    let (_, cov) = data.moments();
    let r = data.dim();
    (0..r).map(|a| 1e-10 * cov[a * r + a].max(f64::MIN_POSITIVE)).collect()
}

/// Weighted moments; `w` is n × G row-major with non-negative entries.
fn weighted_moments(data: &Dataset, w: &[f64], g: usize) -> Raw {
    let r = data.dim();
    let mut sums = vec![0.0; g];
    let mut means = vec![0.0; g * r];
    for (y, row) in data.rows().zip(w.chunks(g)) {
        for k in 0..g {
            sums[k] += row[k];
            for a in 0..r {
                means[k * r + a] += row[k] * y[a];
            }
        }
    }
    for k in 0..g {
        for a in 0..r {
            means[k * r + a] = if sums[k] > 0.0 { means[k * r + a] / sums[k] } else { 0.0 };
        }
    }
    let mut cov = vec![0.0; g * r * r];
    for (y, row) in data.rows().zip(w.chunks(g)) {
        for k in 0..g {
            let m = &means[k * r..(k + 1) * r];
            for a in 0..r {
                let da = y[a] - m[a];
                for b in 0..=a {
                    cov[k * r * r + a * r + b] += row[k] * da * (y[b] - m[b]);
                }
            }
        }
    }
    for k in 0..g {
        for a in 0..r {
            for b in 0..=a {
                let v = if sums[k] > 0.0 { cov[k * r * r + a * r + b] / sums[k] } else { 0.0 };
                cov[k * r * r + a * r + b] = v;
                cov[k * r * r + b * r + a] = v;
            }
        }
    }
    let n: f64 = sums.iter().sum();
    Raw {
        weights: sums.iter().map(|s| s / n).collect(),
        means,
        cov,
    }
}

/// E-step: returns (ℓ_O, τ).
fn e_step(params: &MixtureParams, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    let g = params.g();
    let mut tau = log_weighted_density_matrix(params, data)?;
    let mut ll = 0.0;
    for (i, row) in tau.chunks_mut(g).enumerate() {
        let norm = log_sum_exp(row);
        if !norm.is_finite() {
            return Err(MixError::Underflow { index: i });
        }
        ll += norm;
        row.iter_mut().for_each(|t| *t = (*t - norm).exp());
    }
    Ok((ll, tau))
}

fn random_responsibilities<R: Rng>(n: usize, g: usize, rng: &mut R) -> Vec<f64> {
    let alpha = vec![1.0; g];
    (0..n).flat_map(|_| sample_dirichlet(rng, &alpha)).collect()
}

fn initial_params<R: Rng>(
    data: &Dataset,
    g: usize,
    policy: &InitPolicy,
    restart: usize,
    rng: &mut R,
    floor: &[f64],
) -> Result<MixtureParams> {
    let n = data.n();
    let w = match policy {
        InitPolicy::Params(p) if restart == 0 => {
            if p.g() != g || p.dim() != data.dim() {
                return Err(MixError::Dimension("initial parameters do not match G or r".into()));
            }
            return Ok(p.clone());
        }
        InitPolicy::RandomResponsibilities => random_responsibilities(n, g, rng),
        InitPolicy::Mixed | InitPolicy::Params(_) if restart % 2 == 1 => random_responsibilities(n, g, rng),
        _ => {
            let km = kmeans(data.values(), data.dim(), g, rng, 100)?;
            let mut w = vec![0.0; n * g];
            for (i, &l) in km.labels.iter().enumerate() {
                w[i * g + l] = 1.0;
            }
            w
        }
    };
    weighted_moments(data, &w, g).build(data.dim(), floor)
}

fn em_once(data: &Dataset, start: MixtureParams, opts: &EmOptions, floor: &[f64]) -> Result<FitResult> {
    let g = start.g();
    let mut params = start;
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let (ll, tau) = e_step(&params, data)?;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if ((ll - prev) / prev.abs().max(1.0)).abs() < opts.tol {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || trace.len() > opts.max_iter {
            break;
        }
        params = weighted_moments(data, &tau, g).build(data.dim(), floor)?;
    }
    Ok(FitResult {
        log_lik: *trace.last().expect("at least one E-step"),
        iterations: trace.len() - 1,
        params,
        converged,
        trace,
    })
}

/// EM for the MLE θ̂_G, best of `opts.restarts` runs.
///
/// A restart that collapses a component is discarded; only when every
/// restart collapses is an error returned.
pub fn em_fit(data: &Dataset, g: usize, opts: &EmOptions) -> Result<FitResult> {
    if g == 0 || g > data.n() {
        return Err(MixError::InvalidParams(format!("G = {g} with n = {}", data.n())));
    }
    let floor = variance_floor(data);
    let restarts = opts.restarts.max(1);
    let mut best: Option<FitResult> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, TAG_RESTART, r as u64));
        let fit = initial_params(data, g, &opts.init, r, &mut rng, &floor)
            .and_then(|start| em_once(data, start, opts, &floor));
        match fit {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.log_lik > b.log_lik) {
                    best = Some(f);
                }
            }
            Err(e) => log::debug!("EM restart {r} for G = {g} failed: {e}"),
        }
        if g == 1 && best.is_some() {
            break;
        }
    }
    best.ok_or(MixError::AllRestartsFailed { restarts })
}

/// Starting values for G + 1 components: the heaviest component of `params`
/// is split along its first coordinate.
pub fn split_heaviest(params: &MixtureParams) -> Result<MixtureParams> {
    let k = (0..params.g())
        .max_by(|&a, &b| params.weights()[a].total_cmp(&params.weights()[b]))
        .expect("G ≥ 1");
    let c = &params.components()[k];
    let sd = c.var().sqrt();
    let mut weights = params.weights().to_vec();
    let mut comps = params.components().to_vec();
    weights[k] /= 2.0;
    weights.push(weights[k]);
    let mut lo = c.mean().to_vec();
    let mut hi = c.mean().to_vec();
    lo[0] -= 0.5 * sd;
    hi[0] += 0.5 * sd;
    comps[k] = Gaussian::new(lo, c.cov().to_vec())?;
    comps.push(Gaussian::new(hi, c.cov().to_vec())?);
    MixtureParams::new(weights, comps)
}

fn log_lcc(params: &MixtureParams, data: &Dataset) -> Result<(f64, f64)> {
    let (ll, tau) = e_step(params, data)?;
    let ent: f64 = -tau.iter().map(|&t| if t > 0.0 { t * t.ln() } else { 0.0 }).sum::<f64>();
    Ok((ll - ent, ll))
}

/// Maximizes log L_cc(θ) = ℓ_O(θ) − ENT(θ), starting from the MLE.
///
/// Each iteration builds the weighted M-step with weights
/// τ_ig(1 + log τ_ig − Σ_h τ_ih log τ_ih), which is stationary exactly at
/// the critical points of log L_cc, and moves towards it by backtracking
/// until log L_cc increases. The trace holds log L_cc per iteration.
pub fn bem_fit(data: &Dataset, g: usize, opts: &EmOptions) -> Result<FitResult> {
    let mle = em_fit(data, g, opts)?;
    if g == 1 {
        return Ok(mle);
    }
    let r = data.dim();
    let floor = variance_floor(data);
    let mut params = mle.params;
    let (mut obj, mut ll) = log_lcc(&params, data)?;
    let mut trace = vec![obj];
    let mut converged = false;
    while trace.len() <= opts.max_iter {
        let (_, tau) = e_step(&params, data)?;
        let mut w = tau;
        for row in w.chunks_mut(g) {
            let cbar: f64 = row.iter().map(|&t| if t > 0.0 { t * t.ln() } else { 0.0 }).sum();
            for t in row.iter_mut() {
                if *t > 0.0 {
                    *t = (*t * (1.0 + t.ln() - cbar)).max(0.0);
                }
            }
        }
        let here = Raw::from_params(&params);
        let target = weighted_moments(data, &w, g);
        let mut step = 1.0;
        let mut moved = None;
        while step > 1e-6 {
            if let Ok(p) = here.lerp(&target, step).build(r, &floor) {
                if let Ok((o, l)) = log_lcc(&p, data) {
                    if o > obj {
                        moved = Some((p, o, l));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((p, o, l)) = moved else {
            converged = true;
            break;
        };
        let rel = ((o - obj) / obj.abs().max(1.0)).abs();
        params = p;
        obj = o;
        ll = l;
        trace.push(obj);
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        params,
        log_lik: ll,
        converged,
        iterations: trace.len() - 1,
        trace,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmlFit {
    pub fit: FitResult,
    /// Number of components with positive weight.
    pub g_star: usize,
    pub mml: f64,
}

/// Message-length criterion for an unconstrained Gaussian mixture:
///
/// MML = −ℓ_O + (G*/2) log(n/12)
///       + (d/2) Σ_{g: η_g > 0} { log(n d / 12) + G*(d + 1) },
///
/// with d = dim θ_g and G* the number of positive weights. The expression
/// is evaluated as written; it differs from the original Figueiredo–Jain
/// form, where the sum runs over log(n η_g / 12).
pub fn mml_criterion(params: &MixtureParams, log_lik: f64, n: usize) -> f64 {
    let d = component_dim(params.dim(), CovarianceFamily::Unconstrained) as f64;
    let g_star = params.weights().iter().filter(|&&w| w > 0.0).count() as f64;
    let n = n as f64;
    -log_lik + 0.5 * g_star * (n / 12.0).ln() + 0.5 * d * g_star * ((n * d / 12.0).ln() + g_star * (d + 1.0))
}

/// Componentwise EM state: log f_g(y_i) column per component plus weights.
struct Cem {
    weights: Vec<f64>,
    comps: Vec<Gaussian>,
    /// n × G log densities, row-major.
    logf: Vec<f64>,
}

impl Cem {
    fn g(&self) -> usize {
        self.weights.len()
    }

    fn remove(&mut self, k: usize, n: usize) {
        let g = self.g();
        self.weights.remove(k);
        self.comps.remove(k);
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        let mut logf = Vec::with_capacity(n * (g - 1));
        for row in self.logf.chunks(g) {
            logf.extend(row.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, v)| *v));
        }
        self.logf = logf;
    }

    fn tau(&self) -> Vec<f64> {
        let g = self.g();
        let lw: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let mut tau = self.logf.clone();
        for row in tau.chunks_mut(g) {
            row.iter_mut().zip(&lw).for_each(|(t, w)| *t += w);
            let norm = log_sum_exp(row);
            row.iter_mut().for_each(|t| *t = (*t - norm).exp());
        }
        tau
    }

    fn log_lik(&self) -> f64 {
        let g = self.g();
        let lw: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let mut buf = vec![0.0; g];
        self.logf
            .chunks(g)
            .map(|row| {
                buf.iter_mut().zip(row).zip(&lw).for_each(|((b, f), w)| *b = f + w);
                log_sum_exp(&buf)
            })
            .sum()
    }

    fn params(&self) -> MixtureParams {
        MixtureParams::new(self.weights.clone(), self.comps.clone()).expect("valid CEM state")
    }
}

/// Componentwise EM from `g_max` components with annihilation of components
/// whose support Σᵢ τ_ig falls below dim(θ_g)/2.
///
/// Components are visited in index order; each visit updates η_g by the
/// shrunk count max(0, Σᵢ τ_ig − d/2), renormalizes, then refits θ_g. After
/// convergence the weakest component is removed and the procedure
/// continues, so every G* from the first converged value down to 1 is
/// scored. The fit with the smallest criterion value is returned.
pub fn componentwise_em_mml(data: &Dataset, g_max: usize, seed: u64) -> Result<MmlFit> {
    let n = data.n();
    let r = data.dim();
    if g_max == 0 || g_max > n {
        return Err(MixError::InvalidParams(format!("G_max = {g_max} with n = {n}")));
    }
    let d = component_dim(r, CovarianceFamily::Unconstrained) as f64;
    let floor = variance_floor(data);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_MML, 0));
    let (_, data_cov) = data.moments();
    let init_cov: Vec<f64> = data_cov.iter().map(|v| v / 10.0).collect();
    let starts = rand::seq::index::sample(&mut rng, n, g_max);
    let mut comps = Vec::with_capacity(g_max);
    for i in starts.iter() {
        comps.push(Gaussian::new(data.row(i).to_vec(), init_cov.clone())?);
    }
    let mut state = Cem {
        weights: vec![1.0 / g_max as f64; g_max],
        logf: data.rows().flat_map(|y| comps.iter().map(|c| c.ln_pdf(y)).collect::<Vec<_>>()).collect(),
        comps,
    };

    let tol = 1e-8;
    let mut best: Option<MmlFit> = None;
    loop {
        let mut prev = f64::INFINITY;
        let mut trace = Vec::new();
        let mut iterations = 0;
        loop {
            let mut k = 0;
            while k < state.g() {
                let g = state.g();
                let tau = state.tau();
                let support: Vec<f64> = (0..g)
                    .map(|j| (tau.iter().skip(j).step_by(g).sum::<f64>() - d / 2.0).max(0.0))
                    .collect();
                let total: f64 = support.iter().sum();
                if support[k] <= 0.0 || total <= 0.0 {
                    if g == 1 {
                        return Err(MixError::Degenerate("every component was annihilated".into()));
                    }
                    state.remove(k, n);
                    continue;
                }
                state.weights[k] = support[k] / total;
                let s: f64 = state.weights.iter().sum();
                state.weights.iter_mut().for_each(|w| *w /= s);

                let col: Vec<f64> = tau.iter().skip(k).step_by(g).copied().collect();
                let raw = weighted_moments(data, &col, 1);
                let comp = raw
                    .build(r, &floor)
                    .map(|p| p.components()[0].clone());
                match comp {
                    Ok(c) => {
                        for (row, y) in state.logf.chunks_mut(g).zip(data.rows()) {
                            row[k] = c.ln_pdf(y);
                        }
                        state.comps[k] = c;
                        k += 1;
                    }
                    Err(_) if g > 1 => state.remove(k, n),
                    Err(e) => return Err(e),
                }
            }
            iterations += 1;
            let ll = state.log_lik();
            let mml = mml_criterion(&state.params(), ll, n);
            trace.push(ll);
            if ((prev - mml) / mml.abs().max(1.0)).abs() < tol || iterations >= 2000 {
                let fit = FitResult {
                    params: state.params(),
                    log_lik: ll,
                    converged: iterations < 2000,
                    iterations,
                    trace,
                };
                let g_star = state.g();
                if best.as_ref().is_none_or(|b| mml < b.mml) {
                    best = Some(MmlFit { fit, g_star, mml });
                }
                break;
            }
            prev = mml;
        }
        if state.g() == 1 {
            break;
        }
        let weakest = (0..state.g())
            .min_by(|&a, &b| state.weights[a].total_cmp(&state.weights[b]))
            .expect("G ≥ 1");
        state.remove(weakest, n);
    }
    best.ok_or(MixError::Degenerate("componentwise EM produced no fit".into()))
}
