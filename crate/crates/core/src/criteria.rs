//! Order-selection criteria, all stored in minimize form.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::em::{em_fit, split_heaviest, EmOptions, FitResult, InitPolicy};
use crate::error::{MixError, Result};
use crate::gibbs::{posterior_mode, GibbsOutput};
use crate::mixture::{
    classification_matrix, entropy, log_complete_likelihood, map_partition, num_free_params, simulate,
    CovarianceFamily, Dataset, MixtureParams,
};
use crate::numeric::{batch_means_se, derive_seed, log_sum_exp, mean, normal_ln_pdf};

const TAG_BOOT: u64 = 0x626f6f74;

/// Free parameters υ_G of a fitted unconstrained Gaussian mixture.
pub fn num_params(params: &MixtureParams) -> usize {
    num_free_params(params.g(), params.dim(), CovarianceFamily::Unconstrained)
}

pub fn aic(fit: &FitResult) -> f64 {
    -2.0 * fit.log_lik + 2.0 * num_params(&fit.params) as f64
}

pub fn bic(fit: &FitResult, n: usize) -> f64 {
    -2.0 * fit.log_lik + num_params(&fit.params) as f64 * (n as f64).ln()
}

pub fn aic3(fit: &FitResult) -> f64 {
    -2.0 * fit.log_lik + 3.0 * num_params(&fit.params) as f64
}

/// BIC + 2·ENT(θ̂).
pub fn icl_bic(fit: &FitResult, data: &Dataset) -> Result<f64> {
    let tau = classification_matrix(&fit.params, data)?;
    Ok(bic(fit, data.n()) + 2.0 * entropy(&tau))
}

/// −2 ℓ_c(θ̂, ẑ) + υ_G log n with ẑ the MAP allocation. Agrees with
/// [`icl_bic`] when the classification is hard and never exceeds it.
pub fn icl_bic_map(fit: &FitResult, data: &Dataset) -> Result<f64> {
    let z = map_partition(&classification_matrix(&fit.params, data)?);
    let lc = log_complete_likelihood(&fit.params, &z, data)?;
    Ok(-2.0 * lc + num_params(&fit.params) as f64 * (data.n() as f64).ln())
}

/// −log L_cc(θ) + (υ_G/2) log n, with log L_cc = ℓ_O − ENT.
pub fn lcc_icl(fit: &FitResult, data: &Dataset) -> Result<f64> {
    let tau = classification_matrix(&fit.params, data)?;
    Ok(-(fit.log_lik - entropy(&tau)) + 0.5 * num_params(&fit.params) as f64 * (data.n() as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Aic3,
    IclBic,
    LccIcl,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Aic,
        Criterion::Bic,
        Criterion::Aic3,
        Criterion::IclBic,
        Criterion::LccIcl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Bic => "BIC",
            Criterion::Aic3 => "AIC3",
            Criterion::IclBic => "ICLbic",
            Criterion::LccIcl => "Lcc-ICL",
        }
    }

    /// Evaluates the criterion; [`Criterion::LccIcl`] expects a fit from `bem_fit`.
    pub fn evaluate(self, fit: &FitResult, data: &Dataset) -> Result<f64> {
        Ok(match self {
            Criterion::Aic => aic(fit),
            Criterion::Bic => bic(fit, data.n()),
            Criterion::Aic3 => aic3(fit),
            Criterion::IclBic => icl_bic(fit, data)?,
            Criterion::LccIcl => lcc_icl(fit, data)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub values: BTreeMap<usize, f64>,
    #[serde(rename = "selected_G")]
    pub selected_g: usize,
    pub aux: Value,
}

impl CriterionReport {
    /// Selects the argmin; ties go to the smaller G and NaNs are skipped.
    pub fn from_values(criterion: impl Into<String>, values: BTreeMap<usize, f64>) -> Result<Self> {
        let selected_g = argmin(&values)
            .ok_or_else(|| MixError::InvalidParams("no finite criterion values".into()))?;
        Ok(CriterionReport {
            criterion: criterion.into(),
            values,
            selected_g,
            aux: Value::Object(Default::default()),
        })
    }
}

fn argmin(values: &BTreeMap<usize, f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&g, &v) in values {
        if v.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((g, v));
        }
    }
    best.map(|(g, _)| g)
}

/// Evaluates one criterion over a family of fits.
pub fn report(criterion: Criterion, fits: &BTreeMap<usize, FitResult>, data: &Dataset) -> Result<CriterionReport> {
    let values = fits
        .iter()
        .map(|(&g, f)| Ok((g, criterion.evaluate(f, data)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    CriterionReport::from_values(criterion.name(), values)
}

/// Least-absolute-deviations line y ≈ a + b x, found by enumerating the
/// lines through pairs of points (an optimum always passes through two).
fn lad_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] {
                continue;
            }
            let b = (y[j] - y[i]) / (x[j] - x[i]);
            let a = y[i] - b * x[i];
            let loss: f64 = x.iter().zip(y).map(|(xk, yk)| (yk - a - b * xk).abs()).sum();
            if best.map_or(true, |(_, _, l)| loss < l) {
                best = Some((a, b, loss));
            }
        }
    }
    best.map(|(a, b, _)| (a, b))
}

/// Slope heuristics: κ̂ is the slope of ℓ_O against υ_G over the `window`
/// most complex models (default: the top half), and SH(G) = −ℓ_O + 2κ̂υ_G.
pub fn slope_heuristics(
    fits: &BTreeMap<usize, FitResult>,
    complexities: &BTreeMap<usize, usize>,
    window: Option<usize>,
) -> Result<CriterionReport> {
    let mut pts: Vec<(usize, f64, f64)> = fits
        .iter()
        .map(|(&g, f)| {
            let u = complexities
                .get(&g)
                .ok_or_else(|| MixError::InvalidParams(format!("no complexity for G = {g}")))?;
            Ok((g, *u as f64, f.log_lik))
        })
        .collect::<Result<_>>()?;
    let k = pts.len();
    let window = window.unwrap_or(k / 2);
    if window < 2 || window > k {
        return Err(MixError::InvalidParams(format!(
            "slope window {window} needs between 2 and {k} models"
        )));
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let tail = &pts[k - window..];
    let x: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.2).collect();
    let (a, kappa) =
        lad_line(&x, &y).ok_or_else(|| MixError::InvalidParams("window has a single complexity".into()))?;
    if !(kappa > 0.0) {
        return Err(MixError::BiasNotStationary { kappa });
    }
    let ybar = mean(&y);
    let ss_tot: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(xi, yi)| (yi - a - kappa * xi).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let values = pts.iter().map(|&(g, u, l)| (g, -l + 2.0 * kappa * u)).collect();
    let mut rep = CriterionReport::from_values("SH", values)?;
    rep.aux = json!({
        "kappa": kappa,
        "intercept": a,
        "r2": r2,
        "window_G": tail.iter().map(|p| p.0).collect::<Vec<_>>(),
    });
    Ok(rep)
}

/// ℓ_O and ENT of a univariate mixture in one pass.
fn loglik_and_entropy(y: &[f64], eta: &[f64], mu: &[f64], var: &[f64], buf: &mut [f64]) -> (f64, f64) {
    let mut ll = 0.0;
    let mut ent = 0.0;
    for &v in y {
        for k in 0..eta.len() {
            buf[k] = eta[k].ln() + normal_ln_pdf(v, mu[k], var[k]);
        }
        let norm = log_sum_exp(buf);
        ll += norm;
        for &l in buf.iter() {
            let lt = l - norm;
            if lt > f64::NEG_INFINITY {
                ent -= lt.exp() * lt;
            }
        }
    }
    (ll, ent)
}

/// Minimum post-burn-in draws for the DIC averages.
pub const MIN_DIC_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    pub dic2: f64,
    pub dic4a: f64,
    /// Monte Carlo standard errors by batch means.
    pub se_dic2: f64,
    pub se_dic4a: f64,
    /// Index of the draw used as the posterior-mode surrogate.
    pub mode_draw: usize,
}

/// DIC₂ = −4 Ê[ℓ_O(θ)] + 2 ℓ_O(θ̂) and DIC₄ₐ = DIC₂ + 2 Ê[ENT(θ)], with θ̂
/// the draw maximizing log p(y|θ) + log p(θ). Both integrands are label
/// invariant, so raw label-switching output can be used directly.
pub fn dic(output: &GibbsOutput, data: &Dataset) -> Result<Dic> {
    if output.draws < MIN_DIC_DRAWS {
        return Err(MixError::InvalidParams(format!(
            "DIC needs at least {MIN_DIC_DRAWS} draws (got {})",
            output.draws
        )));
    }
    if data.dim() != 1 || data.n() != output.n {
        return Err(MixError::Dimension("chain does not match the data".into()));
    }
    let (mode_draw, _) = posterior_mode(output)?;
    let y = data.values();
    let mut buf = vec![0.0; output.g];
    let mut ll = Vec::with_capacity(output.draws);
    let mut ent = Vec::with_capacity(output.draws);
    for m in 0..output.draws {
        let (l, e) = loglik_and_entropy(y, output.weights_at(m), output.means_at(m), output.vars_at(m), &mut buf);
        ll.push(l);
        ent.push(e);
    }
    let dic2 = -4.0 * mean(&ll) + 2.0 * ll[mode_draw];
    let dic4a = dic2 + 2.0 * mean(&ent);
    let joint: Vec<f64> = ll.iter().zip(&ent).map(|(l, e)| -4.0 * l + 2.0 * e).collect();
    Ok(Dic {
        dic2,
        dic4a,
        se_dic2: 4.0 * batch_means_se(&ll),
        se_dic4a: batch_means_se(&joint),
        mode_draw,
    })
}

pub fn dic2(output: &GibbsOutput, data: &Dataset) -> Result<f64> {
    Ok(dic(output, data)?.dic2)
}

pub fn dic4a(output: &GibbsOutput, data: &Dataset) -> Result<f64> {
    Ok(dic(output, data)?.dic4a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapLrt {
    pub g0: usize,
    pub g1: usize,
    pub lrs_obs: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Empirical (1 − α) quantile of the bootstrap LRS.
    pub critical_value: f64,
    pub lrs: Vec<f64>,
    /// Replicates redrawn after an EM failure.
    pub redrawn: usize,
}

/// Attempts per bootstrap replicate before giving up.
const MAX_REDRAWS: usize = 20;

fn nested_fit(data: &Dataset, g1: usize, null: &MixtureParams, opts: &EmOptions) -> Result<FitResult> {
    let mut start = null.clone();
    while start.g() < g1 {
        start = split_heaviest(&start)?;
    }
    let alt = em_fit(
        data,
        g1,
        &EmOptions {
            init: InitPolicy::Params(start),
            ..opts.clone()
        },
    )?;
    Ok(alt)
}

fn lrs(data: &Dataset, g0: usize, g1: usize, opts: &EmOptions) -> Result<(FitResult, f64)> {
    let null = em_fit(data, g0, opts)?;
    let alt = nested_fit(data, g1, &null.params, opts)?;
    let v = (2.0 * (alt.log_lik - null.log_lik)).max(0.0);
    Ok((null, v))
}

/// Parametric bootstrap test of H₀: G = g0 against H₁: G = g1, with
/// `opts` controlling every EM fit (its seed seeds the whole test).
pub fn bootstrap_lrt(data: &Dataset, g0: usize, g1: usize, b: usize, alpha: f64, opts: &EmOptions) -> Result<BootstrapLrt> {
    if g0 == 0 || g0 >= g1 {
        return Err(MixError::InvalidParams(format!("need 1 ≤ G0 < G1 (got {g0}, {g1})")));
    }
    if b < 99 {
        return Err(MixError::InvalidParams(format!("B = {b} < 99")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MixError::InvalidParams(format!("alpha = {alpha}")));
    }
    let (null, lrs_obs) = lrs(data, g0, g1, opts)?;
    let reps: Vec<Result<(f64, usize)>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            for attempt in 0..MAX_REDRAWS {
                let s = derive_seed(opts.seed, TAG_BOOT, (rep * MAX_REDRAWS + attempt) as u64);
                let (yb, _) = simulate(&null.params, data.n(), s);
                let o = EmOptions {
                    seed: s,
                    ..opts.clone()
                };
                match lrs(&yb, g0, g1, &o) {
                    Ok((_, v)) => return Ok((v, attempt)),
                    Err(e) if e.is_numerical() => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(MixError::AllRestartsFailed { restarts: MAX_REDRAWS })
        })
        .collect();
    let mut lrs_b = Vec::with_capacity(b);
    let mut redrawn = 0;
    for r in reps {
        let (v, a) = r?;
        lrs_b.push(v);
        redrawn += a;
    }
    if redrawn > 0 {
        log::warn!("bootstrap LRT: {redrawn} replicates redrawn after EM failures");
    }
    let exceed = lrs_b.iter().filter(|&&v| v >= lrs_obs).count();
    let mut sorted = lrs_b.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b) - 1;
    let critical_value = sorted[idx];
    Ok(BootstrapLrt {
        g0,
        g1,
        lrs_obs,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        reject: lrs_obs > critical_value,
        alpha,
        critical_value,
        lrs: lrs_b,
        redrawn,
    })
}

/// Seeded helper for callers that only need the verdict.
pub fn bootstrap_lrt_seeded(data: &Dataset, g0: usize, g1: usize, b: usize, alpha: f64, seed: u64) -> Result<(f64, bool)> {
    let r = bootstrap_lrt(data, g0, g1, b, alpha, &EmOptions::with_seed(seed))?;
    Ok((r.p_value, r.reject))
}
