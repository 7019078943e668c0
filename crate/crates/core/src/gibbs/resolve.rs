use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GibbsOutput;
use crate::assignment::min_cost_assignment;
use crate::error::{MixError, Result};
use crate::kmeans::kmeans;
use crate::mixture::MixtureParams;
use crate::numeric::{derive_seed, mean, variance};

const TAG_KMEANS: u64 = 0x6b6d;

/// Identifies the components of a chain by k-means clustering of the
/// pooled (μ_g, σ_g) draws, then relabels each sweep with the minimum-cost
/// assignment of its G points to the cluster centres. Clusters are named
/// so that the most frequent assignment is the identity.
pub fn resolve_labels(output: &GibbsOutput, seed: u64) -> Result<GibbsOutput> {
    let mut out = output.clone();
    out.resolved = true;
    let g = output.g;
    if g == 1 {
        return Ok(out);
    }
    let sds: Vec<f64> = output.vars.iter().map(|v| v.sqrt()).collect();
    let (m_mu, s_mu) = (mean(&output.means), variance(&output.means).sqrt().max(1e-300));
    let (m_sd, s_sd) = (mean(&sds), variance(&sds).sqrt().max(1e-300));
    let points: Vec<f64> = output
        .means
        .iter()
        .zip(&sds)
        .flat_map(|(mu, sd)| [(mu - m_mu) / s_mu, (sd - m_sd) / s_sd])
        .collect();

    let mut centers = None;
    for attempt in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_KMEANS, attempt));
        if let Ok(km) = kmeans(&points, 2, g, &mut rng, 200) {
            centers = Some(km.centers);
            break;
        }
    }
    let centers = centers.ok_or_else(|| {
        MixError::Degenerate("k-means left a cluster empty in 10 attempts".into())
    })?;

    let mut assign = Vec::with_capacity(output.draws);
    let mut freq = vec![0.0; g * g];
    let mut cost = vec![0.0; g * g];
    for m in 0..output.draws {
        for k in 0..g {
            let p = &points[(m * g + k) * 2..(m * g + k) * 2 + 2];
            for h in 0..g {
                let c = &centers[h * 2..h * 2 + 2];
                cost[k * g + h] = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            }
        }
        let a = min_cost_assignment(&cost, g);
        for (k, &h) in a.iter().enumerate() {
            freq[k * g + h] -= 1.0;
        }
        assign.push(a);
    }
    // name[h]: final label of cluster h
    let name_of_row = min_cost_assignment(&freq, g);
    let mut name = vec![0; g];
    for (label, &h) in name_of_row.iter().enumerate() {
        name[h] = label;
    }
    let mut perm = vec![0; g];
    for (m, a) in assign.iter().enumerate() {
        for (k, &h) in a.iter().enumerate() {
            perm[name[h]] = k;
        }
        out.permute_draw(m, &perm);
    }
    Ok(out)
}

/// Index and parameters of the draw maximizing log p(y|θ) + log p(θ);
/// the lowest index wins ties.
pub fn posterior_mode(output: &GibbsOutput) -> Result<(usize, MixtureParams)> {
    let mut best = 0;
    for m in 1..output.draws {
        if output.log_posterior(m) > output.log_posterior(best) {
            best = m;
        }
    }
    Ok((best, output.params(best)?))
}

/// (posterior-mode surrogate, posterior mean of the identified components).
///
/// The mean needs a resolved chain; with G = 1 there is nothing to resolve.
pub fn point_estimates(output: &GibbsOutput) -> Result<(MixtureParams, MixtureParams)> {
    if !output.resolved && output.g > 1 {
        return Err(MixError::InvalidParams(
            "posterior means need identified labels; run resolve_labels first".into(),
        ));
    }
    let (_, mode) = posterior_mode(output)?;
    let g = output.g;
    let avg = |v: &[f64]| -> Vec<f64> {
        (0..g)
            .map(|k| v.iter().skip(k).step_by(g).sum::<f64>() / output.draws as f64)
            .collect()
    };
    let mut w = avg(&output.weights);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mean_params = MixtureParams::univariate(&w, &avg(&output.means), &avg(&output.vars))?;
    Ok((mode, mean_params))
}
