//! Mixture densities, likelihoods, classification probabilities and simulation.
//!
//! Everything is computed in the log domain; raw density products never
//! appear, so data sets of a few hundred points stay finite.

mod data;
pub mod datasets;
mod params;
mod partition;

pub use data::Dataset;
pub use params::{component_dim, num_free_params, CovarianceFamily, Gaussian, MixtureParams};
pub use partition::{AllocationVector, ClassificationMatrix};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MixError, Result};
use crate::numeric::log_sum_exp;

fn check_dims(params: &MixtureParams, data: &Dataset) -> Result<()> {
    if params.dim() != data.dim() {
        return Err(MixError::Dimension(format!(
            "parameters of dimension {} for data of dimension {}",
            params.dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// n × G matrix of log(η_g f_g(y_i | θ_g)), row-major.
pub fn log_weighted_density_matrix(params: &MixtureParams, data: &Dataset) -> Result<Vec<f64>> {
    check_dims(params, data)?;
    let g = params.g();
    let mut out = vec![0.0; data.n() * g];
    for (row, y) in out.chunks_mut(g).zip(data.rows()) {
        params.log_weighted_densities(y, row);
    }
    Ok(out)
}

/// Observed-data log likelihood ℓ_O(θ) = Σᵢ log Σ_g η_g f_g(yᵢ | θ_g).
pub fn log_obs_likelihood(params: &MixtureParams, data: &Dataset) -> Result<f64> {
    check_dims(params, data)?;
    let mut buf = vec![0.0; params.g()];
    let mut total = 0.0;
    for y in data.rows() {
        params.log_weighted_densities(y, &mut buf);
        total += log_sum_exp(&buf);
    }
    if !total.is_finite() {
        return Err(MixError::Degenerate(format!(
            "observed-data log likelihood is {total}"
        )));
    }
    Ok(total)
}

fn check_allocation(params: &MixtureParams, z: &AllocationVector, data: &Dataset) -> Result<()> {
    if z.g() != params.g() || z.n() != data.n() {
        return Err(MixError::Dimension(format!(
            "allocation ({} labels over {} components) does not match {} observations and {} components",
            z.n(),
            z.g(),
            data.n(),
            params.g()
        )));
    }
    Ok(())
}

/// Complete-data log likelihood ℓ_c(θ, z) = Σᵢ log(η_{zᵢ} f_{zᵢ}(yᵢ)).
///
/// Returns −∞ when some observation is allocated to a component of zero weight.
pub fn log_complete_likelihood(
    params: &MixtureParams,
    z: &AllocationVector,
    data: &Dataset,
) -> Result<f64> {
    check_dims(params, data)?;
    check_allocation(params, z, data)?;
    let w = params.weights();
    let mut total = 0.0;
    for (y, &l) in data.rows().zip(z.labels()) {
        if w[l] <= 0.0 {
            log::warn!("observation allocated to a component with zero weight");
            return Ok(f64::NEG_INFINITY);
        }
        total += w[l].ln() + params.components()[l].ln_pdf(y);
    }
    Ok(total)
}

/// τ_ig = η_g f_g(yᵢ) / Σ_j η_j f_j(yᵢ).
pub fn classification_matrix(params: &MixtureParams, data: &Dataset) -> Result<ClassificationMatrix> {
    let mut tau = log_weighted_density_matrix(params, data)?;
    let g = params.g();
    for (i, row) in tau.chunks_mut(g).enumerate() {
        let norm = log_sum_exp(row);
        if !norm.is_finite() {
            return Err(MixError::Underflow { index: i });
        }
        for t in row.iter_mut() {
            *t = (*t - norm).exp();
        }
    }
    ClassificationMatrix::new(data.n(), g, tau)
}

#[inline]
fn xlogx(t: f64) -> f64 {
    if t > 0.0 {
        t * t.ln()
    } else {
        0.0
    }
}

/// ENT(τ) = −Σ τ log τ with 0·log 0 = 0.
pub fn entropy(tau: &ClassificationMatrix) -> f64 {
    -tau.as_slice().iter().map(|&t| xlogx(t)).sum::<f64>()
}

/// EC(θ, z) = −Σᵢ log τ_{i,zᵢ}; +∞ when some τ_{i,zᵢ} is zero.
pub fn ec_term(params: &MixtureParams, z: &AllocationVector, data: &Dataset) -> Result<f64> {
    check_allocation(params, z, data)?;
    let logs = log_weighted_density_matrix(params, data)?;
    let g = params.g();
    let mut total = 0.0;
    for (row, &l) in logs.chunks(g).zip(z.labels()) {
        let log_tau = row[l] - log_sum_exp(row);
        if log_tau == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        total -= log_tau;
    }
    Ok(total.max(0.0))
}

/// MAP allocation; ties resolve to the lowest component index.
pub fn map_partition(tau: &ClassificationMatrix) -> AllocationVector {
    let labels = (0..tau.n())
        .map(|i| {
            let row = tau.row(i);
            let mut best = 0;
            for (g, &t) in row.iter().enumerate() {
                if t > row[best] {
                    best = g;
                }
            }
            best
        })
        .collect();
    AllocationVector::new(labels, tau.g()).expect("argmax labels are in range")
}

/// Draws (y, z) from the two-level hierarchy zᵢ ~ MulNom(1, η), yᵢ | zᵢ ~ f_{zᵢ}.
pub fn simulate(params: &MixtureParams, n: usize, seed: u64) -> (Dataset, AllocationVector) {
    assert!(n >= 1, "need at least one observation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = params.dim();
    let mut values = Vec::with_capacity(n * r);
    let mut labels = Vec::with_capacity(n);
    let w = params.weights();
    let mut eps = vec![0.0; r];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut l = w.len() - 1;
        for (g, &wg) in w.iter().enumerate() {
            cum += wg;
            if u < cum {
                l = g;
                break;
            }
        }
        // skip zero-weight tail components hit by rounding
        while w[l] == 0.0 && l > 0 {
            l -= 1;
        }
        labels.push(l);
        let comp = &params.components()[l];
        let chol = comp.chol();
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        for a in 0..r {
            let mut v = comp.mean()[a];
            for b in 0..=a {
                v += chol[a * r + b] * eps[b];
            }
            values.push(v);
        }
    }
    let data = Dataset::new("simulated", r, values).expect("finite simulated values");
    let z = AllocationVector::new(labels, params.g()).expect("labels in range");
    (data, z)
}
