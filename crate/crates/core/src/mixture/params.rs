use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::numeric::LN_2PI;

/// Gaussian component with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRecord", into = "GaussianRecord")]
pub struct Gaussian {
    mean: Vec<f64>,
    /// Row-major r × r covariance.
    cov: Vec<f64>,
    /// Row-major lower Cholesky factor.
    chol: Vec<f64>,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianRecord {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRecord> for Gaussian {
    type Error = MixError;
    fn try_from(rec: GaussianRecord) -> Result<Self> {
        let r = rec.mean.len();
        if rec.cov.len() != r || rec.cov.iter().any(|row| row.len() != r) {
            return Err(MixError::Dimension("covariance must be r × r".into()));
        }
        Gaussian::new(rec.mean, rec.cov.concat())
    }
}

impl From<Gaussian> for GaussianRecord {
    fn from(g: Gaussian) -> Self {
        let r = g.dim();
        GaussianRecord {
            cov: g.cov.chunks(r).map(<[f64]>::to_vec).collect(),
            mean: g.mean,
        }
    }
}

/// Lower Cholesky factor of a row-major symmetric matrix, `None` unless
/// positive definite.
pub(crate) fn cholesky(a: &[f64], r: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..=i {
            let mut s = a[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * r + i] = s.sqrt();
            } else {
                l[i * r + j] = s / l[j * r + j];
            }
        }
    }
    Some(l)
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let r = mean.len();
        if r == 0 || cov.len() != r * r {
            return Err(MixError::Dimension(format!(
                "mean of length {r} needs a {r}×{r} covariance"
            )));
        }
        if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(MixError::InvalidParams("non-finite component parameter".into()));
        }
        for i in 0..r {
            for j in 0..i {
                let (a, b) = (cov[i * r + j], cov[j * r + i]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(MixError::InvalidParams("covariance is not symmetric".into()));
                }
            }
        }
        let chol = cholesky(&cov, r).ok_or_else(|| {
            MixError::Degenerate("covariance is not positive definite".into())
        })?;
        let log_det_half: f64 = (0..r).map(|i| chol[i * r + i].ln()).sum();
        Ok(Gaussian {
            log_norm: -0.5 * r as f64 * LN_2PI - log_det_half,
            mean,
            cov,
            chol,
        })
    }

    pub fn univariate(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(MixError::Degenerate(format!("variance {var} is not positive")));
        }
        Gaussian::new(vec![mean], vec![var])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    /// Variance of a univariate component (first diagonal entry otherwise).
    pub fn var(&self) -> f64 {
        self.cov[0]
    }

    pub(crate) fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let r = self.dim();
        if r == 1 {
            let d = (x[0] - self.mean[0]) / self.chol[0];
            return self.log_norm - 0.5 * d * d;
        }
        // forward substitution L v = x − μ
        let mut v = [0.0f64; 16];
        let mut heap;
        let v: &mut [f64] = if r <= 16 {
            &mut v[..r]
        } else {
            heap = vec![0.0; r];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..r {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s -= self.chol[i * r + k] * v[k];
            }
            v[i] = s / self.chol[i * r + i];
            quad += v[i] * v[i];
        }
        self.log_norm - 0.5 * quad
    }
}

/// Parameters θ of a finite Gaussian mixture: weights and components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct MixtureParams {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl TryFrom<ParamsRecord> for MixtureParams {
    type Error = MixError;
    fn try_from(rec: ParamsRecord) -> Result<Self> {
        MixtureParams::new(rec.weights, rec.components)
    }
}

impl From<MixtureParams> for ParamsRecord {
    fn from(p: MixtureParams) -> Self {
        ParamsRecord {
            weights: p.weights,
            components: p.components,
        }
    }
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(MixError::InvalidParams(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(MixError::InvalidParams("weights must be finite and ≥ 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MixError::InvalidParams(format!("weights sum to {total}, not 1")));
        }
        let r = components[0].dim();
        if components.iter().any(|c| c.dim() != r) {
            return Err(MixError::Dimension("components differ in dimension".into()));
        }
        Ok(MixtureParams { weights, components })
    }

    /// Builds a univariate mixture from (weight, mean, variance) columns.
    pub fn univariate(weights: &[f64], means: &[f64], vars: &[f64]) -> Result<Self> {
        if means.len() != weights.len() || vars.len() != weights.len() {
            return Err(MixError::Dimension("weights, means and variances differ in length".into()));
        }
        let comps = means
            .iter()
            .zip(vars)
            .map(|(&m, &v)| Gaussian::univariate(m, v))
            .collect::<Result<Vec<_>>>()?;
        MixtureParams::new(weights.to_vec(), comps)
    }

    /// Number of components G.
    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    /// Component means of a univariate mixture.
    pub fn means(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mean()[0]).collect()
    }

    /// Component variances of a univariate mixture.
    pub fn variances(&self) -> Vec<f64> {
        self.components.iter().map(Gaussian::var).collect()
    }

    /// Relabels components so that new component `g` is old component `perm[g]`.
    pub fn permuted(&self, perm: &[usize]) -> MixtureParams {
        MixtureParams {
            weights: perm.iter().map(|&p| self.weights[p]).collect(),
            components: perm.iter().map(|&p| self.components[p].clone()).collect(),
        }
    }

    /// Writes log(η_g f_g(x)) for every g into `out`.
    #[inline]
    pub fn log_weighted_densities(&self, x: &[f64], out: &mut [f64]) {
        for ((o, w), c) in out.iter_mut().zip(&self.weights).zip(&self.components) {
            *o = if *w > 0.0 {
                w.ln() + c.ln_pdf(x)
            } else {
                f64::NEG_INFINITY
            };
        }
    }
}

/// Covariance structure of the component family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceFamily {
    /// Unconstrained covariance per component (univariate: free variance).
    Unconstrained,
}

impl std::str::FromStr for CovarianceFamily {
    type Err = MixError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unconstrained" | "vvv" | "v" => Ok(CovarianceFamily::Unconstrained),
            other => Err(MixError::UnknownFamily(other.to_string())),
        }
    }
}

/// Free parameters of a component θ_g: mean plus covariance.
pub fn component_dim(r: usize, family: CovarianceFamily) -> usize {
    match family {
        CovarianceFamily::Unconstrained => r + r * (r + 1) / 2,
    }
}

/// Number of free parameters υ_G = G(1 + dim θ_g) − 1.
pub fn num_free_params(g: usize, r: usize, family: CovarianceFamily) -> usize {
    assert!(g >= 1 && r >= 1, "G and r must be positive");
    g * (1 + component_dim(r, family)) - 1
}
