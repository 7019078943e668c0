use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};
use crate::mixture::Dataset;
use crate::numeric::{dirichlet_ln_pdf, inv_gamma_ln_pdf, ln_gamma, normal_ln_pdf};

/// Dirichlet concentration of the weight prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Symmetric(f64),
    PerComponent(Vec<f64>),
}

/// Prior on the inverse-gamma scale C₀ of the component variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum C0Prior {
    /// C₀ ~ Gamma(shape, rate).
    Gamma { shape: f64, rate: f64 },
    Fixed { value: f64 },
}

/// How μ_g depends on σ²_g a priori.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComponentPrior {
    /// μ_g ~ N(m, R²) independently of σ²_g.
    Independent,
    /// μ_g | σ²_g ~ N(m, σ²_g/κ).
    Conjugate { kappa: f64 },
}

/// Richardson–Green prior for univariate Gaussian mixtures:
/// η ~ D(e₀), μ_g ~ N(m, R²), σ²_g ~ IG(2, C₀), C₀ ~ Gamma(0.2, 10/R²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RGPrior {
    pub e0: Concentration,
    pub m: f64,
    /// R², the prior variance of the means (independent form).
    pub r2: f64,
    pub ig_shape: f64,
    pub c0: C0Prior,
    pub component: ComponentPrior,
}

/// Conditional posterior moments of one component given the rest of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// μ_g | σ²_g, z, y ~ N(b, bb)
    pub b: f64,
    pub bb: f64,
    /// σ²_g | μ_g, C₀, z, y ~ IG(c, cc)
    pub c: f64,
    pub cc: f64,
}

impl RGPrior {
    /// Default prior with m and R the midpoint and length of the data range.
    pub fn richardson_green(data: &Dataset) -> Result<Self> {
        if data.dim() != 1 {
            return Err(MixError::Unsupported("the Bayesian samplers are univariate".into()));
        }
        let (lo, hi) = data.range();
        let r = hi - lo;
        if !(r > 0.0) {
            return Err(MixError::InvalidData("observations have zero range".into()));
        }
        Ok(RGPrior {
            e0: Concentration::Symmetric(1.0),
            m: 0.5 * (lo + hi),
            r2: r * r,
            ig_shape: 2.0,
            c0: C0Prior::Gamma {
                shape: 0.2,
                rate: 10.0 / (r * r),
            },
            component: ComponentPrior::Independent,
        })
    }

    pub fn with_e0(mut self, e0: f64) -> Self {
        self.e0 = Concentration::Symmetric(e0);
        self
    }

    pub fn with_fixed_c0(mut self, value: f64) -> Self {
        self.c0 = C0Prior::Fixed { value };
        self
    }

    pub fn conjugate(mut self, kappa: f64) -> Self {
        self.component = ComponentPrior::Conjugate { kappa };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let e0_ok = match &self.e0 {
            Concentration::Symmetric(e) => pos(*e),
            Concentration::PerComponent(v) => !v.is_empty() && v.iter().all(|&e| pos(e)),
        };
        let c0_ok = match self.c0 {
            C0Prior::Gamma { shape, rate } => pos(shape) && pos(rate),
            C0Prior::Fixed { value } => pos(value),
        };
        let comp_ok = match self.component {
            ComponentPrior::Independent => true,
            ComponentPrior::Conjugate { kappa } => pos(kappa),
        };
        if !(e0_ok && c0_ok && comp_ok && pos(self.r2) && pos(self.ig_shape) && self.m.is_finite()) {
            return Err(MixError::InvalidParams("prior hyperparameters must be positive".into()));
        }
        Ok(())
    }

    /// Dirichlet parameter vector for G components.
    pub fn alpha(&self, g: usize) -> Result<Vec<f64>> {
        match &self.e0 {
            Concentration::Symmetric(e) => Ok(vec![*e; g]),
            Concentration::PerComponent(v) if v.len() == g => Ok(v.clone()),
            Concentration::PerComponent(v) => Err(MixError::Dimension(format!(
                "{} Dirichlet parameters for G = {g}",
                v.len()
            ))),
        }
    }

    pub(crate) fn c0_start(&self) -> f64 {
        match self.c0 {
            C0Prior::Gamma { shape, rate } => shape / rate,
            C0Prior::Fixed { value } => value,
        }
    }

    /// p(μ_g | σ²_g, z, y) from the sufficient statistics (n_g, Σy, ·).
    #[inline]
    pub fn mu_conditional(&self, n: f64, s1: f64, var: f64) -> (f64, f64) {
        match self.component {
            ComponentPrior::Independent => {
                let bb = 1.0 / (1.0 / self.r2 + n / var);
                (bb * (self.m / self.r2 + s1 / var), bb)
            }
            ComponentPrior::Conjugate { kappa } => {
                let k = kappa + n;
                ((kappa * self.m + s1) / k, var / k)
            }
        }
    }

    /// p(σ²_g | μ_g, C₀, z, y) from the sufficient statistics.
    #[inline]
    pub fn var_conditional(&self, n: f64, s1: f64, s2: f64, mu: f64, c0: f64) -> (f64, f64) {
        let ss = (s2 - 2.0 * mu * s1 + n * mu * mu).max(0.0);
        match self.component {
            ComponentPrior::Independent => (self.ig_shape + 0.5 * n, c0 + 0.5 * ss),
            ComponentPrior::Conjugate { kappa } => {
                let d = mu - self.m;
                (self.ig_shape + 0.5 * (n + 1.0), c0 + 0.5 * (ss + kappa * d * d))
            }
        }
    }

    pub fn moments(&self, n: f64, s1: f64, s2: f64, mu: f64, var: f64, c0: f64) -> Moments {
        let (b, bb) = self.mu_conditional(n, s1, var);
        let (c, cc) = self.var_conditional(n, s1, s2, mu, c0);
        Moments { b, bb, c, cc }
    }

    /// log p(σ²₁, …, σ²_G) with C₀ integrated out of the Gamma hyperprior:
    /// G₀^{g₀} Γ(Ga + g₀) / (Γ(g₀) Γ(a)^G) · Π x_g^{−a−1} / (G₀ + Σ 1/x_g)^{Ga+g₀}.
    pub fn log_marginal_var_prior(&self, vars: &[f64]) -> f64 {
        let a = self.ig_shape;
        match self.c0 {
            C0Prior::Fixed { value } => vars.iter().map(|&v| inv_gamma_ln_pdf(v, a, value)).sum(),
            C0Prior::Gamma { shape, rate } => {
                if vars.iter().any(|&v| !(v > 0.0)) {
                    return f64::NEG_INFINITY;
                }
                let g = vars.len() as f64;
                let inv: f64 = vars.iter().map(|v| 1.0 / v).sum();
                let logs: f64 = vars.iter().map(|v| v.ln()).sum();
                shape * rate.ln() + ln_gamma(g * a + shape)
                    - ln_gamma(shape)
                    - g * ln_gamma(a)
                    - (a + 1.0) * logs
                    - (g * a + shape) * (rate + inv).ln()
            }
        }
    }

    /// log p(θ) for univariate parameters, with C₀ integrated out under
    /// the Gamma hyperprior.
    pub fn log_prior(&self, weights: &[f64], means: &[f64], vars: &[f64]) -> f64 {
        let alpha = match self.alpha(weights.len()) {
            Ok(a) => a,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut lp = dirichlet_ln_pdf(weights, &alpha) + self.log_marginal_var_prior(vars);
        for (&mu, &v) in means.iter().zip(vars) {
            lp += match self.component {
                ComponentPrior::Independent => normal_ln_pdf(mu, self.m, self.r2),
                ComponentPrior::Conjugate { kappa } => normal_ln_pdf(mu, self.m, v / kappa),
            };
        }
        lp
    }

    #[cfg(test)]
    pub(crate) fn c0_log_density(&self, c0: f64) -> f64 {
        match self.c0 {
            C0Prior::Gamma { shape, rate } => crate::numeric::gamma_ln_pdf(c0, shape, rate),
            C0Prior::Fixed { .. } => 0.0,
        }
    }
}
