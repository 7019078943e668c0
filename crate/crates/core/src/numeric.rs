//! Log-domain arithmetic, standard log-densities and variate helpers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// log(Σ exp(xᵢ)); −∞ for an empty slice or when every term is −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// log(eᵃ + eᵇ)
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Inverse-gamma IG(shape, scale) log-density: scale^shape / Γ(shape) x^{-shape-1} e^{-scale/x}.
#[inline]
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Gamma(shape, rate) log-density.
#[inline]
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Dirichlet log-density at `weights` with concentration `alpha`.
pub fn dirichlet_ln_pdf(weights: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), alpha.len());
    let total: f64 = alpha.iter().sum();
    let mut out = ln_gamma(total);
    for (&w, &a) in weights.iter().zip(alpha) {
        out -= ln_gamma(a);
        if a != 1.0 {
            if w <= 0.0 {
                return if a > 1.0 { f64::NEG_INFINITY } else { f64::INFINITY };
            }
            out += (a - 1.0) * w.ln();
        }
    }
    out
}

/// log of a Gamma(shape, 1) variate, accurate for very small shapes
/// where the variate itself underflows.
pub fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("gamma shape must be positive");
        g.sample(rng).ln()
    } else {
        // X = Y U^{1/a}, Y ~ Gamma(a + 1)
        let g = Gamma::new(shape + 1.0, 1.0).expect("gamma shape must be positive");
        let u: f64 = rng.random::<f64>();
        g.sample(rng).ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// Dirichlet draw computed in log space; entries may underflow to exactly 0.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_variate(rng, a)).collect();
    let norm = log_sum_exp(&logs);
    logs.iter().map(|&l| (l - norm).exp()).collect()
}

/// Beta(a, b) draw via the gamma ratio, robust for tiny parameters.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let la = ln_gamma_variate(rng, a);
    let lb = ln_gamma_variate(rng, b);
    let hi = la.max(lb);
    let ea = (la - hi).exp();
    let eb = (lb - hi).exp();
    ea / (ea + eb)
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// Gamma(shape, rate) variate.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0)
        .expect("gamma shape must be positive")
        .sample(rng)
        / rate
}

/// IG(shape, scale) variate.
pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    scale
        / Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive")
            .sample(rng)
}

/// Draw an index from unnormalized log-probabilities.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_p: &[f64]) -> usize {
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_p.iter().map(|&l| (l - max).exp()).sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (k, &l) in log_p.iter().enumerate() {
        cum += (l - max).exp();
        if u < cum {
            return k;
        }
    }
    log_p.len() - 1
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0).max(1.0)
}

/// Standard error of the mean of an autocorrelated series by
/// non-overlapping batch means (⌊√n⌋ batches).
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return (variance(xs) / n as f64).sqrt();
    }
    let batches = (n as f64).sqrt().floor() as usize;
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&xs[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Ratio of the batch-means variance of the mean to the naive iid variance
/// of the mean; approximates the normalized spectral density at zero.
pub fn autocorrelation_factor(xs: &[f64]) -> f64 {
    let v = variance(xs);
    if v <= 0.0 {
        return 1.0;
    }
    let bm = batch_means_se(xs);
    (bm * bm * xs.len() as f64 / v).max(1.0)
}

/// 64-bit mixing function used to derive independent seeds.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
