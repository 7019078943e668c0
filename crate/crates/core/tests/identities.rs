//! Algebraic identities that hold for every parameter value, checked on
//! random instances.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixorder::criteria::{aic, aic3, bic, icl_bic, icl_bic_map, lcc_icl, num_params};
use mixorder::em::{bem_fit, em_fit, EmOptions};
use mixorder::mixture::{
    classification_matrix, ec_term, entropy, log_complete_likelihood, log_obs_likelihood, simulate,
};
use mixorder::{AllocationVector, ClassificationMatrix, Dataset, FitResult, Gaussian, MixtureParams};

fn random_params(rng: &mut ChaCha8Rng, g: usize, r: usize) -> MixtureParams {
    let raw: Vec<f64> = (0..g).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let comps = (0..g)
        .map(|_| {
            let mean: Vec<f64> = (0..r).map(|_| rng.random_range(-4.0..4.0)).collect();
            // A Aᵀ + I is positive definite
            let a: Vec<f64> = (0..r * r).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut cov = vec![0.0; r * r];
            for i in 0..r {
                for j in 0..r {
                    cov[i * r + j] = (0..r).map(|k| a[i * r + k] * a[j * r + k]).sum::<f64>()
                        + if i == j { 0.5 } else { 0.0 };
                }
            }
            Gaussian::new(mean, cov).unwrap()
        })
        .collect();
    MixtureParams::new(raw.iter().map(|w| w / s).collect(), comps).unwrap()
}

#[test]
fn complete_plus_entropy_term_is_observed_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for inst in 0..100 {
        let g = rng.random_range(1..=5);
        let r = rng.random_range(1..=3);
        let p = random_params(&mut rng, g, r);
        let (y, _) = simulate(&p, 60, inst);
        let z = AllocationVector::new((0..60).map(|_| rng.random_range(0..g)).collect(), g).unwrap();
        let lo = log_obs_likelihood(&p, &y).unwrap();
        let lc = log_complete_likelihood(&p, &z, &y).unwrap();
        let ec = ec_term(&p, &z, &y).unwrap();
        assert!((lc + ec - lo).abs() < 1e-10 * lo.abs().max(1.0), "instance {inst}: {lc} + {ec} vs {lo}");
    }
}

#[test]
fn entropy_bounds_and_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let g = rng.random_range(2..=4);
        let p = random_params(&mut rng, g, 1);
        let (y, z) = simulate(&p, 40, rng.random());
        let e = entropy(&classification_matrix(&p, &y).unwrap());
        assert!(e >= 0.0 && e <= 40.0 * (g as f64).ln() + 1e-9);
        assert_eq!(entropy(&ClassificationMatrix::from_allocation(&z)), 0.0);
    }
    // identical components with equal weights: τ uniform, ENT = n log G
    let p = MixtureParams::univariate(&[1.0 / 3.0; 3], &[0.0; 3], &[1.0; 3]).unwrap();
    let y = Dataset::univariate("u", vec![-1.0, 0.3, 2.0, 0.9]).unwrap();
    let e = entropy(&classification_matrix(&p, &y).unwrap());
    assert!((e - 4.0 * 3f64.ln()).abs() < 1e-12);
}

fn fit_for(p: &MixtureParams, y: &Dataset) -> FitResult {
    FitResult {
        params: p.clone(),
        log_lik: log_obs_likelihood(p, y).unwrap(),
        converged: true,
        iterations: 0,
        trace: vec![],
    }
}

#[test]
fn icl_bic_exceeds_bic_by_twice_the_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let g = rng.random_range(1..=4);
        let r = rng.random_range(1..=2);
        let p = random_params(&mut rng, g, r);
        let (y, _) = simulate(&p, 80, rng.random());
        let f = fit_for(&p, &y);
        let ent = entropy(&classification_matrix(&p, &y).unwrap());
        let icl = icl_bic(&f, &y).unwrap();
        assert!((icl - bic(&f, y.n()) - 2.0 * ent).abs() < 1e-8);
        assert!(icl >= bic(&f, y.n()) - 1e-12);
        // the hard-assignment path never exceeds the entropy path
        assert!(icl_bic_map(&f, &y).unwrap() <= icl + 1e-8);
        assert!((bic(&f, y.n()) - aic(&f) - num_params(&p) as f64 * ((y.n() as f64).ln() - 2.0)).abs() < 1e-9);
        assert!((aic3(&f) - aic(&f) - num_params(&p) as f64).abs() < 1e-9);
    }
}

#[test]
fn icl_paths_agree_on_separated_components() {
    let p = MixtureParams::univariate(&[0.5, 0.5], &[-50.0, 50.0], &[1.0, 1.0]).unwrap();
    let (y, _) = simulate(&p, 200, 3);
    let f = fit_for(&p, &y);
    let icl = icl_bic(&f, &y).unwrap();
    assert!((icl - bic(&f, y.n())).abs() < 1e-6);
    assert!((icl - icl_bic_map(&f, &y).unwrap()).abs() < 1e-6);
}

#[test]
fn lcc_icl_of_one_component_is_half_bic() {
    let (y, _) = simulate(&MixtureParams::univariate(&[1.0], &[2.0], &[3.0]).unwrap(), 50, 1);
    let f = em_fit(&y, 1, &EmOptions::with_seed(1)).unwrap();
    assert!((lcc_icl(&f, &y).unwrap() - 0.5 * bic(&f, y.n())).abs() < 1e-9);
}

#[test]
fn em_and_bem_traces_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..10 {
        let g = rng.random_range(2..=3);
        let p = random_params(&mut rng, g, 1 + k % 2);
        let (y, _) = simulate(&p, 150, k as u64);
        let opts = EmOptions {
            restarts: 2,
            ..EmOptions::with_seed(k as u64)
        };
        let f = em_fit(&y, g, &opts).unwrap();
        assert!(f.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()), "EM trace {k}");
        let b = bem_fit(&y, g, &opts).unwrap();
        assert!(b.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()), "BEM trace {k}");
        assert!(lcc_icl(&f, &y).unwrap() >= lcc_icl(&b, &y).unwrap() - 1e-9);
    }
}

#[test]
fn seeded_fits_are_bit_identical() {
    let p = MixtureParams::univariate(&[0.3, 0.7], &[0.0, 3.0], &[1.0, 0.5]).unwrap();
    let (y, _) = simulate(&p, 120, 8);
    let a = em_fit(&y, 2, &EmOptions::with_seed(4)).unwrap();
    let b = em_fit(&y, 2, &EmOptions::with_seed(4)).unwrap();
    assert_eq!(a, b);
    let (y2, z2) = simulate(&p, 120, 8);
    assert_eq!(y.values(), y2.values());
    assert_eq!(z2.labels().len(), 120);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criteria_ignore_component_labels(seed in 0u64..10_000, g in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, g, 1);
        let (y, _) = simulate(&p, 40, seed);
        let mut perm: Vec<usize> = (0..g).collect();
        perm.rotate_left(1);
        let q = p.permuted(&perm);
        let (f, h) = (fit_for(&p, &y), fit_for(&q, &y));
        prop_assert!((bic(&f, 40) - bic(&h, 40)).abs() < 1e-9);
        prop_assert!((icl_bic(&f, &y).unwrap() - icl_bic(&h, &y).unwrap()).abs() < 1e-9);
        prop_assert!((lcc_icl(&f, &y).unwrap() - lcc_icl(&h, &y).unwrap()).abs() < 1e-9);
    }
}
