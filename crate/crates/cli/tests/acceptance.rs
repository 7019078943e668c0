//! End-to-end acceptance runs. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mixorder::criteria::{bootstrap_lrt, dic, icl_bic, num_params, report, slope_heuristics, Criterion, bic};
use mixorder::em::{bem_fit, em_fit, EmOptions};
use mixorder::gibbs::{run_chain, ChainOptions, RGPrior};
use mixorder::marglik::{
    brute_force_evidence, build_density_full, estimate_all, estimate_chib, posterior_odds, EvidenceEstimate, GPrior,
};
use mixorder::mixture::{
    classification_matrix, datasets, ec_term, entropy, log_complete_likelihood, log_obs_likelihood, simulate,
};
use mixorder::sparse::{
    binder_partition, dp_partition_prior, gplus_posterior, partition_prior_finite, pred_prob_dp, pred_prob_finite,
    pred_prob_pyp, pyp_partition_prior, run_sparse_chain, E0Mode, SparsePriorConfig,
};
use mixorder::{AllocationVector, ClassificationMatrix, Dataset, FitResult, Gaussian, MixtureParams};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// FAIL lines still report the parts that passed.
fn summarize(failures: Vec<String>, notes: Vec<String>) -> Outcome {
    match (failures.is_empty(), notes.is_empty()) {
        (true, _) => Ok(notes.join("; ")),
        (false, true) => Err(failures.join("; ")),
        (false, false) => Err(format!("{}; passing: {}", failures.join("; "), notes.join("; "))),
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// ---------------------------------------------------------------------------
// evidence on the benchmark data

const DRAWS: usize = 12_000;
const BURN_IN: usize = 2_000;
const S0: usize = 100;

struct Evidence {
    is_f: EvidenceEstimate,
    bs_f: EvidenceEstimate,
}

fn evidence(data: &Dataset, g: usize) -> Result<Evidence, String> {
    let prior = RGPrior::richardson_green(data).map_err(e)?;
    let out = run_chain(data, g, &prior, &ChainOptions::new(DRAWS, BURN_IN, g as u64)).map_err(e)?;
    let q = build_density_full(&out, S0).map_err(e)?;
    let (is_f, _, bs_f) = estimate_all(&q, &prior, &out, data, DRAWS, 1e-10, 100 + g as u64).map_err(e)?;
    Ok(Evidence { is_f, bs_f })
}

/// (name, G, target) for every published bridge sampling value.
const TARGETS: &[(&str, usize, f64, f64)] = &[
    ("acidity", 3, -198.2, 0.3),
    ("acidity", 4, -198.3, 0.3),
    ("enzyme", 3, -74.2, 0.3),
    ("enzyme", 4, -74.3, 0.3),
    ("galaxy", 5, -225.9, 0.4),
    ("galaxy", 6, -225.9, 0.4),
];

type EvidenceTable = BTreeMap<(&'static str, usize), Result<Evidence, String>>;

fn evidence_table() -> &'static EvidenceTable {
    static TABLE: OnceLock<EvidenceTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        TARGETS
            .par_iter()
            .map(|&(name, g, _, _)| {
                let r = datasets::load(name).map_err(|err| format!("dataset unavailable: {err}"));
                ((name, g), r.and_then(|d| evidence(&d, g)))
            })
            .collect()
    })
}

fn criterion_1() -> Outcome {
    let table = evidence_table();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for &(name, g, target, tol) in TARGETS {
        match &table[&(name, g)] {
            Err(err) => failures.push(format!("{name} G={g}: {err}")),
            Ok(ev) => {
                let (bs, is) = (&ev.bs_f, &ev.is_f);
                let line = format!(
                    "{name} G={g}: BS-F {:.3} ± {:.3}, IS-F {:.3} ± {:.3}",
                    bs.log_value, bs.se, is.log_value, is.se
                );
                if (bs.log_value - target).abs() > tol {
                    failures.push(format!("{line}; BS-F outside {target} ± {tol}"));
                    continue;
                }
                let combined = (bs.se.powi(2) + is.se.powi(2)).sqrt();
                if (bs.log_value - is.log_value).abs() > 3.0 * combined {
                    failures.push(format!("{line}; IS-F and BS-F differ by more than 3 combined SE"));
                    continue;
                }
                if name == "enzyme" && bs.se > is.se {
                    failures.push(format!("{line}; BS-F SE exceeds IS-F SE"));
                    continue;
                }
                notes.push(line);
            }
        }
    }
    summarize(failures, notes)
}

fn criterion_2() -> Outcome {
    let table = evidence_table();
    let bands: &[(&str, usize, f64, f64)] = &[("acidity", 3, 0.8, 2.0), ("enzyme", 3, 0.8, 2.0), ("galaxy", 5, 1.3, 2.3)];
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for &(name, g, lo, hi) in bands {
        let pair = (table[&(name, g)].as_ref(), table[&(name, g + 1)].as_ref());
        let (a, b) = match pair {
            (Ok(a), Ok(b)) => (a, b),
            (Err(err), _) | (_, Err(err)) => {
                failures.push(format!("{name}: {err}"));
                continue;
            }
        };
        let ev: BTreeMap<usize, f64> = [(g, a.bs_f.log_value), (g + 1, b.bs_f.log_value)].into();
        let odds = posterior_odds(&ev, GPrior::Poisson).map_err(e)?;
        let lo_odds = odds[0].log_odds;
        let line = format!("{name} log odds {g}:{} = {lo_odds:.3}", g + 1);
        if (lo..=hi).contains(&lo_odds) {
            notes.push(line);
        } else {
            failures.push(format!("{line}, outside [{lo}, {hi}]"));
        }
    }
    summarize(failures, notes)
}

// ---------------------------------------------------------------------------
// exact enumeration on small conjugate problems

fn criterion_3() -> Outcome {
    let toys = [
        Dataset::univariate("toy-a", vec![-2.1, -1.7, -2.4, -1.9, 1.8, 2.2, 2.0, 1.6]).map_err(e)?,
        Dataset::univariate("toy-b", vec![0.3, 1.2, -0.4, 2.9, 3.3, 0.8, 3.6]).map_err(e)?,
    ];
    let mut notes = Vec::new();
    for (t, y) in toys.iter().enumerate() {
        let prior = RGPrior::richardson_green(y).map_err(e)?.conjugate(0.1).with_fixed_c0(0.3);
        for g in [2usize, 3] {
            let exact = brute_force_evidence(y, g, &prior).map_err(e)?;
            let out = run_chain(y, g, &prior, &ChainOptions::new(DRAWS, BURN_IN, 40 + 10 * t as u64 + g as u64))
                .map_err(e)?;
            let q = build_density_full(&out, S0).map_err(e)?;
            let (is, _, bs) = estimate_all(&q, &prior, &out, y, DRAWS, 1e-10, 7 + g as u64).map_err(e)?;
            let chib = estimate_chib(&out, &prior, y, None, true).map_err(e)?;
            for est in [&is, &bs, &chib] {
                let dev = (est.log_value - exact).abs();
                check(
                    dev <= 3.0 * est.se,
                    format!(
                        "{} G={g} {:?}: {:.4} vs exact {exact:.4} ({:.1} SE)",
                        y.name(),
                        est.estimator,
                        est.log_value,
                        dev / est.se
                    ),
                )?;
            }
            notes.push(format!("{} G={g} exact {exact:.3}", y.name()));
        }
    }
    let y = &toys[0];
    let prior = RGPrior::richardson_green(y).map_err(e)?.conjugate(0.1).with_fixed_c0(0.3);
    let stuck = run_chain(y, 2, &prior, &ChainOptions::new(DRAWS, BURN_IN, 9).permute(false)).map_err(e)?;
    let exact = brute_force_evidence(y, 2, &prior).map_err(e)?;
    let naive = estimate_chib(&stuck, &prior, y, None, false).map_err(e)?;
    let gap = exact - naive.log_value;
    check((gap - 2f64.ln()).abs() <= 0.2, format!("uncorrected Chib gap {gap:.3}, expected log 2"))?;
    notes.push(format!("uncorrected Chib gap {gap:.3}"));
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let y = datasets::load("enzyme").map_err(|err| format!("dataset unavailable: {err}"))?;
    let cfg = SparsePriorConfig {
        g: 10,
        e0: E0Mode::Gamma { shape: 1.0, rate: 200.0 },
        base: RGPrior::richardson_green(&y).map_err(e)?,
    };
    let out = run_sparse_chain(&y, &cfg, DRAWS, BURN_IN, 1).map_err(e)?;
    let gp = gplus_posterior(&out).map_err(e)?;
    let best = binder_partition(&out.labels, out.n).map_err(e)?;
    let line = format!(
        "mode {}, P(2) {:.3}, P(3) {:.3}, P(4) {:.3}, Binder {} clusters",
        gp.mode,
        gp.prob(2),
        gp.prob(3),
        gp.prob(4),
        best.clusters
    );
    let ok = gp.mode == 3
        && (0.45..=0.70).contains(&gp.prob(3))
        && (0.07..=0.31).contains(&gp.prob(2))
        && (0.07..=0.31).contains(&gp.prob(4))
        && best.clusters == 3;
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_5() -> Outcome {
    let y = datasets::load("faithful").map_err(e)?;
    let fits: BTreeMap<usize, FitResult> = (1..=6usize)
        .into_par_iter()
        .map(|g| {
            let opts = EmOptions {
                restarts: 50,
                ..EmOptions::with_seed(g as u64)
            };
            em_fit(&y, g, &opts).map(|f| (g, f))
        })
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let b = report(Criterion::Bic, &fits, &y).map_err(e)?;
    let icl = report(Criterion::IclBic, &fits, &y).map_err(e)?;
    let line = format!(
        "argmin BIC = {}, argmin ICLbic = {} (BIC(2) = {:.2}, BIC(3) = {:.2})",
        b.selected_g, icl.selected_g, b.values[&2], b.values[&3]
    );
    if b.selected_g == 3 && icl.selected_g == 2 {
        Ok(line)
    } else {
        Err(line)
    }
}

// ---------------------------------------------------------------------------
// identities and properties

fn random_params(rng: &mut ChaCha8Rng, g: usize, r: usize) -> MixtureParams {
    let raw: Vec<f64> = (0..g).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let comps = (0..g)
        .map(|_| {
            let mean: Vec<f64> = (0..r).map(|_| rng.random_range(-4.0..4.0)).collect();
            let a: Vec<f64> = (0..r * r).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut cov = vec![0.0; r * r];
            for i in 0..r {
                for j in 0..r {
                    cov[i * r + j] = (0..r).map(|k| a[i * r + k] * a[j * r + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
                }
            }
            Gaussian::new(mean, cov).unwrap()
        })
        .collect();
    MixtureParams::new(raw.iter().map(|w| w / s).collect(), comps).unwrap()
}

/// Every set partition of {0..n} as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                let k = p.iter().max().unwrap() + 1;
                (0..=k).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every labelled allocation of n items to g components.
fn allocations(n: usize, g: usize) -> Vec<Vec<usize>> {
    (0..g.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let l = k % g;
                    k /= g;
                    l
                })
                .collect()
        })
        .collect()
}

fn identities() -> Result<Vec<String>, String> {
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2718);

    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let g = rng.random_range(1..=5);
        let r = rng.random_range(1..=3);
        let p = random_params(&mut rng, g, r);
        let (y, _) = simulate(&p, 50, inst);
        let z = AllocationVector::new((0..50).map(|_| rng.random_range(0..g)).collect(), g).map_err(e)?;
        let lo = log_obs_likelihood(&p, &y).map_err(e)?;
        let lc = log_complete_likelihood(&p, &z, &y).map_err(e)?;
        let ec = ec_term(&p, &z, &y).map_err(e)?;
        worst = worst.max((lc + ec - lo).abs() / lo.abs().max(1.0));
    }
    check(worst <= 1e-10, format!("complete + EC identity off by {worst:e}"))?;
    notes.push(format!("l_c + EC = l_O (max rel. error {worst:.1e})"));

    for _ in 0..30 {
        let g = rng.random_range(2..=4);
        let p = random_params(&mut rng, g, 1);
        let (y, z) = simulate(&p, 40, rng.random());
        let ent = entropy(&classification_matrix(&p, &y).map_err(e)?);
        check(ent >= 0.0 && ent <= 40.0 * (g as f64).ln() + 1e-9, format!("ENT {ent} out of bounds"))?;
        check(entropy(&ClassificationMatrix::from_allocation(&z)) == 0.0, "hard partition has ENT > 0")?;
        let f = FitResult {
            params: p.clone(),
            log_lik: log_obs_likelihood(&p, &y).map_err(e)?,
            converged: true,
            iterations: 0,
            trace: vec![],
        };
        let gap = icl_bic(&f, &y).map_err(e)? - bic(&f, y.n());
        check(gap >= 0.0 && (gap - 2.0 * ent).abs() < 1e-8, format!("ICLbic - BIC = {gap}, 2 ENT = {}", 2.0 * ent))?;
    }
    let flat = MixtureParams::univariate(&[1.0 / 3.0; 3], &[0.0; 3], &[1.0; 3]).map_err(e)?;
    let y = Dataset::univariate("u", vec![-1.0, 0.3, 2.0, 0.9]).map_err(e)?;
    let ent = entropy(&classification_matrix(&flat, &y).map_err(e)?);
    check((ent - 4.0 * 3f64.ln()).abs() < 1e-12, "ENT upper extreme not reached")?;
    notes.push("ENT bounds, both extremes, ICLbic - BIC = 2 ENT".into());

    let galaxy = datasets::load("galaxy").map_err(e)?;
    let prior = RGPrior::richardson_green(&galaxy).map_err(e)?;
    for g in 2..=4 {
        let d = dic(&run_chain(&galaxy, g, &prior, &ChainOptions::new(2000, 500, g as u64)).map_err(e)?, &galaxy)
            .map_err(e)?;
        check(d.dic4a >= d.dic2, format!("G={g}: DIC4a {} < DIC2 {}", d.dic4a, d.dic2))?;
    }
    notes.push("DIC4a >= DIC2".into());

    for labels in set_partitions(6) {
        for (e0, a, b) in [(0.3, 1.5, 0.0), (2.0, 0.7, 0.4)] {
            let (rest, _) = labels.split_at(5);
            let z = AllocationVector::new(rest.to_vec(), 6).map_err(e)?;
            let totals = [
                pred_prob_finite(&z, e0).map_err(e)?.total(),
                pred_prob_dp(rest, a).map_err(e)?.total(),
                pred_prob_pyp(rest, a, b).map_err(e)?.total(),
            ];
            check(totals.iter().all(|t| (t - 1.0).abs() < 1e-14), format!("predictive totals {totals:?}"))?;
        }
    }
    notes.push("predictive probabilities sum to 1".into());

    for (n, g, e0) in [(6usize, 3usize, 0.4), (5, 4, 2.5)] {
        let total: f64 = allocations(n, g)
            .into_iter()
            .map(|z| partition_prior_finite(&AllocationVector::new(z, g).unwrap(), e0).exp())
            .sum();
        check((total - 1.0).abs() < 1e-12, format!("finite prior sums to {total}"))?;
    }
    let parts = set_partitions(8);
    for (a, b) in [(0.5, 0.0), (3.0, 0.0), (1.0, 0.3)] {
        let total: f64 = parts.iter().map(|z| pyp_partition_prior(z, a, b).unwrap().exp()).sum();
        check((total - 1.0).abs() < 1e-12, format!("PY({a}, {b}) prior sums to {total}"))?;
        if b == 0.0 {
            let dp: f64 = parts.iter().map(|z| dp_partition_prior(z, a).unwrap().exp()).sum();
            check((dp - 1.0).abs() < 1e-12, format!("DP({a}) prior sums to {dp}"))?;
        }
    }
    notes.push(format!("partition priors normalize ({} partitions of 8)", parts.len()));

    for k in 0..10u64 {
        let g = 2 + k as usize % 2;
        let p = random_params(&mut rng, g, 1 + k as usize % 2);
        let (y, _) = simulate(&p, 150, k);
        let opts = EmOptions {
            restarts: 2,
            ..EmOptions::with_seed(k)
        };
        for (name, f) in [("EM", em_fit(&y, g, &opts)), ("BEM", bem_fit(&y, g, &opts))] {
            let f = f.map_err(e)?;
            check(
                f.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()),
                format!("{name} trace decreases (instance {k})"),
            )?;
        }
    }
    notes.push("EM and BEM traces monotone".into());
    Ok(notes)
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_reproducibility() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(e)?;
    let runs: &[(&str, &[&str])] = &[
        ("fit", &["fit", "--dataset", "galaxy", "--gmax", "4"]),
        ("fit-mml", &["fit", "--dataset", "galaxy", "--gmax", "6", "--method", "mml"]),
        ("criteria", &["criteria", "--dataset", "faithful", "--gmax", "3"]),
        ("gibbs", &["gibbs", "--dataset", "galaxy", "--gmin", "3", "--gmax", "3", "--draws", "1000", "--burn-in", "200"]),
        ("marglik", &["marglik", "--dataset", "galaxy", "--gmin", "2", "--gmax", "3", "--draws", "800", "--burn-in", "200"]),
        ("sparse", &["sparse", "--dataset", "galaxy", "--draws", "1000", "--burn-in", "200"]),
        ("bootstrap-lrt", &["bootstrap-lrt", "--dataset", "galaxy", "--b", "99", "--restarts", "3"]),
    ];
    for (name, args) in runs {
        let mut trees = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{name}-{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mixorder"))
                .args(*args)
                .args(["--seed", "5", "--out", out.to_str().unwrap()])
                .output()
                .map_err(e)?;
            check(status.status.success(), format!("{name}: {}", String::from_utf8_lossy(&status.stderr)))?;
            trees.push(read_tree(&out));
        }
        check(!trees[0].is_empty() && trees[0] == trees[1], format!("{name}: outputs differ between runs"))?;
    }
    Ok(format!("{} commands bit-identical across runs", runs.len()))
}

fn criterion_6() -> Outcome {
    let mut notes = identities()?;
    notes.push(cli_reproducibility()?);
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let opts = |seed: u64| EmOptions {
        restarts: 5,
        ..EmOptions::with_seed(seed)
    };
    let sep = MixtureParams::univariate(&[0.5, 0.5], &[-2.5, 2.5], &[1.0, 1.0]).map_err(e)?;
    let (y, _) = simulate(&sep, 200, 7);
    let t = bootstrap_lrt(&y, 1, 2, 199, 0.05, &opts(1)).map_err(e)?;
    check(t.reject, format!("separated data not rejected: LRS {:.2}, p {:.3}", t.lrs_obs, t.p_value))?;

    let null = MixtureParams::univariate(&[1.0], &[0.0], &[1.0]).map_err(e)?;
    let rejections = (0..20u64)
        .map(|k| {
            let (y, _) = simulate(&null, 200, 1000 + k);
            bootstrap_lrt(&y, 1, 2, 199, 0.05, &opts(2000 + k)).map(|t| t.reject)
        })
        .collect::<Result<Vec<bool>, _>>()
        .map_err(e)?;
    let rate = rejections.iter().filter(|&&r| r).count() as f64 / 20.0;
    check(rate <= 0.125, format!("null rejection rate {rate}"))?;
    Ok(format!("separated: LRS {:.2}, p {:.4}; null rejection rate {rate}", t.lrs_obs, t.p_value))
}

fn criterion_8() -> Outcome {
    let dummy = |g: usize, l: f64| FitResult {
        params: MixtureParams::univariate(&vec![1.0 / g as f64; g], &vec![0.0; g], &vec![1.0; g]).unwrap(),
        log_lik: l,
        converged: true,
        iterations: 0,
        trace: vec![],
    };
    let mut fits = BTreeMap::new();
    let mut cx = BTreeMap::new();
    for g in 1..=10usize {
        let u = 3 * g - 1;
        fits.insert(g, dummy(g, -812.5 + 1.375 * u as f64));
        cx.insert(g, u);
    }
    let sh = slope_heuristics(&fits, &cx, None).map_err(e)?;
    let kappa = sh.aux["kappa"].as_f64().unwrap();
    check((kappa - 1.375).abs() <= 1e-8, format!("exact-linear slope recovered as {kappa}"))?;

    let p = MixtureParams::univariate(&[0.3, 0.4, 0.3], &[-4.0, 0.0, 4.0], &[1.0, 0.6, 1.0]).map_err(e)?;
    let (y, _) = simulate(&p, 400, 0);
    let fits: BTreeMap<usize, FitResult> = (1..=10usize)
        .into_par_iter()
        .map(|g| em_fit(&y, g, &EmOptions::with_seed(g as u64)).map(|f| (g, f)))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let cx = fits.iter().map(|(&g, f)| (g, num_params(&f.params))).collect();
    let sh = slope_heuristics(&fits, &cx, None).map_err(e)?;
    let b = report(Criterion::Bic, &fits, &y).map_err(e)?;
    check(sh.selected_g <= b.selected_g, format!("SH selects {} but BIC selects {}", sh.selected_g, b.selected_g))?;
    Ok(format!("kappa {kappa}; simulation: SH selects {}, BIC selects {}", sh.selected_g, b.selected_g))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("evidence benchmarks", criterion_1),
        ("posterior odds", criterion_2),
        ("enumeration oracle", criterion_3),
        ("sparse enzyme", criterion_4),
        ("geyser criteria", criterion_5),
        ("identities and reproducibility", criterion_6),
        ("bootstrap LRT", criterion_7),
        ("slope heuristics", criterion_8),
    ];
    // ACCEPTANCE_ONLY=1,2 restricts the run to the listed criteria.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|k| k.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|ks| !ks.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.0}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.0}s]: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
