//! One function per subcommand. Every command computes all of its results
//! before touching the output directory, so failures leave no partial output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use mixorder::criteria::{self, bootstrap_lrt, dic, num_params, slope_heuristics, Criterion, CriterionReport};
use mixorder::em::{bem_fit, componentwise_em_mml, em_fit, EmOptions, FitResult};
use mixorder::gibbs::{resolve_labels, run_chain, ChainOptions, GibbsOutput, RGPrior};
use mixorder::marglik::{
    build_density_full, build_density_random, estimate_all, estimate_chib, posterior_odds,
    posterior_probabilities, write_estimates_csv, EvidenceEstimate, GPrior, MAX_FULL_G,
};
use mixorder::mixture::datasets;
use mixorder::numeric::derive_seed;
use mixorder::sparse::{
    association_matrix, binder_partition_with, gplus_posterior, run_sparse_chain, superfluous_weight,
    write_matrix_csv, E0Mode, SparsePriorConfig,
};
use mixorder::{Dataset, MixError};

use crate::config::{
    Chain, Common, FileConfig, FitArgs, FitMethod, GPriorArg, GibbsArgs, LrtArgs, MarglikArgs, Source, SparseArgs,
};

const TAG_FIT: u64 = 0x666974;
const TAG_CHAIN: u64 = 0x636861696e;
const TAG_Q: u64 = 0x71;

/// Files to write, kept in memory until the command has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: impl Into<PathBuf>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn bytes(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn csv(&mut self, name: impl Into<PathBuf>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        self.files.push((name.into(), w.into_inner().context("flushing csv")?));
        Ok(())
    }

    fn write(self, dir: &Path) -> Result<()> {
        for (name, bytes) in self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn load_data(common: &Common) -> Result<Dataset> {
    let data = match &common.source {
        Source::File(p) => Dataset::from_csv_path(p).with_context(|| format!("reading {}", p.display()))?,
        Source::Bundled(name) => datasets::load(name)?,
    };
    log::info!("{}: n = {}, r = {}", data.name(), data.n(), data.dim());
    Ok(data)
}

fn em_options(common: &Common, g: usize) -> EmOptions {
    EmOptions {
        restarts: common.restarts,
        ..EmOptions::with_seed(derive_seed(common.seed, TAG_FIT, g as u64))
    }
}

fn prior(data: &Dataset, chain: &Chain) -> Result<RGPrior> {
    let mut p = RGPrior::richardson_green(data)?;
    if let Some(e0) = chain.e0 {
        p = p.with_e0(e0);
    }
    if let Some(k) = chain.kappa {
        p = p.conjugate(k);
    }
    if let Some(c0) = chain.c0 {
        p = p.with_fixed_c0(c0);
    }
    p.validate()?;
    Ok(p)
}

fn chain_options(common: &Common, chain: &Chain, g: usize) -> ChainOptions {
    ChainOptions::new(chain.draws, chain.burn_in, derive_seed(common.seed, TAG_CHAIN, g as u64))
}

#[derive(Serialize)]
#[serde(untagged)]
enum Entry<T> {
    Ok(T),
    Failed { error: String },
}

/// Fits every G in parallel; failures are kept per G. Errors only when all fail.
fn fit_range(
    data: &Dataset,
    common: &Common,
    f: impl Fn(&Dataset, usize, &EmOptions) -> mixorder::Result<FitResult> + Sync,
) -> Result<BTreeMap<usize, std::result::Result<FitResult, MixError>>> {
    let all: BTreeMap<_, _> = common
        .range()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|g| (g, f(data, g, &em_options(common, g))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    for (g, r) in &all {
        if let Err(e) = r {
            log::warn!("G = {g}: {e}");
        }
    }
    if all.values().all(|r| r.is_err()) {
        let (_, first) = all.into_iter().next().expect("non-empty range");
        return Err(first.unwrap_err()).context("every fit failed");
    }
    Ok(all)
}

fn successes(all: &BTreeMap<usize, std::result::Result<FitResult, MixError>>) -> BTreeMap<usize, FitResult> {
    all.iter().filter_map(|(&g, r)| r.as_ref().ok().map(|f| (g, f.clone()))).collect()
}

fn entries(all: BTreeMap<usize, std::result::Result<FitResult, MixError>>) -> BTreeMap<usize, Entry<FitResult>> {
    all.into_iter()
        .map(|(g, r)| {
            let e = match r {
                Ok(f) => Entry::Ok(f),
                Err(e) => Entry::Failed { error: e.to_string() },
            };
            (g, e)
        })
        .collect()
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &file, (1, 6))?;
    let data = load_data(&common)?;
    let method = args.method.or(file.method).unwrap_or(FitMethod::Em);
    let mut out = Outputs::default();
    if method == FitMethod::Mml {
        let m = componentwise_em_mml(&data, common.gmax, common.seed)?;
        out.json("mml.json", &m)?;
        out.csv(
            "mml.csv",
            &["G_star", "mml", "log_lik"],
            &[vec![m.g_star.to_string(), m.mml.to_string(), m.fit.log_lik.to_string()]],
        )?;
        return out.write(&common.out);
    }
    let all = match method {
        FitMethod::Bem => fit_range(&data, &common, bem_fit)?,
        _ => fit_range(&data, &common, em_fit)?,
    };
    let rows: Vec<Vec<String>> = successes(&all)
        .iter()
        .map(|(g, f)| {
            vec![
                g.to_string(),
                f.log_lik.to_string(),
                num_params(&f.params).to_string(),
                f.iterations.to_string(),
                f.converged.to_string(),
            ]
        })
        .collect();
    out.csv("fits.csv", &["G", "log_lik", "n_params", "iterations", "converged"], &rows)?;
    out.json("fits.json", &entries(all))?;
    out.write(&common.out)
}

fn file_stem(name: &str) -> String {
    name.to_ascii_lowercase()
}

pub fn criteria(args: &crate::config::CommonArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let common = Common::resolve(args, &file, (1, 6))?;
    let data = load_data(&common)?;
    let ml = successes(&fit_range(&data, &common, em_fit)?);
    let lcc = successes(&fit_range(&data, &common, bem_fit)?);

    let mut reports: Vec<CriterionReport> = Vec::new();
    for c in Criterion::ALL {
        let fits = if c == Criterion::LccIcl { &lcc } else { &ml };
        if fits.is_empty() {
            continue;
        }
        reports.push(criteria::report(c, fits, &data)?);
    }
    if ml.len() >= 6 {
        let cx = ml.iter().map(|(&g, f)| (g, num_params(&f.params))).collect();
        match slope_heuristics(&ml, &cx, None) {
            Ok(r) => reports.push(r),
            Err(e) => log::warn!("slope heuristics skipped: {e}"),
        }
    } else {
        log::info!("slope heuristics need at least 6 fitted models");
    }

    let mut out = Outputs::default();
    let mut header = vec!["G"];
    header.extend(reports.iter().map(|r| r.criterion.as_str()));
    let rows: Vec<Vec<String>> = common
        .range()
        .map(|g| {
            let mut row = vec![g.to_string()];
            row.extend(reports.iter().map(|r| r.values.get(&g).map_or(String::new(), |v| v.to_string())));
            row
        })
        .collect();
    out.csv("criteria.csv", &header, &rows)?;
    let selected: BTreeMap<&str, usize> = reports.iter().map(|r| (r.criterion.as_str(), r.selected_g)).collect();
    out.json("selected.json", &selected)?;
    for r in &reports {
        out.json(format!("{}.json", file_stem(&r.criterion)), r)?;
    }
    for (name, g) in &selected {
        println!("{name}: G = {g}");
    }
    out.write(&common.out)
}

#[derive(Serialize)]
struct GibbsSummary {
    #[serde(rename = "G")]
    g: usize,
    seed: u64,
    chain_dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dic: Option<criteria::Dic>,
    g_plus_mean: f64,
}

pub fn gibbs(args: &GibbsArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &file, (1, 6))?;
    let chain = Chain::resolve(&args.chain, &file);
    let permute = !(args.no_permute || file.permute == Some(false));
    let resolve = args.resolve || file.resolve == Some(true);
    let data = load_data(&common)?;
    let prior = prior(&data, &chain)?;
    let results: Vec<(usize, mixorder::Result<GibbsOutput>)> = common
        .range()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|g| {
            let opts = chain_options(&common, &chain, g).permute(permute);
            let r = run_chain(&data, g, &prior, &opts).and_then(|o| if resolve { resolve_labels(&o, opts.seed) } else { Ok(o) });
            (g, r)
        })
        .collect();
    let mut out = Outputs::default();
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut chains = Vec::new();
    for (g, r) in results {
        let o = r.with_context(|| format!("chain for G = {g}"))?;
        let d = if o.draws >= criteria::MIN_DIC_DRAWS { Some(dic(&o, &data)?) } else { None };
        if let Some(d) = &d {
            rows.push(vec![g.to_string(), d.dic2.to_string(), d.se_dic2.to_string(), d.dic4a.to_string(), d.se_dic4a.to_string()]);
        }
        let gp = o.g_plus();
        summaries.push(GibbsSummary {
            g,
            seed: o.seed,
            chain_dir: format!("chain_G{g}"),
            dic: d,
            g_plus_mean: gp.iter().sum::<usize>() as f64 / gp.len() as f64,
        });
        chains.push(o);
    }
    out.csv("dic.csv", &["G", "DIC2", "se_DIC2", "DIC4a", "se_DIC4a"], &rows)?;
    out.json("summary.json", &summaries)?;
    out.write(&common.out)?;
    for o in &chains {
        o.save(common.out.join(format!("chain_G{}", o.g)))?;
    }
    Ok(())
}

pub fn marglik(args: &MarglikArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &file, (2, 6))?;
    if common.gmax > MAX_FULL_G {
        bail!("marginal likelihoods need G ≤ {MAX_FULL_G} (got --gmax {})", common.gmax);
    }
    let chain = Chain::resolve(&args.chain, &file);
    let s0 = args.s0.or(file.s0).unwrap_or(100);
    let l = args.l.or(file.l).unwrap_or(chain.draws);
    let tol = args.tol.or(file.tol).unwrap_or(1e-8);
    let g_prior = match args.g_prior.or(file.g_prior).unwrap_or(GPriorArg::Poisson) {
        GPriorArg::Poisson => GPrior::Poisson,
        GPriorArg::Uniform => GPrior::Uniform,
    };
    let data = load_data(&common)?;
    let prior = prior(&data, &chain)?;
    let chib_ok = chain.kappa.is_some() && chain.c0.is_some();

    let per_g: Vec<(usize, mixorder::Result<Vec<EvidenceEstimate>>)> = common
        .range()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|g| {
            let run = || -> mixorder::Result<Vec<EvidenceEstimate>> {
                let o = run_chain(&data, g, &prior, &chain_options(&common, &chain, g))?;
                let qseed = derive_seed(common.seed, TAG_Q, g as u64);
                let s = (s0 * (1..=g).product::<usize>()).min(o.draws);
                let qf = build_density_full(&o, s0.min(o.draws))?;
                let qr = build_density_random(&o, s)?;
                let (is_f, ri_f, bs_f) = estimate_all(&qf, &prior, &o, &data, l, tol, qseed)?;
                let (is_r, ri_r, bs_r) = estimate_all(&qr, &prior, &o, &data, l, tol, qseed)?;
                let mut v = vec![bs_f, is_f, is_r, bs_r, ri_f, ri_r];
                if chib_ok {
                    v.push(estimate_chib(&o, &prior, &data, None, true)?);
                }
                Ok(v)
            };
            (g, run())
        })
        .collect();

    let mut estimates = Vec::new();
    let mut bs_f = BTreeMap::new();
    for (g, r) in per_g {
        match r {
            Ok(v) => {
                bs_f.insert(g, v[0].log_value);
                estimates.extend(v);
            }
            Err(e) => log::warn!("G = {g} omitted: {e}"),
        }
    }
    if estimates.is_empty() {
        bail!(MixError::Degenerate("no value of G produced an estimate".into()));
    }
    let mut out = Outputs::default();
    let mut buf = Vec::new();
    write_estimates_csv(&estimates, &mut buf)?;
    out.bytes("evidence.csv", buf);
    out.json("evidence.json", &estimates)?;
    if bs_f.len() >= 2 {
        let odds = posterior_odds(&bs_f, g_prior)?;
        let rows: Vec<Vec<String>> =
            odds.iter().map(|o| vec![o.g.to_string(), o.g_other.to_string(), o.log_odds.to_string()]).collect();
        out.csv("odds.csv", &["G", "G_other", "log_odds"], &rows)?;
        let probs = posterior_probabilities(&bs_f, g_prior);
        let rows: Vec<Vec<String>> = probs.iter().map(|(g, p)| vec![g.to_string(), p.to_string()]).collect();
        out.csv("posterior_G.csv", &["G", "probability"], &rows)?;
    }
    for (g, v) in &bs_f {
        println!("G = {g}: log p(y|G) = {v:.3} (BS-F)");
    }
    out.write(&common.out)
}

pub fn sparse(args: &SparseArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &file, (1, 1))?;
    let chain = Chain::resolve(&args.chain, &file);
    let data = load_data(&common)?;
    let g = args.g.or(file.g).unwrap_or(10);
    let e0 = match chain.e0 {
        Some(v) => E0Mode::Fixed { value: v },
        None => E0Mode::Gamma {
            shape: args.e0_shape.or(file.e0_shape).unwrap_or(1.0),
            rate: args.e0_rate.or(file.e0_rate).unwrap_or(200.0),
        },
    };
    let base = prior(&data, &Chain { e0: None, ..chain })?;
    let cfg = SparsePriorConfig { g, e0, base };
    let o = run_sparse_chain(&data, &cfg, chain.draws, chain.burn_in, derive_seed(common.seed, TAG_CHAIN, g as u64))?;
    let gp = gplus_posterior(&o)?;
    let assoc = association_matrix(&o.labels, o.n)?;
    let best = binder_partition_with(&o.labels, o.n, &assoc)?;

    let mut out = Outputs::default();
    out.json("gplus.json", &gp)?;
    let mut buf = Vec::new();
    gp.write_csv(&mut buf)?;
    out.bytes("gplus.csv", buf);
    let trace: Vec<Vec<String>> = o
        .g_plus()
        .iter()
        .enumerate()
        .map(|(m, k)| {
            let mut row = vec![m.to_string(), k.to_string()];
            if let Some(e) = &o.e0 {
                row.push(e[m].to_string());
            }
            row
        })
        .collect();
    let header: &[&str] = if o.e0.is_some() { &["draw", "G_plus", "e0"] } else { &["draw", "G_plus"] };
    out.csv("gplus_trace.csv", header, &trace)?;
    let sw: Vec<Vec<String>> =
        superfluous_weight(&o, gp.mode).iter().enumerate().map(|(m, w)| vec![m.to_string(), w.to_string()]).collect();
    out.csv("superfluous_weight.csv", &["draw", "weight"], &sw)?;
    let mut buf = Vec::new();
    write_matrix_csv(&assoc, o.n, &mut buf)?;
    out.bytes("association.csv", buf);
    let mut buf = Vec::new();
    best.write_csv(&mut buf)?;
    out.bytes("binder.csv", buf);
    out.json("binder.json", &best)?;
    println!("G+ mode = {} (P = {:.3}); Binder partition has {} clusters", gp.mode, gp.prob(gp.mode), best.clusters);
    out.write(&common.out)
}

pub fn bootstrap(args: &LrtArgs) -> Result<()> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let common = Common::resolve(&args.common, &file, (1, 1))?;
    let g0 = args.g0.or(file.g0).unwrap_or(common.gmin);
    let g1 = args.g1.or(file.g1).unwrap_or(g0 + 1);
    let b = args.b.or(file.b).unwrap_or(199);
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    let data = load_data(&common)?;
    let opts = EmOptions {
        restarts: common.restarts,
        ..EmOptions::with_seed(common.seed)
    };
    let t = bootstrap_lrt(&data, g0, g1, b, alpha, &opts)?;
    let mut out = Outputs::default();
    out.json("lrt.json", &t)?;
    let rows: Vec<Vec<String>> = t.lrs.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]).collect();
    out.csv("lrs.csv", &["replicate", "lrs"], &rows)?;
    println!(
        "G0 = {g0} vs G1 = {g1}: LRS = {:.3}, p = {:.4}, {}",
        t.lrs_obs,
        t.p_value,
        if t.reject { "reject" } else { "do not reject" }
    );
    out.write(&common.out)
}
