//! Directory layout of a stored chain:
//!
//! * `meta.json`: g, n, draws, burn_in, seed, permute, resolved, prior;
//! * `draws.csv`: one row per draw: `c0, e0, log_lik, log_prior`, then for
//!   each component g = 1..G the columns `eta_g, mu_g, sigma2_g, n_g,
//!   sum_y_g, sum_y2_g, b_g, B_g, c_g, C_g, alpha_g` (`e0` is empty unless
//!   the chain sampled it);
//! * `labels.csv`: one row per draw of n one-based labels.
//!
//! Floats are written in shortest round-trip form, so loading is lossless.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GibbsOutput, RGPrior};
use crate::error::{MixError, Result};

#[derive(Serialize, Deserialize)]
struct Meta {
    g: usize,
    n: usize,
    draws: usize,
    burn_in: usize,
    seed: u64,
    permute: bool,
    resolved: bool,
    prior: RGPrior,
}

const PER_COMPONENT: [&str; 11] = [
    "eta", "mu", "sigma2", "n", "sum_y", "sum_y2", "b", "B", "c", "C", "alpha",
];

impl GibbsOutput {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let meta = Meta {
            g: self.g,
            n: self.n,
            draws: self.draws,
            burn_in: self.burn_in,
            seed: self.seed,
            permute: self.permute,
            resolved: self.resolved,
            prior: self.prior.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("meta.json"))?), &meta)?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("draws.csv"))?));
        let mut header = vec!["c0".to_string(), "e0".into(), "log_lik".into(), "log_prior".into()];
        for k in 1..=self.g {
            header.extend(PER_COMPONENT.iter().map(|c| format!("{c}_{k}")));
        }
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for m in 0..self.draws {
            rec.clear();
            rec.push(self.c0[m].to_string());
            rec.push(self.e0.as_ref().map_or(String::new(), |e| e[m].to_string()));
            rec.push(self.log_lik[m].to_string());
            rec.push(self.log_prior[m].to_string());
            for k in 0..self.g {
                let i = m * self.g + k;
                rec.extend([
                    self.weights[i].to_string(),
                    self.means[i].to_string(),
                    self.vars[i].to_string(),
                    self.counts[i].to_string(),
                    self.sum_y[i].to_string(),
                    self.sum_y2[i].to_string(),
                    self.mu_b[i].to_string(),
                    self.mu_bb[i].to_string(),
                    self.var_c[i].to_string(),
                    self.var_cc[i].to_string(),
                    self.alpha[i].to_string(),
                ]);
            }
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(File::create(dir.join("labels.csv"))?));
        for m in 0..self.draws {
            w.write_record(self.labels_at(m).iter().map(|l| (l + 1).to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<GibbsOutput> {
        let dir = dir.as_ref();
        let meta: Meta = serde_json::from_reader(File::open(dir.join("meta.json"))?)?;
        let (g, n, draws) = (meta.g, meta.n, meta.draws);
        let bad = |what: &str| MixError::InvalidData(format!("{}: {what}", dir.display()));
        let mut out = GibbsOutput {
            g,
            n,
            draws,
            burn_in: meta.burn_in,
            seed: meta.seed,
            permute: meta.permute,
            resolved: meta.resolved,
            prior: meta.prior,
            weights: Vec::with_capacity(draws * g),
            means: Vec::with_capacity(draws * g),
            vars: Vec::with_capacity(draws * g),
            c0: Vec::with_capacity(draws),
            e0: None,
            labels: Vec::with_capacity(draws * n),
            counts: Vec::with_capacity(draws * g),
            sum_y: Vec::with_capacity(draws * g),
            sum_y2: Vec::with_capacity(draws * g),
            mu_b: Vec::with_capacity(draws * g),
            mu_bb: Vec::with_capacity(draws * g),
            var_c: Vec::with_capacity(draws * g),
            var_cc: Vec::with_capacity(draws * g),
            alpha: Vec::with_capacity(draws * g),
            log_lik: Vec::with_capacity(draws),
            log_prior: Vec::with_capacity(draws),
        };
        let mut e0 = Vec::new();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("cannot parse `{s}`")));
        let mut rdr = csv::Reader::from_reader(File::open(dir.join("draws.csv"))?);
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 4 + PER_COMPONENT.len() * g {
                return Err(bad("draws.csv has the wrong number of columns"));
            }
            out.c0.push(num(&rec[0])?);
            if !rec[1].is_empty() {
                e0.push(num(&rec[1])?);
            }
            out.log_lik.push(num(&rec[2])?);
            out.log_prior.push(num(&rec[3])?);
            for k in 0..g {
                let f = |j: usize| num(&rec[4 + k * PER_COMPONENT.len() + j]);
                out.weights.push(f(0)?);
                out.means.push(f(1)?);
                out.vars.push(f(2)?);
                out.counts.push(f(3)? as u32);
                out.sum_y.push(f(4)?);
                out.sum_y2.push(f(5)?);
                out.mu_b.push(f(6)?);
                out.mu_bb.push(f(7)?);
                out.var_c.push(f(8)?);
                out.var_cc.push(f(9)?);
                out.alpha.push(f(10)?);
            }
        }
        if out.c0.len() != draws {
            return Err(bad("draws.csv row count differs from meta.json"));
        }
        if !e0.is_empty() {
            if e0.len() != draws {
                return Err(bad("e0 column is partially filled"));
            }
            out.e0 = Some(e0);
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(File::open(dir.join("labels.csv"))?);
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != n {
                return Err(bad("labels.csv row has the wrong length"));
            }
            for field in rec.iter() {
                let l: u32 = field.parse().map_err(|_| bad(&format!("bad label `{field}`")))?;
                if l == 0 || l as usize > g {
                    return Err(bad(&format!("label {l} outside 1..{g}")));
                }
                out.labels.push(l - 1);
            }
        }
        if out.labels.len() != draws * n {
            return Err(bad("labels.csv row count differs from meta.json"));
        }
        Ok(out)
    }
}
