//! Seeded simulation study: iid Gaussian designs, a sparse true coefficient vector, one path and
//! one selection per replicate and penalty.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use sparsepath::ebayes;
use sparsepath::model::Loss;
use sparsepath::path::{follow_path, Termination};
use sparsepath::penalty::PenaltySpec;

use crate::commands::path_options;
use crate::config::RunConfig;
use crate::data::{assemble, Dataset, Prepared};
use crate::error::{CliError, Result};
use crate::output::fmt_f64;

/// One replicate's design and response.
pub fn generate(cfg: &RunConfig, seed: u64) -> Result<(Dataset, DVector<f64>)> {
    if cfg.signal.len() > cfg.p {
        return Err(CliError::Input(format!("signal has {} entries but p = {}", cfg.signal.len(), cfg.p)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (cfg.n, cfg.p);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let beta = DVector::from_fn(p, |j, _| cfg.signal.get(j).copied().unwrap_or(0.0));
    let eta = &x * &beta;
    let y = match cfg.loss {
        Loss::Gaussian => eta.map(|e| e + cfg.noise_sd * rng.sample::<f64, _>(StandardNormal)),
        Loss::Logistic => eta.map(|e| {
            let u: f64 = rng.random();
            if u < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 }
        }),
        Loss::Poisson => eta.map(|e| {
            let lambda = e.exp().min(1e12);
            if lambda > 0.0 {
                Poisson::new(lambda).expect("positive rate").sample(&mut rng)
            } else {
                0.0
            }
        }),
    };
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok((Dataset { names, x, y }, beta))
}

/// Selection error rates and coefficient error of an estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub fpr: f64,
    pub fnr: f64,
    pub mse: f64,
}

pub fn metrics(estimate: &DVector<f64>, truth: &DVector<f64>) -> Metrics {
    let p = truth.len();
    let (mut fp, mut fneg, mut neg, mut pos) = (0usize, 0usize, 0usize, 0usize);
    for j in 0..p {
        if truth[j] == 0.0 {
            neg += 1;
            fp += usize::from(estimate[j] != 0.0);
        } else {
            pos += 1;
            fneg += usize::from(estimate[j] == 0.0);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Metrics {
        fpr: ratio(fp, neg),
        fnr: ratio(fneg, pos),
        mse: ((estimate - truth).norm_squared() / p as f64).sqrt(),
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone)]
pub struct Record {
    pub replicate: usize,
    pub seed: u64,
    pub loss: Loss,
    pub eta: f64,
    pub runtime_s: f64,
    /// `None` when no sampled state was admissible.
    pub metrics: Option<Metrics>,
    pub selected_q: Option<usize>,
    pub selected_rho: Option<f64>,
    pub terminated_by: Termination,
    /// Nonzero penalized coefficients at the last sample.
    pub predictors_at_end: usize,
}

fn run_one(cfg: &RunConfig, replicate: usize, spec: PenaltySpec) -> Result<Record> {
    let seed = cfg.seed.wrapping_add(replicate as u64);
    let (ds, truth) = generate(cfg, seed)?;
    let a = assemble(&ds, cfg)?;
    let prep = Prepared::new(&a, cfg.standardize);
    let start = Instant::now();
    let path = follow_path(&prep.prob, &spec, &path_options(cfg)).map_err(|e| CliError::Solver(e.to_string()))?;
    let selection = ebayes::select_model(&prep.prob, std::slice::from_ref(&path), cfg.criterion);
    let runtime_s = start.elapsed().as_secs_f64();
    let off = usize::from(cfg.intercept);
    let predictors_at_end = path.samples.last().map_or(0, |s| s.part.nonzero.len());
    let (m, q, rho) = match selection {
        Ok(sel) => {
            let beta = prep.to_original(&sel.state.beta(prep.prob.p()));
            let est = beta.rows(off, cfg.p).into_owned();
            (Some(metrics(&est, &truth)), Some(sel.score.q), Some(sel.score.rho))
        }
        Err(ebayes::EbError::AllInadmissible) => (None, None, None),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    Ok(Record {
        replicate,
        seed,
        loss: cfg.loss,
        eta: spec.eta(),
        runtime_s,
        metrics: m,
        selected_q: q,
        selected_rho: rho,
        terminated_by: path.termination,
        predictors_at_end,
    })
}

/// Worker count: `SPARSEPATH_THREADS` if set and positive, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("SPARSEPATH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (replicate, penalty) job; records come back in replicate-major order.
pub fn run(cfg: &RunConfig) -> Result<Vec<Record>> {
    let specs = cfg.specs();
    let jobs: Vec<(usize, PenaltySpec)> = (0..cfg.replicates)
        .flat_map(|r| specs.iter().map(move |&s| (r, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(r, s)| run_one(cfg, r, s)).collect())
}

pub fn write_metrics(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.into()))?;
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record([
        "replicate",
        "seed",
        "loss",
        "eta",
        "runtime_s",
        "fpr",
        "fnr",
        "mse",
        "selected_q",
        "selected_rho",
        "terminated_by",
    ])
    .map_err(io)?;
    for r in records {
        let m = r.metrics;
        w.write_record([
            r.replicate.to_string(),
            r.seed.to_string(),
            r.loss.name().to_string(),
            fmt_f64(r.eta),
            fmt_f64(r.runtime_s),
            m.map_or("nan".into(), |m| fmt_f64(m.fpr)),
            m.map_or("nan".into(), |m| fmt_f64(m.fnr)),
            m.map_or("nan".into(), |m| fmt_f64(m.mse)),
            r.selected_q.map_or(String::new(), |q| q.to_string()),
            r.selected_rho.map_or("nan".into(), fmt_f64),
            r.terminated_by.name().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<Record>> {
    std::fs::create_dir_all(out)?;
    let records = run(cfg)?;
    write_metrics(&out.join("metrics.csv"), &records)?;
    Ok(records)
}
