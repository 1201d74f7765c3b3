//! The subcommands other than `simulate`.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::{json, Map, Value};
use sparsepath::ebayes::{self, EbError, EbScore};
use sparsepath::genreg::{self, RegBlock, RegMatrix, Reparameterization};
use sparsepath::model::{ActivePartition, GlmProblem};
use sparsepath::path::{follow_path, PathOptions, PathState, SolutionPath, SparseCoefs};
use sparsepath::penalty::PenaltySpec;

use crate::config::{BlockKind, RunConfig};
use crate::data::{self, Assembled, Prepared};
use crate::error::{CliError, Result};
use crate::output::{event_json, num, opt_num, read_path_csv, write_json, write_path_csv};

pub fn path_options(cfg: &RunConfig) -> PathOptions {
    PathOptions {
        rtol: cfg.rtol,
        rho_min: cfg.rho_min,
        rho_min_ratio: cfg.rho_min_ratio,
        max_predictors: cfg.max_predictors,
        ..PathOptions::default()
    }
}

/// File names for path `k` of `count`: a single path keeps the bare names.
fn artifact(out: &Path, stem: &str, ext: &str, k: usize, count: usize) -> PathBuf {
    if count == 1 {
        out.join(format!("{stem}.{ext}"))
    } else {
        out.join(format!("{stem}_{k}.{ext}"))
    }
}

/// Traces one path per penalty in `specs`. A failing path writes its events file with an
/// `error` record before the error is returned.
fn trace_all(prob: &GlmProblem, specs: &[PenaltySpec], cfg: &RunConfig, out: &Path) -> Result<Vec<SolutionPath>> {
    let opts = path_options(cfg);
    let mut paths = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        log::info!("tracing {} eta={}", spec.family().name(), spec.eta());
        match follow_path(prob, spec, &opts) {
            Ok(path) => {
                log::info!("{} samples, {} events, ended by {}", path.samples.len(), path.events.len(), path.termination);
                paths.push(path);
            }
            Err(e) => {
                let record = json!([{ "kind": "error", "rho": Value::Null, "detail": e.to_string() }]);
                write_json(&artifact(out, "events", "json", k, specs.len()), &record)?;
                return Err(CliError::Solver(e.to_string()));
            }
        }
    }
    Ok(paths)
}

/// Writes `path*.csv` and `events*.json`; `map` takes a solver-scale coefficient vector to the
/// reported scale.
fn write_paths(
    out: &Path,
    names: &[String],
    paths: &[SolutionPath],
    map: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<()> {
    for (k, path) in paths.iter().enumerate() {
        let rows: Vec<(f64, DVector<f64>)> = path.samples.iter().map(|s| (s.rho, map(&s.beta(path.p)))).collect();
        write_path_csv(&artifact(out, "path", "csv", k, paths.len()), names, &rows)?;
        let events: Vec<Value> = path.events.iter().map(event_json).collect();
        write_json(&artifact(out, "events", "json", k, paths.len()), &Value::Array(events))?;
    }
    Ok(())
}

fn load(data: &Path, cfg: &RunConfig) -> Result<Assembled> {
    let ds = data::read_csv(data, &cfg.response)?;
    data::assemble(&ds, cfg)
}

pub fn cmd_path(data: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let a = load(data, cfg)?;
    let prep = Prepared::new(&a, cfg.standardize);
    let paths = trace_all(&prep.prob, &cfg.specs(), cfg, out)?;
    write_paths(out, &a.names, &paths, &|b| prep.to_original(b))
}

fn selection_error(e: EbError) -> CliError {
    match e {
        EbError::UnsupportedPenalty(_) => CliError::Input(e.to_string()),
        EbError::AllInadmissible | EbError::NoPaths => CliError::Selection(e.to_string()),
    }
}

fn score_json(path_index: usize, s: &EbScore) -> Value {
    json!({
        "path_index": path_index,
        "eta": num(s.eta),
        "rho": num(s.rho),
        "q": s.q,
        "criterion": num(s.criterion),
        "prior_term": num(s.prior_term),
        "fit_term": num(s.fit_term),
        "logdet_term": num(s.logdet_term),
        "sigma2": opt_num(s.sigma2),
        "flag": s.flag.map(|f| f.name()),
    })
}

/// The selection report. `beta` is the selected coefficient vector on the reported scale.
fn report(cfg: &RunConfig, names: &[String], sel: &ebayes::Selection, beta: &DVector<f64>) -> Value {
    let mut nonzero = Map::new();
    for (name, &b) in names.iter().zip(beta.iter()) {
        if b != 0.0 {
            nonzero.insert(name.clone(), num(b));
        }
    }
    let s = &sel.score;
    let scores: Vec<Value> = sel
        .scores
        .iter()
        .enumerate()
        .flat_map(|(k, row)| row.iter().map(move |s| score_json(k, s)))
        .collect();
    json!({
        "criterion": cfg.criterion.name(),
        "best": {
            "path_index": sel.path_index,
            "sample_index": sel.sample_index,
            "eta": num(s.eta),
            "rho": num(s.rho),
            "q": s.q,
            "criterion_value": num(s.criterion),
            "sigma2": opt_num(s.sigma2),
            "beta_nonzero": Value::Object(nonzero),
        },
        "scores": scores,
    })
}

pub fn cmd_select(data: &Path, cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let a = load(data, cfg)?;
    let prep = Prepared::new(&a, cfg.standardize);
    let paths = trace_all(&prep.prob, &cfg.specs(), cfg, out)?;
    write_paths(out, &a.names, &paths, &|b| prep.to_original(b))?;
    let sel = ebayes::select_model(&prep.prob, &paths, cfg.criterion).map_err(selection_error)?;
    let beta = prep.to_original(&sel.state.beta(prep.prob.p()));
    write_json(&out.join("report.json"), &report(cfg, &a.names, &sel, &beta))
}

/// Re-scores every row of a `path.csv` written by `path` or `select` with the configuration's
/// first penalty, writing `scores.json`.
pub fn cmd_score(data: &Path, cfg: &RunConfig, path_csv: &Path, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let a = load(data, cfg)?;
    let prep = Prepared::new(&a, cfg.standardize);
    let (names, rows) = read_path_csv(path_csv)?;
    if names != a.names {
        return Err(CliError::Input(format!(
            "{}: coefficient columns do not match the data",
            path_csv.display()
        )));
    }
    let spec = cfg.specs()[0];
    let p = prep.prob.p();
    let mut scores = Vec::with_capacity(rows.len());
    for (rho, beta) in rows {
        let b = prep.to_solver(&beta);
        let part = ActivePartition::from_beta(&prep.prob, &b);
        let state = PathState { rho, coefs: SparseCoefs::from_dense(&b, &part.active()), part };
        debug_assert_eq!(state.beta(p).len(), p);
        let s = ebayes::score_state(&prep.prob, &spec, &state, cfg.criterion).map_err(selection_error)?;
        scores.push(score_json(0, &s));
    }
    write_json(
        &out.join("scores.json"),
        &json!({ "criterion": cfg.criterion.name(), "scores": scores }),
    )
}

fn build_blocks(a: &Assembled, cfg: &RunConfig, base: &Path) -> Result<Vec<RegBlock>> {
    let genreg_err = |e: genreg::GenregError| CliError::Input(e.to_string());
    cfg.blocks
        .iter()
        .map(|b| {
            let cols = a.resolve(&b.columns)?;
            let m = cols.len();
            let reg = match &b.kind {
                BlockKind::Fused => genreg::build_fused(m).map_err(genreg_err)?,
                BlockKind::PolyTrend(d) => genreg::build_polytrend(m, *d).map_err(genreg_err)?,
                BlockKind::CubicBinned => genreg::build_cubic_binned(m).map_err(genreg_err)?,
                BlockKind::Identity => RegMatrix::identity(m),
                BlockKind::Custom(file) => {
                    let path = base.join(file);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
                    RegMatrix::from_triplets(&text, m).map_err(genreg_err)?
                }
            };
            Ok(RegBlock { reg, cols })
        })
        .collect()
}

/// Per-block fitted curves: one row per block column with the fit at `rho_max` and at the
/// selected model.
fn write_curves(
    out: &Path,
    a: &Assembled,
    blocks: &[RegBlock],
    at_max: &DVector<f64>,
    selected: &DVector<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("curves.csv")).map_err(|e| CliError::Io(e.into()))?;
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record(["block", "kind", "bin", "column", "rho_max_fit", "selected_fit"]).map_err(io)?;
    for (b, blk) in blocks.iter().enumerate() {
        for (bin, &j) in blk.cols.iter().enumerate() {
            w.write_record([
                b.to_string(),
                blk.reg.kind.name(),
                (bin + 1).to_string(),
                a.names[j].clone(),
                crate::output::fmt_f64(at_max[j]),
                crate::output::fmt_f64(selected[j]),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Result of a regularized run, exposed for tests and the acceptance suite.
pub struct GenregRun {
    pub names: Vec<String>,
    pub blocks: Vec<RegBlock>,
    pub reparam: Reparameterization,
    pub paths: Vec<SolutionPath>,
}

/// Path and selection on the reparameterized problem; every output is on the original
/// coefficient scale. Block matrices are applied to the raw columns, so `standardize` is ignored.
pub fn cmd_genreg(data: &Path, cfg: &RunConfig, out: &Path) -> Result<GenregRun> {
    std::fs::create_dir_all(out)?;
    if cfg.blocks.is_empty() {
        return Err(CliError::Input("genreg needs at least one entry in `blocks`".into()));
    }
    if cfg.standardize {
        log::info!("standardize is ignored by genreg");
    }
    let a = load(data, cfg)?;
    let base = data.parent().unwrap_or_else(|| Path::new("."));
    let blocks = build_blocks(&a, cfg, base)?;
    let (tprob, reparam) = genreg::reparameterize(&a.prob, &blocks).map_err(|e| CliError::Input(e.to_string()))?;
    let paths = trace_all(&tprob, &cfg.specs(), cfg, out)?;
    write_paths(out, &a.names, &paths, &|g| reparam.back_transform(g))?;
    let sel = ebayes::select_model(&tprob, &paths, cfg.criterion).map_err(selection_error)?;
    let beta = reparam.back_transform(&sel.state.beta(tprob.p()));
    write_json(&out.join("report.json"), &report(cfg, &a.names, &sel, &beta))?;
    let first = &paths[sel.path_index];
    let at_max = reparam.back_transform(&first.samples[0].beta(first.p));
    write_curves(out, &a, &blocks, &at_max, &beta)?;
    Ok(GenregRun { names: a.names, blocks, reparam, paths })
}
