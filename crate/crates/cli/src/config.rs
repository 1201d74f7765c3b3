//! Run configuration: flat `key = value` files merged with command-line overrides.
//!
//! Precedence is command line over file over built-in defaults. Unknown keys are rejected so a
//! typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::path::Path;

use sparsepath::ebayes::Criterion;
use sparsepath::model::Loss;
use sparsepath::penalty::{Family, PenaltySpec};

use crate::error::{CliError, Result};

const KEYS: &[&str] = &[
    "loss",
    "penalty",
    "eta",
    "rho_min",
    "rho_min_ratio",
    "max_predictors",
    "rtol",
    "standardize",
    "intercept",
    "response",
    "unpenalized",
    "criterion",
    "blocks",
    "seed",
    "n",
    "p",
    "replicates",
    "signal",
    "noise_sd",
];

/// How a regularization block picks its matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Fused,
    PolyTrend(usize),
    CubicBinned,
    Identity,
    /// Triplet file with header `i,j,v`.
    Custom(String),
}

/// A regularization block: matrix kind plus the predictor columns it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub kind: BlockKind,
    /// Either explicit names or a `first..last` range, resolved against the data header later.
    pub columns: ColumnSel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSel {
    List(Vec<String>),
    Range(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub loss: Loss,
    pub family: Family,
    pub etas: Vec<f64>,
    pub rho_min: Option<f64>,
    pub rho_min_ratio: f64,
    pub max_predictors: Option<usize>,
    pub rtol: f64,
    pub standardize: bool,
    pub intercept: bool,
    pub response: String,
    pub unpenalized: Vec<String>,
    pub criterion: Criterion,
    pub blocks: Vec<BlockSpec>,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub signal: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            loss: Loss::Gaussian,
            family: Family::Power,
            etas: vec![0.5],
            rho_min: None,
            rho_min_ratio: 1e-4,
            max_predictors: None,
            rtol: 1e-6,
            standardize: true,
            intercept: true,
            response: "y".into(),
            unpenalized: Vec::new(),
            criterion: Criterion::Eb,
            blocks: Vec::new(),
            seed: 1,
            n: 200,
            p: 10_000,
            replicates: 1,
            signal: [[3.0; 5], [-3.0; 5]].concat(),
            noise_sd: 1.0,
        }
    }
}

/// Raw key/value settings before validation.
#[derive(Debug, Clone, Default)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Parses a config file: one `key = value` per line, `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Settings> {
        let mut out = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected key = value", n + 1)))?;
            out.insert(k, v)?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse_file_text(&text)
    }

    /// Parses `key=value` overrides from the command line.
    pub fn parse_overrides(items: &[String]) -> Result<Settings> {
        let mut out = Settings::default();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("override {item:?} is not key=value")))?;
            out.insert(k, v)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Input(format!("unknown config key {key:?}")));
        }
        self.0.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Entries of `other` win.
    pub fn merged(mut self, other: Settings) -> Settings {
        self.0.extend(other.0);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Input(format!("config {key} = {value:?}: {why}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v, "not a number"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// `3*5,-3*5` expands to five 3s followed by five -3s.
fn parse_signal(v: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in split_list(v) {
        match tok.split_once('*') {
            Some((val, count)) => {
                let val: f64 = parse_num("signal", val.trim())?;
                let count: usize = parse_num("signal", count.trim())?;
                out.extend(std::iter::repeat_n(val, count));
            }
            None => out.push(parse_num("signal", tok)?),
        }
    }
    Ok(out)
}

fn parse_columns(v: &str) -> Result<ColumnSel> {
    if let Some((a, b)) = v.split_once("..") {
        return Ok(ColumnSel::Range(a.trim().to_string(), b.trim().to_string()));
    }
    let names: Vec<String> = split_list(v).map(String::from).collect();
    if names.is_empty() {
        return Err(bad("blocks", v, "empty column list"));
    }
    Ok(ColumnSel::List(names))
}

/// `cubic:b1..b10; fused:c1,c2,c3; polytrend2:d1..d8; custom=v.csv:e1..e4; identity:x1..x5`
fn parse_blocks(v: &str) -> Result<Vec<BlockSpec>> {
    let mut out = Vec::new();
    for part in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (kind, cols) = part
            .rsplit_once(':')
            .ok_or_else(|| bad("blocks", part, "expected kind:columns"))?;
        let kind = kind.trim();
        let kind = if let Some(file) = kind.strip_prefix("custom=") {
            BlockKind::Custom(file.trim().to_string())
        } else if let Some(d) = kind.strip_prefix("polytrend") {
            let d: usize = parse_num("blocks", d)?;
            if d == 0 {
                return Err(bad("blocks", part, "polytrend order must be at least 1"));
            }
            BlockKind::PolyTrend(d)
        } else {
            match kind {
                "fused" => BlockKind::Fused,
                "cubic" | "cubic_binned" => BlockKind::CubicBinned,
                "identity" => BlockKind::Identity,
                _ => return Err(bad("blocks", part, "unknown block kind")),
            }
        };
        out.push(BlockSpec { kind, columns: parse_columns(cols)? });
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(v) = s.get("loss") {
            c.loss = Loss::parse(v).ok_or_else(|| bad("loss", v, "expected gaussian, logistic or poisson"))?;
        }
        if let Some(v) = s.get("penalty") {
            c.family = Family::parse(v).ok_or_else(|| bad("penalty", v, "expected power, enet, log, clog, scad or mcp"))?;
        }
        if let Some(v) = s.get("eta") {
            c.etas = split_list(v).map(|t| parse_num("eta", t)).collect::<Result<_>>()?;
        } else {
            c.etas = match c.family {
                Family::Power => vec![0.5],
                Family::ElasticNet => vec![1.5],
                Family::Log => vec![1.0],
                Family::ContinuousLog => vec![0.0],
                Family::Scad => vec![3.7],
                Family::McPlus => vec![2.0],
            };
        }
        if c.family == Family::ContinuousLog {
            c.etas = vec![0.0];
        }
        if c.etas.is_empty() {
            return Err(bad("eta", s.get("eta").unwrap_or(""), "empty grid"));
        }
        for &e in &c.etas {
            PenaltySpec::new(c.family, e).map_err(|err| bad("eta", &e.to_string(), &err.to_string()))?;
        }
        if let Some(v) = s.get("rho_min") {
            let r: f64 = parse_num("rho_min", v)?;
            if !(r >= 0.0) {
                return Err(bad("rho_min", v, "must be nonnegative"));
            }
            c.rho_min = Some(r);
        }
        if let Some(v) = s.get("rho_min_ratio") {
            c.rho_min_ratio = parse_num("rho_min_ratio", v)?;
            if !(c.rho_min_ratio > 0.0 && c.rho_min_ratio < 1.0) {
                return Err(bad("rho_min_ratio", v, "must lie in (0, 1)"));
            }
        }
        if let Some(v) = s.get("max_predictors") {
            c.max_predictors = match v.to_ascii_lowercase().as_str() {
                "none" | "" => None,
                _ => Some(parse_num("max_predictors", v)?),
            };
        }
        if let Some(v) = s.get("rtol") {
            c.rtol = parse_num("rtol", v)?;
            if !(c.rtol > 0.0 && c.rtol < 1.0) {
                return Err(bad("rtol", v, "must lie in (0, 1)"));
            }
        }
        if let Some(v) = s.get("standardize") {
            c.standardize = parse_bool("standardize", v)?;
        }
        if let Some(v) = s.get("intercept") {
            c.intercept = parse_bool("intercept", v)?;
        }
        if let Some(v) = s.get("response") {
            if v.is_empty() {
                return Err(bad("response", v, "empty name"));
            }
            c.response = v.to_string();
        }
        if let Some(v) = s.get("unpenalized") {
            c.unpenalized = split_list(v).map(String::from).collect();
        }
        if let Some(v) = s.get("criterion") {
            c.criterion = Criterion::parse(v).ok_or_else(|| bad("criterion", v, "expected eb, eb_glm, aic or bic"))?;
        }
        if let Some(v) = s.get("blocks") {
            c.blocks = parse_blocks(v)?;
        }
        if let Some(v) = s.get("seed") {
            c.seed = parse_num("seed", v)?;
        }
        if let Some(v) = s.get("n") {
            c.n = parse_num("n", v)?;
        }
        if let Some(v) = s.get("p") {
            c.p = parse_num("p", v)?;
        }
        if let Some(v) = s.get("replicates") {
            c.replicates = parse_num("replicates", v)?;
        }
        if let Some(v) = s.get("signal") {
            c.signal = parse_signal(v)?;
        }
        if let Some(v) = s.get("noise_sd") {
            c.noise_sd = parse_num("noise_sd", v)?;
            if !(c.noise_sd >= 0.0) {
                return Err(bad("noise_sd", v, "must be nonnegative"));
            }
        }
        Ok(c)
    }

    /// Defaults, then the optional file, then command-line overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let base = match file {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let merged = base.merged(Settings::parse_overrides(overrides)?);
        RunConfig::from_settings(&merged)
    }

    pub fn specs(&self) -> Vec<PenaltySpec> {
        self.etas
            .iter()
            .map(|&e| PenaltySpec::new(self.family, e).expect("validated at load"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let file = Settings::parse_file_text("loss = logistic\neta = 0.25, 1   # grid\nseed=7\n").unwrap();
        let cli = Settings::parse_overrides(&["eta=0.75".into()]).unwrap();
        let c = RunConfig::from_settings(&file.merged(cli)).unwrap();
        assert_eq!(c.loss, Loss::Logistic);
        assert_eq!(c.etas, vec![0.75]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.rtol, 1e-6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Settings::parse_overrides(&["etta=1".into()]).is_err());
        let s = Settings::parse_overrides(&["penalty=scad".into(), "eta=1.5".into()]).unwrap();
        assert!(RunConfig::from_settings(&s).is_err());
        assert!(Settings::parse_file_text("loss gaussian").is_err());
    }

    #[test]
    fn signal_and_blocks() {
        assert_eq!(parse_signal("3*2,-1,0.5*1").unwrap(), vec![3.0, 3.0, -1.0, 0.5]);
        let b = parse_blocks("cubic:b1..b10; polytrend2:a,b,c; custom=v.csv:x1..x3").unwrap();
        assert_eq!(b[0].kind, BlockKind::CubicBinned);
        assert_eq!(b[0].columns, ColumnSel::Range("b1".into(), "b10".into()));
        assert_eq!(b[1].kind, BlockKind::PolyTrend(2));
        assert_eq!(b[1].columns, ColumnSel::List(vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(b[2].kind, BlockKind::Custom("v.csv".into()));
        assert!(parse_blocks("wavy:a..b").is_err());
    }

    #[test]
    fn family_default_eta() {
        let s = Settings::parse_overrides(&["penalty=scad".into()]).unwrap();
        assert_eq!(RunConfig::from_settings(&s).unwrap().etas, vec![3.7]);
    }
}
