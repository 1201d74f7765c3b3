//! CSV ingestion and problem assembly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sparsepath::model::{GlmProblem, Standardization};

use crate::config::{ColumnSel, RunConfig};
use crate::error::{CliError, Result};

pub const INTERCEPT_NAME: &str = "(intercept)";

/// Predictors and response read from a CSV file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Reads a comma-separated file with a header row. Every column other than `response` is a
/// predictor. Cells must be numeric and rows must have the header's width.
pub fn read_csv(path: &Path, response: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    read_csv_from(file, response)
}

pub fn read_csv_from<R: std::io::Read>(input: R, response: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("bad header: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    let ycol = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::Input(format!("response column {response:?} not found in header")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // line numbers count the header as line 1
        let line = r + 2;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => CliError::Input(format!(
                "line {line}: expected {expected_len} fields, found {len}"
            )),
            _ => CliError::Input(format!("line {line}: {e}")),
        })?;
        let mut row = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!("line {line}, column {} ({}): non-numeric value {cell:?}", c + 1, header[c]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!("line {line}, column {} ({}): non-finite value", c + 1, header[c])));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    let names: Vec<String> = header.iter().enumerate().filter(|&(c, _)| c != ycol).map(|(_, h)| h.clone()).collect();
    let n = rows.len();
    let cols: Vec<usize> = (0..header.len()).filter(|&c| c != ycol).collect();
    let x = DMatrix::from_fn(n, cols.len(), |i, k| rows[i][cols[k]]);
    let y = DVector::from_fn(n, |i, _| rows[i][ycol]);
    Ok(Dataset { names, x, y })
}

/// A problem in the tool's coefficient order: optional intercept first, then the predictors.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub prob: GlmProblem,
    pub names: Vec<String>,
    pub intercept: Option<usize>,
}

impl Assembled {
    /// Index of a predictor name in coefficient order.
    pub fn column(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::Input(format!("unknown column {name:?}")))
    }

    pub fn resolve(&self, sel: &ColumnSel) -> Result<Vec<usize>> {
        match sel {
            ColumnSel::List(names) => names.iter().map(|n| self.column(n)).collect(),
            ColumnSel::Range(a, b) => {
                let (i, j) = (self.column(a)?, self.column(b)?);
                if i > j {
                    return Err(CliError::Input(format!("column range {a}..{b} runs backwards")));
                }
                Ok((i..=j).collect())
            }
        }
    }
}

pub fn assemble(ds: &Dataset, cfg: &RunConfig) -> Result<Assembled> {
    let n = ds.x.nrows();
    let off = usize::from(cfg.intercept);
    let p = ds.x.ncols() + off;
    let x = DMatrix::from_fn(n, p, |i, j| if j < off { 1.0 } else { ds.x[(i, j - off)] });
    let mut names = Vec::with_capacity(p);
    if cfg.intercept {
        names.push(INTERCEPT_NAME.to_string());
    }
    names.extend(ds.names.iter().cloned());
    let mut penalized: Vec<bool> = (0..p).map(|j| j >= off).collect();
    for u in &cfg.unpenalized {
        let j = names
            .iter()
            .position(|n| n == u)
            .ok_or_else(|| CliError::Input(format!("unpenalized column {u:?} not in data")))?;
        penalized[j] = false;
    }
    let prob = GlmProblem::new(x, ds.y.clone(), cfg.loss, penalized).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Assembled { prob, names, intercept: cfg.intercept.then_some(0) })
}

/// The problem handed to the solver, with the map back to the original coefficient scale.
pub struct Prepared {
    pub prob: GlmProblem,
    pub standardization: Option<Standardization>,
}

impl Prepared {
    pub fn new(a: &Assembled, standardize: bool) -> Prepared {
        if standardize {
            let (prob, st) = Standardization::apply(&a.prob, a.intercept);
            Prepared { prob, standardization: Some(st) }
        } else {
            Prepared { prob: a.prob.clone(), standardization: None }
        }
    }

    pub fn to_original(&self, beta: &DVector<f64>) -> DVector<f64> {
        match &self.standardization {
            Some(st) => st.to_original(beta),
            None => beta.clone(),
        }
    }

    pub fn to_solver(&self, beta: &DVector<f64>) -> DVector<f64> {
        match &self.standardization {
            Some(st) => st.to_standardized(beta),
            None => beta.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_named_response() {
        let ds = read_csv_from("a, y ,b\n1,2,3\n4,5,6\n".as_bytes(), "y").unwrap();
        assert_eq!(ds.names, vec!["a", "b"]);
        assert_eq!(ds.y.as_slice(), &[2.0, 5.0]);
        assert_eq!(ds.x[(1, 1)], 6.0);
    }

    #[test]
    fn diagnostics_name_line_and_column() {
        let e = read_csv_from("a,y\n1,2\n3,x\n".as_bytes(), "y").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 3, column 2 (y)"), "{e}");
        let e = read_csv_from("a,y\n1,2\n3\n".as_bytes(), "y").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(read_csv_from("a,b\n1,2\n".as_bytes(), "y").is_err());
    }

    #[test]
    fn intercept_and_unpenalized_columns() {
        let ds = read_csv_from("a,b,y\n1,2,3\n4,5,7\n0,1,1\n".as_bytes(), "y").unwrap();
        let cfg = RunConfig { unpenalized: vec!["b".into()], ..Default::default() };
        let a = assemble(&ds, &cfg).unwrap();
        assert_eq!(a.names, vec![INTERCEPT_NAME, "a", "b"]);
        assert_eq!(a.prob.penalized_indices(), vec![1]);
        assert_eq!(a.resolve(&ColumnSel::Range("a".into(), "b".into())).unwrap(), vec![1, 2]);
    }
}
