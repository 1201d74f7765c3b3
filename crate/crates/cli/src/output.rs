//! Serialization helpers. Every float is written with 17 significant digits so files round-trip
//! exactly.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde_json::{json, Value};
use sparsepath::path::{EventKind, PathEvent};

use crate::error::{CliError, Result};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        // keep the sign bit out of the files
        "0".into()
    } else {
        format!("{x:.16e}")
    }
}

/// A JSON number carrying 17 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str(&fmt_f64(x)).expect("formatted float is valid JSON")
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| CliError::Io(e.into()))?;
    writeln!(f)?;
    Ok(())
}

/// `rho` then one column per coefficient.
pub fn write_path_csv(path: &Path, names: &[String], rows: &[(f64, DVector<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.into()))?;
    let mut header = vec!["rho".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| CliError::Io(e.into()))?;
    for (rho, beta) in rows {
        let mut rec = vec![fmt_f64(*rho)];
        rec.extend(beta.iter().map(|&b| fmt_f64(b)));
        w.write_record(&rec).map_err(|e| CliError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_path_csv`]; returns the coefficient names and the rows.
pub fn read_path_csv(path: &Path) -> Result<(Vec<String>, Vec<(f64, DVector<f64>)>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Input(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header.first().map(String::as_str) != Some("rho") {
        return Err(CliError::Input(format!("{}: first column must be rho", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("line {}: {e}", i + 2)))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| CliError::Input(format!("line {}: bad number {c:?}", i + 2))))
            .collect::<Result<_>>()?;
        rows.push((vals[0], DVector::from_vec(vals[1..].to_vec())));
    }
    Ok((header[1..].to_vec(), rows))
}

pub fn event_json(e: &PathEvent) -> Value {
    let index = match e.kind {
        EventKind::Deactivate(j) | EventKind::Activate(j) => json!(j),
        _ => Value::Null,
    };
    let mut v = json!({ "kind": e.kind.name(), "rho": num(e.rho) });
    if !index.is_null() {
        v["index"] = index;
    }
    v["detail"] = json!(e.detail);
    v
}
