//! CSV and report writers. Floats are printed with 17 significant digits
//! so files round-trip the underlying f64 exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::functionals::EnergyLedger;
use crate::snapshot::Snapshot;
use crate::verify::CertifyEntry;
use crate::{Error, Real, Result};

/// 17 significant digits, enough to reconstruct the exact f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn sanitize(field: &str) -> Result<&str> {
    if field.contains(',') || field.contains('\n') || field.contains('"') {
        return Err(Error::InvalidInput(format!("field not CSV-safe: `{field}`")));
    }
    Ok(field)
}

pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut head = Vec::with_capacity(headers.len());
    for h in headers {
        head.push(sanitize(h)?.to_string());
    }
    writeln!(w, "{}", head.join(","))?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::DimensionMismatch { expected: headers.len(), got: row.len() });
        }
        let line: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Ledger as CSV: a `t` column followed by the ledger columns.
pub fn write_ledger_csv<T: Real>(path: &Path, ledger: &EnergyLedger<T>) -> Result<()> {
    let mut headers = vec!["t"];
    for (name, _) in &ledger.columns {
        headers.push(name.as_str());
    }
    let rows: Vec<Vec<f64>> = (0..ledger.len())
        .map(|i| {
            let mut row = Vec::with_capacity(headers.len());
            row.push(ledger.t[i].to_f64());
            for (_, col) in &ledger.columns {
                row.push(col[i].to_f64());
            }
            row
        })
        .collect();
    write_csv(path, &headers, &rows)
}

/// Ledger as a binary snapshot with the same column layout as the CSV.
pub fn ledger_snapshot<T: Real>(
    ledger: &EnergyLedger<T>,
    dim: u64,
    n_nodes: u64,
    n_boundary: u64,
) -> Result<Snapshot> {
    let mut names = vec!["t".to_string()];
    names.extend(ledger.columns.iter().map(|(n, _)| n.clone()));
    let mut data = Vec::with_capacity(ledger.len() * names.len());
    for i in 0..ledger.len() {
        data.push(ledger.t[i].to_f64());
        for (_, col) in &ledger.columns {
            data.push(col[i].to_f64());
        }
    }
    Snapshot::new(dim, n_nodes, n_boundary, names, data)
}

/// Certification report as a key-value text document.
pub fn write_report_text(path: &Path, entries: &[CertifyEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        writeln!(w, "{} = {}", e.name, e.status.as_str())?;
        writeln!(w, "{}.detail = {}", e.name, e.detail)?;
    }
    w.flush()?;
    Ok(())
}

/// Certification report as CSV (name, status, detail).
pub fn write_report_csv(path: &Path, entries: &[CertifyEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "name,status,detail")?;
    for e in entries {
        let detail = e.detail.replace(',', ";");
        writeln!(w, "{},{},{}", sanitize(&e.name)?, e.status.as_str(), sanitize(&detail)?)?;
    }
    w.flush()?;
    Ok(())
}
