use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bcosfire::{paired_ttest, TTestResult};

use crate::output::sig6;

/// `FILE:COLUMN` reference to a numeric CSV column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub file: PathBuf,
    pub column: String,
}

impl std::str::FromStr for ColumnRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.rsplit_once(':') {
            Some((file, column)) if !file.is_empty() && !column.is_empty() => Ok(Self {
                file: file.into(),
                column: column.to_owned(),
            }),
            _ => Err(format!("expected FILE:COLUMN, got {s:?}")),
        }
    }
}

pub fn read_column(r: &ColumnRef) -> Result<Vec<f64>> {
    let path: &Path = &r.file;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let Some(idx) = headers.iter().position(|h| h == r.column) else {
        bail!("{} has no column {:?} (columns: {})", path.display(), r.column, headers.iter().collect::<Vec<_>>().join(", "));
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(idx).unwrap_or("");
        let v: f64 = field
            .parse()
            .with_context(|| format!("{} row {}: {:?} is not a number", path.display(), row + 2, field))?;
        values.push(v);
    }
    Ok(values)
}

pub fn run(a: &ColumnRef, b: &ColumnRef, alpha: f64) -> Result<TTestResult> {
    let (xa, xb) = (read_column(a)?, read_column(b)?);
    let r = paired_ttest(&xa, &xb, alpha)?;
    println!(
        "h={} p={} t={} dof={} n={}",
        r.h,
        sig6(r.p),
        sig6(r.t_statistic),
        r.dof,
        xa.len()
    );
    Ok(r)
}
