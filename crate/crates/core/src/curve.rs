//! Learning-curve CSV emission.
//!
//! Format: header `env,steps,mean_return,std_return,wall_clock_s`, one row per
//! evaluation, floats in full-precision decimal notation (shortest string that
//! round-trips the exact f64). The `wall_clock_s` column is reserved; trainers
//! write 0 so that run outputs stay bit-reproducible. Rows must be strictly
//! increasing in `steps` within each environment.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "env,steps,mean_return,std_return,wall_clock_s";

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub env_name: String,
    pub env_steps: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub wall_clock_s: f64,
}

fn validate(rows: &[CurveRow]) -> Result<()> {
    let mut last: std::collections::BTreeMap<&str, usize> = Default::default();
    for row in rows {
        if row.env_name.contains(',') || row.env_name.contains('\n') {
            return Err(Error::InvalidData(format!("env name {:?} breaks CSV", row.env_name)));
        }
        if let Some(prev) = last.get(row.env_name.as_str()) {
            if row.env_steps <= *prev {
                return Err(Error::InvalidData(format!(
                    "curve rows for {} not strictly increasing: {} after {}",
                    row.env_name, row.env_steps, prev
                )));
            }
        }
        last.insert(&row.env_name, row.env_steps);
    }
    Ok(())
}

pub fn curve_to_string(rows: &[CurveRow]) -> Result<String> {
    validate(rows)?;
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.env_name, row.env_steps, row.mean_return, row.std_return, row.wall_clock_s
        ));
    }
    Ok(out)
}

pub fn write_curve(rows: &[CurveRow], path: &Path) -> Result<()> {
    fs::write(path, curve_to_string(rows)?)?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(Error::InvalidData(format!("bad curve header: {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidData(format!("curve line {} has {} fields", i + 2, fields.len())));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidData(format!("curve line {}: bad {what}: {e}", i + 2)))
        };
        rows.push(CurveRow {
            env_name: fields[0].to_string(),
            env_steps: fields[1]
                .parse()
                .map_err(|e| Error::InvalidData(format!("curve line {}: bad steps: {e}", i + 2)))?,
            mean_return: parse(fields[2], "mean_return")?,
            std_return: parse(fields[3], "std_return")?,
            wall_clock_s: parse(fields[4], "wall_clock_s")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(env: &str, steps: usize, mean: f64) -> CurveRow {
        CurveRow {
            env_name: env.to_string(),
            env_steps: steps,
            mean_return: mean,
            std_return: mean / 10.0,
            wall_clock_s: 0.0,
        }
    }

    #[test]
    fn empty_run_writes_header_only() {
        let text = curve_to_string(&[]).unwrap();
        assert_eq!(text, format!("{CURVE_HEADER}\n"));
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let rows = vec![
            row("Base", 1000, 12.345678901234567),
            row("Base", 2000, -0.000012345),
            row("SmallMass", 1500, 1e-300),
        ];
        write_curve(&rows, &path).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.env_name, b.env_name);
            assert_eq!(a.env_steps, b.env_steps);
            assert_eq!(a.mean_return.to_bits(), b.mean_return.to_bits());
            assert_eq!(a.std_return.to_bits(), b.std_return.to_bits());
        }
    }

    #[test]
    fn interleaved_envs_allowed_monotone_per_env_enforced() {
        let ok = vec![row("A", 10, 1.0), row("B", 10, 1.0), row("A", 20, 2.0), row("B", 20, 2.0)];
        assert!(curve_to_string(&ok).is_ok());
        let bad = vec![row("A", 10, 1.0), row("A", 10, 2.0)];
        assert!(curve_to_string(&bad).is_err());
    }
}
