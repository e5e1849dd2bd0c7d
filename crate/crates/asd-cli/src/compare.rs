//! Comparison of two trajectory CSVs: per-(class,state) sup gaps and a
//! per-time gap series, with linear interpolation across differing grids.

use crate::CliError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

type Series = BTreeMap<(String, String), Vec<(f64, f64)>>;

/// Read a CSV with columns (t | time), class, state, and a value column named
/// fraction, mean, or value. Extra columns are ignored.
fn read_series(path: &Path) -> Result<Series, CliError> {
    let doc = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = doc.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Runtime(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |names: &[&str]| cols.iter().position(|c| names.contains(c));
    let ti = find(&["t", "time"])
        .ok_or_else(|| CliError::Runtime(format!("{}: no time column", path.display())))?;
    let ci = find(&["class"])
        .ok_or_else(|| CliError::Runtime(format!("{}: no class column", path.display())))?;
    let si = find(&["state"])
        .ok_or_else(|| CliError::Runtime(format!("{}: no state column", path.display())))?;
    let vi = find(&["fraction", "mean", "value"]).ok_or_else(|| {
        CliError::Runtime(format!("{}: no fraction/mean/value column", path.display()))
    })?;

    let mut series: Series = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<&str, CliError> {
            fields.get(i).copied().ok_or_else(|| {
                CliError::Runtime(format!("{}:{}: short row", path.display(), lineno + 2))
            })
        };
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse().map_err(|e| {
                CliError::Runtime(format!("{}:{}: {e}", path.display(), lineno + 2))
            })
        };
        let t = parse(get(ti)?)?;
        let v = parse(get(vi)?)?;
        let key = (get(ci)?.to_string(), get(si)?.to_string());
        series.entry(key).or_default().push((t, v));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    Ok(series)
}

/// Linear interpolation; None outside the sampled range (beyond a small slack).
fn interpolate(pts: &[(f64, f64)], t: f64) -> Option<f64> {
    let eps = 1e-9;
    let (t0, _) = *pts.first()?;
    let (t1, _) = *pts.last()?;
    if t < t0 - eps || t > t1 + eps {
        return None;
    }
    let i = pts.partition_point(|&(x, _)| x < t);
    if i == 0 {
        return Some(pts[0].1);
    }
    if i == pts.len() {
        return Some(pts[pts.len() - 1].1);
    }
    let (xa, ya) = pts[i - 1];
    let (xb, yb) = pts[i];
    if (xb - xa).abs() < eps {
        return Some(yb);
    }
    Some(ya + (yb - ya) * (t - xa) / (xb - xa))
}

pub struct CompareReport {
    /// Per-(class,state) sup gap.
    pub sup_gaps: BTreeMap<(String, String), f64>,
    pub sup_gap: f64,
    pub gaps_csv: String,
}

pub fn compare(a: &Path, b: &Path) -> Result<CompareReport, CliError> {
    let sa = read_series(a)?;
    let sb = read_series(b)?;
    let keys: Vec<_> = sa.keys().filter(|k| sb.contains_key(*k)).cloned().collect();
    if keys.is_empty() {
        return Err(CliError::Runtime(
            "the files share no (class, state) series".into(),
        ));
    }
    let mut sup_gaps = BTreeMap::new();
    let mut csv = String::from("t,class,state,gap\n");
    let mut sup_gap = 0.0f64;
    for key in keys {
        let pa = &sa[&key];
        let pb = &sb[&key];
        let mut sup = 0.0f64;
        for &(t, va) in pa {
            let vb = interpolate(pb, t).ok_or_else(|| {
                CliError::Runtime(format!(
                    "grid mismatch: t={t} for ({}, {}) is outside the second file's range",
                    key.0, key.1
                ))
            })?;
            let gap = (va - vb).abs();
            sup = sup.max(gap);
            let _ = writeln!(csv, "{t},{},{},{gap}", key.0, key.1);
        }
        sup_gap = sup_gap.max(sup);
        sup_gaps.insert(key, sup);
    }
    Ok(CompareReport {
        sup_gaps,
        sup_gap,
        gaps_csv: csv,
    })
}
