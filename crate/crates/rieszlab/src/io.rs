//! Measure file formats.
//!
//! CSV: a `# dim=<d>` header comment followed by one `x1,...,xd,w` row per
//! atom. JSON: `{"dim": d, "points": [[...], ...], "weights": [...]}`.
//! Readers validate the full measure invariants and recompute the
//! resolution; writers emit shortest round-trip decimal so a write/read
//! cycle is lossless.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Writes a measure as JSON.
pub fn write_measure_json(mu: &DiscreteMeasure, path: &Path) -> Result<()> {
    let doc = MeasureJson {
        dim: mu.dim(),
        points: mu.points(),
        weights: mu.weights().to_vec(),
    };
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Parse(format!("measure serialization failed: {e}")))?;
    std::fs::write(path, body + "\n")?;
    Ok(())
}

/// Writes a measure as CSV with a `# dim=<d>` header.
pub fn write_measure_csv(mu: &DiscreteMeasure, path: &Path) -> Result<()> {
    let mut out = format!("# dim={}\n", mu.dim());
    for i in 0..mu.len() {
        let mut fields: Vec<String> = mu.point(i).iter().map(|c| format!("{c}")).collect();
        fields.push(format!("{}", mu.weight(i)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a measure from JSON.
pub fn read_measure_json(path: &Path) -> Result<DiscreteMeasure> {
    let body = std::fs::read_to_string(path)?;
    let doc: MeasureJson = serde_json::from_str(&body)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mu = DiscreteMeasure::new(doc.points, doc.weights)?;
    if mu.dim() != doc.dim {
        return Err(Error::Parse(format!(
            "{}: declared dim={} but points have dimension {}",
            path.display(),
            doc.dim,
            mu.dim()
        )));
    }
    Ok(mu)
}

/// Reads a measure from CSV.
pub fn read_measure_csv(path: &Path) -> Result<DiscreteMeasure> {
    let body = std::fs::read_to_string(path)?;
    let mut dim: Option<usize> = None;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (lineno, raw) in body.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("dim=") {
                let d: usize = v.trim().parse().map_err(|_| {
                    Error::Parse(format!(
                        "{} line {}: bad dimension declaration {comment:?}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                dim = Some(d);
            }
            continue;
        }
        let d = dim.ok_or_else(|| {
            Error::Parse(format!(
                "{}: data row before the `# dim=<d>` header",
                path.display()
            ))
        })?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse(format!(
                "{} line {}: expected {} fields (x1..x{d},w), got {}",
                path.display(),
                lineno + 1,
                d + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(d);
        for f in &fields[..d] {
            row.push(f.parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{} line {}: bad coordinate {f:?}",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        let w = fields[d].parse::<f64>().map_err(|_| {
            Error::Parse(format!(
                "{} line {}: bad weight {:?}",
                path.display(),
                lineno + 1,
                fields[d]
            ))
        })?;
        points.push(row);
        weights.push(w);
    }
    if dim.is_none() {
        return Err(Error::Parse(format!(
            "{}: missing `# dim=<d>` header",
            path.display()
        )));
    }
    DiscreteMeasure::new(points, weights)
}

/// Dispatches on the file extension: `.json` or `.csv`.
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_measure_json(path),
        Some("csv") => read_measure_csv(path),
        other => Err(Error::InvalidParameter(format!(
            "unsupported measure file extension {other:?} for {}; use .csv or .json",
            path.display()
        ))),
    }
}

/// Dispatches on the file extension: `.json` or `.csv`.
pub fn write_measure(mu: &DiscreteMeasure, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => write_measure_json(mu, path),
        Some("csv") => write_measure_csv(mu, path),
        other => Err(Error::InvalidParameter(format!(
            "unsupported measure file extension {other:?} for {}; use .csv or .json",
            path.display()
        ))),
    }
}
