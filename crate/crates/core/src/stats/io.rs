use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::unfold::{PointProcessBatch, UnfoldedSample};
use crate::error::{Error, Result};

/// Columnar text: a header with anchor and window, then one row per
/// realization `seed<TAB>realization<TAB>count<TAB>atoms;separated`.
pub fn batch_to_text(batch: &PointProcessBatch) -> String {
    let mut out = String::new();
    writeln!(out, "# unfolded point process batch").unwrap();
    writeln!(out, "e0\t{}", batch.e0).unwrap();
    writeln!(out, "half_width\t{}", batch.half_width).unwrap();
    writeln!(out, "seed\trealization\tcount\tatoms").unwrap();
    for s in &batch.samples {
        let atoms: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}\t{}\t{}\t{}", s.seed, s.realization, s.values.len(), atoms.join(";")).unwrap();
    }
    out
}

pub fn batch_from_text(text: &str, origin: &str) -> Result<PointProcessBatch> {
    let bad = |m: String| Error::Parse { path: origin.into(), message: m };
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let mut header = |key: &str| -> Result<f64> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        match line.split_once('\t') {
            Some((k, v)) if k == key => v.parse().map_err(|_| bad(format!("{key}: `{v}`"))),
            _ => Err(bad(format!("expected {key}, found `{line}`"))),
        }
    };
    let e0 = header("e0")?;
    let half_width = header("half_width")?;
    if lines.next() != Some("seed\trealization\tcount\tatoms") {
        return Err(bad("missing column header".into()));
    }
    let mut samples = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("row `{line}`")));
        }
        let seed = cols[0].parse().map_err(|_| bad(format!("seed `{}`", cols[0])))?;
        let realization = cols[1].parse().map_err(|_| bad(format!("realization `{}`", cols[1])))?;
        let count: usize = cols[2].parse().map_err(|_| bad(format!("count `{}`", cols[2])))?;
        let values: Vec<f64> = if cols[3].is_empty() {
            Vec::new()
        } else {
            cols[3].split(';').map(|v| v.parse().map_err(|_| bad(format!("atom `{v}`")))).collect::<Result<_>>()?
        };
        if values.len() != count {
            return Err(bad(format!("row declares {count} atoms, has {}", values.len())));
        }
        samples.push(UnfoldedSample { e0, half_width, values, seed, realization });
    }
    super::unfold::collect_point_process(samples)
}

pub fn write_batch(batch: &PointProcessBatch, path: &Path) -> Result<()> {
    fs::write(path, batch_to_text(batch))?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<PointProcessBatch> {
    batch_from_text(&fs::read_to_string(path)?, &path.display().to_string())
}
