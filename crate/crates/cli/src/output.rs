use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use coalesce::{CoalitionPlan, FeatureSchema, ShapleyResult};

use crate::commands::{BenchRecord, RowResults};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// `row_id,base_value,phi_<feature>...`; failed rows are left out.
pub fn write_phi_csv(path: &Path, schema: &FeatureSchema, results: &RowResults) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["row_id".to_owned(), "base_value".to_owned()];
    header.extend(schema.names().map(|n| format!("phi_{n}")));
    w.write_record(&header)?;
    for (row, res) in results.iter().enumerate() {
        let Ok(r) = res else { continue };
        let mut record = vec![row.to_string(), fmt17(r.shapley.phi0)];
        record.extend(r.shapley.phi.iter().map(|&x| fmt17(x)));
        w.write_record(&record)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `row_id,mask,v` in plan order.
pub fn write_v_csv(path: &Path, plan: &CoalitionPlan<f64>, results: &RowResults) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["row_id", "mask", "v"])?;
    for (row, res) in results.iter().enumerate() {
        let Ok(r) = res else { continue };
        for (c, &v) in plan.coalitions().iter().zip(r.v.as_slice()) {
            w.write_record([row.to_string(), c.mask().to_string(), fmt17(v)])?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_bench_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["p", "n_coalitions", "method", "seconds", "peak_block_bytes", "speedup"])?;
    for r in records {
        w.write_record([
            r.p.to_string(),
            r.n_coalitions.to_string(),
            r.method.to_owned(),
            fmt17(r.seconds),
            r.peak_block_bytes.to_string(),
            fmt17(r.speedup),
        ])?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Side-by-side Shapley values rounded to two decimals.
pub fn human_table(schema: &FeatureSchema, rows: &[(&str, &ShapleyResult<f64>)]) -> String {
    let mut names = vec!["base"];
    names.extend(schema.names());
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let widths: Vec<usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            rows.iter()
                .map(|(_, r)| format!("{:.2}", value(r, i)).len())
                .max()
                .unwrap_or(0)
                .max(n.len())
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "Method");
    for (n, w) in names.iter().zip(&widths) {
        let _ = write!(out, "  {n:>w$}");
    }
    for (label, r) in rows {
        let _ = write!(out, "\n{label:<label_width$}");
        for (i, w) in widths.iter().enumerate() {
            let _ = write!(out, "  {:>w$.2}", value(r, i));
        }
    }
    out
}

fn value(r: &ShapleyResult<f64>, i: usize) -> f64 {
    if i == 0 {
        r.phi0
    } else {
        r.phi[i - 1]
    }
}
