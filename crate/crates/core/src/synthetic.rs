//! Seeded synthetic tabular data: correlated Gaussian numerics, categorical
//! features cut from correlated latents, and a nonlinear prediction column.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::tabular::{SchemaHints, Table};

/// Name of the prediction column in generated tables.
pub const PREDICTION_COLUMN: &str = "prediction";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub numeric: usize,
    pub categorical: usize,
    pub levels: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn features(&self) -> usize {
        self.numeric + self.categorical
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: Table,
    pub predictions: Vec<f64>,
}

impl SyntheticData {
    /// Hints that load this table as intended: categoricals forced, the
    /// prediction column excluded from the features.
    pub fn hints(&self) -> SchemaHints {
        SchemaHints {
            categorical: self
                .table
                .headers()
                .iter()
                .filter(|h| h.starts_with("cat"))
                .cloned()
                .collect(),
            target: Some(PREDICTION_COLUMN.to_owned()),
            ..Default::default()
        }
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.table.headers())?;
        for row in self.table.rows() {
            w.write_record(row)?;
        }
        w.flush().map_err(|source| crate::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Generates a dataset. Numeric features come first (`num0`, `num1`, ...),
/// then categoricals (`cat0`, ...) with levels `L0`, `L1`, ... of roughly
/// equal frequency.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let p = spec.features();
    if p == 0 || spec.rows == 0 || (spec.categorical > 0 && (spec.levels < 2 || spec.rows < spec.levels)) {
        return Err(crate::Error::InvalidConfig(format!("unusable synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.rows;

    // AR(1)-style chain across features so every pair is dependent.
    let mut latent = vec![vec![0.0f64; p]; n];
    for row in latent.iter_mut() {
        let mut prev = 0.0;
        for value in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = 0.6 * prev + z;
            *value = prev;
        }
    }

    // Equal-frequency bins of each categorical latent.
    let mut levels = vec![vec![0usize; spec.categorical]; n];
    for c in 0..spec.categorical {
        let j = spec.numeric + c;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| latent[a][j].total_cmp(&latent[b][j]).then(a.cmp(&b)));
        for (rank, &r) in order.iter().enumerate() {
            levels[r][c] = rank * spec.levels / n;
        }
    }

    let mut predictions = Vec::with_capacity(n);
    for r in 0..n {
        let x = &latent[r];
        let mut f = 0.5;
        for j in 0..spec.numeric {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            f += sign * (1.0 + j as f64 / spec.numeric as f64) * x[j];
        }
        if spec.numeric >= 2 {
            f += 0.4 * x[0] * x[1];
        }
        if spec.numeric >= 1 {
            f += x[spec.numeric - 1].sin();
        }
        for c in 0..spec.categorical {
            let sign = if c % 2 == 0 { 0.7 } else { -0.5 };
            f += sign * levels[r][c] as f64;
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        predictions.push(f + 0.1 * noise);
    }

    let mut headers: Vec<String> = (0..spec.numeric).map(|j| format!("num{j}")).collect();
    headers.extend((0..spec.categorical).map(|c| format!("cat{c}")));
    headers.push(PREDICTION_COLUMN.to_owned());
    let rows = (0..n)
        .map(|r| {
            let mut cells: Vec<String> = latent[r][..spec.numeric].iter().map(|v| v.to_string()).collect();
            cells.extend(levels[r].iter().map(|l| format!("L{l}")));
            cells.push(predictions[r].to_string());
            cells
        })
        .collect();
    Ok(SyntheticData {
        table: Table::new(headers, rows)?,
        predictions,
    })
}
