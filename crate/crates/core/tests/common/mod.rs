//! Test-only oracles, independent of the library's solve path.

#![allow(dead_code)]

use coalesce::synthetic::{generate, SyntheticSpec};
use coalesce::{build_design, compute_gram, infer_schema, DesignMatrix, FeatureSchema, GramSystem, Table};

pub struct Fixture {
    pub schema: FeatureSchema,
    pub table: Table,
    pub design: DesignMatrix<f64>,
    pub f: Vec<f64>,
    pub gram: GramSystem<f64>,
}

pub fn fixture(rows: usize, numeric: usize, categorical: usize, seed: u64) -> Fixture {
    let data = generate(&SyntheticSpec {
        rows,
        numeric,
        categorical,
        levels: 3,
        seed,
    })
    .unwrap();
    let schema = infer_schema(&data.table, &data.hints()).unwrap();
    let design = build_design(&schema, &data.table).unwrap();
    let gram = compute_gram(&design, &data.predictions).unwrap();
    Fixture {
        schema,
        table: data.table,
        design,
        f: data.predictions,
        gram,
    }
}

/// The p = 6, N = 200 fixture: 4 numeric and 2 three-level categoricals.
pub fn p6() -> Fixture {
    fixture(200, 4, 2, 2024)
}

/// Least squares `min ||A β − y||` by Householder QR on the raw rows.
/// `a` is row-major `rows × cols`.
pub fn qr_lstsq(a: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut r = a.to_vec();
    let mut b = y.to_vec();
    for k in 0..cols {
        let norm = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<f64>().sqrt();
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let s: f64 = (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..rows {
            b[i] -= s * v[i - k];
        }
    }
    let mut beta = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = (k + 1..cols).map(|j| r[k * cols + j] * beta[j]).sum();
        beta[k] = (b[k] - s) / r[k * cols + k];
    }
    beta
}

/// QR fit of `f` on the given design columns.
pub fn qr_subset_fit(design: &DesignMatrix<f64>, f: &[f64], columns: &[usize]) -> Vec<f64> {
    let rows = design.rows();
    let k = columns.len();
    let mut a = Vec::with_capacity(rows * k);
    for r in 0..rows {
        let row = design.row(r);
        a.extend(columns.iter().map(|&j| row[j]));
    }
    qr_lstsq(&a, rows, k, f)
}

/// Design columns kept by a coalition mask: intercept plus every column of
/// member features.
pub fn retained_columns(design: &DesignMatrix<f64>, mask: u64) -> Vec<usize> {
    let mut cols = vec![0];
    for (i, range) in design.column_map().ranges().iter().enumerate() {
        if mask >> i & 1 == 1 {
            cols.extend(range.clone());
        }
    }
    cols
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values from the permutation-weight formula over all coalitions.
/// `v` is indexed by mask.
pub fn brute_force_shapley(p: usize, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), 1 << p);
    let pf = factorial(p);
    (0..p)
        .map(|i| {
            let mut phi = 0.0;
            for s in 0..(1u64 << p) {
                if s >> i & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = factorial(size) * factorial(p - size - 1) / pf;
                phi += w * (v[(s | 1 << i) as usize] - v[s as usize]);
            }
            phi
        })
        .collect()
}

pub fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
