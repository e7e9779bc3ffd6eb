//! Acceptance checks. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use coalesce::synthetic::{generate, SyntheticData, SyntheticSpec};
use coalesce::{
    build_design, compute_gram, enumerate_all, explain_encoded, infer_schema, kappa_with_multiplier,
    sample_coalitions, shapley_kernel_weight, solve_plan_chunked, Assembly, CoalitionPlan, ContributionSource,
    ContributionVector, DesignMatrix, GramSystem, KernelShapSystem, SolverConfig,
};
use coalesce_cli::args::Cli;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Fixture {
    data: SyntheticData,
    design: DesignMatrix<f64>,
    gram: GramSystem<f64>,
}

impl Fixture {
    fn new(rows: usize, numeric: usize, categorical: usize, seed: u64) -> Self {
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
        Fixture { data, design, gram }
    }

    fn p(&self) -> usize {
        self.design.column_map().num_features()
    }
}

/// 1000 rows, 7 numeric features and 3 three-level categoricals.
fn p10() -> Fixture {
    Fixture::new(1000, 7, 3, 10)
}

/// 200 rows, 4 numeric features and 2 three-level categoricals.
fn p6() -> Fixture {
    Fixture::new(200, 4, 2, 2024)
}

/// Householder QR least squares on row-major `rows × cols`.
fn qr_lstsq(a: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
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

/// Full-width coefficients of the least squares fit on the coalition's
/// columns (intercept always kept), zero elsewhere.
fn oracle_fit(design: &DesignMatrix<f64>, f: &[f64], mask: u64) -> Vec<f64> {
    let mut cols = vec![0];
    for (i, range) in design.column_map().ranges().iter().enumerate() {
        if mask >> i & 1 == 1 {
            cols.extend(range.clone());
        }
    }
    let mut a = Vec::with_capacity(design.rows() * cols.len());
    for r in 0..design.rows() {
        let row = design.row(r);
        a.extend(cols.iter().map(|&j| row[j]));
    }
    let beta = qr_lstsq(&a, design.rows(), cols.len(), f);
    let mut full = vec![0.0; design.width()];
    for (&j, b) in cols.iter().zip(beta) {
        full[j] = b;
    }
    full
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Oracle fits for every coalition of the plan, in plan order.
fn oracle_fits(fx: &Fixture, plan: &CoalitionPlan<f64>) -> Vec<Vec<f64>> {
    plan.coalitions()
        .iter()
        .map(|c| oracle_fit(&fx.design, &fx.data.predictions, c.mask()))
        .collect()
}

fn oracle_phi(fx: &Fixture, system: &KernelShapSystem<f64>, fits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..fx.design.rows())
        .map(|r| {
            let x = fx.design.row(r);
            let v = ContributionVector::new(fits.iter().map(|b| dot(x, b)).collect());
            system.solve(&v).unwrap().phi
        })
        .collect()
}

fn config(gram: &GramSystem<f64>, multiplier: f64) -> SolverConfig<f64> {
    SolverConfig::new(kappa_with_multiplier(gram, multiplier).unwrap())
}

/// `(v, φ0, φ)` per design row from the penalized solve.
type Explained = Vec<(Vec<f64>, f64, Vec<f64>)>;

fn approx_explain(fx: &Fixture, plan: &CoalitionPlan<f64>, system: &KernelShapSystem<f64>, multiplier: f64) -> Explained {
    let (coeffs, _) = solve_plan_chunked(&fx.gram, plan, fx.design.column_map(), &config(&fx.gram, multiplier)).unwrap();
    (0..fx.design.rows())
        .map(|r| {
            let e = explain_encoded(system, ContributionSource::Approx(&coeffs), fx.design.row(r)).unwrap();
            (e.v.as_slice().to_vec(), e.shapley.phi0, e.shapley.phi)
        })
        .collect()
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ac1_approx_matches_exact() -> Outcome {
    let fx = p10();
    let plan = enumerate_all(fx.p(), 20, 1e6).unwrap();
    let start = Instant::now();
    let system = KernelShapSystem::for_plan(&plan).unwrap();
    let approx: Vec<Vec<f64>> = approx_explain(&fx, &plan, &system, 1e6).into_iter().map(|e| e.2).collect();
    let secs = start.elapsed().as_secs_f64();
    let exact = oracle_phi(&fx, &system, &oracle_fits(&fx, &plan));
    let (delta, scale) = (max_abs_diff(&approx, &exact), max_abs(&exact));
    outcome(
        delta <= 1e-5 * scale && secs < 60.0,
        format!("max|dphi| = {delta:.3e} vs bound {:.3e}; approx path {secs:.2} s (< 60 s)", 1e-5 * scale),
    )
}

fn ac2_kappa_convergence() -> Outcome {
    let start = Instant::now();
    let fx = p6();
    let plan = enumerate_all(fx.p(), 20, 1e6).unwrap();
    let system = KernelShapSystem::for_plan(&plan).unwrap();
    let exact = oracle_phi(&fx, &system, &oracle_fits(&fx, &plan));
    let scale = max_abs(&exact);
    let errs: Vec<f64> = [1e2, 1e3, 1e4, 1e5, 1e6]
        .iter()
        .map(|&m| {
            let approx: Vec<Vec<f64>> = approx_explain(&fx, &plan, &system, m).into_iter().map(|e| e.2).collect();
            max_abs_diff(&approx, &exact) / scale
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let monotone = errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let terminal = *errs.last().unwrap();
    outcome(
        monotone && terminal <= 1e-5 && secs < 5.0,
        format!(
            "relative err {}; terminal {terminal:.2e} (<= 1e-5); {secs:.2} s (< 5 s)",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn ac3_anchor_recovery() -> Outcome {
    let fx = p6();
    let plan = enumerate_all(fx.p(), 20, 1e6).unwrap();
    let start = Instant::now();
    let system = KernelShapSystem::for_plan(&plan).unwrap();
    let explained = approx_explain(&fx, &plan, &system, 1e8);
    let secs = start.elapsed().as_secs_f64();
    let f = &fx.data.predictions;
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let full = oracle_fit(&fx.design, f, (1 << fx.p()) - 1);
    let (mut empty_err, mut full_err) = (0.0f64, 0.0f64);
    for (r, (v, _, _)) in explained.iter().enumerate() {
        empty_err = empty_err.max((v[plan.empty_index()] - mean).abs() / mean.abs());
        let pred = dot(fx.design.row(r), &full);
        full_err = full_err.max((v[plan.full_index()] - pred).abs() / pred.abs());
    }
    outcome(
        empty_err <= 1e-6 && full_err <= 1e-10 && secs < 1.0,
        format!("v(empty) rel {empty_err:.2e} (<= 1e-6); v(full) rel {full_err:.2e} (<= 1e-10); {secs:.3} s (< 1 s)"),
    )
}

fn ac4_efficiency() -> Outcome {
    let fx = p10();
    let plan = enumerate_all(fx.p(), 20, 1e6).unwrap();
    let system = KernelShapSystem::for_plan(&plan).unwrap();
    let mut worst = 0.0f64;
    for (v, phi0, phi) in approx_explain(&fx, &plan, &system, coalesce::DEFAULT_KAPPA_MULTIPLIER) {
        let (empty, full) = (v[plan.empty_index()], v[plan.full_index()]);
        let gap = (phi0 + phi.iter().sum::<f64>() - full).abs();
        worst = worst.max(gap / (1e-4 * (full.abs() + empty.abs() + 1.0)));
    }
    outcome(
        worst <= 1.0,
        format!("worst efficiency gap is {worst:.2e} of its bound over 1000 rows"),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let cli = Cli::try_parse_from(std::iter::once("coalesce").chain(args.iter().copied())).unwrap();
    coalesce_cli::run(&cli).unwrap()
}

fn ac5_chunk_and_thread_invariance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    p10().data.write_csv(&train).unwrap();
    let train = train.to_str().unwrap();
    let mut outputs = Vec::new();
    for chunk in ["1", "64", "1024"] {
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("phi_{chunk}_{threads}.csv"));
            let code = run_cli(&[
                "explain",
                "--train",
                train,
                "--target",
                "prediction",
                "--categorical",
                "cat0,cat1,cat2",
                "--chunk-size",
                chunk,
                "--threads",
                threads,
                "--output",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            outputs.push(std::fs::read(&out).unwrap());
        }
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical && !outputs[0].is_empty(),
        format!("6 runs (chunk 1/64/all x threads 1/4), {} bytes each, identical: {identical}", outputs[0].len()),
    )
}

fn ac6_joint_equals_block() -> Outcome {
    let fx = Fixture::new(200, 3, 1, 4);
    let plan = enumerate_all(fx.p(), 20, 1e6).unwrap();
    let mut cfg = config(&fx.gram, 1e3);
    let (block, _) = solve_plan_chunked(&fx.gram, &plan, fx.design.column_map(), &cfg).unwrap();
    cfg.assembly = Assembly::Joint;
    let (joint, _) = solve_plan_chunked(&fx.gram, &plan, fx.design.column_map(), &cfg).unwrap();
    let equal = block.as_slice().len() == joint.as_slice().len()
        && block.as_slice().iter().zip(joint.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
    outcome(
        equal,
        format!("{} coefficients over {} coalitions bitwise equal: {equal}", block.as_slice().len(), plan.len()),
    )
}

fn ac7_batched_beats_sequential() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let code = run_cli(&[
        "bench",
        "--p-grid",
        "12",
        "--rows",
        "2000",
        "--threads",
        "1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let (mut approx, mut sequential, mut speedup) = (f64::NAN, f64::NAN, f64::NAN);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let secs: f64 = rec[3].parse().unwrap();
        match &rec[2] {
            "approx" => {
                approx = secs;
                speedup = rec[5].parse().unwrap();
            }
            "sequential" => sequential = secs,
            other => panic!("unexpected method {other}"),
        }
    }
    outcome(
        approx < 60.0 && approx < sequential && speedup > 1.0,
        format!("p=12, 4096 coalitions: approx {approx:.3} s, sequential {sequential:.3} s, reported speedup {speedup:.2}"),
    )
}

fn ac8_sampler_distribution() -> Outcome {
    let (p, n, seed) = (10usize, 4000usize, 42u64);
    let plan: CoalitionPlan<f64> = sample_coalitions(p, n, seed, 1e6).unwrap();
    let reproducible = plan == sample_coalitions(p, n, seed, 1e6).unwrap();
    let mut observed = vec![0.0; p - 1];
    for (c, &w) in plan.coalitions()[1..plan.full_index()].iter().zip(&plan.weights()[1..]) {
        observed[c.size() - 1] += w;
    }
    // P(size s) ∝ 1 / (s (p − s)).
    let raw: Vec<f64> = (1..p).map(|s| 1.0 / (s * (p - s)) as f64).collect();
    let total: f64 = raw.iter().sum();
    let chi2: f64 = observed
        .iter()
        .zip(&raw)
        .map(|(o, w)| {
            let mean = n as f64 * w / total;
            (o - mean).powi(2) / mean
        })
        .sum();
    let critical = ChiSquared::new((p - 2) as f64).unwrap().inverse_cdf(1.0 - 0.0027);
    outcome(
        chi2 < critical && reproducible,
        format!("chi2 = {chi2:.2} < {critical:.2} (df {}); reproducible: {reproducible}", p - 2),
    )
}

fn ac9_kernel_weights() -> Outcome {
    let mut symmetric = true;
    let mut anchors = true;
    for p in 1..=20 {
        anchors &= shapley_kernel_weight::<f64>(p, 0).unwrap() == 1e6 && shapley_kernel_weight::<f64>(p, p).unwrap() == 1e6;
        for s in 1..p {
            symmetric &= shapley_kernel_weight::<f64>(p, s).unwrap() == shapley_kernel_weight::<f64>(p, p - s).unwrap();
        }
    }
    outcome(
        symmetric && anchors,
        format!("p = 1..=20: symmetric {symmetric}, anchors exactly 1e6 {anchors}"),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("AC1", ac1_approx_matches_exact),
        ("AC2", ac2_kappa_convergence),
        ("AC3", ac3_anchor_recovery),
        ("AC4", ac4_efficiency),
        ("AC5", ac5_chunk_and_thread_invariance),
        ("AC6", ac6_joint_equals_block),
        ("AC7", ac7_batched_beats_sequential),
        ("AC8", ac8_sampler_distribution),
        ("AC9", ac9_kernel_weights),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let o = check();
        println!("{name} {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
