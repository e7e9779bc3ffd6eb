use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use coalesce::synthetic::{self, SyntheticSpec};
use coalesce::{
    build_design, compute_gram, encode_row, enumerate_all, explain_encoded, fit_plan_exact, infer_schema, kappa_with_multiplier, load_predictions,
    sample_coalitions, sequential_refit, solve_plan_chunked, Assembly, CoalitionPlan, CoefficientSet,
    ContributionSource, DesignMatrix, ExactFits, FeatureSchema, FeatureValue, GramSystem, KernelShapSystem,
    RowExplanation, SchemaHints, SolveStats, SolverConfig, Table,
};

use crate::args::{BenchArgs, CoalitionMode, CompareArgs, DataArgs, ExplainArgs, Method, SolveArgs};
use crate::output;

/// Everything shared by the approximate and exact routes.
pub struct Prepared {
    pub schema: FeatureSchema,
    pub design: DesignMatrix<f64>,
    pub gram: GramSystem<f64>,
    pub plan: CoalitionPlan<f64>,
    pub system: KernelShapSystem<f64>,
    /// Observations to explain; a malformed row keeps its error message.
    pub rows: Vec<Result<Vec<FeatureValue>, String>>,
}

fn check_input(path: &Path) -> Result<()> {
    ensure!(path.is_file(), "input file {} does not exist", path.display());
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure!(dir.is_dir(), "output directory {} does not exist", dir.display());
    }
    Ok(())
}

fn validate_paths(data: &DataArgs, outputs: &[&Path]) -> Result<()> {
    check_input(&data.train)?;
    if let Some(p) = &data.predictions {
        check_input(p)?;
    }
    if let Some(p) = &data.explain {
        check_input(p)?;
    }
    for out in outputs {
        check_output(out)?;
    }
    Ok(())
}

fn build_plan(p: usize, solve: &SolveArgs) -> Result<CoalitionPlan<f64>> {
    ensure!(
        solve.anchor_weight > 0.0 && solve.anchor_weight.is_finite(),
        "anchor weight must be positive"
    );
    Ok(match solve.coalitions {
        CoalitionMode::All => enumerate_all(p, solve.exhaustive_cap, solve.anchor_weight)?,
        CoalitionMode::Sample(n) => sample_coalitions(p, n, solve.seed, solve.anchor_weight)?,
    })
}

pub fn prepare(data: &DataArgs, solve: &SolveArgs) -> Result<Prepared> {
    let table = Table::read_csv(&data.train).with_context(|| format!("loading {}", data.train.display()))?;
    let hints = SchemaHints {
        categorical: data.categorical.clone(),
        numeric: data.numeric.clone(),
        ignore: data.ignore.clone(),
        target: data.target.clone(),
    };
    let schema = infer_schema(&table, &hints)?;
    let f = match (&data.target, &data.predictions) {
        (Some(name), _) => table.numeric_column(name)?,
        (None, Some(path)) => load_predictions(path).with_context(|| format!("loading {}", path.display()))?,
        (None, None) => bail!("either --target or --predictions is required"),
    };
    let design = build_design(&schema, &table)?;
    let gram = compute_gram(&design, &f)?;
    let plan = build_plan(schema.len(), solve)?;
    let system = KernelShapSystem::for_plan(&plan)?;

    let explain_table = match &data.explain {
        Some(path) => Table::read_csv(path).with_context(|| format!("loading {}", path.display()))?,
        None => table,
    };
    let rows = (0..explain_table.len())
        .map(|r| explain_table.observation(r, &schema).map_err(|e| row_error(r, e)))
        .collect();
    Ok(Prepared {
        schema,
        design,
        gram,
        plan,
        system,
        rows,
    })
}

fn solver_config(gram: &GramSystem<f64>, solve: &SolveArgs) -> Result<SolverConfig<f64>> {
    let kappa = kappa_with_multiplier(gram, solve.kappa_multiplier)?;
    Ok(SolverConfig {
        kappa,
        chunk_size: solve.chunk_size as usize,
        assembly: if solve.joint_assembly {
            Assembly::Joint
        } else {
            Assembly::PerBlock
        },
        threads: None,
    })
}

fn with_threads<R: Send>(threads: Option<u64>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build()?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

pub type RowResults = Vec<Result<RowExplanation<f64>, String>>;

fn row_error(row: usize, e: coalesce::Error) -> String {
    coalesce::Error::Row { row, source: Box::new(e) }.to_string()
}

fn explain_rows(prep: &Prepared, source: ContributionSource<'_, f64>) -> RowResults {
    use rayon::prelude::*;
    let columns = prep.design.column_map();
    prep.rows
        .par_iter()
        .enumerate()
        .map(|(r, obs)| {
            let obs = obs.as_ref().map_err(Clone::clone)?;
            let x = encode_row::<f64>(&prep.schema, columns, obs).map_err(|e| row_error(r, e))?;
            explain_encoded(&prep.system, source, &x).map_err(|e| row_error(r, e))
        })
        .collect()
}

pub struct ApproxRun {
    pub coefficients: CoefficientSet<f64>,
    pub stats: SolveStats,
    pub results: RowResults,
    pub elapsed: Duration,
}

pub fn run_approx(prep: &Prepared, solve: &SolveArgs) -> Result<ApproxRun> {
    let start = Instant::now();
    let config = solver_config(&prep.gram, solve)?;
    let (coefficients, stats) = solve_plan_chunked(&prep.gram, &prep.plan, prep.design.column_map(), &config)?;
    let results = explain_rows(prep, ContributionSource::Approx(&coefficients));
    Ok(ApproxRun {
        coefficients,
        stats,
        results,
        elapsed: start.elapsed(),
    })
}

pub struct ExactRun {
    pub fits: ExactFits<f64>,
    pub results: RowResults,
    pub elapsed: Duration,
}

pub fn run_exact(prep: &Prepared) -> Result<ExactRun> {
    let start = Instant::now();
    let fits = fit_plan_exact(&prep.gram, &prep.plan, prep.design.column_map())?;
    let results = explain_rows(prep, ContributionSource::Exact(&fits));
    Ok(ExactRun {
        fits,
        results,
        elapsed: start.elapsed(),
    })
}

/// `shapley.csv` → `shapley.approx.csv`.
pub fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn manifest_path(output: &Path, manifest: &Option<PathBuf>) -> PathBuf {
    manifest.clone().unwrap_or_else(|| {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    })
}

#[derive(Serialize)]
struct Manifest<'a, A: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a A,
    features: Vec<&'a str>,
    coalitions: usize,
    outputs: Vec<PathBuf>,
}

fn write_manifest<A: Serialize>(
    path: &Path,
    command: &'static str,
    config: &A,
    schema: Option<&FeatureSchema>,
    coalitions: usize,
    outputs: Vec<PathBuf>,
) -> Result<()> {
    let manifest = Manifest {
        tool: "coalesce",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        features: schema.map(|s| s.names().collect()).unwrap_or_default(),
        coalitions,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reports per-row failures on stderr; returns how many there were.
fn report_failures(results: &RowResults) -> usize {
    let mut failed = 0;
    for e in results.iter().filter_map(|r| r.as_ref().err()) {
        eprintln!("error: {e}");
        failed += 1;
    }
    failed
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<i32> {
    let manifest = manifest_path(&args.output, &args.manifest);
    let mut outputs = vec![args.output.as_path(), manifest.as_path()];
    if let Some(v) = &args.emit_v {
        outputs.push(v);
    }
    validate_paths(&args.data, &outputs)?;

    let prep = prepare(&args.data, &args.solve)?;
    let runs: Vec<(&str, RowResults)> = with_threads(args.solve.threads, || -> Result<_> {
        let mut runs = Vec::new();
        if matches!(args.method, Method::Approx | Method::Both) {
            runs.push(("approx", run_approx(&prep, &args.solve)?.results));
        }
        if matches!(args.method, Method::Exact | Method::Both) {
            runs.push(("exact", run_exact(&prep)?.results));
        }
        Ok(runs)
    })??;

    let mut written = Vec::new();
    let mut failed = 0;
    for (tag, results) in &runs {
        let (phi_path, v_path) = if args.method == Method::Both {
            (suffixed(&args.output, tag), args.emit_v.as_deref().map(|p| suffixed(p, tag)))
        } else {
            (args.output.clone(), args.emit_v.clone())
        };
        output::write_phi_csv(&phi_path, &prep.schema, results)?;
        written.push(phi_path);
        if let Some(v_path) = v_path {
            output::write_v_csv(&v_path, &prep.plan, results)?;
            written.push(v_path);
        }
        failed = failed.max(report_failures(results));
    }
    write_manifest(&manifest, "explain", args, Some(&prep.schema), prep.plan.len(), written)?;
    Ok(if failed > 0 { 1 } else { 0 })
}

#[derive(Debug, Serialize)]
pub struct FeatureDelta {
    pub feature: String,
    pub max_abs_delta_phi: f64,
}

#[derive(Debug, Serialize)]
pub struct CoalitionDelta {
    pub mask: u64,
    pub max_abs_delta_v: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub rows: usize,
    pub coalitions: usize,
    pub tolerance: f64,
    pub max_abs_delta_phi: f64,
    pub max_abs_phi_exact: f64,
    pub relative_delta_phi: f64,
    pub max_abs_delta_v: f64,
    pub within_tolerance: bool,
    pub seconds_approx: f64,
    pub seconds_exact: f64,
    /// Exact seconds over approximate seconds.
    pub speedup: f64,
    pub per_feature: Vec<FeatureDelta>,
    pub per_coalition: Vec<CoalitionDelta>,
}

pub fn compare(prep: &Prepared, solve: &SolveArgs, tolerance: f64) -> Result<(CompareReport, Vec<[RowExplanation<f64>; 2]>)> {
    let approx = run_approx(prep, solve)?;
    let exact = run_exact(prep)?;
    let mut pairs = Vec::with_capacity(prep.rows.len());
    for (a, e) in approx.results.into_iter().zip(exact.results) {
        pairs.push([a.map_err(anyhow::Error::msg)?, e.map_err(anyhow::Error::msg)?]);
    }
    let p = prep.schema.len();
    let mut per_feature = vec![0.0f64; p];
    let mut per_coalition = vec![0.0f64; prep.plan.len()];
    let mut max_phi = 0.0f64;
    for [a, e] in &pairs {
        for i in 0..p {
            per_feature[i] = per_feature[i].max((a.shapley.phi[i] - e.shapley.phi[i]).abs());
            max_phi = max_phi.max(e.shapley.phi[i].abs());
        }
        for (j, (va, ve)) in a.v.as_slice().iter().zip(e.v.as_slice()).enumerate() {
            per_coalition[j] = per_coalition[j].max((va - ve).abs());
        }
    }
    let max_delta = per_feature.iter().copied().fold(0.0, f64::max);
    let seconds_approx = approx.elapsed.as_secs_f64();
    let seconds_exact = exact.elapsed.as_secs_f64();
    let report = CompareReport {
        rows: pairs.len(),
        coalitions: prep.plan.len(),
        tolerance,
        max_abs_delta_phi: max_delta,
        max_abs_phi_exact: max_phi,
        relative_delta_phi: if max_phi > 0.0 { max_delta / max_phi } else { max_delta },
        max_abs_delta_v: per_coalition.iter().copied().fold(0.0, f64::max),
        within_tolerance: max_delta <= tolerance * max_phi,
        seconds_approx,
        seconds_exact,
        speedup: seconds_exact / seconds_approx.max(f64::MIN_POSITIVE),
        per_feature: prep
            .schema
            .names()
            .zip(per_feature)
            .map(|(name, d)| FeatureDelta {
                feature: name.to_owned(),
                max_abs_delta_phi: d,
            })
            .collect(),
        per_coalition: prep
            .plan
            .coalitions()
            .iter()
            .zip(per_coalition)
            .map(|(c, d)| CoalitionDelta {
                mask: c.mask(),
                max_abs_delta_v: d,
            })
            .collect(),
    };
    Ok((report, pairs))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let manifest = manifest_path(&args.output, &args.manifest);
    validate_paths(&args.data, &[&args.output, &manifest])?;
    ensure!(args.tolerance >= 0.0, "tolerance must be non-negative");
    let prep = prepare(&args.data, &args.solve)?;
    let (report, pairs) = with_threads(args.solve.threads, || compare(&prep, &args.solve, args.tolerance))??;

    if let Some([a, e]) = pairs.first() {
        println!("{}", output::human_table(&prep.schema, &[("Exact", &e.shapley), ("Approx", &a.shapley)]));
    }
    println!(
        "max |dphi| = {:.3e} ({:.3e} relative), max |dv| = {:.3e}; approx {:.2} s, exact {:.2} s, speedup {:.2}x",
        report.max_abs_delta_phi,
        report.relative_delta_phi,
        report.max_abs_delta_v,
        report.seconds_approx,
        report.seconds_exact,
        report.speedup
    );
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&args.output, text + "\n").with_context(|| format!("writing {}", args.output.display()))?;
    write_manifest(
        &manifest,
        "compare",
        args,
        Some(&prep.schema),
        prep.plan.len(),
        vec![args.output.clone()],
    )?;
    if !report.within_tolerance {
        eprintln!(
            "error: max |dphi| {:.3e} exceeds tolerance {:.3e} x max |phi| {:.3e}",
            report.max_abs_delta_phi, args.tolerance, report.max_abs_phi_exact
        );
        return Ok(1);
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub p: usize,
    pub n_coalitions: usize,
    pub method: &'static str,
    pub seconds: f64,
    pub peak_block_bytes: usize,
    /// Sequential seconds over this method's seconds.
    pub speedup: f64,
}

/// Times the batched solve (Gram + chunked penalized solves) against
/// sequential per-coalition refits for one feature count.
pub fn bench_one(args: &BenchArgs, p: usize) -> Result<[BenchRecord; 2]> {
    ensure!(p >= 1, "feature counts must be positive");
    let categorical = args.n_categorical.min(p - 1);
    let data = synthetic::generate(&SyntheticSpec {
        rows: args.rows,
        numeric: p - categorical,
        categorical,
        levels: args.levels,
        seed: args.seed.wrapping_add(p as u64),
    })?;
    let schema = infer_schema(&data.table, &data.hints())?;
    let design = build_design::<f64>(&schema, &data.table)?;
    let plan = enumerate_all(p, coalesce::DEFAULT_EXHAUSTIVE_CAP, coalesce::DEFAULT_ANCHOR_WEIGHT)?;
    let q = design.width();

    let start = Instant::now();
    let gram = compute_gram(&design, &data.predictions)?;
    let config = SolverConfig {
        kappa: kappa_with_multiplier(&gram, args.kappa_multiplier)?,
        chunk_size: args.chunk_size as usize,
        assembly: Assembly::PerBlock,
        threads: args.threads.map(|t| t as usize),
    };
    let (_, stats) = solve_plan_chunked(&gram, &plan, design.column_map(), &config)?;
    let approx_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    sequential_refit(&design, &data.predictions, &plan)?;
    let seq_secs = start.elapsed().as_secs_f64();

    let seq_bytes = 2 * q * q * std::mem::size_of::<f64>();
    Ok([
        BenchRecord {
            p,
            n_coalitions: plan.len(),
            method: "approx",
            seconds: approx_secs,
            peak_block_bytes: stats.peak_bytes,
            speedup: seq_secs / approx_secs.max(f64::MIN_POSITIVE),
        },
        BenchRecord {
            p,
            n_coalitions: plan.len(),
            method: "sequential",
            seconds: seq_secs,
            peak_block_bytes: seq_bytes,
            speedup: 1.0,
        },
    ])
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let manifest = manifest_path(&args.output, &args.manifest);
    check_output(&args.output)?;
    check_output(&manifest)?;
    ensure!(!args.p_grid.is_empty(), "empty --p-grid");
    let mut records = Vec::new();
    for &p in &args.p_grid {
        let [a, s] = bench_one(args, p)?;
        println!(
            "p={:>2} coalitions={:>6}  approx {:>8.3} s  sequential {:>8.3} s  speedup {:>7.2}x",
            p, a.n_coalitions, a.seconds, s.seconds, a.speedup
        );
        records.push(a);
        records.push(s);
    }
    output::write_bench_csv(&args.output, &records)?;
    write_manifest(&manifest, "bench", args, None, 0, vec![args.output.clone()])?;
    Ok(0)
}
