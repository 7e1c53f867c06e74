//! Subcommand implementations.

// `!(x >= 0.0)` rejects NaN, unlike the rewrite clippy suggests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

use trimglasso_core as core;
use trimglasso_core::{
    auc, check_stationarity, edges_of, estimation_errors, f1_score, fit, fit_path,
    gen_contaminated, gen_hub_precision, roc_point, trimmed_cv, EdgeSet, HubNetworkParams,
    IntervalRule, RngStream, RocCurve, RocPoint, SampleSet, Scenario, SolverConfig, Strategy,
    Termination,
};

use crate::args;
use crate::io;

/// Command failures carrying their exit code: 2 usage, 3 I/O, 4 solver.
pub enum CmdError {
    Usage(String),
    Io(anyhow::Error),
    Solver(String),
}

impl CmdError {
    pub fn code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Io(_) => 3,
            CmdError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "{m}"),
            CmdError::Io(e) => write!(f, "{e:#}"),
            CmdError::Solver(m) => write!(f, "{m}"),
        }
    }
}

pub type CmdResult = Result<(), CmdError>;

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn io_err(e: anyhow::Error) -> CmdError {
    CmdError::Io(e)
}

/// Configuration and solver-domain errors are flag problems; numerical
/// failures are solver failures.
fn core_err(e: core::Error) -> CmdError {
    match e {
        core::Error::InvalidConfig(_)
        | core::Error::InvalidParams(_)
        | core::Error::DimensionMismatch { .. }
        | core::Error::TooFewPoints => usage(e.to_string()),
        _ => CmdError::Solver(e.to_string()),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, CmdError> {
    match s {
        "composite" => Ok(Strategy::Composite),
        "alternating" => Ok(Strategy::Alternating),
        _ => Err(usage("--strategy must be composite or alternating")),
    }
}

fn parse_interval_rule(s: &str) -> Result<IntervalRule, CmdError> {
    match s {
        "union" => Ok(IntervalRule::UnionUniform),
        "coin" => Ok(IntervalRule::FairCoin),
        _ => Err(usage("--interval-rule must be union or coin")),
    }
}

/// Resolves `--lambdas a,b,c` or `--lambda-grid top:bottom:count`
/// (geometric) into a strictly descending list.
fn resolve_lambdas(lambdas: &Option<String>, grid: &Option<String>) -> Result<Vec<f64>, CmdError> {
    let mut values: Vec<f64> = match (lambdas, grid) {
        (Some(list), None) => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("bad lambda {v:?}")))
            })
            .collect::<Result<_, _>>()?,
        (None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(usage("--lambda-grid must be top:bottom:count"));
            }
            let top: f64 = parts[0].parse().map_err(|_| usage("bad grid top"))?;
            let bottom: f64 = parts[1].parse().map_err(|_| usage("bad grid bottom"))?;
            let count: usize = parts[2].parse().map_err(|_| usage("bad grid count"))?;
            if !(top > bottom && bottom > 0.0 && count >= 2) {
                return Err(usage("--lambda-grid needs top > bottom > 0 and count >= 2"));
            }
            (0..count)
                .map(|k| top * (bottom / top).powf(k as f64 / (count - 1) as f64))
                .collect()
        }
        _ => {
            return Err(usage(
                "exactly one of --lambdas or --lambda-grid is required",
            ))
        }
    };
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup();
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(usage("lambdas must be nonnegative"));
    }
    Ok(values)
}

/// Resolves `--h` (absolute) or `--h-frac` (ratio of n) into a trim count.
fn resolve_h(h: Option<usize>, h_frac: Option<f64>, n: usize) -> Result<usize, CmdError> {
    match (h, h_frac) {
        (Some(h), None) => {
            if h < 1 || h > n {
                Err(usage(format!("--h must lie in 1..={n}")))
            } else {
                Ok(h)
            }
        }
        (None, Some(f)) => {
            if !(f > 0.0 && f <= 1.0) {
                Err(usage("--h-frac must lie in (0, 1]"))
            } else {
                Ok(((f * n as f64).round() as usize).clamp(1, n))
            }
        }
        _ => Err(usage("exactly one of --h or --h-frac is required")),
    }
}

/// h-grid entries: values in (0, 1] are ratios, values above 1 are absolute
/// counts converted to ratios of n.
fn resolve_h_grid(spec: &str, n: usize) -> Result<Vec<f64>, CmdError> {
    spec.split(',')
        .map(|v| {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad h-grid entry {v:?}")))?;
            if x > 1.0 {
                let count = x.round();
                if count < 1.0 || count > n as f64 {
                    return Err(usage(format!("h-grid count {x} outside 1..={n}")));
                }
                Ok(count / n as f64)
            } else if x > 0.0 {
                Ok(x)
            } else {
                Err(usage("h-grid ratios must be positive"))
            }
        })
        .collect()
}

fn load_samples(
    data: &Path,
    standardize: bool,
    out_dir: &Path,
    manifest: &mut io::RunManifest,
) -> Result<SampleSet, CmdError> {
    manifest.input(data).map_err(io_err)?;
    let samples = io::read_samples(data).map_err(io_err)?;
    manifest.param("standardize", standardize);
    if standardize {
        let (z, stats) = io::standardize(&samples);
        let rows: Vec<Vec<String>> = stats
            .iter()
            .map(|(mean, sd)| vec![mean.to_string(), sd.to_string()])
            .collect();
        let path = out_dir.join("standardize.csv");
        io::write_rows(&path, &rows).map_err(io_err)?;
        manifest.output(&path).map_err(io_err)?;
        Ok(z)
    } else {
        Ok(samples)
    }
}

fn build_config(
    lambda: f64,
    h: usize,
    a: &args::SolverOpts,
    p: usize,
) -> Result<SolverConfig, CmdError> {
    if h < p {
        eprintln!(
            "warning: h = {h} is below the variable count p = {p}; \
             the trimmed covariance is rank deficient"
        );
    }
    let mut cfg = SolverConfig::new(lambda, h)
        .with_strategy(parse_strategy(&a.strategy)?)
        .with_tol(a.tol)
        .with_max_iters(a.max_iters)
        .with_warm_start(!a.no_warm_start);
    if let Some(r) = a.radius {
        cfg = cfg.with_radius(r);
    }
    cfg.initial_step = a.initial_step;
    cfg.backtrack_factor = a.backtrack_factor;
    Ok(cfg)
}

fn solver_params(manifest: &mut io::RunManifest, cfg: &SolverConfig) {
    manifest.param("lambda", cfg.lambda);
    manifest.param("h", cfg.h);
    manifest.param("radius", cfg.radius);
    manifest.param("tol", cfg.tol);
    manifest.param("max_iters", cfg.max_iters);
    manifest.param("initial_step", cfg.initial_step);
    manifest.param("backtrack_factor", cfg.backtrack_factor);
    manifest.param("strategy", format!("{:?}", cfg.strategy).to_lowercase());
    manifest.param("warm_start", cfg.warm_start);
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max_iters",
        Termination::LineSearchFailed => "line_search_failed",
    }
}

pub fn simulate(a: &args::SimulateArgs) -> CmdResult {
    let scenario: Scenario = a.scenario.parse().map_err(core_err)?;
    let params = HubNetworkParams {
        edge_prob: a.edge_prob,
        hub_count: a.hub_count,
        hub_prob: a.hub_prob,
        interval_rule: parse_interval_rule(&a.interval_rule)?,
        neg_upper: a.neg_upper,
    };
    if a.reps < 1 || a.jobs < 1 {
        return Err(usage("--reps and --jobs must be positive"));
    }
    io::ensure_dir(&a.out_dir).map_err(io_err)?;

    let run_rep = |rep: usize| -> CmdResult {
        let mut manifest = io::RunManifest::new("simulate");
        manifest.param("p", a.p);
        manifest.param("n", a.n);
        manifest.param("p0", a.p0);
        manifest.param("scenario", scenario.name());
        manifest.param("seed", a.seed);
        manifest.param("rep", rep);
        manifest.param("stream", rep);
        manifest.param("edge_prob", a.edge_prob);
        manifest.param("hub_count", a.hub_count);
        manifest.param("hub_prob", a.hub_prob);
        manifest.param("interval_rule", &a.interval_rule);
        manifest.param("neg_upper", a.neg_upper);

        let mut rng = RngStream::new(a.seed, rep as u64);
        let gt = gen_hub_precision(a.p, &mut rng, &params).map_err(core_err)?;
        let sample =
            gen_contaminated(&gt, scenario, a.n, a.p0, &mut rng, &params).map_err(core_err)?;

        let dir = io::ensure_dir(&a.out_dir.join(format!("rep{rep:03}"))).map_err(io_err)?;
        let samples_path = dir.join("samples.csv");
        io::write_samples(&samples_path, &sample.data).map_err(io_err)?;
        let labels_path = dir.join("labels.csv");
        io::write_labels(&labels_path, &sample.labels).map_err(io_err)?;
        let truth_path = dir.join("truth.csv");
        io::write_matrix(&truth_path, &gt.theta_star).map_err(io_err)?;
        let support_path = dir.join("support.csv");
        let support = EdgeSet::from_pairs(a.p, gt.support.iter().copied()).map_err(core_err)?;
        io::write_edges(&support_path, &support, &gt.theta_star).map_err(io_err)?;

        for path in [&samples_path, &labels_path, &truth_path, &support_path] {
            manifest.output(path).map_err(io_err)?;
        }
        manifest.write(&dir.join("manifest.txt")).map_err(io_err)?;
        Ok(())
    };

    if a.jobs == 1 || a.reps == 1 {
        for rep in 0..a.reps {
            run_rep(rep)?;
        }
        Ok(())
    } else {
        let mut outcome: CmdResult = Ok(());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for worker in 0..a.jobs.min(a.reps) {
                let run_rep = &run_rep;
                handles.push(scope.spawn(move || -> CmdResult {
                    let mut rep = worker;
                    while rep < a.reps {
                        run_rep(rep)?;
                        rep += a.jobs;
                    }
                    Ok(())
                }));
            }
            for handle in handles {
                let res = handle.join().expect("simulate worker panicked");
                if res.is_err() && outcome.is_ok() {
                    outcome = res;
                }
            }
        });
        outcome
    }
}

pub fn run_fit(a: &args::FitArgs) -> CmdResult {
    let out_dir = io::ensure_dir(&a.out_dir).map_err(io_err)?;
    let mut manifest = io::RunManifest::new("fit");
    let samples = load_samples(&a.data, a.standardize, &out_dir, &mut manifest)?;
    let h = resolve_h(a.h, a.h_frac, samples.n())?;
    let cfg = build_config(a.lambda, h, &a.solver, samples.p())?;
    solver_params(&mut manifest, &cfg);
    manifest.param("threshold", a.threshold);

    let res = fit(&samples, &cfg).map_err(core_err)?;

    let precision_path = out_dir.join("precision.csv");
    io::write_matrix(&precision_path, res.estimate.matrix()).map_err(io_err)?;
    let weights_path = out_dir.join("weights.csv");
    io::write_column(&weights_path, res.weights.values()).map_err(io_err)?;
    let edges_path = out_dir.join("edges.csv");
    let edges = edges_of(res.estimate.matrix(), a.threshold);
    io::write_edges(&edges_path, &edges, res.estimate.matrix()).map_err(io_err)?;

    let trace_path = out_dir.join("trace.csv");
    let rows: Vec<Vec<String>> = res
        .trace
        .iter()
        .map(|t| {
            vec![
                t.iteration.to_string(),
                t.objective.to_string(),
                t.step.to_string(),
                if t.weights_changed { "1" } else { "0" }.to_string(),
            ]
        })
        .collect();
    io::write_rows(&trace_path, &rows).map_err(io_err)?;

    let report = check_stationarity(&res, &samples, cfg.lambda).map_err(core_err)?;
    let stationarity_path = out_dir.join("stationarity.txt");
    io::write_kv(
        &stationarity_path,
        &[
            (
                "max_zero_violation".into(),
                report.max_zero_violation.to_string(),
            ),
            (
                "max_active_violation".into(),
                report.max_active_violation.to_string(),
            ),
            (
                "max_diag_gradient".into(),
                report.max_diag_gradient.to_string(),
            ),
            ("weights_optimal".into(), report.weights_optimal.to_string()),
            (
                "termination".into(),
                termination_name(res.termination).into(),
            ),
            ("iterations".into(), (res.trace.len() - 1).to_string()),
        ],
    )
    .map_err(io_err)?;

    for path in [
        &precision_path,
        &weights_path,
        &edges_path,
        &trace_path,
        &stationarity_path,
    ] {
        manifest.output(path).map_err(io_err)?;
    }
    manifest
        .write(&out_dir.join("manifest.txt"))
        .map_err(io_err)?;

    if res.termination == Termination::LineSearchFailed {
        return Err(CmdError::Solver(
            "line search failed; partial trace and last iterate written".into(),
        ));
    }
    Ok(())
}

pub fn run_path(a: &args::PathArgs) -> CmdResult {
    let out_dir = io::ensure_dir(&a.out_dir).map_err(io_err)?;
    let mut manifest = io::RunManifest::new("path");
    let samples = load_samples(&a.data, a.standardize, &out_dir, &mut manifest)?;
    let h = resolve_h(a.h, a.h_frac, samples.n())?;
    let lambdas = resolve_lambdas(&a.lambdas, &a.lambda_grid)?;
    let cfg = build_config(lambdas[0], h, &a.solver, samples.p())?;
    solver_params(&mut manifest, &cfg);
    manifest.param("threshold", a.threshold);
    manifest.param(
        "lambdas",
        lambdas
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );

    let truth = match &a.truth_support {
        Some(path) => {
            manifest.input(path).map_err(io_err)?;
            Some(io::read_edge_set(path, samples.p()).map_err(io_err)?)
        }
        None => None,
    };

    let path = fit_path(&samples, &lambdas, &cfg).map_err(core_err)?;

    let mut table: Vec<Vec<String>> = Vec::new();
    let mut roc = RocCurve::default();
    let mut failures = 0usize;
    let mut written: Vec<PathBuf> = Vec::new();
    for (idx, entry) in path.iter().enumerate() {
        let ok_fit = match &entry.result {
            Ok(res) => (res.termination != Termination::LineSearchFailed).then_some(res),
            Err(_) => None,
        };
        match ok_fit {
            Some(res) => {
                let edges = edges_of(res.estimate.matrix(), a.threshold);
                table.push(vec![
                    entry.lambda.to_string(),
                    "ok".into(),
                    termination_name(res.termination).into(),
                    res.trace
                        .last()
                        .map(|t| t.objective.to_string())
                        .unwrap_or_default(),
                    (res.trace.len() - 1).to_string(),
                    edges.len().to_string(),
                ]);
                let edges_path = out_dir.join(format!("edges_{idx:03}.csv"));
                io::write_edges(&edges_path, &edges, res.estimate.matrix()).map_err(io_err)?;
                written.push(edges_path);
                if a.save_precisions {
                    let prec_path = out_dir.join(format!("precision_{idx:03}.csv"));
                    io::write_matrix(&prec_path, res.estimate.matrix()).map_err(io_err)?;
                    written.push(prec_path);
                }
                if let Some(truth) = &truth {
                    let (fpr, tpr) = roc_point(&edges, truth).map_err(core_err)?;
                    roc.points.push(RocPoint {
                        fpr,
                        tpr,
                        lambda: entry.lambda,
                    });
                }
            }
            None => {
                failures += 1;
                let detail = match &entry.result {
                    Ok(res) => termination_name(res.termination).to_string(),
                    Err(e) => e.to_string(),
                };
                table.push(vec![
                    entry.lambda.to_string(),
                    "failed".into(),
                    detail,
                    "nan".into(),
                    "0".into(),
                    "nan".into(),
                ]);
            }
        }
    }

    let path_csv = out_dir.join("path.csv");
    io::write_rows(&path_csv, &table).map_err(io_err)?;
    written.push(path_csv);

    if truth.is_some() {
        let roc_csv = out_dir.join("roc.csv");
        let rows: Vec<Vec<String>> = roc
            .points
            .iter()
            .map(|pt| {
                vec![
                    pt.fpr.to_string(),
                    pt.tpr.to_string(),
                    pt.lambda.to_string(),
                ]
            })
            .collect();
        io::write_rows(&roc_csv, &rows).map_err(io_err)?;
        written.push(roc_csv);
    }

    for p in &written {
        manifest.output(p).map_err(io_err)?;
    }
    manifest
        .write(&out_dir.join("manifest.txt"))
        .map_err(io_err)?;

    if failures == path.len() {
        return Err(CmdError::Solver("every lambda on the path failed".into()));
    }
    Ok(())
}

pub fn run_cv(a: &args::CvArgs) -> CmdResult {
    let out_dir = io::ensure_dir(&a.out_dir).map_err(io_err)?;
    let mut manifest = io::RunManifest::new("cv");
    let samples = load_samples(&a.data, a.standardize, &out_dir, &mut manifest)?;
    let lambdas = resolve_lambdas(&a.lambdas, &a.lambda_grid)?;
    let h_fracs = resolve_h_grid(&a.h_grid, samples.n())?;
    let template = build_config(lambdas[0], samples.n().max(1), &a.solver, samples.p())?;
    solver_params(&mut manifest, &template);
    manifest.param("folds", a.folds);
    manifest.param("seed", a.seed);
    manifest.param(
        "lambdas",
        lambdas
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.param("h_grid", &a.h_grid);

    let mut rng = RngStream::new(a.seed, 0);
    let report =
        trimmed_cv(&samples, &lambdas, &h_fracs, a.folds, &mut rng, &template).map_err(core_err)?;

    let table_path = out_dir.join("cv_table.csv");
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.lambda.to_string(),
                c.h.to_string(),
                c.fold.to_string(),
                c.score
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "nan".into()),
                if c.score.is_some() { "ok" } else { "failed" }.to_string(),
            ]
        })
        .collect();
    io::write_rows(&table_path, &rows).map_err(io_err)?;
    manifest.output(&table_path).map_err(io_err)?;

    if let Some((best_lambda, best_h)) = report.best {
        let best_path = out_dir.join("best.txt");
        io::write_kv(
            &best_path,
            &[
                ("best_lambda".into(), best_lambda.to_string()),
                ("best_h".into(), best_h.to_string()),
            ],
        )
        .map_err(io_err)?;
        manifest.output(&best_path).map_err(io_err)?;
    }
    manifest
        .write(&out_dir.join("manifest.txt"))
        .map_err(io_err)?;

    if report.best.is_none() {
        return Err(CmdError::Solver(
            "every cross-validation cell failed".into(),
        ));
    }
    Ok(())
}

pub fn run_eval(a: &args::EvalArgs) -> CmdResult {
    let out_dir = io::ensure_dir(&a.out_dir).map_err(io_err)?;
    let mut manifest = io::RunManifest::new("eval");
    manifest.param("threshold", a.threshold);
    manifest.input(&a.est).map_err(io_err)?;
    let est = io::read_matrix(&a.est).map_err(io_err)?;
    let est_edges = edges_of(&est, a.threshold);

    let mut rows: Vec<Vec<String>> = Vec::new();
    match (&a.truth, &a.reference_graph) {
        (Some(truth_path), None) => {
            manifest.input(truth_path).map_err(io_err)?;
            let truth = io::read_matrix(truth_path).map_err(io_err)?;
            let truth_edges = edges_of(&truth, a.threshold);
            let (fro, l1) = estimation_errors(&est, &truth).map_err(core_err)?;
            let f1 = f1_score(&est_edges, &truth_edges).map_err(core_err)?;
            let (fpr, tpr) = roc_point(&est_edges, &truth_edges).map_err(core_err)?;
            rows.push(vec!["frobenius_error".into(), fro.to_string()]);
            rows.push(vec!["offdiag_l1_error".into(), l1.to_string()]);
            rows.push(vec!["f1".into(), f1.to_string()]);
            rows.push(vec!["fpr".into(), fpr.to_string()]);
            rows.push(vec!["tpr".into(), tpr.to_string()]);
        }
        (None, Some(graph_path)) => {
            manifest.input(graph_path).map_err(io_err)?;
            let reference = io::read_edge_set(graph_path, est.dim()).map_err(io_err)?;
            let f1 = f1_score(&est_edges, &reference).map_err(core_err)?;
            let (fpr, tpr) = roc_point(&est_edges, &reference).map_err(core_err)?;
            rows.push(vec!["f1".into(), f1.to_string()]);
            rows.push(vec!["fpr".into(), fpr.to_string()]);
            rows.push(vec!["tpr".into(), tpr.to_string()]);
        }
        _ => {
            return Err(usage(
                "exactly one of --truth or --reference-graph is required",
            ))
        }
    }

    if let Some(roc_path) = &a.roc_in {
        manifest.input(roc_path).map_err(io_err)?;
        let pts = io::read_samples(roc_path).map_err(io_err)?;
        if pts.p() < 2 {
            return Err(usage("--roc-in must have fpr,tpr[,lambda] columns"));
        }
        let mut curve = RocCurve::default();
        for i in 0..pts.n() {
            let row = pts.row(i);
            curve.points.push(RocPoint {
                fpr: row[0],
                tpr: row[1],
                lambda: if pts.p() > 2 { row[2] } else { f64::NAN },
            });
        }
        let area = auc(&curve).map_err(core_err)?;
        rows.push(vec!["auc".into(), area.to_string()]);
    }

    let metrics_path = out_dir.join("metrics.csv");
    io::write_rows(&metrics_path, &rows).map_err(io_err)?;
    manifest.output(&metrics_path).map_err(io_err)?;
    manifest
        .write(&out_dir.join("manifest.txt"))
        .map_err(io_err)?;
    Ok(())
}
