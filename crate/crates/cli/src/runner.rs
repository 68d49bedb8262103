//! Subcommand dispatch: resolve parameters, run, write one output file.

use crate::config::{
    parse_covariance, parse_direction_law, parse_estimator, parse_f64_list, parse_grid,
    parse_kaczmarz_matrix, parse_rhs, parse_start, ConfigError, ConfigFile, StartSpec,
};
use crate::output::{Cell, OutputFormat, Provenance, ResultTable};
use crate::{Cli, Command, DEFAULT_SEED, DEFAULT_WORKERS};
use hitrun_core::kaczmarz::{self, Variant};
use hitrun_core::overlap;
use hitrun_core::rates;
use hitrun_core::seeding::stream_rng;
use hitrun_core::stats::fit_log_decay;
use hitrun_core::{coupling, gaussian, hit_and_run, DirectionLaw, Error as CoreError};
use nalgebra::DVector;
use std::path::PathBuf;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(CoreError),
    Io(std::io::Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Numerical(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type RunResult<T> = Result<T, RunError>;

/// All sections a config file may carry.
const SECTIONS: &[&str] = &[
    "sample",
    "couple",
    "rates",
    "table1",
    "overlap",
    "mix-bound",
    "kaczmarz",
    "kaczmarz-figure",
];

/// All keys a config file may carry (global + per-section).
const KEYS: &[&str] = &[
    "seed", "workers", "out", "format", "cov", "tau", "x0", "steps", "a0", "b0", "replicas",
    "kappas", "case", "kappa", "d1", "d2", "estimator", "x", "xt", "eps", "grid", "rho", "w2",
    "c", "cprime", "matrix", "b", "variant", "iters", "a",
];

/// Parameter resolution helper: CLI flag, then config file, then default.
struct Resolver<'a> {
    file: &'a ConfigFile,
    section: &'a str,
}

impl<'a> Resolver<'a> {
    fn string(&self, cli: &Option<String>, key: &str, default: &str) -> String {
        cli.clone()
            .or_else(|| self.file.get(self.section, key).map(str::to_string))
            .unwrap_or_else(|| default.to_string())
    }

    fn string_required(&self, cli: &Option<String>, key: &str) -> Result<String, ConfigError> {
        cli.clone()
            .or_else(|| self.file.get(self.section, key).map(str::to_string))
            .ok_or_else(|| ConfigError(format!("missing required parameter `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, cli: &Option<T>, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: Clone,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v.clone());
        }
        if let Some(raw) = self.file.get(self.section, key) {
            return raw
                .parse::<T>()
                .map_err(|e| ConfigError(format!("bad value for `{key}`: {e}")));
        }
        Ok(default)
    }

    fn parse_required<T: std::str::FromStr>(&self, cli: &Option<T>, key: &str) -> Result<T, ConfigError>
    where
        T: Clone,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v.clone());
        }
        if let Some(raw) = self.file.get(self.section, key) {
            return raw
                .parse::<T>()
                .map_err(|e| ConfigError(format!("bad value for `{key}`: {e}")));
        }
        Err(ConfigError(format!("missing required parameter `{key}`")))
    }
}

fn parse_vector(spec: &str) -> Result<DVector<f64>, ConfigError> {
    Ok(DVector::from_vec(parse_f64_list(spec)?))
}

/// Run one parsed invocation; returns the path written.
pub fn run(cli: Cli) -> RunResult<String> {
    let file = match &cli.global.config {
        Some(path) => ConfigFile::load(std::path::Path::new(path))?,
        None => ConfigFile::default(),
    };
    file.validate_keys(SECTIONS, KEYS)?;
    let kind = cli.command.kind();
    let resolver = Resolver {
        file: &file,
        section: kind,
    };
    let seed = resolver.parse(&cli.global.seed, "seed", DEFAULT_SEED)?;
    let workers = resolver.parse(&cli.global.workers, "workers", DEFAULT_WORKERS)?;
    let default_format = if kind == "overlap" || kind == "mix-bound" {
        OutputFormat::Json
    } else {
        OutputFormat::Csv
    };
    let format_str = resolver.string(
        &cli.global.format,
        "format",
        default_format.extension(),
    );
    let format = OutputFormat::parse(&format_str)
        .ok_or_else(|| ConfigError(format!("unknown format `{format_str}`")))?;
    let out = resolver.string(
        &cli.global.out,
        "out",
        &format!("{kind}.{}", format.extension()),
    );

    let table = match &cli.command {
        Command::Sample(args) => run_sample(args, &resolver, seed, workers)?,
        Command::Couple(args) => run_couple(args, &resolver, seed, workers)?,
        Command::Rates(args) => {
            if args.table1.is_some() {
                run_table1(args, &resolver, seed, workers)?
            } else {
                run_rates(args, &resolver, seed, workers)?
            }
        }
        Command::Overlap(args) => run_overlap(args, &resolver, seed, workers)?,
        Command::MixBound(args) => run_mix_bound(args, &resolver, seed, workers)?,
        Command::Kaczmarz(args) => run_kaczmarz(args, &resolver, seed, workers)?,
        Command::KaczmarzFigure(args) => run_kaczmarz_figure(args, &resolver, seed, workers)?,
    };

    let path = PathBuf::from(&out);
    table.write_atomic(&path, format)?;
    Ok(out)
}

fn run_sample(
    args: &crate::SampleArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let cov_spec = r.string_required(&args.cov, "cov")?;
    let cov = parse_covariance(&cov_spec)?;
    let tau_spec = r.string(&args.tau, "tau", "uniform");
    let law = parse_direction_law(&tau_spec, cov.dim())?;
    let x0_spec = r.string(&args.x0, "x0", "target");
    let steps = r.parse(&args.steps, "steps", 1000usize)?;

    // substream 0 draws the start point when requested; the chain itself
    // runs on substream 1
    let x0 = match parse_start(&x0_spec)? {
        StartSpec::Point(p) => {
            if p.len() != cov.dim() {
                return Err(ConfigError(format!(
                    "x0 has dimension {}, covariance has {}",
                    p.len(),
                    cov.dim()
                ))
                .into());
            }
            p
        }
        StartSpec::Target => gaussian::sample_target(&cov, &mut stream_rng(seed, 0)),
    };
    let mut rng = stream_rng(seed, 1);
    let traj = hit_and_run::run_chain(
        &cov,
        &law,
        x0,
        steps,
        &mut rng,
        hit_and_run::DEFAULT_POSITION_CAP,
    )?;

    let provenance = Provenance::new("sample", seed, workers)
        .with("cov", &cov_spec)
        .with("tau", &tau_spec)
        .with("x0", &x0_spec)
        .with("steps", steps);
    let mut columns: Vec<String> = vec!["step".into()];
    for i in 1..=cov.dim() {
        columns.push(format!("x_{i}"));
    }
    columns.push("nat_norm".into());
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = ResultTable::new(provenance, &col_refs);
    for (step, position) in &traj.positions {
        let mut row = vec![Cell::Int(*step as i64)];
        for i in 0..cov.dim() {
            row.push(Cell::Float(position[i]));
        }
        row.push(Cell::Float(traj.natural_norms[*step as usize]));
        table.push_row(row);
    }
    Ok(table)
}

fn run_couple(
    args: &crate::CoupleArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let cov_spec = r.string_required(&args.cov, "cov")?;
    let cov = parse_covariance(&cov_spec)?;
    let tau_spec = r.string(&args.tau, "tau", "uniform");
    let law = parse_direction_law(&tau_spec, cov.dim())?;
    let a0 = parse_vector(&r.string_required(&args.a0, "a0")?)?;
    let b0 = parse_vector(&r.string_required(&args.b0, "b0")?)?;
    let steps = r.parse(&args.steps, "steps", 50usize)?;
    let replicas = r.parse(&args.replicas, "replicas", 10_000usize)?;

    let rho = rho_for(&law, &cov, seed, workers).ok();
    let report = coupling::contraction_experiment(
        &cov, &law, &a0, &b0, steps, replicas, seed, None, rho,
    )?;

    let provenance = Provenance::new("couple", seed, workers)
        .with("cov", &cov_spec)
        .with("tau", &tau_spec)
        .with("a0", vector_echo(&a0))
        .with("b0", vector_echo(&b0))
        .with("steps", steps)
        .with("replicas", replicas);
    let mut table = ResultTable::new(provenance, &["step", "mean_sq_gap", "se"]);
    for (k, (gap, se)) in report
        .mean_sq_gap
        .iter()
        .zip(&report.std_error)
        .enumerate()
    {
        table.push_row(vec![Cell::Int(k as i64), Cell::Float(*gap), Cell::Float(*se)]);
    }
    if report.coalesced {
        table.push_scalar("status", "coalesced");
    }
    if let Some(fit) = &report.fit {
        table.push_scalar_float("fitted_sq_gap_decay_rate", fit.rate);
        table.push_scalar_float("fitted_sq_gap_decay_rate_se", fit.rate_se);
        table.push_scalar(
            "fit_window",
            format!("{}..{}", report.fit_window.start, report.fit_window.end),
        );
    }
    if let Some(rho) = report.rho_lambda_min {
        table.push_scalar_float("rho_lambda_min", rho);
    }
    Ok(table)
}

/// ρ for the law/covariance pair when an exact or quadrature route exists,
/// falling back to Monte Carlo.
fn rho_for(
    law: &DirectionLaw,
    cov: &hitrun_core::CovarianceSpec,
    seed: u64,
    workers: usize,
) -> Result<f64, CoreError> {
    let estimator = match law {
        DirectionLaw::UniformSphere { dim } if *dim == 2 || *dim == 3 => {
            hitrun_core::SecondMomentEstimator::auto(*dim, cov.kappa(), seed)
        }
        DirectionLaw::UniformSphere { .. } => hitrun_core::SecondMomentEstimator::MonteCarlo {
            samples: 1_000_000,
            seed,
            workers,
        },
        _ => hitrun_core::SecondMomentEstimator::ExactDiscrete,
    };
    Ok(rates::rho_general(law, cov, &estimator)?.rho)
}

fn vector_echo(v: &DVector<f64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn run_rates(
    args: &crate::RatesArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let case = r.string(&args.case, "case", "general");
    let provenance = Provenance::new("rates", seed, workers).with("case", &case);
    let mut table = ResultTable::new(
        provenance,
        &[
            "case",
            "kappa",
            "dim",
            "rho",
            "method",
            "std_error",
            "eigenspace_dim",
            "minimizer",
        ],
    );
    let push_report = |table: &mut ResultTable, case: &str, report: &rates::RateReport| {
        table.push_row(vec![
            Cell::Text(case.to_string()),
            Cell::Float(report.kappa),
            Cell::Int(report.dim as i64),
            Cell::Float(report.rho),
            Cell::Text(report.method.name().to_string()),
            Cell::Float(report.std_error),
            Cell::Int(report.eigenspace_dim as i64),
            Cell::Text(vector_echo(&report.minimizer)),
        ]);
    };
    match case.as_str() {
        "bivariate" => {
            let kappa = r.parse_required(&args.kappa, "kappa")?;
            let rho = rates::rho_bivariate(kappa)?;
            table.push_row(closed_form_row("bivariate", kappa, 2, rho));
        }
        "3d-low" => {
            let kappa = r.parse_required(&args.kappa, "kappa")?;
            let rho = rates::rho_3d_one_low(kappa)?;
            table.push_row(closed_form_row("3d-low", kappa, 3, rho));
        }
        "3d-high" => {
            let kappa = r.parse_required(&args.kappa, "kappa")?;
            let report = rates::rho_3d_one_high(kappa, seed)?;
            push_report(&mut table, "3d-high", &report);
        }
        "4d-low" => {
            let kappa = r.parse_required(&args.kappa, "kappa")?;
            let rho = rates::rho_4d_one_low(kappa)?;
            table.push_row(closed_form_row("4d-low", kappa, 4, rho));
        }
        "two-scale" => {
            let kappa = r.parse_required(&args.kappa, "kappa")?;
            let d1 = r.parse_required(&args.d1, "d1")?;
            let d2 = r.parse_required(&args.d2, "d2")?;
            let rho = rates::rho_two_scale_approx(d1, d2, kappa)?;
            table.push_row(closed_form_row("two-scale", kappa, d1 + d2, rho));
            table.push_scalar("note", "large-d heuristic, not a bound");
        }
        "general" => {
            let cov_spec = r.string_required(&args.cov, "cov")?;
            let cov = parse_covariance(&cov_spec)?;
            let tau_spec = r.string(&args.tau, "tau", "uniform");
            let law = parse_direction_law(&tau_spec, cov.dim())?;
            let est_spec = r.string(&args.estimator, "estimator", "auto");
            let estimator = parse_estimator(&est_spec, cov.dim(), cov.kappa(), seed, workers)?;
            let report = rates::rho_general(&law, &cov, &estimator)?;
            push_report(&mut table, "general", &report);
            table.provenance.config.push(("cov".into(), cov_spec));
            table.provenance.config.push(("tau".into(), tau_spec));
            table.provenance.config.push(("estimator".into(), est_spec));
        }
        other => {
            return Err(ConfigError(format!(
                "unknown case `{other}` (bivariate | 3d-low | 3d-high | 4d-low | two-scale | general)"
            ))
            .into())
        }
    }
    Ok(table)
}

fn closed_form_row(case: &str, kappa: f64, dim: usize, rho: f64) -> Vec<Cell> {
    // closed forms carry no estimator error and a known minimizer direction
    let minimizer = if case == "two-scale" { "" } else { "e1" };
    vec![
        Cell::Text(case.to_string()),
        Cell::Float(kappa),
        Cell::Int(dim as i64),
        Cell::Float(rho),
        Cell::Text("closed-form".to_string()),
        Cell::Float(0.0),
        Cell::Int(1),
        Cell::Text(minimizer.to_string()),
    ]
}

fn run_table1(
    args: &crate::RatesArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let kappas_spec = r.string(&args.kappas, "kappas", "100,1000,10000,100000");
    let kappas = parse_f64_list(&kappas_spec)?;
    let summary = rates::sweep_table(&kappas)?;
    let provenance = Provenance::new("table1", seed, workers).with("kappas", &kappas_spec);
    let mut table = ResultTable::new(
        provenance,
        &[
            "kappa",
            "rho_bivariate",
            "rho_3d_one_high",
            "rho_3d_one_low",
            "rho_4d_one_low",
        ],
    );
    for row in &summary.rows {
        table.push_row(vec![
            Cell::Float(row.kappa),
            Cell::Float(row.bivariate),
            Cell::Float(row.three_d_high),
            Cell::Float(row.three_d_low),
            Cell::Float(row.four_d_low),
        ]);
    }
    table.push_scalar_float("loglog_slope_bivariate", summary.slope_bivariate);
    table.push_scalar_float("loglog_slope_3d_one_high", summary.slope_three_d_high);
    table.push_scalar_float("loglog_slope_4d_one_low", summary.slope_four_d_low);
    table.push_scalar_float(
        "compensated_spread_3d_one_low",
        summary.compensated_spread_three_d_low,
    );
    Ok(table)
}

fn run_overlap(
    args: &crate::OverlapArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let cov_spec = r.string_required(&args.cov, "cov")?;
    let cov = parse_covariance(&cov_spec)?;
    let x = parse_vector(&r.string_required(&args.x, "x")?)?;
    let xt = parse_vector(&r.string_required(&args.xt, "xt")?)?;
    let eps = r.parse(&args.eps, "eps", 0.1f64)?;
    let grid_spec = r.string(&args.grid, "grid", "r:2048,theta:4096");
    let grid = parse_grid(&grid_spec)?;

    let tv = overlap::tv_quadrature_2d(&cov, &x, &xt, &grid)?;
    let bound = overlap::tv_bound_pointwise(&cov, &x, &xt, eps)?;
    let constants = overlap::overlap_constants(&cov, &x, eps)?;

    let provenance = Provenance::new("overlap", seed, workers)
        .with("cov", &cov_spec)
        .with("x", vector_echo(&x))
        .with("xt", vector_echo(&xt))
        .with("eps", eps)
        .with("grid", &grid_spec);
    let mut table = ResultTable::new(provenance, &["field", "value"]);
    table.push_row(vec![
        Cell::Text("tv_quadrature".into()),
        Cell::Float(tv.value),
    ]);
    table.push_row(vec![
        Cell::Text("tv_quadrature_tail_bound".into()),
        Cell::Float(tv.tail_bound),
    ]);
    table.push_row(vec![Cell::Text("tv_bound_raw".into()), Cell::Float(bound.raw)]);
    table.push_row(vec![
        Cell::Text("tv_bound_clamped".into()),
        Cell::Float(bound.clamped),
    ]);
    table.push_row(vec![Cell::Text("c1".into()), Cell::Float(constants.c1)]);
    table.push_row(vec![Cell::Text("c2".into()), Cell::Float(constants.c2)]);
    table.push_row(vec![Cell::Text("c3".into()), Cell::Float(constants.c3)]);
    Ok(table)
}

fn run_mix_bound(
    args: &crate::MixBoundArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let cov_spec = r.string_required(&args.cov, "cov")?;
    let cov = parse_covariance(&cov_spec)?;
    let rho = r.parse_required(&args.rho, "rho")?;
    let eps = r.parse_required(&args.eps, "eps")?;
    let w2 = r.parse_required(&args.w2, "w2")?;
    let c = r.parse(&args.c, "c", 1.0f64)?;
    let cprime = r.parse(&args.cprime, "cprime", 1.0f64)?;
    let steps = overlap::mixing_time_bound(&cov, rho, eps, w2, c, cprime)?;

    let provenance = Provenance::new("mix-bound", seed, workers)
        .with("cov", &cov_spec)
        .with("rho", rho)
        .with("eps", eps)
        .with("w2", w2)
        .with("c", c)
        .with("cprime", cprime);
    let mut table = ResultTable::new(provenance, &["field", "value"]);
    table.push_row(vec![
        Cell::Text("mixing_time_bound_steps".into()),
        Cell::Int(steps as i64),
    ]);
    table.push_scalar(
        "note",
        "up to unspecified absolute constants (c, cprime convention)",
    );
    Ok(table)
}

fn run_kaczmarz(
    args: &crate::KaczmarzArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let matrix_spec = r.string_required(&args.matrix, "matrix")?;
    let matrix = parse_kaczmarz_matrix(&matrix_spec)?;
    let b_spec = r.string(&args.b, "b", "zero");
    let rhs = parse_rhs(&b_spec, matrix.nrows())?;
    let problem = kaczmarz::build_problem(matrix.clone(), rhs)?;
    let variant_spec = r.string(&args.variant, "variant", "free");
    let x0 = parse_vector(&r.string(&args.x0, "x0", "-10,0"))?;
    if x0.len() != matrix.ncols() {
        return Err(ConfigError(format!(
            "x0 has dimension {}, system has {} unknowns",
            x0.len(),
            matrix.ncols()
        ))
        .into());
    }
    let replicas = r.parse(&args.replicas, "replicas", 10_000usize)?;

    let (law, variant, rho) = resolve_variant(&variant_spec, &matrix, seed, workers)?;
    let iters = match r.parse(&args.iters, "iters", 0usize)? {
        0 => None,
        n => Some(n),
    };
    let curve =
        kaczmarz::run_experiment(&problem, &law, &x0, variant, rho, replicas, iters, seed)?;

    let provenance = Provenance::new("kaczmarz", seed, workers)
        .with("matrix", &matrix_spec)
        .with("b", &b_spec)
        .with("variant", &variant_spec)
        .with("x0", vector_echo(&x0))
        .with("replicas", replicas)
        .with("iters", curve.iters);
    let mut table = ResultTable::new(provenance, &["iter", "mean_error", "mean_sq_error", "se"]);
    push_curve_rows(&mut table, &curve, None);
    push_curve_scalars(&mut table, &curve, "");
    Ok(table)
}

/// `classical` | `free` | `tau:<law spec>` → (law, variant tag, module rate).
fn resolve_variant(
    spec: &str,
    matrix: &nalgebra::DMatrix<f64>,
    seed: u64,
    workers: usize,
) -> RunResult<(DirectionLaw, Variant, f64)> {
    match spec {
        "classical" => {
            let law = DirectionLaw::row_weighted(matrix.clone())?;
            let rho = kaczmarz::rate_classical(matrix)?.rho;
            Ok((law, Variant::Classical, rho))
        }
        "free" => {
            let law = DirectionLaw::uniform(matrix.nrows());
            let est = kaczmarz_estimator(matrix.nrows(), seed, workers);
            let rho = kaczmarz::rate_general(matrix, &law, &est)?.rho;
            Ok((law, Variant::CoordinateFree, rho))
        }
        other => {
            let law_spec = other.strip_prefix("tau:").ok_or_else(|| {
                ConfigError(format!(
                    "variant must be classical | free | tau:<law>, got `{other}`"
                ))
            })?;
            let law = parse_direction_law(law_spec, matrix.nrows())?;
            let est = match &law {
                DirectionLaw::UniformSphere { .. } => {
                    kaczmarz_estimator(matrix.nrows(), seed, workers)
                }
                _ => hitrun_core::SecondMomentEstimator::ExactDiscrete,
            };
            let rho = kaczmarz::rate_general(matrix, &law, &est)?.rho;
            // generalized laws run through the coordinate-free machinery
            Ok((law, Variant::CoordinateFree, rho))
        }
    }
}

fn kaczmarz_estimator(rows: usize, seed: u64, workers: usize) -> hitrun_core::SecondMomentEstimator {
    match rows {
        2 | 3 => hitrun_core::SecondMomentEstimator::SphereQuadrature { nodes: 1 << 14 },
        _ => hitrun_core::SecondMomentEstimator::MonteCarlo {
            samples: 1_000_000,
            seed,
            workers,
        },
    }
}

fn push_curve_rows(
    table: &mut ResultTable,
    curve: &kaczmarz::ExperimentCurve,
    variant_col: Option<&str>,
) {
    for k in 0..=curve.iters {
        let mut row = Vec::with_capacity(5);
        if let Some(v) = variant_col {
            row.push(Cell::Text(v.to_string()));
        }
        row.push(Cell::Int(k as i64));
        row.push(Cell::Float(curve.mean_error[k]));
        row.push(Cell::Float(curve.mean_sq_error[k]));
        row.push(Cell::Float(curve.std_error[k]));
        table.push_row(row);
    }
}

fn push_curve_scalars(table: &mut ResultTable, curve: &kaczmarz::ExperimentCurve, suffix: &str) {
    table.push_scalar_float(&format!("rho{suffix}"), curve.rho);
    if let Some(fit) = &curve.fit_mean_error {
        table.push_scalar_float(&format!("fitted_mean_error_decay_rate{suffix}"), fit.rate);
        table.push_scalar_float(
            &format!("fitted_mean_error_decay_rate_se{suffix}"),
            fit.rate_se,
        );
    }
    if let Some(fit) = &curve.fit_mean_sq_error {
        table.push_scalar_float(&format!("fitted_sq_error_decay_rate{suffix}"), fit.rate);
    }
    table.push_scalar(
        &format!("fit_window{suffix}"),
        format!("{}..{}", curve.fit_window.start, curve.fit_window.end),
    );
}

fn run_kaczmarz_figure(
    args: &crate::KaczmarzFigureArgs,
    r: &Resolver,
    seed: u64,
    workers: usize,
) -> RunResult<ResultTable> {
    let a = r.parse(&args.a, "a", 0.1f64)?;
    let replicas = r.parse(&args.replicas, "replicas", 10_000usize)?;
    let iters = match r.parse(&args.iters, "iters", 0usize)? {
        0 => None,
        n => Some(n),
    };
    let classical = kaczmarz::convergence_experiment(a, Variant::Classical, replicas, iters, seed)?;
    let free =
        kaczmarz::convergence_experiment(a, Variant::CoordinateFree, replicas, iters, seed)?;

    let provenance = Provenance::new("kaczmarz-figure", seed, workers)
        .with("a", a)
        .with("replicas", replicas);
    let mut table = ResultTable::new(
        provenance,
        &["variant", "iter", "mean_error", "mean_sq_error", "se"],
    );
    push_curve_rows(&mut table, &classical, Some("classical"));
    push_curve_rows(&mut table, &free, Some("coordinate-free"));
    push_curve_scalars(&mut table, &classical, "_classical");
    push_curve_scalars(&mut table, &free, "_free");
    table.push_scalar_float("rate_speedup_free_over_classical", free.rho / classical.rho);
    // fitted mean-error rates are reported for comparison with the
    // theoretical diffusive/ballistic lines a²/4 and a/4
    table.push_scalar_float("reference_diffusive_rate", a * a / 4.0);
    table.push_scalar_float("reference_ballistic_rate", a / 4.0);
    Ok(table)
}

/// Re-fit a decay rate from a CSV column (used by the determinism audit and
/// downstream tooling; exposed for tests).
pub fn refit_from_series(series: &[f64]) -> Option<hitrun_core::stats::DecayFit> {
    let last = series.len().checked_sub(1)?;
    fit_log_decay(series, hitrun_core::stats::trailing_window(last))
}
