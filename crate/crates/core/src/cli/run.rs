//! Experiment dispatch and artifact assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use super::artifacts::{json_document, write_atomic, Cell, ErrorReport, Plot, RunManifest, Table};
use super::config::{Experiment, ExperimentConfig, SCHEMA_VERSION};
use crate::concentration::{find_h_minimum, run_eps_sweep, ConcentrationField, SweepReport};
use crate::error::{Error, Result};
use crate::functionals::estimate_sobolev_constant;
use crate::model::{check_hypotheses, GridFunction};
use crate::solver::{lambda_scan, solve_ground_state, solve_limit_ground_state, SolveReport};

pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.csv";
pub const PLOT_FILE: &str = "plot.dat";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

/// What a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: String,
}

struct Products {
    report: serde_json::Value,
    table: Table,
    plot: Plot,
    warnings: Vec<String>,
    summary: String,
}

#[derive(Serialize)]
struct ReportBody<'a> {
    experiment: &'a str,
    partial: bool,
    config: &'a ExperimentConfig,
    result: &'a serde_json::Value,
}

fn grid_table(u: &GridFunction, value: &str) -> Table {
    let mut header: Vec<String> = ["x", "y", "z"].iter().take(u.spec.dim).map(|s| s.to_string()).collect();
    if u.spec.dim > 3 {
        header = (0..u.spec.dim).map(|a| format!("x{a}")).collect();
    }
    header.push(value.to_string());
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new(&refs);
    for (i, v) in u.values.iter().enumerate() {
        let mut cells: Vec<Cell> = Vec::new();
        let pos = u.spec.position(i);
        for p in &pos {
            cells.push(Cell::Num(*p));
        }
        cells.push(Cell::Num(*v));
        t.push(&cells);
    }
    t
}

/// Values along the first axis through the grid point `through`.
fn axis_slice(u: &GridFunction, through: &[f64]) -> Vec<(f64, f64)> {
    let spec = &u.spec;
    let h = spec.spacing();
    let mut idx: Vec<i64> = (0..spec.dim)
        .map(|a| ((through[a] - (spec.center_coord(a) - spec.extent)) / h).round() as i64)
        .collect();
    (0..spec.points as i64)
        .filter_map(|k| {
            idx[0] = k;
            spec.linear_index(&idx).map(|i| (spec.coord(0, k), u.values[i]))
        })
        .collect()
}

fn solve_products(report: &SolveReport, extra: serde_json::Value) -> Result<Products> {
    let mut warnings = Vec::new();
    if report.clamp_events > 0 {
        warnings.push(format!("{} clamp events; convergence is not claimed", report.clamp_events));
    }
    let mut plot = Plot::default();
    plot.curve("u_star", axis_slice(&report.u_star, &report.maximizer));
    let mut value = serde_json::to_value(report)?;
    if let (Some(map), serde_json::Value::Object(extra)) = (value.as_object_mut(), extra) {
        map.extend(extra);
    }
    Ok(Products {
        report: value,
        table: grid_table(&report.u_star, "u"),
        plot,
        warnings,
        summary: format!(
            "c_value = {:.12e}, |g| = {:.3e}, maximizer = {:?}",
            report.c_value, report.grad_norm, report.maximizer
        ),
    })
}

fn sweep_products(report: &SweepReport) -> Result<Products> {
    let mut table = Table::new(&["eps", "c_value", "y_eps", "eps_y_eps", "mass", "ratio", "prediction"]);
    let mut warnings = Vec::new();
    for r in &report.rows {
        table.push(&[
            Cell::Num(r.eps),
            Cell::Num(r.c_value),
            Cell::Vec(&r.y_eps),
            Cell::Vec(&r.eps_y_eps),
            Cell::Num(r.mass),
            Cell::Num(r.ratio),
            Cell::Num(r.prediction),
        ]);
        if !r.nondegenerate {
            warnings.push(format!("eps = {}: local mass below beta", r.eps));
        }
        if !r.converged {
            warnings.push(format!("eps = {}: clamp events during the solve", r.eps));
        }
    }
    if report.field.is_none() {
        warnings.push("concentration field unavailable: decay check or sign check failed".into());
    }
    let mut plot = Plot::default();
    let series = |f: &dyn Fn(&crate::concentration::SweepRow) -> f64| -> Vec<(f64, f64)> {
        report.rows.iter().map(|r| (r.eps, f(r))).collect()
    };
    plot.curve("gap |C_eps - C| vs eps", series(&|r| (r.c_value - report.limit_c).abs()));
    plot.curve("eps*y_eps (first axis) vs eps", series(&|r| r.eps_y_eps[0]));
    plot.curve("ratio vs eps", series(&|r| r.ratio));
    plot.curve("prediction vs eps", series(&|r| r.prediction));
    Ok(Products {
        report: serde_json::to_value(report)?,
        table,
        plot,
        warnings,
        summary: format!("{} eps values, limit C = {:.12e}", report.rows.len(), report.limit_c),
    })
}

fn field_products(field: &ConcentrationField, dim: usize) -> Result<Products> {
    let mut header: Vec<&str> = ["x", "y"].iter().take(dim).copied().collect();
    header.push("H");
    let mut table = Table::new(&header);
    for (p, h) in field.points.iter().zip(&field.h_values) {
        let mut cells: Vec<Cell> = p.iter().map(|c| Cell::Num(*c)).collect();
        cells.push(Cell::Num(*h));
        table.push(&cells);
    }
    let mut plot = Plot::default();
    // first-axis slice through the sample nearest x0
    let nearest = field
        .points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let d = |p: &[f64]| p.iter().zip(&field.x0).skip(1).map(|(a, b)| (a - b).abs()).sum::<f64>();
            d(a.1).total_cmp(&d(b.1))
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let line: Vec<(f64, f64)> = field
        .points
        .iter()
        .zip(&field.h_values)
        .filter(|(p, _)| p[1..] == field.points[nearest][1..])
        .map(|(p, h)| (p[0], *h))
        .collect();
    plot.curve("H along the first axis", line);
    Ok(Products {
        report: serde_json::to_value(field)?,
        table,
        plot,
        warnings: Vec::new(),
        summary: format!("H(x0) = {:.12e} at x0 = {:?}", field.min_value, field.x0),
    })
}

fn execute(config: &ExperimentConfig) -> std::result::Result<Products, (Error, Option<Products>)> {
    let params = &config.params;
    let grid = &config.grid;
    let rho = config.scope_function();
    let seed = config.seed;
    let plain = |e: Error| (e, None);
    match config.experiment {
        Experiment::Solve => {
            let hyp = check_hypotheses(&rho, grid);
            let report = solve_ground_state(params, grid, &rho, &config.solver, seed).map_err(plain)?;
            solve_products(&report, serde_json::json!({ "hypotheses": hyp })).map_err(plain)
        }
        Experiment::Limit => {
            let report = solve_limit_ground_state(params, grid, &config.solver, seed).map_err(plain)?;
            solve_products(&report, serde_json::json!({})).map_err(plain)
        }
        Experiment::Sweep => match run_eps_sweep(params, grid, &rho, &config.sweep, &config.solver, seed) {
            Ok(r) => sweep_products(&r).map_err(plain),
            Err(Error::Sweep { eps, source, partial }) => {
                let products = sweep_products(&partial).ok();
                Err((
                    Error::Sweep {
                        eps,
                        source,
                        partial,
                    },
                    products,
                ))
            }
            Err(e) => Err(plain(e)),
        },
        Experiment::Concentration => {
            let field = find_h_minimum(&rho, grid.dim, params.alpha, &config.concentration).map_err(plain)?;
            field_products(&field, grid.dim).map_err(plain)
        }
        Experiment::Sobolev => {
            let est = estimate_sobolev_constant(params, grid, config.sobolev.theta, config.sobolev.iters)
                .map_err(plain)?;
            let bound = params.critical_level(est.s_est);
            let mut plot = Plot::default();
            let through = est.minimizer.argmax();
            plot.curve("normalised minimizer", axis_slice(&est.minimizer, &through));
            let mut report = serde_json::to_value(&est).map_err(|e| plain(e.into()))?;
            report["critical_level"] = serde_json::json!(bound);
            Ok(Products {
                table: grid_table(&est.minimizer, "u"),
                plot,
                warnings: Vec::new(),
                summary: format!(
                    "S_est = {:.12e} (extremal {:.12e}), (alpha/n) S^(n/2alpha) = {:.12e}",
                    est.s_est, est.extremal_value, bound
                ),
                report,
            })
        }
        Experiment::LambdaScan => {
            let est = estimate_sobolev_constant(params, grid, config.sobolev.theta, config.sobolev.iters)
                .map_err(plain)?;
            let scan = lambda_scan(params, grid, Some(&rho), &config.lambdas, est.s_est, &config.solver, seed)
                .map_err(plain)?;
            let mut table = Table::new(&["lambda", "c_value", "bound", "satisfied"]);
            for r in &scan.rows {
                table.push(&[Cell::Num(r.lambda), Cell::Num(r.c_value), Cell::Num(r.bound), Cell::Bool(r.satisfied)]);
            }
            let mut plot = Plot::default();
            plot.curve("c_value vs lambda", scan.rows.iter().map(|r| (r.lambda, r.c_value)).collect());
            plot.curve("bound vs lambda", scan.rows.iter().map(|r| (r.lambda, r.bound)).collect());
            let mut warnings = Vec::new();
            if !scan.monotone {
                warnings.push("c_value is not monotone in lambda".into());
            }
            if scan.lambda0.is_none() {
                warnings.push("no scanned lambda satisfies the critical bound".into());
            }
            Ok(Products {
                report: serde_json::to_value(&scan).map_err(|e| plain(e.into()))?,
                table,
                plot,
                warnings,
                summary: format!("lambda0 = {:?}, bound = {:.12e}", scan.lambda0, scan.bound),
            })
        }
    }
}

fn write_products(dir: &Path, config: &ExperimentConfig, hash: &str, p: &Products, partial: bool) -> Result<Vec<String>> {
    let body = ReportBody {
        experiment: config.experiment.name(),
        partial,
        config,
        result: &p.report,
    };
    write_atomic(&dir.join(REPORT_FILE), &json_document(hash, SCHEMA_VERSION, &body)?)?;
    write_atomic(&dir.join(TABLE_FILE), &p.table.render(hash, SCHEMA_VERSION)?)?;
    write_atomic(&dir.join(PLOT_FILE), &p.plot.render(hash))?;
    Ok(vec![REPORT_FILE.into(), TABLE_FILE.into(), PLOT_FILE.into()])
}

/// Runs the configured experiment and writes its artifacts to `dir`.
///
/// On failure the manifest is still written, with the error and any
/// partial artifacts recorded, and the error is returned.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let hash = config.hash();
    info!("running {} (config {hash}) into {}", config.experiment.name(), dir.display());
    let mut bytes = json_document(&hash, SCHEMA_VERSION, config)?;
    write_atomic(&dir.join(CONFIG_FILE), &bytes)?;
    bytes.clear();

    let manifest = |status: &str, warnings: Vec<String>, artifacts: Vec<String>, partial: bool, error: Option<&Error>| {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: config.experiment.name().to_string(),
            status: status.to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
            warnings,
            artifacts,
            partial,
            error: error.map(ErrorReport::from),
        }
    };
    match execute(config) {
        Ok(products) => {
            let mut artifacts = vec![CONFIG_FILE.to_string()];
            artifacts.extend(write_products(dir, config, &hash, &products, false)?);
            artifacts.push(MANIFEST_FILE.into());
            for w in &products.warnings {
                warn!("{w}");
            }
            let m = manifest("ok", products.warnings.clone(), artifacts, false, None);
            write_atomic(&dir.join(MANIFEST_FILE), &json_document(&hash, SCHEMA_VERSION, &m)?)?;
            Ok(RunOutcome {
                dir: dir.to_path_buf(),
                manifest: m,
                summary: products.summary,
            })
        }
        Err((error, partial)) => {
            let mut artifacts = vec![CONFIG_FILE.to_string()];
            let mut warnings = Vec::new();
            if matches!(error, Error::DecayCheck { .. }) {
                warnings.push(format!("decay check failed: {error}"));
            }
            let has_partial = partial.is_some();
            if let Some(p) = partial {
                artifacts.extend(write_products(dir, config, &hash, &p, true)?);
                warnings.extend(p.warnings);
            }
            artifacts.push(MANIFEST_FILE.into());
            let m = manifest("failed", warnings, artifacts, has_partial, Some(&error));
            write_atomic(&dir.join(MANIFEST_FILE), &json_document(&hash, SCHEMA_VERSION, &m)?)?;
            Err(error)
        }
    }
}

/// Machine-readable error document printed by the command-line tool.
pub fn error_json(error: &Error) -> String {
    serde_json::to_string(&serde_json::json!({ "error": ErrorReport::from(error) })).expect("error serialises")
}
