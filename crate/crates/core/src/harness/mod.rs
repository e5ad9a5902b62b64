//! Experiment driver: solve, converge, expand and validate runs, each
//! writing one CSV table.

pub mod checks;
pub mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expansion::{compute_expansion, expansion_eval, fd_comparison, verify_vanishing_coefficients, FD_STEP};
use crate::geometry::{Point, ProblemConfig};
use crate::order::{fit_order, FitOutcome};
use crate::representation::{
    build_field, eval_boundary_layer, eval_epsilon_regime, eval_macroscopic, eval_microscopic, EtaSpec, View,
};
use crate::rescaled::{solve_densities, solve_limit_quadruple, PreparedConfig};
use checks::{guarded, Check};
use table::{Cell, Table};

pub const DEFAULT_GRID: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Converge,
    Expand,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Converge => "converge",
            Mode::Expand => "expand",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub config: ProblemConfig,
    /// `t` values: pairs `(t, r* + t)` for solve and validate, `eps` for
    /// converge, `rho1 = rho2 = t` for the expand remainder.
    pub grid: Vec<f64>,
    /// `(c, beta)` of `eta(eps) = c eps^beta`.
    pub eta: (f64, f64),
    pub macro_points: Vec<Point>,
    pub micro_points: Vec<Point>,
    pub layer_points: Vec<(usize, Point)>,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, config: ProblemConfig, out: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            config,
            grid: DEFAULT_GRID.to_vec(),
            eta: (1.0, 0.5),
            macro_points: vec![Point::new(0.6, 0.3)],
            micro_points: vec![Point::new(0.0, 0.6)],
            layer_points: vec![(1, Point::new(0.0, 1.6)), (2, Point::new(0.0, -1.2))],
            out: out.into(),
        }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.grid.iter().map(|&t| (t, self.config.r_star + t)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub path: PathBuf,
    pub table: Table,
    /// Names of failed checks; empty for modes without checks.
    pub failures: Vec<String>,
}

pub fn config_hash(config: &ProblemConfig) -> Result<String> {
    let text = serde_json::to_string(config)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn header(table: &mut Table, spec: &ExperimentSpec) -> Result<()> {
    table.meta("perfbie_version", crate::VERSION);
    table.meta("mode", spec.mode.name());
    table.meta("config_sha256", config_hash(&spec.config)?);
    table.meta("M", spec.config.nodes.to_string());
    table.meta("grid", join(&spec.grid));
    if spec.mode == Mode::Converge {
        table.meta("eta", format!("c={},beta={}", spec.eta.0, spec.eta.1));
    }
    Ok(())
}

/// Every sweep pair must pass the geometric checks before anything is solved.
fn check_sweep(prep: &PreparedConfig, pairs: &[(f64, f64)]) -> Result<()> {
    pairs.iter().try_for_each(|&(a, b)| prep.check_parameters(a, b, false))
}

pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    if spec.grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let prep = PreparedConfig::new(&spec.config)?;
    let (mut table, failures) = match spec.mode {
        Mode::Solve => (solve_table(&prep, spec)?, Vec::new()),
        Mode::Converge => (converge_table(&prep, spec)?, Vec::new()),
        Mode::Expand => expand_table(&prep, spec)?,
        Mode::Validate => validate_table(&prep, spec)?,
    };
    header(&mut table, spec)?;
    std::fs::create_dir_all(&spec.out)?;
    let path = spec.out.join(format!("{}.csv", spec.mode.name()));
    table.write(&path)?;
    Ok(RunReport { path, table, failures })
}

fn views(spec: &ExperimentSpec) -> Vec<(View, Point)> {
    spec.macro_points
        .iter()
        .map(|&x| (View::Macro, x))
        .chain(spec.micro_points.iter().map(|&t| (View::Micro, t)))
        .chain(spec.layer_points.iter().map(|&(j, t)| (View::Layer(j), t)))
        .collect()
}

fn view_cells(view: View) -> [Cell; 2] {
    match view {
        View::Macro => ["macro".into(), 0usize.into()],
        View::Micro => ["micro".into(), 0usize.into()],
        View::Layer(j) => ["layer".into(), j.into()],
    }
}

pub fn solve_table(prep: &PreparedConfig, spec: &ExperimentSpec) -> Result<Table> {
    let pairs = spec.pairs();
    check_sweep(prep, &pairs)?;
    let mut table = Table::new(&[
        "rho1", "rho2", "view", "j", "x", "y", "raw", "correction", "analytic", "condition", "flux_defect_1",
        "flux_defect_2",
    ]);
    let solved: Result<Vec<Vec<Vec<Cell>>>> = pairs
        .par_iter()
        .map(|&(r1, r2)| {
            let q = solve_densities(prep, r1, r2)?;
            let field = build_field(prep, r1, r2, &q)?;
            let mut rows = Vec::new();
            for (view, x) in views(spec) {
                let (raw, analytic) = match view {
                    View::Macro => {
                        let v = eval_macroscopic(&field, &[x])?[0];
                        (v, v)
                    }
                    View::Micro => {
                        let v = eval_microscopic(&field, prep, r1, r2, &[x])?[0];
                        (v.raw, v.analytic)
                    }
                    View::Layer(j) => {
                        let v = eval_boundary_layer(&field, prep, j, r1, r2, &[x])?[0];
                        (v.raw, v.analytic)
                    }
                };
                let [name, j] = view_cells(view);
                rows.push(vec![
                    r1.into(),
                    r2.into(),
                    name,
                    j,
                    x.x.into(),
                    x.y.into(),
                    raw.into(),
                    (raw - analytic).into(),
                    analytic.into(),
                    q.condition.into(),
                    q.flux_defect[0].into(),
                    q.flux_defect[1].into(),
                ]);
            }
            Ok(rows)
        })
        .collect();
    for row in solved?.into_iter().flatten() {
        table.push(row);
    }
    Ok(table)
}

fn blank() -> Cell {
    Cell::Text(String::new())
}

fn slope_cell(fit: &FitOutcome) -> Cell {
    match fit.slope() {
        Some(s) => s.into(),
        None => "floor".into(),
    }
}

pub fn converge_table(prep: &PreparedConfig, spec: &ExperimentSpec) -> Result<Table> {
    let eta = EtaSpec::power(spec.eta.0, spec.eta.1)?;
    let pairs: Vec<(f64, f64)> = spec
        .grid
        .iter()
        .map(|&eps| eta.eta(eps).map(|e| (e, eps / e)))
        .collect::<Result<_>>()?;
    check_sweep(prep, &pairs)?;
    let r_star = prep.config.r_star;
    let limit = build_field(prep, 0.0, r_star, &solve_limit_quadruple(prep)?)?;
    let origin = limit.eval_unchecked(Point::zeros());
    let views = views(spec);
    let evals: Result<Vec<_>> = spec
        .grid
        .par_iter()
        .map(|&eps| {
            views
                .iter()
                .map(|&(view, x)| eval_epsilon_regime(prep, &eta, eps, view, &[x]))
                .collect::<Result<Vec<_>>>()
        })
        .collect();
    let evals = evals?;
    let mut table = Table::new(&[
        "kind", "eps", "eta", "view", "j", "x", "y", "raw", "correction", "analytic", "reference", "error",
    ]);
    let mut summary = Vec::new();
    for (k, &(view, x)) in views.iter().enumerate() {
        let reference = match view {
            View::Macro => limit.eval(x)?,
            _ => origin,
        };
        let mut errs = Vec::new();
        let mut raw_errs = Vec::new();
        for per_eps in &evals {
            let e = &per_eps[k];
            let v = e.values[0];
            let error = (v.analytic - reference).abs();
            errs.push((e.rho1, error));
            raw_errs.push((e.rho1, (v.raw - reference).abs()));
            let [name, j] = view_cells(view);
            table.push(vec![
                "value".into(),
                e.eps.into(),
                e.rho1.into(),
                name,
                j,
                x.x.into(),
                x.y.into(),
                v.raw.into(),
                v.correction.into(),
                v.analytic.into(),
                reference.into(),
                error.into(),
            ]);
        }
        for (kind, pts) in [("order", &errs), ("order_raw", &raw_errs)] {
            let [name, j] = view_cells(view);
            summary.push(vec![
                kind.into(),
                blank(),
                blank(),
                name,
                j,
                x.x.into(),
                x.y.into(),
                blank(),
                blank(),
                blank(),
                reference.into(),
                slope_cell(&fit_order(pts)?),
            ]);
        }
    }
    for row in summary {
        table.push(row);
    }
    Ok(table)
}

fn check_row(kind: &str, c: &Check) -> Vec<Cell> {
    vec![
        kind.into(),
        c.name.clone().into(),
        c.value.into(),
        c.lower.into(),
        c.upper.into(),
        c.pass.into(),
        c.note.clone().into(),
    ]
}

const CHECK_COLUMNS: [&str; 7] = ["kind", "name", "value", "lower", "upper", "pass", "note"];

fn failures(rows: &[(String, Check)]) -> Vec<String> {
    rows.iter().filter(|(_, c)| !c.pass).map(|(_, c)| c.name.clone()).collect()
}

fn check_table(rows: &[(String, Check)]) -> Table {
    let mut table = Table::new(&CHECK_COLUMNS);
    for (kind, c) in rows {
        table.push(check_row(kind, c));
    }
    table
}

/// Coefficient norms against finite differences, the vanishing coefficients,
/// and the remainder order at each macro point.
pub fn expand_table(prep: &PreparedConfig, spec: &ExperimentSpec) -> Result<(Table, Vec<String>)> {
    let ts = &spec.grid;
    let pairs: Vec<(f64, f64)> = ts.iter().map(|&t| (t, t)).collect();
    check_sweep(prep, &pairs)?;
    let coeffs = compute_expansion(prep)?;
    let mut rows: Vec<(String, Check)> = Vec::new();
    for c in fd_comparison(prep, &coeffs, FD_STEP)? {
        let note = format!("equation {:.6e} fd {:.6e}", c.equation_norm, c.fd_norm);
        rows.push(("coefficient".into(), Check::at_most(c.name, c.relative, 1e-5).with_note(note)));
    }
    let v = verify_vanishing_coefficients(prep, FD_STEP)?;
    for (name, value) in [
        ("theta_o_10", v.theta_o_10),
        ("theta_o_01", v.theta_o_01),
        ("xi_10", v.xi_10),
        ("xi_01", v.xi_01),
        ("theta_o_12", v.theta_o_12),
        ("xi_12", v.xi_12),
    ] {
        rows.push(("vanishing".into(), Check::at_most(name, value, 1e-3)));
    }
    for &x in &spec.macro_points {
        let errors: Result<Vec<(f64, f64)>> = ts
            .par_iter()
            .map(|&t| {
                let q = solve_densities(prep, t, t)?;
                let u = build_field(prep, t, t, &q)?.eval(x)?;
                Ok((t, (u - expansion_eval(&coeffs, t, t, x)?.value).abs()))
            })
            .collect();
        let errors = errors?;
        for &(t, e) in &errors {
            let c = Check::within(format!("remainder_t{t}_x({},{})", x.x, x.y), e, f64::NEG_INFINITY, f64::INFINITY);
            rows.push(("remainder".into(), c));
        }
        let name = format!("remainder_order_x({},{})", x.x, x.y);
        let c = match fit_order(&errors)? {
            FitOutcome::Fitted(f) => Check::within(name, f.slope, 3.7, 4.5),
            FitOutcome::Floor => Check::within(name, f64::NAN, 3.7, 4.5).with_note("all errors at the floor"),
        };
        rows.push(("order".into(), c));
    }
    Ok((check_table(&rows), failures(&rows)))
}

fn validate_checks(prep: &PreparedConfig, spec: &ExperimentSpec) -> Result<Vec<(String, Check)>> {
    let m = prep.m();
    let pairs = spec.pairs();
    check_sweep(prep, &pairs)?;
    let equivalence_pairs = if prep.config.r_star == 0.0 {
        vec![(0.2, 0.3), (0.1, 0.1)]
    } else {
        vec![(0.1, prep.config.r_star), (0.05, prep.config.r_star)]
    };
    let groups: Vec<(&str, Vec<Check>)> = vec![
        ("gauss", guarded("gauss", || checks::gauss_identity(m))),
        ("kstar", guarded("kstar", || checks::adjoint_double_layer_half(m))),
        ("single_layer", guarded("single_layer", || checks::single_layer_circles(m))),
        ("annulus", guarded("annulus", || checks::annulus(m))),
        ("manufactured", checks::manufactured(m)),
        ("uniqueness", guarded("uniqueness", || checks::uniqueness(prep, &pairs))),
        ("flux", checks::flux_identity(prep, &pairs)),
        ("equivalence", checks::equivalence(prep, &equivalence_pairs)),
    ];
    Ok(groups
        .into_iter()
        .flat_map(|(kind, cs)| cs.into_iter().map(move |c| (kind.to_string(), c)))
        .collect())
}

pub fn validate_table(prep: &PreparedConfig, spec: &ExperimentSpec) -> Result<(Table, Vec<String>)> {
    let rows = validate_checks(prep, spec)?;
    Ok((check_table(&rows), failures(&rows)))
}

/// Reads a config file, or the shipped default when `path` is `None`.
pub fn load_config(path: Option<&Path>, nodes: Option<usize>) -> Result<ProblemConfig> {
    let mut config = match path {
        Some(p) => ProblemConfig::from_path(p)?,
        None => ProblemConfig::default_two_holes(),
    };
    if let Some(m) = nodes {
        config = config.with_nodes(m);
        config.check()?;
    }
    Ok(config)
}
