//! Experiment drivers: ε-sweeps, refinement studies, reduction diagnostics,
//! lattice runs and hypothesis checks, each producing a versioned report.
//!
//! Everything here runs sequentially in a fixed order, so the same config
//! always serializes to the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_product, norm, Grid, GridFunction, NormKind};
use crate::kernel::{check_lemma1, validate_h2, KernelConfig, KernelSpec};
use crate::kink::{solve_kink, KinkBase, KinkSolution, SolveMode, SolverOptions};
use crate::lattice::{
    check_margin, init_from_kink, required_margin, run_into, summarize, RunOptions, SpeedFit, TelemetryRow,
};
use crate::lyapunov::{eval_b, principal_eigenpair, solve_u1, spectral_gap, verify_d_zero, CorrectorData, LsPoint};
use crate::nonlinearity::{validate_h1, NonlinearitySpec, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Fits with r² below this are flagged unreliable.
pub const RELIABLE_R2: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 20.0, m: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    /// Defaults to `10ε + 1e-6` when absent.
    pub ball_radius: Option<f64>,
    pub mode: SolveMode,
    /// Warm-start each ε of a sweep from the previous fluctuation.
    pub continuation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::new(0.0);
        Self {
            max_iterations: d.max_iterations,
            step_tolerance: d.step_tolerance,
            ball_radius: None,
            mode: SolveMode::Projected,
            continuation: false,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, epsilon: f64) -> SolverOptions {
        SolverOptions {
            epsilon,
            max_iterations: self.max_iterations,
            step_tolerance: self.step_tolerance,
            ball_radius: self.ball_radius,
            mode: self.mode,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub c: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    /// Sites run from `−sites` to `sites`; chosen from the margin rule when absent.
    pub sites: Option<i64>,
    pub offset: f64,
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { c: 1.0, t_end: 50.0, dt: 0.01, sites: None, offset: 0.0, record_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: String,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub epsilons: Vec<f64>,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    /// Grid sizes for `refine`.
    pub m_list: Vec<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: "phi4".into(),
            kernel: KernelConfig::NearestNeighbor,
            grid: GridConfig::default(),
            epsilons: vec![0.0125, 0.025, 0.05, 0.1],
            solver: SolverConfig::default(),
            sim: SimConfig::default(),
            m_list: vec![25, 50, 100],
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(
            &self.model,
            NonlinearitySpec::by_name(&self.model)?,
            self.kernel.clone(),
            self.grid.half_width,
            self.grid.m,
        )
    }

    /// The single ε of `solve`, `refine` and `simulate`: the first entry.
    pub fn first_epsilon(&self) -> Result<f64> {
        self.epsilons.first().copied().ok_or(Error::EmptySweep)
    }
}

/// Resolved model, kernel and grid.
#[derive(Clone)]
pub struct Problem {
    pub model: String,
    pub nl: NonlinearitySpec,
    pub kernel_config: KernelConfig,
    pub kernel: KernelSpec,
    pub grid: Grid,
}

impl Problem {
    pub fn new(model: &str, nl: NonlinearitySpec, kernel_config: KernelConfig, half_width: f64, m: usize) -> Result<Self> {
        Ok(Self {
            model: model.to_string(),
            nl,
            kernel: kernel_config.build()?,
            kernel_config,
            grid: Grid::new(half_width, m)?,
        })
    }

    pub fn with_m(&self, m: usize) -> Result<Self> {
        Ok(Self { grid: Grid::new(self.grid.half_width(), m)?, ..self.clone() })
    }

    fn header(&self, command: &str) -> Header {
        Header {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            model: self.model.clone(),
            kernel: self.kernel_config.clone(),
            grid: GridConfig { half_width: self.grid.half_width(), m: self.grid.subdivisions() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub command: String,
    pub model: String,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    pub reliable: bool,
}

/// Fits `ln y = slope·ln x + intercept` over the pairs with `x, y > 0` and
/// finite. `None` with fewer than three such pairs.
pub fn fit_loglog(pairs: &[(f64, f64)]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(Fit { slope, intercept: my - slope * mx, r2, points: pts.len(), reliable: r2 >= RELIABLE_R2 })
}

fn insert_fit(fits: &mut BTreeMap<String, Fit>, name: &str, pairs: &[(f64, f64)]) {
    if let Some(f) = fit_loglog(pairs) {
        fits.insert(name.to_string(), f);
    }
}

fn sorted_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    Ok(eps)
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkSummary {
    pub epsilon: f64,
    pub mode: SolveMode,
    pub b: f64,
    pub iterations: usize,
    pub step_history: Vec<f64>,
    pub equation_residual: f64,
    /// `||u_ε − u₀||_H2`
    pub h2_deviation: f64,
}

impl KinkSummary {
    pub fn new(kink: &KinkSolution) -> Self {
        Self {
            epsilon: kink.epsilon,
            mode: kink.mode,
            b: kink.b,
            iterations: kink.iterations,
            step_history: kink.step_history.clone(),
            equation_residual: kink.equation_residual,
            h2_deviation: norm(&kink.phi, NormKind::H2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(flatten)]
    pub header: Header,
    pub solver: SolverConfig,
    pub kink: KinkSummary,
}

pub fn solve(problem: &Problem, solver: &SolverConfig, epsilon: f64) -> Result<(SolveReport, KinkSolution)> {
    let kink = solve_kink(&problem.nl, &problem.kernel, problem.grid, &solver.options(epsilon))?;
    let report = SolveReport { header: problem.header("solve"), solver: solver.clone(), kink: KinkSummary::new(&kink) };
    Ok((report, kink))
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub h2_deviation: Option<f64>,
    pub b: Option<f64>,
    pub lambda1: Option<f64>,
    pub g_l2: Option<f64>,
    pub iterations: Option<usize>,
    pub equation_residual: Option<f64>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    #[serde(flatten)]
    pub header: Header,
    pub rows: Vec<SweepRow>,
    /// `λ₁` at ε = 0, subtracted before fitting `lambda1`.
    pub lambda1_floor: f64,
    pub fitted_slopes: BTreeMap<String, Fit>,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("epsilon,h2_deviation,b,lambda1,g_l2,iterations\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epsilon,
                opt(r.h2_deviation),
                opt(r.b),
                opt(r.lambda1),
                opt(r.g_l2),
                r.iterations.map(|i| i.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Solves the kink, the principal eigenpair of `−L^ε` and `G(ε)` for every ε.
/// A failing ε is recorded in its row and the sweep goes on.
pub fn sweep(problem: &Problem, solver: &SolverConfig, epsilons: &[f64]) -> Result<SweepReport> {
    let eps = sorted_epsilons(epsilons)?;
    let data = solve_u1(&problem.nl, &problem.kernel, problem.grid)?;
    let (floor, _) = principal_eigenpair(&data, 0.0)?;
    let mut rows = Vec::with_capacity(eps.len());
    let mut warm: Option<GridFunction> = None;
    for &e in &eps {
        let mut row = SweepRow {
            epsilon: e,
            status: "ok".into(),
            error: None,
            h2_deviation: None,
            b: None,
            lambda1: None,
            g_l2: None,
            iterations: None,
            equation_residual: None,
        };
        let mut errors = Vec::new();
        let mut opts = solver.options(e);
        if solver.continuation {
            opts.warm_start = warm.clone();
        }
        match solve_kink(&problem.nl, &problem.kernel, problem.grid, &opts) {
            Ok(k) => {
                row.h2_deviation = Some(norm(&k.phi, NormKind::H2));
                row.b = Some(k.b);
                row.iterations = Some(k.iterations);
                row.equation_residual = Some(k.equation_residual);
                warm = Some(k.phi);
            }
            Err(err) => errors.push(format!("kink: {err}")),
        }
        match principal_eigenpair(&data, e) {
            Ok((pair, _)) => row.lambda1 = Some(pair.lambda1),
            Err(err) => errors.push(format!("eigenpair: {err}")),
        }
        row.g_l2 = Some(norm(&crate::lyapunov::compute_g(&data, e), NormKind::L2));
        if !errors.is_empty() {
            row.status = "failed".into();
            row.error = Some(errors.join("; "));
        }
        rows.push(row);
    }

    let good: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
    let series = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Vec<(f64, f64)> {
        good.iter().filter_map(|r| f(r).map(|y| (r.epsilon, y))).collect()
    };
    let mut fits = BTreeMap::new();
    insert_fit(&mut fits, "h2_deviation", &series(&|r| r.h2_deviation));
    insert_fit(&mut fits, "g_l2", &series(&|r| r.g_l2));
    insert_fit(&mut fits, "lambda1", &series(&|r| r.lambda1.map(|l| (l - floor.lambda1).abs())));
    Ok(SweepReport { header: problem.header("sweep"), rows, lambda1_floor: floor.lambda1, fitted_slopes: fits })
}

// ---------------------------------------------------------------- refine

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineRow {
    pub m: usize,
    pub h: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub b_abs: Option<f64>,
    /// `|(Δu₀, u₀')| / (||Δu₀||·||u₀'||)` with the sampled analytic `u₀'`.
    pub lemma1_pairing: f64,
    pub lambda1_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineReport {
    #[serde(flatten)]
    pub header: Header,
    pub epsilon: f64,
    pub rows: Vec<RefineRow>,
    /// Slopes against h.
    pub fitted_slopes: BTreeMap<String, Fit>,
}

fn normalized_pairing(base: &KinkBase) -> f64 {
    let pairing = inner_product(&base.delta_u0, &base.du0).unwrap();
    let scale = norm(&base.delta_u0, NormKind::L2) * norm(&base.du0, NormKind::L2);
    if scale > 0.0 {
        pairing.abs() / scale
    } else {
        0.0
    }
}

/// `|b_ε|`, the `(Δu₀, u₀')` pairing and the `λ₁(0)` floor on each grid of
/// `m_list`, with their slopes against h.
pub fn refine_study(problem: &Problem, solver: &SolverConfig, epsilon: f64, m_list: &[usize]) -> Result<RefineReport> {
    if m_list.len() < 3 || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "m_list must be strictly increasing with at least 3 values, got {m_list:?}"
        )));
    }
    let mut rows = Vec::new();
    for &m in m_list {
        let p = problem.with_m(m)?;
        let base = KinkBase::new(&p.nl, &p.kernel, p.grid)?;
        let mut row = RefineRow {
            m,
            h: p.grid.spacing(),
            status: "ok".into(),
            error: None,
            b_abs: None,
            lemma1_pairing: normalized_pairing(&base),
            lambda1_floor: None,
        };
        let mut errors = Vec::new();
        match solve_kink(&p.nl, &p.kernel, p.grid, &solver.options(epsilon)) {
            Ok(k) => row.b_abs = Some(k.b.abs()),
            Err(e) => errors.push(format!("kink: {e}")),
        }
        match solve_u1(&p.nl, &p.kernel, p.grid).and_then(|d| principal_eigenpair(&d, 0.0)) {
            Ok((pair, _)) => row.lambda1_floor = Some(pair.lambda1),
            Err(e) => errors.push(format!("eigenpair: {e}")),
        }
        if !errors.is_empty() {
            row.status = "failed".into();
            row.error = Some(errors.join("; "));
        }
        rows.push(row);
    }
    let good: Vec<&RefineRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let series = |f: &dyn Fn(&RefineRow) -> Option<f64>| -> Vec<(f64, f64)> {
        good.iter().filter_map(|r| f(r).map(|y| (r.h, y))).collect()
    };
    let mut fits = BTreeMap::new();
    insert_fit(&mut fits, "b_abs", &series(&|r| r.b_abs));
    insert_fit(&mut fits, "lemma1_pairing", &series(&|r| Some(r.lemma1_pairing)));
    insert_fit(&mut fits, "lambda1_floor", &series(&|r| r.lambda1_floor.map(f64::abs)));
    Ok(RefineReport { header: problem.header("refine"), epsilon, rows, fitted_slopes: fits })
}

// ---------------------------------------------------------------- ls-diagnostics

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsRow {
    pub epsilon: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub lambda1: Option<f64>,
    pub g_l2: f64,
    /// `||v*(0, ε)||_H2`
    pub vstar_h2: Option<f64>,
    pub vstar_iterations: Option<usize>,
    /// Upper estimate of the second eigenvalue of `−L^ε`.
    pub gap: Option<f64>,
    pub gap_converged: Option<bool>,
    /// `||φ₁ − û₀'/||û₀'||_H2||_H2`
    pub alignment: Option<f64>,
    pub b_at_zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsReport {
    #[serde(flatten)]
    pub header: Header,
    /// `(û₀', f''(u₀)u₁û₀' − Δû₀') / ||û₀'||²`
    pub d_estimate: f64,
    pub lambda1_floor: f64,
    pub rows: Vec<LsRow>,
    pub fitted_slopes: BTreeMap<String, Fit>,
}

impl LsReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("epsilon,lambda1,g_l2,vstar_h2,d_estimate,gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{},{:e},{}\n",
                r.epsilon,
                opt(r.lambda1),
                r.g_l2,
                opt(r.vstar_h2),
                self.d_estimate,
                opt(r.gap)
            ));
        }
        out
    }
}

fn ls_row(data: &CorrectorData, epsilon: f64, du0_unit: &GridFunction) -> LsRow {
    let mut row = LsRow {
        epsilon,
        status: "ok".into(),
        error: None,
        lambda1: None,
        g_l2: norm(&crate::lyapunov::compute_g(data, epsilon), NormKind::L2),
        vstar_h2: None,
        vstar_iterations: None,
        gap: None,
        gap_converged: None,
        alignment: None,
        b_at_zero: None,
    };
    let point = match LsPoint::new(data, epsilon) {
        Ok(p) => p,
        Err(e) => {
            row.status = "failed".into();
            row.error = Some(format!("eigenpair: {e}"));
            return row;
        }
    };
    row.lambda1 = Some(point.pair.lambda1);
    row.alignment = Some(norm(&(&point.pair.phi1 - du0_unit), NormKind::H2));
    let gap = spectral_gap(data, &point.op, &point.pair);
    row.gap = Some(gap.lambda2);
    row.gap_converged = Some(gap.converged);
    match crate::lyapunov::solve_vstar(data, &point, 0.0) {
        Ok(v) => {
            row.vstar_h2 = Some(norm(&v.v, NormKind::H2));
            row.vstar_iterations = Some(v.iterations);
            row.b_at_zero = Some(eval_b(data, &point, 0.0, &v.v));
        }
        Err(e) => {
            row.status = "failed".into();
            row.error = Some(format!("v*: {e}"));
        }
    }
    row
}

/// Corrector, eigenpair, `v*(0, ε)`, gap and `B(0, ε)` for every ε.
pub fn ls_diagnostics(problem: &Problem, epsilons: &[f64]) -> Result<LsReport> {
    let eps = sorted_epsilons(epsilons)?;
    let data = solve_u1(&problem.nl, &problem.kernel, problem.grid)?;
    let (floor, _) = principal_eigenpair(&data, 0.0)?;
    let du0_unit = data.base.du0.scale(1.0 / norm(&data.base.du0, NormKind::H2));
    let rows: Vec<LsRow> = eps.iter().map(|&e| ls_row(&data, e, &du0_unit)).collect();
    let good: Vec<&LsRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let series = |f: &dyn Fn(&LsRow) -> Option<f64>| -> Vec<(f64, f64)> {
        good.iter().filter_map(|r| f(r).map(|y| (r.epsilon, y))).collect()
    };
    let mut fits = BTreeMap::new();
    insert_fit(&mut fits, "lambda1", &series(&|r| r.lambda1.map(|l| (l - floor.lambda1).abs())));
    insert_fit(&mut fits, "g_l2", &series(&|r| Some(r.g_l2)));
    insert_fit(&mut fits, "vstar_h2", &series(&|r| r.vstar_h2));
    insert_fit(&mut fits, "alignment", &series(&|r| r.alignment));
    Ok(LsReport {
        header: problem.header("ls-diagnostics"),
        d_estimate: verify_d_zero(&data),
        lambda1_floor: floor.lambda1,
        rows,
        fitted_slopes: fits,
    })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    #[serde(flatten)]
    pub header: Header,
    pub epsilon: f64,
    pub c: f64,
    pub kappa: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub sites: [i64; 2],
    pub offset: f64,
    pub warnings: Vec<String>,
    /// `ok` or `diverged`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<SpeedFit>,
}

/// Half-width of the site range: the runner's margin plus the offset.
pub fn default_sites(kernel: &KernelSpec, sim: &SimConfig) -> i64 {
    required_margin(kernel, sim.c, sim.t_end) + sim.offset.abs().ceil() as i64 + 1
}

/// Runs the lattice from a solved kink. Divergence is reported in the
/// status, and the telemetry recorded up to it is returned either way.
pub fn simulate(problem: &Problem, kink: &KinkSolution, sim: &SimConfig) -> Result<(SimulateReport, Vec<TelemetryRow>)> {
    let half = sim.sites.unwrap_or_else(|| default_sites(&problem.kernel, sim));
    if half <= 0 {
        return Err(Error::InvalidParameter(format!("sites must be positive, got {half}")));
    }
    let mut state = init_from_kink(kink, &problem.nl, &problem.kernel, sim.c, sim.offset, (-half, half))?;
    let opts = RunOptions { t_end: sim.t_end, dt: sim.dt, record_every: sim.record_every };
    let profile = check_margin(&state, sim.t_end)?;
    let mut rows = Vec::new();
    let outcome = run_into(&mut state, &opts, &mut rows);
    let mut report = SimulateReport {
        header: problem.header("simulate"),
        epsilon: kink.epsilon,
        c: sim.c,
        kappa: state.kappa,
        t_end: sim.t_end,
        dt: sim.dt,
        sites: [-half, half],
        offset: sim.offset,
        warnings: state.warnings.clone(),
        status: "ok".into(),
        error: None,
        records: rows.len(),
        result: None,
    };
    match outcome {
        Ok(()) => report.result = Some(summarize(&state, &profile, rows.clone())),
        Err(e @ Error::Diverged { .. }) => {
            report.status = "diverged".into();
            report.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok((report, rows))
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Summary {
    pub pairing: f64,
    /// `|(Δu₀, u₀')| / (||Δu₀||·||u₀'||)`
    pub normalized_pairing: f64,
    pub delta_l2: f64,
    pub bound: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    #[serde(flatten)]
    pub header: Header,
    pub h1: ValidationReport,
    pub h2: ValidationReport,
    /// Present when the model has a closed-form kink.
    pub lemma1: Option<Lemma1Summary>,
    pub passed: bool,
}

pub const H1_SAMPLES: usize = 1000;

pub fn validate(problem: &Problem) -> Result<ValidateReport> {
    let h1 = validate_h1(&problem.nl, H1_SAMPLES)?;
    let h2 = validate_h2(&problem.kernel);
    let lemma1 = if problem.nl.has_exact_kink() {
        let base = KinkBase::new(&problem.nl, &problem.kernel, problem.grid)?;
        let l = check_lemma1(&problem.kernel, &base.u0);
        Some(Lemma1Summary {
            pairing: inner_product(&base.delta_u0, &base.du0)?,
            normalized_pairing: normalized_pairing(&base),
            delta_l2: l.delta_l2,
            bound: problem.kernel.lemma_constant() * norm(&base.du0, NormKind::L2),
            bound_holds: l.delta_l2 <= problem.kernel.lemma_constant() * norm(&base.du0, NormKind::L2),
        })
    } else {
        None
    };
    let passed = h1.passed() && h2.passed() && lemma1.as_ref().is_none_or(|l| l.bound_holds);
    Ok(ValidateReport { header: problem.header("validate"), h1, h2, lemma1, passed })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
