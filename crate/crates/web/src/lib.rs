//! Browser bindings: solve a kink, sweep `λ₁(ε)`, run a short lattice
//! simulation. Each call returns a JSON string for the page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pendula_core::harness::{simulate, solve, Problem, SimConfig, SolverConfig};
use pendula_core::lyapunov::{principal_eigenpair, solve_u1};
use pendula_core::{KernelConfig, NonlinearitySpec};

/// Plotting never needs more points than this.
const MAX_POINTS: usize = 400;

fn problem(model: &str, decay: f64, half_width: f64, m: usize) -> Result<Problem, String> {
    let kernel = if decay > 0.0 {
        KernelConfig::Exponential { decay, k_max: 20, tail_tol: 100.0 }
    } else {
        KernelConfig::NearestNeighbor
    };
    let nl = NonlinearitySpec::by_name(model).map_err(|e| e.to_string())?;
    Problem::new(model, nl, kernel, half_width, m).map_err(|e| e.to_string())
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

#[derive(Serialize)]
struct ProfileOut {
    z: Vec<f64>,
    u: Vec<f64>,
    u0: Vec<f64>,
    b: f64,
    iterations: usize,
    h2_deviation: f64,
}

/// Kink profile `u_ε` next to `u₀`. `decay = 0` selects nearest-neighbour
/// coupling, otherwise an exponential kernel.
#[wasm_bindgen]
pub fn solve_profile(model: &str, decay: f64, epsilon: f64, half_width: f64, m: usize) -> Result<String, String> {
    let p = problem(model, decay, half_width, m)?;
    let (report, kink) = solve(&p, &SolverConfig::default(), epsilon).map_err(|e| e.to_string())?;
    let s = stride(kink.u.len());
    let pick = |v: &[f64]| v.iter().step_by(s).copied().collect::<Vec<_>>();
    let z: Vec<f64> = p.grid.points().step_by(s).collect();
    let u0: Vec<f64> = z.iter().map(|&x| p.nl.exact_kink(x).unwrap_or(f64::NAN)).collect();
    let out = ProfileOut {
        z,
        u: pick(&kink.u.values),
        u0,
        b: report.kink.b,
        iterations: report.kink.iterations,
        h2_deviation: report.kink.h2_deviation,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EigenOut {
    epsilon: Vec<f64>,
    lambda1: Vec<f64>,
}

/// `λ₁` of `−L^ε` at `count` values of ε spaced evenly up to `eps_max`,
/// starting at 0.
#[wasm_bindgen]
pub fn lambda1_sweep(model: &str, decay: f64, eps_max: f64, count: usize, half_width: f64, m: usize) -> Result<String, String> {
    if count < 2 || eps_max.is_nan() || eps_max <= 0.0 {
        return Err("need count >= 2 and eps_max > 0".into());
    }
    let p = problem(model, decay, half_width, m)?;
    let data = solve_u1(&p.nl, &p.kernel, p.grid).map_err(|e| e.to_string())?;
    let epsilon: Vec<f64> = (0..count).map(|i| eps_max * i as f64 / (count - 1) as f64).collect();
    let lambda1 = epsilon
        .iter()
        .map(|&e| principal_eigenpair(&data, e).map(|(pair, _)| pair.lambda1).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    serde_json::to_string(&EigenOut { epsilon, lambda1 }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SimOut {
    status: String,
    t: Vec<f64>,
    front: Vec<f64>,
    energy: Vec<f64>,
    speed: Option<f64>,
    waveform_error: Option<f64>,
    energy_drift: Option<f64>,
}

/// Lattice run from the kink at speed `c` until `t_end`.
#[wasm_bindgen]
pub fn simulate_front(model: &str, decay: f64, epsilon: f64, c: f64, t_end: f64, dt: f64) -> Result<String, String> {
    let p = problem(model, decay, 20.0, 50)?;
    let (_, kink) = solve(&p, &SolverConfig::default(), epsilon).map_err(|e| e.to_string())?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let sim = SimConfig { c, t_end, dt, record_every: stride(steps), ..SimConfig::default() };
    let (report, rows) = simulate(&p, &kink, &sim).map_err(|e| e.to_string())?;
    let out = SimOut {
        status: report.status,
        t: rows.iter().map(|r| r.t).collect(),
        front: rows.iter().map(|r| r.front_position).collect(),
        energy: rows.iter().map(|r| r.total_energy).collect(),
        speed: report.result.as_ref().map(|r| r.speed),
        waveform_error: report.result.as_ref().map(|r| r.waveform_error),
        energy_drift: report.result.as_ref().map(|r| r.energy_drift),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}
