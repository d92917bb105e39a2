//! The pendulum array `ü_n = κ Σ_k a_k u_{n−k} − f(u_n)` integrated with
//! velocity Verlet, with sites clamped to 0 on the left and 1 on the right.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernel::KernelSpec;
use crate::kink::KinkSolution;
use crate::nonlinearity::NonlinearitySpec;

/// A kink profile read back as a function of the continuous variable.
#[derive(Debug, Clone)]
pub struct Profile {
    pub kink: GridFunction,
    pub c: f64,
    pub offset: f64,
}

impl Profile {
    fn nodes(&self, xi: f64, points: usize) -> (isize, f64) {
        let g = self.kink.grid;
        let s = (xi + g.half_width()) * g.subdivisions() as f64;
        let first = s.floor() as isize - (points as isize / 2 - 1);
        (first, s - first as f64)
    }

    /// Cubic Lagrange interpolation of the grid profile, limits outside.
    pub fn value(&self, xi: f64) -> f64 {
        let (first, t) = self.nodes(xi, 4);
        lagrange(&self.window(first, 4), t)
    }

    /// Derivative of the 6-point Lagrange interpolant.
    pub fn derivative(&self, xi: f64) -> f64 {
        let (first, t) = self.nodes(xi, 6);
        lagrange_derivative(&self.window(first, 6), t) * self.kink.grid.subdivisions() as f64
    }

    /// `u_ε(n − offset − ct)`
    pub fn at(&self, n: f64, t: f64) -> f64 {
        self.value(n - self.offset - self.c * t)
    }

    fn window(&self, first: isize, len: usize) -> Vec<f64> {
        (0..len as isize).map(|j| self.kink.extended(first + j)).collect()
    }
}

fn lagrange(y: &[f64], t: f64) -> f64 {
    let n = y.len();
    (0..n)
        .map(|j| {
            let w: f64 = (0..n).filter(|&i| i != j).map(|i| (t - i as f64) / (j as f64 - i as f64)).product();
            w * y[j]
        })
        .sum()
}

fn lagrange_derivative(y: &[f64], t: f64) -> f64 {
    let n = y.len();
    (0..n)
        .map(|j| {
            let denom: f64 = (0..n).filter(|&i| i != j).map(|i| j as f64 - i as f64).product();
            let num: f64 = (0..n)
                .filter(|&l| l != j)
                .map(|l| (0..n).filter(|&i| i != j && i != l).map(|i| t - i as f64).product::<f64>())
                .sum();
            y[j] * num / denom
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct LatticeState {
    /// Index of `u[0]`.
    pub n_min: i64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub kappa: f64,
    pub kernel: KernelSpec,
    /// Reaction term of the lattice, `c²f` for a kink computed with `f`.
    pub nl: NonlinearitySpec,
    pub profile: Option<Profile>,
    pub warnings: Vec<String>,
}

impl LatticeState {
    pub fn new(n_min: i64, n_max: i64, kappa: f64, kernel: KernelSpec, nl: NonlinearitySpec) -> Result<Self> {
        if n_max < n_min {
            return Err(Error::InvalidParameter(format!("empty site range [{n_min}, {n_max}]")));
        }
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
        }
        let len = (n_max - n_min + 1) as usize;
        Ok(Self {
            n_min,
            u: vec![0.0; len],
            p: vec![0.0; len],
            t: 0.0,
            kappa,
            kernel,
            nl,
            profile: None,
            warnings: Vec::new(),
        })
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.u.len() as i64 - 1
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        self.n_min..=self.n_max()
    }

    #[inline]
    fn extended(&self, i: isize) -> f64 {
        if i < 0 {
            0.0
        } else if i as usize >= self.u.len() {
            1.0
        } else {
            self.u[i as usize]
        }
    }

    /// `κ Σ_k a_k u_{n−k} − f(u_n)` at every site.
    pub fn acceleration(&self) -> Vec<f64> {
        let a = self.kernel.coefficients();
        (0..self.u.len() as isize)
            .map(|i| {
                let ui = self.u[i as usize];
                let mut conv = a[0] * ui;
                for (k, &ak) in a.iter().enumerate().skip(1) {
                    conv += ak * (self.extended(i - k as isize) + self.extended(i + k as isize));
                }
                self.kappa * conv - self.nl.f(ui)
            })
            .collect()
    }
}

/// `u_n = u_ε(n − offset)`, `p_n = −c u_ε'(n − offset)` on `[n_min, n_max]`,
/// with the lattice reaction `c²f` and coupling `κ = εc²`.
pub fn init_from_kink(
    kink: &KinkSolution,
    nl: &NonlinearitySpec,
    kernel: &KernelSpec,
    c: f64,
    offset: f64,
    sites: (i64, i64),
) -> Result<LatticeState> {
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c = {c}")));
    }
    let kappa = kink.epsilon * c * c;
    let mut state = LatticeState::new(sites.0, sites.1, kappa, kernel.clone(), nl.scaled(c * c))?;
    let profile = Profile { kink: kink.u.clone(), c, offset };
    for (i, n) in (sites.0..=sites.1).enumerate() {
        let xi = n as f64 - offset;
        state.u[i] = profile.value(xi);
        state.p[i] = -c * profile.derivative(xi);
    }
    let l = kink.u.grid.half_width();
    if (sites.0 as f64 - offset) < -l || (sites.1 as f64 - offset) > l {
        state.warnings.push(format!(
            "sites [{}, {}] extend past the profile support [{}, {}]; clamped tails used",
            sites.0,
            sites.1,
            offset - l,
            offset + l
        ));
    }
    state.profile = Some(profile);
    Ok(state)
}

/// One velocity-Verlet step.
pub fn step(state: &mut LatticeState, dt: f64) {
    let acc = state.acceleration();
    for ((p, u), a) in state.p.iter_mut().zip(state.u.iter_mut()).zip(&acc) {
        *p += 0.5 * dt * a;
        *u += dt * *p;
    }
    let acc = state.acceleration();
    for (p, a) in state.p.iter_mut().zip(&acc) {
        *p += 0.5 * dt * a;
    }
    state.t += dt;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub interaction: f64,
    pub potential: f64,
    pub total: f64,
}

/// `Σ ½p² + (κ/4) Σ_n Σ_k a_k (u_{n−k} − u_n)² + Σ F(u_n)`. A pair with one
/// clamped site only appears once in the double sum and is weighted twice,
/// so that `−∂H/∂u` equals the acceleration.
pub fn energy(state: &LatticeState) -> EnergyReport {
    let kinetic = state.p.iter().map(|p| 0.5 * p * p).sum();
    let a = state.kernel.coefficients();
    let len = state.u.len() as isize;
    let mut pairs = 0.0;
    for i in 0..len {
        let ui = state.u[i as usize];
        for (k, &ak) in a.iter().enumerate().skip(1) {
            for j in [i - k as isize, i + k as isize] {
                let w = if j < 0 || j >= len { 2.0 } else { 1.0 };
                let d = state.extended(j) - ui;
                pairs += w * ak * d * d;
            }
        }
    }
    let interaction = 0.25 * state.kappa * pairs;
    let potential = state.u.iter().map(|&u| state.nl.potential(u)).sum();
    EnergyReport { kinetic, interaction, potential, total: kinetic + interaction + potential }
}

/// Position of the 1/2-crossing closest to `near`, interpolated linearly
/// between adjacent sites. With no hint, the leftmost crossing.
pub fn measure_front(state: &LatticeState, near: Option<f64>) -> Result<f64> {
    let mut best: Option<f64> = None;
    let len = state.u.len() as isize;
    for i in 0..len - 1 {
        let (a, b) = (state.u[i as usize], state.u[i as usize + 1]);
        if a < 0.5 && b >= 0.5 {
            let x = (state.n_min + i as i64) as f64 + (0.5 - a) / (b - a);
            best = match (best, near) {
                (None, _) => Some(x),
                (Some(y), Some(h)) if (x - h).abs() < (y - h).abs() => Some(x),
                (keep, _) => keep,
            };
            if near.is_none() {
                break;
            }
        }
    }
    best.ok_or(Error::NoFront)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub front_position: f64,
    pub total_energy: f64,
}

pub fn telemetry_csv(rows: &[TelemetryRow]) -> String {
    let mut out = String::from("t,front_position,total_energy\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.t, r.front_position, r.total_energy));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record telemetry every this many steps.
    pub record_every: usize,
}

impl RunOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt, record_every: 1 }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || self.record_every == 0 {
            return Err(Error::InvalidParameter(format!("T = {}, dt = {}", self.t_end, self.dt)));
        }
        Ok((self.t_end / self.dt).round() as usize)
    }
}

/// Integrates to `t_end`, recording front position and energy. Stops with
/// `Diverged` once a site is no longer finite.
pub fn run(state: &mut LatticeState, opts: &RunOptions) -> Result<Vec<TelemetryRow>> {
    let mut rows = Vec::new();
    run_into(state, opts, &mut rows)?;
    Ok(rows)
}

/// Like [`run`], but rows recorded before a failure stay in `rows`.
pub fn run_into(state: &mut LatticeState, opts: &RunOptions, rows: &mut Vec<TelemetryRow>) -> Result<()> {
    let steps = opts.steps()?;
    rows.reserve(steps / opts.record_every + 1);
    let mut front = measure_front(state, None)?;
    rows.push(TelemetryRow { t: state.t, front_position: front, total_energy: energy(state).total });
    for s in 1..=steps {
        step(state, opts.dt);
        if s % opts.record_every == 0 || s == steps {
            if state.u.iter().chain(&state.p).any(|v| !v.is_finite()) {
                return Err(Error::Diverged { time: state.t });
            }
            front = measure_front(state, Some(front))?;
            rows.push(TelemetryRow { t: state.t, front_position: front, total_energy: energy(state).total });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedFit {
    pub speed: f64,
    pub waveform_error: f64,
    /// Relative to `|H(0)|`, or absolute when `energy_drift_absolute`.
    pub energy_drift: f64,
    pub energy_drift_absolute: bool,
    pub initial_energy: f64,
    #[serde(skip)]
    pub telemetry: Vec<TelemetryRow>,
}

/// Below this `|H(0)|` the drift is reported in absolute terms.
pub const ZERO_ENERGY: f64 = 1e-8;

/// Sites the front must keep from each end: `K_max + cT + 5`.
pub fn required_margin(kernel: &KernelSpec, c: f64, t_end: f64) -> i64 {
    kernel.k_max() as i64 + (c.abs() * t_end).ceil() as i64 + 5
}

/// Checks that a kink-initialized state has room for the front to travel
/// until `t_end`, and returns its profile.
pub fn check_margin(state: &LatticeState, t_end: f64) -> Result<Profile> {
    let profile = state
        .profile
        .clone()
        .ok_or_else(|| Error::InvalidParameter("state was not initialized from a kink".into()))?;
    let required = required_margin(&state.kernel, profile.c, t_end);
    let front = measure_front(state, None)?;
    let available = ((front - state.n_min as f64).min(state.n_max() as f64 - front)).floor() as i64;
    if available < required {
        return Err(Error::InsufficientMargin { required, available });
    }
    Ok(profile)
}

/// Runs from a kink-initialized state and fits the front speed.
pub fn run_and_fit_speed(state: &mut LatticeState, opts: &RunOptions) -> Result<SpeedFit> {
    let profile = check_margin(state, opts.t_end)?;
    let rows = run(state, opts)?;
    Ok(summarize(state, &profile, rows))
}

/// Speed, waveform error against the profile and energy drift of a
/// finished run.
pub fn summarize(state: &LatticeState, profile: &Profile, rows: Vec<TelemetryRow>) -> SpeedFit {
    let h0 = rows[0].total_energy;
    let absolute = h0.abs() < ZERO_ENERGY;
    let scale = if absolute { 1.0 } else { h0.abs() };
    let energy_drift = rows.iter().map(|r| (r.total_energy - h0).abs()).fold(0.0, f64::max) / scale;
    let waveform_error = state
        .sites()
        .zip(&state.u)
        .map(|(n, &u)| (u - profile.at(n as f64, state.t)).abs())
        .fold(0.0, f64::max);
    SpeedFit {
        speed: least_squares_slope(&rows),
        waveform_error,
        energy_drift,
        energy_drift_absolute: absolute,
        initial_energy: h0,
        telemetry: rows,
    }
}

fn least_squares_slope(rows: &[TelemetryRow]) -> f64 {
    let n = rows.len() as f64;
    let mt = rows.iter().map(|r| r.t).sum::<f64>() / n;
    let mx = rows.iter().map(|r| r.front_position).sum::<f64>() / n;
    let sxy: f64 = rows.iter().map(|r| (r.t - mt) * (r.front_position - mx)).sum();
    let sxx: f64 = rows.iter().map(|r| (r.t - mt).powi(2)).sum();
    sxy / sxx
}
