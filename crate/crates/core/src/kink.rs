//! Kinks `u'' − εΔu + f(u) = 0` as `u₀ + φ`, with `φ` the fixed point of
//! `L⁰ψ = −b(φ)u₀' + εΔφ + N(φ) + εΔu₀`, `ψ ⊥ u₀'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d2, inner_product, norm, Grid, GridFunction, NormKind};
use crate::kernel::{apply_delta, KernelSpec};
use crate::linear_ops::{assemble, FactoredOperator};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Bordered solve keeping every iterate orthogonal to `u₀'`.
    #[default]
    Projected,
    /// Plain solve on odd fluctuations; needs an odd-symmetric model.
    Symmetric,
}

impl std::str::FromStr for SolveMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projected" => Ok(Self::Projected),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once `||φ_{n+1} − φ_n||_H2` falls below this.
    pub step_tolerance: f64,
    /// `None` means `10ε + 1e-6`.
    pub ball_radius: Option<f64>,
    pub mode: SolveMode,
    /// Start from this fluctuation instead of 0 (continuation in ε).
    pub warm_start: Option<GridFunction>,
}

impl SolverOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iterations: 200,
            step_tolerance: 1e-12,
            ball_radius: None,
            mode: SolveMode::Projected,
            warm_start: None,
        }
    }

    pub fn with_mode(mut self, mode: SolveMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn radius(&self) -> f64 {
        self.ball_radius.unwrap_or(10.0 * self.epsilon + 1e-6)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.step_tolerance > 0.0) {
            return Err(Error::InvalidParameter("step_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(self.radius() > 0.0) {
            return Err(Error::InvalidParameter("ball radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KinkSolution {
    pub epsilon: f64,
    pub mode: SolveMode,
    /// `u₀ + φ`, limits 0 and 1.
    pub u: GridFunction,
    pub phi: GridFunction,
    pub b: f64,
    pub iterations: usize,
    pub step_history: Vec<f64>,
    /// `||u'' − εΔu + f(u)||_L2` with the grid stencils.
    pub equation_residual: f64,
}

/// Anti-continuum kink sampled on a grid, with its derivative and `Δu₀`.
#[derive(Debug, Clone)]
pub struct KinkBase {
    pub u0: GridFunction,
    pub du0: GridFunction,
    pub delta_u0: GridFunction,
    pub du0_norm_sq: f64,
}

impl KinkBase {
    pub fn new(nl: &NonlinearitySpec, kernel: &KernelSpec, grid: Grid) -> Result<Self> {
        nl.require_exact_kink()?;
        let u0 = GridFunction::sample(grid, |z| nl.exact_kink(z).unwrap(), 0.0, 1.0);
        let du0 = GridFunction::sample(grid, |z| nl.exact_kink_derivative(z).unwrap(), 0.0, 0.0);
        let delta_u0 = apply_delta(kernel, &u0);
        let du0_norm_sq = inner_product(&du0, &du0)?;
        Ok(Self { u0, du0, delta_u0, du0_norm_sq })
    }
}

/// `N(φ) = −f(u₀ + φ) + f(u₀) + f'(u₀)φ`, pointwise.
pub fn compute_n(nl: &NonlinearitySpec, u0: &GridFunction, phi: &GridFunction) -> Result<GridFunction> {
    if u0.grid != phi.grid {
        return Err(Error::GridMismatch("N(phi) operands".into()));
    }
    let values = u0
        .values
        .iter()
        .zip(&phi.values)
        .map(|(&w, &p)| -nl.f(w + p) + nl.f(w) + nl.f_prime(w) * p)
        .collect();
    GridFunction::fluctuation(u0.grid, values)
}

/// `εΔφ + N(φ) + εΔu₀`.
fn forcing(
    nl: &NonlinearitySpec,
    kernel: &KernelSpec,
    base: &KinkBase,
    phi: &GridFunction,
    epsilon: f64,
) -> Result<GridFunction> {
    let n = compute_n(nl, &base.u0, phi)?;
    if epsilon == 0.0 {
        return Ok(n);
    }
    let dphi = apply_delta(kernel, phi);
    Ok(&(&dphi + &base.delta_u0).scale(epsilon) + &n)
}

/// `b(φ) = (εΔφ + N(φ) + εΔu₀, u₀') / ||u₀'||²`.
pub fn compute_b(
    nl: &NonlinearitySpec,
    kernel: &KernelSpec,
    base: &KinkBase,
    phi: &GridFunction,
    epsilon: f64,
) -> Result<f64> {
    let rhs = forcing(nl, kernel, base, phi, epsilon)?;
    Ok(inner_product(&rhs, &base.du0)? / base.du0_norm_sq)
}

/// The map `T` for one `(model, kernel, grid, ε)`, with `L⁰` factored once.
pub struct FixedPointMap {
    pub nl: NonlinearitySpec,
    pub kernel: KernelSpec,
    pub base: KinkBase,
    pub epsilon: f64,
    pub mode: SolveMode,
    l0: FactoredOperator,
}

impl FixedPointMap {
    pub fn new(
        nl: &NonlinearitySpec,
        kernel: &KernelSpec,
        grid: Grid,
        epsilon: f64,
        mode: SolveMode,
    ) -> Result<Self> {
        if mode == SolveMode::Symmetric && !nl.odd_symmetric {
            return Err(Error::NotOddSymmetric(nl.name.clone()));
        }
        let base = KinkBase::new(nl, kernel, grid)?;
        let l0 = assemble(nl, &base.u0, kernel, 0.0, grid)?.factorize()?;
        Ok(Self { nl: nl.clone(), kernel: kernel.clone(), base, epsilon, mode, l0 })
    }

    pub fn grid(&self) -> Grid {
        self.base.u0.grid
    }

    pub fn b(&self, phi: &GridFunction) -> Result<f64> {
        compute_b(&self.nl, &self.kernel, &self.base, phi, self.epsilon)
    }

    /// `T(φ)`.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        let rhs = forcing(&self.nl, &self.kernel, &self.base, phi, self.epsilon)?;
        let b = inner_product(&rhs, &self.base.du0)? / self.base.du0_norm_sq;
        let rhs = rhs.axpby(1.0, &self.base.du0, -b);
        match self.mode {
            SolveMode::Projected => Ok(self.l0.bordered(&self.base.du0)?.solve(&rhs).0),
            SolveMode::Symmetric => Ok(self.l0.solve(&rhs).odd_part()),
        }
    }

    /// Iterates `T` from `start` until the H² step drops below tolerance.
    pub fn iterate(&self, start: GridFunction, opts: &SolverOptions) -> Result<KinkSolution> {
        let radius = opts.radius();
        let mut phi = start;
        let mut history = Vec::new();
        for it in 1..=opts.max_iterations {
            let next = self.apply(&phi)?;
            let step = norm(&(&next - &phi), NormKind::H2);
            history.push(step);
            let size = norm(&next, NormKind::H2);
            if !(size <= radius) {
                return Err(Error::BallEscape { iteration: it, norm: size, radius, step_history: history });
            }
            phi = next;
            if step < opts.step_tolerance {
                return self.finish(phi, it, history);
            }
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            last_step: history.last().copied().unwrap_or(f64::NAN),
            step_history: history,
        })
    }

    fn finish(&self, phi: GridFunction, iterations: usize, step_history: Vec<f64>) -> Result<KinkSolution> {
        let b = self.b(&phi)?;
        let u = &self.base.u0 + &phi;
        let equation_residual = norm(&kink_equation_residual(&self.nl, &self.kernel, &u, self.epsilon), NormKind::L2);
        Ok(KinkSolution {
            epsilon: self.epsilon,
            mode: self.mode,
            u,
            phi,
            b,
            iterations,
            step_history,
            equation_residual,
        })
    }
}

/// `u'' − εΔu + f(u)` with the central second difference.
pub fn kink_equation_residual(
    nl: &NonlinearitySpec,
    kernel: &KernelSpec,
    u: &GridFunction,
    epsilon: f64,
) -> GridFunction {
    let mut r = d2(u);
    let du = apply_delta(kernel, u);
    for ((ri, &ui), di) in r.values.iter_mut().zip(&u.values).zip(&du.values) {
        *ri += nl.f(ui) - epsilon * di;
    }
    r
}

pub fn solve_kink(
    nl: &NonlinearitySpec,
    kernel: &KernelSpec,
    grid: Grid,
    opts: &SolverOptions,
) -> Result<KinkSolution> {
    opts.validate()?;
    let map = FixedPointMap::new(nl, kernel, grid, opts.epsilon, opts.mode)?;
    let start = match &opts.warm_start {
        Some(w) if w.grid != grid => return Err(Error::GridMismatch("warm start".into())),
        Some(w) => w.clone(),
        None => GridFunction::zeros(grid),
    };
    map.iterate(start, opts)
}
