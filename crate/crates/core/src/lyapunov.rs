//! Corrector `u₁`, residual `G(ε)`, the near-zero eigenpair of `−L^ε`, and
//! the scalar bifurcation function `B(a, ε)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{d1, d2, inner_product, norm, Grid, GridFunction, NormKind};
use crate::kernel::{apply_delta, KernelSpec};
use crate::kink::{compute_n, kink_equation_residual, KinkBase};
use crate::linear_ops::{assemble, solve_orthogonal, FactoredOperator, LinearizedOperator};
use crate::nonlinearity::NonlinearitySpec;

/// `u₁` with `L⁰u₁ = Δu₀`, `u₁ ⊥ u₀'`, plus what is needed to build
/// `u_ap = u₀ + εu₁`.
#[derive(Debug, Clone)]
pub struct CorrectorData {
    pub nl: NonlinearitySpec,
    pub kernel: KernelSpec,
    pub base: KinkBase,
    pub u1: GridFunction,
    /// Multiplier of the bordered solve; zero when `(Δu₀, u₀') = 0`.
    pub multiplier: f64,
}

pub fn solve_u1(nl: &NonlinearitySpec, kernel: &KernelSpec, grid: Grid) -> Result<CorrectorData> {
    let base = KinkBase::new(nl, kernel, grid)?;
    let l0 = assemble(nl, &base.u0, kernel, 0.0, grid)?;
    let (u1, multiplier) = solve_orthogonal(&l0, &base.delta_u0, &base.du0)?;
    Ok(CorrectorData { nl: nl.clone(), kernel: kernel.clone(), base, u1, multiplier })
}

impl CorrectorData {
    pub fn grid(&self) -> Grid {
        self.base.u0.grid
    }

    pub fn u_ap(&self, epsilon: f64) -> GridFunction {
        self.base.u0.axpby(1.0, &self.u1, epsilon)
    }

    /// `u₁'' + f'(u₀)u₁ − Δu₀` with the grid stencils.
    pub fn corrector_residual(&self) -> GridFunction {
        let mut r = d2(&self.u1);
        for (i, ri) in r.values.iter_mut().enumerate() {
            *ri += self.nl.f_prime(self.base.u0.values[i]) * self.u1.values[i] - self.base.delta_u0.values[i];
        }
        r
    }
}

/// `G(ε) = ε²Δu₁ + N(εu₁)`.
pub fn compute_g(data: &CorrectorData, epsilon: f64) -> GridFunction {
    let eu1 = data.u1.scale(epsilon);
    let n = compute_n(&data.nl, &data.base.u0, &eu1).expect("same grid");
    apply_delta(&data.kernel, &data.u1).axpby(epsilon * epsilon, &n, 1.0)
}

/// `G(ε)` again, from the residual of `u_ap` on the grid:
/// `−R(u_ap) + R(u₀) + ε·(u₁'' + f'(u₀)u₁ − Δu₀)` with `R(u) = u'' − εΔu + f(u)`.
/// The last two terms vanish in the continuum.
pub fn compute_g_from_residual(data: &CorrectorData, epsilon: f64) -> GridFunction {
    let r_ap = kink_equation_residual(&data.nl, &data.kernel, &data.u_ap(epsilon), epsilon);
    let r0 = kink_equation_residual(&data.nl, &data.kernel, &data.base.u0, 0.0);
    r0.axpby(1.0, &r_ap, -1.0).axpby(1.0, &data.corrector_residual(), epsilon)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    /// `||φ₁||_H2 = 1`, `(φ₁, u₀') > 0`.
    #[serde(skip)]
    pub phi1: GridFunction,
    pub iterations: usize,
    /// `||(−L^ε)φ₁ − λ₁φ₁||_L2`
    pub residual: f64,
    /// Shift used when `−L^ε` itself was numerically singular.
    pub shift: f64,
}

const MAX_EIGEN_ITERATIONS: usize = 500;

/// `−L^ε` at `u_ap(ε)` and its factorization, shifted by `σ` if needed.
pub struct ReducedOperator {
    pub epsilon: f64,
    pub op: LinearizedOperator,
    pub factored: FactoredOperator,
    pub shift: f64,
}

impl ReducedOperator {
    pub fn new(data: &CorrectorData, epsilon: f64) -> Result<Self> {
        let op = assemble(&data.nl, &data.u_ap(epsilon), &data.kernel, epsilon, data.grid())?;
        match op.factorize() {
            Ok(factored) => Ok(Self { epsilon, op, factored, shift: 0.0 }),
            Err(Error::SolveFailure { .. }) => {
                let h2 = data.grid().spacing().powi(2);
                let mut shifted = op.clone();
                for i in 0..shifted.matrix.n() {
                    shifted.matrix.add(i, i, -h2);
                }
                let factored = shifted.factorize()?;
                Ok(Self { epsilon, op, factored, shift: -h2 })
            }
            Err(e) => Err(e),
        }
    }

    /// `(−L^ε)φ`
    pub fn apply_negated(&self, phi: &GridFunction) -> GridFunction {
        self.op.apply(phi).scale(-1.0)
    }

    /// `x ↦ (−L^ε − σ)^{-1} x`
    fn inverse(&self, x: &GridFunction) -> GridFunction {
        self.factored.solve(x).scale(-1.0)
    }
}

fn rayleigh(op: &ReducedOperator, x: &GridFunction) -> f64 {
    inner_product(&op.apply_negated(x), x).unwrap() / inner_product(x, x).unwrap()
}

/// Inverse iteration for the eigenvalue of `−L^ε` closest to 0.
pub fn principal_eigenpair(data: &CorrectorData, epsilon: f64) -> Result<(EigenPair, ReducedOperator)> {
    let op = ReducedOperator::new(data, epsilon)?;
    let du0 = &data.base.du0;
    let mut x = du0.scale(1.0 / norm(du0, NormKind::H2));
    x.zero_boundary();
    let mut history = Vec::new();
    for it in 1..=MAX_EIGEN_ITERATIONS {
        let mut next = op.inverse(&x);
        next = next.scale(1.0 / norm(&next, NormKind::H2));
        if inner_product(&next, du0)? < 0.0 {
            next = next.scale(-1.0);
        }
        let step = norm(&(&next - &x), NormKind::L2);
        history.push(step);
        x = next;
        if step < 1e-13 {
            let lambda1 = rayleigh(&op, &x);
            let residual = norm(&op.apply_negated(&x).axpby(1.0, &x, -lambda1), NormKind::L2);
            let shift = op.shift;
            return Ok((EigenPair { lambda1, phi1: x, iterations: it, residual, shift }, op));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_EIGEN_ITERATIONS,
        last_step: history.last().copied().unwrap_or(f64::NAN),
        step_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    /// Rayleigh quotient of the deflated iterate; an upper bound for `λ₂`.
    pub lambda2: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Second eigenvalue of `−L^ε` by inverse iteration deflated against `φ₁`.
pub fn spectral_gap(data: &CorrectorData, op: &ReducedOperator, pair: &EigenPair) -> GapEstimate {
    let phi1 = &pair.phi1;
    let p1 = inner_product(phi1, phi1).unwrap();
    let deflate = |x: &GridFunction| x.axpby(1.0, phi1, -inner_product(x, phi1).unwrap() / p1);
    let grid = data.grid();
    let mut x = GridFunction::sample(grid, |z| (1.0 + z) * (-z * z / 8.0).exp(), 0.0, 0.0);
    x.values.iter_mut().zip(d1(&data.base.du0).values).for_each(|(a, b)| *a += b);
    x.zero_boundary();
    x = deflate(&x);
    let mut lambda = rayleigh(op, &x);
    for it in 1..=MAX_EIGEN_ITERATIONS {
        let y = deflate(&op.inverse(&x));
        x = y.scale(1.0 / norm(&y, NormKind::L2));
        let next = rayleigh(op, &x);
        let change = (next - lambda).abs();
        lambda = next;
        if change <= 1e-10 * lambda.abs().max(1.0) {
            return GapEstimate { lambda2: lambda, iterations: it, converged: true };
        }
    }
    GapEstimate { lambda2: lambda, iterations: MAX_EIGEN_ITERATIONS, converged: false }
}

/// `(û₀', f''(u₀)u₁û₀' − Δû₀') / ||û₀'||²`, the limit of `−λ₁(ε)/ε`.
pub fn verify_d_zero(data: &CorrectorData) -> f64 {
    let du0 = &data.base.du0;
    let delta = apply_delta(&data.kernel, du0);
    let integrand = GridFunction::fluctuation(
        data.grid(),
        (0..du0.len())
            .map(|i| {
                data.nl.f_double_prime(data.base.u0.values[i]) * data.u1.values[i] * du0.values[i]
                    - delta.values[i]
            })
            .collect(),
    )
    .unwrap();
    inner_product(du0, &integrand).unwrap() / data.base.du0_norm_sq
}

/// `Pψ = (ψ, φ₁)φ₁ / ||φ₁||²`.
pub fn project(phi1: &GridFunction, psi: &GridFunction) -> GridFunction {
    phi1.scale(inner_product(psi, phi1).unwrap() / inner_product(phi1, phi1).unwrap())
}

/// `N_ap(w) = −f(u_ap + w) + f(u_ap) + f'(u_ap)w`.
pub fn n_ap(data: &CorrectorData, epsilon: f64, w: &GridFunction) -> GridFunction {
    compute_n(&data.nl, &data.u_ap(epsilon), w).expect("same grid")
}

/// Everything `B(·, ε)` needs at one `ε`.
pub struct LsPoint {
    pub epsilon: f64,
    pub pair: EigenPair,
    pub op: ReducedOperator,
    pub g: GridFunction,
}

impl LsPoint {
    pub fn new(data: &CorrectorData, epsilon: f64) -> Result<Self> {
        let (pair, op) = principal_eigenpair(data, epsilon)?;
        Ok(Self { epsilon, pair, op, g: compute_g(data, epsilon) })
    }
}

#[derive(Debug, Clone)]
pub struct VStar {
    pub v: GridFunction,
    pub iterations: usize,
    pub step_history: Vec<f64>,
}

const VSTAR_TOLERANCE: f64 = 1e-12;
const VSTAR_MAX_ITERATIONS: usize = 200;

/// Picard iteration for `L^ε v = (I − P){N_ap(aφ₁ + v) + G(ε)}`, `v ⊥ φ₁`.
pub fn solve_vstar(data: &CorrectorData, point: &LsPoint, a: f64) -> Result<VStar> {
    let phi1 = &point.pair.phi1;
    let unshifted;
    let factored = if point.op.shift == 0.0 {
        &point.op.factored
    } else {
        unshifted = point.op.op.factorize()?;
        &unshifted
    };
    let solver = factored.bordered(phi1)?;
    let a_phi1 = phi1.scale(a);
    let mut v = GridFunction::zeros(data.grid());
    let mut history = Vec::new();
    for it in 1..=VSTAR_MAX_ITERATIONS {
        let rhs = &n_ap(data, point.epsilon, &(&a_phi1 + &v)) + &point.g;
        let rhs = &rhs - &project(phi1, &rhs);
        let (next, _) = solver.solve(&rhs);
        let step = norm(&(&next - &v), NormKind::H2);
        history.push(step);
        v = next;
        if !step.is_finite() {
            break;
        }
        if step < VSTAR_TOLERANCE {
            return Ok(VStar { v, iterations: it, step_history: history });
        }
    }
    Err(Error::NoConvergence {
        iterations: history.len(),
        last_step: history.last().copied().unwrap_or(f64::NAN),
        step_history: history,
    })
}

/// `B(a, ε) = −aλ₁||φ₁||² − (N_ap(aφ₁ + v*) + G, φ₁)`.
pub fn eval_b(data: &CorrectorData, point: &LsPoint, a: f64, vstar: &GridFunction) -> f64 {
    let phi1 = &point.pair.phi1;
    let w = phi1.axpby(a, vstar, 1.0);
    let forcing = &n_ap(data, point.epsilon, &w) + &point.g;
    -a * point.pair.lambda1 * inner_product(phi1, phi1).unwrap() - inner_product(&forcing, phi1).unwrap()
}

/// Coordinate of a solved kink along `φ₁`: the `a` with
/// `a = (φ* − εu₁ − v*(a, ε), φ₁) / ||φ₁||²`, found by substitution.
pub fn reduced_coordinate(data: &CorrectorData, point: &LsPoint, kink_phi: &GridFunction) -> Result<(f64, VStar)> {
    let phi1 = &point.pair.phi1;
    let p2 = inner_product(phi1, phi1)?;
    let rest = kink_phi.axpby(1.0, &data.u1, -point.epsilon);
    let mut a = inner_product(&rest, phi1)? / p2;
    let mut vstar = solve_vstar(data, point, a)?;
    for _ in 0..50 {
        let next = inner_product(&(&rest - &vstar.v), phi1)? / p2;
        let done = (next - a).abs() <= 1e-15 * (1.0 + a.abs());
        a = next;
        vstar = solve_vstar(data, point, a)?;
        if done {
            break;
        }
    }
    Ok((a, vstar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_exponential, kernel_nearest_neighbor};
    use crate::kink::{solve_kink, FixedPointMap, SolveMode, SolverOptions};
    use crate::nonlinearity::{asymmetric_well, builtin_phi4, builtin_sine_gordon};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(20.0, 100).unwrap()
    }

    fn phi4() -> CorrectorData {
        solve_u1(&builtin_phi4(), &kernel_nearest_neighbor(), grid()).unwrap()
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn corrector_is_orthogonal_and_odd() {
        for data in [phi4(), solve_u1(&builtin_sine_gordon(), &kernel_exponential(0.5, 10, 1.0).unwrap(), grid()).unwrap()] {
            let c = inner_product(&data.u1, &data.base.du0).unwrap();
            assert!(c.abs() < 1e-12 * norm(&data.u1, NormKind::L2));
            let g = data.grid();
            let odd = (0..g.len()).map(|i| (data.u1.values[i] + data.u1.values[g.mirror(i)]).abs()).fold(0.0, f64::max);
            assert!(odd <= 1e-8, "{odd}");
            let r = data.corrector_residual();
            let interior = r.values[1..r.len() - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(interior < 1e-9, "{interior}");
        }
    }

    #[test]
    fn first_picard_iterate_is_eps_u1() {
        let data = phi4();
        let eps = 0.01;
        let map = FixedPointMap::new(&data.nl, &data.kernel, grid(), eps, SolveMode::Projected).unwrap();
        let t0 = map.apply(&GridFunction::zeros(grid())).unwrap().scale(1.0 / eps);
        assert!(norm(&(&t0 - &data.u1), NormKind::H2) < 1e-3);
    }

    #[test]
    fn g_vanishes_without_coupling() {
        assert_eq!(compute_g(&phi4(), 0.0).max_abs(), 0.0);
    }

    #[test]
    fn g_formulas_agree() {
        let data = phi4();
        for eps in [0.025, 0.05, 0.1, 0.2] {
            let a = compute_g(&data, eps);
            let b = compute_g_from_residual(&data, eps);
            // the residual form cancels O(1) second differences
            let scale = norm(&d2(&data.u_ap(eps)), NormKind::L2);
            let diff = norm(&(&a - &b), NormKind::L2);
            assert!(diff / scale < 1e-10, "eps={eps}: {diff}");
            assert!(diff / norm(&a, NormKind::L2) < 1e-6, "eps={eps}: {diff}");
        }
    }

    #[test]
    fn g_is_quadratic() {
        let data = phi4();
        let eps = [0.025, 0.05, 0.1, 0.2];
        let gs: Vec<f64> = eps.iter().map(|&e| norm(&compute_g(&data, e), NormKind::L2)).collect();
        let s = slope(&eps, &gs);
        assert!((s - 2.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn zero_coupling_eigenpair_is_the_translation_mode() {
        let mut misalign = Vec::new();
        let mut lambdas = Vec::new();
        for m in [250, 500, 1000] {
            let data = solve_u1(&builtin_phi4(), &kernel_nearest_neighbor(), Grid::new(20.0, m).unwrap()).unwrap();
            let (pair, _) = principal_eigenpair(&data, 0.0).unwrap();
            let unit = data.base.du0.scale(1.0 / norm(&data.base.du0, NormKind::H2));
            assert!((norm(&pair.phi1, NormKind::H2) - 1.0).abs() < 1e-12);
            assert!(pair.residual < 1e-9, "{}", pair.residual);
            misalign.push(norm(&(&pair.phi1 - &unit), NormKind::H2));
            lambdas.push(pair.lambda1.abs());
        }
        assert!(misalign[2] < 1e-6, "{misalign:?}");
        for w in misalign.windows(2).chain(lambdas.windows(2)) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.5, "{misalign:?} {lambdas:?}");
        }
    }

    #[test]
    fn eigenvalue_is_quadratic_in_coupling() {
        let data = phi4();
        let floor = principal_eigenpair(&data, 0.0).unwrap().0.lambda1;
        let eps = [0.05, 0.1, 0.2, 0.4];
        let mut lam = Vec::new();
        let mut dev = Vec::new();
        let unit = data.base.du0.scale(1.0 / norm(&data.base.du0, NormKind::H2));
        for &e in &eps {
            let (pair, _) = principal_eigenpair(&data, e).unwrap();
            assert!(pair.residual < 1e-9);
            lam.push((pair.lambda1 - floor).abs());
            dev.push(norm(&(&pair.phi1 - &unit), NormKind::H2));
        }
        assert!((slope(&eps, &lam) - 2.0).abs() < 0.3, "{lam:?}");
        assert!((slope(&eps, &dev) - 1.0).abs() < 0.3, "{dev:?}");
    }

    #[test]
    fn appendix_integral_vanishes_under_refinement() {
        let d: Vec<f64> = [25, 50, 100]
            .iter()
            .map(|&m| verify_d_zero(&solve_u1(&builtin_phi4(), &kernel_nearest_neighbor(), Grid::new(20.0, m).unwrap()).unwrap()))
            .collect();
        for w in d.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.1, "{d:?}");
        }
        let sg = solve_u1(&builtin_sine_gordon(), &kernel_exponential(0.5, 10, 1.0).unwrap(), Grid::new(20.0, 50).unwrap())
            .unwrap();
        let fine = solve_u1(&builtin_sine_gordon(), &kernel_exponential(0.5, 10, 1.0).unwrap(), grid()).unwrap();
        assert!(verify_d_zero(&fine).abs() < verify_d_zero(&sg).abs() / 3.9);
    }

    #[test]
    fn gap_stays_open() {
        let data = phi4();
        for eps in [0.0, 0.1] {
            let (pair, op) = principal_eigenpair(&data, eps).unwrap();
            let gap = spectral_gap(&data, &op, &pair);
            assert!(gap.lambda2 > 2.0, "{gap:?}");
        }
    }

    #[test]
    fn projection_is_idempotent_and_symmetric() {
        let data = phi4();
        let point = LsPoint::new(&data, 0.05).unwrap();
        let phi1 = &point.pair.phi1;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rand_fn = || {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
            GridFunction::sample(grid(), move |z| a * (-(z - b).powi(2)).exp(), 0.0, 0.0)
        };
        let (x, y) = (rand_fn(), rand_fn());
        let px = project(phi1, &x);
        assert!(norm(&(&project(phi1, &px) - &px), NormKind::L2) <= 1e-12);
        let lhs = inner_product(&px, &y).unwrap();
        let rhs = inner_product(&x, &project(phi1, &y)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn b_vanishes_at_the_origin() {
        let data = phi4();
        let point = LsPoint::new(&data, 0.0).unwrap();
        let v = solve_vstar(&data, &point, 0.0).unwrap();
        assert_eq!(v.v.max_abs(), 0.0);
        assert_eq!(eval_b(&data, &point, 0.0, &v.v), 0.0);
    }

    #[test]
    fn vstar_is_quadratic_and_fast() {
        let data = phi4();
        let eps = [0.025, 0.05, 0.1, 0.2];
        let mut sizes = Vec::new();
        for &e in &eps {
            let point = LsPoint::new(&data, e).unwrap();
            let v = solve_vstar(&data, &point, 0.0).unwrap();
            if e == 0.05 {
                assert!(v.iterations <= 30, "{}", v.iterations);
            }
            sizes.push(norm(&v.v, NormKind::H2));
        }
        assert!((slope(&eps, &sizes) - 2.0).abs() < 0.3, "{sizes:?}");
    }

    #[test]
    fn bifurcation_function_vanishes_along_the_kink() {
        let mut at_kink = Vec::new();
        let mut slopes = Vec::new();
        for m in [50, 100] {
            let g = Grid::new(20.0, m).unwrap();
            let data = solve_u1(&asymmetric_well(), &kernel_nearest_neighbor(), g).unwrap();
            let eps = 0.05;
            let point = LsPoint::new(&data, eps).unwrap();
            let kink = solve_kink(&data.nl, &data.kernel, g, &SolverOptions::new(eps)).unwrap();
            let (a, v) = reduced_coordinate(&data, &point, &kink.phi).unwrap();
            assert!(a.abs() < eps * eps);
            at_kink.push(eval_b(&data, &point, a, &v.v).abs());
            let b = |a: f64| eval_b(&data, &point, a, &solve_vstar(&data, &point, a).unwrap().v);
            slopes.push((b(0.01) - b(-0.01)) / 0.02);
        }
        // B is flat in a up to grid effects: translates of the kink are all solutions
        for v in [&at_kink, &slopes] {
            assert!((v[0] / v[1] - 4.0).abs() < 0.3, "{v:?}");
        }
    }
}
