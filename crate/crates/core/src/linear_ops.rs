//! Linearized operators `φ ↦ φ'' + f'(w)φ − εΔφ` on the grid and the
//! bordered solve of `Aφ = g` subject to `(φ, w_perp) = 0`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernel::{delta_matrix, KernelSpec};
use crate::linalg::{BandMatrix, Factorization};
use crate::nonlinearity::NonlinearitySpec;

/// Symmetric matrix of `φ'' + f'(w)φ − εΔφ` acting on fluctuations that
/// vanish at `±L`. The two boundary rows are decoupled diagonal rows, which
/// pins `φ(±L) = 0` whenever the right-hand side vanishes there.
///
/// `matrix` is stored in the node order `ordering`, not in grid order: the
/// kernel couples nodes `k·m` apart, so grid order has bandwidth `K_max·m`,
/// while grouping nodes by residue mod `m` keeps it near `2n/m`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub matrix: BandMatrix,
    pub ordering: Ordering,
    pub base_state: GridFunction,
    pub epsilon: f64,
    pub grid: Grid,
    pub kernel: KernelSpec,
}

pub fn assemble(
    nl: &NonlinearitySpec,
    w: &GridFunction,
    kernel: &KernelSpec,
    epsilon: f64,
    grid: Grid,
) -> Result<LinearizedOperator> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if w.grid != grid {
        return Err(Error::GridMismatch("base state on a different grid".into()));
    }
    let n = grid.len();
    let m = grid.subdivisions();
    let inv_h2 = (m * m) as f64;

    // interior couplings by offset; offsets 1 and m coincide when m = 1
    let mut offsets: BTreeMap<usize, f64> = BTreeMap::new();
    *offsets.entry(1).or_default() += inv_h2;
    if epsilon > 0.0 {
        for (s, coef) in delta_matrix(kernel, grid).diagonals() {
            if s > 0 {
                *offsets.entry(s as usize).or_default() -= epsilon * coef;
            }
        }
    }
    let pairs = || {
        offsets.iter().flat_map(move |(&s, &v)| {
            (1..n.saturating_sub(1)).filter(move |i| i + s < n - 1).map(move |i| (i, i + s, v))
        })
    };

    let natural = Ordering::natural(n);
    let folded = Ordering::folded(n, m);
    let bw_natural = natural.bandwidth(pairs());
    let bw_folded = folded.bandwidth(pairs());
    let (ordering, bw) =
        if bw_folded < bw_natural { (folded, bw_folded) } else { (natural, bw_natural) };

    let mut a = BandMatrix::zeros(n, bw, bw);
    let a0 = kernel.coefficient(0);
    for i in 0..n {
        let p = ordering.position[i];
        a.add(p, p, -2.0 * inv_h2 + nl.f_prime(w.values[i]) - epsilon * a0);
    }
    for (i, j, v) in pairs() {
        let (p, q) = (ordering.position[i], ordering.position[j]);
        a.add(p, q, v);
        a.add(q, p, v);
    }
    Ok(LinearizedOperator { matrix: a, ordering, base_state: w.clone(), epsilon, grid, kernel: kernel.clone() })
}

/// Node permutation: `nodes[p]` is the grid index stored at position `p`,
/// `position` its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub nodes: Vec<usize>,
    pub position: Vec<usize>,
}

impl Ordering {
    fn from_nodes(nodes: Vec<usize>) -> Self {
        let mut position = vec![0; nodes.len()];
        for (p, &i) in nodes.iter().enumerate() {
            position[i] = p;
        }
        Self { nodes, position }
    }

    pub fn natural(n: usize) -> Self {
        Self::from_nodes((0..n).collect())
    }

    /// Residue classes mod `m` taken in the order 0, m−1, 1, m−2, …, so that
    /// neighbouring classes (including the wrap from m−1 to 0) sit at most
    /// two classes apart.
    pub fn folded(n: usize, m: usize) -> Self {
        let m = m.max(1);
        let mut nodes = Vec::with_capacity(n);
        let (mut lo, mut hi) = (0, m);
        while lo < hi {
            nodes.extend((lo..n).step_by(m));
            lo += 1;
            if lo < hi {
                hi -= 1;
                nodes.extend((hi..n).step_by(m));
            }
        }
        Self::from_nodes(nodes)
    }

    pub fn is_natural(&self) -> bool {
        self.nodes.iter().enumerate().all(|(p, &i)| p == i)
    }

    fn bandwidth(&self, pairs: impl Iterator<Item = (usize, usize, f64)>) -> usize {
        pairs.map(|(i, j, _)| self.position[i].abs_diff(self.position[j])).max().unwrap_or(0)
    }

    fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| x[i]).collect()
    }

    fn scatter(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; y.len()];
        for (p, &i) in self.nodes.iter().enumerate() {
            x[i] = y[p];
        }
        x
    }
}

impl LinearizedOperator {
    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.ordering.scatter(&self.matrix.matvec(&self.ordering.gather(x)))
    }

    pub fn apply(&self, phi: &GridFunction) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.matvec(&phi.values),
            left_limit: 0.0,
            right_limit: 0.0,
        }
    }

    /// Matrix entry in grid order.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(self.ordering.position[i], self.ordering.position[j])
    }

    pub fn factorize(&self) -> Result<FactoredOperator> {
        Ok(FactoredOperator { op: self.clone(), factors: self.matrix.factor()? })
    }
}

#[derive(Debug, Clone)]
pub struct FactoredOperator {
    pub op: LinearizedOperator,
    factors: Factorization,
}

impl FactoredOperator {
    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let o = &self.op.ordering;
        o.scatter(&self.factors.solve(&o.gather(b)))
    }

    /// Plain solve `Aφ = g` with `φ(±L) = 0`.
    pub fn solve(&self, g: &GridFunction) -> GridFunction {
        let mut rhs = g.values.clone();
        let n = rhs.len();
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        GridFunction {
            grid: self.op.grid,
            values: self.solve_raw(&rhs),
            left_limit: 0.0,
            right_limit: 0.0,
        }
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.factors.pivot_ratio()
    }

    /// Prepares repeated bordered solves against a fixed `w_perp`.
    pub fn bordered(&self, w_perp: &GridFunction) -> Result<BorderedSolver<'_>> {
        let mut border = w_perp.values.clone();
        let n = border.len();
        border[0] = 0.0;
        border[n - 1] = 0.0;
        let solved_border = self.solve_raw(&border);
        let schur = dot(&border, &solved_border);
        if !(schur.abs() > 0.0) || !schur.is_finite() {
            return Err(Error::SolveFailure { row: n, pivot_ratio: self.pivot_ratio() });
        }
        Ok(BorderedSolver { factored: self, border, solved_border, schur })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `[A ŵ; ŵᵀ 0](φ, μ) = (g, 0)` where `ŵ` is `w_perp` restricted to
/// interior nodes. Since `φ(±L) = 0` the constraint row is exactly the
/// trapezoid inner product `(φ, w_perp) = 0`. Block elimination, then
/// iterative refinement on the full bordered residual.
pub struct BorderedSolver<'a> {
    factored: &'a FactoredOperator,
    border: Vec<f64>,
    solved_border: Vec<f64>,
    schur: f64,
}

const REFINEMENT_STEPS: usize = 3;

impl BorderedSolver<'_> {
    fn eliminate(&self, r1: &[f64], r2: f64) -> (Vec<f64>, f64) {
        let x = self.factored.solve_raw(r1);
        let mu = (dot(&self.border, &x) - r2) / self.schur;
        let phi = x.iter().zip(&self.solved_border).map(|(a, b)| a - mu * b).collect();
        (phi, mu)
    }

    /// Returns `(φ, μ)` with `Aφ + μŵ = g` and `(φ, w_perp) = 0`.
    pub fn solve(&self, g: &GridFunction) -> (GridFunction, f64) {
        let a = &self.factored.op;
        let n = g.values.len();
        let mut rhs = g.values.clone();
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        let (mut phi, mut mu) = self.eliminate(&rhs, 0.0);
        for _ in 0..REFINEMENT_STEPS {
            let ap = a.matvec(&phi);
            let r1: Vec<f64> = (0..n).map(|i| rhs[i] - ap[i] - mu * self.border[i]).collect();
            let r2 = -dot(&self.border, &phi);
            let (dphi, dmu) = self.eliminate(&r1, r2);
            for (p, d) in phi.iter_mut().zip(&dphi) {
                *p += d;
            }
            mu += dmu;
        }
        (
            GridFunction { grid: g.grid, values: phi, left_limit: 0.0, right_limit: 0.0 },
            mu,
        )
    }

    /// `max |Aφ + μŵ − g|` over all rows.
    pub fn residual(&self, phi: &GridFunction, mu: f64, g: &GridFunction) -> f64 {
        let ap = self.factored.op.matvec(&phi.values);
        let n = ap.len();
        (0..n)
            .map(|i| {
                let gi = if i == 0 || i == n - 1 { 0.0 } else { g.values[i] };
                (ap[i] + mu * self.border[i] - gi).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// One-shot bordered solve: factors `op`, then solves
/// `Aφ + μ w_perp = g`, `(φ, w_perp) = 0`.
pub fn solve_orthogonal(
    op: &LinearizedOperator,
    g: &GridFunction,
    w_perp: &GridFunction,
) -> Result<(GridFunction, f64)> {
    if g.grid != op.grid || w_perp.grid != op.grid {
        return Err(Error::GridMismatch("bordered solve operands".into()));
    }
    let factored = op.factorize()?;
    let solver = factored.bordered(w_perp)?;
    Ok(solver.solve(g))
}
