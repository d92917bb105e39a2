//! Coupling coefficients `a_k` and the nonlocal operator
//! `Δu(z) = Σ_k a_k u(z − k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d1, inner_product, norm, Grid, GridFunction, NormKind};
use crate::nonlinearity::ValidationReport;

/// Symmetric zero-sum kernel, stored for `0 ≤ k ≤ K_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub name: String,
    coefficients: Vec<f64>,
    /// `Σ_k |a_k|` over both signs of k.
    pub abs_sum: f64,
    /// `Σ_k |a_k| k²` over both signs of k.
    pub second_moment: f64,
}

/// Config form of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    NearestNeighbor,
    Exponential { decay: f64, k_max: usize, tail_tol: f64 },
    Custom { coefficients: Vec<f64> },
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec> {
        match self {
            KernelConfig::NearestNeighbor => Ok(kernel_nearest_neighbor()),
            KernelConfig::Exponential { decay, k_max, tail_tol } => {
                kernel_exponential(*decay, *k_max, *tail_tol)
            }
            KernelConfig::Custom { coefficients } => KernelSpec::custom(coefficients.clone()),
        }
    }
}

impl KernelSpec {
    /// Kernel from `[a_0, a_1, …, a_K]`. `a_0` is kept as given; (H2) is
    /// checked and violations are errors.
    pub fn custom(coefficients: Vec<f64>) -> Result<Self> {
        let kernel = Self::from_parts("custom", coefficients)?;
        let report = validate_h2(&kernel);
        if !report.passed() {
            let failed: Vec<_> = report
                .clauses
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} (measured {:e})", c.name, c.measured))
                .collect();
            return Err(Error::KernelHypothesis(failed.join(", ")));
        }
        Ok(kernel)
    }

    fn from_parts(name: &str, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter("kernel needs a_0 and at least a_1".into()));
        }
        let abs_sum = coefficients[0].abs() + 2.0 * coefficients[1..].iter().map(|a| a.abs()).sum::<f64>();
        let second_moment = 2.0
            * coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, a)| a.abs() * (k * k) as f64)
                .sum::<f64>();
        Ok(Self { name: name.to_string(), coefficients, abs_sum, second_moment })
    }

    /// `a_k` for any integer k (zero beyond `K_max`).
    pub fn coefficient(&self, k: i64) -> f64 {
        self.coefficients.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn k_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `Σ_{k=-K}^{K} a_k`.
    pub fn total(&self) -> f64 {
        self.coefficients[0] + 2.0 * self.coefficients[1..].iter().sum::<f64>()
    }

    /// `sqrt(Σ|a_k| · Σ|a_k| k²)`, the constant in `||Δu|| ≤ C ||u'||`.
    pub fn lemma_constant(&self) -> f64 {
        (self.abs_sum * self.second_moment).sqrt()
    }
}

/// `a_0 = −2`, `a_{±1} = 1`: `Δu(z) = u(z+1) − 2u(z) + u(z−1)`.
pub fn kernel_nearest_neighbor() -> KernelSpec {
    KernelSpec::from_parts("nearest_neighbor", vec![-2.0, 1.0]).unwrap()
}

/// `a_k = decay^{|k|}` for `1 ≤ |k| ≤ K_max`, with `a_0` recomputed so the
/// truncated kernel sums to zero.
pub fn kernel_exponential(decay: f64, k_max: usize, tail_tol: f64) -> Result<KernelSpec> {
    if !(decay > 0.0 && decay < 1.0) || k_max == 0 || !(tail_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponential kernel needs 0 < decay < 1, K_max >= 1, tail_tol > 0 (got {decay}, {k_max}, {tail_tol})"
        )));
    }
    let tail = exponential_tail(decay, k_max);
    if tail >= tail_tol {
        return Err(Error::InvalidParameter(format!(
            "dropped tail Σ_(k>{k_max}) decay^k k² = {tail:e} is not below tail_tol = {tail_tol:e}"
        )));
    }
    let mut coefficients = vec![0.0; k_max + 1];
    let mut power = 1.0;
    for a in coefficients.iter_mut().skip(1) {
        power *= decay;
        *a = power;
    }
    coefficients[0] = -2.0 * coefficients[1..].iter().sum::<f64>();
    KernelSpec::from_parts("exponential", coefficients)
}

/// `Σ_{k > K} r^k k²`, summed until the terms stop contributing.
fn exponential_tail(decay: f64, k_max: usize) -> f64 {
    let mut sum = 0.0;
    let mut k = k_max + 1;
    let mut power = decay.powi(k as i32);
    loop {
        let term = power * (k * k) as f64;
        sum += term;
        if term <= 1e-17 * sum || term == 0.0 {
            break;
        }
        k += 1;
        power *= decay;
    }
    sum
}

/// Checks (H2) on the stored coefficients.
pub fn validate_h2(kernel: &KernelSpec) -> ValidationReport {
    let mut report = ValidationReport::new(format!("H2[{}]", kernel.name));
    let total = kernel.total();
    report.push("sum a_k = 0", total.abs() <= 1e-12 * kernel.abs_sum, total, "");
    let a0 = kernel.coefficient(0);
    report.push("a_0 < 0", a0 < 0.0, a0, "");
    report.push("a_k = a_-k", true, 0.0, "symmetric storage");
    report.push(
        "sum |a_k| k^2 finite",
        kernel.second_moment.is_finite(),
        kernel.second_moment,
        format!("K_max = {}", kernel.k_max()),
    );
    report
}

/// `(Δu)(z_i) = Σ_k a_k u(z_i − k)`, with `u` extended by its limits.
pub fn apply_delta(kernel: &KernelSpec, u: &GridFunction) -> GridFunction {
    let m = u.grid.subdivisions() as isize;
    let a0 = kernel.coefficient(0);
    let values = (0..u.len() as isize)
        .map(|i| {
            let mut acc = a0 * u.extended(i);
            for (k, &a) in kernel.coefficients().iter().enumerate().skip(1) {
                let s = k as isize * m;
                acc += a * (u.extended(i - s) + u.extended(i + s));
            }
            acc
        })
        .collect();
    GridFunction { grid: u.grid, values, left_limit: 0.0, right_limit: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub delta_l2: f64,
    /// `(Δu, u')` with `u'` the central difference.
    pub pairing: f64,
    /// `sqrt(Σ|a_k| Σ|a_k|k²) · ||u'||_L2`
    pub bound: f64,
}

pub fn check_lemma1(kernel: &KernelSpec, u: &GridFunction) -> Lemma1Report {
    let du = d1(u);
    let delta = apply_delta(kernel, u);
    Lemma1Report {
        delta_l2: norm(&delta, NormKind::L2),
        pairing: inner_product(&delta, &du).unwrap(),
        bound: kernel.lemma_constant() * norm(&du, NormKind::L2),
    }
}

/// Matrix form of Δ on a grid: `Δu = D·values + offset(left, right)`.
/// `D` has `a_k` on the diagonals `±k·m`; the offset collects the
/// contributions of the constant extension beyond the grid.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    pub grid: Grid,
    kernel: KernelSpec,
}

impl DeltaMatrix {
    pub fn bandwidth(&self) -> usize {
        (self.kernel.k_max() * self.grid.subdivisions()).min(self.grid.len() - 1)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let m = self.grid.subdivisions();
        let d = i.abs_diff(j);
        if d.is_multiple_of(m) {
            self.kernel.coefficient((d / m) as i64)
        } else {
            0.0
        }
    }

    /// Nonzero diagonals as `(index offset, coefficient)`, both signs.
    pub fn diagonals(&self) -> Vec<(isize, f64)> {
        let m = self.grid.subdivisions() as isize;
        let n = self.grid.len() as isize;
        let mut out = vec![(0, self.kernel.coefficient(0))];
        for (k, &a) in self.kernel.coefficients().iter().enumerate().skip(1) {
            let s = k as isize * m;
            if s < n {
                out.push((-s, a));
                out.push((s, a));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as isize;
        let mut y = vec![0.0; x.len()];
        for (s, a) in self.diagonals() {
            for i in 0..n {
                let j = i + s;
                if j >= 0 && j < n {
                    y[i as usize] += a * x[j as usize];
                }
            }
        }
        y
    }

    /// Contribution of the far-field extension: for each row, `a_k` times
    /// the limit value of every shifted index that falls outside the grid.
    pub fn offset(&self, left_limit: f64, right_limit: f64) -> Vec<f64> {
        let n = self.grid.len() as isize;
        let m = self.grid.subdivisions() as isize;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for (k, &a) in self.kernel.coefficients().iter().enumerate().skip(1) {
                    let s = k as isize * m;
                    for j in [i - s, i + s] {
                        if j < 0 {
                            acc += a * left_limit;
                        } else if j >= n {
                            acc += a * right_limit;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.grid.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }
}

pub fn delta_matrix(kernel: &KernelSpec, grid: Grid) -> DeltaMatrix {
    DeltaMatrix { grid, kernel: kernel.clone() }
}
