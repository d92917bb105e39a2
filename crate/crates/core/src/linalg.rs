//! Banded storage and LU with partial pivoting, with a dense fallback for
//! bands too wide to be worth it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let kl = kl.min(n.saturating_sub(1));
        let ku = ku.min(n.saturating_sub(1));
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                let row = &self.data[i * w..(i + 1) * w];
                (lo..=hi).map(|j| row[j + self.kl - i] * x[j]).sum()
            })
            .collect()
    }

    /// `max |A − Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let hi = (i + self.ku).min(self.n - 1);
            for j in i..=hi {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn factor(&self) -> Result<Factorization> {
        // Past a quarter of the matrix the band buys nothing.
        if 4 * (self.kl + self.ku) > self.n {
            let lu = self.to_dense().lu();
            let u = lu.u();
            let diag: Vec<f64> = (0..self.n).map(|i| u[(i, i)].abs()).collect();
            let (min, max) = min_max(&diag);
            if !lu.is_invertible() || !(min > 0.0) {
                let row = diag.iter().position(|&d| !(d > 0.0)).unwrap_or(0);
                return Err(Error::SolveFailure { row, pivot_ratio: min / max });
            }
            Ok(Factorization::Dense { lu, pivot_ratio: min / max })
        } else {
            BandLu::new(self).map(Factorization::Banded)
        }
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// LU of a band matrix with row pivoting. The upper factor has bandwidth
/// `kl + ku` after fill-in.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    uw: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    pub fn new(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        // Row i holds columns i − kl ..= i + kl + ku.
        let w = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                ab[i * w + j + kl - i] = a.get(i, j);
            }
        }
        let idx = |r: usize, j: usize| r * w + j + kl - r;
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        let mut diag = vec![0.0; n];

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let right = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = ab[idx(k, k)].abs();
            for r in k + 1..=last {
                let v = ab[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                let (_, hi) = min_max(&diag[..k]);
                return Err(Error::SolveFailure { row: k, pivot_ratio: best / hi.max(f64::MIN_POSITIVE) });
            }
            pivots[k] = p;
            if p != k {
                for j in k..=right {
                    ab.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = ab[idx(k, k)];
            diag[k] = pivot.abs();
            for r in k + 1..=last {
                let mult = ab[idx(r, k)] / pivot;
                lower[k * kl + (r - k - 1)] = mult;
                ab[idx(r, k)] = 0.0;
                if mult != 0.0 {
                    for j in k + 1..=right {
                        ab[idx(r, j)] -= mult * ab[idx(k, j)];
                    }
                }
            }
        }

        // Keep only the upper factor: columns i ..= i + kl + ku of row i.
        let uw = kl + ku + 1;
        let mut upper = vec![0.0; n * uw];
        for i in 0..n {
            let hi = (i + kl + ku).min(n - 1);
            for j in i..=hi {
                upper[i * uw + j - i] = ab[idx(i, j)];
            }
        }
        let (lo, hi) = min_max(&diag);
        Ok(Self { n, kl, uw, upper, lower, pivots, pivot_ratio: lo / hi })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, uw) = (self.n, self.kl, self.uw);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    x[r] -= self.lower[k * kl + (r - k - 1)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let row = &self.upper[i * uw..(i + 1) * uw];
            let hi = (i + uw - 1).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= row[j - i] * x[j];
            }
            x[i] = s / row[0];
        }
        x
    }
}

#[derive(Debug, Clone)]
pub enum Factorization {
    Banded(BandLu),
    Dense { lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, pivot_ratio: f64 },
}

impl Factorization {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Banded(lu) => lu.solve(b),
            Factorization::Dense { lu, .. } => {
                let rhs = DVector::from_column_slice(b);
                // invertibility was checked at factorization time
                lu.solve(&rhs).expect("factorization checked invertible").as_slice().to_vec()
            }
        }
    }

    /// `min |u_ii| / max |u_ii|` of the upper factor.
    pub fn pivot_ratio(&self) -> f64 {
        match self {
            Factorization::Banded(lu) => lu.pivot_ratio,
            Factorization::Dense { pivot_ratio, .. } => *pivot_ratio,
        }
    }
}
