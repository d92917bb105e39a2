//! Reaction terms `f` with roots at 0 and 1, their potentials, and the
//! closed-form heteroclinic `u0` of `u'' + f(u) = 0` when one is known.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reaction term with its first two derivatives, its potential
/// `F(u) = ∫_0^u f`, and optionally the exact anti-continuum kink.
#[derive(Clone)]
pub struct NonlinearitySpec {
    pub name: String,
    f: ScalarFn,
    f_prime: ScalarFn,
    f_double_prime: ScalarFn,
    potential: Option<ScalarFn>,
    exact_kink: Option<ScalarFn>,
    exact_kink_derivative: Option<ScalarFn>,
    /// True iff `f(u + 1/2)` is odd.
    pub odd_symmetric: bool,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("closed_form_potential", &self.potential.is_some())
            .field("exact_kink", &self.exact_kink.is_some())
            .field("odd_symmetric", &self.odd_symmetric)
            .finish()
    }
}

impl NonlinearitySpec {
    /// A user-supplied nonlinearity. The potential defaults to adaptive
    /// quadrature of `f` from 0 unless [`with_potential`](Self::with_potential)
    /// supplies a closed form.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_double_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_prime: Arc::new(f_prime),
            f_double_prime: Arc::new(f_double_prime),
            potential: None,
            exact_kink: None,
            exact_kink_derivative: None,
            odd_symmetric: false,
        }
    }

    pub fn with_potential(mut self, potential: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Arc::new(potential));
        self
    }

    pub fn with_exact_kink(
        mut self,
        kink: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.exact_kink = Some(Arc::new(kink));
        self.exact_kink_derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_odd_symmetry(mut self, odd: bool) -> Self {
        self.odd_symmetric = odd;
        self
    }

    /// Builtin selected by its CLI/config name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sine_gordon" => Ok(builtin_sine_gordon()),
            "phi4" => Ok(builtin_phi4()),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected `sine_gordon` or `phi4`)"
            ))),
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        (self.f_prime)(u)
    }

    #[inline]
    pub fn f_double_prime(&self, u: f64) -> f64 {
        (self.f_double_prime)(u)
    }

    /// `F(u) = ∫_0^u f(s) ds`.
    pub fn potential(&self, u: f64) -> f64 {
        match &self.potential {
            Some(p) => p(u),
            None => self.potential_by_quadrature(u),
        }
    }

    pub fn potential_by_quadrature(&self, u: f64) -> f64 {
        adaptive_simpson(&*self.f, 0.0, u, 1e-14)
    }

    pub fn has_closed_form_potential(&self) -> bool {
        self.potential.is_some()
    }

    pub fn exact_kink(&self, z: f64) -> Option<f64> {
        self.exact_kink.as_ref().map(|k| k(z))
    }

    pub fn exact_kink_derivative(&self, z: f64) -> Option<f64> {
        self.exact_kink_derivative.as_ref().map(|k| k(z))
    }

    pub fn has_exact_kink(&self) -> bool {
        self.exact_kink.is_some() && self.exact_kink_derivative.is_some()
    }

    pub(crate) fn require_exact_kink(&self) -> Result<()> {
        if self.has_exact_kink() {
            Ok(())
        } else {
            Err(Error::MissingExactKink(self.name.clone()))
        }
    }

    /// `scale · f`, used for the lattice, whose reaction term is `c² f`
    /// when the kink was computed for `f`. The exact kink is dropped since it
    /// belongs to the unscaled equation.
    pub fn scaled(&self, scale: f64) -> Self {
        let (f, fp, fpp) = (self.f.clone(), self.f_prime.clone(), self.f_double_prime.clone());
        let potential: Option<ScalarFn> = self
            .potential
            .clone()
            .map(|p| Arc::new(move |u| scale * p(u)) as ScalarFn);
        Self {
            name: format!("{}*{}", scale, self.name),
            f: Arc::new(move |u| scale * f(u)),
            f_prime: Arc::new(move |u| scale * fp(u)),
            f_double_prime: Arc::new(move |u| scale * fpp(u)),
            potential,
            exact_kink: None,
            exact_kink_derivative: None,
            odd_symmetric: self.odd_symmetric,
        }
    }
}

/// Discrete sine-Gordon mapped to roots 0, 1:
/// `f(u) = sin(2πu − π) / 2π`, with `u0(z) = (2/π) arctan(e^z)`.
pub fn builtin_sine_gordon() -> NonlinearitySpec {
    let two_pi = 2.0 * PI;
    // sin(2πu − π) = −sin(2πs) with s = u − round(u), which is exactly 0 at the roots
    let s = move |u: f64| two_pi * (u - u.round());
    NonlinearitySpec::custom(
        "sine_gordon",
        move |u| -s(u).sin() / two_pi,
        move |u| -s(u).cos(),
        move |u| two_pi * s(u).sin(),
    )
    .with_potential(move |u| (s(u).cos() - 1.0) / (two_pi * two_pi))
    .with_exact_kink(
        |z| {
            // 1 - u0(z) = u0(-z); evaluate the small side directly.
            if z <= 0.0 {
                2.0 / PI * z.exp().atan()
            } else {
                1.0 - 2.0 / PI * (-z).exp().atan()
            }
        },
        |z| 1.0 / (PI * z.cosh()),
    )
    .with_odd_symmetry(true)
}

/// φ⁴ mapped to roots 0, 1: `f(u) = w − w³` with `w = 2u − 1`, and
/// `u0(z) = (1 + tanh z) / 2`.
pub fn builtin_phi4() -> NonlinearitySpec {
    NonlinearitySpec::custom(
        "phi4",
        |u| {
            let w = 2.0 * u - 1.0;
            w - w * w * w
        },
        |u| {
            let w = 2.0 * u - 1.0;
            2.0 * (1.0 - 3.0 * w * w)
        },
        |u| -24.0 * (2.0 * u - 1.0),
    )
    .with_potential(|u| {
        let w = 2.0 * u - 1.0;
        let s = 1.0 - w * w;
        -s * s / 8.0
    })
    .with_exact_kink(
        |z| {
            if z <= 0.0 {
                // (1 + tanh z)/2 = e^{2z}/(1 + e^{2z})
                let t = (2.0 * z).exp();
                t / (1.0 + t)
            } else {
                let t = (-2.0 * z).exp();
                1.0 / (1.0 + t)
            }
        },
        |z| {
            let s = 1.0 / z.cosh();
            0.5 * s * s
        },
    )
    .with_odd_symmetry(true)
}

/// A double well without the `u ↦ 1 − u` symmetry, available through the
/// library only: `f = −g g'` with `g(u) = u − u³`, so `F = −g²/2` and the
/// kink solves `u' = g(u)`, i.e. `u0(z) = (1 + e^{−2z})^{−1/2}`.
/// Rates differ at the two ends (`f'(0) = −1`, `f'(1) = −4`).
pub fn asymmetric_well() -> NonlinearitySpec {
    NonlinearitySpec::custom(
        "asymmetric_well",
        |u| -(u - u * u * u) * (1.0 - 3.0 * u * u),
        |u| {
            let a = 1.0 - 3.0 * u * u;
            -a * a + 6.0 * u * u * (1.0 - u * u)
        },
        |u| 24.0 * u - 60.0 * u * u * u,
    )
    .with_potential(|u| {
        let g = u - u * u * u;
        -0.5 * g * g
    })
    .with_exact_kink(
        |z| {
            if z < 0.0 {
                let t = (2.0 * z).exp();
                (t / (1.0 + t)).sqrt()
            } else {
                1.0 / (1.0 + (-2.0 * z).exp()).sqrt()
            }
        },
        |z| {
            if z < 0.0 {
                let t = (2.0 * z).exp();
                t.sqrt() / (1.0 + t).powf(1.5)
            } else {
                let t = (-2.0 * z).exp();
                t / (1.0 + t).powf(1.5)
            }
        },
    )
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub subject: String,
    pub clauses: Vec<Clause>,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>) -> Self {
        Self { subject: subject.into(), clauses: Vec::new() }
    }

    pub fn push(&mut self, name: &str, passed: bool, measured: f64, detail: impl Into<String>) {
        self.clauses.push(Clause {
            name: name.to_string(),
            passed,
            measured,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

const ROOT_TOL: f64 = 1e-12;
const POTENTIAL_TOL: f64 = 1e-10;
const KINK_RESIDUAL_TOL: f64 = 1e-8;

/// Checks each clause of (H1). `F ≠ 0` on (0, 1) is checked on
/// `sample_count` equispaced interior points plus the midpoint; a sign change
/// or a value within 1e-12 of zero fails. Finer structure than the sampling
/// resolves is not detected.
pub fn validate_h1(spec: &NonlinearitySpec, sample_count: usize) -> Result<ValidationReport> {
    if sample_count < 3 {
        return Err(Error::InvalidParameter(format!(
            "sample_count must be >= 3, got {sample_count}"
        )));
    }
    let mut report = ValidationReport::new(format!("H1[{}]", spec.name));

    let f0 = spec.f(0.0);
    let f1 = spec.f(1.0);
    report.push("f(0)=0", f0.abs() <= ROOT_TOL, f0, "");
    report.push("f(1)=0", f1.abs() <= ROOT_TOL, f1, "");
    let fp0 = spec.f_prime(0.0);
    let fp1 = spec.f_prime(1.0);
    report.push("f'(0)<0", fp0 < 0.0, fp0, "");
    report.push("f'(1)<0", fp1 < 0.0, fp1, "");

    let big_f1 = spec.potential(1.0);
    report.push("F(1)=0", big_f1.abs() <= POTENTIAL_TOL, big_f1, "");

    let mut samples: Vec<f64> = (1..=sample_count)
        .map(|i| i as f64 / (sample_count + 1) as f64)
        .collect();
    samples.push(0.5);
    let values: Vec<f64> = samples.iter().map(|&u| spec.potential(u)).collect();
    let min_abs = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let sign = values[0].signum();
    let same_sign = values.iter().all(|v| v.signum() == sign);
    report.push(
        "F(u)!=0 on (0,1)",
        same_sign && min_abs > ROOT_TOL,
        min_abs,
        format!("{} samples, min |F| reported", samples.len()),
    );

    if spec.has_closed_form_potential() {
        let worst = samples
            .iter()
            .chain([1.0].iter())
            .map(|&u| (spec.potential(u) - spec.potential_by_quadrature(u)).abs())
            .fold(0.0, f64::max);
        report.push(
            "F matches quadrature of f",
            worst <= POTENTIAL_TOL,
            worst,
            "closed form vs adaptive Simpson",
        );
    }

    if spec.has_exact_kink() {
        check_exact_kink(spec, &mut report);
    }
    Ok(report)
}

fn check_exact_kink(spec: &NonlinearitySpec, report: &mut ValidationReport) {
    let u0 = |z: f64| spec.exact_kink(z).unwrap();
    let du0 = |z: f64| spec.exact_kink_derivative(z).unwrap();

    let left = u0(-40.0);
    let right = u0(40.0);
    report.push("u0(-inf)=0", left.abs() <= 1e-12, left, "evaluated at z=-40");
    report.push("u0(+inf)=1", (right - 1.0).abs() <= 1e-12, right, "evaluated at z=40");

    // Beyond |z| ≈ 15 the steepest builtin tail is within an ulp of 1.
    let zs: Vec<f64> = (0..=300).map(|i| -15.0 + 0.1 * i as f64).collect();
    let increasing = zs.windows(2).all(|w| u0(w[1]) > u0(w[0]));
    report.push("u0 increasing", increasing, 0.0, "z in [-15, 15], step 0.1");

    // Second derivative by a fourth-order difference of the exact u0'.
    let d = 1e-3;
    let residual = zs
        .iter()
        .map(|&z| {
            let ddu = (-du0(z + 2.0 * d) + 8.0 * du0(z + d) - 8.0 * du0(z - d) + du0(z - 2.0 * d))
                / (12.0 * d);
            (ddu + spec.f(u0(z))).abs()
        })
        .fold(0.0, f64::max);
    report.push(
        "u0''+f(u0)=0",
        residual <= KINK_RESIDUAL_TOL,
        residual,
        "max over z in [-15, 15]",
    );
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
