//! The Weil–Brezin–Zak transform at fixed quasimomentum.
//!
//! `(Tψ)(q, k) = Σₙ e^{inak} ψ(q − na)` maps `L²(ℝ)` onto functions on the
//! circle `[0, a)` that pick up a phase `e^{iak}` per period. Functions on the
//! line are kept as callables rather than samples.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{periodic_trapezoid, QuadratureSpec};

/// Circle length `a`, quasimomentum `k ∈ [0, 2π/a)`, fiducial width `ω` and `ℏ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGeometry {
    pub a: f64,
    pub k: f64,
    pub omega: f64,
    pub hbar: f64,
}

impl CircleGeometry {
    pub fn new(a: f64, k: f64, omega: f64, hbar: f64) -> Result<Self> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidGeometry(format!("{name} = {v} must be positive and finite")))
            }
        };
        pos("a", a)?;
        pos("omega", omega)?;
        pos("hbar", hbar)?;
        if !(0.0..2.0 * PI / a).contains(&k) {
            return Err(Error::InvalidGeometry(format!("k = {k} outside [0, 2π/a) = [0, {})", 2.0 * PI / a)));
        }
        Ok(CircleGeometry { a, k, omega, hbar })
    }

    /// `ℏ = 1`, `a = 2π`, `ω = 2ℏα/a²`.
    pub fn from_alpha(alpha: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidGeometry(format!("alpha = {alpha} must be positive")));
        }
        let a = 2.0 * PI;
        Self::new(a, k, 2.0 * alpha / (a * a), 1.0)
    }

    /// Dimensionless width `α = a²ω/(2ℏ)`.
    pub fn alpha(&self) -> f64 {
        self.a * self.a * self.omega / (2.0 * self.hbar)
    }

    /// `ρ₁ = e^{−α}`.
    pub fn rho1(&self) -> f64 {
        (-self.alpha()).exp()
    }

    /// `ρ₂ = e^{−4π²ℏ/(ωa²)} = e^{−2π²/α}`.
    pub fn rho2(&self) -> f64 {
        (-2.0 * PI * PI / self.alpha()).exp()
    }

    /// `v = a(p − kℏ)/(2πℏ)`.
    pub fn reduced_momentum(&self, p: f64) -> f64 {
        self.a * (p - self.k * self.hbar) / (2.0 * PI * self.hbar)
    }

    /// Inverse of [`reduced_momentum`](Self::reduced_momentum).
    pub fn momentum_from_reduced(&self, v: f64) -> f64 {
        2.0 * PI * self.hbar * v / self.a + self.k * self.hbar
    }

    /// `ℏ(2πn/a + k)`, the momentum eigenvalue of `|n; k⟩`.
    pub fn momentum_eigenvalue(&self, n: i64) -> f64 {
        self.hbar * self.wavenumber(n)
    }

    /// `2πn/a + k`.
    pub fn wavenumber(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.a + self.k
    }

    /// Reduces a position into `[0, a)`.
    pub fn reduce(&self, q: f64) -> f64 {
        let r = q.rem_euclid(self.a);
        if r >= self.a { 0.0 } else { r }
    }
}

/// A square-integrable function on the line.
#[derive(Clone)]
pub struct LineFunction {
    eval: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    /// `|ψ(x)|` is below `1e-16` of its peak for `|x| > R`.
    pub support_hint: Option<f64>,
}

impl std::fmt::Debug for LineFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineFunction").field("support_hint", &self.support_hint).finish_non_exhaustive()
    }
}

impl LineFunction {
    pub fn new<F>(eval: F, support_hint: Option<f64>) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        LineFunction { eval: Arc::new(eval), support_hint }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        (self.eval)(x)
    }

    /// The Weyl–Heisenberg coherent state
    /// `η_{y,p}(x) = e^{ip(x − y/2)/ℏ} η₀(x − y)` built on the normalised
    /// Gaussian `η₀(x) = (ω/πℏ)^{1/4} e^{−ωx²/(2ℏ)}`.
    pub fn gaussian_cs(y: f64, p: f64, omega: f64, hbar: f64) -> Self {
        let norm = (omega / (PI * hbar)).powf(0.25);
        // e^{−ωx²/2ℏ} < 1e-16·peak once ωx²/2ℏ > 36.85
        let reach = (2.0 * 36.85 * hbar / omega).sqrt();
        LineFunction::new(
            move |x| {
                let d = x - y;
                Complex64::from_polar(norm * (-omega * d * d / (2.0 * hbar)).exp(), p * (x - y / 2.0) / hbar)
            },
            Some(y.abs() + reach),
        )
    }
}

/// Cap on the number of shells summed when no support hint is available.
pub const MAX_ZAK_TERMS: usize = 10_000;

/// `(Tψ)(q, k) = Σₙ e^{inak} ψ(q − na)`.
///
/// With a support hint the sum runs over `|n| ≤ ⌈(R + a)/a⌉` (plus `|q|/a`
/// when `q` lies outside the cell, which evaluates the quasi-periodic
/// continuation). Without one, shells `±n` are added until two successive
/// shells change the partial sum by less than `tol`.
pub fn wbz_forward(psi: &LineFunction, q: f64, k: f64, geom: &CircleGeometry, tol: f64) -> Result<Complex64> {
    let a = geom.a;
    let term = |n: i64| Complex64::from_polar(1.0, n as f64 * a * k) * psi.eval(q - n as f64 * a);
    match psi.support_hint {
        Some(r) => {
            let nmax = ((r + a + q.abs()) / a).ceil() as i64;
            Ok((-nmax..=nmax).map(term).sum())
        }
        None => {
            let mut sum = term(0);
            let mut quiet = 0;
            for n in 1..=(MAX_ZAK_TERMS as i64) {
                let shell = term(n) + term(-n);
                sum += shell;
                if shell.norm() < tol {
                    quiet += 1;
                    if quiet >= 2 {
                        return Ok(sum);
                    }
                } else {
                    quiet = 0;
                }
            }
            Err(Error::SlowDecay(MAX_ZAK_TERMS))
        }
    }
}

/// `ψ(q − na) = (a/2π) ∫₀^{2π/a} dk e^{−inak} F(q, k)`, periodic trapezoid in `k`.
pub fn wbz_inverse<F>(f: F, q: f64, n: i64, geom: &CircleGeometry, quad: &QuadratureSpec) -> Complex64
where
    F: Fn(f64, f64) -> Complex64,
{
    let a = geom.a;
    let period = 2.0 * PI / a;
    let integral = periodic_trapezoid(
        |k| Complex64::from_polar(1.0, -(n as f64) * a * k) * f(q, k),
        0.0,
        period,
        quad.k_points,
    );
    integral * (a / (2.0 * PI))
}
