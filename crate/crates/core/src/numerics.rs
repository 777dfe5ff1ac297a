//! Quadrature rules and log-space series utilities shared by the
//! verification routines.
//!
//! Cylinder integrals use a periodic trapezoid rule in `q` (spectrally
//! accurate for smooth periodic integrands) and composite Simpson in `p`
//! over a finite window around the Gaussian centre.
//!
//! The log-space helpers exist because several closed forms on the circle
//! multiply quantities like `e^{π²/α}` by quantities like `e^{-2π²/α}`;
//! at `α = 0.01` both leave the range of `f64` long before their product does.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::wbz::CircleGeometry;

/// Panel counts and window for cylinder quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Uniform trapezoid nodes over one circle period.
    pub q_points: usize,
    /// Half-width of the `p` window, in units of `√(ωℏ)`.
    pub p_halfwidth: f64,
    /// Simpson sub-intervals across the `p` window (rounded up to even).
    pub p_points: usize,
    /// Trapezoid nodes over one Brillouin period `[0, 2π/a)` (inverse Zak transform).
    pub k_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { q_points: 128, p_halfwidth: 8.0, p_points: 512, k_points: 256 }
    }
}

impl QuadratureSpec {
    pub fn new(q_points: usize, p_halfwidth: f64, p_points: usize, k_points: usize) -> Result<Self> {
        if q_points < 8 {
            return Err(Error::InvalidQuadrature(format!("q_points = {q_points} < 8")));
        }
        if p_points < 16 {
            return Err(Error::InvalidQuadrature(format!("p_points = {p_points} < 16")));
        }
        if !(p_halfwidth >= 4.0) {
            return Err(Error::InvalidQuadrature(format!("p_halfwidth = {p_halfwidth} < 4")));
        }
        if k_points < 8 {
            return Err(Error::InvalidQuadrature(format!("k_points = {k_points} < 8")));
        }
        Ok(QuadratureSpec { q_points, p_halfwidth, p_points, k_points })
    }

    /// Copy with every panel count doubled (self-convergence studies).
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            q_points: 2 * self.q_points,
            p_halfwidth: self.p_halfwidth,
            p_points: 2 * self.p_points,
            k_points: 2 * self.k_points,
        }
    }
}

/// Nodes and weights of the periodic trapezoid rule on `[lo, lo + period)`.
pub fn periodic_trapezoid_nodes(lo: f64, period: f64, n: usize) -> Vec<(f64, f64)> {
    let h = period / n as f64;
    (0..n).map(|j| (lo + j as f64 * h, h)).collect()
}

/// Nodes and weights of composite Simpson on `[lo, hi]` with `n` sub-intervals
/// (`n` is rounded up to the next even number).
pub fn simpson_nodes(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (lo + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// `∫_lo^{lo+period} f` for periodic `f` by the trapezoid rule.
pub fn periodic_trapezoid<F>(f: F, lo: f64, period: f64, n: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    periodic_trapezoid_nodes(lo, period, n)
        .into_iter()
        .map(|(x, w)| f(x) * w)
        .sum()
}

/// `(1/2πℏ) ∫₀ᵃ dq ∫ dp f(q, p)` with `p` restricted to
/// `|p − ℏk| ≤ p_halfwidth·√(ωℏ)`.
pub fn integrate_cylinder<F>(f: F, geom: &CircleGeometry, spec: &QuadratureSpec) -> Complex64
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    integrate_cylinder_about(f, geom, spec, geom.hbar * geom.k)
}

/// As [`integrate_cylinder`], with the `p` window centred on `p_center`
/// instead of `ℏk`.
pub fn integrate_cylinder_about<F>(
    f: F,
    geom: &CircleGeometry,
    spec: &QuadratureSpec,
    p_center: f64,
) -> Complex64
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let half = spec.p_halfwidth * (geom.omega * geom.hbar).sqrt();
    let q_nodes = periodic_trapezoid_nodes(0.0, geom.a, spec.q_points);
    let p_nodes = simpson_nodes(p_center - half, p_center + half, spec.p_points);
    // Rows are evaluated in parallel; the reduction below runs in row order so
    // results do not depend on scheduling.
    let rows: Vec<Complex64> = q_nodes
        .par_iter()
        .map(|&(q, wq)| {
            let row: Complex64 = p_nodes.iter().map(|&(p, wp)| f(q, p) * wp).sum();
            row * wq
        })
        .collect();
    rows.into_iter().sum::<Complex64>() / (2.0 * std::f64::consts::PI * geom.hbar)
}

/// `ln Σ exp(xᵢ)`; returns `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(eˣ − 1)` for `x > 0`, accurate at both ends.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(eᵃ − eᵇ)` for `a ≥ b`.
pub fn ln_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + ln_one_minus_exp(b - a)
}

/// `ln(1 − eˣ)` for `x ≤ 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Signed accumulator of terms given by their logarithms.
///
/// Positive and negative contributions are summed separately in log space
/// and only subtracted once, so a small difference of two large sums keeps
/// whatever relative precision the subtraction itself allows.
#[derive(Debug, Clone, Default)]
pub struct SignedLogSum {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `sign · exp(ln_mag)`.
    pub fn push(&mut self, positive: bool, ln_mag: f64) {
        if ln_mag == f64::NEG_INFINITY {
            return;
        }
        if positive {
            self.pos.push(ln_mag);
        } else {
            self.neg.push(ln_mag);
        }
    }

    /// `(sign, ln|total|)`; a zero total is reported as `(1, -∞)`.
    pub fn finish(&self) -> (f64, f64) {
        let lp = log_sum_exp(self.pos.iter().copied());
        let ln = log_sum_exp(self.neg.iter().copied());
        if lp == ln {
            (1.0, f64::NEG_INFINITY)
        } else if lp > ln {
            (1.0, ln_sub_exp(lp, ln))
        } else {
            (-1.0, ln_sub_exp(ln, lp))
        }
    }
}

/// Moments of the discrete Gaussian weights `wₙ = exp(−c (n − x)²)`, `n ∈ ℤ`.
///
/// These weights appear twice: as `|cₙ|²` of the circle coherent states and as
/// the terms of the modular (Poisson-dual) form of the theta function. The
/// variance is returned as a logarithm because it routinely falls below
/// `f64::MIN_POSITIVE` for sharp weights (`c ≳ 700`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGaussianStats {
    /// `ln Σ wₙ`.
    pub ln_sum: f64,
    /// `Σ n wₙ / Σ wₙ`.
    pub mean: f64,
    /// `mean − x`, computed without forming `mean` first.
    pub mean_offset: f64,
    /// `ln(Σ (n − mean)² wₙ / Σ wₙ)`.
    pub ln_var: f64,
}

impl LatticeGaussianStats {
    pub fn compute(c: f64, x: f64) -> Self {
        debug_assert!(c > 0.0);
        let n0 = x.round();
        let halfwidth = ((41.5 / c).sqrt().ceil() as i64).max(0) + 2;
        let peak = c * (n0 - x) * (n0 - x);

        // exponent of wₙ relative to the peak: −c[(n−x)² − (n₀−x)²] = −c·d·(d + 2(n₀−x))
        let rel = |d: f64| -c * d * (d + 2.0 * (n0 - x));

        let mut ln_w = Vec::with_capacity(2 * halfwidth as usize + 1);
        let mut ln_m2 = Vec::new();
        let mut above = Vec::new();
        let mut below = Vec::new();
        for j in -halfwidth..=halfwidth {
            let d = j as f64;
            let lw = rel(d);
            ln_w.push(lw);
            if j != 0 {
                let la = d.abs().ln();
                ln_m2.push(lw + 2.0 * la);
                if j > 0 {
                    above.push(lw + la);
                } else {
                    below.push(lw + la);
                }
            }
        }
        let ln_s0 = log_sum_exp(ln_w);
        let ln_e2 = log_sum_exp(ln_m2) - ln_s0;

        // δ = E[n − n₀], signed
        let mut delta = SignedLogSum::new();
        for v in above {
            delta.push(true, v);
        }
        for v in below {
            delta.push(false, v);
        }
        let (dsign, ln_abs_delta) = delta.finish();
        let ln_abs_delta = ln_abs_delta - ln_s0;
        let delta_val = dsign * ln_abs_delta.exp();

        // Var = E[(n−n₀)²] − δ²; by Cauchy–Schwarz δ² ≤ E[(n−n₀)²]
        let ln_var = if ln_e2 == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            let r = (2.0 * ln_abs_delta - ln_e2).min(0.0);
            ln_e2 + ln_one_minus_exp(r)
        };

        LatticeGaussianStats {
            ln_sum: ln_s0 - peak,
            mean: n0 + delta_val,
            mean_offset: (n0 - x) + delta_val,
            ln_var,
        }
    }

    pub fn var(&self) -> f64 {
        self.ln_var.exp()
    }
}
