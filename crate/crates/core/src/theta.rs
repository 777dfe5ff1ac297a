//! Jacobi `θ₃` and the n-dimensional (Riemann) theta function.
//!
//! `θ(z; ρ) = Σₙ ρ^{n²} e^{2inz}`, period `π` in `z`, even in `z`.
//!
//! Two evaluation routes:
//!
//! * direct: the symmetric partial sum `n ∈ [−N, N]`, with `N` chosen from a
//!   rigorous geometric bound on the omitted tail;
//! * modular: for `ρ = e^{−s}` close to 1 the Jacobi imaginary transformation
//!   gives `θ(z; e^{−s}) = √(π/s) Σₙ exp(−(z − πn)²/s)`, whose terms decay
//!   like `e^{−π²m²/s}`. This is the sum actually evaluated by
//!   [`theta3_accelerated`] when `ρ > RHO_SWITCH`.
//!
//! Every sum accepts an additive log-factor `L` so callers can evaluate
//! `e^{L} θ(z; ρ)` with the Gaussian prefactors of the coherent-state
//! formulas folded into the terms; neither factor alone has to fit in `f64`.
//!
//! Tolerances are relative to the largest retained term. A cancelling sum
//! (e.g. `θ(π/2; ρ)` for `ρ → 1`) is only as accurate as its largest term
//! allows, which is why the modular route exists.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::LatticeGaussianStats;

/// Nome above which [`theta3_accelerated`] switches to the modular form.
///
/// `e^{−π}` is the fixed point of `s ↦ π²/s`, so whichever side is summed,
/// the effective nome is at most `e^{−π}`.
pub const RHO_SWITCH: f64 = 0.043_213_918_263_772_25;

/// Relative tolerance used where callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-15;

/// Largest `N` the direct series may use.
pub const MAX_TERMS: usize = 10_000;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A real nome `ρ ∈ (−1, 1)`, held as `(ln|ρ|, sign)` so that nomes like
/// `e^{−2000}` keep their exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nome {
    ln_abs: f64,
    negative: bool,
}

impl Nome {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.abs() < 1.0 {
            Ok(Nome { ln_abs: rho.abs().ln(), negative: rho < 0.0 })
        } else {
            Err(Error::NomeOutOfRange(rho.abs()))
        }
    }

    /// `ρ = e^{−s}`, `s > 0`.
    pub fn from_log(s: f64) -> Result<Self> {
        if s > 0.0 {
            Ok(Nome { ln_abs: -s, negative: false })
        } else {
            Err(Error::NomeOutOfRange((-s).exp()))
        }
    }

    /// `ρ` itself; underflows to zero for tiny nomes.
    pub fn rho(self) -> f64 {
        let m = self.ln_abs.exp();
        if self.negative { -m } else { m }
    }

    /// `ln|ρ|`.
    pub fn ln_abs(self) -> f64 {
        self.ln_abs
    }

    pub fn is_negative(self) -> bool {
        self.negative
    }
}

/// Value of a truncated series plus a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSeriesResult {
    pub value: Complex64,
    pub terms_used: usize,
    /// Upper bound on the modulus of the omitted tail.
    pub tail_bound: f64,
}

/// `θ(z; ρ)` by direct summation.
pub fn theta3(z: Complex64, nome: Nome, tol: f64) -> Result<ComplexSeriesResult> {
    direct(z, nome, 0, Complex64::new(0.0, 0.0), tol)
}

/// `θ'(z; ρ) = 2i Σ n ρ^{n²} e^{2inz}` by direct summation.
pub fn theta3_d1(z: Complex64, nome: Nome, tol: f64) -> Result<ComplexSeriesResult> {
    direct(z, nome, 1, Complex64::new(0.0, 0.0), tol)
}

/// `θ''(z; ρ) = −4 Σ n² ρ^{n²} e^{2inz}` by direct summation.
pub fn theta3_d2(z: Complex64, nome: Nome, tol: f64) -> Result<ComplexSeriesResult> {
    direct(z, nome, 2, Complex64::new(0.0, 0.0), tol)
}

/// `θ(z; ρ)`, through the modular form when `|ρ| > RHO_SWITCH`.
pub fn theta3_accelerated(z: Complex64, nome: Nome, tol: f64) -> Result<ComplexSeriesResult> {
    theta3_scaled(z, nome, Complex64::new(0.0, 0.0), tol)
}

/// `e^{L} θ(z; ρ)` with `L` folded into every term.
pub fn theta3_scaled(z: Complex64, nome: Nome, log_factor: Complex64, tol: f64) -> Result<ComplexSeriesResult> {
    theta3_derivative_scaled(z, nome, 0, log_factor, tol)
}

/// `e^{L} dʲθ/dzʲ (z; ρ)` for `j ∈ {0, 1, 2}`, route chosen by `|ρ|`.
pub fn theta3_derivative_scaled(
    z: Complex64,
    nome: Nome,
    order: u32,
    log_factor: Complex64,
    tol: f64,
) -> Result<ComplexSeriesResult> {
    assert!(order <= 2, "only derivatives up to second order are provided");
    let s = -nome.ln_abs();
    if s >= -RHO_SWITCH.ln() {
        direct(z, nome, order, log_factor, tol)
    } else if !nome.is_negative() {
        modular(z, s, order, log_factor, tol)
    } else {
        // (−1)^{n²} = (−1)ⁿ = e^{inπ}: a negative nome is a half-period shift
        modular(z + PI / 2.0, s, order, log_factor, tol)
    }
}

/// `θ`, `θ'` and `θ''` at one point, each by the route [`theta3_accelerated`] would use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaJet {
    pub value: ComplexSeriesResult,
    pub d1: ComplexSeriesResult,
    pub d2: ComplexSeriesResult,
}

pub fn theta3_jet(z: Complex64, nome: Nome, tol: f64) -> Result<ThetaJet> {
    let zero = Complex64::new(0.0, 0.0);
    Ok(ThetaJet {
        value: theta3_derivative_scaled(z, nome, 0, zero, tol)?,
        d1: theta3_derivative_scaled(z, nome, 1, zero, tol)?,
        d2: theta3_derivative_scaled(z, nome, 2, zero, tol)?,
    })
}

/// Logarithmic data of `θ(x; e^{−s})` for real `x` and `s > 0`, where `θ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealLogJet {
    /// `ln θ`.
    pub ln_value: f64,
    /// `θ'/θ`.
    pub d1_ratio: f64,
    /// `ln(1 + (s/2)·(ln θ)'')`.
    ///
    /// `(ln θ)''` tends to `−2/s` as `s → 0`, so the bracket
    /// `1 + (s/2)(θ''/θ − (θ'/θ)²)` is a vanishing difference of order-one
    /// numbers. In the modular form it equals `(2π²/s)·Var(n)` for the
    /// weights `e^{−π²(n − x/π)²/s}` and is computed that way, in logs.
    pub ln_curvature_offset: f64,
}

pub fn theta3_real_log_jet(x: f64, nome: Nome, tol: f64) -> Result<RealLogJet> {
    if nome.is_negative() {
        return Err(Error::InvalidArgument(format!("real log-jet needs 0 < rho < 1, got {}", nome.rho())));
    }
    let s = -nome.ln_abs();
    if s < -RHO_SWITCH.ln() {
        let st = LatticeGaussianStats::compute(PI * PI / s, x / PI);
        Ok(RealLogJet {
            ln_value: 0.5 * (PI / s).ln() + st.ln_sum,
            d1_ratio: 2.0 * PI / s * st.mean_offset,
            ln_curvature_offset: (2.0 * PI * PI / s).ln() + st.ln_var,
        })
    } else {
        let z = Complex64::new(x, 0.0);
        let t0 = theta3(z, nome, tol)?.value.re;
        let t1 = theta3_d1(z, nome, tol)?.value.re;
        let t2 = theta3_d2(z, nome, tol)?.value.re;
        let d1 = t1 / t0;
        let offset = 1.0 + 0.5 * s * (t2 / t0 - d1 * d1);
        Ok(RealLogJet { ln_value: t0.ln(), d1_ratio: d1, ln_curvature_offset: offset.ln() })
    }
}

/// Symmetric partial sum `Σ_{|n|≤N} (2in)ʲ ρ^{n²} e^{2inz + L}`.
fn direct(z: Complex64, nome: Nome, order: u32, log_factor: Complex64, tol: f64) -> Result<ComplexSeriesResult> {
    check_tol(tol)?;
    let scale = log_factor.re.exp();
    let ln_rho = nome.ln_abs();
    if ln_rho == f64::NEG_INFINITY {
        let value = if order == 0 { log_factor.exp() } else { Complex64::new(0.0, 0.0) };
        return Ok(ComplexSeriesResult { value, terms_used: 1, tail_bound: 0.0 });
    }
    let y = z.im.abs();
    let j = order as i32;

    // b_n = (2n)ʲ |ρ|^{n²} e^{2n|y|}, the bound on one of the ±n terms
    let ln_b = |n: f64| j as f64 * (2.0 * n).ln() + n * n * ln_rho + 2.0 * n * y;

    let mut peak = if order == 0 { 0.0f64 } else { f64::NEG_INFINITY };
    let mut n_max = 0usize;
    let tail = loop {
        let next = (n_max + 1) as f64;
        // ratio b_{n+1}/b_n is decreasing in n, so the tail past N is geometric
        let ratio = (j as f64 * ((next + 1.0) / next).ln() + (2.0 * next + 1.0) * ln_rho + 2.0 * y).exp();
        let ln_tail = 2f64.ln() + ln_b(next);
        if ratio < 1.0 && ln_tail - (-ratio).ln_1p() <= tol.ln() + peak {
            break scale * (ln_tail - (-ratio).ln_1p()).exp();
        }
        n_max += 1;
        if n_max > MAX_TERMS {
            return Err(Error::NonConvergence { rho: ln_rho.exp(), cap: MAX_TERMS });
        }
        peak = peak.max(ln_b(n_max as f64));
    };

    let two_i_z = 2.0 * I * z;
    let mut sum = if order == 0 { log_factor.exp() } else { Complex64::new(0.0, 0.0) };
    for n in 1..=n_max {
        let nf = n as f64;
        let base = log_factor + nf * nf * ln_rho;
        let plus = (base + two_i_z * nf).exp();
        let minus = (base - two_i_z * nf).exp();
        let pair = match order {
            0 => plus + minus,
            1 => (plus - minus) * (2.0 * I * nf),
            _ => (plus + minus) * (-4.0 * nf * nf),
        };
        sum += if nome.is_negative() && n % 2 == 1 { -pair } else { pair };
    }
    Ok(ComplexSeriesResult { value: sum, terms_used: 2 * n_max + 1, tail_bound: tail })
}

/// Modular form: `e^{L} dʲ/dzʲ [√(π/s) Σₙ exp(−(z − πn)²/s)]`.
fn modular(z: Complex64, s: f64, order: u32, log_factor: Complex64, tol: f64) -> Result<ComplexSeriesResult> {
    check_tol(tol)?;
    let n0 = (z.re / PI).round();
    let y = z.im.abs();
    let lead = log_factor + 0.5 * (PI / s).ln();
    let scale = lead.re.exp();

    let term = |n: f64| {
        let w = z - PI * n;
        let g = (lead - w * w / s).exp();
        match order {
            0 => g,
            1 => g * (-2.0 * w / s),
            _ => g * ((2.0 * w / s).powi(2) - 2.0 / s),
        }
    };
    // |z − πn| ≤ π(m + ½) + |y| and |Re(z) − πn| ≥ π(m − ½) for |n − n₀| = m
    let poly = |m: f64| {
        let zz = PI * (m + 0.5) + y;
        match order {
            0 => 1.0,
            1 => 2.0 * zz / s,
            _ => (2.0 * zz / s).powi(2) + 2.0 / s,
        }
    };
    let ln_bound = |m: f64| poly(m).ln() + (y * y - PI * PI * (m - 0.5) * (m - 0.5)) / s;

    let mut sum = term(n0);
    let mut peak = sum.norm() / scale;
    let mut m = 0usize;
    let tail = loop {
        let next = (m + 1) as f64;
        let ratio = 2f64.powi(order as i32) * (-2.0 * PI * PI * next / s).exp();
        let ln_tail = 2f64.ln() + ln_bound(next) - (-ratio).ln_1p();
        if ratio < 1.0 && peak > 0.0 && ln_tail <= tol.ln() + peak.ln() {
            break scale * ln_tail.exp();
        }
        m += 1;
        if m > MAX_TERMS {
            return Err(Error::NonConvergence { rho: (-s).exp(), cap: MAX_TERMS });
        }
        let a = term(n0 + m as f64);
        let b = term(n0 - m as f64);
        peak = peak.max(a.norm() / scale).max(b.norm() / scale);
        sum += a + b;
        if peak == 0.0 && m > 4 {
            // every term underflowed: the value is zero to working precision
            break 0.0;
        }
    };
    Ok(ComplexSeriesResult { value: sum, terms_used: 2 * m + 1, tail_bound: tail })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tol = {tol} must be positive")))
    }
}

/// Complex symmetric `n × n` matrix with positive-definite imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMatrix {
    omega: DMatrix<Complex64>,
    min_im_eigenvalue: f64,
}

impl PeriodMatrix {
    pub fn new(omega: DMatrix<Complex64>) -> Result<Self> {
        let n = omega.nrows();
        if omega.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch { expected: n, got: omega.ncols() });
        }
        let scale = omega.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (omega[(i, j)] - omega[(j, i)]).norm() > 1e-12 * scale {
                    return Err(Error::InvalidArgument("period matrix is not symmetric".into()));
                }
            }
        }
        let im = omega.map(|c| c.im);
        let im = (&im + im.transpose()) * 0.5;
        let lambda = SymmetricEigen::new(im).eigenvalues.min();
        if !(lambda > 0.0) {
            return Err(Error::PeriodNotConvergent(lambda));
        }
        Ok(PeriodMatrix { omega, min_im_eigenvalue: lambda })
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.omega
    }

    pub fn min_im_eigenvalue(&self) -> f64 {
        self.min_im_eigenvalue
    }
}

/// Largest lattice box `(2N+1)ⁿ` [`theta_nd`] will sum.
pub const MAX_LATTICE_POINTS: usize = 20_000_000;

/// `Θ(z | Ω) = Σ_{m∈ℤⁿ} exp(iπ m·Ωm + 2i m·z)` over the box `‖m‖_∞ ≤ N`.
///
/// With `λ` the smallest eigenvalue of `Im Ω`, every term with `‖m‖_∞ = r`
/// is bounded by `exp(−πλr² + 2r‖Im z‖)`, and there are
/// `(2r+1)ⁿ − (2r−1)ⁿ` of them; `N` is grown until that shell sum is below
/// `tol` times the largest term in the box.
pub fn theta_nd(z: &[Complex64], omega: &PeriodMatrix, tol: f64) -> Result<ComplexSeriesResult> {
    theta_nd_scaled(z, omega, Complex64::new(0.0, 0.0), tol)
}

/// `e^{L} Θ(z | Ω)`.
pub fn theta_nd_scaled(
    z: &[Complex64],
    omega: &PeriodMatrix,
    log_factor: Complex64,
    tol: f64,
) -> Result<ComplexSeriesResult> {
    check_tol(tol)?;
    let n = omega.dim();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    let lambda = omega.min_im_eigenvalue();
    let y = z.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    let shell_ln = |r: f64| {
        let count = (2.0 * r + 1.0).powi(n as i32) - (2.0 * r - 1.0).powi(n as i32);
        count.ln() - PI * lambda * r * r + 2.0 * r * y
    };
    let tail_ln = |big_n: usize| {
        // shells beyond the monotone point decay super-geometrically
        let start = (big_n + 1) as f64;
        let mut acc = Vec::new();
        let mut r = start;
        loop {
            let v = shell_ln(r);
            acc.push(v);
            if r > y / (PI * lambda) + 1.0 && v < acc[0] - 80.0 {
                break;
            }
            r += 1.0;
            if acc.len() > 100_000 {
                break;
            }
        }
        crate::numerics::log_sum_exp(acc)
    };

    let om = omega.matrix();
    let mut big_n = ((y / (PI * lambda)).ceil() as usize).max(1);
    loop {
        let side = 2 * big_n + 1;
        let points = side.checked_pow(n as u32).unwrap_or(usize::MAX);
        if points > MAX_LATTICE_POINTS {
            return Err(Error::NonConvergence { rho: (-PI * lambda).exp(), cap: big_n });
        }
        let (sum, peak) = box_sum(z, om, big_n, log_factor);
        let tail = tail_ln(big_n) + log_factor.re;
        if tail <= tol.ln() + peak.ln() || peak == 0.0 {
            return Ok(ComplexSeriesResult { value: sum, terms_used: points, tail_bound: tail.exp() });
        }
        big_n += 1;
    }
}

fn box_sum(z: &[Complex64], om: &DMatrix<Complex64>, big_n: usize, log_factor: Complex64) -> (Complex64, f64) {
    let n = z.len();
    let side = 2 * big_n as i64 + 1;
    let total = side.pow(n as u32);
    let mut m = vec![0i64; n];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut peak = 0.0f64;
    for idx in 0..total {
        let mut r = idx;
        for mi in m.iter_mut() {
            *mi = r % side - big_n as i64;
            r /= side;
        }
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mi = m[i] as f64;
            lin += z[i] * mi;
            for j in 0..n {
                quad += om[(i, j)] * (mi * m[j] as f64);
            }
        }
        let t = (log_factor + I * PI * quad + 2.0 * I * lin).exp();
        peak = peak.max(t.norm());
        sum += t;
    }
    (sum, peak)
}
