//! Position and momentum statistics of the circle coherent states.
//!
//! Everything depends on the label only through the dimensionless width
//! `α = a²ω/(2ℏ)` and
//!
//! * `u`: a position in units of `a` (relative to the label for the density,
//!   the label itself for `⟨E⟩`);
//! * `v = a(p − kℏ)/(2πℏ)`.
//!
//! The theta functions involved all have nome `e^{−α/2}` or `e^{−α}`. For small
//! `α` the quantities of interest are exponentially small differences (for
//! example `1 − |⟨E⟩|²` and the momentum variance at `α = 0.01` are both
//! of order `e^{−π²/α}`), so everything is carried in logarithms, and the
//! theta data come from [`theta3_real_log_jet`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{ln_expm1, ln_sub_exp, log_sum_exp, LatticeGaussianStats, SignedLogSum};
use crate::theta::{theta3_accelerated, theta3_real_log_jet, theta3_scaled, Nome, RealLogJet, DEFAULT_TOL};
use crate::wbz::CircleGeometry;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("alpha = {alpha} must be positive")))
    }
}

/// Reduces `x` into `[−½, ½)`.
fn centre_mod1(x: f64) -> f64 {
    let r = x - x.round();
    if r >= 0.5 { r - 1.0 } else { r }
}

/// `θ(πv; e^{−α/2})` in logarithmic form.
fn half_nome_jet(v: f64, alpha: f64) -> Result<RealLogJet> {
    theta3_real_log_jet(PI * v, Nome::from_log(alpha / 2.0)?, DEFAULT_TOL)
}

/// `𝒫_α(u; v) = (1/a) √(2α/π) e^{−2αu²} |θ(πv + iαu; e^{−α})|² / θ(πv; e^{−α/2})`,
/// the position density at `q' = q + ua` of a state with reduced momentum `v`.
///
/// Periodic with period 1 in both `u` and `v`; both are reduced into `[−½, ½)` first.
pub fn probability_density(u: f64, v: f64, alpha: f64, a: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a > 0.0) {
        return Err(Error::InvalidGeometry(format!("a = {a} must be positive")));
    }
    let u = centre_mod1(u);
    let v = centre_mod1(v);
    let z = Complex64::new(PI * v, alpha * u);
    let num = theta3_scaled(z, Nome::from_log(alpha)?, Complex64::new(-alpha * u * u, 0.0), DEFAULT_TOL)?.value;
    let den = theta3_accelerated(Complex64::new(PI * v, 0.0), Nome::from_log(alpha / 2.0)?, DEFAULT_TOL)?.value.re;
    Ok((2.0 * alpha / PI).sqrt() / a * num.norm_sqr() / den)
}

/// `ln |⟨E⟩|(v) = −π²/(2α) + ln θ(π(v − ½); e^{−α/2}) − ln θ(πv; e^{−α/2})`.
pub fn ln_abs_angle(v: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v = centre_mod1(v);
    let num = half_nome_jet(v - 0.5, alpha)?;
    let den = half_nome_jet(v, alpha)?;
    Ok(-PI * PI / (2.0 * alpha) + num.ln_value - den.ln_value)
}

/// `⟨E⟩(u, v) = e^{2πiu} |⟨E⟩|(v)` for the angle operator `E = e^{2πiQ/a}`, with `u = q/a`.
pub fn expect_angle(u: f64, v: f64, alpha: f64) -> Result<Complex64> {
    Ok(Complex64::from_polar(ln_abs_angle(v, alpha)?.exp(), 2.0 * PI * u))
}

/// `⟨P⟩ = p + (ℏα/(2a)) θ'(πv; e^{−α/2}) / θ(πv; e^{−α/2})`.
pub fn expect_momentum(p: f64, geom: &CircleGeometry) -> Result<f64> {
    let v = geom.reduced_momentum(p);
    let jet = half_nome_jet(centre_mod1(v), geom.alpha())?;
    Ok(p + geom.hbar * geom.alpha() / (2.0 * geom.a) * jet.d1_ratio)
}

/// `(a/2πℏ)(⟨P⟩ − kℏ) = v + (α/4π) θ'/θ`, the staircase curve in reduced units.
pub fn reduced_momentum_expectation(v: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let jet = half_nome_jet(centre_mod1(v), alpha)?;
    Ok(v + alpha / (4.0 * PI) * jet.d1_ratio)
}

/// `ln(ΔP / (ℏ/a)) = ½ ln(α · [1 + (α/4)(ln θ)''])`.
fn ln_delta_p_reduced(v: f64, alpha: f64) -> Result<f64> {
    let jet = half_nome_jet(centre_mod1(v), alpha)?;
    Ok(0.5 * (alpha.ln() + jet.ln_curvature_offset))
}

/// `⟨P²⟩ = ⟨P⟩² + (ℏ/a)² α [α/4 (θ''/θ − (θ'/θ)²) + 1]`.
///
/// Grouped this way the result is a sum of two nonnegative terms, whereas
/// expanding `θ''/θ` on its own cancels catastrophically for small `α`.
pub fn expect_momentum_sq(p: f64, geom: &CircleGeometry) -> Result<f64> {
    let mean = expect_momentum(p, geom)?;
    let v = geom.reduced_momentum(p);
    let dp = (geom.hbar / geom.a) * ln_delta_p_reduced(v, geom.alpha())?.exp();
    Ok(mean * mean + dp * dp)
}

/// Dispersions and the uncertainty function `Δ(v)` at one reduced momentum.
///
/// `delta_p` is in units of `ℏ/a`; `delta_fn`, `bound_lo` and `bound_hi`
/// are in units of `ℏ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyReport {
    /// `ΔE = √(1 − |⟨E⟩|²)`.
    pub delta_e: f64,
    /// `ΔP` in units of `ℏ/a`.
    pub delta_p: f64,
    /// `Δ(v)/ℏ` from the closed form in `θ` and its derivatives.
    pub delta_fn: f64,
    /// `Δ(v)/ℏ` composed from `ΔE` and `ΔP`.
    pub delta_fn_composed: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
    /// `ln |⟨E⟩|`.
    pub ln_abs_angle: f64,
    /// `(sign, ln|1 − (Δ/ℏ)²|)`, free of cancellation.
    pub upper_margin: (f64, f64),
    /// `(Δ/ℏ)² − ¼`.
    pub lower_margin: f64,
}

impl UncertaintyReport {
    /// `ℏ/2 < Δ < ℏ`, decided from the margins rather than from `delta_fn`,
    /// which rounds to 1 for small `α`.
    pub fn strictly_inside(&self) -> bool {
        self.upper_margin.0 > 0.0 && self.upper_margin.1.is_finite() && self.lower_margin > 0.0
    }
}

/// Both routes to `Δ(v)`:
///
/// * composed: `Δ = (a/2π) √(1/(1 − ΔE²) − 1) · ΔP`;
/// * closed form: `Δ² = (ℏ/2π)² α [e^{π²/α} θ(πv)²/θ(π(v−½))² − 1] · [α/4 (θ''/θ − (θ'/θ)²) + 1]`,
///   all thetas with nome `e^{−α/2}`.
pub fn uncertainty_report(v: f64, geom: &CircleGeometry) -> Result<UncertaintyReport> {
    let alpha = geom.alpha();
    let v = centre_mod1(v);
    let at_v = half_nome_jet(v, alpha)?;
    let at_half = half_nome_jet(v - 0.5, alpha)?;

    // composed route
    let ln_e = ln_abs_angle(v, alpha)?;
    let delta_e = (-(2.0 * ln_e).exp_m1()).max(0.0).sqrt();
    let ln_dp = 0.5 * (alpha.ln() + at_v.ln_curvature_offset);
    let ln_a_over_2pi = (geom.a / (2.0 * PI)).ln();
    let ln_composed = ln_a_over_2pi + 0.5 * ln_expm1(-2.0 * ln_e) + ln_dp + (1.0 / geom.a).ln();

    // closed form, squared
    let bracket = ln_expm1(PI * PI / alpha + 2.0 * (at_v.ln_value - at_half.ln_value));
    let ln_sq = 2.0 * (1.0 / (2.0 * PI)).ln() + alpha.ln() + bracket + at_v.ln_curvature_offset;
    let delta_fn = (0.5 * ln_sq).exp();

    Ok(UncertaintyReport {
        delta_e,
        delta_p: ln_dp.exp(),
        delta_fn,
        delta_fn_composed: ln_composed.exp(),
        bound_lo: 0.5,
        bound_hi: 1.0,
        ln_abs_angle: ln_e,
        upper_margin: upper_margin(v, alpha),
        lower_margin: delta_fn * delta_fn - 0.25,
    })
}

/// `1 − Δ²/ℏ²` as `(sign, ln|·|)`.
///
/// With `wₙ = e^{−c(n−v)²}`, `c = 2π²/α`, `S = Σwₙ`, `G = Σ√(wₙwₙ₊₁)`:
/// `Δ²/ℏ² = (S²/G² − 1) Var(n)`, hence `1 − Δ²/ℏ² = Var(n) + (G² − S² Var(n))/G²`.
/// Writing the double sums over `s = n + m`, `d = n − m`, the leading terms
/// of `G² − S² Var(n)` cancel analytically, leaving
/// `Σₛ e^{−c(s−2v)²/2} β_{s mod 2}` with
///
/// ```text
/// β_even = e^{−c/2} Σ_{d odd} e^{−cd²/2} − ½ Σ_{d even} d² e^{−cd²/2}
/// β_odd  = Σ_{d even ≠ 0} e^{−c(1+d²)/2} − ½ Σ_{d odd, |d| ≥ 3} d² e^{−cd²/2}
/// ```
///
/// For large `c` the margin behaves like `2e^{−2c|v|} + e^{−c(1 − 2|v|)}`,
/// far below `f64` resolution of `1 − Δ²` itself.
pub fn upper_margin(v: f64, alpha: f64) -> (f64, f64) {
    let c = 2.0 * PI * PI / alpha;
    let v = centre_mod1(v);
    let h = ((80.0 / c).sqrt().ceil() as i64) + 3;

    // ln β for each parity, signed
    let beta = |even: bool| {
        let mut acc = SignedLogSum::new();
        for d in -2 * h..=2 * h {
            let df = d as f64;
            let g = -c * df * df / 2.0;
            let d_even = d % 2 == 0;
            if even {
                if !d_even {
                    acc.push(true, g - c / 2.0);
                } else if d != 0 {
                    acc.push(false, g + (0.5 * df * df).ln());
                }
            } else if d_even {
                if d != 0 {
                    acc.push(true, g - c / 2.0);
                }
            } else if d.abs() >= 3 {
                acc.push(false, g + (0.5 * df * df).ln());
            }
        }
        acc.finish()
    };
    let (be_sign, be_ln) = beta(true);
    let (bo_sign, bo_ln) = beta(false);

    let mut q = SignedLogSum::new();
    let s0 = (2.0 * v).round() as i64;
    for s in s0 - 2 * h..=s0 + 2 * h {
        let e = -c * (s as f64 - 2.0 * v).powi(2) / 2.0;
        if s.rem_euclid(2) == 0 {
            q.push(be_sign > 0.0, e + be_ln);
        } else {
            q.push(bo_sign > 0.0, e + bo_ln);
        }
    }
    let (q_sign, q_ln) = q.finish();

    // ln G, G = Σ exp(−c[(n−v)² + (n+1−v)²]/2)
    let n0 = v.round() as i64;
    let ln_g = log_sum_exp(
        (n0 - h - 1..=n0 + h)
            .map(|n| -c * ((n as f64 - v).powi(2) + (n as f64 + 1.0 - v).powi(2)) / 2.0),
    );
    let ln_var = LatticeGaussianStats::compute(c, v).ln_var;

    let ln_frac = q_ln - 2.0 * ln_g;
    if q_sign > 0.0 {
        (1.0, log_sum_exp([ln_frac, ln_var]))
    } else if ln_var >= ln_frac {
        (1.0, ln_sub_exp(ln_var, ln_frac))
    } else {
        (-1.0, ln_sub_exp(ln_frac, ln_var))
    }
}

/// Evaluates `f` at each grid point in parallel; rows come back in grid order.
pub fn sweep<F>(grid: &[f64], f: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.par_iter().map(|&x| Ok((x, f(x)?))).collect()
}

/// `(u, a·𝒫_α(u − ½; v))`, the density with the label at the centre of the cell.
pub fn density_profile(alpha: f64, v: f64, u_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let a = 1.0;
    sweep(u_grid, |u| Ok(a * probability_density(u - 0.5, v, alpha, a)?))
}

/// `(v, |⟨E⟩|(v))`.
pub fn angle_curve(alpha: f64, v_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    sweep(v_grid, |v| Ok(ln_abs_angle(v, alpha)?.exp()))
}

/// `(v, (a/2πℏ)(⟨P⟩ − kℏ))`.
pub fn momentum_curve(alpha: f64, v_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    sweep(v_grid, |v| reduced_momentum_expectation(v, alpha))
}

/// `(v, 2Δ(v)/ℏ)`.
pub fn uncertainty_curve(alpha: f64, v_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let geom = CircleGeometry::from_alpha(alpha, 0.0)?;
    sweep(v_grid, |v| Ok(2.0 * uncertainty_report(v, &geom)?.delta_fn))
}
