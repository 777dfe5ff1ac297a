//! Analytic representation of `L²(S¹)`.
//!
//! With `z = ωq − ip`, the map `(Bφ)(z) = e^{ipz/(2ωℏ)} ⟨q, p; k | φ⟩` sends a
//! state to an entire function with `ψ(z + ωa) = e^{iak} ψ(z)`, square
//! integrable for
//!
//! ```text
//! ‖ψ‖²_ℱ = (1/2πℏ) ∫₀ᵃ dq ∫ dp e^{−p²/(ωℏ)} |ψ(ωq − ip)|².
//! ```
//!
//! The basis `|n; k⟩` maps to the orthonormal functions
//! `ψₙ(z) = (4πℏ/(a²ω))^{1/4} e^{−ℏκₙ²/(2ω)} e^{iκₙz/ω}`, `κₙ = 2πn/a + k`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::circle_cs::{CircleState, PhasePoint};
use crate::error::{Error, Result};
use crate::numerics::{integrate_cylinder_about, QuadratureSpec};
use crate::theta::{theta3_scaled, Nome};
use crate::wbz::CircleGeometry;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A point of the complexified circle, `z = ωq − ip`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargmannPoint {
    pub z: Complex64,
}

impl BargmannPoint {
    pub fn from_phase(label: PhasePoint, geom: &CircleGeometry) -> Self {
        BargmannPoint { z: Complex64::new(geom.omega * label.q, -label.p) }
    }

    /// `(q, p)` with `q` reduced into `[0, a)`.
    pub fn to_phase(self, geom: &CircleGeometry) -> PhasePoint {
        PhasePoint::new(self.z.re / geom.omega, -self.z.im, geom)
    }

    /// `z* = ωq + ip`.
    pub fn z_star(self) -> Complex64 {
        self.z.conj()
    }
}

/// An element of ℱ, stored by its components `(ψₙ | ψ)_ℱ` in the orthonormal basis.
///
/// The plain Fourier coefficients `aₙ` of `ψ(z) = Σ aₙ e^{iκₙz/ω}` carry the
/// factor `e^{−ℏκₙ²/(2ω)}`, which underflows for small `ω` after a handful
/// of terms, so they are only produced on request.
#[derive(Debug, Clone, PartialEq)]
pub struct FockElement {
    pub geom: CircleGeometry,
    pub coeffs: BTreeMap<i64, Complex64>,
}

impl FockElement {
    pub fn new(geom: CircleGeometry, coeffs: BTreeMap<i64, Complex64>) -> Self {
        FockElement { geom, coeffs }
    }

    /// Builds an element from Fourier coefficients `aₙ`.
    pub fn from_fourier(geom: CircleGeometry, fourier: &BTreeMap<i64, Complex64>) -> Self {
        let coeffs = fourier.iter().map(|(&n, &a)| (n, a * fourier_to_basis_factor(n, &geom))).collect();
        FockElement { geom, coeffs }
    }

    /// `aₙ = (ψₙ|ψ)_ℱ (4πℏ/(a²ω))^{1/4} e^{−ℏκₙ²/(2ω)}`.
    pub fn fourier_coefficient(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default() / fourier_to_basis_factor(n, &self.geom)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().map(|(&n, &c)| c * basis_psi_n(n, z, &self.geom)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }
}

/// `(a²ω/(4πℏ))^{1/4} e^{ℏκₙ²/(2ω)}`, the ratio `(ψₙ|ψ)_ℱ / aₙ`.
pub fn fourier_to_basis_factor(n: i64, geom: &CircleGeometry) -> f64 {
    let CircleGeometry { a, omega, hbar, .. } = *geom;
    let kappa = geom.wavenumber(n);
    (0.25 * (a * a * omega / (4.0 * PI * hbar)).ln() + hbar * kappa * kappa / (2.0 * omega)).exp()
}

/// `ψₙ(z) = (4πℏ/(a²ω))^{1/4} exp(−ℏκₙ²/(2ω)) exp(iκₙz/ω)`.
pub fn basis_psi_n(n: i64, z: Complex64, geom: &CircleGeometry) -> Complex64 {
    let CircleGeometry { a, omega, hbar, .. } = *geom;
    let kappa = geom.wavenumber(n);
    let ln_c = 0.25 * (4.0 * PI * hbar / (a * a * omega)).ln() - hbar * kappa * kappa / (2.0 * omega);
    (ln_c + I * kappa * z / omega).exp()
}

/// `η_{z*}(q') = (ω/πℏ)^{1/4} e^{−(z* − ωq')²/(2ωℏ)} θ(ia(z* − ωq' − ikℏ)/(2ℏ); e^{−α})`,
/// the wavefunction of `|z*; k⟩ = e^{−ipz*/(2ωℏ)} |q, p; k⟩`.
pub fn analytic_cs(z_star: Complex64, geom: &CircleGeometry, q_prime: f64, tol: f64) -> Result<Complex64> {
    let CircleGeometry { a, k, omega, hbar } = *geom;
    let w = z_star - omega * q_prime;
    let log_factor = 0.25 * (omega / (PI * hbar)).ln() - w * w / (2.0 * omega * hbar);
    let arg = I * a * (w - I * k * hbar) / (2.0 * hbar);
    Ok(theta3_scaled(arg, Nome::from_log(geom.alpha())?, log_factor, tol)?.value)
}

/// `(Bφ)(z) = Σₙ φₙ ψₙ(z)`.
pub fn b_transform(phi: &CircleState, z: Complex64) -> Complex64 {
    phi.coeffs.iter().map(|(&n, &c)| c * basis_psi_n(n, z, &phi.geom)).sum()
}

/// `Bφ` as an element of ℱ; `B` is unitary, so the components carry over unchanged.
pub fn b_transform_element(phi: &CircleState) -> FockElement {
    FockElement { geom: phi.geom, coeffs: phi.coeffs.clone() }
}

/// `B⁻¹ψ = Σₙ (ψₙ|ψ)_ℱ |n; k⟩`.
pub fn b_inverse(psi: &FockElement) -> CircleState {
    CircleState::new(psi.geom, psi.coeffs.clone())
}

/// `(f | g)_ℱ` by cylinder quadrature, the `p` window centred on `p_center`.
pub fn fock_inner_about<F, G>(f: F, g: G, geom: &CircleGeometry, quad: &QuadratureSpec, p_center: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64 + Sync,
    G: Fn(Complex64) -> Complex64 + Sync,
{
    let omega = geom.omega;
    let hbar = geom.hbar;
    integrate_cylinder_about(
        |q, p| {
            let z = Complex64::new(omega * q, -p);
            f(z).conj() * g(z) * (-p * p / (omega * hbar)).exp()
        },
        geom,
        quad,
        p_center,
    )
}

/// `B⁻¹ψ` from the integral form
/// `(1/2πℏ) ∫₀ᵃ dq ∫ dp e^{−p²/(ωℏ)} ψ(z) |z*; k⟩`, projected on `|n; k⟩` for `n ∈ n_range`.
/// The `p` window for component `n` is centred on `ℏκₙ`.
pub fn b_inverse_quadrature<F>(psi: F, geom: &CircleGeometry, quad: &QuadratureSpec, n_range: RangeInclusive<i64>) -> CircleState
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let ns: Vec<i64> = n_range.collect();
    let coeffs = ns
        .par_iter()
        .map(|&n| {
            let c = fock_inner_about(|z| basis_psi_n(n, z, geom), &psi, geom, quad, geom.momentum_eigenvalue(n));
            (n, c)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    CircleState::new(*geom, coeffs)
}

/// `(ψₙ | ψₘ)_ℱ` for `|n|, |m| ≤ n_max`; the identity is expected.
pub fn verify_weighted_unity(geom: &CircleGeometry, n_max: i64, quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be positive")));
    }
    let dim = (2 * n_max + 1) as usize;
    let values: Vec<f64> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| {
            let n = (idx / dim) as i64 - n_max;
            let m = (idx % dim) as i64 - n_max;
            let centre = 0.5 * (geom.momentum_eigenvalue(n) + geom.momentum_eigenvalue(m));
            fock_inner_about(|z| basis_psi_n(n, z, geom), |z| basis_psi_n(m, z, geom), geom, quad, centre).re
        })
        .collect();
    Ok(DMatrix::from_row_slice(dim, dim, &values))
}
