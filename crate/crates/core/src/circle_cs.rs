//! Coherent states `|q, p; k⟩` on the circle of length `a`.
//!
//! Each state is the Zak transform, at quasimomentum `k`, of the Gaussian
//! coherent state `η_{q,p}` on the line. In closed form
//!
//! ```text
//! ψ(q') = (ω/πℏ)^{1/4} e^{ip(q' − q/2)/ℏ} e^{−ω(q − q')²/(2ℏ)}
//!         · θ(a(kℏ − p + iω(q − q'))/(2ℏ); e^{−α}),     α = a²ω/(2ℏ).
//! ```
//!
//! The states are not normalised; `⟨q,p;k|q,p;k⟩ = θ(a(ℏk − p)/(2ℏ); e^{−α/2})`.
//! Labels are reduced into `[0, a)` by [`PhasePoint::new`], but every
//! function here accepts an unreduced `q` and then evaluates the
//! quasi-periodic continuation `|q + a, p; k⟩ = e^{ipa/(2ℏ)} e^{−iak} |q, p; k⟩`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{integrate_cylinder_about, QuadratureSpec};
use crate::theta::{theta3_accelerated, theta3_scaled, Nome, DEFAULT_TOL};
use crate::wbz::CircleGeometry;

/// A point `(q, p)` of the phase space `S¹ × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    /// Reduces `q` into `[0, a)`; `p` is left alone.
    pub fn new(q: f64, p: f64, geom: &CircleGeometry) -> Self {
        PhasePoint { q: geom.reduce(q), p }
    }

    /// The label with position `u·a` and momentum `p(v)`.
    pub fn from_reduced(r: ReducedCoords, geom: &CircleGeometry) -> Self {
        PhasePoint::new(r.u * geom.a, geom.momentum_from_reduced(r.v), geom)
    }

    pub fn reduced(&self, geom: &CircleGeometry) -> ReducedCoords {
        ReducedCoords { u: self.q / geom.a, v: geom.reduced_momentum(self.p) }
    }
}

/// Dimensionless coordinates: `u` a position in units of `a`, and
/// `v = a(p − kℏ)/(2πℏ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoords {
    pub u: f64,
    pub v: f64,
}

/// A state expanded in the orthonormal basis `|n; k⟩ = a^{−1/2} e^{i(2πn/a + k)q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleState {
    pub geom: CircleGeometry,
    pub coeffs: BTreeMap<i64, Complex64>,
}

impl CircleState {
    pub fn new(geom: CircleGeometry, coeffs: BTreeMap<i64, Complex64>) -> Self {
        CircleState { geom, coeffs }
    }

    /// The basis vector `|n; k⟩`.
    pub fn basis(n: i64, geom: CircleGeometry) -> Self {
        CircleState { geom, coeffs: BTreeMap::from([(n, Complex64::new(1.0, 0.0))]) }
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self | other⟩`.
    pub fn inner(&self, other: &CircleState) -> Complex64 {
        self.coeffs.iter().map(|(n, c)| c.conj() * other.coeff(*n)).sum()
    }

    /// The wavefunction `Σ cₙ a^{−1/2} e^{i(2πn/a + k)q'}`.
    pub fn eval(&self, q_prime: f64) -> Complex64 {
        let g = &self.geom;
        self.coeffs
            .iter()
            .map(|(&n, &c)| c * Complex64::from_polar(1.0 / g.a.sqrt(), g.wavenumber(n) * q_prime))
            .sum()
    }
}

/// `ψ(q')` for the state `|q, p; k⟩`.
pub fn cs_wavefunction(label: PhasePoint, q_prime: f64, geom: &CircleGeometry, tol: f64) -> Result<Complex64> {
    let CircleGeometry { a, k, omega, hbar } = *geom;
    let PhasePoint { q, p } = label;
    let d = q - q_prime;
    let log_factor = Complex64::new(
        0.25 * (omega / (PI * hbar)).ln() - omega * d * d / (2.0 * hbar),
        p * (q_prime - q / 2.0) / hbar,
    );
    let z = Complex64::new(a * (k * hbar - p) / (2.0 * hbar), a * omega * d / (2.0 * hbar));
    Ok(theta3_scaled(z, Nome::from_log(geom.alpha())?, log_factor, tol)?.value)
}

/// Symmetric index window holding every `|cₙ|²` above `1e-16` of the peak.
pub fn default_n_range(label: PhasePoint, geom: &CircleGeometry) -> RangeInclusive<i64> {
    let n0 = geom.reduced_momentum(label.p).round() as i64;
    let scale = geom.a / (2.0 * PI * geom.hbar);
    let half = (6.0 * (geom.omega * geom.hbar).sqrt() * scale).ceil() as i64 + 4;
    n0 - half..=n0 + half
}

/// `cₙ = ⟨n; k | q, p; k⟩ = √(2πℏ/a) e^{i(p/(2ℏ) − κₙ)q} η̃₀(ℏκₙ − p)`, `κₙ = 2πn/a + k`,
/// with `η̃₀(s) = (πωℏ)^{−1/4} e^{−s²/(2ωℏ)}` the momentum-space ground state.
pub fn cs_coefficient(n: i64, label: PhasePoint, geom: &CircleGeometry) -> Complex64 {
    let CircleGeometry { a, omega, hbar, .. } = *geom;
    let kappa = geom.wavenumber(n);
    let s = hbar * kappa - label.p;
    let ln_mag = 0.5 * (2.0 * PI * hbar / a).ln() - 0.25 * (PI * omega * hbar).ln() - s * s / (2.0 * omega * hbar);
    Complex64::from_polar(ln_mag.exp(), (label.p / (2.0 * hbar) - kappa) * label.q)
}

pub fn cs_coefficients(label: PhasePoint, n_range: RangeInclusive<i64>, geom: &CircleGeometry) -> CircleState {
    let coeffs = n_range.map(|n| (n, cs_coefficient(n, label, geom))).collect();
    CircleState { geom: *geom, coeffs }
}

/// `⟨l1 | l2⟩ = ⟨q', p'; k | q, p; k⟩` for `l1 = (q', p')`, `l2 = (q, p)`:
///
/// ```text
/// (2/a)√(πℏ/ω) e^{ik(q'−q)} e^{i(qp − q'p')/(2ℏ)} e^{−[(ℏk−p)² + (ℏk−p')²]/(2ωℏ)}
///   · θ((π/a)[q' − q + (i/ω)(2ℏk − p − p')]; e^{−2π²/α})
/// ```
pub fn cs_overlap(l1: PhasePoint, l2: PhasePoint, geom: &CircleGeometry, tol: f64) -> Result<Complex64> {
    let CircleGeometry { a, k, omega, hbar } = *geom;
    let PhasePoint { q: q1, p: p1 } = l1;
    let PhasePoint { q: q2, p: p2 } = l2;
    let (s1, s2) = (hbar * k - p1, hbar * k - p2);
    let log_factor = Complex64::new(
        (2.0 / a * (PI * hbar / omega).sqrt()).ln() - (s1 * s1 + s2 * s2) / (2.0 * omega * hbar),
        k * (q1 - q2) + (q2 * p2 - q1 * p1) / (2.0 * hbar),
    );
    let z = PI / a * Complex64::new(q1 - q2, (s1 + s2) / omega);
    let nome = Nome::from_log(2.0 * PI * PI / geom.alpha())?;
    Ok(theta3_scaled(z, nome, log_factor, tol)?.value)
}

/// `‖|q, p; k⟩‖² = θ(a(ℏk − p)/(2ℏ); e^{−α/2})`.
pub fn cs_norm_sq(label: PhasePoint, geom: &CircleGeometry) -> f64 {
    let x = geom.a * (geom.hbar * geom.k - label.p) / (2.0 * geom.hbar);
    let nome = Nome::from_log(geom.alpha() / 2.0).expect("alpha > 0 by construction");
    theta3_accelerated(Complex64::new(x, 0.0), nome, DEFAULT_TOL).expect("modular route always converges").value.re
}

/// The same norm from the diagonal of the overlap kernel, i.e. the
/// `e^{−2π²/α}` side of the modular identity.
pub fn cs_norm_sq_dual(label: PhasePoint, geom: &CircleGeometry) -> f64 {
    cs_overlap(label, label, geom, DEFAULT_TOL).expect("modular route always converges").re
}

/// `M_{nm} = (1/2πℏ) ∫₀ᵃ dq ∫ dp c̄ₙ(q,p) cₘ(q,p)` for `|n|, |m| ≤ n_max`,
/// row/column `i` holding `n = i − n_max`. The identity matrix is expected.
///
/// Each entry's `p` window is centred on `ℏ(κₙ + κₘ)/2`, where the integrand
/// peaks; a window fixed at `ℏk` would cut off the outer basis states.
pub fn verify_resolution_of_unity(geom: &CircleGeometry, n_max: i64, quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    if n_max < 2 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be at least 2")));
    }
    let dim = (2 * n_max + 1) as usize;
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let n = i as i64 - n_max;
            let m = j as i64 - n_max;
            let centre = 0.5 * (geom.momentum_eigenvalue(n) + geom.momentum_eigenvalue(m));
            let f = |q: f64, p: f64| {
                let label = PhasePoint { q, p };
                cs_coefficient(n, label, geom).conj() * cs_coefficient(m, label, geom)
            };
            integrate_cylinder_about(f, geom, quad, centre).re
        })
        .collect();
    Ok(DMatrix::from_row_slice(dim, dim, &values))
}

/// Largest `|M − I|` entry.
pub fn max_identity_deviation(m: &DMatrix<f64>) -> f64 {
    let id = DMatrix::<f64>::identity(m.nrows(), m.ncols());
    (m - id).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_cylinder;
    use crate::wbz::{wbz_forward, LineFunction};
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const TOL: f64 = 1e-15;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn geoms() -> Vec<CircleGeometry> {
        vec![
            CircleGeometry::new(2.0, 0.4, 1.7, 0.8).unwrap(),
            CircleGeometry::from_alpha(0.3, 0.5).unwrap(),
            CircleGeometry::from_alpha(5.0, 0.0).unwrap(),
            CircleGeometry::from_alpha(40.0, 0.9).unwrap(),
        ]
    }

    #[test]
    fn wavefunction_matches_zak_sum() {
        let mut rng = StdRng::seed_from_u64(7);
        for g in geoms() {
            for _ in 0..10 {
                let label = PhasePoint::new(rng.gen_range(0.0..g.a), rng.gen_range(-3.0..3.0), &g);
                let qp = rng.gen_range(0.0..g.a);
                let closed = cs_wavefunction(label, qp, &g, TOL).unwrap();
                let eta = LineFunction::gaussian_cs(label.q, label.p, g.omega, g.hbar);
                let zak = wbz_forward(&eta, qp, g.k, &g, 1e-17).unwrap();
                assert!(rel(closed, zak) < 1e-9, "{g:?} {label:?} {qp}");
            }
        }
    }

    #[test]
    fn wavefunction_at_origin() {
        let g = CircleGeometry::new(3.0, 0.0, 0.6, 1.0).unwrap();
        let v = cs_wavefunction(PhasePoint { q: 0.0, p: 0.0 }, 0.0, &g, TOL).unwrap();
        let theta0: f64 = (-50i64..=50).map(|n| (-g.alpha() * (n * n) as f64).exp()).sum();
        let expect = (g.omega / PI).powf(0.25) * theta0;
        assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-14 * expect);
    }

    #[test]
    fn label_shift_by_period() {
        for g in geoms() {
            let label = PhasePoint { q: 0.7, p: 1.3 };
            let shifted = PhasePoint { q: 0.7 + g.a, p: 1.3 };
            let phase = Complex64::from_polar(1.0, label.p * g.a / (2.0 * g.hbar) - g.a * g.k);
            for &qp in &[0.1, 0.5 * g.a, 0.9 * g.a] {
                let a = cs_wavefunction(shifted, qp, &g, TOL).unwrap();
                let b = phase * cs_wavefunction(label, qp, &g, TOL).unwrap();
                assert!(rel(a, b) < 1e-10);
            }
        }
    }

    #[test]
    fn quasiperiodic_in_argument() {
        let g = CircleGeometry::new(2.0, 0.4, 1.7, 0.8).unwrap();
        let label = PhasePoint { q: 1.1, p: -0.4 };
        let a = cs_wavefunction(label, 0.3 + g.a, &g, TOL).unwrap();
        let b = cs_wavefunction(label, 0.3, &g, TOL).unwrap() * Complex64::from_polar(1.0, g.a * g.k);
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn coefficients_sum_to_norm() {
        for g in geoms() {
            for &v in &[0.0, 0.2, 0.5, 3.7] {
                let label = PhasePoint { q: 0.3, p: g.momentum_from_reduced(v) };
                let st = cs_coefficients(label, default_n_range(label, &g), &g);
                let closed = cs_norm_sq(label, &g);
                assert!((st.norm_sq() / closed - 1.0).abs() < 1e-12, "{g:?} v={v}");
            }
        }
    }

    #[test]
    fn coefficient_peak_at_momentum_lattice_point() {
        let g = CircleGeometry::from_alpha(3.0, 0.25).unwrap();
        for m in [-2i64, 0, 3] {
            let label = PhasePoint { q: 1.0, p: g.momentum_eigenvalue(m) };
            let st = cs_coefficients(label, default_n_range(label, &g), &g);
            let (argmax, _) = st.coeffs.iter().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())).unwrap();
            assert_eq!(*argmax, m);
        }
    }

    #[test]
    fn coefficients_by_projection() {
        let g = CircleGeometry::new(2.0, 0.4, 1.7, 0.8).unwrap();
        let label = PhasePoint { q: 0.6, p: 0.9 };
        let nodes = 256;
        for n in -3i64..=3 {
            let h = g.a / nodes as f64;
            let proj: Complex64 = (0..nodes)
                .map(|j| {
                    let x = j as f64 * h;
                    Complex64::from_polar(h / g.a.sqrt(), -g.wavenumber(n) * x) * cs_wavefunction(label, x, &g, TOL).unwrap()
                })
                .sum();
            let scale = cs_norm_sq(label, &g).sqrt();
            assert!((proj - cs_coefficient(n, label, &g)).norm() < 1e-10 * scale, "n={n}");
        }
    }

    #[test]
    fn wavefunction_equals_series() {
        for g in geoms() {
            let label = PhasePoint { q: 0.4, p: 0.8 };
            let st = cs_coefficients(label, default_n_range(label, &g), &g);
            for &x in &[0.0, 0.3 * g.a, 0.77 * g.a] {
                let a = cs_wavefunction(label, x, &g, TOL).unwrap();
                assert!(rel(st.eval(x), a) < 1e-9);
            }
        }
    }

    #[test]
    fn overlap_against_coefficient_series() {
        let mut rng = StdRng::seed_from_u64(11);
        for g in geoms() {
            for _ in 0..8 {
                let l1 = PhasePoint::new(rng.gen_range(0.0..g.a), rng.gen_range(-2.0..2.0), &g);
                let l2 = PhasePoint::new(rng.gen_range(0.0..g.a), rng.gen_range(-2.0..2.0), &g);
                let lo = *default_n_range(l1, &g).start().min(default_n_range(l2, &g).start());
                let hi = *default_n_range(l1, &g).end().max(default_n_range(l2, &g).end());
                let s1 = cs_coefficients(l1, lo..=hi, &g);
                let s2 = cs_coefficients(l2, lo..=hi, &g);
                let closed = cs_overlap(l1, l2, &g, TOL).unwrap();
                let series = s1.inner(&s2);
                let scale = (s1.norm_sq() * s2.norm_sq()).sqrt();
                assert!((closed - series).norm() < 1e-10 * scale, "{g:?}");
                let back = cs_overlap(l2, l1, &g, TOL).unwrap();
                assert!((back - closed.conj()).norm() < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn overlap_diagonal_and_dual_norm() {
        for g in geoms() {
            for v in [0.0, 0.1, 0.25, 0.5, 0.8, -2.3] {
                let label = PhasePoint { q: 0.5, p: g.momentum_from_reduced(v) };
                let a = cs_norm_sq(label, &g);
                let b = cs_norm_sq_dual(label, &g);
                assert!((a / b - 1.0).abs() < 1e-12, "{g:?} v={v}");
            }
        }
    }

    #[test]
    fn norm_special_values() {
        let g = CircleGeometry::new(1.5, 0.3, 2.0, 1.1).unwrap();
        let label = PhasePoint { q: 0.2, p: g.hbar * g.k };
        let series: f64 = (-60i64..=60).map(|n| (-g.a * g.a * g.omega * (n * n) as f64 / (4.0 * g.hbar)).exp()).sum();
        assert!((cs_norm_sq(label, &g) / series - 1.0).abs() < 1e-14);

        let wide = CircleGeometry::from_alpha(200.0, 0.0).unwrap();
        assert!((cs_norm_sq(PhasePoint { q: 0.0, p: 0.0 }, &wide) - 1.0).abs() < 1e-15);

        let tiny = CircleGeometry::from_alpha(0.01, 0.0).unwrap();
        let n = cs_norm_sq(PhasePoint { q: 0.0, p: 0.0 }, &tiny);
        // θ(0; e^{−s}) ≈ √(π/s) for small s
        assert!((n / (PI / 0.005f64).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_periodic_in_momentum() {
        let g = CircleGeometry::new(2.0, 0.4, 1.7, 0.8).unwrap();
        let step = 2.0 * PI * g.hbar / g.a;
        for &p in &[-1.0, 0.0, 0.35, 2.2] {
            let a = cs_norm_sq(PhasePoint { q: 0.0, p }, &g);
            let b = cs_norm_sq(PhasePoint { q: 0.0, p: p + 3.0 * step }, &g);
            assert!((a - b).abs() < 1e-13 * a);
        }
    }

    #[test]
    fn reproducing_kernel() {
        let g = CircleGeometry::from_alpha(2.0, 0.3).unwrap();
        let l1 = PhasePoint { q: 1.0, p: 0.4 };
        let l2 = PhasePoint { q: 4.0, p: 0.1 };
        let quad = QuadratureSpec::default();
        let f = |q: f64, p: f64| {
            let m = PhasePoint { q, p };
            cs_overlap(l1, m, &g, TOL).unwrap() * cs_overlap(m, l2, &g, TOL).unwrap()
        };
        let lhs = integrate_cylinder_about(f, &g, &quad, 0.25);
        let rhs = cs_overlap(l1, l2, &g, TOL).unwrap();
        assert!((lhs - rhs).norm() < 1e-8 * cs_norm_sq(l1, &g), "{lhs} vs {rhs}");
    }

    #[test]
    fn resolution_of_unity() {
        for alpha in [1.0, 15.0] {
            let g = CircleGeometry::from_alpha(alpha, 0.2).unwrap();
            let m = verify_resolution_of_unity(&g, 3, &QuadratureSpec::default()).unwrap();
            assert!(max_identity_deviation(&m) < 1e-9, "alpha={alpha}: {}", max_identity_deviation(&m));
        }
        let g = CircleGeometry::from_alpha(1.0, 0.0).unwrap();
        assert!(verify_resolution_of_unity(&g, 1, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn truncated_window_is_detected() {
        let g = CircleGeometry::from_alpha(1.0, 0.0).unwrap();
        // about two standard deviations of the p-marginal
        let quad = QuadratureSpec { p_halfwidth: 2f64.sqrt(), ..QuadratureSpec::default() };
        let m = verify_resolution_of_unity(&g, 2, &quad).unwrap();
        for i in 0..5 {
            assert!(m[(i, i)] < 0.96 && m[(i, i)] > 0.95, "{}", m[(i, i)]);
        }
    }

    #[test]
    fn unity_with_fixed_window_diagonal_zero() {
        // |c₀|² integrated over the window centred at ℏk
        let g = CircleGeometry::from_alpha(1.0, 0.0).unwrap();
        let v = integrate_cylinder(
            |q, p| Complex64::new(cs_coefficient(0, PhasePoint { q, p }, &g).norm_sqr(), 0.0),
            &g,
            &QuadratureSpec::default(),
        );
        assert!((v.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_coordinates_round_trip() {
        let g = CircleGeometry::new(2.0, 0.4, 1.7, 0.8).unwrap();
        let r = ReducedCoords { u: 0.3, v: -1.25 };
        let l = PhasePoint::from_reduced(r, &g);
        let back = l.reduced(&g);
        assert!((back.u - 0.3).abs() < 1e-15 && (back.v + 1.25).abs() < 1e-14);
        assert!(PhasePoint::new(-0.5, 0.0, &g).q > 0.0);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(q1 in 0.0..6.0f64, p1 in -3.0..3.0f64, q2 in 0.0..6.0f64, p2 in -3.0..3.0f64, alpha in 0.05..50.0f64) {
            let g = CircleGeometry::from_alpha(alpha, 0.1).unwrap();
            let l1 = PhasePoint::new(q1, p1, &g);
            let l2 = PhasePoint::new(q2, p2, &g);
            let o = cs_overlap(l1, l2, &g, TOL).unwrap();
            prop_assert!(o.norm_sqr() <= cs_norm_sq(l1, &g) * cs_norm_sq(l2, &g) * (1.0 + 1e-12));
        }
    }
}
