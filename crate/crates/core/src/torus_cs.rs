//! Coherent states on the n-torus `ℝⁿ/ℒ` for a lattice `ℒ = {Σ mᵢ aᵢ e⃗ᵢ}`
//! with unit (not necessarily orthogonal) basis vectors `e⃗ᵢ`.
//!
//! Coordinates:
//!
//! * positions `q` are lattice coordinates, `q⃗ = Σ qᵢ e⃗ᵢ`, the cell being `0 ≤ qᵢ < aᵢ`;
//! * quasimomenta `k` and momenta `p` are covariant components, `kᵢ = k⃗·e⃗ᵢ`,
//!   so `k⃗ = Σ kᵢ ε⃗ᵢ` in the dual basis and the dual cell is `0 ≤ kᵢ < 2π/aᵢ`.
//!
//! With `G` the Gram matrix and `Δ = diag(aᵢ)`: `p⃗·q⃗ = pᵀq`,
//! `|q⃗|² = qᵀGq`, `|p⃗|² = pᵀG⁻¹p`. In these coordinates the wavefunction is
//!
//! ```text
//! ψ(q') = (ω/πℏ)^{n/4} e^{−ip·q/(2ℏ)} e^{ip·q'/ℏ} e^{−ω(q−q')ᵀG(q−q')/(2ℏ)}
//!         · Θ(Δ[ℏk − p + iωG(q − q')]/(2ℏ) | Ω),      Ω = i(ω/2πℏ) ΔGΔ,
//! ```
//!
//! and overlaps use the dual period matrix `Ω' = −2Ω⁻¹ = i(4πℏ/ω) Δ⁻¹G⁻¹Δ⁻¹`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{periodic_trapezoid_nodes, simpson_nodes, QuadratureSpec};
use crate::theta::{theta_nd_scaled, PeriodMatrix};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 3;

/// Basis directions and lengths of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    /// Unit basis vectors `e⃗ᵢ`, one per column, in Cartesian components.
    basis: DMatrix<f64>,
    lengths: Vec<f64>,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl LatticeSpec {
    /// `basis[i]` is `e⃗ᵢ` in Cartesian components.
    pub fn new(basis: &[Vec<f64>], lengths: &[f64]) -> Result<Self> {
        let n = basis.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidGeometry(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        if lengths.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: lengths.len() });
        }
        for (i, e) in basis.iter().enumerate() {
            if e.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: e.len() });
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGeometry(format!("basis vector {i} has norm {norm}")));
            }
        }
        if let Some(a) = lengths.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidGeometry(format!("lattice length {a} must be positive")));
        }
        let e = DMatrix::from_fn(n, n, |r, c| basis[c][r]);
        let gram = e.transpose() * &e;
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidGeometry("basis vectors are linearly dependent".into()))?
            .inverse();
        Ok(LatticeSpec { basis: e, lengths: lengths.to_vec(), gram, gram_inv })
    }

    /// A lattice with the given Gram matrix (unit diagonal) realised by a Cholesky factor.
    pub fn from_gram(gram: &DMatrix<f64>, lengths: &[f64]) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: gram.ncols() });
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidGeometry("Gram matrix is not positive definite".into()))?;
        let e = chol.l().transpose();
        let basis: Vec<Vec<f64>> = (0..n).map(|c| e.column(c).iter().copied().collect()).collect();
        Self::new(&basis, lengths)
    }

    /// Orthogonal lattice `e⃗ᵢ = x̂ᵢ`.
    pub fn orthogonal(lengths: &[f64]) -> Result<Self> {
        Self::from_gram(&DMatrix::identity(lengths.len(), lengths.len()), lengths)
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Basis vectors as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `gᵢⱼ = e⃗ᵢ·e⃗ⱼ`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// `Δ = diag(aᵢ)`.
    pub fn delta(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.lengths))
    }

    /// Dual basis `ε⃗ᵢ` (columns), `ε⃗ᵢ·e⃗ⱼ = δᵢⱼ`.
    pub fn dual_basis(&self) -> DMatrix<f64> {
        &self.basis * &self.gram_inv
    }

    /// `g = det G`.
    pub fn det_gram(&self) -> f64 {
        self.gram.determinant()
    }

    /// `A = Π aᵢ`.
    pub fn length_product(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Cell volume `√g·A`.
    pub fn cell_volume(&self) -> f64 {
        self.det_gram().sqrt() * self.length_product()
    }
}

/// Lattice, quasimomentum (covariant components), `ω` and `ℏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGeometry {
    pub lattice: LatticeSpec,
    pub k: Vec<f64>,
    pub omega: f64,
    pub hbar: f64,
}

impl TorusGeometry {
    pub fn new(lattice: LatticeSpec, k: Vec<f64>, omega: f64, hbar: f64) -> Result<Self> {
        let n = lattice.dim();
        if k.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: k.len() });
        }
        for (i, (&ki, &ai)) in k.iter().zip(lattice.lengths()).enumerate() {
            if !(0.0..2.0 * PI / ai).contains(&ki) {
                return Err(Error::InvalidGeometry(format!("k[{i}] = {ki} outside [0, 2π/a)")));
            }
        }
        if !(omega > 0.0 && omega.is_finite() && hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidGeometry(format!("omega = {omega}, hbar = {hbar} must be positive")));
        }
        Ok(TorusGeometry { lattice, k, omega, hbar })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// `Ω = i(ω/2πℏ) ΔGΔ`.
    pub fn period_matrix(&self) -> Result<PeriodMatrix> {
        let d = self.lattice.delta();
        let m = (&d * self.lattice.gram() * &d) * (self.omega / (2.0 * PI * self.hbar));
        PeriodMatrix::new(m.map(|x| Complex64::new(0.0, x)))
    }

    /// `Ω' = −2Ω⁻¹ = i(4πℏ/ω) Δ⁻¹G⁻¹Δ⁻¹`.
    pub fn dual_period_matrix(&self) -> Result<PeriodMatrix> {
        let dinv = DMatrix::from_diagonal(&DVector::from_iterator(self.dim(), self.lattice.lengths().iter().map(|a| 1.0 / a)));
        let m = (&dinv * self.lattice.gram_inverse() * &dinv) * (4.0 * PI * self.hbar / self.omega);
        PeriodMatrix::new(m.map(|x| Complex64::new(0.0, x)))
    }

    /// Covariant wavevector `κ = k + 2πΔ⁻¹m` of the plane wave labelled by `m ∈ ℤⁿ`.
    pub fn wavevector(&self, m: &[i64]) -> Vec<f64> {
        self.k
            .iter()
            .zip(self.lattice.lengths())
            .zip(m)
            .map(|((k, a), &mi)| k + 2.0 * PI * mi as f64 / a)
            .collect()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() })
        }
    }
}

/// A phase-space label `(q, p)`: lattice coordinates and covariant momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl TorusPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        TorusPoint { q, p }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * m * &v)[(0, 0)]
}

/// `ψ(q')` for the state `|q, p; k⟩` on the torus.
pub fn torus_cs_wavefunction(label: &TorusPoint, q_prime: &[f64], geom: &TorusGeometry, tol: f64) -> Result<Complex64> {
    geom.check(&label.q)?;
    geom.check(&label.p)?;
    geom.check(q_prime)?;
    let n = geom.dim() as f64;
    let (omega, hbar) = (geom.omega, geom.hbar);
    let d: Vec<f64> = label.q.iter().zip(q_prime).map(|(a, b)| a - b).collect();
    let log_factor = Complex64::new(
        n / 4.0 * (omega / (PI * hbar)).ln() - omega * quad_form(geom.lattice.gram(), &d) / (2.0 * hbar),
        (dot(&label.p, q_prime) - dot(&label.p, &label.q) / 2.0) / hbar,
    );
    let gd = geom.lattice.gram() * DVector::from_column_slice(&d);
    let z: Vec<Complex64> = (0..geom.dim())
        .map(|i| {
            let a = geom.lattice.lengths()[i];
            Complex64::new(hbar * geom.k[i] - label.p[i], omega * gd[i]) * (a / (2.0 * hbar))
        })
        .collect();
    Ok(theta_nd_scaled(&z, &geom.period_matrix()?, log_factor, tol)?.value)
}

fn overlap_prefactor_ln(geom: &TorusGeometry) -> f64 {
    let n = geom.dim() as f64;
    n * 2f64.ln() - geom.lattice.cell_volume().ln() + n / 2.0 * (PI * geom.hbar / geom.omega).ln()
}

/// `⟨l1 | l2⟩` with `l1 = (q', p')`, `l2 = (q, p)`:
///
/// ```text
/// 2ⁿ/(√g A) (πℏ/ω)^{n/2} e^{i(p·q − p'·q')/(2ℏ)} e^{ik·(q' − q)} e^{−[|ℏk − p'|² + |ℏk − p|²]/(2ωℏ)}
///   · Θ(πΔ⁻¹[q' − q + (i/ω)G⁻¹(2ℏk − p − p')] | Ω')
/// ```
pub fn torus_overlap(l1: &TorusPoint, l2: &TorusPoint, geom: &TorusGeometry, tol: f64) -> Result<Complex64> {
    for v in [&l1.q, &l1.p, &l2.q, &l2.p] {
        geom.check(v)?;
    }
    let hbar = geom.hbar;
    let omega = geom.omega;
    let s1: Vec<f64> = geom.k.iter().zip(&l1.p).map(|(k, p)| hbar * k - p).collect();
    let s2: Vec<f64> = geom.k.iter().zip(&l2.p).map(|(k, p)| hbar * k - p).collect();
    let ginv = geom.lattice.gram_inverse();
    let log_factor = Complex64::new(
        overlap_prefactor_ln(geom) - (quad_form(ginv, &s1) + quad_form(ginv, &s2)) / (2.0 * omega * hbar),
        (dot(&l2.p, &l2.q) - dot(&l1.p, &l1.q)) / (2.0 * hbar) + geom.k.iter().zip(&l1.q).zip(&l2.q).map(|((k, a), b)| k * (a - b)).sum::<f64>(),
    );
    let sum: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
    let gs = ginv * DVector::from_column_slice(&sum);
    let z: Vec<Complex64> = (0..geom.dim())
        .map(|i| Complex64::new(l1.q[i] - l2.q[i], gs[i] / omega) * (PI / geom.lattice.lengths()[i]))
        .collect();
    Ok(theta_nd_scaled(&z, &geom.dual_period_matrix()?, log_factor, tol)?.value)
}

/// `⟨q, p; k | q, p; k⟩ = 2ⁿ/(√g A) (πℏ/ω)^{n/2} e^{−|ℏk − p|²/(ωℏ)} Θ(i(2π/ω)Δ⁻¹G⁻¹(ℏk − p) | Ω')`.
pub fn torus_norm_sq(label: &TorusPoint, geom: &TorusGeometry, tol: f64) -> Result<f64> {
    geom.check(&label.p)?;
    let (omega, hbar) = (geom.omega, geom.hbar);
    let s: Vec<f64> = geom.k.iter().zip(&label.p).map(|(k, p)| hbar * k - p).collect();
    let ginv = geom.lattice.gram_inverse();
    let log_factor = Complex64::new(overlap_prefactor_ln(geom) - quad_form(ginv, &s) / (omega * hbar), 0.0);
    let gs = ginv * DVector::from_column_slice(&s);
    let z: Vec<Complex64> = (0..geom.dim())
        .map(|i| Complex64::new(0.0, 2.0 * PI / omega * gs[i] / geom.lattice.lengths()[i]))
        .collect();
    Ok(theta_nd_scaled(&z, &geom.dual_period_matrix()?, log_factor, tol)?.value.re)
}

/// `⟨m; k | q, p; k⟩` for the plane wave `(√g A)^{−1/2} e^{iκ·q'}`:
/// `(2πℏ)^{n/2} (√g A)^{−1/2} e^{i(p/(2ℏ) − κ)·q} (πωℏ)^{−n/4} e^{−|ℏκ − p|²/(2ωℏ)}`.
pub fn torus_cs_coefficient(m: &[i64], label: &TorusPoint, geom: &TorusGeometry) -> Complex64 {
    let n = geom.dim() as f64;
    let (omega, hbar) = (geom.omega, geom.hbar);
    let kappa = geom.wavevector(m);
    let s: Vec<f64> = kappa.iter().zip(&label.p).map(|(k, p)| hbar * k - p).collect();
    let ln_mag = n / 2.0 * (2.0 * PI * hbar).ln() - 0.5 * geom.lattice.cell_volume().ln() - n / 4.0 * (PI * omega * hbar).ln()
        - quad_form(geom.lattice.gram_inverse(), &s) / (2.0 * omega * hbar);
    let phase: f64 = label.q.iter().zip(&label.p).zip(&kappa).map(|((q, p), k)| (p / (2.0 * hbar) - k) * q).sum();
    Complex64::from_polar(ln_mag.exp(), phase)
}

/// Slow reference for [`torus_cs_wavefunction`]: the periodisation
/// `Σ_{a⃗∈ℒ} e^{ia⃗·k⃗} η_{q⃗,p⃗}(q⃗' − a⃗)` of the line Gaussian, summed in
/// Cartesian components over `|mᵢ| ≤ reach`.
pub fn torus_lattice_sum(label: &TorusPoint, q_prime: &[f64], geom: &TorusGeometry, reach: i64) -> Result<Complex64> {
    geom.check(&label.q)?;
    geom.check(&label.p)?;
    geom.check(q_prime)?;
    let e = geom.lattice.basis();
    let eps = geom.lattice.dual_basis();
    let q = e * DVector::from_column_slice(&label.q);
    let x0 = e * DVector::from_column_slice(q_prime);
    let p = &eps * DVector::from_column_slice(&label.p);
    let k = &eps * DVector::from_column_slice(&geom.k);
    let norm = (geom.omega / (PI * geom.hbar)).powf(geom.dim() as f64 / 4.0);
    let mut total = Complex64::new(0.0, 0.0);
    for m in multi_indices(geom.dim(), reach) {
        let shift: Vec<f64> = m.iter().zip(geom.lattice.lengths()).map(|(&mi, a)| mi as f64 * a).collect();
        let a_vec = e * DVector::from_column_slice(&shift);
        let x = &x0 - &a_vec;
        let phase = a_vec.dot(&k) + p.dot(&(&x - &q * 0.5)) / geom.hbar;
        let r2 = (&x - &q).norm_squared();
        total += Complex64::from_polar(norm * (-geom.omega * r2 / (2.0 * geom.hbar)).exp(), phase);
    }
    Ok(total)
}

/// All multi-indices of `[−n_max, n_max]ⁿ`, last index fastest.
pub fn multi_indices(dim: usize, n_max: i64) -> Vec<Vec<i64>> {
    let side = 2 * n_max + 1;
    (0..side.pow(dim as u32))
        .map(|mut idx| {
            let mut m = vec![0i64; dim];
            for slot in m.iter_mut().rev() {
                *slot = idx % side - n_max;
                idx /= side;
            }
            m
        })
        .collect()
}

/// Unity matrix with the default quadrature.
pub fn verify_torus_unity(geom: &TorusGeometry, n_max: i64) -> Result<DMatrix<f64>> {
    verify_torus_unity_with(geom, n_max, &QuadratureSpec { q_points: 32, p_points: 128, ..QuadratureSpec::default() })
}

/// `M_{mm'} = (2πℏ)^{−n} ∫_{𝕋ⁿ} d⃗q ∫ d⃗p c̄ₘ cₘ'` over `[−n_max, n_max]ⁿ`,
/// in the order of [`multi_indices`]. For `n ≤ 2`.
///
/// In lattice coordinates `d⃗q d⃗p = dq dp` (the `√g` factors cancel). The
/// integrand `c̄ₘ(q,p) cₘ'(q,p)` is a product of a phase in `q` and a
/// Gaussian in `p`, so the `2n`-dimensional tensor rule is evaluated as
/// `∫∫F = ∫F(q, p₀)dq · ∫F(q₀, p)dp / F(q₀, p₀)`, each factor a tensor
/// rule over `n` dimensions (trapezoid in `q`, Simpson in `p` about `p₀`).
pub fn verify_torus_unity_with(geom: &TorusGeometry, n_max: i64, quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let n = geom.dim();
    if n > 2 {
        return Err(Error::InvalidArgument(format!("torus unity check supports n ≤ 2, got {n}")));
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be positive")));
    }
    let idx = multi_indices(n, n_max);
    let dim = idx.len();
    let q_axes: Vec<Vec<(f64, f64)>> =
        geom.lattice.lengths().iter().map(|&a| periodic_trapezoid_nodes(0.0, a, quad.q_points)).collect();
    let g = geom.lattice.gram();
    let scale = (geom.omega * geom.hbar).sqrt();

    let values: Vec<f64> = (0..dim * dim)
        .into_par_iter()
        .map(|flat| {
            let (m1, m2) = (&idx[flat / dim], &idx[flat % dim]);
            let k1 = geom.wavevector(m1);
            let k2 = geom.wavevector(m2);
            let p0: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| geom.hbar * (a + b) / 2.0).collect();
            let q0 = vec![0.0; n];
            let f = |q: &[f64], p: &[f64]| {
                let l = TorusPoint { q: q.to_vec(), p: p.to_vec() };
                torus_cs_coefficient(m1, &l, geom).conj() * torus_cs_coefficient(m2, &l, geom)
            };
            let p_axes: Vec<Vec<(f64, f64)>> = (0..n)
                .map(|i| {
                    let half = quad.p_halfwidth * scale * g[(i, i)].sqrt();
                    simpson_nodes(p0[i] - half, p0[i] + half, quad.p_points)
                })
                .collect();
            let q_int = tensor_sum(&q_axes, |q| f(q, &p0));
            let p_int = tensor_sum(&p_axes, |p| f(&q0, p));
            let norm = f(&q0, &p0);
            (q_int * p_int / norm).re / (2.0 * PI * geom.hbar).powi(n as i32)
        })
        .collect();
    Ok(DMatrix::from_row_slice(dim, dim, &values))
}

/// `∫_{cell} ψ̄₁ψ₂ d⃗q` by the tensor trapezoid rule with `points` nodes per axis.
/// The integrand is periodic, so the rule converges spectrally.
pub fn torus_overlap_quadrature(l1: &TorusPoint, l2: &TorusPoint, geom: &TorusGeometry, points: usize, tol: f64) -> Result<Complex64> {
    let nodes: Vec<Vec<(f64, f64)>> =
        geom.lattice.lengths().iter().map(|&a| periodic_trapezoid_nodes(0.0, a, points)).collect();
    let mut err = None;
    let sum = tensor_sum(&nodes, |x| {
        match (torus_cs_wavefunction(l1, x, geom, tol), torus_cs_wavefunction(l2, x, geom, tol)) {
            (Ok(a), Ok(b)) => a.conj() * b,
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(sum * geom.lattice.det_gram().sqrt()),
    }
}

/// `Σ` over the tensor grid of `f(x) Π wᵢ`.
fn tensor_sum<F: FnMut(&[f64]) -> Complex64>(axes: &[Vec<(f64, f64)>], mut f: F) -> Complex64 {
    let mut point = vec![0.0; axes.len()];
    let mut total = Complex64::new(0.0, 0.0);
    let mut counters = vec![0usize; axes.len()];
    loop {
        let mut w = 1.0;
        for (i, &c) in counters.iter().enumerate() {
            point[i] = axes[i][c].0;
            w *= axes[i][c].1;
        }
        total += f(&point) * w;
        let mut i = axes.len();
        loop {
            if i == 0 {
                return total;
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < axes[i].len() {
                break;
            }
            counters[i] = 0;
        }
    }
}
