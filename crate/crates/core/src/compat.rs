//! The circle coherent states `ξ ↦ Σⱼ ξ^{−j} e^{−j²/2} |j⟩`, labelled by
//! `ξ ∈ ℂ \ {0}`, and a numerical check that they are the
//! analytic states `|z*; k⟩` at `ω = ℏ = 1`, `a = 2π`.
//!
//! The matching is `ξ = e^{iz*/ω}`; with `z* = ωq + ip` that is
//! `l = p/ω`, `φ = q`. Integer `j` (boson) needs `k = 0`, half-integer
//! `j` (fermion) needs `k = 1/2`, so that `j = n + k` runs over the momentum
//! eigenvalues `ℏ(2πn/a + k)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::Serialize;

use crate::circle_cs::{cs_coefficient, PhasePoint};
use crate::error::{Error, Result};
use crate::fock_bargmann::BargmannPoint;
use crate::wbz::CircleGeometry;

/// Integer or half-integer `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Boson,
    Fermion,
}

impl Sector {
    /// `j − n`, equal to the quasimomentum `k` of the matching circle states.
    pub fn offset(self) -> f64 {
        match self {
            Sector::Boson => 0.0,
            Sector::Fermion => 0.5,
        }
    }

    /// Sector of `j`, if it is an integer or half-integer.
    pub fn of(j: f64) -> Option<Sector> {
        let twice = 2.0 * j;
        if twice.fract() != 0.0 {
            None
        } else if j.fract() == 0.0 {
            Some(Sector::Boson)
        } else {
            Some(Sector::Fermion)
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boson" => Ok(Sector::Boson),
            "fermion" => Ok(Sector::Fermion),
            other => Err(Error::InvalidArgument(format!("unknown sector '{other}' (boson|fermion)"))),
        }
    }
}

/// `ξ = e^{−l + iφ}` and the sector of the index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KowalskiLabel {
    pub l: f64,
    pub phi: f64,
    pub sector: Sector,
}

impl KowalskiLabel {
    /// `phi` is reduced into `[0, 2π)`.
    pub fn new(l: f64, phi: f64, sector: Sector) -> Self {
        KowalskiLabel { l, phi: phi.rem_euclid(2.0 * PI), sector }
    }

    pub fn xi(&self) -> Complex64 {
        Complex64::from_polar((-self.l).exp(), self.phi)
    }
}

/// `ξ^{−j} e^{−j²/2} = exp(jl − ijφ − j²/2)` on the principal branch of `ln ξ`.
pub fn kowalski_coefficient(j: f64, label: &KowalskiLabel) -> Complex64 {
    Complex64::from_polar((j * label.l - j * j / 2.0).exp(), -j * label.phi)
}

/// Coefficients keyed by `n`, with `j = n + offset(sector)`.
pub fn kowalski_coefficients(label: &KowalskiLabel, n_range: RangeInclusive<i64>) -> BTreeMap<i64, Complex64> {
    let off = label.sector.offset();
    n_range.map(|n| (n, kowalski_coefficient(n as f64 + off, label))).collect()
}

/// Symmetric window about the peak `j ≈ l` outside which `|ξ^{−j}e^{−j²/2}|` is below `1e-16` of the peak.
pub fn default_j_window(label: &KowalskiLabel) -> RangeInclusive<i64> {
    let centre = label.l.round() as i64;
    let half = (2.0 * 16.0 * 10f64.ln()).sqrt().ceil() as i64 + 1;
    centre - half..=centre + half
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub label: KowalskiLabel,
    /// Least-squares `c` in `⟨j | z*; k⟩ ≈ c ξ^{−j} e^{−j²/2}`.
    pub constant: Complex64,
    /// `max_j |ratioⱼ − c| / |c|`.
    pub max_deviation: f64,
    pub expected_constant: f64,
    pub terms: usize,
}

impl EquivalenceReport {
    pub fn constant_error(&self) -> f64 {
        (self.constant - self.expected_constant).norm()
    }
}

/// The circle geometry the label should match: `a = 2π`, `ω = ℏ = 1`, `k` from the sector.
pub fn matching_geometry(sector: Sector) -> CircleGeometry {
    CircleGeometry::new(2.0 * PI, sector.offset(), 1.0, 1.0).expect("fixed geometry is valid")
}

/// Compares against `|z*; k⟩` in the matching geometry.
pub fn equivalence_check(label: &KowalskiLabel) -> Result<EquivalenceReport> {
    equivalence_check_with(label, &matching_geometry(label.sector))
}

/// Compares against `|z*; k⟩` in an arbitrary geometry with `2πℏ/a = 1`, so
/// that `j = n + ℏk` still labels the momentum eigenvalues.
/// With `ω ≠ 1` the ratios pick up a `j`-dependence.
pub fn equivalence_check_with(label: &KowalskiLabel, geom: &CircleGeometry) -> Result<EquivalenceReport> {
    let unit = 2.0 * PI * geom.hbar / geom.a;
    if (unit - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidGeometry(format!("momentum spacing 2πℏ/a = {unit}, need 1")));
    }
    let j_shift = geom.hbar * geom.k;
    match Sector::of(j_shift) {
        Some(s) if s == label.sector => {}
        _ => {
            return Err(Error::SectorMismatch(format!(
                "{:?} indices need k = {}, got momentum offset ℏk = {j_shift}",
                label.sector,
                label.sector.offset()
            )))
        }
    }

    let phase = PhasePoint { q: label.phi, p: label.l * geom.omega };
    let z_star = BargmannPoint::from_phase(phase, geom).z_star();
    let to_analytic = (-Complex64::i() * phase.p * z_star / (2.0 * geom.omega * geom.hbar)).exp();

    let window = default_j_window(label);
    let kow = kowalski_coefficients(label, window.clone());
    let ratios: Vec<(Complex64, Complex64)> = window
        .map(|n| {
            let analytic = to_analytic * cs_coefficient(n, phase, geom);
            (kow[&n], analytic)
        })
        .collect();
    let (num, den) = ratios.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(num, den), (k, a)| {
        (num + k.conj() * a, den + k.norm_sqr())
    });
    let constant = num / den;
    let peak = ratios.iter().map(|(k, _)| k.norm()).fold(0.0, f64::max);
    let max_deviation = ratios
        .iter()
        .filter(|(k, _)| k.norm() > 1e-16 * peak)
        .map(|(k, a)| (a / k - constant).norm() / constant.norm())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        label: *label,
        constant,
        max_deviation,
        expected_constant: PI.powf(-0.25),
        terms: ratios.len(),
    })
}
