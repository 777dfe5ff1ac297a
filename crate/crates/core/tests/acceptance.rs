//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;

use cylinder_cs::circle_cs::{cs_coefficients, cs_norm_sq, cs_wavefunction, default_n_range, max_identity_deviation, verify_resolution_of_unity, PhasePoint};
use cylinder_cs::compat::{equivalence_check, KowalskiLabel, Sector};
use cylinder_cs::numerics::{periodic_trapezoid, QuadratureSpec};
use cylinder_cs::observables::{expect_momentum, probability_density, uncertainty_report};
use cylinder_cs::theta::{theta3, Nome};
use cylinder_cs::torus_cs::{
    multi_indices, torus_cs_coefficient, torus_cs_wavefunction, torus_norm_sq, torus_overlap, torus_overlap_quadrature,
    LatticeSpec, TorusGeometry, TorusPoint,
};
use cylinder_cs::wbz::{wbz_forward, wbz_inverse, CircleGeometry, LineFunction};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const ALPHAS: [f64; 6] = [0.01, 0.1, 1.0, 5.0, 15.0, 100.0];

fn v_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// θ(z; e^{−2π²/α}) = (a/2)√(ω/πℏ) e^{−ωa²z²/(4π²ℏ)} θ(−i ωa²z/(4πℏ); e^{−α/2}),
/// both sides as plain series. With a = 2π, ℏ = 1: prefactor √(α/2π), exponent αz²/(2π²).
fn functional_equation() -> cylinder_cs::Result<Outcome> {
    let zs = [
        Complex64::new(0.3, 0.1),
        Complex64::new(-1.1, 0.4),
        Complex64::new(0.0, 0.0),
        Complex64::new(2.0, -0.3),
    ];
    let alphas = [0.01, 0.5, 2.0, 20.0, 100.0];
    let mut worst: f64 = 0.0;
    for &alpha in &alphas {
        for &z in &zs {
            let lhs = theta3(z, Nome::from_log(2.0 * PI * PI / alpha)?, 1e-16)?.value;
            let arg = -Complex64::i() * alpha * z / (2.0 * PI);
            let pre = (alpha / (2.0 * PI)).sqrt() * (-alpha * z * z / (2.0 * PI * PI)).exp();
            let rhs = pre * theta3(arg, Nome::from_log(alpha / 2.0)?, 1e-16)?.value;
            worst = worst.max((lhs - rhs).norm() / lhs.norm());
        }
    }
    Ok(outcome(worst < 1e-10, format!("20 (z, alpha) pairs, max relative deviation {worst:.2e}")))
}

fn norm_vs_series() -> cylinder_cs::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for &alpha in &ALPHAS {
        let g = CircleGeometry::from_alpha(alpha, 0.0)?;
        for v in v_grid() {
            let label = PhasePoint::new(0.7, g.momentum_from_reduced(v), &g);
            let series = cs_coefficients(label, default_n_range(label, &g), &g).norm_sq();
            worst = worst.max((cs_norm_sq(label, &g) / series - 1.0).abs());
        }
    }
    Ok(outcome(worst < 1e-10, format!("6x11 grid, max relative deviation {worst:.2e}")))
}

fn resolution_of_unity() -> cylinder_cs::Result<Outcome> {
    let mut devs = Vec::new();
    for alpha in [1.0, 15.0] {
        let g = CircleGeometry::from_alpha(alpha, 0.0)?;
        let m = verify_resolution_of_unity(&g, 5, &QuadratureSpec::default())?;
        devs.push(max_identity_deviation(&m));
    }
    let worst = devs.iter().cloned().fold(0.0, f64::max);
    Ok(outcome(worst < 1e-6, format!("|n| <= 5, max |M - I| = {:.2e} (alpha 1), {:.2e} (alpha 15)", devs[0], devs[1])))
}

fn momentum_pinning() -> cylinder_cs::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for &alpha in &ALPHAS {
        for k in [0.0, 0.3] {
            let g = CircleGeometry::from_alpha(alpha, k)?;
            for v in [0.0, 0.5] {
                let p = g.momentum_from_reduced(v);
                let err = (expect_momentum(p, &g)? - p).abs() / (g.hbar / g.a);
                worst = worst.max(err);
            }
        }
    }
    Ok(outcome(worst < 1e-12, format!("max |<P> - p| = {worst:.2e} hbar/a")))
}

fn uncertainty_limits() -> cylinder_cs::Result<Outcome> {
    let g = CircleGeometry::from_alpha(0.01, 0.0)?;
    let targets = [(0.0, 0.5f64.sqrt()), (0.5, 0.75f64.sqrt()), (0.25, 1.0)];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (v, want) in targets {
        let d = uncertainty_report(v, &g)?.delta_fn;
        worst = worst.max((d / want - 1.0).abs());
        parts.push(format!("D({v})={d:.6}"));
    }
    Ok(outcome(worst < 0.01, format!("alpha 0.01: {}, worst relative {worst:.2e}", parts.join(", "))))
}

fn uncertainty_band() -> cylinder_cs::Result<Outcome> {
    let mut inside = true;
    let mut max_at_100: f64 = 0.0;
    for &alpha in &ALPHAS {
        let g = CircleGeometry::from_alpha(alpha, 0.0)?;
        for v in v_grid() {
            let r = uncertainty_report(v, &g)?;
            inside &= r.strictly_inside();
            if alpha == 100.0 {
                max_at_100 = max_at_100.max(r.delta_fn);
            }
        }
    }
    Ok(outcome(
        inside && max_at_100 < 0.52,
        format!("strictly inside (hbar/2, hbar) on 6x11 grid: {inside}; max D at alpha 100 = {max_at_100:.6} hbar"),
    ))
}

fn dual_route() -> cylinder_cs::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for &alpha in &ALPHAS {
        let g = CircleGeometry::from_alpha(alpha, 0.0)?;
        for v in v_grid() {
            let r = uncertainty_report(v, &g)?;
            worst = worst.max((r.delta_fn_composed / r.delta_fn - 1.0).abs());
        }
    }
    Ok(outcome(worst < 1e-10, format!("6x11 grid, max relative deviation {worst:.2e}")))
}

fn density_normalization() -> cylinder_cs::Result<Outcome> {
    let a = 2.0 * PI;
    let mut worst: f64 = 0.0;
    for alpha in [0.2, 5.0, 15.0, 100.0] {
        for v in [0.0, 0.25, 0.5] {
            let integral = periodic_trapezoid(
                |u| Complex64::new(a * probability_density(u - 0.5, v, alpha, a).unwrap(), 0.0),
                0.0,
                1.0,
                512,
            );
            worst = worst.max((integral.re - 1.0).abs());
        }
    }
    let alpha = 100.0;
    let mut gauss_dev: f64 = 0.0;
    for i in 0..=400 {
        let u = i as f64 / 400.0;
        let p = a * probability_density(u - 0.5, 0.0, alpha, a)?;
        let pure = (2.0 * alpha / PI).sqrt() * (-2.0 * alpha * (u - 0.5).powi(2)).exp();
        gauss_dev = gauss_dev.max((p - pure).abs());
    }
    Ok(outcome(
        worst < 1e-8 && gauss_dev < 1e-4,
        format!("max |integral - 1| = {worst:.2e}; alpha 100 vs pure Gaussian max {gauss_dev:.2e}"),
    ))
}

fn torus() -> cylinder_cs::Result<Outcome> {
    let tol = 1e-15;
    let ortho = TorusGeometry::new(LatticeSpec::orthogonal(&[2.0, 3.0])?, vec![0.5, 0.2], 0.8, 1.1)?;
    let c1 = CircleGeometry::new(2.0, 0.5, 0.8, 1.1)?;
    let c2 = CircleGeometry::new(3.0, 0.2, 0.8, 1.1)?;
    let mut rng = StdRng::seed_from_u64(20);
    let mut fact: f64 = 0.0;
    for _ in 0..20 {
        let q = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..3.0)];
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let x = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..3.0)];
        let t = torus_cs_wavefunction(&TorusPoint::new(q.to_vec(), p.to_vec()), &x, &ortho, tol)?;
        let prod = cs_wavefunction(PhasePoint { q: q[0], p: p[0] }, x[0], &c1, tol)?
            * cs_wavefunction(PhasePoint { q: q[1], p: p[1] }, x[1], &c2, tol)?;
        fact = fact.max((t - prod).norm() / prod.norm());
    }

    let hex = LatticeSpec::new(&[vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]], &[2.0, 1.6])?;
    let g = TorusGeometry::new(hex, vec![0.4, 1.1], 1.3, 0.9)?;
    let l1 = TorusPoint::new(vec![0.5, 0.4], vec![0.3, -0.2]);
    let l2 = TorusPoint::new(vec![1.2, 1.1], vec![-0.4, 0.6]);
    let closed = torus_overlap(&l1, &l2, &g, tol)?;
    let quad = torus_overlap_quadrature(&l1, &l2, &g, 48, tol)?;
    let overlap_dev = (closed - quad).norm() / closed.norm();
    let series: f64 = multi_indices(2, 14).iter().map(|m| torus_cs_coefficient(m, &l1, &g).norm_sqr()).sum();
    let norm_dev = (torus_norm_sq(&l1, &g, tol)? / series - 1.0).abs();
    Ok(outcome(
        fact < 1e-10 && overlap_dev < 1e-7 && norm_dev < 1e-7,
        format!("factorization {fact:.2e}; skewed overlap vs quadrature {overlap_dev:.2e}; norm vs series {norm_dev:.2e}"),
    ))
}

fn kowalski() -> cylinder_cs::Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(10);
    let mut dev: f64 = 0.0;
    let mut cerr: f64 = 0.0;
    for sector in [Sector::Boson, Sector::Fermion] {
        for _ in 0..10 {
            let label = KowalskiLabel::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0 * PI), sector);
            let r = equivalence_check(&label)?;
            dev = dev.max(r.max_deviation);
            cerr = cerr.max(r.constant_error());
        }
    }
    Ok(outcome(
        dev < 1e-12 && cerr < 1e-12,
        format!("boson and fermion: ratio spread {dev:.2e}, |c - pi^(-1/4)| {cerr:.2e}"),
    ))
}

fn wbz_round_trip() -> cylinder_cs::Result<Outcome> {
    let g = CircleGeometry::new(2.5, 0.7, 1.3, 0.9)?;
    let psi = LineFunction::gaussian_cs(-0.3, 0.8, g.omega, g.hbar);
    let quad = QuadratureSpec::default();
    let mut recon: f64 = 0.0;
    for &q in &[0.4, 1.9] {
        for n in [-2i64, -1, 1, 2] {
            let f = |q: f64, k: f64| wbz_forward(&psi, q, k, &g, 1e-16).unwrap();
            let got = wbz_inverse(f, q, n, &g, &quad);
            let want = psi.eval(q - n as f64 * g.a);
            recon = recon.max((got - want).norm());
        }
    }
    let mut quasi: f64 = 0.0;
    for &q in &[0.1, 1.7] {
        for m in [-2i64, 1, 3] {
            let base = wbz_forward(&psi, q, g.k, &g, 1e-16)?;
            let shifted = wbz_forward(&psi, q + m as f64 * g.a, g.k, &g, 1e-16)?;
            quasi = quasi.max((shifted - Complex64::from_polar(1.0, m as f64 * g.a * g.k) * base).norm());
        }
    }
    Ok(outcome(
        recon < 1e-10 && quasi < 1e-14,
        format!("off-cell reconstruction max error {recon:.2e}; quasiperiodicity max error {quasi:.2e}"),
    ))
}

type Criterion = (&'static str, fn() -> cylinder_cs::Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("theta functional equation", functional_equation),
        ("closed-form norm vs coefficient series", norm_vs_series),
        ("resolution of unity", resolution_of_unity),
        ("momentum pinning", momentum_pinning),
        ("uncertainty limits at small alpha", uncertainty_limits),
        ("uncertainty band", uncertainty_band),
        ("dual-route uncertainty", dual_route),
        ("density normalization", density_normalization),
        ("torus factorization and closed forms", torus),
        ("xi-labelled state equivalence", kowalski),
        ("Zak transform round trip", wbz_round_trip),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!("criterion {:>2} {}: {name}: {detail}", i + 1, if passed { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
