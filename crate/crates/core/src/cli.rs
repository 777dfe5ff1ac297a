//! `cylcs`: sweeps, verification reports and comparisons as CSV or JSON tables.
//!
//! Every command produces a [`Table`] and a list of [`Check`]s. The checks
//! are computed from the table alone ([`evaluate_checks`]), so a table read
//! back from disk reproduces the verdict.

use std::ffi::OsString;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::circle_cs::{cs_coefficients, cs_norm_sq, cs_overlap, default_n_range, max_identity_deviation, verify_resolution_of_unity, PhasePoint};
use crate::compat::{equivalence_check, KowalskiLabel, Sector};
use crate::error::{Error, Result};
use crate::numerics::QuadratureSpec;
use crate::observables::{ln_abs_angle, probability_density, reduced_momentum_expectation, uncertainty_report};
use crate::theta::DEFAULT_TOL;
use crate::torus_cs::{
    multi_indices, torus_cs_coefficient, torus_cs_wavefunction, torus_lattice_sum, torus_norm_sq, torus_overlap,
    torus_overlap_quadrature, verify_torus_unity, LatticeSpec, TorusGeometry, TorusPoint,
};
use crate::wbz::CircleGeometry;

/// Exit status for a tolerance violation.
pub const EXIT_TOLERANCE: i32 = 2;
/// Exit status for invalid input or I/O failure.
pub const EXIT_INVALID: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "cylcs", version, about = "Coherent states on the circle: figure tables and verification reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    #[command(flatten)]
    pub args: Args,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    /// (u, a·P(u − 1/2, v)) position density
    Density,
    /// (v, |<E>|) angle expectation
    Angle,
    /// (v, (a/2πℏ)(<P> − kℏ)) momentum expectation
    Momentum,
    /// (v, 2Δ(v)/ℏ) uncertainty function
    Uncertainty,
    /// closed-form overlap against the coefficient series
    Overlap,
    /// resolution-of-unity matrix deviation
    Unity,
    /// 2-d torus closed forms against brute-force references
    Torus,
    /// equivalence with the ξ-labelled circle states
    Kowalski,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Density => "density",
            CommandKind::Angle => "angle",
            CommandKind::Momentum => "momentum",
            CommandKind::Uncertainty => "uncertainty",
            CommandKind::Overlap => "overlap",
            CommandKind::Unity => "unity",
            CommandKind::Torus => "torus",
            CommandKind::Kowalski => "kowalski",
        }
    }

    /// Sweep variables accepted by `--grid`; the first is the default.
    pub fn grid_vars(self) -> &'static [&'static str] {
        match self {
            CommandKind::Density => &["u"],
            CommandKind::Angle | CommandKind::Momentum | CommandKind::Uncertainty => &["v"],
            CommandKind::Overlap => &["q", "p"],
            CommandKind::Unity => &["alpha"],
            CommandKind::Torus => &["g12"],
            CommandKind::Kowalski => &["l", "phi"],
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            CommandKind::Density => 1e-8,
            CommandKind::Angle => 1e-12,
            CommandKind::Momentum => 1e-12,
            CommandKind::Uncertainty => 1e-10,
            CommandKind::Overlap => 1e-10,
            CommandKind::Unity => 1e-6,
            CommandKind::Torus => 1e-7,
            CommandKind::Kowalski => 1e-12,
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Args {
    /// Dimensionless width a²ω/(2ℏ); sets a = 2π, ℏ = 1
    #[arg(long, global = true, conflicts_with_all = ["a", "omega", "hbar"])]
    pub alpha: Option<f64>,
    /// Circle length [default: 2π]
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Gaussian width ω [default: 1]
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Planck constant [default: 1]
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    /// Quasimomentum in [0, 2π/a)
    #[arg(long, global = true, default_value_t = 0.0)]
    pub k: f64,
    /// Sweep as var:start:stop:count
    #[arg(long, global = true)]
    pub grid: Option<Grid>,
    /// Output file [default: stdout]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Tolerance for the internal checks [default: per command]
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Reduced momentum of the density profile
    #[arg(long, global = true)]
    pub v: Option<f64>,
    /// Basis cutoff |n| ≤ n-max for unity
    #[arg(long, global = true)]
    pub n_max: Option<i64>,
    /// boson or fermion
    #[arg(long, global = true)]
    pub sector: Option<Sector>,
    #[arg(long, global = true)]
    pub l: Option<f64>,
    #[arg(long, global = true)]
    pub phi: Option<f64>,
    /// Overlap labels ⟨q1, p1 | q2, p2⟩
    #[arg(long, global = true)]
    pub q1: Option<f64>,
    #[arg(long, global = true)]
    pub p1: Option<f64>,
    #[arg(long, global = true)]
    pub q2: Option<f64>,
    #[arg(long, global = true)]
    pub p2: Option<f64>,
    /// Off-diagonal Gram entry of the 2-d torus lattice
    #[arg(long, global = true)]
    pub g12: Option<f64>,
}

/// A uniform sweep, endpoints included. `count = 1` is a single point and
/// then needs `start == stop`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub var: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(var: &str, start: f64, stop: f64, count: usize) -> Result<Self> {
        if var.is_empty() {
            return Err(Error::InvalidArgument("grid variable is empty".into()));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidArgument(format!("grid bounds {start}, {stop} must be finite")));
        }
        match count {
            0 => return Err(Error::InvalidArgument("grid count must be at least 2".into())),
            1 if start != stop => {
                return Err(Error::InvalidArgument("grid count 1 needs start == stop; use count ≥ 2 for a sweep".into()))
            }
            _ => {}
        }
        Ok(Grid { var: var.to_string(), start, stop, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + i as f64 * step })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [var, start, stop, count] = parts.as_slice() else {
            return Err(Error::InvalidArgument(format!("grid '{s}' is not var:start:stop:count")));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("grid value '{x}' is not a number")));
        let count = count.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("grid count '{count}' is not a positive integer")))?;
        Grid::new(var.trim(), num(start)?, num(stop)?, count)
    }
}

/// Validated parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub a: f64,
    pub k: f64,
    pub omega: f64,
    pub hbar: f64,
    pub alpha: f64,
    pub grid: Grid,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub tol: f64,
    pub v: f64,
    pub n_max: i64,
    pub sector: Sector,
    pub l: f64,
    pub phi: f64,
    pub q1: f64,
    pub p1: f64,
    pub q2: f64,
    pub p2: f64,
    pub g12: f64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let Cli { command, args } = cli;
        let hbar = args.hbar.unwrap_or(1.0);
        let a = args.a.unwrap_or(2.0 * PI);
        let omega = match args.alpha {
            Some(alpha) => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidArgument(format!("--alpha {alpha} must be positive")));
                }
                2.0 * hbar * alpha / (a * a)
            }
            None => args.omega.unwrap_or(1.0),
        };
        let geom = CircleGeometry::new(a, args.k, omega, hbar)?;
        let tol = args.tol.unwrap_or(command.default_tol());
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("--tol {tol} must be positive")));
        }
        let sector = args.sector.unwrap_or(Sector::Boson);
        let l = args.l.unwrap_or(0.3);
        let phi = args.phi.unwrap_or(1.2);
        let g12 = args.g12.unwrap_or(0.0);
        let explicit_grid = args.grid.is_some();
        let grid = match args.grid {
            Some(g) => {
                if !command.grid_vars().contains(&g.var.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "{command} sweeps over {}, not '{}'",
                        command.grid_vars().join(" or "),
                        g.var
                    )));
                }
                g
            }
            None => match command {
                CommandKind::Density => Grid::new("u", 0.0, 1.0, 201)?,
                CommandKind::Angle | CommandKind::Momentum | CommandKind::Uncertainty => Grid::new("v", 0.0, 0.5, 51)?,
                CommandKind::Overlap => Grid::new("q", 0.0, a, 65)?,
                CommandKind::Unity => Grid::new("alpha", geom.alpha(), geom.alpha(), 1)?,
                CommandKind::Torus => Grid::new("g12", g12, g12, 1)?,
                CommandKind::Kowalski => Grid::new("l", l, l, 1)?,
            },
        };
        if command == CommandKind::Unity && grid.var == "alpha" && args.alpha.is_some() && explicit_grid {
            return Err(Error::InvalidArgument("--alpha and an alpha grid are mutually exclusive".into()));
        }
        if command == CommandKind::Unity && grid.points().iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("alpha grid values must be positive".into()));
        }
        if command == CommandKind::Torus && grid.points().iter().any(|&g| !(g.abs() < 1.0)) {
            return Err(Error::InvalidArgument("g12 must lie in (-1, 1)".into()));
        }
        let n_max = args.n_max.unwrap_or(5);
        if command == CommandKind::Unity && n_max < 2 {
            return Err(Error::InvalidArgument(format!("--n-max {n_max} must be at least 2")));
        }
        Ok(RunConfig {
            command,
            a,
            k: args.k,
            omega,
            hbar,
            alpha: geom.alpha(),
            grid,
            format: args.format,
            out: args.out,
            tol,
            v: args.v.unwrap_or(0.0),
            n_max,
            sector,
            l,
            phi,
            q1: args.q1.unwrap_or(0.0),
            p1: args.p1.unwrap_or(0.0),
            q2: args.q2.unwrap_or(0.0),
            p2: args.p2.unwrap_or(0.0),
            g12,
        })
    }

    pub fn geometry(&self) -> CircleGeometry {
        CircleGeometry::new(self.a, self.k, self.omega, self.hbar).expect("validated in from_cli")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("table has no column '{name}'")))
    }
}

/// Outcome of one internal tolerance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    /// First grid value at which the check failed.
    pub offending: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn par_rows<F>(points: &[f64], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    points.par_iter().map(|&x| f(x)).collect()
}

fn table(columns: &[&str], rows: Vec<Vec<f64>>) -> Table {
    Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows }
}

/// Computes the table for `config`.
pub fn compute_table(config: &RunConfig) -> Result<Table> {
    let points = config.grid.points();
    let alpha = config.alpha;
    let geom = config.geometry();
    match config.command {
        CommandKind::Density => {
            let v = config.v;
            let rows = par_rows(&points, |u| Ok(vec![u, config.a * probability_density(u - 0.5, v, alpha, config.a)?]))?;
            Ok(table(&["u", "a_density"], rows))
        }
        CommandKind::Angle => {
            let rows = par_rows(&points, |v| Ok(vec![v, ln_abs_angle(v, alpha)?.exp()]))?;
            Ok(table(&["v", "abs_angle"], rows))
        }
        CommandKind::Momentum => {
            let rows = par_rows(&points, |v| Ok(vec![v, reduced_momentum_expectation(v, alpha)?]))?;
            Ok(table(&["v", "reduced_momentum"], rows))
        }
        CommandKind::Uncertainty => {
            let rows = par_rows(&points, |v| {
                let r = uncertainty_report(v, &geom)?;
                Ok(vec![v, 2.0 * r.delta_fn, 2.0 * r.delta_fn_composed, r.lower_margin, r.upper_margin.0, r.upper_margin.1])
            })?;
            Ok(table(
                &["v", "two_delta", "two_delta_composed", "lower_margin", "upper_margin_sign", "ln_upper_margin"],
                rows,
            ))
        }
        CommandKind::Overlap => {
            let swept_q = config.grid.var == "q";
            let rows = par_rows(&points, |x| {
                let l1 = PhasePoint::new(config.q1, config.p1, &geom);
                let l2 = if swept_q { PhasePoint::new(x, config.p2, &geom) } else { PhasePoint::new(config.q2, x, &geom) };
                let closed = cs_overlap(l1, l2, &geom, DEFAULT_TOL)?;
                let (r1, r2) = (default_n_range(l1, &geom), default_n_range(l2, &geom));
                let range = *r1.start().min(r2.start())..=*r1.end().max(r2.end());
                let series = cs_coefficients(l1, range.clone(), &geom).inner(&cs_coefficients(l2, range, &geom));
                let scale = (cs_norm_sq(l1, &geom) * cs_norm_sq(l2, &geom)).sqrt();
                Ok(vec![x, closed.re, closed.im, closed.norm(), series.re, series.im, scale])
            })?;
            Ok(table(&[config.grid.var.as_str(), "re", "im", "abs", "series_re", "series_im", "norm_scale"], rows))
        }
        CommandKind::Unity => {
            let quad = QuadratureSpec::default();
            let rows = points
                .iter()
                .map(|&al| {
                    let omega = 2.0 * config.hbar * al / (config.a * config.a);
                    let g = CircleGeometry::new(config.a, config.k, omega, config.hbar)?;
                    let m = verify_resolution_of_unity(&g, config.n_max, &quad)?;
                    Ok(vec![al, max_identity_deviation(&m)])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(table(&["alpha", "max_deviation"], rows))
        }
        CommandKind::Torus => {
            let rows = points.iter().map(|&g12| torus_row(config, g12)).collect::<Result<Vec<_>>>()?;
            Ok(table(&["g12", "wavefunction_dev", "overlap_dev", "norm_dev", "unity_dev"], rows))
        }
        CommandKind::Kowalski => {
            let swept_l = config.grid.var == "l";
            let rows = par_rows(&points, |x| {
                let (l, phi) = if swept_l { (x, config.phi) } else { (config.l, x) };
                let r = equivalence_check(&KowalskiLabel::new(l, phi, config.sector))?;
                let other = if swept_l { r.label.phi } else { l };
                Ok(vec![x, other, r.constant.re, r.constant.im, r.max_deviation, r.constant_error()])
            })?;
            let other = if swept_l { "phi" } else { "l" };
            Ok(table(
                &[config.grid.var.as_str(), other, "constant_re", "constant_im", "max_deviation", "constant_error"],
                rows,
            ))
        }
    }
}

/// Square lattice of side `a` with `cos(angle) = g12`, checked at fixed labels
/// against the lattice sum, cell quadrature, coefficient series and unity matrix.
fn torus_row(config: &RunConfig, g12: f64) -> Result<Vec<f64>> {
    let a = config.a;
    let gram = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, g12, g12, 1.0]);
    let lattice = LatticeSpec::from_gram(&gram, &[a, a])?;
    let geom = TorusGeometry::new(lattice, vec![config.k, config.k], config.omega, config.hbar)?;
    let s = (config.omega * config.hbar).sqrt();
    let l1 = TorusPoint::new(vec![0.2 * a, 0.7 * a], vec![0.4 * s, -0.3 * s]);
    let l2 = TorusPoint::new(vec![0.55 * a, 0.1 * a], vec![-0.2 * s, 0.5 * s]);
    let qp = [0.35 * a, 0.8 * a];

    let closed = torus_cs_wavefunction(&l1, &qp, &geom, DEFAULT_TOL)?;
    let width = (config.hbar / config.omega).sqrt() / (a * (1.0 - g12.abs()).sqrt());
    let reach = (9.0 * width).ceil() as i64 + 2;
    let direct = torus_lattice_sum(&l1, &qp, &geom, reach)?;
    let wavefunction_dev = (closed - direct).norm() / direct.norm().max(f64::MIN_POSITIVE);

    let overlap = torus_overlap(&l1, &l2, &geom, DEFAULT_TOL)?;
    let n1 = torus_norm_sq(&l1, &geom, DEFAULT_TOL)?;
    let n2 = torus_norm_sq(&l2, &geom, DEFAULT_TOL)?;
    let points = (32.0 + 4.0 * config.alpha.sqrt() / (1.0 - g12.abs()).sqrt()).ceil() as usize;
    let quad = torus_overlap_quadrature(&l1, &l2, &geom, points, DEFAULT_TOL)?;
    let overlap_dev = (overlap - quad).norm() / (n1 * n2).sqrt();

    let m = (a * (0.5 + 10.0 / (1.0 - g12.abs()).sqrt()) * s / (2.0 * PI * config.hbar)).ceil() as i64 + 2;
    let series: f64 = multi_indices(2, m).iter().map(|idx| torus_cs_coefficient(idx, &l1, &geom).norm_sqr()).sum();
    let norm_dev = (n1 / series - 1.0).abs();

    let unity_dev = max_identity_deviation(&verify_torus_unity(&geom, 1)?);
    Ok(vec![g12, wavefunction_dev, overlap_dev, norm_dev, unity_dev])
}

fn max_check(table: &Table, name: &str, column: &str, tol: f64) -> Result<Check> {
    let c = table.column(column)?;
    let mut worst: f64 = 0.0;
    let mut offending = None;
    for row in &table.rows {
        let x = row[c];
        if !(x <= tol) && offending.is_none() {
            offending = Some(row[0]);
        }
        if x.is_nan() || x > worst {
            worst = x;
        }
    }
    Ok(Check { name: name.into(), passed: offending.is_none(), worst, tolerance: tol, offending })
}

/// Re-derives the pass/fail checks of `command` from a table.
pub fn evaluate_checks(command: CommandKind, table: &Table, tol: f64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    match command {
        CommandKind::Density => {
            let (xu, xd) = (table.column("u")?, table.column("a_density")?);
            let neg = table.rows.iter().find(|r| !(r[xd] >= 0.0 && r[xd].is_finite()));
            checks.push(Check {
                name: "nonnegative".into(),
                passed: neg.is_none(),
                worst: table.rows.iter().map(|r| r[xd]).fold(f64::INFINITY, f64::min),
                tolerance: 0.0,
                offending: neg.map(|r| r[xu]),
            });
            // normalization over one full period, when the grid spans exactly one
            let n = table.rows.len();
            if n >= 3 && (table.rows[n - 1][xu] - table.rows[0][xu] - 1.0).abs() < 1e-12 {
                let h = 1.0 / (n - 1) as f64;
                let sum: f64 = table.rows.iter().enumerate().map(|(i, r)| if i == 0 || i == n - 1 { 0.5 * r[xd] } else { r[xd] }).sum();
                let dev = (sum * h - 1.0).abs();
                checks.push(Check { name: "normalization".into(), passed: dev <= tol, worst: dev, tolerance: tol, offending: None });
            }
        }
        CommandKind::Angle => {
            let x = table.column("abs_angle")?;
            let bad = table.rows.iter().find(|r| !(0.0..=1.0).contains(&r[x]));
            checks.push(Check {
                name: "unit_disc".into(),
                passed: bad.is_none(),
                worst: table.rows.iter().map(|r| r[x]).fold(0.0, f64::max),
                tolerance: 1.0,
                offending: bad.map(|r| r[0]),
            });
        }
        CommandKind::Momentum => {
            let (xv, xm) = (table.column("v")?, table.column("reduced_momentum")?);
            let mut worst: f64 = 0.0;
            let mut offending = None;
            for r in table.rows.iter().filter(|r| (2.0 * r[xv]).fract() == 0.0) {
                let dev = (r[xm] - r[xv]).abs();
                worst = worst.max(dev);
                if !(dev <= tol) && offending.is_none() {
                    offending = Some(r[xv]);
                }
            }
            checks.push(Check { name: "pinning".into(), passed: offending.is_none(), worst, tolerance: tol, offending });
        }
        CommandKind::Uncertainty => {
            let (xv, xlo, xs, xln) = (
                table.column("v")?,
                table.column("lower_margin")?,
                table.column("upper_margin_sign")?,
                table.column("ln_upper_margin")?,
            );
            let bad = table.rows.iter().find(|r| !(r[xlo] > 0.0 && r[xs] > 0.0 && r[xln].is_finite()));
            checks.push(Check {
                name: "band".into(),
                passed: bad.is_none(),
                worst: table.rows.iter().map(|r| r[xlo].min(r[xs] * r[xln].exp())).fold(f64::INFINITY, f64::min),
                tolerance: 0.0,
                offending: bad.map(|r| r[xv]),
            });
            let (xc, xd) = (table.column("two_delta")?, table.column("two_delta_composed")?);
            let devs = Table {
                columns: vec!["v".into(), "dev".into()],
                rows: table.rows.iter().map(|r| vec![r[xv], (r[xd] / r[xc] - 1.0).abs()]).collect(),
            };
            checks.push(max_check(&devs, "dual_route", "dev", tol)?);
        }
        CommandKind::Overlap => {
            let cols = ["re", "im", "series_re", "series_im", "norm_scale", "abs"].map(|c| table.column(c));
            let [re, im, sre, sim, scale, abs] = cols;
            let (re, im, sre, sim, scale, abs) = (re?, im?, sre?, sim?, scale?, abs?);
            let devs = Table {
                columns: vec!["x".into(), "series".into(), "cs".into()],
                rows: table
                    .rows
                    .iter()
                    .map(|r| vec![r[0], (r[re] - r[sre]).hypot(r[im] - r[sim]) / r[scale], r[abs] / r[scale] - 1.0])
                    .collect(),
            };
            checks.push(max_check(&devs, "series", "series", tol)?);
            checks.push(max_check(&devs, "cauchy_schwarz", "cs", 1e-12)?);
        }
        CommandKind::Unity => checks.push(max_check(table, "unity", "max_deviation", tol)?),
        CommandKind::Torus => {
            for c in ["wavefunction_dev", "overlap_dev", "norm_dev", "unity_dev"] {
                checks.push(max_check(table, c.trim_end_matches("_dev"), c, tol)?);
            }
        }
        CommandKind::Kowalski => {
            checks.push(max_check(table, "ratio_constant", "max_deviation", tol)?);
            checks.push(max_check(table, "fitted_constant", "constant_error", tol)?);
        }
    }
    Ok(checks)
}

pub fn run(config: &RunConfig) -> Result<Report> {
    let table = compute_table(config)?;
    let checks = evaluate_checks(config.command, &table, config.tol)?;
    Ok(Report { config: config.clone(), columns: table.columns, rows: table.rows, checks })
}

/// Doubles as `{:.16e}`: 17 significant digits, exact round trip.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(w: W, table: &Table) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&table.columns)?;
    for row in &table.rows {
        out.write_record(row.iter().map(|&x| format_number(x)))?;
    }
    out.flush()
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let bad = |e: csv::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(bad)?;
    let columns: Vec<String> = rdr.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("'{s}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn write_report<W: Write>(mut w: W, report: &Report, format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => write_csv(w, &Table { columns: report.columns.clone(), rows: report.rows.clone() }),
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)
        }
    }
}

fn first_line(s: &str) -> &str {
    s.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim()
}

/// Runs the command line and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("cylcs: {}", first_line(&e.to_string()).trim_start_matches("error: "));
            return EXIT_INVALID;
        }
    };
    let config = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cylcs: {e}");
            return EXIT_INVALID;
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("cylcs: {e}");
            return EXIT_INVALID;
        }
    };
    let written = match &config.out {
        Some(path) => std::fs::File::create(path)
            .and_then(|f| write_report(std::io::BufWriter::new(f), &report, config.format)),
        None => write_report(std::io::stdout().lock(), &report, config.format),
    };
    if let Err(e) = written {
        eprintln!("cylcs: cannot write output: {e}");
        return EXIT_INVALID;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        match c.offending {
            Some(x) => eprintln!(
                "cylcs: check '{}' failed at {} = {}: worst {:e}, tolerance {:e}",
                c.name, config.grid.var, x, c.worst, c.tolerance
            ),
            None => eprintln!("cylcs: check '{}' failed: worst {:e}, tolerance {:e}", c.name, c.worst, c.tolerance),
        }
    }
    if report.passed() {
        0
    } else {
        EXIT_TOLERANCE
    }
}
