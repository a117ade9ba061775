//! The Chernoff function `S(t) = S3(t) S2(t)` for `a f'' + b f' + c f`, applied as banded
//! Gaussian kernel sums on grid functions.
//!
//! `S1` averages `f` against a Gaussian of variance `v·t·a(x)` centred at `x`, `S2` adds the
//! exponential tilt `exp(θ(x)(y - x))`, and `S3` multiplies by `exp(t·V(x))`. The constants
//! `v`, `θ`, `V` depend on the [`KernelConvention`]:
//!
//! | convention      | variance   | tilt θ       | potential V       |
//! |-----------------|------------|--------------|-------------------|
//! | `PaperLiteral`  | `t·a`      | `b / a`      | `c - b²/(2a)`     |
//! | `Corrected`     | `2t·a`     | `b / (2a)`   | `c - b²/(4a)`     |
//!
//! Matching `E[e^{θU} f(x+U)]` to second order in `U ~ N(0, σ²)` gives
//! `f + θσ² f' + σ²/2 f'' + θ²σ²/2 f`, so the corrected constants are the ones for which
//! `S(t) f = f + t (a f'' + b f' + c f) + o(t)`. The literal constants give the generator
//! `(a/2) f'' + b f' + c f` instead.
//!
//! Quadrature is the trapezoid rule on the grid nodes inside `|y - x| <= k·σ`. The Gaussian
//! weights are normalised by their discrete sum over the full symmetric window, including
//! lattice points that fall outside the grid (where `f` is zero), so mass leaving the grid
//! is lost rather than redistributed. The tilt is never renormalised: its excess mass is
//! what the potential in `S3` compensates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fd_derivatives, Grid1D, GridFunction, Scalar};
use crate::problem::{CoefficientSet, SampledCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelConvention {
    /// Constants exactly as printed for the kernels (variance `t·a`).
    PaperLiteral,
    /// Constants matched to the generator `a f'' + b f' + c f` (variance `2t·a`).
    #[default]
    Corrected,
}

impl KernelConvention {
    pub fn variance_factor(self) -> f64 {
        match self {
            Self::PaperLiteral => 1.0,
            Self::Corrected => 2.0,
        }
    }

    pub fn tilt_factor(self) -> f64 {
        match self {
            Self::PaperLiteral => 1.0,
            Self::Corrected => 0.5,
        }
    }

    /// Multiplier of `a` in the generator the kernel is tangent to.
    pub fn diffusion_factor(self) -> f64 {
        0.5 * self.variance_factor()
    }

    pub fn potential(self, a: f64, b: f64, c: f64) -> f64 {
        // θ²σ²/(2t) with θ = tilt·b/a, σ² = var·t·a
        let tilt = self.tilt_factor();
        c - tilt * tilt * self.variance_factor() * b * b / (2.0 * a)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PaperLiteral => "paper",
            Self::Corrected => "corrected",
        }
    }
}

impl fmt::Display for KernelConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" | "paper-literal" | "paper_literal" => Ok(Self::PaperLiteral),
            "corrected" => Ok(Self::Corrected),
            other => Err(Error::InvalidConfig(format!(
                "unknown kernel convention: {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffConfig {
    pub convention: KernelConvention,
    /// Kernel sums run over `|y - x| <= quad_halfwidth_sigmas · σ(x, t)`.
    pub quad_halfwidth_sigmas: f64,
    /// `n` in `S(t/n)^n`.
    pub n_compose: usize,
}

impl Default for ChernoffConfig {
    fn default() -> Self {
        Self {
            convention: KernelConvention::Corrected,
            quad_halfwidth_sigmas: 8.0,
            n_compose: 64,
        }
    }
}

impl ChernoffConfig {
    pub fn with_convention(mut self, convention: KernelConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_compose = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quad_halfwidth_sigmas >= 4.0) || !self.quad_halfwidth_sigmas.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "quad_halfwidth_sigmas must be >= 4, got {}",
                self.quad_halfwidth_sigmas
            )));
        }
        if self.n_compose < 1 {
            return Err(Error::ZeroCompositions);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    S1,
    S2,
    S,
}

#[derive(Debug, Clone)]
struct Row {
    start: usize,
    weights: Vec<f64>,
}

/// A banded nodal operator `(Kf)_i = Σ_j w_ij f_j`, one row per output node.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    grid: Grid1D,
    rows: Vec<Row>,
}

impl KernelMatrix {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn apply<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.apply_unchecked(f.values()))
    }

    pub(crate) fn apply_unchecked<T: Scalar>(&self, values: &[T]) -> GridFunction<T> {
        let out = self
            .rows
            .par_iter()
            .map(|row| {
                let src = &values[row.start..row.start + row.weights.len()];
                let mut acc = T::zero();
                for (&w, &v) in row.weights.iter().zip(src) {
                    acc += v * w;
                }
                acc
            })
            .collect();
        GridFunction::from_values_unchecked(self.grid, out)
    }

    /// Sum of `|w_ij|` over row `i`.
    pub fn row_mass(&self, i: usize) -> f64 {
        self.rows[i].weights.iter().map(|w| w.abs()).sum()
    }

    /// Dense entry `w_ij` (zero outside the band).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        if j < row.start || j >= row.start + row.weights.len() {
            0.0
        } else {
            row.weights[j - row.start]
        }
    }
}

/// Chernoff kernels for one coefficient set sampled on one grid.
#[derive(Debug, Clone)]
pub struct ChernoffOperator {
    grid: Grid1D,
    coeffs: SampledCoefficients,
    config: ChernoffConfig,
}

impl ChernoffOperator {
    pub fn new(coeffs: &CoefficientSet, grid: &Grid1D, config: &ChernoffConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            grid: *grid,
            coeffs: coeffs.sample(grid)?,
            config: *config,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn config(&self) -> &ChernoffConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &SampledCoefficients {
        &self.coeffs
    }

    pub fn s1_matrix(&self, t: f64) -> Result<KernelMatrix> {
        self.build(t, Stage::S1)
    }

    pub fn s2_matrix(&self, t: f64) -> Result<KernelMatrix> {
        self.build(t, Stage::S2)
    }

    /// The full step `S(t) = S3(t) S2(t)` as one banded matrix, `t > 0`.
    pub fn step_matrix(&self, t: f64) -> Result<KernelMatrix> {
        self.build(t, Stage::S)
    }

    pub fn apply_s3<T: Scalar>(&self, t: f64, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let conv = self.config.convention;
        let c = &self.coeffs;
        let values = f
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * (t * conv.potential(c.a[i], c.b[i], c.c[i])).exp())
            .collect();
        Ok(GridFunction::from_values_unchecked(self.grid, values))
    }

    pub fn apply_s<T: Scalar>(&self, t: f64, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        if t == 0.0 {
            if *f.grid() != self.grid {
                return Err(Error::GridMismatch);
            }
            return Ok(f.clone());
        }
        self.step_matrix(t)?.apply(f)
    }

    fn build(&self, t: f64, stage: Stage) -> Result<KernelMatrix> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonPositiveTime(t));
        }
        let n = self.grid.n_points();
        let h = self.grid.spacing();
        let conv = self.config.convention;
        let k_sigmas = self.config.quad_halfwidth_sigmas;
        let c = &self.coeffs;
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = c.a[i];
                let variance = conv.variance_factor() * t * a;
                let width = lattice_width(variance.sqrt(), h);
                let half = (k_sigmas * width / h).floor();
                let inv_2var = 0.5 / (width * width);
                let norm = lattice_gaussian_mass(half, h, inv_2var, width);
                let (tilt, scale) = match stage {
                    Stage::S1 => (0.0, 1.0),
                    Stage::S2 => (conv.tilt_factor() * c.b[i] / a, 1.0),
                    Stage::S => (
                        conv.tilt_factor() * c.b[i] / a,
                        (t * conv.potential(a, c.b[i], c.c[i])).exp(),
                    ),
                };
                let reach = if half >= n as f64 { n } else { half as usize };
                let start = i.saturating_sub(reach);
                let end = (i + reach).min(n - 1);
                let weights = (start..=end)
                    .map(|j| {
                        let d = (j as f64 - i as f64) * h;
                        scale * (tilt * d - d * d * inv_2var).exp() / norm
                    })
                    .collect();
                Row { start, weights }
            })
            .collect();
        Ok(KernelMatrix {
            grid: self.grid,
            rows,
        })
    }
}

/// Width `s` of the lattice Gaussian `exp(-(k h)²/(2 s²))` whose discrete variance is `σ²`.
///
/// For `σ >= 1.5 h` the discrete and continuous variances agree to ~1e-19 relative and
/// `s = σ`. Below that the lattice undersamples the bell and `s` is found by Newton's
/// method, so that one step always carries exactly the prescribed diffusion.
pub fn lattice_width(sigma: f64, h: f64) -> f64 {
    if sigma >= 1.5 * h {
        return sigma;
    }
    let target = (sigma / h).powi(2);
    if target == 0.0 {
        return 0.0;
    }
    // start from the nearest-neighbour approximation r = 2q/(1+2q), q = exp(-1/(2u²))
    let mut u = if target < 0.5 {
        let q = target / (2.0 * (1.0 - target));
        (-0.5 / q.ln()).sqrt()
    } else {
        sigma / h
    };
    for _ in 0..60 {
        let (m2, m4) = lattice_moments(u);
        let residual = m2 - target;
        if residual.abs() <= 1e-15 * target {
            break;
        }
        let slope = (m4 - m2 * m2) / (u * u * u);
        let mut next = u - residual / slope;
        if !(next > 0.0) || !next.is_finite() {
            next = 0.5 * u;
        }
        u = next;
    }
    u * h
}

/// Second and fourth moments, in units of the spacing, of the lattice Gaussian of width `u`.
fn lattice_moments(u: f64) -> (f64, f64) {
    let reach = (12.0 * u).ceil() as i64 + 1;
    let (mut z, mut m2, mut m4) = (1.0, 0.0, 0.0);
    for k in 1..=reach {
        let k2 = (k * k) as f64;
        let w = 2.0 * (-k2 / (2.0 * u * u)).exp();
        z += w;
        m2 += w * k2;
        m4 += w * k2 * k2;
    }
    (m2 / z, m4 / z)
}

/// `Σ_{|k| <= half} exp(-(k h)² / (2σ²))`. Past a few thousand terms the sum equals
/// `sqrt(2π) σ / h` to all f64 digits, so the closed form is used instead.
fn lattice_gaussian_mass(half: f64, h: f64, inv_2var: f64, sigma: f64) -> f64 {
    if half > 4096.0 {
        return (2.0 * std::f64::consts::PI).sqrt() * sigma / h;
    }
    let half = half as i64;
    let mut sum = 1.0;
    for k in 1..=half {
        let d = k as f64 * h;
        sum += 2.0 * (-d * d * inv_2var).exp();
    }
    sum
}

pub fn apply_s1<T: Scalar>(
    t: f64,
    f: &GridFunction<T>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<GridFunction<T>> {
    ChernoffOperator::new(coeffs, f.grid(), config)?
        .s1_matrix(t)?
        .apply(f)
}

pub fn apply_s2<T: Scalar>(
    t: f64,
    f: &GridFunction<T>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<GridFunction<T>> {
    ChernoffOperator::new(coeffs, f.grid(), config)?
        .s2_matrix(t)?
        .apply(f)
}

pub fn apply_s3<T: Scalar>(
    t: f64,
    f: &GridFunction<T>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<GridFunction<T>> {
    ChernoffOperator::new(coeffs, f.grid(), config)?.apply_s3(t, f)
}

/// `S(0) f = f`; for `t > 0`, `S3(t) S2(t) f`.
pub fn apply_s<T: Scalar>(
    t: f64,
    f: &GridFunction<T>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<GridFunction<T>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    ChernoffOperator::new(coeffs, f.grid(), config)?.apply_s(t, f)
}

/// `a f'' + b f' + c f` by finite differences.
pub fn generator_fd(
    f: &GridFunction<f64>,
    coeffs: &SampledCoefficients,
) -> Result<GridFunction<f64>> {
    let d = fd_derivatives(f)?;
    let values = (0..f.grid().n_points())
        .map(|i| {
            coeffs.a[i] * d.second.values()[i]
                + coeffs.b[i] * d.first.values()[i]
                + coeffs.c[i] * f.values()[i]
        })
        .collect();
    Ok(GridFunction::from_values_unchecked(*f.grid(), values))
}

/// Width of the boundary strip excluded from residual-type norms when kernels of time
/// scale up to `t_max` have been applied.
pub fn boundary_margin(t_max: f64, sup_a: f64) -> f64 {
    4.0 * (t_max * sup_a).sqrt().max(1.0)
}

/// `‖(S(t) f - f)/t - H f‖` over interior nodes, with `H f` from finite differences.
pub fn tangency_defect(
    f: &GridFunction<f64>,
    t: f64,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let op = ChernoffOperator::new(coeffs, f.grid(), config)?;
    let sf = op.apply_s(t, f)?;
    let hf = generator_fd(f, op.coefficients())?;
    let interior = f
        .grid()
        .interior(boundary_margin(t, op.coefficients().sup_a()));
    let inv_t = 1.0 / t;
    Ok(interior
        .map(|i| ((sf.values()[i] - f.values()[i]) * inv_t - hf.values()[i]).abs())
        .fold(0.0, f64::max))
}

/// `(t, defect)` for each `t`.
pub fn tangency_study(
    f: &GridFunction<f64>,
    ts: &[f64],
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<Vec<(f64, f64)>> {
    ts.iter()
        .map(|&t| Ok((t, tangency_defect(f, t, coeffs, config)?)))
        .collect()
}
