//! Coefficient data for `(Hf)(x) = a(x) f''(x) + b(x) f'(x) + c(x) f(x)`, the standing
//! assumptions on it, and the scalar bounds derived from it.
//!
//! Hölder regularity of `a`, `1/a`, `b`, `c` is the caller's contract and is not checked;
//! only positivity, finiteness and boundedness are spot-checked on the working grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::kernel::KernelConvention;

/// Piecewise-linear table, held constant beyond its first and last positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    positions: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(mut rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("empty coefficient table".into()));
        }
        if rows.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "coefficient table has non-finite entries".into(),
            ));
        }
        rows.sort_by(|l, r| l.0.total_cmp(&r.0));
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig(
                "duplicate positions in coefficient table".into(),
            ));
        }
        let (positions, values) = rows.into_iter().unzip();
        Ok(Self { positions, values })
    }

    /// Reads a two-column CSV of `position,value` pairs. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table_err = |reason: String| Error::Table {
            path: path.display().to_string(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| table_err(e.to_string()))?;
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| table_err(e.to_string()))?;
            if record.len() < 2 {
                return Err(table_err(format!(
                    "row {} has fewer than 2 columns",
                    line + 1
                )));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(v)) => rows.push((x, v)),
                _ if line == 0 => continue,
                _ => return Err(table_err(format!("row {} is not numeric", line + 1))),
            }
        }
        Self::new(rows).map_err(|e| table_err(e.to_string()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.positions;
        if x <= p[0] {
            return self.values[0];
        }
        if x >= p[p.len() - 1] {
            return self.values[p.len() - 1];
        }
        let hi = p.partition_point(|&q| q <= x);
        let lo = hi - 1;
        let w = (x - p[lo]) / (p[hi] - p[lo]);
        self.values[lo] * (1.0 - w) + self.values[hi] * w
    }
}

/// A scalar function of position, given by a named preset, a table, or a closure.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `base + amp / (1 + (x/scale)^2)`
    Rational {
        base: f64,
        amp: f64,
        scale: f64,
    },
    /// `base + amp * exp(-((x - center)/width)^2)`
    Gaussian {
        base: f64,
        amp: f64,
        width: f64,
        center: f64,
    },
    /// `base + amp * sin(freq*x + phase) / (1 + decay*x^2)`
    Sinusoidal {
        base: f64,
        amp: f64,
        freq: f64,
        phase: f64,
        decay: f64,
    },
    /// `amp * exp(-rate*|x|)`
    ExpAbs {
        amp: f64,
        rate: f64,
    },
    Table(Arc<Table>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(k) => write!(f, "Constant({k})"),
            Self::Rational { base, amp, scale } => {
                write!(f, "Rational {{ base: {base}, amp: {amp}, scale: {scale} }}")
            }
            Self::Gaussian {
                base,
                amp,
                width,
                center,
            } => write!(
                f,
                "Gaussian {{ base: {base}, amp: {amp}, width: {width}, center: {center} }}"
            ),
            Self::Sinusoidal {
                base,
                amp,
                freq,
                phase,
                decay,
            } => write!(
                f,
                "Sinusoidal {{ base: {base}, amp: {amp}, freq: {freq}, phase: {phase}, decay: {decay} }}"
            ),
            Self::ExpAbs { amp, rate } => write!(f, "ExpAbs {{ amp: {amp}, rate: {rate} }}"),
            Self::Table(t) => write!(f, "Table({} rows)", t.positions.len()),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Coefficient {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant(k) => *k,
            Self::Rational { base, amp, scale } => {
                let s = x / scale;
                base + amp / (1.0 + s * s)
            }
            Self::Gaussian {
                base,
                amp,
                width,
                center,
            } => {
                let s = (x - center) / width;
                base + amp * (-s * s).exp()
            }
            Self::Sinusoidal {
                base,
                amp,
                freq,
                phase,
                decay,
            } => base + amp * (freq * x + phase).sin() / (1.0 + decay * x * x),
            Self::ExpAbs { amp, rate } => amp * (-rate * x.abs()).exp(),
            Self::Table(t) => t.eval(x),
            Self::Custom(f) => f(x),
        }
    }

    /// `Some(k)` when the coefficient is known to be the constant `k`.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant(k) => Some(*k),
            Self::Rational { base, amp, .. }
            | Self::Gaussian { base, amp, .. }
            | Self::Sinusoidal { base, amp, .. }
                if *amp == 0.0 =>
            {
                Some(*base)
            }
            _ => None,
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Result<GridFunction<f64>> {
        crate::grid::sample(|x| self.eval(x), grid)
    }
}

impl From<f64> for Coefficient {
    fn from(k: f64) -> Self {
        Self::Constant(k)
    }
}

/// Preset grammar, `name:p1,p2,...` with trailing parameters optional:
///
/// ```text
/// constant:K
/// rational:BASE,AMP[,SCALE=1]
/// gaussian:BASE,AMP[,WIDTH=1[,CENTER=0]]
/// sin:BASE,AMP[,FREQ=1[,PHASE=0[,DECAY=0]]]
/// exp-abs:AMP[,RATE=1]
/// table:PATH
/// ```
///
/// A bare number is shorthand for `constant:K`.
impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<f64>() {
            return Ok(Self::Constant(k));
        }
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        if name == "table" {
            return Ok(Self::Table(Arc::new(Table::from_csv(rest)?)));
        }
        let params: Vec<f64> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::UnknownPreset(s.to_string()))?
        };
        let arity = |min: usize, max: usize| {
            if params.len() < min || params.len() > max {
                Err(Error::UnknownPreset(format!(
                    "{s}: expected {min} to {max} parameters"
                )))
            } else {
                Ok(())
            }
        };
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let coefficient = match name {
            "constant" => {
                arity(1, 1)?;
                Self::Constant(params[0])
            }
            "rational" => {
                arity(2, 3)?;
                Self::Rational {
                    base: params[0],
                    amp: params[1],
                    scale: get(2, 1.0),
                }
            }
            "gaussian" => {
                arity(2, 4)?;
                Self::Gaussian {
                    base: params[0],
                    amp: params[1],
                    width: get(2, 1.0),
                    center: get(3, 0.0),
                }
            }
            "sin" => {
                arity(2, 5)?;
                Self::Sinusoidal {
                    base: params[0],
                    amp: params[1],
                    freq: get(2, 1.0),
                    phase: get(3, 0.0),
                    decay: get(4, 0.0),
                }
            }
            "exp-abs" => {
                arity(1, 2)?;
                Self::ExpAbs {
                    amp: params[0],
                    rate: get(1, 1.0),
                }
            }
            _ => return Err(Error::UnknownPreset(s.to_string())),
        };
        Ok(coefficient)
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub a: Coefficient,
    pub b: Coefficient,
    pub c: Coefficient,
    /// Certified lower bound `a(x) >= a_floor`.
    pub a_floor: Option<f64>,
    /// Certified upper bound `sup c`.
    pub c_sup: Option<f64>,
}

impl CoefficientSet {
    pub fn new(
        a: impl Into<Coefficient>,
        b: impl Into<Coefficient>,
        c: impl Into<Coefficient>,
    ) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            a_floor: None,
            c_sup: None,
        }
    }

    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c)
    }

    pub fn with_a_floor(mut self, a_floor: f64) -> Self {
        self.a_floor = Some(a_floor);
        self
    }

    pub fn with_c_sup(mut self, c_sup: f64) -> Self {
        self.c_sup = Some(c_sup);
        self
    }

    /// `(a, b, c)` when all three are constants.
    pub fn constants(&self) -> Option<(f64, f64, f64)> {
        Some((
            self.a.constant_value()?,
            self.b.constant_value()?,
            self.c.constant_value()?,
        ))
    }

    /// Samples `a`, `b`, `c` on the grid, requiring finite values and `a > 0`.
    pub fn sample(&self, grid: &Grid1D) -> Result<SampledCoefficients> {
        let mut a = Vec::with_capacity(grid.n_points());
        let mut b = Vec::with_capacity(grid.n_points());
        let mut c = Vec::with_capacity(grid.n_points());
        for x in grid.nodes() {
            let (av, bv, cv) = (self.a.eval(x), self.b.eval(x), self.c.eval(x));
            for (name, value) in [("a", av), ("b", bv), ("c", cv)] {
                if !value.is_finite() {
                    return Err(Error::CoefficientNotFinite { name, x, value });
                }
            }
            if av <= 0.0 {
                return Err(Error::NonPositiveDiffusion { x, value: av });
            }
            a.push(av);
            b.push(bv);
            c.push(cv);
        }
        Ok(SampledCoefficients { a, b, c })
    }
}

/// Nodal values of `a`, `b`, `c` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl SampledCoefficients {
    pub fn sup_a(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_c(&self) -> f64 {
        self.c.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub coefficients: CoefficientSet,
    pub lambda: Complex64,
    /// Right-hand side `g`.
    pub rhs: Coefficient,
}

impl ProblemSpec {
    pub fn new(
        coefficients: CoefficientSet,
        lambda: impl Into<Complex64>,
        rhs: impl Into<Coefficient>,
    ) -> Self {
        Self {
            coefficients,
            lambda: lambda.into(),
            rhs: rhs.into(),
        }
    }
}

/// `‖e^{tL}‖ <= M e^{omega t}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SemigroupBounds {
    pub m: f64,
    pub omega: f64,
}

impl SemigroupBounds {
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        if !(m >= 1.0) || !(omega >= 0.0) || !omega.is_finite() || !m.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "semigroup bounds need M >= 1 and omega >= 0, got M = {m}, omega = {omega}"
            )));
        }
        Ok(Self { m, omega })
    }

    /// `M = 1`, `omega = growth_bound(coeffs)`.
    pub fn for_coefficients(coeffs: &CoefficientSet, grid: &Grid1D) -> Result<Self> {
        Self::new(1.0, growth_bound(coeffs, grid)?)
    }
}

/// `w = max(0, sup c)`, the sup taken over the grid and over the certified `c_sup` if given.
pub fn growth_bound(coeffs: &CoefficientSet, grid: &Grid1D) -> Result<f64> {
    let mut sup = coeffs.c_sup.unwrap_or(f64::NEG_INFINITY);
    for x in grid.nodes() {
        let value = coeffs.c.eval(x);
        if !value.is_finite() {
            return Err(Error::CoefficientNotFinite {
                name: "c",
                x,
                value,
            });
        }
        sup = sup.max(value);
    }
    Ok(sup.max(0.0))
}

/// The potential `c - b^2/(2a)` (paper-literal) or `c - b^2/(4a)` (corrected) subtracted
/// by the multiplicative factor of the Chernoff function.
pub fn potential(coeffs: &CoefficientSet, x: f64, convention: KernelConvention) -> Result<f64> {
    let a = coeffs.a.eval(x);
    if !(a > 0.0) {
        return Err(Error::NonPositiveDiffusion { x, value: a });
    }
    Ok(convention.potential(a, coeffs.b.eval(x), coeffs.c.eval(x)))
}

/// One violated standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    NonFinite {
        name: &'static str,
        x: f64,
    },
    /// `a` is not bounded below by a positive constant on the grid.
    DiffusionNotPositive {
        x: f64,
        value: f64,
    },
    /// A certified floor was given but the grid shows a smaller value.
    DiffusionBelowFloor {
        x: f64,
        value: f64,
        floor: f64,
    },
    /// A certified `sup c` was given but the grid shows a larger value.
    PotentialAboveSup {
        x: f64,
        value: f64,
        c_sup: f64,
    },
    LambdaNotAdmissible {
        re_lambda: f64,
        growth: f64,
    },
    /// `|g|` at the outermost cells exceeds the allowed fraction of `‖g‖`.
    RhsNotDecaying {
        edge: f64,
        sup: f64,
        fraction: f64,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite { name, x } => write!(f, "{name} not finite at x = {x}"),
            Self::DiffusionNotPositive { x, value } => write!(
                f,
                "a not bounded below by positive constant: a({x}) = {value}"
            ),
            Self::DiffusionBelowFloor { x, value, floor } => {
                write!(f, "a({x}) = {value} is below the declared floor {floor}")
            }
            Self::PotentialAboveSup { x, value, c_sup } => {
                write!(f, "c({x}) = {value} exceeds the declared sup {c_sup}")
            }
            Self::LambdaNotAdmissible { re_lambda, growth } => write!(
                f,
                "Re lambda <= growth bound: Re lambda = {re_lambda}, w = {growth}"
            ),
            Self::RhsNotDecaying {
                edge,
                sup,
                fraction,
            } => write!(
                f,
                "g does not decay at the grid edges: |g| = {edge} > {fraction} * {sup}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSettings {
    /// Allowed ratio `|g(edge)| / ‖g‖` at the two outermost cells.
    pub decay_fraction: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            decay_fraction: 1e-3,
        }
    }
}

/// Lists every violated assumption; an empty list means the problem is admissible.
pub fn validate(spec: &ProblemSpec, grid: &Grid1D, settings: &ValidationSettings) -> Vec<Finding> {
    let coeffs = &spec.coefficients;
    let mut findings = Vec::new();
    let mut first_nonpositive = None;
    let mut first_below_floor = None;
    let mut first_above_sup = None;
    let mut c_finite = true;
    let mut non_finite = [None::<f64>; 4];
    let mut rhs = Vec::with_capacity(grid.n_points());
    let mut sup_c = f64::NEG_INFINITY;

    for x in grid.nodes() {
        let (a, b, c, g) = (
            coeffs.a.eval(x),
            coeffs.b.eval(x),
            coeffs.c.eval(x),
            spec.rhs.eval(x),
        );
        for (slot, v) in non_finite.iter_mut().zip([a, b, c, g]) {
            if !v.is_finite() && slot.is_none() {
                *slot = Some(x);
            }
        }
        if !c.is_finite() {
            c_finite = false;
        } else {
            sup_c = sup_c.max(c);
        }
        if a.is_finite() {
            if a <= 0.0 && first_nonpositive.is_none() {
                first_nonpositive = Some((x, a));
            }
            if let Some(floor) = coeffs.a_floor {
                if a < floor && first_below_floor.is_none() {
                    first_below_floor = Some((x, a, floor));
                }
            }
        }
        if let Some(c_sup) = coeffs.c_sup {
            if c.is_finite() && c > c_sup && first_above_sup.is_none() {
                first_above_sup = Some((x, c, c_sup));
            }
        }
        rhs.push(g);
    }

    for (name, slot) in ["a", "b", "c", "g"].into_iter().zip(non_finite) {
        if let Some(x) = slot {
            findings.push(Finding::NonFinite { name, x });
        }
    }
    if let Some((x, value)) = first_nonpositive {
        findings.push(Finding::DiffusionNotPositive { x, value });
    } else if coeffs.a_floor.is_some_and(|f| !(f > 0.0)) {
        findings.push(Finding::DiffusionNotPositive {
            x: f64::NAN,
            value: coeffs.a_floor.unwrap_or(0.0),
        });
    }
    if let Some((x, value, floor)) = first_below_floor {
        findings.push(Finding::DiffusionBelowFloor { x, value, floor });
    }
    if let Some((x, value, c_sup)) = first_above_sup {
        findings.push(Finding::PotentialAboveSup { x, value, c_sup });
    }
    if c_finite {
        let growth = sup_c
            .max(coeffs.c_sup.unwrap_or(f64::NEG_INFINITY))
            .max(0.0);
        if !(spec.lambda.re > growth) {
            findings.push(Finding::LambdaNotAdmissible {
                re_lambda: spec.lambda.re,
                growth,
            });
        }
    }
    if rhs.iter().all(|v| v.is_finite()) {
        let sup = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = rhs.len();
        let edge = [rhs[0], rhs[1], rhs[n - 2], rhs[n - 1]]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > 0.0 && edge > settings.decay_fraction * sup {
            findings.push(Finding::RhsNotDecaying {
                edge,
                sup,
                fraction: settings.decay_fraction,
            });
        }
    }
    findings
}
