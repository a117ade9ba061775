//! Chernoff approximations `S(t/n)^n f` of the semigroup `e^{tH} f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Scalar};
use crate::kernel::{ChernoffConfig, ChernoffOperator};
use crate::oracles::heat_reference;
use crate::problem::CoefficientSet;

impl ChernoffOperator {
    /// `n` successive applications of one `S(t/n)` step to the running field.
    pub fn evolve<T: Scalar>(&self, t: f64, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        let n = self.config().n_compose;
        if n < 1 {
            return Err(Error::ZeroCompositions);
        }
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if *f.grid() != *self.grid() {
            return Err(Error::GridMismatch);
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let step = self.step_matrix(t / n as f64)?;
        let mut current = step.apply_unchecked(f.values());
        for _ in 1..n {
            current = step.apply_unchecked(current.values());
        }
        Ok(current)
    }
}

/// `S(t/n)^n f` with `n = config.n_compose`.
pub fn evolve<T: Scalar>(
    t: f64,
    f: &GridFunction<T>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
) -> Result<GridFunction<T>> {
    if config.n_compose < 1 {
        return Err(Error::ZeroCompositions);
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    ChernoffOperator::new(coeffs, f.grid(), config)?.evolve(t, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Closed-form constant-coefficient semigroup.
    Analytic,
    /// The run with the largest `n`; an internal consistency measure only.
    SelfConvergence,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub reference: ReferenceKind,
    /// `(n, sup-distance to reference)`.
    pub rows: Vec<(usize, f64)>,
    /// `p` in `distance ~ n^{-p}`, from the rows with positive distance.
    pub order: Option<f64>,
}

impl ConvergenceTable {
    pub fn distance(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|(m, _)| *m == n).map(|(_, d)| *d)
    }

    pub fn csv_rows(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|&(n, d)| (n as f64, d)).collect()
    }
}

/// Distances of `S(t/n)^n f` to a reference for each `n` in `n_list`.
///
/// With constant coefficients the reference is the exact semigroup of the generator the
/// chosen convention is tangent to; otherwise it is the run with the largest `n`.
pub fn convergence_study(
    t: f64,
    f: &GridFunction<f64>,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
    n_list: &[usize],
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::InvalidConfig("n_list must not be empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "n_list must be strictly increasing".into(),
        ));
    }
    config.validate()?;
    let runs = n_list
        .iter()
        .map(|&n| {
            let op = ChernoffOperator::new(coeffs, f.grid(), &config.with_n(n))?;
            op.evolve(t, f)
        })
        .collect::<Result<Vec<_>>>()?;

    let (kind, reference) = match coeffs.constants() {
        Some((a, b, c)) if t > 0.0 => {
            let a_eff = a * config.convention.diffusion_factor();
            (ReferenceKind::Analytic, heat_reference(t, f, a_eff, b, c)?)
        }
        Some(_) => (ReferenceKind::Analytic, f.clone()),
        None => (
            ReferenceKind::SelfConvergence,
            runs.last().cloned().unwrap_or_else(|| f.clone()),
        ),
    };
    let rows = n_list
        .iter()
        .zip(&runs)
        .map(|(&n, run)| Ok((n, run.distance(&reference)?)))
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|&(n, d)| (n as f64, d))
        .collect();
    let order = loglog_slope(&positive).map(|s| -s);
    Ok(ConvergenceTable {
        reference: kind,
        rows,
        order,
    })
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Some(sxy / sxx)
}
