//! Resolvents `(λ - H)^{-1}` as truncated Laplace integrals of Chernoff approximations,
//!
//! ```text
//! R_λ g ≈ Σ_k w_k e^{-λ t_k} S(t_k/n)^n g,
//! ```
//!
//! with a composite Gauss–Legendre rule on `[0, T]`. The horizon `T` is chosen so that the
//! discarded tail `∫_T^∞` is certified below `ε/2`, given `‖S(t)^k‖ <= M e^{ω t k}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fd_derivatives, Grid1D, GridFunction, Scalar};
use crate::kernel::{boundary_margin, ChernoffConfig, ChernoffOperator, KernelConvention};
use crate::problem::{
    growth_bound, validate, CoefficientSet, ProblemSpec, SemigroupBounds, ValidationSettings,
};
use crate::quadrature::gauss_legendre;

/// Horizon used when the closed form is not positive.
pub const MIN_HORIZON: f64 = 1.0;

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;

/// Number of geometrically shrinking panels between `0` and the first regular panel.
pub const GRADING_LEVELS: u32 = 10;

/// Largest grid accepted by [`resolve_matrix`].
pub const DENSE_LIMIT: usize = 200;

fn gap(lambda: Complex64, bounds: &SemigroupBounds) -> Result<f64> {
    let gap = lambda.re - bounds.omega;
    if !(gap > 0.0) {
        return Err(Error::LambdaNotAdmissible {
            re_lambda: lambda.re,
            omega: bounds.omega,
        });
    }
    Ok(gap)
}

/// `T = ln(4M / (ε (Re λ - ω))) / (Re λ - ω)`, or [`MIN_HORIZON`] when that is not
/// positive. Guarantees `2M e^{-T (Re λ - ω)} / (Re λ - ω) <= ε/2`.
pub fn truncation_horizon(eps: f64, lambda: Complex64, bounds: &SemigroupBounds) -> Result<f64> {
    let gap = gap(lambda, bounds)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let horizon = (4.0 * bounds.m / (eps * gap)).ln() / gap;
    Ok(if horizon > 0.0 { horizon } else { MIN_HORIZON })
}

/// `2M e^{-T (Re λ - ω)} / (Re λ - ω)`: bound on the discarded tail per unit `‖g‖`.
pub fn tail_bound(horizon: f64, lambda: Complex64, bounds: &SemigroupBounds) -> Result<f64> {
    let gap = gap(lambda, bounds)?;
    Ok(2.0 * bounds.m * (-horizon * gap).exp() / gap)
}

/// Composite quadrature for `∫_0^T` with the associated truncation data.
#[derive(Debug, Clone, Serialize)]
pub struct LaplaceRule {
    pub horizon: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub lambda: Complex64,
    pub bounds: SemigroupBounds,
    pub panels: Vec<(f64, f64)>,
    pub tail_bound: f64,
    /// Panel-doubling error estimate on `e^{-λt} e^{ωt}`.
    pub model_error: f64,
    /// Re-run every resolve with all panels split in two and record the disagreement.
    pub verify: bool,
}

impl LaplaceRule {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn with_verification(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    /// The same truncation with every panel split in half.
    pub fn refined(&self) -> Self {
        let panels = split_panels(&self.panels);
        let (nodes, weights) = panel_rule(&panels);
        Self {
            nodes,
            weights,
            panels,
            ..self.clone()
        }
    }

    /// `Σ w_k φ(t_k)`.
    pub fn integrate(&self, phi: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(Complex64::new(0.0, 0.0), |acc, (&t, &w)| acc + phi(t) * w)
    }
}

fn split_panels(panels: &[(f64, f64)]) -> Vec<(f64, f64)> {
    panels
        .iter()
        .flat_map(|&(lo, hi)| {
            let mid = 0.5 * (lo + hi);
            [(lo, mid), (mid, hi)]
        })
        .collect()
}

fn panel_rule(panels: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let mut nodes = Vec::with_capacity(panels.len() * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels.len() * PANEL_ORDER);
    for &(lo, hi) in panels {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

fn layout_panels(horizon: f64, width: f64) -> Vec<(f64, f64)> {
    let width = width.min(horizon);
    let mut panels = Vec::new();
    let mut lo = 0.0;
    for level in (0..GRADING_LEVELS).rev() {
        let hi = width / f64::powi(2.0, level as i32);
        panels.push((lo, hi));
        lo = hi;
    }
    let mut k = 1.0;
    while lo < horizon {
        let hi = (width * (k + 1.0)).min(horizon);
        if horizon - hi < 1e-12 * horizon {
            panels.push((lo, horizon));
            break;
        }
        panels.push((lo, hi));
        lo = hi;
        k += 1.0;
    }
    panels
}

/// Composite 16-point Gauss–Legendre rule on `[0, T(ε)]`: panels of width
/// `1/nodes_per_unit`, refined geometrically towards `t = 0`, halved until a panel-doubling
/// comparison on the model integrand `e^{-(λ - ω) t}` agrees within `ε/2`.
pub fn build_laplace_rule(
    eps: f64,
    lambda: Complex64,
    bounds: &SemigroupBounds,
    nodes_per_unit: usize,
) -> Result<LaplaceRule> {
    if nodes_per_unit == 0 {
        return Err(Error::InvalidConfig(
            "nodes_per_unit must be at least 1".into(),
        ));
    }
    let horizon = truncation_horizon(eps, lambda, bounds)?;
    let shifted = lambda - bounds.omega;
    let model = |t: f64| (-shifted * t).exp();
    let mut width = 1.0 / nodes_per_unit as f64;
    for _ in 0..30 {
        let panels = layout_panels(horizon, width);
        let (nodes, weights) = panel_rule(&panels);
        let mut rule = LaplaceRule {
            horizon,
            nodes,
            weights,
            epsilon: eps,
            lambda,
            bounds: *bounds,
            panels,
            tail_bound: tail_bound(horizon, lambda, bounds)?,
            model_error: 0.0,
            verify: false,
        };
        let fine = rule.refined();
        rule.model_error = (rule.integrate(model) - fine.integrate(model)).norm();
        if rule.model_error <= 0.5 * eps {
            return Ok(rule);
        }
        width *= 0.5;
    }
    Err(Error::InvalidConfig(format!(
        "could not resolve the Laplace integrand for lambda = {lambda} within eps = {eps}"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolveParameters {
    pub n_compose: usize,
    pub horizon: f64,
    pub node_count: usize,
    pub panel_count: usize,
    pub convention: KernelConvention,
    pub quad_halfwidth_sigmas: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub m: f64,
    /// Width of the boundary strip left out of `residual_sup`.
    pub residual_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    #[serde(skip)]
    pub solution: GridFunction<Complex64>,
    /// `‖λ f - L_h f - g‖` over interior nodes, `L_h` by finite differences.
    pub residual_sup: f64,
    /// Certified bound on the discarded tail, per unit `‖g‖`.
    pub tail_bound: f64,
    /// Panel-doubling disagreement `‖R_rule g - R_refined g‖`, when verification ran.
    pub quadrature_disagreement: Option<f64>,
    pub warnings: Vec<String>,
    pub parameters: ResolveParameters,
}

fn laplace_sum<T: Scalar>(
    operator: &ChernoffOperator,
    g: &GridFunction<T>,
    lambda: Complex64,
    nodes: &[f64],
    weights: &[f64],
) -> Result<GridFunction<Complex64>> {
    let terms = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&t, &w)| {
            let evolved = operator.evolve(t, g)?;
            let factor = (-lambda * t).exp() * w;
            Ok(evolved
                .values()
                .iter()
                .map(|v| v.to_complex() * factor)
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![Complex64::new(0.0, 0.0); g.grid().n_points()];
    for term in &terms {
        for (a, v) in acc.iter_mut().zip(term) {
            *a += v;
        }
    }
    Ok(GridFunction::from_values_unchecked(*g.grid(), acc))
}

/// `‖λ f - (a f'' + b f' + c f) - g‖` over nodes at least `margin` from the grid ends.
pub fn resolvent_residual<T: Scalar>(
    f: &GridFunction<Complex64>,
    g: &GridFunction<T>,
    lambda: Complex64,
    coeffs: &crate::problem::SampledCoefficients,
    margin: f64,
) -> Result<f64> {
    let d = fd_derivatives(f)?;
    let interior = f.grid().interior(margin);
    Ok(interior
        .map(|i| {
            let lf = d.second.values()[i] * coeffs.a[i]
                + d.first.values()[i] * coeffs.b[i]
                + f.values()[i] * coeffs.c[i];
            (f.values()[i] * lambda - lf - g.values()[i].to_complex()).norm()
        })
        .fold(0.0, f64::max))
}

fn check_lambda(
    lambda: Complex64,
    coeffs: &CoefficientSet,
    grid: &Grid1D,
    rule: &LaplaceRule,
) -> Result<()> {
    let w = growth_bound(coeffs, grid)?;
    let omega = w.max(rule.bounds.omega);
    if !(lambda.re > omega) {
        return Err(Error::LambdaNotAdmissible {
            re_lambda: lambda.re,
            omega,
        });
    }
    if rule.lambda != lambda {
        return Err(Error::InvalidConfig(format!(
            "Laplace rule was built for lambda = {}, not {lambda}",
            rule.lambda
        )));
    }
    Ok(())
}

/// `Σ_k w_k e^{-λ t_k} S(t_k/n)^n g`, with residual and tail diagnostics.
pub fn resolve_apply<T: Scalar>(
    g: &GridFunction<T>,
    lambda: Complex64,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
    rule: &LaplaceRule,
) -> Result<ResolventReport> {
    check_lambda(lambda, coeffs, g.grid(), rule)?;
    let operator = ChernoffOperator::new(coeffs, g.grid(), config)?;
    let solution = laplace_sum(&operator, g, lambda, &rule.nodes, &rule.weights)?;
    let margin = boundary_margin(rule.horizon, operator.coefficients().sup_a());
    let residual_sup = resolvent_residual(&solution, g, lambda, operator.coefficients(), margin)?;

    let mut warnings = Vec::new();
    let quadrature_disagreement = if rule.verify {
        let fine = rule.refined();
        let check = laplace_sum(&operator, g, lambda, &fine.nodes, &fine.weights)?;
        let gap = solution.distance(&check)?;
        if gap > rule.epsilon {
            warnings.push(format!(
                "panel-doubling disagreement {gap:.3e} exceeds eps = {:.3e}",
                rule.epsilon
            ));
        }
        Some(gap)
    } else {
        None
    };

    Ok(ResolventReport {
        solution,
        residual_sup,
        tail_bound: rule.tail_bound,
        quadrature_disagreement,
        warnings,
        parameters: ResolveParameters {
            n_compose: config.n_compose,
            horizon: rule.horizon,
            node_count: rule.node_count(),
            panel_count: rule.panels.len(),
            convention: config.convention,
            quad_halfwidth_sigmas: config.quad_halfwidth_sigmas,
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            epsilon: rule.epsilon,
            omega: rule.bounds.omega,
            m: rule.bounds.m,
            residual_margin: margin,
        },
    })
}

/// Dense discretised resolvent; column `j` is the resolvent of the `j`-th nodal indicator.
#[derive(Debug, Clone)]
pub struct ResolventMatrix {
    grid: Grid1D,
    /// Row-major.
    entries: Vec<Complex64>,
}

impl ResolventMatrix {
    pub fn size(&self) -> usize {
        self.grid.n_points()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.size() + j]
    }

    pub fn apply<T: Scalar>(&self, g: &GridFunction<T>) -> Result<GridFunction<Complex64>> {
        if *g.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.size();
        let values = (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .zip(g.values())
                    .fold(Complex64::new(0.0, 0.0), |acc, (m, v)| {
                        acc + m * v.to_complex()
                    })
            })
            .collect();
        Ok(GridFunction::from_values_unchecked(self.grid, values))
    }

    /// Largest row sum of `|entries|`: the induced sup-norm of the matrix.
    pub fn max_row_sum(&self) -> f64 {
        let n = self.size();
        (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `‖self - other‖` in the induced sup-norm.
    pub fn distance_to(&self, other: &[Complex64]) -> f64 {
        let n = self.size();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (self.entries[i * n + j] - other[i * n + j]).norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

pub fn resolve_matrix(
    lambda: Complex64,
    coeffs: &CoefficientSet,
    config: &ChernoffConfig,
    rule: &LaplaceRule,
    grid: &Grid1D,
) -> Result<ResolventMatrix> {
    let n = grid.n_points();
    if n > DENSE_LIMIT {
        return Err(Error::GridTooLarge {
            n_points: n,
            limit: DENSE_LIMIT,
        });
    }
    check_lambda(lambda, coeffs, grid, rule)?;
    let operator = ChernoffOperator::new(coeffs, grid, config)?;
    let columns = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut basis = vec![0.0; n];
            basis[j] = 1.0;
            let e = GridFunction::from_values_unchecked(*grid, basis);
            laplace_sum(&operator, &e, lambda, &rule.nodes, &rule.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.values().iter().enumerate() {
            entries[i * n + j] = *v;
        }
    }
    Ok(ResolventMatrix {
        grid: *grid,
        entries,
    })
}

/// Default panel density for [`solve_ode`].
pub const DEFAULT_NODES_PER_UNIT: usize = 1;

/// Solves `a f'' + b f' + (c - λ) f = -g` as `f = R_λ g`.
pub fn solve_ode(
    spec: &ProblemSpec,
    grid: &Grid1D,
    config: &ChernoffConfig,
    eps: f64,
) -> Result<ResolventReport> {
    let findings = validate(spec, grid, &ValidationSettings::default());
    if !findings.is_empty() {
        return Err(Error::Validation(
            findings.iter().map(|f| f.to_string()).collect(),
        ));
    }
    let bounds = SemigroupBounds::for_coefficients(&spec.coefficients, grid)?;
    let rule = build_laplace_rule(eps, spec.lambda, &bounds, DEFAULT_NODES_PER_UNIT)?;
    let g = spec.rhs.sample(grid)?;
    resolve_apply(&g, spec.lambda, &spec.coefficients, config, &rule)
}
