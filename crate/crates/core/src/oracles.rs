//! Independent references: exact constant-coefficient semigroups and Green's functions,
//! and a finite-difference boundary-value solver for variable coefficients.
//!
//! These deliberately share no quadrature code with the kernel module. Grid data is
//! interpolated by local cubics and integrated cell by cell with composite Simpson on at
//! least four sub-intervals per cell.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::problem::ProblemSpec;

/// Cubic through the four nodes around cell `j` (values beyond the grid are zero).
struct CellCubic<'a> {
    values: &'a [f64],
    x_min: f64,
    h: f64,
}

impl CellCubic<'_> {
    fn node(&self, k: isize) -> f64 {
        if k < 0 || k as usize >= self.values.len() {
            0.0
        } else {
            self.values[k as usize]
        }
    }

    /// Interpolant at `x` inside cell `j`, i.e. `x_j <= x <= x_{j+1}`.
    fn eval(&self, j: usize, x: f64) -> f64 {
        let s = (x - self.x_min) / self.h - j as f64;
        let j = j as isize;
        let (fm, f0, f1, f2) = (
            self.node(j - 1),
            self.node(j),
            self.node(j + 1),
            self.node(j + 2),
        );
        // Lagrange basis on nodes -1, 0, 1, 2
        let lm = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let l0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let l1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let l2 = (s + 1.0) * s * (s - 1.0) / 6.0;
        fm * lm + f0 * l0 + f1 * l1 + f2 * l2
    }
}

/// Composite Simpson over `[lo, hi]` with `m` (even) sub-intervals.
fn simpson<T>(lo: f64, hi: f64, m: usize, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
{
    let h = (hi - lo) / m as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc = acc + f(lo + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

fn even_at_least(m: f64, floor: usize) -> usize {
    let m = (m.ceil() as usize).max(floor);
    m + m % 2
}

/// Exact semigroup of `a ∂² + b ∂ + c` with constant coefficients applied to `f`:
/// `e^{ct}` times the Gaussian convolution with mean `-b t` and variance `2 a t`.
pub fn heat_reference(
    t: f64,
    f: &GridFunction<f64>,
    a: f64,
    b: f64,
    c: f64,
) -> Result<GridFunction<f64>> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(a > 0.0) {
        return Err(Error::NonPositiveDiffusion {
            x: f64::NAN,
            value: a,
        });
    }
    let grid = *f.grid();
    let h = grid.spacing();
    let cubic = CellCubic {
        values: f.values(),
        x_min: grid.x_min(),
        h,
    };
    let var = 2.0 * a * t;
    let sigma = var.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let growth = (c * t).exp();
    let sub = even_at_least(8.0 * h / sigma, 4);
    let cells = grid.n_points() - 1;
    let values = grid
        .nodes()
        .map(|x| {
            let centre = x + b * t;
            let lo = centre - 12.0 * sigma;
            let hi = centre + 12.0 * sigma;
            let first = (((lo - grid.x_min()) / h).floor().max(0.0) as usize).min(cells);
            let last = (((hi - grid.x_min()) / h).ceil().max(0.0) as usize).min(cells);
            let mut acc = 0.0;
            for j in first..last {
                let xl = grid.x(j);
                acc += simpson(xl, xl + h, sub, |y| {
                    let d = y - centre;
                    (-d * d / (2.0 * var)).exp() * cubic.eval(j, y)
                });
            }
            growth * norm * acc
        })
        .collect();
    GridFunction::from_values(grid, values)
}

/// `(λ - a ∂²)^{-1} g` via the kernel `e^{-√(λ/a)|x-y|} / (2√(λ a))`.
pub fn green_reference(
    lambda: Complex64,
    g: &GridFunction<f64>,
    a: f64,
) -> Result<GridFunction<Complex64>> {
    if !(lambda.re > 0.0) {
        return Err(Error::LambdaNotAdmissible {
            re_lambda: lambda.re,
            omega: 0.0,
        });
    }
    if !(a > 0.0) {
        return Err(Error::NonPositiveDiffusion {
            x: f64::NAN,
            value: a,
        });
    }
    let grid = *g.grid();
    let h = grid.spacing();
    let cubic = CellCubic {
        values: g.values(),
        x_min: grid.x_min(),
        h,
    };
    let rate = (lambda / a).sqrt();
    let prefactor = 1.0 / (2.0 * (lambda * a).sqrt());
    // beyond this distance the kernel is below 1e-18 of its peak
    let reach = 41.5 / rate.re;
    let sub = even_at_least(8.0 * h * rate.norm(), 4);
    let cells = grid.n_points() - 1;
    let values = grid
        .nodes()
        .map(|x| {
            let first = (((x - reach - grid.x_min()) / h).floor().max(0.0) as usize).min(cells);
            let last = (((x + reach - grid.x_min()) / h).ceil().max(0.0) as usize).min(cells);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in first..last {
                let xl = grid.x(j);
                acc += simpson(xl, xl + h, sub, |y| {
                    (-rate * (x - y).abs()).exp() * cubic.eval(j, y)
                });
            }
            acc * prefactor
        })
        .collect();
    GridFunction::from_values(grid, values)
}

/// Thomas elimination for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::InvalidConfig(
            "tridiagonal band lengths differ".into(),
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
    let mut d_prime = vec![Complex64::new(0.0, 0.0); n];
    let pivot_ok =
        |p: Complex64| p.norm() > f64::EPSILON * 1e-3 && p.re.is_finite() && p.im.is_finite();
    if !pivot_ok(diag[0]) {
        return Err(Error::SingularSystem(0));
    }
    c_prime[0] = sup[0] / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let pivot = diag[i] - sub[i] * c_prime[i - 1];
        if !pivot_ok(pivot) {
            return Err(Error::SingularSystem(i));
        }
        c_prime[i] = sup[i] / pivot;
        d_prime[i] = (rhs[i] - sub[i] * d_prime[i - 1]) / pivot;
    }
    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_prime[i] * next;
    }
    Ok(x)
}

/// Central differences for `a f'' + b f' + (c - λ) f = -g` with `f = 0` at both grid ends.
pub fn fd_bvp_solve(spec: &ProblemSpec, grid: &Grid1D) -> Result<GridFunction<Complex64>> {
    let coeffs = spec.coefficients.sample(grid)?;
    let g = spec.rhs.sample(grid)?;
    let n = grid.n_points();
    let h = grid.spacing();
    let m = n - 2;
    let lambda = spec.lambda;
    let mut sub = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    let mut sup = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 1..n - 1 {
        let (a, b, c) = (coeffs.a[i], coeffs.b[i], coeffs.c[i]);
        sub.push(Complex64::new(a / (h * h) - b / (2.0 * h), 0.0));
        diag.push(Complex64::new(-2.0 * a / (h * h) + c, 0.0) - lambda);
        sup.push(Complex64::new(a / (h * h) + b / (2.0 * h), 0.0));
        rhs.push(Complex64::new(-g.values()[i], 0.0));
    }
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let mut values = Vec::with_capacity(n);
    values.push(Complex64::new(0.0, 0.0));
    values.extend(inner);
    values.push(Complex64::new(0.0, 0.0));
    GridFunction::from_values(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fd_derivatives, sample};
    use crate::problem::{Coefficient, CoefficientSet};
    use approx::assert_abs_diff_eq;

    fn half_gaussian(grid: &Grid1D) -> GridFunction<f64> {
        sample(|x| (-x * x / 2.0).exp(), grid).unwrap()
    }

    #[test]
    fn heat_closed_form() {
        let grid = Grid1D::default();
        let out = heat_reference(0.5, &half_gaussian(&grid), 1.0, 0.0, 0.0).unwrap();
        // cubic interpolation of the data limits the oracle to ~h⁴
        assert_abs_diff_eq!(out.at(0.0), 1.0 / 2f64.sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn heat_small_time_is_identity() {
        let grid = Grid1D::default();
        let f = half_gaussian(&grid);
        let out = heat_reference(1e-6, &f, 1.0, 0.0, 0.0).unwrap();
        assert!(out.distance(&f).unwrap() < 1e-4);
    }

    #[test]
    fn heat_potential_is_a_scalar_factor() {
        let grid = Grid1D::default();
        let f = half_gaussian(&grid);
        let base = heat_reference(0.7, &f, 1.0, 0.0, 0.0).unwrap();
        let scaled = heat_reference(0.7, &f, 1.0, 0.0, 1.0).unwrap();
        assert!(scaled.distance(&base.scale(0.7f64.exp())).unwrap() < 1e-14);
    }

    #[test]
    fn heat_semigroup_law() {
        let grid = Grid1D::default();
        let f = sample(|x| (-x * x).exp() * (1.0 + 0.5 * x), &grid).unwrap();
        let (a, b, c) = (1.0, 0.5, -0.3);
        let once = heat_reference(0.8, &f, a, b, c).unwrap();
        let twice =
            heat_reference(0.5, &heat_reference(0.3, &f, a, b, c).unwrap(), a, b, c).unwrap();
        assert!(once.distance(&twice).unwrap() < 1e-6);
    }

    #[test]
    fn green_examples() {
        let grid = Grid1D::default();
        let g = sample(|x| (-x.abs()).exp(), &grid).unwrap();
        let out = green_reference(Complex64::new(1.0, 0.0), &g, 1.0).unwrap();
        // the interpolant straddles the kink of g at 0, an O(h²) effect
        assert_abs_diff_eq!(out.at(0.0).re, 0.5, epsilon = 5e-4);
        assert_abs_diff_eq!(out.at(0.0).im, 0.0, epsilon = 1e-15);

        let zero = GridFunction::zeros(grid);
        assert_eq!(
            green_reference(Complex64::new(1.0, 0.0), &zero, 1.0)
                .unwrap()
                .sup_norm(),
            0.0
        );

        let lam = Complex64::new(2.0, 1.0);
        let single = green_reference(lam, &g, 1.5).unwrap();
        let triple = green_reference(lam, &g.scale(3.0), 1.5).unwrap();
        assert!(triple.distance(&single.map(|v| v * 3.0)).unwrap() < 1e-14);
    }

    /// `R_λ g = ∫ e^{-λt} e^{tA} g dt`, integrated with Gauss–Laguerre-free brute force:
    /// Simpson in `s = sqrt(t)` on a long horizon.
    #[test]
    fn green_is_laplace_transform_of_heat() {
        let grid = Grid1D::new(-15.0, 15.0, 301).unwrap();
        let g = sample(|x| (-x * x).exp(), &grid).unwrap();
        for lam in [1.0, 2.5, 6.0] {
            let green = green_reference(Complex64::new(lam, 0.0), &g, 1.0).unwrap();
            let horizon: f64 = 40.0 / lam;
            let m = 240;
            let ds = horizon.sqrt() / m as f64;
            let mut acc = vec![0.0; grid.n_points()];
            for k in 1..=m {
                let s = k as f64 * ds;
                let w = if k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let t = s * s;
                let heat = heat_reference(t, &g, 1.0, 0.0, 0.0).unwrap();
                for (o, v) in acc.iter_mut().zip(heat.values()) {
                    *o += w * (-lam * t).exp() * 2.0 * s * v * ds / 3.0;
                }
            }
            let err = acc
                .iter()
                .zip(green.values())
                .map(|(l, r)| (l - r.re).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-5, "lambda {lam}: {err}");
        }
    }

    #[test]
    fn fd_bvp_zero_rhs() {
        let spec = ProblemSpec::new(CoefficientSet::constant(1.0, 0.0, 0.0), 1.0, 0.0);
        let f = fd_bvp_solve(&spec, &Grid1D::default()).unwrap();
        assert_eq!(f.sup_norm(), 0.0);
    }

    #[test]
    fn fd_bvp_green_benchmark_and_exact_discrete_residual() {
        let grid = Grid1D::default();
        let spec = ProblemSpec::new(
            CoefficientSet::constant(1.0, 0.0, 0.0),
            1.0,
            Coefficient::ExpAbs {
                amp: 1.0,
                rate: 1.0,
            },
        );
        let f = fd_bvp_solve(&spec, &grid).unwrap();
        assert_abs_diff_eq!(f.at(0.0).re, 0.5, epsilon = 1e-3);

        let variable = ProblemSpec::new(
            CoefficientSet::new(
                Coefficient::Rational {
                    base: 1.0,
                    amp: 0.5,
                    scale: 1.0,
                },
                Coefficient::Sinusoidal {
                    base: 0.0,
                    amp: 1.0,
                    freq: 1.0,
                    phase: 0.0,
                    decay: 1.0,
                },
                Coefficient::Rational {
                    base: 0.0,
                    amp: -1.0,
                    scale: 1.0,
                },
            ),
            Complex64::new(1.0, 0.5),
            Coefficient::Gaussian {
                base: 0.0,
                amp: 1.0,
                width: 1.0,
                center: 0.0,
            },
        );
        let f = fd_bvp_solve(&variable, &grid).unwrap();
        let d = fd_derivatives(&f).unwrap();
        let cs = variable.coefficients.sample(&grid).unwrap();
        let g = variable.rhs.sample(&grid).unwrap();
        for i in 1..grid.n_points() - 1 {
            let r = d.second.values()[i] * cs.a[i]
                + d.first.values()[i] * cs.b[i]
                + f.values()[i] * (cs.c[i] - variable.lambda)
                + g.values()[i];
            assert!(r.norm() < 1e-10, "node {i}: {}", r.norm());
        }
    }

    #[test]
    fn fd_bvp_second_order_in_spacing() {
        let spec = ProblemSpec::new(
            CoefficientSet::constant(1.0, 0.0, 0.0),
            1.0,
            Coefficient::Gaussian {
                base: 0.0,
                amp: 1.0,
                width: 1.0,
                center: 0.0,
            },
        );
        // exact at x = 0: ∫ e^{-|y|}/2 · e^{-y²} dy = (√π/2) e^{1/4} erfc(1/2)
        let exact = 0.5 * std::f64::consts::PI.sqrt() * 0.25f64.exp() * 0.479_500_122_186_953_5;
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| {
                let grid = Grid1D::symmetric(20.0, h).unwrap();
                (fd_bvp_solve(&spec, &grid).unwrap().at(0.0).re - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn thomas_detects_singularity() {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        assert!(matches!(
            solve_tridiagonal(&[z, one], &[one, one], &[one, z], &[one, one]),
            Err(Error::SingularSystem(1))
        ));
    }
}
