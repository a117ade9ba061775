//! Chernoff product approximations for the diffusion operator
//! `(Hf)(x) = a(x) f''(x) + b(x) f'(x) + c(x) f(x)` on the real line, and the resolvent
//! `(λ - H)^{-1}` obtained from them by Laplace quadrature in time.
//!
//! The pipeline, bottom up:
//!
//! - [`grid`]: uniform truncated grids and sampled fields (zero outside the grid).
//! - [`problem`]: coefficients, admissibility checks, growth bound `w = max(0, sup c)`.
//! - [`kernel`]: the Chernoff function `S(t)` as Gaussian kernel sums.
//! - [`semigroup`]: `S(t/n)^n f` and convergence studies.
//! - [`resolvent`]: `Σ w_k e^{-λ t_k} S(t_k/n)^n g`, dense resolvent matrices, ODE solves.
//! - [`oracles`]: exact constant-coefficient references and a finite-difference BVP solver.
//! - [`cli`]: the `chernoff` batch front end.
//!
//! ```no_run
//! use chernoff::prelude::*;
//!
//! let spec = ProblemSpec::new(
//!     CoefficientSet::new(
//!         Coefficient::Rational { base: 1.0, amp: 0.5, scale: 1.0 },
//!         Coefficient::Sinusoidal { base: 0.0, amp: 1.0, freq: 1.0, phase: 0.0, decay: 1.0 },
//!         Coefficient::Rational { base: 0.0, amp: -1.0, scale: 1.0 },
//!     ),
//!     1.0,
//!     Coefficient::Gaussian { base: 0.0, amp: 1.0, width: 1.0, center: 0.0 },
//! );
//! let report = solve_ode(&spec, &Grid1D::default(), &ChernoffConfig::default(), 1e-3).unwrap();
//! println!("f(0) = {}, residual = {}", report.solution.at(0.0).re, report.residual_sup);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracles;
pub mod problem;
pub mod quadrature;
pub mod resolvent;
pub mod semigroup;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::grid::{fd_derivatives, sample, sup_norm, Grid1D, GridFunction, Scalar};
    pub use crate::kernel::{
        apply_s, apply_s1, apply_s2, apply_s3, tangency_defect, tangency_study, ChernoffConfig,
        ChernoffOperator, KernelConvention,
    };
    pub use crate::oracles::{fd_bvp_solve, green_reference, heat_reference};
    pub use crate::problem::{
        growth_bound, potential, validate, Coefficient, CoefficientSet, Finding, ProblemSpec,
        SemigroupBounds, ValidationSettings,
    };
    pub use crate::resolvent::{
        build_laplace_rule, resolve_apply, resolve_matrix, solve_ode, truncation_horizon,
        LaplaceRule, ResolventMatrix, ResolventReport,
    };
    pub use crate::semigroup::{convergence_study, evolve, loglog_slope, ConvergenceTable};
    pub use num_complex::Complex64;
}
