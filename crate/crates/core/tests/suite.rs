//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use chernoff::kernel::{apply_s, tangency_study};
use chernoff::prelude::*;
use chernoff::resolvent::{resolve_apply, tail_bound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Tail bounds and epsilons of every resolvent run made by the suite.
#[derive(Default)]
struct Ledger {
    tails: Vec<(f64, f64)>,
}

impl Ledger {
    fn record(&mut self, rule: &LaplaceRule, report: &ResolventReport) {
        self.tails.push((report.tail_bound, rule.epsilon));
    }
}

fn benchmark() -> CoefficientSet {
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
    )
}

fn gaussian() -> Coefficient {
    Coefficient::Gaussian {
        base: 0.0,
        amp: 1.0,
        width: 1.0,
        center: 0.0,
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn resolve(
    g: &GridFunction<f64>,
    lambda: f64,
    coeffs: &CoefficientSet,
    eps: f64,
    ledger: &mut Ledger,
) -> ResolventReport {
    let bounds = SemigroupBounds::for_coefficients(coeffs, g.grid()).unwrap();
    let rule = build_laplace_rule(eps, real(lambda), &bounds, 1).unwrap();
    let report = resolve_apply(g, real(lambda), coeffs, &ChernoffConfig::default(), &rule).unwrap();
    ledger.record(&rule, &report);
    report
}

fn random_coefficients(rng: &mut ChaCha8Rng) -> CoefficientSet {
    CoefficientSet::new(
        Coefficient::Rational {
            base: rng.gen_range(0.5..2.0),
            amp: rng.gen_range(0.0..1.0),
            scale: rng.gen_range(0.5..3.0),
        },
        Coefficient::Sinusoidal {
            base: rng.gen_range(-0.5..0.5),
            amp: rng.gen_range(-1.0..1.0),
            freq: rng.gen_range(0.2..3.0),
            phase: rng.gen_range(0.0..6.3),
            decay: rng.gen_range(0.0..1.0),
        },
        Coefficient::Rational {
            base: rng.gen_range(-1.0..0.3),
            amp: rng.gen_range(-1.0..1.0),
            scale: rng.gen_range(0.5..3.0),
        },
    )
}

fn random_bumps(rng: &mut ChaCha8Rng, grid: &Grid1D) -> GridFunction<f64> {
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(0.3..2.0),
            )
        })
        .collect();
    sample(
        |x| {
            bumps
                .iter()
                .map(|&(amp, c, w)| amp * (-((x - c) / w).powi(2)).exp())
                .sum()
        },
        grid,
    )
    .unwrap()
}

fn criterion_1(rng: &mut ChaCha8Rng) -> Verdict {
    let grid = Grid1D::new(-10.0, 10.0, 401).unwrap();
    let coeffs = benchmark();
    let f = sample(|x| (-x * x).exp() * (3.0 * x).cos(), &grid).unwrap();
    let same = apply_s(0.0, &f, &coeffs, &ChernoffConfig::default()).unwrap();
    let identity = same
        .values()
        .iter()
        .zip(f.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let mut worst = 0.0f64;
    for case in 0..100 {
        let coeffs = random_coefficients(rng);
        let f = if case % 2 == 0 {
            random_bumps(rng, &grid)
        } else {
            let values = (0..grid.n_points())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            GridFunction::from_values(grid, values).unwrap()
        };
        let t: f64 = 1.0 - rng.gen_range(0.0..1.0);
        let convention = if case % 4 < 2 {
            KernelConvention::Corrected
        } else {
            KernelConvention::PaperLiteral
        };
        let config = ChernoffConfig::default().with_convention(convention);
        let w = growth_bound(&coeffs, &grid).unwrap();
        let sf = apply_s(t, &f, &coeffs, &config).unwrap();
        worst = worst.max(sf.sup_norm() / ((w * t).exp() * f.sup_norm()));
    }
    Verdict::new(
        identity && worst <= 1.0 + 1e-6,
        format!("S(0)f == f bitwise: {identity}; max |S(t)f| / (e^(wt)|f|) = {worst:.9}"),
    )
}

fn criterion_2() -> Verdict {
    let grid = Grid1D::symmetric(8.0, 0.0025).unwrap();
    let coeffs = benchmark();
    let f = sample(|x| (-x * x).exp(), &grid).unwrap();
    let ts = [1e-1, 1e-2, 1e-3, 1e-4];
    let corrected = tangency_study(&f, &ts, &coeffs, &ChernoffConfig::default()).unwrap();
    let slope = loglog_slope(&corrected).unwrap();

    let literal_cfg = ChernoffConfig::default().with_convention(KernelConvention::PaperLiteral);
    let literal = tangency_study(&f, &ts, &coeffs, &literal_cfg).unwrap();
    let sampled = coeffs.sample(&grid).unwrap();
    let d = fd_derivatives(&f).unwrap();
    let half_af2 = 0.5
        * d.second
            .values()
            .iter()
            .zip(&sampled.a)
            .map(|(f2, a)| (a * f2).abs())
            .fold(0.0, f64::max);
    let plateau: Vec<f64> = literal[2..].iter().map(|&(_, d)| d / half_af2).collect();
    let plateau_ok = plateau.iter().all(|r| (r - 1.0).abs() <= 0.1);
    Verdict::new(
        (slope - 1.0).abs() <= 0.2 && plateau_ok,
        format!(
            "corrected slope {slope:.4}; literal defect / (|a f''|/2) at t = 1e-3, 1e-4: {:.4}, {:.4}",
            plateau[0], plateau[1]
        ),
    )
}

fn criterion_3() -> Verdict {
    let grid = Grid1D::default();
    let f = sample(|x| (-x * x).exp(), &grid).unwrap();
    let coeffs = CoefficientSet::constant(1.0, 0.5, -0.3);
    let table = convergence_study(1.0, &f, &coeffs, &ChernoffConfig::default(), &[32, 64]).unwrap();
    let (d32, d64) = (table.distance(32).unwrap(), table.distance(64).unwrap());
    let norm = f.sup_norm();
    Verdict::new(
        d64 <= 1e-2 * norm && d64 <= 0.6 * d32,
        format!(
            "d64 = {d64:.3e} (limit {:.1e}); d64/d32 = {:.4} (limit 0.6)",
            1e-2 * norm,
            d64 / d32
        ),
    )
}

fn criterion_4(ledger: &mut Ledger) -> Verdict {
    let grid = Grid1D::default();
    let g = sample(|x| (-x.abs()).exp(), &grid).unwrap();
    let report = resolve(
        &g,
        1.0,
        &CoefficientSet::constant(1.0, 0.0, 0.0),
        1e-3,
        ledger,
    );
    let f0 = report.solution.at(0.0);
    Verdict::new(
        (f0.re - 0.5).abs() <= 0.02 && f0.im.abs() <= 0.02,
        format!("f(0) = {:.6} (target 0.5 +- 0.02)", f0.re),
    )
}

fn criterion_5(ledger: &mut Ledger) -> Verdict {
    let grid = Grid1D::default();
    let spec = ProblemSpec::new(benchmark(), 1.0, gaussian());
    let g = spec.rhs.sample(&grid).unwrap();
    let report = resolve(&g, 1.0, &spec.coefficients, 1e-3, ledger);
    let fd = fd_bvp_solve(&spec, &grid).unwrap();
    let dist = report.solution.distance(&fd).unwrap();
    let norm_f = report.solution.sup_norm();
    Verdict::new(
        report.residual_sup <= 5e-2 * g.sup_norm() && dist <= 2e-2 * norm_f,
        format!(
            "residual_sup = {:.3e} (limit {:.1e}); |f - f_fd| = {dist:.3e} (limit {:.3e})",
            report.residual_sup,
            5e-2 * g.sup_norm(),
            2e-2 * norm_f
        ),
    )
}

fn criterion_6(rng: &mut ChaCha8Rng, ledger: &mut Ledger) -> Verdict {
    let grid = Grid1D::new(-12.0, 12.0, 241).unwrap();
    let coeffs = benchmark();
    let w = growth_bound(&coeffs, &grid).unwrap();
    let mut worst = 0.0f64;
    for shift in [0.5, 1.0, 2.0, 4.0] {
        for _ in 0..20 {
            let g = random_bumps(rng, &grid);
            let report = resolve(&g, w + shift, &coeffs, 1e-3, ledger);
            worst = worst.max(report.solution.sup_norm() * shift / g.sup_norm());
        }
    }
    Verdict::new(
        worst <= 1.05,
        format!("max |R g| (Re lambda - w) / |g| = {worst:.5} over 80 cases (limit 1.05)"),
    )
}

fn criterion_7(ledger: &mut Ledger) -> Verdict {
    let grid = Grid1D::default();
    let coeffs = benchmark();
    let w = growth_bound(&coeffs, &grid).unwrap();
    let (l1, l2) = (w + 1.0, w + 2.0);
    let g = gaussian().sample(&grid).unwrap();
    let r1 = resolve(&g, l1, &coeffs, 1e-4, ledger).solution;
    let r2 = resolve(&g, l2, &coeffs, 1e-4, ledger).solution;

    let bounds = SemigroupBounds::for_coefficients(&coeffs, &grid).unwrap();
    let rule = build_laplace_rule(1e-4, real(l1), &bounds, 1).unwrap();
    let r1r2 = resolve_apply(&r2, real(l1), &coeffs, &ChernoffConfig::default(), &rule).unwrap();
    ledger.record(&rule, &r1r2);

    let lhs = r1.sub(&r2).unwrap();
    let rhs = r1r2.solution.scale(l2 - l1);
    let defect = lhs.distance(&rhs).unwrap() / lhs.sup_norm();
    Verdict::new(
        defect <= 5e-2,
        format!("|R1 - R2 - (l2 - l1) R1 R2| g / |(R1 - R2) g| = {defect:.3e} (limit 5e-2)"),
    )
}

fn criterion_8(ledger: &mut Ledger) -> Verdict {
    let grid = Grid1D::new(-10.0, 10.0, 101).unwrap();
    let coeffs = benchmark();
    let w = growth_bound(&coeffs, &grid).unwrap();
    let lambda = w + 1.0;
    let config = ChernoffConfig::default();
    let bounds = SemigroupBounds::for_coefficients(&coeffs, &grid).unwrap();
    let rule = build_laplace_rule(1e-3, real(lambda), &bounds, 1).unwrap();
    let matrix = resolve_matrix(real(lambda), &coeffs, &config, &rule, &grid).unwrap();
    let g = sample(|x| (-x * x / 2.0).exp() * (1.0 + 0.3 * x), &grid).unwrap();
    let report = resolve_apply(&g, real(lambda), &coeffs, &config, &rule).unwrap();
    ledger.record(&rule, &report);
    let dist = matrix
        .apply(&g)
        .unwrap()
        .distance(&report.solution)
        .unwrap();
    let row = matrix.max_row_sum();
    let limit = 1.05 / (lambda - w);
    Verdict::new(
        dist <= 1e-10 && row <= limit,
        format!("|matrix g - apply g| = {dist:.3e} (limit 1e-10); max row sum {row:.5} (limit {limit:.3})"),
    )
}

fn criterion_9(ledger: &Ledger) -> Verdict {
    let worst_tail = ledger
        .tails
        .iter()
        .map(|(tail, eps)| tail / (eps / 2.0))
        .fold(0.0, f64::max);
    let mut worst_shift = 0.0f64;
    for (eps, lambda, omega) in [
        (1e-3, 2.0, 0.0),
        (1e-4, 1.3, 0.3),
        (1e-6, 5.0, 1.0),
        (0.5, 1.0, 0.0),
    ] {
        let bounds = SemigroupBounds::new(1.0, omega).unwrap();
        let t1 = truncation_horizon(eps, real(lambda), &bounds).unwrap();
        let t2 = truncation_horizon(eps / 2.0, real(lambda), &bounds).unwrap();
        let expected = 2f64.ln() / (lambda - omega);
        worst_shift = worst_shift.max(((t2 - t1) - expected).abs() / expected);
        let tail = tail_bound(t1, real(lambda), &bounds).unwrap();
        worst_shift = worst_shift.max(((tail / (eps / 2.0)) - 1.0).max(0.0));
    }
    Verdict::new(
        !ledger.tails.is_empty() && worst_tail <= 1.0 + 1e-12 && worst_shift <= 1e-12,
        format!(
            "{} runs, max tail_bound / (eps/2) = {worst_tail:.6}; max relative error of the ln 2 shift = {worst_shift:.1e}",
            ledger.tails.len()
        ),
    )
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c4e2);
    let mut ledger = Ledger::default();
    let mut failures = 0;
    let mut report = |k: usize, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {k}: {status} ({:.1} s) {}",
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failures += 1;
        }
    };
    report(1, &mut || criterion_1(&mut rng));
    report(2, &mut criterion_2);
    report(3, &mut criterion_3);
    report(4, &mut || criterion_4(&mut ledger));
    report(5, &mut || criterion_5(&mut ledger));
    report(6, &mut || criterion_6(&mut rng, &mut ledger));
    report(7, &mut || criterion_7(&mut ledger));
    report(8, &mut || criterion_8(&mut ledger));
    report(9, &mut || criterion_9(&ledger));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
