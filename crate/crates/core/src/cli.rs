//! The `chernoff` batch front end.
//!
//! ```text
//! chernoff <COMMAND> [--config PATH] [--n INT] [--eps FLOAT] [--lambda-re FLOAT]
//!          [--lambda-im FLOAT] [--convention paper|corrected] [--out DIR]
//! ```
//!
//! Commands: `evolve`, `resolve`, `solve`, `tangency`, `convergence`, `validate`.
//!
//! The config file is JSON; every field is optional and flags override it. Coefficients
//! (`a`, `b`, `c`), the right-hand side `g` and the initial datum `f` are preset strings:
//!
//! ```text
//! 1.5                               constant 1.5
//! constant:K
//! rational:BASE,AMP[,SCALE]         BASE + AMP/(1 + (x/SCALE)²)
//! gaussian:BASE,AMP[,WIDTH[,CENTER]] BASE + AMP·exp(-((x-CENTER)/WIDTH)²)
//! sin:BASE,AMP[,FREQ[,PHASE[,DECAY]]] BASE + AMP·sin(FREQ·x + PHASE)/(1 + DECAY·x²)
//! exp-abs:AMP[,RATE]                AMP·exp(-RATE·|x|)
//! table:PATH                        two-column CSV, linear interpolation
//! ```
//!
//! Example config:
//!
//! ```json
//! { "a": "rational:1,0.5", "b": "sin:0,1,1,0,1", "c": "rational:0,-1",
//!   "g": "gaussian:0,1", "lambda_re": 1.0, "eps": 1e-3,
//!   "grid": { "x_min": -20, "x_max": 20, "n_points": 801 } }
//! ```
//!
//! Each run writes `solution.csv`, `report.json` and, for the two studies,
//! `convergence.csv` into the output directory.
//!
//! Exit status: 0 success, 1 runtime error, 2 validation findings, 64 usage error,
//! 66 unreadable input (config file or coefficient table).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{write_csv_complex, write_csv_pairs, write_csv_real, Grid1D};
use crate::kernel::{tangency_study, ChernoffConfig, ChernoffOperator, KernelConvention};
use crate::problem::{
    validate, Coefficient, CoefficientSet, ProblemSpec, SemigroupBounds, ValidationSettings,
};
use crate::resolvent::{build_laplace_rule, resolve_apply, ResolventReport};
use crate::semigroup::{convergence_study, loglog_slope};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Evolve,
    Resolve,
    Solve,
    Tangency,
    Convergence,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::Resolve => "resolve",
            Self::Solve => "solve",
            Self::Tangency => "tangency",
            Self::Convergence => "convergence",
            Self::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, true)
            .map_err(|_| Error::InvalidConfig(format!("unknown command: {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = Grid1D::default();
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            n_points: g.n_points(),
        }
    }
}

/// Everything a run depends on. Serialised back verbatim into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub a: String,
    pub b: String,
    pub c: String,
    /// Right-hand side for `resolve` and `solve`.
    pub g: String,
    /// Initial datum for `evolve`, `tangency` and `convergence`.
    pub f: String,
    /// Certified lower bound for `a`, if known.
    pub a_floor: Option<f64>,
    /// Certified upper bound for `c`, if known; enters the growth bound.
    pub c_sup: Option<f64>,
    pub grid: GridSpec,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Compositions per time point, `S(t/n)^n`.
    pub n: usize,
    pub eps: f64,
    pub convention: KernelConvention,
    pub quad_halfwidth_sigmas: f64,
    /// Final time for `evolve` and `convergence`.
    pub t: f64,
    pub t_values: Vec<f64>,
    pub n_list: Vec<usize>,
    pub nodes_per_unit: usize,
    /// Re-run resolves on a refined time rule and report the disagreement.
    pub verify: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let chernoff = ChernoffConfig::default();
        Self {
            command: None,
            a: "1".into(),
            b: "0".into(),
            c: "0".into(),
            g: "exp-abs:1,1".into(),
            f: "gaussian:0,1".into(),
            a_floor: None,
            c_sup: None,
            grid: GridSpec::default(),
            lambda_re: 1.0,
            lambda_im: 0.0,
            n: chernoff.n_compose,
            eps: 1e-3,
            convention: chernoff.convention,
            quad_halfwidth_sigmas: chernoff.quad_halfwidth_sigmas,
            t: 1.0,
            t_values: vec![1e-1, 1e-2, 1e-3, 1e-4],
            n_list: vec![8, 16, 32, 64],
            nodes_per_unit: crate::resolvent::DEFAULT_NODES_PER_UNIT,
            verify: true,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda_re, self.lambda_im)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.n_points)
    }

    pub fn chernoff(&self) -> ChernoffConfig {
        ChernoffConfig {
            convention: self.convention,
            quad_halfwidth_sigmas: self.quad_halfwidth_sigmas,
            n_compose: self.n,
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let mut set = CoefficientSet::new(
            self.a.parse::<Coefficient>()?,
            self.b.parse::<Coefficient>()?,
            self.c.parse::<Coefficient>()?,
        );
        if let Some(floor) = self.a_floor {
            set = set.with_a_floor(floor);
        }
        if let Some(sup) = self.c_sup {
            set = set.with_c_sup(sup);
        }
        Ok(set)
    }

    /// Checks that numeric fields are finite and lists are usable.
    pub fn check(&self) -> Result<()> {
        let scalars = [
            ("lambda_re", self.lambda_re),
            ("lambda_im", self.lambda_im),
            ("eps", self.eps),
            ("quad_halfwidth_sigmas", self.quad_halfwidth_sigmas),
            ("t", self.t),
            ("grid.x_min", self.grid.x_min),
            ("grid.x_max", self.grid.x_max),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        for v in self.a_floor.iter().chain(&self.c_sup).chain(&self.t_values) {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "non-finite value {v} in config"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.t < 0.0 {
            return Err(Error::NegativeTime(self.t));
        }
        if self.t_values.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidConfig("t_values must be positive".into()));
        }
        if self.n_list.is_empty() || self.t_values.is_empty() {
            return Err(Error::InvalidConfig(
                "t_values and n_list must not be empty".into(),
            ));
        }
        self.grid()?;
        self.chernoff().validate()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chernoff",
    about = "Chernoff semigroup and resolvent solver",
    version
)]
struct Args {
    /// evolve | resolve | solve | tangency | convergence | validate
    command: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "lambda-re", allow_negative_numbers = true)]
    lambda_re: Option<f64>,
    #[arg(long = "lambda-im", allow_negative_numbers = true)]
    lambda_im: Option<f64>,
    /// paper | corrected
    #[arg(long)]
    convention: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a run produced, before it is written out.
#[derive(Debug)]
pub struct Outcome {
    pub command: Command,
    pub exit_code: i32,
    pub report: Value,
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn usage() -> String {
    "usage: chernoff <evolve|resolve|solve|tangency|convergence|validate> [--config PATH] \
     [--n INT] [--eps FLOAT] [--lambda-re FLOAT] [--lambda-im FLOAT] \
     [--convention paper|corrected] [--out DIR]"
        .to_string()
}

/// Parses arguments, merges them over the config file and runs. Returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprintln!("{e}");
                    eprintln!("{}", usage());
                    EXIT_USAGE
                }
            };
        }
    };
    let Ok(command) = args.command.parse::<Command>() else {
        eprintln!("unknown command: {}", args.command);
        eprintln!("{}", usage());
        return EXIT_USAGE;
    };
    let config = match load_config(&args, command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match run(&config) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(args: &Args, command: Command) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    config.command = Some(command);
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(re) = args.lambda_re {
        config.lambda_re = re;
    }
    if let Some(im) = args.lambda_im {
        config.lambda_im = im;
    }
    if let Some(conv) = &args.convention {
        config.convention = conv.parse()?;
    }
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    Ok(config)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Table { .. } | Error::ConfigFile { .. } => EXIT_NO_INPUT,
        Error::Validation(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

/// Executes `config.command` and writes its artifacts into `config.out`.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    let command = config
        .command
        .ok_or_else(|| Error::InvalidConfig("no command given".into()))?;
    config.check()?;
    let coeffs = config.coefficients()?;
    let f = config.f.parse::<Coefficient>()?;
    let g = config.g.parse::<Coefficient>()?;
    let grid = config.grid()?;
    fs::create_dir_all(&config.out)?;

    let started = Instant::now();
    let mut outcome = match command {
        Command::Evolve => run_evolve(config, &coeffs, &f, &grid)?,
        Command::Resolve => run_resolve(config, &coeffs, &g, &grid)?,
        Command::Solve => {
            let spec = ProblemSpec::new(coeffs.clone(), config.lambda(), g.clone());
            let findings = validate(&spec, &grid, &ValidationSettings::default());
            if findings.is_empty() {
                run_resolve(config, &coeffs, &g, &grid)?
            } else {
                findings_outcome(config, &findings)
            }
        }
        Command::Tangency => run_tangency(config, &coeffs, &f, &grid)?,
        Command::Convergence => run_convergence(config, &coeffs, &f, &grid)?,
        Command::Validate => {
            let spec = ProblemSpec::new(coeffs.clone(), config.lambda(), g.clone());
            let findings = validate(&spec, &grid, &ValidationSettings::default());
            findings_outcome(config, &findings)
        }
    };
    let wall = started.elapsed().as_secs_f64();
    outcome.command = command;

    let report = json!({
        "command": command.as_str(),
        "parameters": config,
        "effective_grid": { "spacing": grid.spacing() },
        "residual_sup": outcome.report.get("residual_sup").cloned().unwrap_or(Value::Null),
        "tail_bound": outcome.report.get("tail_bound").cloned().unwrap_or(Value::Null),
        "results": outcome.report,
        "timing": { "wall_seconds": wall },
    });
    let path = config.out.join("report.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &report)?;
    outcome.files.push(path);
    outcome.report = report;

    let mut summary = vec![format!(
        "{}: a = {}, b = {}, c = {}, grid [{}, {}] x {}",
        command.as_str(),
        config.a,
        config.b,
        config.c,
        grid.x_min(),
        grid.x_max(),
        grid.n_points()
    )];
    summary.append(&mut outcome.summary);
    summary.push(format!("wall time {wall:.3} s"));
    summary.push(format!(
        "wrote {}",
        outcome
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    outcome.summary = summary;
    Ok(outcome)
}

fn new_outcome(report: Value, summary: Vec<String>, files: Vec<PathBuf>) -> Outcome {
    Outcome {
        command: Command::Validate,
        exit_code: EXIT_OK,
        report,
        summary,
        files,
    }
}

fn create(config: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = config.out.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn run_evolve(
    config: &RunConfig,
    coeffs: &CoefficientSet,
    f: &Coefficient,
    grid: &Grid1D,
) -> Result<Outcome> {
    let f = f.sample(grid)?;
    let op = ChernoffOperator::new(coeffs, grid, &config.chernoff())?;
    let u = op.evolve(config.t, &f)?;
    let (path, out) = create(config, "solution.csv")?;
    write_csv_real(&u, out)?;
    let report = json!({
        "t": config.t,
        "n": config.n,
        "sup_initial": f.sup_norm(),
        "sup_solution": u.sup_norm(),
    });
    let summary = vec![format!(
        "n = {}, t = {}, |f| = {:.6e}, |S(t/n)^n f| = {:.6e}",
        config.n,
        config.t,
        f.sup_norm(),
        u.sup_norm()
    )];
    Ok(new_outcome(report, summary, vec![path]))
}

fn run_resolve(
    config: &RunConfig,
    coeffs: &CoefficientSet,
    g: &Coefficient,
    grid: &Grid1D,
) -> Result<Outcome> {
    let g = g.sample(grid)?;
    let bounds = SemigroupBounds::for_coefficients(coeffs, grid)?;
    let rule = build_laplace_rule(config.eps, config.lambda(), &bounds, config.nodes_per_unit)?
        .with_verification(config.verify);
    let report: ResolventReport =
        resolve_apply(&g, config.lambda(), coeffs, &config.chernoff(), &rule)?;
    let (path, out) = create(config, "solution.csv")?;
    write_csv_complex(&report.solution, out)?;
    let mut summary = vec![
        format!(
            "lambda = {}, n = {}, T = {:.6}, {} time nodes",
            config.lambda(),
            config.n,
            report.parameters.horizon,
            report.parameters.node_count
        ),
        format!(
            "residual_sup = {:.6e}, tail_bound = {:.6e}, |g| = {:.6e}",
            report.residual_sup,
            report.tail_bound,
            g.sup_norm()
        ),
    ];
    summary.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    let mut value = serde_json::to_value(&report)?;
    value["sup_rhs"] = json!(g.sup_norm());
    value["solution_at_origin"] = json!([report.solution.at(0.0).re, report.solution.at(0.0).im]);
    Ok(new_outcome(value, summary, vec![path]))
}

fn run_tangency(
    config: &RunConfig,
    coeffs: &CoefficientSet,
    f: &Coefficient,
    grid: &Grid1D,
) -> Result<Outcome> {
    let f = f.sample(grid)?;
    let chernoff = config.chernoff();
    let rows = tangency_study(&f, &config.t_values, coeffs, &chernoff)?;
    let slope = loglog_slope(&rows);
    let (conv_path, out) = create(config, "convergence.csv")?;
    write_csv_pairs(("t", "defect"), &rows, out)?;
    let t_min = config
        .t_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let op = ChernoffOperator::new(coeffs, grid, &chernoff)?;
    let (sol_path, out) = create(config, "solution.csv")?;
    write_csv_real(&op.apply_s(t_min, &f)?, out)?;
    let report = json!({ "rows": rows, "loglog_slope": slope });
    let summary = vec![format!(
        "tangency defect over {} values of t, log-log slope {}",
        rows.len(),
        slope.map_or("n/a".into(), |s| format!("{s:.4}"))
    )];
    Ok(new_outcome(report, summary, vec![sol_path, conv_path]))
}

fn run_convergence(
    config: &RunConfig,
    coeffs: &CoefficientSet,
    f: &Coefficient,
    grid: &Grid1D,
) -> Result<Outcome> {
    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let f = f.sample(grid)?;
    let chernoff = config.chernoff();
    let table = convergence_study(config.t, &f, coeffs, &chernoff, &n_list)?;
    let (conv_path, out) = create(config, "convergence.csv")?;
    write_csv_pairs(("n", "distance"), &table.csv_rows(), out)?;
    let n_max = *n_list.last().unwrap_or(&config.n);
    let op = ChernoffOperator::new(coeffs, grid, &chernoff.with_n(n_max))?;
    let (sol_path, out) = create(config, "solution.csv")?;
    write_csv_real(&op.evolve(config.t, &f)?, out)?;
    let report = serde_json::to_value(&table)?;
    let summary = vec![format!(
        "t = {}, n in {:?}, estimated order {}",
        config.t,
        n_list,
        table.order.map_or("n/a".into(), |p| format!("{p:.4}"))
    )];
    Ok(new_outcome(report, summary, vec![sol_path, conv_path]))
}

fn findings_outcome(config: &RunConfig, findings: &[crate::problem::Finding]) -> Outcome {
    let messages: Vec<String> = findings.iter().map(|f| f.to_string()).collect();
    let mut summary: Vec<String> = messages.iter().map(|m| format!("finding: {m}")).collect();
    if summary.is_empty() {
        summary.push(format!("no findings (lambda = {})", config.lambda()));
    }
    let mut outcome = new_outcome(json!({ "findings": messages }), summary, Vec::new());
    if !findings.is_empty() {
        outcome.exit_code = EXIT_VALIDATION;
    }
    outcome
}
