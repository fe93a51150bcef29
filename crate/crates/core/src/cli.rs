//! Command-line front end. Every command writes CSV files plus a `key=value`
//! sidecar with the resolved configuration into `--out`.
//!
//! Exit codes: 0 success, 1 verification or numerical failure, 2
//! configuration error.

use crate::correlations::conditional::{conditional_density_perturbed, spread_ties};
use crate::correlations::cov::{cov_grid, min_relative_gap};
use crate::correlations::density::density_table;
use crate::correlations::n2::{f_sv_polynomial, n2_closed};
use crate::correlations::{conditional_density, ConditionalOptions, CovContext, DensityTable, Formula, N2Form, TableMeta};
use crate::ensembles::{parse_kv, EnsembleModel, Family, Precision};
use crate::error::{Error, Result};
use crate::montecarlo::hist::linear_edges;
use crate::montecarlo::runner::{run as run_sampler, McConfig, McResult, Source, DEVIATION_SIGMAS, MAX_DISCARD_RATE, MAX_OUTLIER_FRACTION};
use crate::quad::QuadratureSpec;
use crate::verify::{self, Suite, VerifyOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;


#[derive(Parser, Debug)]
#[command(name = "svev", version, about = "Cross-correlations between squared singular values and squared eigenradii of bi-unitarily invariant random matrices")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for grid evaluation and sampling.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// key=value file whose entries act as flags; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One-point densities of squared eigenradii and squared singular values.
    Density(DensityArgs),
    /// Grid of 2λ·cov(r; λ²) over singular values λ and squared eigenradii r.
    CovGrid(CovGridArgs),
    /// Density of one squared eigenradius given all squared singular values.
    Conditional(ConditionalArgs),
    /// Monte Carlo sampling with histograms, audits and analytic comparison.
    Sample(SampleArgs),
    /// Property suites over the analytic layer.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Laguerre,
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Double,
    DoubleDouble,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Args, Debug, Clone)]
pub struct EnsembleArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Laguerre)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Jacobi only.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
}

impl EnsembleArgs {
    pub fn model(&self) -> Result<EnsembleModel> {
        let family = match self.family {
            FamilyArg::Laguerre => Family::Laguerre { alpha: self.alpha },
            FamilyArg::Jacobi => Family::Jacobi { alpha: self.alpha, beta: self.beta },
        };
        let precision = match self.precision {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::DoubleDouble => Precision::DoubleDouble,
        };
        EnsembleModel::new(self.n, family, precision)
    }
}

#[derive(Args, Debug, Clone)]
pub struct QuadArgs {
    #[arg(long)]
    pub quad_abs_tol: Option<f64>,
    #[arg(long)]
    pub quad_rel_tol: Option<f64>,
    #[arg(long)]
    pub quad_max_depth: Option<usize>,
    #[arg(long)]
    pub quad_grading: Option<u32>,
}

impl QuadArgs {
    pub fn spec(&self) -> Result<QuadratureSpec> {
        let mut q = QuadratureSpec::default();
        if let Some(v) = self.quad_abs_tol {
            q.abs_tol = v;
        }
        if let Some(v) = self.quad_rel_tol {
            q.rel_tol = v;
        }
        if let Some(v) = self.quad_max_depth {
            q.max_depth = v;
        }
        if let Some(v) = self.quad_grading {
            q.grading = v;
        }
        q.validate()?;
        Ok(q)
    }
}

/// `min..max` in `count` points; defaults depend on the family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::Config(format!("grid count must be >= 2, got {}", self.count)));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Config(format!("grid needs finite min < max, got [{}, {}]", self.min, self.max)));
        }
        let last = (self.count - 1) as f64;
        Ok(match self.spacing {
            Spacing::Linear => (0..self.count).map(|i| self.min + (self.max - self.min) * i as f64 / last).collect(),
            Spacing::Log => {
                if !(self.min > 0.0) {
                    return Err(Error::Config(format!("log grid needs min > 0, got {}", self.min)));
                }
                let (l0, l1) = (self.min.ln(), self.max.ln());
                (0..self.count).map(|i| (l0 + (l1 - l0) * i as f64 / last).exp()).collect()
            }
        })
    }

    fn kv(&self, prefix: &str) -> String {
        format!(
            "{prefix}min={:e}\n{prefix}max={:e}\n{prefix}count={}\n{prefix}spacing={}\n",
            self.min,
            self.max,
            self.count,
            match self.spacing {
                Spacing::Linear => "linear",
                Spacing::Log => "log",
            }
        )
    }
}

fn default_spacing(m: &EnsembleModel) -> Spacing {
    match m.family {
        Family::Laguerre { .. } => Spacing::Log,
        Family::Jacobi { .. } => Spacing::Linear,
    }
}

/// Upper end of the bulk used for default Laguerre grids.
fn laguerre_bulk(m: &EnsembleModel) -> f64 {
    let n = m.n as f64;
    4.0 * n + 2.0 * m.family.alpha().max(0.0) + 6.0 * n.sqrt() + 6.0
}

#[derive(Args, Debug, Clone)]
pub struct DensityArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub count: usize,
    /// Defaults to log for Laguerre, linear for Jacobi.
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Use the polynomial-ensemble sum instead of the Pólya form for ρ_EV.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub polynomial: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl DensityArgs {
    pub fn grid(&self, m: &EnsembleModel) -> GridSpec {
        let (lo, hi) = match m.family {
            Family::Laguerre { .. } => (1e-4, laguerre_bulk(m)),
            Family::Jacobi { .. } => (1e-6, 1.0 - 1e-6),
        };
        GridSpec {
            min: self.min.unwrap_or(lo),
            max: self.max.unwrap_or(hi),
            count: self.count,
            spacing: self.spacing.unwrap_or_else(|| default_spacing(m)),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CovGridArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub lambda_count: usize,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub r_count: usize,
    /// Defaults to log for Laguerre, linear for Jacobi.
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Multiply by n^{3/2} (Laguerre only).
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub rescale: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl CovGridArgs {
    pub fn grids(&self, m: &EnsembleModel) -> (GridSpec, GridSpec) {
        let spacing = self.spacing.unwrap_or_else(|| default_spacing(m));
        let (l0, l1, r0, r1) = match m.family {
            Family::Laguerre { .. } => {
                let l1 = laguerre_bulk(m).sqrt();
                (0.02 * l1, l1, 4e-4 * l1 * l1, l1 * l1)
            }
            Family::Jacobi { .. } => (0.01, 0.995, 1e-4, 0.99),
        };
        (
            GridSpec { min: self.lambda_min.unwrap_or(l0), max: self.lambda_max.unwrap_or(l1), count: self.lambda_count, spacing },
            GridSpec { min: self.r_min.unwrap_or(r0), max: self.r_max.unwrap_or(r1), count: self.r_count, spacing },
        )
    }
}

#[derive(Args, Debug, Clone)]
pub struct ConditionalArgs {
    /// Squared singular values, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub min: f64,
    /// Defaults to 3·max(a).
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long, default_value_t = 601)]
    pub count: usize,
    /// Relative spread applied to tied values.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Derivative by finite differences instead of the analytic form.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub finite_difference: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ginibre,
    Truncated,
    Fixed,
    Bidiagonal,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Ginibre)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Dimension of the Haar unitary for the truncated model.
    #[arg(long)]
    pub m: Option<usize>,
    /// Fixed squared singular values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,
    /// Laguerre parameter of the bidiagonal model.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub draws: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub bins: usize,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Skip the comparison against the analytic densities.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub no_compare: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl SampleArgs {
    pub fn source(&self) -> Result<Source> {
        Ok(match self.model {
            ModelArg::Ginibre => Source::Ginibre { n: self.n },
            ModelArg::Truncated => Source::TruncatedUnitary { n: self.n, m: self.m.unwrap_or(2 * self.n) },
            ModelArg::Fixed => {
                if self.a.is_empty() {
                    return Err(Error::Config("--model fixed needs --a".into()));
                }
                Source::FixedSv { a: self.a.clone() }
            }
            ModelArg::Bidiagonal => Source::LaguerreBidiagonal { n: self.n, alpha: self.alpha },
        })
    }

    pub fn config(&self, threads: usize) -> Result<McConfig> {
        let source = self.source()?;
        let n = source.n() as f64;
        let (r_hi, a_hi) = match &source {
            Source::Ginibre { .. } | Source::LaguerreBidiagonal { .. } => {
                let a = 4.0 * n + 2.0 * self.alpha.max(0.0) + 6.0 * n.sqrt() + 2.0;
                (a * 0.6, a)
            }
            Source::TruncatedUnitary { .. } => (1.0, 1.0),
            Source::FixedSv { a } => {
                let m = a.iter().copied().fold(0.0, f64::max) * 1.05;
                (m, m)
            }
        };
        if self.bins < 1 {
            return Err(Error::Config("bins must be positive".into()));
        }
        Ok(McConfig {
            source,
            draws: self.draws,
            seed: self.seed,
            threads,
            r_edges: linear_edges(0.0, self.r_max.unwrap_or(r_hi), self.bins),
            a_edges: linear_edges(0.0, self.a_max.unwrap_or(a_hi), self.bins),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Quick,
    Full,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
    pub suite: SuiteArg,
    /// Mutation check: flips the sign of Ψ_0 in the closed covariance.
    #[arg(long, hide = true, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub inject_psi0_flip: bool,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Index { .. } | Error::PrecisionInsufficient(_) | Error::Degenerate { .. } | Error::Io(_) => {
            EXIT_CONFIG
        }
        Error::NonConvergence { .. } | Error::Tolerance { .. } | Error::Decomposition(_) => EXIT_FAILURE,
    }
}

const SUBCOMMANDS: [&str; 5] = ["density", "cov-grid", "conditional", "sample", "verify"];

/// Splices the entries of a `--config` file in as `--key=value` flags right
/// after the subcommand, so that flags given explicitly override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let flags: Vec<OsString> = parse_kv(&text)?
        .into_iter()
        .map(|(k, v)| OsString::from(format!("--{}={v}", k.replace('_', "-"))))
        .collect();
    let pos = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .ok_or_else(|| Error::Config("no subcommand given".into()))?;
    let mut out = args[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Progress and reports go to `out`, diagnostics to `err`.
pub fn main_with_args(args: Vec<OsString>, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> Result<i32> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be positive".into()));
    }
    let config_line = cli.config.as_ref().map(|p| format!("config_file={}\n", p.display())).unwrap_or_default();
    match &cli.command {
        Command::Density(a) => cmd_density(a, cli.threads, &config_line, out),
        Command::CovGrid(a) => cmd_cov_grid(a, cli.threads, &config_line, out),
        Command::Conditional(a) => cmd_conditional(a, &config_line, out, err),
        Command::Sample(a) => cmd_sample(a, cli.threads, &config_line, out),
        Command::Verify(a) => cmd_verify(a, cli.threads, out),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
    Ok(p)
}

fn context(ensemble: &EnsembleArgs, quad: &QuadArgs) -> Result<CovContext> {
    CovContext::new(ensemble.model()?)?.with_quad(quad.spec()?)
}

/// Trapezoid integral of a 1-D table.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn sidecar(command: &str, config_line: &str, body: &str) -> String {
    format!("command={command}\n{config_line}{body}")
}

pub fn cmd_density(a: &DensityArgs, threads: usize, config_line: &str, out: &mut dyn std::io::Write) -> Result<i32> {
    let ctx = context(&a.ensemble, &a.quad)?;
    let grid = a.grid(ctx.model());
    let xs = grid.points()?;
    let end = ctx.model().support_end();
    if xs[0] <= 0.0 || *xs.last().unwrap() >= end {
        return Err(Error::Domain(format!("density grid must lie inside the open support (0, {end})")));
    }
    let ev_formula = if a.polynomial { Formula::RhoEvPolynomial } else { Formula::RhoEvPolya };
    let ev = density_table(&ctx, ev_formula, &xs, threads)?;
    let sv = density_table(&ctx, Formula::RhoSv, &xs, threads)?;
    for (name, t) in [("rho_ev", &ev), ("rho_sv", &sv)] {
        let p = write_file(&a.out, &format!("{name}.csv"), &t.to_csv())?;
        let mass = trapezoid(&t.axes[0], &t.values);
        let body = format!("{}{}{}trapezoid_mass={mass:.12}\nthreads={threads}\n", t.meta.to_kv(), grid.kv("grid_"), quad_kv(&ctx.quad));
        write_file(&a.out, &format!("{name}.meta"), &sidecar("density", config_line, &body))?;
        let _ = writeln!(out, "wrote {} (trapezoid mass {mass:.6})", p.display());
    }
    Ok(EXIT_OK)
}

fn quad_kv(q: &QuadratureSpec) -> String {
    format!("quad_abs_tol_requested={:e}\nquad_rel_tol_requested={:e}\n", q.abs_tol, q.rel_tol)
}

pub fn cmd_cov_grid(a: &CovGridArgs, threads: usize, config_line: &str, out: &mut dyn std::io::Write) -> Result<i32> {
    let ctx = context(&a.ensemble, &a.quad)?;
    let (lg, rg) = a.grids(ctx.model());
    let lams = lg.points()?;
    let rs = rg.points()?;
    let end = ctx.model().support_end();
    if lams[0] <= 0.0 || rs[0] <= 0.0 || lams.last().unwrap().powi(2) >= end || *rs.last().unwrap() >= end {
        return Err(Error::Domain(format!("λ² and r must lie inside the open support (0, {end})")));
    }
    if a.rescale && !matches!(ctx.model().family, Family::Laguerre { .. }) {
        return Err(Error::Config("--rescale applies to the Laguerre family only".into()));
    }
    let t = cov_grid(&ctx, &lams, &rs, a.rescale, threads)?;
    let p = write_file(&a.out, "cov.csv", &t.to_csv())?;
    let body = format!("{}{}{}threads={threads}\n", t.meta.to_kv(), lg.kv("lambda_"), rg.kv("r_"));
    write_file(&a.out, "cov.meta", &sidecar("cov-grid", config_line, &body))?;
    let max = t.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let _ = writeln!(out, "wrote {} ({}x{} points, max |value| {max:.4e})", p.display(), lams.len(), rs.len());
    Ok(EXIT_OK)
}

/// Tied singular values closer than this (relative) take the perturbation
/// path.
pub const TIE_GAP: f64 = 1e-9;

pub fn cmd_conditional(a: &ConditionalArgs, config_line: &str, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> Result<i32> {
    let n = a.a.len();
    if n < 2 {
        return Err(Error::Config("--a needs at least two values".into()));
    }
    if let Some(x) = a.a.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("squared singular values must be positive, got {x}")));
    }
    let amax = a.a.iter().copied().fold(0.0, f64::max);
    let grid = GridSpec { min: a.min, max: a.max.unwrap_or(3.0 * amax), count: a.count, spacing: Spacing::Linear };
    let rs = grid.points()?;
    let opts = if a.finite_difference { ConditionalOptions::finite_difference() } else { ConditionalOptions::default() };
    let degenerate = min_relative_gap(&a.a) < TIE_GAP;
    let mut warning = String::new();
    let mut path = "determinant";
    let values: Vec<f64> = if degenerate {
        warning = format!("degenerate squared singular values; tied values spread by relative eps={:e} with Richardson extrapolation", a.eps);
        let _ = writeln!(err, "warning: {warning}");
        path = "epsilon_perturbation";
        let spread = spread_ties(&a.a, a.eps);
        let (lo, hi) = spread.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        rs.iter()
            .map(|&r| if r <= 0.0 || r < lo || r > hi { Ok(0.0) } else { conditional_density_perturbed(r, &a.a, a.eps, true, &opts) })
            .collect::<Result<_>>()?
    } else if n == 2 {
        path = "n2_closed";
        let ctx = CovContext::new(EnsembleModel::laguerre(2, 0.0)?)?;
        let den = f_sv_polynomial(&ctx, a.a[0], a.a[1])?;
        rs.iter().map(|&r| if r <= 0.0 { Ok(0.0) } else { Ok(n2_closed(&ctx, N2Form::F12, &[r, a.a[0], a.a[1]])? / den) }).collect::<Result<_>>()?
    } else {
        rs.iter().map(|&r| if r <= 0.0 { Ok(0.0) } else { conditional_density(r, &a.a, &opts) }).collect::<Result<_>>()?
    };
    let mut meta = TableMeta::new(Formula::Conditional, None, QuadratureSpec::default());
    meta.extra.push(("path".into(), path.into()));
    let t = DensityTable::new(vec![rs.clone()], vec!["r".into()], values, meta)?;
    let p = write_file(&a.out, "conditional.csv", &t.to_csv())?;
    let mass = trapezoid(&rs, &t.values);
    let mut body = t.meta.to_kv();
    let _ = write!(
        body,
        "a={}\nn={n}\nderivative={}\n{}trapezoid_mass={mass:.12}\n",
        a.a.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";"),
        if a.finite_difference { "finite_difference" } else { "analytic" },
        grid.kv("grid_")
    );
    if !warning.is_empty() {
        let _ = writeln!(body, "warning={warning}");
    }
    write_file(&a.out, "conditional.meta", &sidecar("conditional", config_line, &body))?;
    let _ = writeln!(out, "wrote {} (trapezoid mass {mass:.6}, path {path})", p.display());
    Ok(EXIT_OK)
}

fn cov_estimate_csv(res: &McResult) -> Result<String> {
    let c = res.joint.cov_estimate(&res.ev, &res.sv)?;
    let (re, ae) = (&res.joint.r_edges, &res.joint.a_edges);
    let mut s = String::from("r_lo,r_hi,a_lo,a_hi,value\n");
    let fmt = crate::correlations::fmt17;
    for i in 0..re.len() - 1 {
        for j in 0..ae.len() - 1 {
            let _ = writeln!(s, "{},{},{},{},{}", fmt(re[i]), fmt(re[i + 1]), fmt(ae[j]), fmt(ae[j + 1]), fmt(c[i * (ae.len() - 1) + j]));
        }
    }
    Ok(s)
}

pub fn cmd_sample(a: &SampleArgs, threads: usize, config_line: &str, out: &mut dyn std::io::Write) -> Result<i32> {
    let config = a.config(threads)?;
    let res = run_sampler(&config)?;
    write_file(&a.out, "joint.csv", &res.joint.to_csv())?;
    write_file(&a.out, "ev.csv", &res.ev.to_csv())?;
    write_file(&a.out, "sv.csv", &res.sv.to_csv())?;
    write_file(&a.out, "cov_estimate.csv", &cov_estimate_csv(&res)?)?;
    let mut body = res.sidecar();
    let _ = write!(body, "threads={threads}\nbins={}\nr_max={:e}\na_max={:e}\n", a.bins, config.r_edges.last().unwrap(), config.a_edges.last().unwrap());
    let discard_ok = res.discard_rate() < MAX_DISCARD_RATE;
    let mut ok = res.audits_clean() && discard_ok;
    let _ = write!(body, "discard_rate={:e}\naudits_clean={}\n", res.discard_rate(), res.audits_clean());
    let _ = writeln!(
        out,
        "{} draws, {} accepted, discard rate {:.2e}, Weyl violations {:?}, product violations {}",
        res.config.draws,
        res.accepted,
        res.discard_rate(),
        res.weyl_violations,
        res.product_violations
    );
    if !a.no_compare {
        for (name, r) in res.deviation_reports(DEVIATION_SIGMAS, threads)? {
            let pass = r.passes(MAX_OUTLIER_FRACTION);
            ok &= pass;
            let _ = write!(
                body,
                "{name}_occupied={}\n{name}_outliers={}\n{name}_max_abs_z={:.4}\n{name}_pass={pass}\n",
                r.occupied, r.outliers, r.max_abs_z
            );
            let _ = writeln!(
                out,
                "{} {name}: {} of {} occupied bins beyond {}σ (max |z| {:.2})",
                if pass { "PASS" } else { "FAIL" },
                r.outliers,
                r.occupied,
                r.threshold,
                r.max_abs_z
            );
        }
    }
    write_file(&a.out, "sample.meta", &sidecar("sample", config_line, &body))?;
    let _ = writeln!(out, "wrote joint.csv, ev.csv, sv.csv, cov_estimate.csv, sample.meta to {}", a.out.display());
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_verify(a: &VerifyArgs, threads: usize, out: &mut dyn std::io::Write) -> Result<i32> {
    let suite = match a.suite {
        SuiteArg::Quick => Suite::Quick,
        SuiteArg::Full => Suite::Full,
    };
    let report = verify::run(&VerifyOptions { suite, threads, psi0_flip: a.inject_psi0_flip });
    let _ = write!(out, "{}", report.table());
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(out, "failed: {}", report.failures().join("; "));
        Ok(EXIT_FAILURE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn grids() {
        let g = GridSpec { min: 1.0, max: 100.0, count: 3, spacing: Spacing::Log };
        let p = g.points().unwrap();
        assert!((p[1] - 10.0).abs() < 1e-12 && (p[2] - 100.0).abs() < 1e-12);
        let g = GridSpec { min: 0.0, max: 1.0, count: 5, spacing: Spacing::Linear };
        assert_eq!(g.points().unwrap()[2], 0.5);
        assert!(GridSpec { count: 1, ..g }.points().is_err());
        assert!(GridSpec { spacing: Spacing::Log, ..g }.points().is_err());
        assert!(GridSpec { min: 2.0, ..g }.points().is_err());
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nn=5\nalpha=0.5\nquad_rel_tol=1e-9\n").unwrap();
        let p = path.to_str().unwrap();
        let args = expand_config(os(&["svev", "--config", p, "density", "--n", "4"])).unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let Command::Density(d) = cli.command else { panic!() };
        assert_eq!(d.ensemble.n, 4);
        assert_eq!(d.ensemble.alpha, 0.5);
        assert_eq!(d.quad.quad_rel_tol, Some(1e-9));
        assert!(expand_config(os(&["svev", "--config", "/nonexistent/x.cfg", "density"])).is_err());
        assert_eq!(expand_config(os(&["svev", "verify"])).unwrap(), os(&["svev", "verify"]));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::PrecisionInsufficient("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Tolerance { value: 0.0, err_est: 1.0 }), EXIT_FAILURE);
        let mut o = Vec::new();
        let mut e = Vec::new();
        assert_eq!(main_with_args(os(&["svev", "density", "--n", "0"]), &mut o, &mut e), EXIT_CONFIG);
        assert_eq!(main_with_args(os(&["svev", "frobnicate"]), &mut o, &mut e), EXIT_CONFIG);
        assert_eq!(main_with_args(os(&["svev", "--help"]), &mut o, &mut e), EXIT_OK);
    }

    #[test]
    fn trapezoid_rule() {
        let xs = [0.0, 0.5, 1.0];
        assert!((trapezoid(&xs, &[0.0, 0.5, 1.0]) - 0.5).abs() < 1e-15);
    }
}
