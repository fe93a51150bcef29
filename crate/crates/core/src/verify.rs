//! Property suites over the analytic layer: biorthogonality, the reproducing
//! property, normalization, agreement between independent formula routes,
//! marginals, the conditional density, the `n = 2` forms, smoothness at the
//! diagonal and the sign structure of the covariance grid.

use crate::correlations::conditional::{conditional_mass, spread_ties};
use crate::correlations::cov::{cov_closed, cov_grid, cov_integral, f_1k};
use crate::correlations::density::{f11_closed, f_sv, rho_ev_polya, rho_sv};
use crate::correlations::kink::kink_probe;
use crate::correlations::n2::{f11, f11_polynomial, f12, f_sv_polynomial};
use crate::correlations::{conditional_density, par_map, ConditionalOptions, CovContext, DerivativeMode};
use crate::ensembles::{EnsembleModel, Family, KernelEval, Precision};
use crate::error::{Error, Result};
use crate::quad::{integrate_split, QuadratureSpec};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

/// One measured quantity and its pass condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, bound: Bound::AtMost(tol), passed: value <= tol, detail: String::new() }
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Self {
        Check { name: name.into(), value, bound: Bound::AtLeast(min), passed: value >= min, detail: String::new() }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, bound: Bound, err: &Error) -> Self {
        Check { name: name.into(), value: f64::NAN, bound, passed: false, detail: err.to_string() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn from_result(name: impl Into<String>, bound: Bound, r: Result<f64>) -> Self {
        let name = name.into();
        match (r, bound) {
            (Ok(v), Bound::AtMost(t)) => Check::at_most(name, v, t),
            (Ok(v), Bound::AtLeast(t)) => Check::at_least(name, v, t),
            (Err(e), b) => Check::failed(name, b, &e),
        }
    }

    /// `PASS name value (<= tol) detail`.
    pub fn line(&self) -> String {
        let (op, t) = match self.bound {
            Bound::AtMost(t) => ("<=", t),
            Bound::AtLeast(t) => (">=", t),
        };
        let mut s = format!("{} {} {:.3e} ({op} {t:.1e})", if self.passed { "PASS" } else { "FAIL" }, self.name, self.value);
        if !self.detail.is_empty() {
            let _ = write!(s, " {}", self.detail);
        }
        s
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        let failed = self.failures().len();
        let _ = writeln!(s, "{} checks, {} failed, {:.1} s", self.checks.len(), failed, self.elapsed.as_secs_f64());
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub threads: usize,
    /// Runs the covariance checks with the sign of `Ψ_0` flipped.
    pub psi0_flip: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { suite: Suite::Full, threads: 1, psi0_flip: false }
    }
}

/// Laguerre `α ∈ {0, 1/2}` and Jacobi `(α, β) ∈ {(0, 1), (1/2, 3/2)}`.
pub fn reference_models(n: usize) -> Result<Vec<EnsembleModel>> {
    let precision = if n > crate::ensembles::MAX_N_DOUBLE { Precision::DoubleDouble } else { Precision::Double };
    [
        Family::Laguerre { alpha: 0.0 },
        Family::Laguerre { alpha: 0.5 },
        Family::Jacobi { alpha: 0.0, beta: 1.0 },
        Family::Jacobi { alpha: 0.5, beta: 1.5 },
    ]
    .into_iter()
    .map(|f| EnsembleModel::new(n, f, precision))
    .collect()
}

fn tag(m: &EnsembleModel) -> String {
    match m.family {
        Family::Laguerre { alpha } => format!("laguerre(n={},a={alpha})", m.n),
        Family::Jacobi { alpha, beta } => format!("jacobi(n={},a={alpha},b={beta})", m.n),
    }
}

fn tight() -> QuadratureSpec {
    QuadratureSpec::default().with_tol(1e-10, 1e-11)
}

/// `∫ f` over the support, split at `breaks`.
fn over_support<F: FnMut(f64) -> f64>(m: &EnsembleModel, f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    Ok(integrate_split(f, 0.0, m.effective_end(), breaks, spec)?.value)
}

/// `(value, error estimate)` of [`over_support`].
fn over_support_est<F: FnMut(f64) -> f64>(m: &EnsembleModel, f: F, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    match integrate_split(f, 0.0, m.effective_end(), &[], spec) {
        Ok(r) => Ok((r.value, r.err_est)),
        // Integrands with cancelling lobes stall above the requested
        // tolerance; the estimate is still an honest error bound.
        Err(Error::Tolerance { value, err_est }) if err_est.is_finite() => Ok((value, err_est)),
        Err(e) => Err(e),
    }
}

/// `max_{b,c < n} |∫ q_b p_c - δ_{bc}|`, plus the quadrature error estimate.
pub fn biorthogonality_error(m: &EnsembleModel) -> Result<f64> {
    let k = KernelEval::new(*m)?;
    let n = m.n;
    let mut worst = 0.0f64;
    for b in 0..n {
        for c in 0..n {
            let (v, est) = over_support_est(m, |x| if x > 0.0 { k.biorth_q(b, x).unwrap_or(f64::NAN) * k.biorth_p(c, x).unwrap_or(f64::NAN) } else { 0.0 }, &tight())?;
            let d = if b == c { 1.0 } else { 0.0 };
            worst = worst.max((v - d).abs() + est);
        }
    }
    Ok(worst)
}

/// `max |∫ K(x, y) x^k dx - y^k| / max(1, y^k)` over `k < n` and `ys`, plus
/// the quadrature error estimate. The kernel is evaluated in double-double;
/// against the moments `x^k` its f64 roundoff at large `x` reaches `1e-9`
/// for `n = 8`.
pub fn reproducing_error(m: &EnsembleModel, ys: &[f64]) -> Result<f64> {
    let m = &m.with_precision(Precision::DoubleDouble)?;
    let k = KernelEval::new(*m)?;
    let mut worst = 0.0f64;
    for &y in ys {
        for p in 0..m.n as i32 {
            let (v, est) = over_support_est(m, |x| if x > 0.0 { k.kernel(x, y).unwrap_or(f64::NAN) * x.powi(p) } else { 0.0 }, &tight())?;
            let e = y.powi(p);
            worst = worst.max(((v - e).abs() + est) / e.max(1.0));
        }
    }
    Ok(worst)
}

/// Running maximum over a family of evaluations; any evaluation error
/// poisons the result.
#[derive(Clone, Debug, Default)]
struct Worst {
    value: f64,
    at: String,
    error: Option<String>,
}

impl Worst {
    fn record(&mut self, v: f64, at: &str) {
        if !(v <= self.value) && !self.value.is_nan() {
            self.value = v;
            self.at = at.to_string();
        }
    }

    fn fail(&mut self, at: &str, e: &Error) {
        self.error.get_or_insert_with(|| format!("{at}: {e}"));
    }

    fn take(&mut self, r: Result<f64>, at: &str) {
        match r {
            Ok(v) => self.record(v, at),
            Err(e) => self.fail(at, &e),
        }
    }

    fn check(&self, name: &str, tol: f64, note: &str) -> Check {
        match &self.error {
            Some(e) => Check { name: name.into(), value: f64::NAN, bound: Bound::AtMost(tol), passed: false, detail: e.clone() },
            None => Check::at_most(name, self.value, tol).with_detail(format!("{note}worst {}", self.at)),
        }
    }
}

pub fn biorthogonality_checks(ns: &[usize]) -> Vec<Check> {
    let start = Instant::now();
    let mut bio = Worst::default();
    let mut rep = Worst::default();
    for &n in ns {
        match reference_models(n) {
            Ok(models) => {
                for m in models {
                    bio.take(biorthogonality_error(&m), &tag(&m));
                    rep.take(reproducing_error(&m, &[0.3, 0.7, 1.5]), &tag(&m));
                }
            }
            Err(e) => bio.fail(&format!("n={n}"), &e),
        }
    }
    vec![
        bio.check("biorthogonality max |∫q_b p_c - δ|", 1e-8, ""),
        rep.check("reproducing max |∫K(x,y)x^k dx - y^k|", 1e-8, ""),
        Check::at_most("biorthogonality runtime [s]", start.elapsed().as_secs_f64(), 10.0),
    ]
}

/// `(|∫ρ_SV - 1|, |∫ρ_EV - 1|)`.
pub fn normalization_errors(m: &EnsembleModel) -> Result<(f64, f64)> {
    let ctx = CovContext::new(*m)?;
    let mut err = None;
    let mut guard = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let sv = over_support(m, |a| if a > 0.0 { guard(rho_sv(&ctx, a)) } else { 0.0 }, &[], &ctx.quad)?;
    let ev = over_support(m, |r| if r > 0.0 && r < m.support_end() { guard(rho_ev_polya(&ctx, r)) } else { 0.0 }, &[], &ctx.quad)?;
    match err {
        Some(e) => Err(e),
        None => Ok(((sv - 1.0).abs(), (ev - 1.0).abs())),
    }
}

pub fn normalization_checks(ns: &[usize]) -> Vec<Check> {
    let mut sv = Worst::default();
    let mut ev = Worst::default();
    for &n in ns {
        match reference_models(n) {
            Ok(models) => {
                for m in models {
                    match normalization_errors(&m) {
                        Ok((s, e)) => {
                            sv.record(s, &tag(&m));
                            ev.record(e, &tag(&m));
                        }
                        Err(e) => {
                            sv.fail(&tag(&m), &e);
                            ev.fail(&tag(&m), &e);
                        }
                    }
                }
            }
            Err(e) => sv.fail(&format!("n={n}"), &e),
        }
    }
    vec![sv.check("normalization |∫ρ_SV - 1|", 1e-6, ""), ev.check("normalization |∫ρ_EV - 1|", 1e-6, "")]
}

/// Bulk scale of the squared singular values.
fn bulk_scale(m: &EnsembleModel) -> f64 {
    match m.family {
        Family::Laguerre { .. } => 1.5 * m.n as f64,
        Family::Jacobi { .. } => 1.0,
    }
}

/// `points` abscissae in the bulk; the `r` and `a` sets never coincide.
fn bulk_grid(m: &EnsembleModel, points: usize, shrink: f64) -> Vec<f64> {
    let s = bulk_scale(m);
    (0..points).map(|i| s * shrink * (i as f64 + 0.5) / points as f64).collect()
}

/// Vector of `n` squared singular values for the `j`-th `f_{1,n}` probe.
fn probe_vector(m: &EnsembleModel, j: usize, points: usize) -> Vec<f64> {
    let n = m.n;
    let s = bulk_scale(m) * (0.35 + 0.6 * j as f64 / points as f64);
    (0..n).map(|b| s * (0.12 + 0.88 * (b as f64 + 1.0) / n as f64)).collect()
}

/// Relative errors are taken against `max(|reference|, FLOOR · max|reference|)`
/// over the grid: outside `[min a, max a]` the exact `f_{1,n}` vanishes and
/// only roundoff remains.
const FLOOR: f64 = 1e-6;

/// Largest floor-relative deviation of `test` from the closed-form
/// `reference`. `test` is evaluated with the quadrature's absolute tolerance
/// at `1e-9 · FLOOR · max|reference|`, relaxed by factors of 1000 where the
/// integrand is pure roundoff and cannot meet it.
fn route_error<P: Sync>(
    ctx: &CovContext,
    points: &[P],
    threads: usize,
    reference: impl Fn(&CovContext, &P) -> Result<f64> + Sync,
    test: impl Fn(&CovContext, &P) -> Result<f64> + Sync,
) -> Result<f64> {
    let refs = par_map(points, threads, |p| reference(ctx, p)).into_iter().collect::<Result<Vec<f64>>>()?;
    let scale = refs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = FLOOR * scale;
    let ladder = [1e-9, 1e-6, 1e-3]
        .map(|f| ctx.quad.with_tol((f * floor).max(f64::MIN_POSITIVE), 1e-10))
        .map(|q| ctx.clone().with_quad(q));
    let ladder: Vec<CovContext> = ladder.into_iter().collect::<Result<_>>()?;
    let tests = par_map(points, threads, |p| {
        let mut last = None;
        for c in &ladder {
            match test(c, p) {
                Err(e @ Error::Tolerance { .. }) => last = Some(e),
                other => return other,
            }
        }
        Err(last.expect("ladder is not empty"))
    });
    let tests = tests.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut worst = 0.0f64;
    for (t, r) in tests.iter().zip(&refs) {
        let d = (t - r).abs();
        let e = if d == 0.0 { 0.0 } else { d / r.abs().max(floor) };
        if !(e <= worst) {
            worst = e;
        }
    }
    Ok(worst)
}

/// Floor-relative errors of the three formula routes on `points × points`
/// grids: the integral covariance against the closed form, `f_{1,1}` against
/// `ρ_EV ρ_SV + cov`, and `f_{1,n}` against `f_SV · ρ(r | a)`.
pub fn triangle_errors(ctx: &CovContext, points: usize, threads: usize) -> Result<[f64; 3]> {
    let m = *ctx.model();
    let rs = bulk_grid(&m, points, 0.97);
    let as_ = bulk_grid(&m, points, 1.0);
    let pairs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| as_.iter().map(move |&a| (r, a))).collect();
    let e1 = route_error(ctx, &pairs, threads, |c, &(r, a)| cov_closed(c, r, a), |c, &(r, a)| cov_integral(c, r, a))?;
    let e2 = route_error(
        ctx,
        &pairs,
        threads,
        |c, &(r, a)| Ok(rho_ev_polya(c, r)? * rho_sv(c, a)? + cov_closed(c, r, a)?),
        |c, &(r, a)| f_1k(c, r, &[a]),
    )?;
    let probes: Vec<(f64, Vec<f64>)> =
        rs.iter().flat_map(|&r| (0..points).map(move |j| (r, j))).map(|(r, j)| (r, probe_vector(&m, j, points))).collect();
    let opts = ConditionalOptions::default();
    let e3 = route_error(
        ctx,
        &probes,
        threads,
        |c, (r, a)| Ok(f_sv(c, a)? * conditional_density(*r, a, &opts)?),
        |c, (r, a)| f_1k(c, *r, a),
    )?;
    Ok([e1, e2, e3])
}

fn make_ctx(m: EnsembleModel, psi0_flip: bool) -> Result<CovContext> {
    let ctx = CovContext::new(m)?;
    Ok(if psi0_flip { ctx.inject_psi0_sign_flip() } else { ctx })
}

/// Laguerre `α = 1/2` and Jacobi `(1/2, 3/2)` at each `n`.
fn correlation_models(ns: &[usize]) -> Result<Vec<EnsembleModel>> {
    let mut out = Vec::new();
    for &n in ns {
        out.push(EnsembleModel::laguerre(n, 0.5)?);
        out.push(EnsembleModel::jacobi(n, 0.5, 1.5)?);
    }
    Ok(out)
}

/// Evaluates `f` on every correlation model and folds the components into
/// one [`Worst`] each.
fn over_models<const K: usize>(ns: &[usize], psi0_flip: bool, f: impl Fn(&CovContext) -> Result<[f64; K]>) -> [Worst; K] {
    let mut worst: [Worst; K] = std::array::from_fn(|_| Worst::default());
    match correlation_models(ns) {
        Ok(models) => {
            for m in models {
                match make_ctx(m, psi0_flip).and_then(|ctx| f(&ctx)) {
                    Ok(errs) => {
                        for (w, e) in worst.iter_mut().zip(errs) {
                            w.record(e, &tag(&m));
                        }
                    }
                    Err(e) => worst.iter_mut().for_each(|w| w.fail(&tag(&m), &e)),
                }
            }
        }
        Err(e) => worst.iter_mut().for_each(|w| w.fail("models", &e)),
    }
    worst
}

pub fn triangle_checks(ns: &[usize], points: usize, threads: usize, psi0_flip: bool) -> Vec<Check> {
    let names = ["triangle cov_closed vs cov_integral", "triangle f_1k(k=1) vs ρρ+cov", "triangle f_1k(k=n) vs f_SV·ρ(r|a)"];
    let tols = [1e-6, 1e-7, 1e-6];
    let worst = over_models(ns, psi0_flip, |ctx| triangle_errors(ctx, points, threads));
    let note = format!("{points}x{points} grids, ");
    (0..3).map(|k| worst[k].check(names[k], tols[k], &note)).collect()
}

/// Marginal errors on `points` probe abscissae:
/// `sup |∫f_{1,1} dr - ρ_SV(a)|`, `sup |∫f_{1,1} da - ρ_EV(r)|`,
/// `sup |∫cov dr|` and `sup |∫cov da|`.
pub fn marginal_errors(ctx: &CovContext, points: usize, threads: usize) -> Result<[f64; 4]> {
    let m = *ctx.model();
    let end = m.support_end();
    let spec = ctx.quad.with_tol(1e-10, 1e-9);
    let xs = bulk_grid(&m, points, 0.9);
    let rows = par_map(&xs, threads, |&x| -> Result<[f64; 4]> {
        let mut err = None;
        let mut guard = |r: Result<f64>| match r {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let inside = |v: f64| v > 0.0 && v < end;
        let f_dr = over_support(&m, |r| if inside(r) { guard(f_1k(ctx, r, &[x])) } else { 0.0 }, &[x], &spec)?;
        let f_da = over_support(&m, |a| if inside(a) { guard(f_1k(ctx, x, &[a])) } else { 0.0 }, &[x], &spec)?;
        let c_dr = over_support(&m, |r| if inside(r) { guard(cov_closed(ctx, r, x)) } else { 0.0 }, &[x], &spec)?;
        let c_da = over_support(&m, |a| if inside(a) { guard(cov_closed(ctx, x, a)) } else { 0.0 }, &[x], &spec)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok([(f_dr - rho_sv(ctx, x)?).abs(), (f_da - rho_ev_polya(ctx, x)?).abs(), c_dr.abs(), c_da.abs()])
    });
    let mut worst = [0.0f64; 4];
    for r in rows {
        for (w, v) in worst.iter_mut().zip(r?) {
            if !(v <= *w) {
                *w = v;
            }
        }
    }
    Ok(worst)
}

pub fn marginal_checks(ns: &[usize], points: usize, threads: usize, psi0_flip: bool) -> Vec<Check> {
    let names = ["marginal |∫f11 dr - ρ_SV|", "marginal |∫f11 da - ρ_EV|", "marginal |∫cov dr|", "marginal |∫cov da|"];
    let worst = over_models(ns, psi0_flip, |ctx| marginal_errors(ctx, points, threads));
    (0..4).map(|k| worst[k].check(names[k], 1e-5, "")).collect()
}

pub fn conditional_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let quad = QuadratureSpec::default();
    let a = [0.5, 1.0, 2.0];
    for mode in [DerivativeMode::FiniteDifference { step: 1e-5 }, DerivativeMode::Analytic] {
        let opts = ConditionalOptions { mode, precision: None };
        let label = match mode {
            DerivativeMode::Analytic => "analytic",
            DerivativeMode::FiniteDifference { .. } => "finite-difference",
        };
        let masses = [3.0, 6.0].map(|big| conditional_mass(&a, 0.0, big, &opts, &quad));
        match masses {
            [Ok(m1), Ok(m2)] => {
                out.push(
                    Check::at_most(format!("conditional mass R-independence ({label})"), (m1 - m2).abs(), 1e-6)
                        .with_detail(format!("R=3: {m1:.12}, R=6: {m2:.12}")),
                );
                out.push(Check::at_most(format!("conditional |mass - 1| ({label})"), (m1 - 1.0).abs().max((m2 - 1.0).abs()), 1e-6));
            }
            [Err(e), _] | [_, Err(e)] => out.push(Check::failed("conditional mass", Bound::AtMost(1e-6), &e)),
        }
    }

    let n2 = (|| -> Result<f64> {
        let ctx = CovContext::new(EnsembleModel::laguerre(2, 0.5)?)?;
        let (a1, a2) = (0.4, 1.6);
        let den = f_sv_polynomial(&ctx, a1, a2)?;
        let opts = ConditionalOptions::default();
        let mut worst = 0.0f64;
        for i in 0..25 {
            let r = 0.05 + 0.08 * i as f64;
            let ratio = f12(&ctx, r, a1, a2)? / den;
            worst = worst.max((conditional_density(r, &[a1, a2], &opts)? - ratio).abs());
        }
        Ok(worst)
    })();
    out.push(Check::from_result("conditional n=2 determinant vs f12/f_SV", Bound::AtMost(1e-8), n2));

    let conc = (|| -> Result<f64> {
        let opts = ConditionalOptions::default();
        let a0 = 1.0;
        let eps = 1e-3;
        let a = [a0, a0 * (1.0 + eps), a0 * (1.0 + 2.0 * eps)];
        let inside = conditional_mass(&a, a0 * 0.95, a0 * 1.05, &opts, &quad)?;
        let total = conditional_mass(&a, 0.0, 3.0 * a0 * (1.0 + 2.0 * eps), &opts, &quad)?;
        Ok(inside / total)
    })();
    out.push(Check::from_result("conditional near-degenerate concentration", Bound::AtLeast(0.99), conc));

    // Fully tied values go through the perturbation path.
    let tied = (|| -> Result<f64> {
        let a = spread_ties(&[1.0, 1.0, 1.0], 1e-3);
        conditional_mass(&a, 0.95, 1.05, &ConditionalOptions::default(), &quad)
    })();
    out.push(Check::from_result("conditional tied a=(1,1,1) concentration", Bound::AtLeast(0.99), tied));
    out
}

pub fn n2_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for m in [EnsembleModel::laguerre(2, 0.0), EnsembleModel::laguerre(2, 0.5), EnsembleModel::jacobi(2, 0.0, 1.0)] {
        let label = m.as_ref().map(tag).unwrap_or_default();
        let r = (|| -> Result<(f64, f64, f64)> {
            let m = m?;
            let ctx = CovContext::new(m)?;
            let s = bulk_scale(&m);
            let mut sv = 0.0f64;
            let mut f = 0.0f64;
            for i in 1..8 {
                let a1 = s * 0.11 * i as f64;
                let a2 = s * (0.05 + 0.07 * i as f64);
                sv = sv.max((f_sv(&ctx, &[a1, a2])? - f_sv_polynomial(&ctx, a1, a2)?).abs());
                for j in 1..8 {
                    let r = s * 0.115 * j as f64;
                    let q = f11(&ctx, r, a1)?;
                    let p = f11_polynomial(&ctx, r, a1)?;
                    f = f.max((q - p).abs() / p.abs().max(1e-3));
                }
            }
            let marg = over_support(&m, |r| if r > 0.0 { f11_polynomial(&ctx, r, 0.7 * s).unwrap_or(f64::NAN) } else { 0.0 }, &[0.7 * s], &ctx.quad.with_tol(1e-11, 1e-10))?;
            Ok((sv, f, (marg - rho_sv(&ctx, 0.7 * s)?).abs()))
        })();
        match r {
            Ok((sv, f, marg)) => {
                out.push(Check::at_most(format!("n2 f_SV kernel vs polynomial {label}"), sv, 1e-12));
                out.push(Check::at_most(format!("n2 f11 quadrature vs polynomial {label}"), f, 1e-8));
                out.push(Check::at_most(format!("n2 ∫f11 dr - ρ_SV {label}"), marg, 1e-8));
            }
            Err(e) => out.push(Check::failed(format!("n2 {label}"), Bound::AtMost(1e-8), &e)),
        }
    }
    // The n > 2 closed covariance evaluated at n = 2 is reported only.
    if let Ok(ctx) = EnsembleModel::laguerre(2, 0.5).and_then(CovContext::new) {
        let gen = ctx.clone().with_allow_n2(true);
        let d = (f11_closed(&gen, 0.8, 1.3).unwrap_or(f64::NAN) - f11_polynomial(&ctx, 0.8, 1.3).unwrap_or(f64::NAN)).abs();
        out.push(Check::at_most("n2 general closed form at n=2 (informational)", 0.0, 0.0).with_detail(format!("|Δf11(0.8,1.3)| = {d:.3e}")));
    }
    out
}

/// Laguerre `α = 1/2` kink probe at `r = a = 1`.
pub fn kink_checks(ns: &[usize], psi0_flip: bool) -> Vec<Check> {
    let mut out = Vec::new();
    for &n in ns {
        let probe = EnsembleModel::laguerre(n, 0.5).and_then(|m| make_ctx(m, psi0_flip)).and_then(|ctx| kink_probe(&ctx, 1.0));
        match probe {
            Ok(p) => {
                out.push(Check::at_most(format!("kink n={n} value gap of derivative order {}", p.order - 1), p.value_gap, 1e-6));
                out.push(
                    Check::at_least(format!("kink n={n} jump of derivative order {} / noise", p.order), p.deriv_gap() / p.noise_floor, 10.0)
                        .with_detail(format!("left {:.6e} right {:.6e} noise {:.2e}", p.left_deriv, p.right_deriv, p.noise_floor)),
                );
            }
            Err(e) => out.push(Check::failed(format!("kink n={n}"), Bound::AtLeast(10.0), &e)),
        }
    }
    out
}

/// Sign-structure statistics of `2λ cov(r; λ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignStructure {
    pub max_abs: f64,
    /// `|min| / max|v|` and `max / max|v|`.
    pub negative_share: f64,
    pub positive_share: f64,
    /// Fraction of significant rows with a sign change in `r ∈ [λ²/4, 4λ²]`.
    pub diagonal_change_fraction: f64,
    /// Largest value on the outer edges over `max|v|`.
    pub boundary_ratio: f64,
}

/// Scans `2λ cov(r; λ²)` on `λ_i = λ_max i / rows` with `r` on the outer
/// grid `(0, λ_max²]` and on a log window around each `λ²`.
pub fn sign_structure(ctx: &CovContext, lambda_max: f64, rows: usize, threads: usize) -> Result<SignStructure> {
    let lams: Vec<f64> = (1..=rows).map(|i| lambda_max * i as f64 / rows as f64).collect();
    let rmax = lambda_max * lambda_max;
    let rs: Vec<f64> = (1..=rows).map(|i| rmax * i as f64 / rows as f64).collect();
    let t = cov_grid(ctx, &lams, &rs, false, threads)?;
    let v = &t.values;
    let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = v.iter().copied().fold(0.0, f64::min);
    let max = v.iter().copied().fold(0.0, f64::max);
    let mut edge = 0.0f64;
    for i in 0..rows {
        for j in 0..rows {
            if i == rows - 1 || j == rows - 1 {
                edge = edge.max(v[i * rows + j].abs());
            }
        }
    }
    let end = ctx.model().support_end();
    let windows = par_map(&lams, threads, |&l| -> Result<(f64, bool)> {
        let a = l * l;
        let mut row = Vec::with_capacity(41);
        for k in 0..=40 {
            let r = a * 4f64.powf((k as f64 - 20.0) / 20.0);
            if r < end {
                row.push(2.0 * l * cov_closed(ctx, r, a)?);
            }
        }
        let peak = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((peak, row.windows(2).any(|w| w[0] * w[1] < 0.0)))
    });
    let windows: Vec<_> = windows.into_iter().collect::<Result<_>>()?;
    let significant: Vec<_> = windows.iter().filter(|w| w.0 > 1e-3 * max_abs).collect();
    let changes = significant.iter().filter(|w| w.1).count();
    Ok(SignStructure {
        max_abs,
        negative_share: -min / max_abs,
        positive_share: max / max_abs,
        diagonal_change_fraction: if significant.is_empty() { 0.0 } else { changes as f64 / significant.len() as f64 },
        boundary_ratio: edge / max_abs,
    })
}

/// Sign structure at `n = 3` (Laguerre `α = 1/2`) and completion of the
/// `n = 25` grid in double-double.
pub fn fig1_checks(threads: usize, large_n: Option<usize>) -> Vec<Check> {
    let mut out = Vec::new();
    let s = EnsembleModel::laguerre(3, 0.5).and_then(CovContext::new).and_then(|ctx| sign_structure(&ctx, 5.0, 30, threads));
    match s {
        Ok(s) => {
            out.push(Check::at_least("fig1 n=3 negative lobe |min|/max|v|", s.negative_share, 0.1));
            out.push(Check::at_least("fig1 n=3 positive lobe max/max|v|", s.positive_share, 0.1));
            out.push(Check::at_least("fig1 n=3 rows with sign change across λ=√r", s.diagonal_change_fraction, 0.9));
            out.push(Check::at_most("fig1 n=3 boundary decay edge/max|v|", s.boundary_ratio, 1e-2));
        }
        Err(e) => out.push(Check::failed("fig1 n=3 sign structure", Bound::AtLeast(0.1), &e)),
    }
    if let Some(n) = large_n {
        let start = Instant::now();
        let r = (|| -> Result<(usize, f64)> {
            let ctx = CovContext::new(EnsembleModel::new(n, Family::Laguerre { alpha: 0.5 }, Precision::DoubleDouble)?)?;
            let lmax = (4.0 * n as f64).sqrt() * 1.2;
            let lams: Vec<f64> = (1..=28).map(|i| lmax * i as f64 / 28.0).collect();
            let rs: Vec<f64> = (1..=28).map(|i| 1.2 * n as f64 * i as f64 / 28.0).collect();
            let t = cov_grid(&ctx, &lams, &rs, true, threads)?;
            let bad = t.values.iter().filter(|v| !v.is_finite()).count();
            let max_abs = t.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok((bad, max_abs))
        })();
        match r {
            Ok((bad, max_abs)) => out.push(
                Check::at_most(format!("fig1 n={n} double-double grid non-finite cells"), bad as f64, 0.0)
                    .with_detail(format!("28x28, max|v| {max_abs:.3e}, {:.1} s", start.elapsed().as_secs_f64())),
            ),
            Err(e) => out.push(Check::failed(format!("fig1 n={n} double-double grid"), Bound::AtMost(0.0), &e)),
        }
    }
    out
}

/// Runs the selected suite.
pub fn run(opts: &VerifyOptions) -> Report {
    let start = Instant::now();
    let t = opts.threads;
    let flip = opts.psi0_flip;
    let mut checks = Vec::new();
    match opts.suite {
        Suite::Quick => {
            checks.extend(biorthogonality_checks(&[3, 5]));
            checks.extend(normalization_checks(&[3]));
            checks.extend(triangle_checks(&[3, 4], 4, t, flip));
            checks.extend(marginal_checks(&[3], 2, t, flip));
            checks.extend(conditional_checks());
            checks.extend(n2_checks());
            checks.extend(kink_checks(&[3, 4], flip));
            checks.extend(fig1_checks(t, None));
        }
        Suite::Full => {
            checks.extend(biorthogonality_checks(&[3, 4, 5, 6, 8]));
            checks.extend(normalization_checks(&[3, 4, 5, 6, 8]));
            checks.extend(triangle_checks(&[3, 4, 5], 10, t, flip));
            checks.extend(marginal_checks(&[3, 4, 5], 4, t, flip));
            checks.extend(conditional_checks());
            checks.extend(n2_checks());
            checks.extend(kink_checks(&[3, 4], flip));
            checks.extend(fig1_checks(t, Some(25)));
        }
    }
    Report { checks, elapsed: start.elapsed() }
}
