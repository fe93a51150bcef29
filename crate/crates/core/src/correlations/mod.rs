//! Analytic correlation functions between squared eigenradii `r` and squared
//! singular values `a`: 1-point densities, cross-covariance densities in
//! closed and integral form, `1,k`-point functions, the conditional
//! eigenradius density given all singular values, and the `n = 1, 2` forms.

pub mod conditional;
pub mod cov;
pub mod density;
pub mod kink;
pub mod n2;

use crate::dd::Real;
use crate::ensembles::{EnsembleModel, KernelEval};
use crate::error::{Error, Result};
use crate::quad::QuadratureSpec;
use std::fmt::Write as _;

pub use conditional::{conditional_density, ConditionalOptions, DerivativeMode};
pub use kink::KinkProbe;
pub use n2::N2Form;

/// Evaluates `$body` with `$T` bound to the scalar type of `$prec`.
macro_rules! with_precision {
    ($prec:expr, $T:ident => $body:expr) => {
        match $prec {
            $crate::ensembles::Precision::Double => {
                type $T = f64;
                $body
            }
            $crate::ensembles::Precision::DoubleDouble => {
                type $T = $crate::dd::Dd;
                $body
            }
        }
    };
}
pub(crate) use with_precision;

/// Heaviside step with `Θ(0) = 1`.
#[inline]
pub fn theta(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `φ(x, t) = x (1-x)^{n-2} (1+t)^{-(n+2)} [(1 - x/n)(1+t) - (1-x)(1 + 1/n)]`.
pub fn phi(n: usize, x: f64, t: f64) -> f64 {
    let nf = n as f64;
    let opt = 1.0 + t;
    x * (1.0 - x).powi(n as i32 - 2) * opt.powi(-(n as i32 + 2))
        * ((1.0 - x / nf) * opt - (1.0 - x) * (1.0 + 1.0 / nf))
}

/// Shared state for the covariance evaluators.
#[derive(Clone, Debug)]
pub struct CovContext {
    pub kernel: KernelEval,
    pub quad: QuadratureSpec,
    /// Relative step of the finite-difference `∂_r` cross-checks.
    pub derivative_step: f64,
    /// Permits the `n > 2` closed forms to be evaluated at `n = 2`.
    pub allow_n2: bool,
    psi0_sign: f64,
}

impl CovContext {
    pub fn new(model: EnsembleModel) -> Result<Self> {
        Ok(CovContext {
            kernel: KernelEval::new(model)?,
            quad: QuadratureSpec::default(),
            derivative_step: 1e-5,
            allow_n2: false,
            psi0_sign: 1.0,
        })
    }

    pub fn with_quad(mut self, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        self.quad = quad;
        Ok(self)
    }

    pub fn with_derivative_step(mut self, step: f64) -> Result<Self> {
        if !(step > 1e-8 && step < 1e-3) {
            return Err(Error::Config(format!("derivative_step must lie in (1e-8, 1e-3), got {step}")));
        }
        self.derivative_step = step;
        Ok(self)
    }

    pub fn with_allow_n2(mut self, allow: bool) -> Self {
        self.allow_n2 = allow;
        self
    }

    /// Test hook: flips the sign of `Ψ_0` in the closed-form covariance.
    #[doc(hidden)]
    pub fn inject_psi0_sign_flip(mut self) -> Self {
        self.psi0_sign = -self.psi0_sign;
        self
    }

    pub fn model(&self) -> &EnsembleModel {
        &self.kernel.model
    }

    pub fn n(&self) -> usize {
        self.kernel.model.n
    }

    pub(crate) fn psi0_sign(&self) -> f64 {
        self.psi0_sign
    }

    /// Rejects `n <= 2` unless the opt-in flag is set.
    pub(crate) fn require_n_gt_2(&self) -> Result<()> {
        let n = self.n();
        if n > 2 || (n == 2 && self.allow_n2) {
            Ok(())
        } else {
            Err(Error::Domain(format!("this formula requires n > 2, got n = {n}")))
        }
    }

    /// Rejects points outside the open support.
    pub(crate) fn check_support(&self, name: &str, x: f64) -> Result<()> {
        let ok = x > 0.0 && x < self.model().support_end();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{name} = {x} lies outside the support of the {} ensemble", self.model().family.name())))
        }
    }

    /// `K(x, y)` in the model's precision.
    pub fn k(&self, x: f64, y: f64) -> f64 {
        with_precision!(self.model().precision, T => self.kernel.kernel_t::<T>(T::from_f64(x), T::from_f64(y)).to_f64())
    }
}

/// Identifies the formula a [`DensityTable`] was produced by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formula {
    RhoSv,
    RhoEvPolya,
    RhoEvPolynomial,
    CovClosed,
    CovIntegral,
    Cov1k,
    F1k,
    Conditional,
    N2F11,
    N2F11Polynomial,
}

impl Formula {
    pub fn id(&self) -> &'static str {
        match self {
            Formula::RhoSv => "rho_sv",
            Formula::RhoEvPolya => "rho_ev_polya",
            Formula::RhoEvPolynomial => "rho_ev_polynomial",
            Formula::CovClosed => "cov_closed",
            Formula::CovIntegral => "cov_integral",
            Formula::Cov1k => "cov_1k",
            Formula::F1k => "f_1k",
            Formula::Conditional => "conditional_density",
            Formula::N2F11 => "n2_f11",
            Formula::N2F11Polynomial => "n2_f11_polynomial",
        }
    }
}

/// Metadata carried with every table.
#[derive(Clone, Debug)]
pub struct TableMeta {
    pub formula: Formula,
    pub model: Option<EnsembleModel>,
    pub quad: QuadratureSpec,
    /// Human-readable description of any rescaling applied to the values.
    pub rescaling: Option<String>,
    pub extra: Vec<(String, String)>,
}

impl TableMeta {
    pub fn new(formula: Formula, model: Option<EnsembleModel>, quad: QuadratureSpec) -> Self {
        TableMeta { formula, model, quad, rescaling: None, extra: Vec::new() }
    }

    pub fn to_kv(&self) -> String {
        let mut s = format!("formula={}\n", self.formula.id());
        if let Some(m) = &self.model {
            s.push_str(&m.to_kv());
        }
        let q = &self.quad;
        let _ = writeln!(
            s,
            "quad_kind={:?}\nquad_order={}\nquad_abs_tol={:e}\nquad_rel_tol={:e}\nquad_max_depth={}",
            q.kind, q.order, q.abs_tol, q.rel_tol, q.max_depth
        );
        if let Some(r) = &self.rescaling {
            let _ = writeln!(s, "rescaling={r}");
        }
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Values of a density on a one- or two-dimensional grid. Two-dimensional
/// values are stored row-major with the first axis outermost.
#[derive(Clone, Debug)]
pub struct DensityTable {
    pub axes: Vec<Vec<f64>>,
    pub axis_names: Vec<String>,
    pub values: Vec<f64>,
    pub meta: TableMeta,
}

impl DensityTable {
    pub fn new(axes: Vec<Vec<f64>>, axis_names: Vec<String>, values: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 || axis_names.len() != axes.len() {
            return Err(Error::Config("a table needs one or two named axes".into()));
        }
        for ax in &axes {
            if ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config("table grids must be strictly increasing".into()));
            }
        }
        let len: usize = axes.iter().map(Vec::len).product();
        if values.len() != len {
            return Err(Error::Config(format!("expected {len} values, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite table value {v}")));
        }
        Ok(DensityTable { axes, axis_names, values, meta })
    }

    /// CSV with a header, `.` decimals, `\n` line endings and 17 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.axis_names.join(",");
        s.push_str(",value\n");
        match self.axes.as_slice() {
            [x] => {
                for (xi, v) in x.iter().zip(&self.values) {
                    let _ = writeln!(s, "{},{}", fmt17(*xi), fmt17(*v));
                }
            }
            [x, y] => {
                for (i, xi) in x.iter().enumerate() {
                    for (j, yj) in y.iter().enumerate() {
                        let _ = writeln!(s, "{},{},{}", fmt17(*xi), fmt17(*yj), fmt17(self.values[i * y.len() + j]));
                    }
                }
            }
            _ => unreachable!(),
        }
        s
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Evaluates `f` on every point, spreading the work over `threads` scoped
/// workers. The output order matches the input order.
pub fn par_map<P: Sync, R: Send, F: Fn(&P) -> R + Sync>(points: &[P], threads: usize, f: F) -> Vec<R> {
    let threads = threads.max(1).min(points.len().max(1));
    if threads == 1 {
        return points.iter().map(&f).collect();
    }
    let chunk = points.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = points.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_limits() {
        // φ(0, t) = 0 and φ(x, t) → 0 as t → ∞.
        assert_eq!(phi(3, 0.0, 1.0), 0.0);
        assert!(phi(4, 0.3, 1e6).abs() < 1e-20);
        assert_eq!(theta(0.0), 1.0);
        assert_eq!(theta(-1e-300), 0.0);
    }

    #[test]
    fn table_csv() {
        let meta = TableMeta::new(Formula::RhoSv, None, QuadratureSpec::default());
        let t = DensityTable::new(vec![vec![0.5, 1.0]], vec!["x".into()], vec![0.1, 1.0 / 3.0], meta.clone()).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,value"));
        let v: f64 = lines.nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
        assert!(DensityTable::new(vec![vec![1.0, 0.5]], vec!["x".into()], vec![0.0, 0.0], meta.clone()).is_err());
        assert!(DensityTable::new(vec![vec![0.5]], vec!["x".into()], vec![f64::NAN], meta).is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let pts: Vec<usize> = (0..103).collect();
        let out = par_map(&pts, 4, |x| x * 2);
        assert_eq!(out, pts.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
