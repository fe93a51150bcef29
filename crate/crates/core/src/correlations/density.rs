//! One-point densities, singular-value `k`-point functions and the `n = 1`
//! identity.

use super::{cov, par_map, with_precision, CovContext, DensityTable, Formula, TableMeta};
use crate::dd::{Accumulator, Real};
use crate::error::{Error, Result};
use crate::linalg::det_lu;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

/// `ρ_SV(a) = K(a, a) / n`; zero beyond a bounded support.
pub fn rho_sv(ctx: &CovContext, a: f64) -> Result<f64> {
    check_positive("a", a)?;
    Ok(ctx.k(a, a) / ctx.n() as f64)
}

/// `ρ_EV(r) = w(r) (1/n) Σ_{c<n} r^c / w̃(c+1)` for Pólya ensembles.
pub fn rho_ev_polya(ctx: &CovContext, r: f64) -> Result<f64> {
    check_positive("r", r)?;
    let w = ctx.model().weight_unchecked(r);
    if w == 0.0 {
        return Ok(0.0);
    }
    let n = ctx.n();
    let v = with_precision!(ctx.model().precision, T => {
        let rt = T::from_f64(r);
        let mut acc = Accumulator::<T>::new();
        let mut pw = T::one();
        for c in 0..n {
            if c > 0 {
                pw *= rt;
            }
            acc.add(pw / T::from_dd(ctx.kernel.mellin[c]));
        }
        acc.value().to_f64()
    });
    Ok(w * v / n as f64)
}

/// `ρ_EV(r) = n ∫₀^∞ dt ∫₀^r (dv/v) φ(v/r, t) K(v, -rt)`, valid for any
/// polynomial ensemble; evaluated by quadrature.
pub fn rho_ev_polynomial(ctx: &CovContext, r: f64) -> Result<f64> {
    check_positive("r", r)?;
    if r >= ctx.model().support_end() {
        return Ok(0.0);
    }
    cov::rho_ev_integral(ctx, r)
}

fn factorial(m: usize) -> f64 {
    (2..=m).map(|i| i as f64).product()
}

/// `f_{0,k}(a) = ((n-k)!/n!) det[K(a_b, a_c)]`.
pub fn f_0k(ctx: &CovContext, a: &[f64]) -> Result<f64> {
    let n = ctx.n();
    let k = a.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 <= k <= n = {n} points, got {k}")));
    }
    for &x in a {
        check_positive("a", x)?;
    }
    let d = with_precision!(ctx.model().precision, T => {
        let m: Vec<Vec<T>> = a
            .iter()
            .map(|&x| a.iter().map(|&y| ctx.kernel.kernel_t::<T>(T::from_f64(x), T::from_f64(y))).collect())
            .collect();
        det_lu(&m).det.to_f64()
    });
    Ok(d * factorial(n - k) / factorial(n))
}

/// Joint density of all `n` squared singular values, `det[K(a_b,a_c)] / n!`.
pub fn f_sv(ctx: &CovContext, a: &[f64]) -> Result<f64> {
    if a.len() != ctx.n() {
        return Err(Error::Domain(format!("f_SV needs n = {} values, got {}", ctx.n(), a.len())));
    }
    f_0k(ctx, a)
}

/// For `n = 1`: `f_SV(x) = w(x)/w̃(1)`, after checking that the eigenradius
/// and singular-value densities coincide with it.
pub fn n1_identity(ctx: &CovContext, x: f64) -> Result<f64> {
    if ctx.n() != 1 {
        return Err(Error::Domain(format!("n1_identity needs n = 1, got n = {}", ctx.n())));
    }
    check_positive("x", x)?;
    let f = ctx.model().weight_unchecked(x) / ctx.kernel.mellin[0].to_f64();
    let sv = rho_sv(ctx, x)?;
    let ev = rho_ev_polya(ctx, x)?;
    let tol = 1e-13 * f.abs().max(f64::MIN_POSITIVE);
    if (sv - f).abs() > tol || (ev - f).abs() > tol {
        return Err(Error::Tolerance { value: f, err_est: (sv - f).abs().max((ev - f).abs()) });
    }
    Ok(f)
}

/// `f_{1,1}(r; a) = ρ_EV(r) ρ_SV(a) + cov(r, a)` with the closed-form
/// covariance; zero on and beyond the edge of a bounded support.
pub fn f11_closed(ctx: &CovContext, r: f64, a: f64) -> Result<f64> {
    check_positive("r", r)?;
    check_positive("a", a)?;
    let end = ctx.model().support_end();
    if r >= end || a >= end {
        return Ok(0.0);
    }
    Ok(rho_ev_polya(ctx, r)? * rho_sv(ctx, a)? + cov::cov_closed(ctx, r, a)?)
}

/// A one-point density on a grid.
pub fn density_table(ctx: &CovContext, formula: Formula, xs: &[f64], threads: usize) -> Result<DensityTable> {
    let f = |x: &f64| match formula {
        Formula::RhoSv => rho_sv(ctx, *x),
        Formula::RhoEvPolya => rho_ev_polya(ctx, *x),
        Formula::RhoEvPolynomial => rho_ev_polynomial(ctx, *x),
        other => Err(Error::Config(format!("{} is not a one-point density", other.id()))),
    };
    let values = par_map(xs, threads, f).into_iter().collect::<Result<Vec<_>>>()?;
    DensityTable::new(
        vec![xs.to_vec()],
        vec!["x".into()],
        values,
        TableMeta::new(formula, Some(*ctx.model()), ctx.quad),
    )
}
