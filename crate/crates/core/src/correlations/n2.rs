//! Closed forms for `n = 2`.

use super::density::f_sv;
use super::{theta, CovContext};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_semi_infinite};

/// Selects one of the `n = 2` closed forms evaluated by [`n2_closed`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum N2Form {
    /// `f_{1,2}(r; a1, a2)`, arguments `[r, a1, a2]`.
    F12,
    /// `f_{2,1}(r1, r2; a)`, arguments `[r1, r2, a]`.
    F21,
    /// `f_{1,1}(r; a)` by quadrature of `f_{1,2}`, arguments `[r, a]`.
    F11,
    /// `f_{1,1}(r; a)` through Mellin and incomplete Mellin transforms of the
    /// two Pólya weights, arguments `[r, a]`.
    F11Polynomial,
}

impl N2Form {
    pub fn arity(&self) -> usize {
        match self {
            N2Form::F12 | N2Form::F21 => 3,
            N2Form::F11 | N2Form::F11Polynomial => 2,
        }
    }
}

fn require_n2(ctx: &CovContext) -> Result<()> {
    if ctx.n() == 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("the n = 2 closed forms need n = 2, got n = {}", ctx.n())))
    }
}

fn require_positive(args: &[f64]) -> Result<()> {
    match args.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        Some(x) => Err(Error::Domain(format!("arguments must be positive, got {x}"))),
        None => Ok(()),
    }
}

/// `f_SV(a1, a2)` from the kernel; zero outside a bounded support.
fn f_sv_pair(ctx: &CovContext, a1: f64, a2: f64) -> Result<f64> {
    let end = ctx.model().support_end();
    if a1 >= end || a2 >= end {
        return Ok(0.0);
    }
    f_sv(ctx, &[a1, a2])
}

/// Evaluates the selected form on `args`.
pub fn n2_closed(ctx: &CovContext, which: N2Form, args: &[f64]) -> Result<f64> {
    if args.len() != which.arity() {
        return Err(Error::Domain(format!("{which:?} takes {} arguments, got {}", which.arity(), args.len())));
    }
    match which {
        N2Form::F12 => f12(ctx, args[0], args[1], args[2]),
        N2Form::F21 => f21(ctx, args[0], args[1], args[2]),
        N2Form::F11 => f11(ctx, args[0], args[1]),
        N2Form::F11Polynomial => f11_polynomial(ctx, args[0], args[1]),
    }
}

/// `Θ(max a - r) Θ(r - min a) f_SV(a) (1 + a1 a2 / r²) / (2 |a1 - a2|)`.
pub fn f12(ctx: &CovContext, r: f64, a1: f64, a2: f64) -> Result<f64> {
    require_n2(ctx)?;
    require_positive(&[r, a1, a2])?;
    if a1 == a2 {
        return Err(Error::Degenerate { gap: 0.0 });
    }
    let (lo, hi) = (a1.min(a2), a1.max(a2));
    if r < lo || r > hi {
        return Ok(0.0);
    }
    Ok(f_sv_pair(ctx, a1, a2)? * (1.0 + a1 * a2 / (r * r)) / (2.0 * (a1 - a2).abs()))
}

/// `[Θ(a - max r) + Θ(min r - a)] f_SV(a, r1 r2 / a) (r1 + r2) / (2 |a² - r1 r2|)`.
pub fn f21(ctx: &CovContext, r1: f64, r2: f64, a: f64) -> Result<f64> {
    require_n2(ctx)?;
    require_positive(&[r1, r2, a])?;
    let p = r1 * r2;
    if a * a == p {
        return Err(Error::Degenerate { gap: 0.0 });
    }
    let step = theta(a - r1.max(r2)) + theta(r1.min(r2) - a);
    if step == 0.0 {
        return Ok(0.0);
    }
    Ok(step * f_sv_pair(ctx, a, p / a)? * (r1 + r2) / (2.0 * (a * a - p).abs()))
}

/// `f_{1,1}(r; a) = [Θ(a - r) ∫₀^r + Θ(r - a) ∫_r^∞] da2 f_SV(a, a2)
/// (1 + a a2 / r²) / (2 |a - a2|)`.
pub fn f11(ctx: &CovContext, r: f64, a: f64) -> Result<f64> {
    require_n2(ctx)?;
    require_positive(&[r, a])?;
    let end = ctx.model().support_end();
    if a >= end {
        return Ok(0.0);
    }
    let mut err = None;
    let mut g = |a2: f64| {
        if a2 <= 0.0 || a2 == a {
            return 0.0;
        }
        match f_sv_pair(ctx, a, a2) {
            Ok(f) => f * (1.0 + a * a2 / (r * r)) / (2.0 * (a - a2).abs()),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let v = if a > r {
        integrate(&mut g, 0.0, r, &ctx.quad)?.value
    } else if end.is_finite() {
        if r >= end {
            0.0
        } else {
            integrate(&mut g, r, end, &ctx.quad)?.value
        }
    } else {
        integrate_semi_infinite(|t| g(r + t), &ctx.quad)?.value
    };
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `f_SV(a1, a2) = (a2 - a1)[w0(a1) w1(a2) - w1(a1) w0(a2)] / (2 Den)` with
/// `w0 = w`, `w1 = -x w'` and `Den = w̃0(1) w̃1(2) - w̃0(2) w̃1(1) = w̃(1) w̃(2)`.
pub fn f_sv_polynomial(ctx: &CovContext, a1: f64, a2: f64) -> Result<f64> {
    require_n2(ctx)?;
    require_positive(&[a1, a2])?;
    let m = ctx.model();
    let den = m.mellin_w(1.0)? * m.mellin_w(2.0)?;
    Ok((a2 - a1) * (m.weight(a1)? * m.weight1(a2)? - m.weight1(a1)? * m.weight(a2)?) / (2.0 * den))
}

/// `f_{1,1}(r; a)` in terms of complete and incomplete Mellin transforms,
/// using `M w1(s) = s w̃(s)` and `w̃1_r(s) = -r^s w(r) + s w̃_r(s)`.
pub fn f11_polynomial(ctx: &CovContext, r: f64, a: f64) -> Result<f64> {
    require_n2(ctx)?;
    require_positive(&[r, a])?;
    let m = ctx.model();
    if a >= m.support_end() {
        return Ok(0.0);
    }
    let (m1, m2) = (m.mellin_w(1.0)?, m.mellin_w(2.0)?);
    let den = m1 * m2;
    let (w0a, w1a) = (m.weight(a)?, m.weight1(a)?);
    let x = a / (r * r);
    let complete = theta(r - a) * (w0a * (m1 + x * 2.0 * m2) - w1a * (m1 + x * m2));
    let (i1, i2) = (m.incomplete_mellin_w(r, 1.0)?, m.incomplete_mellin_w(r, 2.0)?);
    let wr = m.weight_unchecked(r);
    let (j1, j2) = (-r * wr + i1, -r * r * wr + 2.0 * i2);
    let incomplete = w0a * (j1 + x * j2) - w1a * (i1 + x * i2);
    Ok((complete - incomplete) / (4.0 * den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleModel;

    fn ctx(m: EnsembleModel) -> CovContext {
        CovContext::new(m).unwrap()
    }

    #[test]
    fn f_sv_forms_agree() {
        for m in [EnsembleModel::laguerre(2, 0.0).unwrap(), EnsembleModel::laguerre(2, 0.7).unwrap(), EnsembleModel::jacobi(2, 0.5, 1.5).unwrap()] {
            let c = ctx(m);
            for (a1, a2) in [(0.2, 0.7), (0.5, 0.3), (0.05, 0.9)] {
                let k = f_sv(&c, &[a1, a2]).unwrap();
                let p = f_sv_polynomial(&c, a1, a2).unwrap();
                assert!((k - p).abs() < 1e-13 * k.abs().max(1e-3), "{m:?}: {k} vs {p}");
            }
        }
    }

    #[test]
    fn f12_support_and_f21_symmetry() {
        let c = ctx(EnsembleModel::laguerre(2, 0.0).unwrap());
        assert_eq!(f12(&c, 0.3, 0.4, 1.6).unwrap(), 0.0);
        assert_eq!(f12(&c, 1.7, 0.4, 1.6).unwrap(), 0.0);
        assert!(f12(&c, 1.0, 0.4, 1.6).unwrap() > 0.0);
        for (r1, r2, a) in [(0.3, 0.5, 1.0), (1.2, 2.0, 0.7), (0.4, 0.9, 0.6)] {
            assert_eq!(f21(&c, r1, r2, a).unwrap(), f21(&c, r2, r1, a).unwrap());
        }
        assert!(matches!(n2_closed(&c, N2Form::F12, &[1.0, 2.0]), Err(Error::Domain(_))));
        let c3 = ctx(EnsembleModel::laguerre(3, 0.0).unwrap());
        assert!(f11(&c3, 1.0, 1.0).is_err());
    }

    #[test]
    fn f11_quadrature_matches_polynomial() {
        for m in [EnsembleModel::laguerre(2, 0.0).unwrap(), EnsembleModel::jacobi(2, 0.0, 1.0).unwrap()] {
            let c = ctx(m);
            let end = m.effective_end().min(4.0);
            for i in 1..8 {
                for j in 1..8 {
                    let (r, a) = (end * i as f64 / 8.0, end * j as f64 / 8.25);
                    let q = f11(&c, r, a).unwrap();
                    let p = f11_polynomial(&c, r, a).unwrap();
                    assert!((q - p).abs() < 1e-8, "{m:?} r={r} a={a}: {q} vs {p}");
                }
            }
        }
    }

    #[test]
    fn f11_marginal_is_rho_sv() {
        let c = ctx(EnsembleModel::laguerre(2, 0.0).unwrap());
        let a = 0.8;
        let brk = [a];
        let m = crate::quad::integrate_split(|r| f11_polynomial(&c, r, a).unwrap(), 0.0, 60.0, &brk, &c.quad).unwrap();
        let rho = super::super::density::rho_sv(&c, a).unwrap();
        assert!((m.value - rho).abs() < 1e-8, "{} vs {rho}", m.value);
    }
}
