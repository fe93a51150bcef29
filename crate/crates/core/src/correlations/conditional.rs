//! Density of one squared eigenradius given all squared singular values,
//! `ρ(r | a) = (1/n) ∂_r [N(r) / D(r)]` with
//!
//! ```text
//! D = det[ C(n-1,c-1) (-a_b/r)^{c-1} ]                      (n × n)
//! N = det[ 0 | -(1 - a_b/r)^{n-1} Θ(r - a_b) ]               ((n+1) × (n+1))
//!        [ 1 | C(n-1,c-1) (-a_b/r)^{c-1}     ]
//! ```
//!
//! The ratio depends on the singular values only, not on the ensemble.

use super::cov::min_relative_gap;
use crate::dd::{Accumulator, Dd, Real};
use crate::ensembles::Precision;
use crate::error::{Error, Result};
use crate::linalg::det_lu;
use crate::quad::{integrate_split, QuadratureSpec};
use crate::specfun::binomial;

/// How `∂_r` of the determinant ratio is taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// 5-point central difference with relative step `step`.
    FiniteDifference { step: f64 },
    /// Row-by-row derivative of both determinants (Jacobi's formula).
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalOptions {
    pub mode: DerivativeMode,
    /// `None` selects double-double when `n > 10`, when the smallest relative
    /// gap is below `1e-2`, or when the LU growth factor exceeds `1e8`.
    pub precision: Option<Precision>,
}

impl ConditionalOptions {
    pub fn finite_difference() -> Self {
        ConditionalOptions { mode: DerivativeMode::FiniteDifference { step: 1e-5 }, precision: None }
    }
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        ConditionalOptions { mode: DerivativeMode::Analytic, precision: None }
    }
}

const GROWTH_LIMIT: f64 = 1e8;
const DEGENERATE_GAP: f64 = 1e-9;

fn check_inputs(r: f64, a: &[f64]) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    if a.len() < 2 {
        return Err(Error::Domain("the conditional density needs n >= 2 singular values".into()));
    }
    if let Some(x) = a.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!("singular values must be positive, got {x}")));
    }
    let gap = min_relative_gap(a);
    if gap < DEGENERATE_GAP {
        return Err(Error::Degenerate { gap });
    }
    Ok(())
}

struct Rows<T> {
    /// `C(n-1,k) (-a_b/r)^k`, row `k`, column `b`.
    vand: Vec<Vec<T>>,
    /// `-(1 - a_b/r)^{n-1} Θ(r - a_b)`.
    top: Vec<T>,
}

fn rows<T: Real>(r: f64, a: &[f64]) -> Rows<T> {
    let n = a.len();
    let rt = T::from_f64(r);
    let x: Vec<T> = a.iter().map(|&ab| -T::from_f64(ab) / rt).collect();
    let vand = (0..n)
        .map(|k| {
            let c = T::from_dd(binomial(n - 1, k));
            x.iter().map(|&xb| c * xb.powi(k as i32)).collect()
        })
        .collect();
    let top = a
        .iter()
        .map(|&ab| if r >= ab { -((rt - T::from_f64(ab)) / rt).powi(n as i32 - 1) } else { T::zero() })
        .collect();
    Rows { vand, top }
}

fn n_matrix<T: Real>(top: &[T], vand: &[Vec<T>], first_col: T) -> Vec<Vec<T>> {
    let mut m = Vec::with_capacity(vand.len() + 1);
    let mut row0 = vec![T::zero()];
    row0.extend_from_slice(top);
    m.push(row0);
    for v in vand {
        let mut row = vec![first_col];
        row.extend_from_slice(v);
        m.push(row);
    }
    m
}

/// `(N/D, growth)`.
fn ratio_t<T: Real>(r: f64, a: &[f64]) -> (T, f64) {
    let rw = rows::<T>(r, a);
    let d = det_lu(&rw.vand);
    let nm = det_lu(&n_matrix(&rw.top, &rw.vand, T::one()));
    (nm.det / d.det, d.growth.max(nm.growth))
}

/// `(∂_r (N/D), growth)` from row-replacement derivatives.
fn ratio_derivative_t<T: Real>(r: f64, a: &[f64]) -> (T, f64) {
    let n = a.len();
    let rt = T::from_f64(r);
    let rw = rows::<T>(r, a);
    let d = det_lu(&rw.vand);
    let nmat = n_matrix(&rw.top, &rw.vand, T::one());
    let nd = det_lu(&nmat);
    let mut growth = d.growth.max(nd.growth);
    // ∂_r of row k of the Vandermonde part: -(k/r) times the row.
    let drow = |k: usize| -> Vec<T> {
        let f = -T::from_f64(k as f64) / rt;
        rw.vand[k].iter().map(|&v| f * v).collect()
    };
    let mut d_prime = Accumulator::<T>::new();
    for k in 1..n {
        let mut m = rw.vand.clone();
        m[k] = drow(k);
        let res = det_lu(&m);
        growth = growth.max(res.growth);
        d_prime.add(res.det);
    }
    let mut n_prime = Accumulator::<T>::new();
    // ∂_r of the first row: -(n-1)(1 - a_b/r)^{n-2} (a_b/r²) Θ(r - a_b).
    let dtop: Vec<T> = a
        .iter()
        .map(|&ab| {
            if r >= ab && n >= 2 {
                let ab = T::from_f64(ab);
                -T::from_f64((n - 1) as f64) * ((rt - ab) / rt).powi(n as i32 - 2) * ab / (rt * rt)
            } else {
                T::zero()
            }
        })
        .collect();
    let mut m = nmat.clone();
    m[0][1..].copy_from_slice(&dtop);
    let res = det_lu(&m);
    growth = growth.max(res.growth);
    n_prime.add(res.det);
    for k in 1..n {
        let mut m = nmat.clone();
        m[k + 1][0] = T::zero();
        m[k + 1][1..].copy_from_slice(&drow(k));
        let res = det_lu(&m);
        growth = growth.max(res.growth);
        n_prime.add(res.det);
    }
    let g = (n_prime.value() * d.det - nd.det * d_prime.value()) / (d.det * d.det);
    (g, growth)
}

fn eval<F64: Fn() -> (f64, f64), FDd: Fn() -> (Dd, f64)>(precision: Option<Precision>, force_dd: bool, f: F64, g: FDd) -> f64 {
    match precision {
        Some(Precision::Double) => f().0,
        Some(Precision::DoubleDouble) => g().0.to_f64(),
        None if force_dd => g().0.to_f64(),
        None => {
            let (v, growth) = f();
            if growth > GROWTH_LIMIT || !v.is_finite() {
                g().0.to_f64()
            } else {
                v
            }
        }
    }
}

/// `ρ(r | a)` for pairwise distinct `a`.
pub fn conditional_density(r: f64, a: &[f64], opts: &ConditionalOptions) -> Result<f64> {
    check_inputs(r, a)?;
    let n = a.len();
    // N/D is 0 below min(a) and n above max(a).
    let (lo, hi) = a.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    if r < lo || r > hi {
        return Ok(0.0);
    }
    let force_dd = n > 10 || min_relative_gap(a) < 1e-2;
    let g_at = |s: f64| eval(opts.precision, force_dd, || ratio_t::<f64>(s, a), || ratio_t::<Dd>(s, a));
    let deriv = match opts.mode {
        DerivativeMode::FiniteDifference { step } => {
            if !(step > 0.0 && step < 0.1) {
                return Err(Error::Config(format!("finite-difference step must lie in (0, 0.1), got {step}")));
            }
            let h = step * r;
            (g_at(r - 2.0 * h) - 8.0 * g_at(r - h) + 8.0 * g_at(r + h) - g_at(r + 2.0 * h)) / (12.0 * h)
        }
        DerivativeMode::Analytic => {
            eval(opts.precision, force_dd, || ratio_derivative_t::<f64>(r, a), || ratio_derivative_t::<Dd>(r, a))
        }
    };
    Ok(deriv / n as f64)
}

/// `N(r)/D(r)`; equals `n ∫₀^r ρ(s | a) ds`.
pub fn conditional_cdf_ratio(r: f64, a: &[f64], precision: Option<Precision>) -> Result<f64> {
    check_inputs(r, a)?;
    let force_dd = a.len() > 10 || min_relative_gap(a) < 1e-2;
    Ok(eval(precision, force_dd, || ratio_t::<f64>(r, a), || ratio_t::<Dd>(r, a)))
}

/// Spreads every cluster of tied values (relative gap below `1e-9`)
/// symmetrically by relative steps `eps` around the cluster mean.
pub fn spread_ties(a: &[f64], eps: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = a.to_vec();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && a[idx[end]] - a[idx[end - 1]] < DEGENERATE_GAP * scale {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            let mean = idx[start..end].iter().map(|&i| a[i]).sum::<f64>() / m as f64;
            for (pos, &i) in idx[start..end].iter().enumerate() {
                out[i] = mean * (1.0 + eps * (pos as f64 - (m as f64 - 1.0) / 2.0));
            }
        }
        start = end;
    }
    out
}

/// `ρ(r | a)` for possibly tied `a`, through the tie-spread values with
/// relative spread `eps`; with `richardson`, `(4 f(ε) - f(2ε)) / 3`.
pub fn conditional_density_perturbed(r: f64, a: &[f64], eps: f64, richardson: bool, opts: &ConditionalOptions) -> Result<f64> {
    let f1 = conditional_density(r, &spread_ties(a, eps), opts)?;
    if !richardson {
        return Ok(f1);
    }
    let f2 = conditional_density(r, &spread_ties(a, 2.0 * eps), opts)?;
    Ok((4.0 * f1 - f2) / 3.0)
}

/// `∫_lo^hi ρ(r | a) dr` by quadrature split at every `a_b`.
pub fn conditional_mass(a: &[f64], lo: f64, hi: f64, opts: &ConditionalOptions, quad: &QuadratureSpec) -> Result<f64> {
    let (amin, amax) = a.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let (lo, hi) = (lo.max(amin), hi.min(amax));
    if !(lo < hi) {
        return Ok(0.0);
    }
    let mut err = None;
    let v = integrate_split(
        |r| {
            if r <= 0.0 {
                return 0.0;
            }
            match conditional_density(r, a, opts) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        lo,
        hi,
        a,
        quad,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_independent_of_r_max() {
        let a = [0.5, 1.0, 2.0];
        let q = QuadratureSpec::default();
        for opts in [ConditionalOptions::finite_difference(), ConditionalOptions::default()] {
            for big in [3.0, 6.0] {
                let m = conditional_mass(&a, 0.0, big, &opts, &q).unwrap();
                assert!((m - 1.0).abs() < 1e-8, "{opts:?} R={big}: {m}");
            }
        }
        // N/D at R > max(a) equals n.
        assert!((conditional_cdf_ratio(2.5, &a, None).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_matches_finite_difference() {
        let a = [0.3, 0.9, 1.4, 2.2];
        for r in [0.5, 1.0, 2.0] {
            let fd = conditional_density(r, &a, &ConditionalOptions::finite_difference()).unwrap();
            let an = conditional_density(r, &a, &ConditionalOptions { mode: DerivativeMode::Analytic, precision: None }).unwrap();
            assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn n2_closed_form() {
        // ρ(r | a1, a2) = (1 + a1 a2 / r²) / (2 |a1 - a2|) on [a1, a2].
        let a = [0.4, 1.6];
        for r in [0.5, 0.8, 1.2, 1.5] {
            let v = conditional_density(r, &a, &ConditionalOptions::default()).unwrap();
            let e = (1.0 + 0.64 / (r * r)) / 2.4;
            assert!((v - e).abs() < 1e-9, "{v} vs {e}");
        }
        assert!(conditional_density(0.3, &a, &ConditionalOptions::default()).unwrap().abs() < 1e-12);
        assert!(conditional_density(1.7, &a, &ConditionalOptions::default()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn degenerate_handling() {
        let a = [1.0, 1.0, 1.0];
        assert!(matches!(conditional_density(1.0, &a, &ConditionalOptions::default()), Err(Error::Degenerate { .. })));
        let s = spread_ties(&a, 1e-3);
        assert!((s[0] - 0.999).abs() < 1e-15 && (s[2] - 1.001).abs() < 1e-15);
        let near = [1.0, 1.001, 1.002];
        let opts = ConditionalOptions::default();
        let q = QuadratureSpec::default();
        let inside = conditional_mass(&near, 0.95, 1.05, &opts, &q).unwrap();
        assert!(inside > 0.99, "{inside}");
        assert!(conditional_density(1.0, &[1.0, 2.0], &ConditionalOptions { mode: DerivativeMode::FiniteDifference { step: 0.5 }, precision: None }).is_err());
    }
}
