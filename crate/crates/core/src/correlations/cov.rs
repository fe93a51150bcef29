//! Cross-covariance densities and `1,k`-point functions.
//!
//! The integral forms separate the kernel, `K(v, y) = Σ_b q_b(v) p_b(y)`, and
//! `(1/v) φ(v/r, t)` into a `v`-part and a `t`-part:
//!
//! ```text
//! (1/v) φ(v/r, t) = (1/r)(1 - v/r)^{n-2} [(1 - v/(nr)) (1+t)^{-(n+1)}
//!                                          - (1 - v/r)(1 + 1/n) (1+t)^{-(n+2)}]
//! ```
//!
//! so for fixed `r` only `2n` one-dimensional `v`-integrals are needed and
//! every `t`-integrand is a finite sum.

use super::{phi, theta, with_precision, CovContext, DensityTable, Formula, TableMeta};
use crate::dd::{Accumulator, Dd, Real};
use crate::ensembles::Family;
use crate::error::{Error, Result};
use crate::linalg::det_lu;
use crate::quad::{integrate, integrate_semi_infinite, integrate_split};
use crate::specfun::binomial;

/// `v`-integrals of the separated `φ`-integrand at fixed `r`:
/// `j1[b] = ∫₀^r (1/r)(1-v/r)^{n-2}(1-v/(nr)) q_b(v) dv`,
/// `j2[b] = (1+1/n) ∫₀^r (1/r)(1-v/r)^{n-1} q_b(v) dv`.
#[derive(Clone, Debug)]
pub struct EvAux {
    pub r: f64,
    n: usize,
    j1: Vec<f64>,
    j2: Vec<f64>,
}

impl EvAux {
    pub fn new(ctx: &CovContext, r: f64) -> Result<Self> {
        let n = ctx.n();
        if n < 2 {
            return Err(Error::Domain("the eigenradius integral forms need n >= 2".into()));
        }
        let nf = n as f64;
        let mut j1 = Vec::with_capacity(n);
        let mut j2 = Vec::with_capacity(n);
        for b in 0..n {
            let q = |v: f64| q_f64(ctx, b, v);
            let i1 = integrate(
                |v| {
                    let x = v / r;
                    (1.0 - x).powi(n as i32 - 2) * (1.0 - x / nf) * q(v) / r
                },
                0.0,
                r,
                &ctx.quad,
            )?;
            let i2 = integrate(|v| (1.0 - v / r).powi(n as i32 - 1) * q(v) / r, 0.0, r, &ctx.quad)?;
            j1.push(i1.value);
            j2.push((1.0 + 1.0 / nf) * i2.value);
        }
        Ok(EvAux { r, n, j1, j2 })
    }

    /// `u_b(t) = j1[b] (1+t)^{-(n+1)} - j2[b] (1+t)^{-(n+2)}`.
    fn u(&self, t: f64) -> Vec<f64> {
        let c1 = (1.0 + t).powi(-(self.n as i32 + 1));
        let c2 = c1 / (1.0 + t);
        self.j1.iter().zip(&self.j2).map(|(a, b)| a * c1 - b * c2).collect()
    }
}

fn q_f64(ctx: &CovContext, b: usize, v: f64) -> f64 {
    with_precision!(ctx.model().precision, T => ctx.kernel.q_t::<T>(b, T::from_f64(v)).to_f64())
}

/// `p_b(y)` for `b = 0..n`.
fn p_all(ctx: &CovContext, y: f64) -> Vec<f64> {
    (0..ctx.n())
        .map(|b| with_precision!(ctx.model().precision, T => ctx.kernel.p_t::<T>(b, T::from_f64(y)).to_f64()))
        .collect()
}

/// `q_b(x)` for `b = 0..n`.
fn q_all(ctx: &CovContext, x: f64) -> Vec<f64> {
    (0..ctx.n()).map(|b| q_f64(ctx, b, x)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Accumulator::<f64>::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

/// `Ω(r, a, t)` from the separated `v`-integrals; `p_a[b] = p_b(a)`.
fn omega_sep(aux: &EvAux, u: &[f64], p_a: &[f64], a: f64, t: f64) -> f64 {
    dot(u, p_a) - theta(aux.r - a) / a * phi(aux.n, a / aux.r, t)
}

/// `Ω(r, a, t) = ∫₀^r (dv/v) φ(v/r, t) K(v, a) - Θ(r-a) φ(a/r, t) / a`.
pub fn omega(ctx: &CovContext, r: f64, a: f64, t: f64) -> Result<f64> {
    let aux = EvAux::new(ctx, r)?;
    Ok(omega_sep(&aux, &aux.u(t), &p_all(ctx, a), a, t))
}

/// `Ω(r, a, t)` by direct quadrature of the unseparated `v`-integral,
/// split at `v = a`.
pub fn omega_direct(ctx: &CovContext, r: f64, a: f64, t: f64) -> Result<f64> {
    let n = ctx.n();
    let q = integrate_split(
        |v| {
            let x = v / r;
            phi(n, x, t) / x / r * ctx.k(v, a)
        },
        0.0,
        r,
        &[a],
        &ctx.quad,
    )?;
    Ok(q.value - theta(r - a) / a * phi(n, a / r, t))
}

/// `cov(r; a) = -∫₀^∞ Ω(r, a, t) K(a, -rt) dt` by quadrature.
pub fn cov_integral(ctx: &CovContext, r: f64, a: f64) -> Result<f64> {
    ctx.require_n_gt_2()?;
    ctx.check_support("r", r)?;
    ctx.check_support("a", a)?;
    let aux = EvAux::new(ctx, r)?;
    let p_a = p_all(ctx, a);
    let q_a = q_all(ctx, a);
    let v = integrate_semi_infinite(
        |t| {
            let u = aux.u(t);
            let p_mrt = p_all(ctx, -r * t);
            -omega_sep(&aux, &u, &p_a, a, t) * dot(&q_a, &p_mrt)
        },
        &ctx.quad,
    )?;
    Ok(v.value)
}

/// `cov(r; a)` from the two-sum closed form for Pólya ensembles, with
/// `S(c) = (r/a)^c q̃_{n,a}(c+1) / w̃(c+1)` and `R_j = w̃_r(j+1)/w̃(j+1)`:
///
/// ```text
/// cov = Θ(r-a)/(n a r) Σ_c S(c) (1-a/r)^{n-2} [(n-c-1) a/r + c]
///     - 1/(n a) Σ_c S(c) [w(r) p_{n-1}(a) + Σ_j C(n-1,j) (c-j) R_j (-a)^j / r^{j+1}]
/// ```
pub fn cov_closed(ctx: &CovContext, r: f64, a: f64) -> Result<f64> {
    ctx.require_n_gt_2()?;
    ctx.model().require_qn()?;
    ctx.check_support("r", r)?;
    ctx.check_support("a", a)?;
    Ok(with_precision!(ctx.model().precision, T => cov_closed_t::<T>(ctx, r, a).to_f64()))
}

fn s_coeffs<T: Real>(ctx: &CovContext, r: f64, a: f64) -> Vec<T> {
    let k = &ctx.kernel;
    let ratio = T::from_f64(r) / T::from_f64(a);
    let mut pow = T::one();
    (0..ctx.n())
        .map(|c| {
            if c > 0 {
                pow *= ratio;
            }
            pow * k.qn_tilde_t::<T>(T::from_f64(a), c) / T::from_dd(k.mellin[c])
        })
        .collect()
}

fn cov_closed_t<T: Real>(ctx: &CovContext, r: f64, a: f64) -> T {
    let n = ctx.n();
    let nf = n as f64;
    let s = s_coeffs::<T>(ctx, r, a);
    let (rt, at) = (T::from_f64(r), T::from_f64(a));
    let x = at / rt;
    let one = T::one();
    let w_r = T::from_f64(ctx.model().weight_unchecked(r));
    let p_last = ctx.kernel.p_t::<T>(n - 1, at);

    // For r >= a write R_j = 1 - Q_j. Since
    //   Σ_j C(n-1,j) (c-j) (-x)^j = (1-x)^{n-2} [(n-c-1) x + c],
    // the unit part cancels the Θ(r-a) sum exactly, up to the Ψ_0 factor
    // (n x - 1) whose sign is s0; only the tail complements Q_j remain.
    let upper = r >= a;
    let tails = if upper { ctx.kernel.incomplete_mellin_complements(r) } else { ctx.kernel.incomplete_mellin_ratios(r) };
    let mut first = Accumulator::<T>::new();
    if upper {
        let s0 = T::from_f64(ctx.psi0_sign());
        let base = (one - x).powi(n as i32 - 2) * (s0 - one) * (T::from_f64(nf) * x - one);
        for sc in &s {
            first.add(*sc * base);
        }
    }
    let first = first.value() / (T::from_f64(nf) * at * rt);

    let sign = if upper { -one } else { one };
    let mut second = Accumulator::<T>::new();
    for (c, sc) in s.iter().enumerate() {
        let mut inner = Accumulator::<T>::new();
        inner.add(w_r * p_last);
        let mut pw = one / rt;
        for (j, tj) in tails.iter().take(n).enumerate() {
            if j > 0 {
                pw *= -x;
            }
            let coef = T::from_dd(binomial(n - 1, j)) * T::from_f64(c as f64 - j as f64);
            inner.add(sign * coef * T::from_dd(*tj) * pw);
        }
        second.add(*sc * inner.value());
    }
    first - second.value() / (T::from_f64(nf) * at)
}

/// `H_γ(x, y) = (1/n) Σ_c (c+1)^γ x^c q̃_{n,y}(c+1) / (w̃(c+1) y^{c+1})`.
pub fn h_gamma<T: Real>(ctx: &CovContext, gamma: u32, x: f64, y: f64) -> T {
    let n = ctx.n();
    let s = s_coeffs::<T>(ctx, x, y);
    let mut acc = Accumulator::<T>::new();
    for (c, sc) in s.iter().enumerate() {
        let g = if gamma == 0 { T::one() } else { T::from_f64(c as f64 + 1.0) };
        acc.add(g * *sc);
    }
    acc.value() / (T::from_f64(n as f64) * T::from_f64(y))
}

/// `(V_0(x, y), V_1(x, y))`, with
/// `V_1 = Σ_j C(n-1,j) (-y/x)^j R_j(x) / x` and
/// `V_0 = w(x) p_{n-1}(y) - ∂_y[y V_1(x, y)]`.
pub fn v_gamma<T: Real>(ctx: &CovContext, x: f64, y: f64) -> (T, T) {
    let n = ctx.n();
    let ratios = ctx.kernel.incomplete_mellin_ratios(x);
    let (xt, yt) = (T::from_f64(x), T::from_f64(y));
    let mut v1 = Accumulator::<T>::new();
    let mut dv = Accumulator::<T>::new();
    let mut pw = T::one() / xt;
    for (j, rj) in ratios.iter().take(n).enumerate() {
        if j > 0 {
            pw *= -yt / xt;
        }
        let t = T::from_dd(binomial(n - 1, j) * *rj) * pw;
        v1.add(t);
        dv.add(T::from_f64(j as f64 + 1.0) * t);
    }
    let w = T::from_f64(ctx.model().weight_unchecked(x));
    let v0 = w * ctx.kernel.p_t::<T>(n - 1, yt) - dv.value();
    (v0, v1.value())
}

/// `(Ψ_0(x), Ψ_1(x))` in the factored forms `x(1-x)^{n-2}(nx-1)` and
/// `x(1-x)^{n-1}`.
pub fn psi(ctx: &CovContext, x: f64) -> (f64, f64) {
    let n = ctx.n() as i32;
    let base = x * (1.0 - x).powi(n - 2);
    (ctx.psi0_sign() * base * (n as f64 * x - 1.0), base * (1.0 - x))
}

/// `Ĉ(r; x, y)` with `x` on the `q`-side (rows of `[K(a_b, a_c)]`) and `y`
/// on the `p`-side (columns).
pub fn c_hat<T: Real>(ctx: &CovContext, r: f64, x: f64, y: f64) -> T {
    let h0 = h_gamma::<T>(ctx, 0, r, x);
    let h1 = h_gamma::<T>(ctx, 1, r, x);
    let (ps0, ps1) = c_hat_col::<T>(ctx, r, y);
    h0 * ps0 + h1 * ps1
}

/// Column factors `Θ(r-y) Ψ_γ(y/r)/y - V_γ(r, y)` for `γ = 0, 1`.
fn c_hat_col<T: Real>(ctx: &CovContext, r: f64, y: f64) -> (T, T) {
    let (v0, v1) = v_gamma::<T>(ctx, r, y);
    let (p0, p1) = if r >= y {
        let (p0, p1) = psi(ctx, y / r);
        (p0 / y, p1 / y)
    } else {
        (0.0, 0.0)
    };
    (T::from_f64(p0) - v0, T::from_f64(p1) - v1)
}

/// Smallest pairwise gap, relative to the largest value.
pub fn min_relative_gap(a: &[f64]) -> f64 {
    let mut s = a.to_vec();
    s.sort_by(f64::total_cmp);
    let scale = s.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    s.windows(2).map(|w| (w[1] - w[0]) / scale).fold(f64::INFINITY, f64::min)
}

fn check_a_list(ctx: &CovContext, a: &[f64]) -> Result<()> {
    let n = ctx.n();
    if a.is_empty() || a.len() > n {
        return Err(Error::Domain(format!("need 1 <= k <= n = {n} singular values, got {}", a.len())));
    }
    for &x in a {
        ctx.check_support("a", x)?;
    }
    let gap = min_relative_gap(a);
    if gap < 1e-9 {
        return Err(Error::Degenerate { gap });
    }
    Ok(())
}

fn factorial(m: usize) -> f64 {
    (2..=m).map(|i| i as f64).product()
}

/// `cov_{1,k}(r; a) = ((n-k)!/(n-1)!) ∂_μ det[K(a_b,a_c) + μ Ĉ(r; a_b, a_c)]`
/// at `μ = 0`, expanded by rows.
pub fn cov_1k(ctx: &CovContext, r: f64, a: &[f64]) -> Result<f64> {
    ctx.require_n_gt_2()?;
    ctx.model().require_qn()?;
    ctx.check_support("r", r)?;
    check_a_list(ctx, a)?;
    Ok(with_precision!(ctx.model().precision, T => cov_1k_t::<T>(ctx, r, a).to_f64()))
}

fn cov_1k_t<T: Real>(ctx: &CovContext, r: f64, a: &[f64]) -> T {
    let n = ctx.n();
    let k = a.len();
    let kmat: Vec<Vec<T>> = a
        .iter()
        .map(|&x| a.iter().map(|&y| ctx.kernel.kernel_t::<T>(T::from_f64(x), T::from_f64(y))).collect())
        .collect();
    let h: Vec<(T, T)> = a.iter().map(|&x| (h_gamma::<T>(ctx, 0, r, x), h_gamma::<T>(ctx, 1, r, x))).collect();
    let cols: Vec<(T, T)> = a.iter().map(|&y| c_hat_col::<T>(ctx, r, y)).collect();
    let mut acc = Accumulator::<T>::new();
    for l in 0..k {
        let mut m = kmat.clone();
        for (c, col) in cols.iter().enumerate() {
            m[l][c] = h[l].0 * col.0 + h[l].1 * col.1;
        }
        acc.add(det_lu(&m).det);
    }
    acc.value() * T::from_f64(factorial(n - k) / factorial(n - 1))
}

/// `f_{1,k}(r; a)` from the derivative-free determinant form,
/// `((n-k)!/(n-1)!) ∫₀^∞ dt det[[A(t), Ω(r,a_c,t)], [K(a_b,-rt), K(a_b,a_c)]]`.
pub fn f_1k(ctx: &CovContext, r: f64, a: &[f64]) -> Result<f64> {
    ctx.require_n_gt_2()?;
    ctx.check_support("r", r)?;
    check_a_list(ctx, a)?;
    let n = ctx.n();
    let k = a.len();
    let aux = EvAux::new(ctx, r)?;
    let p_a: Vec<Vec<f64>> = a.iter().map(|&x| p_all(ctx, x)).collect();
    let q_a: Vec<Vec<f64>> = a.iter().map(|&x| q_all(ctx, x)).collect();
    let kmat: Vec<Vec<f64>> = a.iter().map(|&x| a.iter().map(|&y| ctx.k(x, y)).collect()).collect();
    let v = integrate_semi_infinite(
        |t| {
            let u = aux.u(t);
            let p_mrt = p_all(ctx, -r * t);
            let mut m = vec![vec![0.0; k + 1]; k + 1];
            // ∫₀^r (dv/v) φ(v/r, t) K(v, -rt)
            m[0][0] = dot(&u, &p_mrt);
            for c in 0..k {
                m[0][c + 1] = omega_sep(&aux, &u, &p_a[c], a[c], t);
            }
            for b in 0..k {
                m[b + 1][0] = dot(&q_a[b], &p_mrt);
                m[b + 1][1..].copy_from_slice(&kmat[b]);
            }
            det_lu(&m).det
        },
        &ctx.quad,
    )?;
    Ok(v.value * factorial(n - k) / factorial(n - 1))
}

/// `∫₀^r (1 - v/r)^{n-1} q_b(v) dv` for `b = 0..n`.
fn l_integrals(ctx: &CovContext, r: f64) -> Result<Vec<f64>> {
    let n = ctx.n();
    (0..n)
        .map(|b| Ok(integrate(|v| (1.0 - v / r).powi(n as i32 - 1) * q_f64(ctx, b, v), 0.0, r, &ctx.quad)?.value))
        .collect()
}

/// `T_b(r) = ∫₀^∞ p_b(-rt) (1+t)^{-(n+1)} dt`, termwise through
/// `∫₀^∞ t^c (1+t)^{-(n+1)} dt = c! (n-c-1)! / n!`.
fn t_integrals(ctx: &CovContext, r: f64) -> Vec<f64> {
    let n = ctx.n();
    (0..n)
        .map(|b| {
            let mut acc = Accumulator::<Dd>::new();
            for (c, coef) in ctx.kernel.coeff_p[b].iter().enumerate() {
                let beta = factorial(c) * factorial(n - c - 1) / factorial(n);
                acc.add(*coef * Dd::from_f64(-r).powi(c as i32) * beta);
            }
            acc.value().to_f64()
        })
        .collect()
}

/// The undifferentiated determinant of the first form of `f_{1,k}`.
fn first_form_det(ctx: &CovContext, r: f64, a: &[f64]) -> Result<f64> {
    let n = ctx.n();
    let k = a.len();
    let l = l_integrals(ctx, r)?;
    let tb = t_integrals(ctx, r);
    let mut m = vec![vec![0.0; k + 1]; k + 1];
    m[0][0] = dot(&l, &tb);
    for (c, &ac) in a.iter().enumerate() {
        m[0][c + 1] = dot(&l, &p_all(ctx, ac)) - (1.0 - ac / r).powi(n as i32 - 1) * theta(r - ac);
    }
    for (b, &ab) in a.iter().enumerate() {
        m[b + 1][0] = dot(&q_all(ctx, ab), &tb);
        for (c, &ac) in a.iter().enumerate() {
            m[b + 1][c + 1] = ctx.k(ab, ac);
        }
    }
    Ok(det_lu(&m).det)
}

fn five_point<F: FnMut(f64) -> Result<f64>>(mut g: F, r: f64, step: f64) -> Result<f64> {
    let h = step * r;
    let (m2, m1, p1, p2) = (g(r - 2.0 * h)?, g(r - h)?, g(r + h)?, g(r + 2.0 * h)?);
    Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
}

/// `f_{1,k}(r; a)` from the differentiated first form, `∂_r` by a 5-point
/// central difference with relative step `ctx.derivative_step`. Cross-check
/// only.
pub fn f_1k_differentiated(ctx: &CovContext, r: f64, a: &[f64]) -> Result<f64> {
    ctx.require_n_gt_2()?;
    ctx.check_support("r", r)?;
    check_a_list(ctx, a)?;
    let n = ctx.n();
    let d = five_point(|s| first_form_det(ctx, s, a), r, ctx.derivative_step)?;
    Ok(d * factorial(n - a.len()) / factorial(n))
}

/// `ρ_EV(r) = ∂_r ∫₀^∞ dt (1+t)^{-(n+1)} ∫₀^r dv (1-v/r)^{n-1} K(v, -rt)`,
/// by the same finite difference. Cross-check only.
pub fn rho_ev_differentiated(ctx: &CovContext, r: f64) -> Result<f64> {
    ctx.check_support("r", r)?;
    five_point(|s| Ok(dot(&l_integrals(ctx, s)?, &t_integrals(ctx, s))), r, ctx.derivative_step)
}

/// `n ∫₀^∞ dt ∫₀^r (dv/v) φ(v/r, t) K(v, -rt)`.
pub(crate) fn rho_ev_integral(ctx: &CovContext, r: f64) -> Result<f64> {
    let aux = EvAux::new(ctx, r)?;
    let v = integrate_semi_infinite(|t| dot(&aux.u(t), &p_all(ctx, -r * t)), &ctx.quad)?;
    Ok(ctx.n() as f64 * v.value)
}

/// Grid of `2λ cov(r; λ²)` over `(λ, r)`, optionally times `n^{3/2}`
/// (Laguerre only).
pub fn cov_grid(ctx: &CovContext, lambdas: &[f64], rs: &[f64], rescale_n32: bool, threads: usize) -> Result<DensityTable> {
    ctx.require_n_gt_2()?;
    let pts: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| rs.iter().map(move |&r| (l, r))).collect();
    let laguerre = matches!(ctx.model().family, Family::Laguerre { .. });
    let factor = if rescale_n32 && laguerre { (ctx.n() as f64).powf(1.5) } else { 1.0 };
    let vals = super::par_map(&pts, threads, |&(l, r)| cov_closed(ctx, r, l * l).map(|c| 2.0 * l * c * factor));
    let values = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut meta = TableMeta::new(Formula::CovClosed, Some(*ctx.model()), ctx.quad);
    meta.rescaling = Some(if factor != 1.0 { "2*lambda*n^1.5".to_string() } else { "2*lambda".to_string() });
    DensityTable::new(vec![lambdas.to_vec(), rs.to_vec()], vec!["lambda".into(), "r".into()], values, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleModel;

    fn ctx_lag(n: usize, alpha: f64) -> CovContext {
        CovContext::new(EnsembleModel::laguerre(n, alpha).unwrap()).unwrap()
    }

    #[test]
    fn omega_forms_agree() {
        let ctx = ctx_lag(3, 0.5);
        for (r, a, t) in [(1.0, 0.4, 0.3), (1.0, 2.0, 2.0), (2.5, 1.0, 0.05)] {
            let s = omega(&ctx, r, a, t).unwrap();
            let d = omega_direct(&ctx, r, a, t).unwrap();
            assert!((s - d).abs() < 1e-9 * s.abs().max(1e-3), "{s} vs {d}");
        }
    }

    #[test]
    fn closed_matches_integral_spot() {
        for ctx in [ctx_lag(3, 0.0), ctx_lag(4, 0.5), CovContext::new(EnsembleModel::jacobi(3, 0.5, 1.5).unwrap()).unwrap()] {
            let pts: &[(f64, f64)] = if ctx.model().support_end() == 1.0 {
                &[(0.3, 0.2), (0.2, 0.5), (0.6, 0.6)]
            } else {
                &[(1.0, 0.5), (0.7, 2.0), (3.0, 3.0)]
            };
            for &(r, a) in pts {
                let c = cov_closed(&ctx, r, a).unwrap();
                let i = cov_integral(&ctx, r, a).unwrap();
                assert!((c - i).abs() < 1e-7 * c.abs().max(1e-3), "{:?} r={r} a={a}: {c} vs {i}", ctx.model());
            }
        }
    }

    #[test]
    fn k1_reduces_to_closed() {
        let ctx = ctx_lag(4, 0.5);
        for (r, a) in [(1.0, 0.5), (0.7, 2.0), (2.0, 2.0)] {
            let c = cov_closed(&ctx, r, a).unwrap();
            let k = cov_1k(&ctx, r, &[a]).unwrap();
            assert!((c - k).abs() < 1e-10 * c.abs().max(1e-6), "{c} vs {k}");
        }
    }

    #[test]
    fn k2_matches_f1k_minus_product() {
        let ctx = ctx_lag(3, 0.0);
        let a = [0.6, 1.9];
        for r in [0.4, 1.0, 2.5] {
            let cov = cov_1k(&ctx, r, &a).unwrap();
            let f = f_1k(&ctx, r, &a).unwrap();
            let rho = super::super::density::rho_ev_polya(&ctx, r).unwrap();
            let f0k = super::super::density::f_0k(&ctx, &a).unwrap();
            assert!((f - rho * f0k - cov).abs() < 1e-8, "r={r}: {f} vs {} + {cov}", rho * f0k);
        }
    }

    #[test]
    fn differentiated_form_agrees() {
        let ctx = ctx_lag(3, 0.5);
        for (r, a) in [(1.0, 0.5), (0.8, 2.0)] {
            let f = f_1k(&ctx, r, &[a]).unwrap();
            let g = f_1k_differentiated(&ctx, r, &[a]).unwrap();
            assert!((f - g).abs() < 1e-6 * f.abs().max(1e-3), "{f} vs {g}");
        }
        let r = 1.3;
        let e = rho_ev_differentiated(&ctx, r).unwrap();
        let p = super::super::density::rho_ev_polya(&ctx, r).unwrap();
        assert!((e - p).abs() < 1e-7, "{e} vs {p}");
    }

    #[test]
    fn degenerate_and_support_errors() {
        let ctx = ctx_lag(3, 0.0);
        assert!(matches!(cov_1k(&ctx, 1.0, &[1.0, 1.0]), Err(Error::Degenerate { .. })));
        let jac = CovContext::new(EnsembleModel::jacobi(3, 0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(cov_integral(&jac, 0.5, 1.2), Err(Error::Domain(_))));
        let small = ctx_lag(2, 0.0);
        assert!(cov_closed(&small, 1.0, 0.5).is_err());
        assert!(cov_closed(&small.with_allow_n2(true), 1.0, 0.5).is_ok());
    }
}
