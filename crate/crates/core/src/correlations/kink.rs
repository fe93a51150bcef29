//! One-sided finite-difference probe of the smoothness of `r ↦ cov(r, a)`
//! at the diagonal `r = a`.

use super::cov::cov_closed;
use super::CovContext;
use crate::error::{Error, Result};

/// One-sided derivatives of order `n - 2` at the probe point, the jump of the
/// derivative of order `n - 3`, and an estimate of the finite-difference
/// error of the derivative jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinkProbe {
    pub order: usize,
    pub left_deriv: f64,
    pub right_deriv: f64,
    pub value_gap: f64,
    pub noise_floor: f64,
}

impl KinkProbe {
    pub fn deriv_gap(&self) -> f64 {
        (self.left_deriv - self.right_deriv).abs()
    }
}

/// Finite-difference weights for the `m`-th derivative at `z` on `nodes`.
pub fn fornberg_weights(z: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let np = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; np];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

const EXTRA_NODES: usize = 4;

struct Side {
    offsets: Vec<f64>,
}

impl Side {
    /// Strictly left of the probe point.
    fn left(len: usize) -> Self {
        Side { offsets: (1..=len).map(|j| -(j as f64)).collect() }
    }

    /// Right of the probe point, including it.
    fn right(len: usize) -> Self {
        Side { offsets: (0..len).map(|j| j as f64).collect() }
    }

    /// `(D_m f(x0), Σ|w| max|f|)` with spacing `h`.
    fn derivative<F: Fn(f64) -> Result<f64>>(&self, f: &F, x0: f64, h: f64, m: usize) -> Result<(f64, f64)> {
        let w = fornberg_weights(0.0, &self.offsets, m);
        let scale = h.powi(m as i32);
        let mut acc = 0.0;
        let mut mag = 0.0f64;
        let mut wsum = 0.0;
        for (wi, o) in w.iter().zip(&self.offsets) {
            let v = f(x0 + o * h)?;
            acc += wi * v;
            mag = mag.max(v.abs());
            wsum += wi.abs();
        }
        Ok((acc / scale, wsum * mag / scale))
    }

    /// Richardson-improved derivative and the step-halving difference.
    fn richardson<F: Fn(f64) -> Result<f64>>(&self, f: &F, x0: f64, h: f64, m: usize) -> Result<(f64, f64, f64)> {
        let (d1, round) = self.derivative(f, x0, h, m)?;
        let (d2, round2) = self.derivative(f, x0, h / 2.0, m)?;
        let q = (self.offsets.len() - m) as i32;
        let p = 2f64.powi(q);
        Ok(((p * d2 - d1) / (p - 1.0), (d1 - d2).abs(), round.max(round2)))
    }
}

/// Probes `cov_closed(·, a)` at `r0` with relative spacing `rel_step`.
pub fn kink_probe_at(ctx: &CovContext, r0: f64, a: f64, rel_step: f64) -> Result<KinkProbe> {
    let n = ctx.n();
    if n < 3 {
        return Err(Error::Domain(format!("the kink probe needs n >= 3, got n = {n}")));
    }
    if !(rel_step > 0.0 && rel_step < 0.05) {
        return Err(Error::Config(format!("rel_step must lie in (0, 0.05), got {rel_step}")));
    }
    let h = rel_step * r0;
    let end = ctx.model().support_end();
    let len = n - 2 + EXTRA_NODES;
    if !(r0 - len as f64 * h > 0.0 && r0 + len as f64 * h < end) {
        return Err(Error::Domain(format!("probe stencil around r = {r0} leaves the support")));
    }
    let f = |r: f64| cov_closed(ctx, r, a);
    let (left, right) = (Side::left(len), Side::right(len));
    let order = n - 2;
    let (dl, el, rl) = left.richardson(&f, r0, h, order)?;
    let (dr, er, rr) = right.richardson(&f, r0, h, order)?;
    let (vl, _, _) = left.richardson(&f, r0, h, order - 1)?;
    let (vr, _, _) = right.richardson(&f, r0, h, order - 1)?;
    // cov_closed carries a relative error of a few 1e-14 at moderate n.
    let roundoff = 1e-13 * (rl + rr);
    Ok(KinkProbe {
        order,
        left_deriv: dl,
        right_deriv: dr,
        value_gap: (vl - vr).abs(),
        noise_floor: el + er + roundoff,
    })
}

/// Probes `cov_closed(·, a)` at the diagonal `r = a` with spacing `1e-3 a`.
pub fn kink_probe(ctx: &CovContext, a: f64) -> Result<KinkProbe> {
    kink_probe_at(ctx, a, a, 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleModel;

    #[test]
    fn fornberg_reproduces_polynomials() {
        let nodes = [-1.0, -2.0, -3.0, -4.0, -5.0];
        let w = fornberg_weights(0.0, &nodes, 2);
        // f = x³ + 2x², f''(0) = 4.
        let d: f64 = w.iter().zip(&nodes).map(|(w, x)| w * (x * x * x + 2.0 * x * x)).sum();
        assert!((d - 4.0).abs() < 1e-11, "{d}");
        let w0 = fornberg_weights(0.5, &[0.0, 1.0], 0);
        assert_eq!(w0, vec![0.5, 0.5]);
    }

    #[test]
    fn kink_at_diagonal() {
        for n in [3, 4] {
            let ctx = CovContext::new(EnsembleModel::laguerre(n, 0.5).unwrap()).unwrap();
            let p = kink_probe(&ctx, 1.0).unwrap();
            assert!(p.value_gap < 1e-6, "n={n}: {p:?}");
            assert!(p.deriv_gap() > 10.0 * p.noise_floor, "n={n}: {p:?}");
        }
    }

    #[test]
    fn smooth_away_from_diagonal() {
        let ctx = CovContext::new(EnsembleModel::laguerre(3, 0.5).unwrap()).unwrap();
        let p = kink_probe_at(&ctx, 2.0, 1.0, 1e-3).unwrap();
        assert!(p.deriv_gap() < p.noise_floor, "{p:?}");
    }
}
