//! Matrix samplers, spectral extraction with deterministic audits, and
//! histogram estimators of the `j,k`-point measures.

pub mod hist;
pub mod runner;

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub use hist::{Hist1D, JointHistogram};
pub use runner::{run, DeviationReport, McConfig, McResult, Source};

/// Slack of the Weyl-type audits.
pub const AUDIT_SLACK: f64 = 1e-10;
/// Draws with a larger condition number are discarded.
pub const MAX_CONDITION: f64 = 1e12;

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `dim × dim` matrix of i.i.d. standard complex normals, `E|x|² = 1`.
pub fn sample_ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary matrix: QR of a Ginibre matrix with the columns
/// of `Q` rephased so that `R` has a positive diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let qr = sample_ginibre(dim, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        q.column_mut(j).scale_mut_complex(phase);
    }
    q
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: Complex64);
}

impl<S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_complex(&mut self, s: Complex64) {
        for x in self.iter_mut() {
            *x *= s;
        }
    }
}

/// Top-left `n × n` block of a Haar unitary of dimension `m > n`.
pub fn sample_truncated_unitary<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<DMatrix<Complex64>> {
    if m <= n || n == 0 {
        return Err(Error::Config(format!("truncation needs 0 < n < m, got n = {n}, m = {m}")));
    }
    Ok(haar_unitary(m, rng).view((0, 0), (n, n)).into_owned())
}

/// `U diag(√a) V` with independent Haar `U`, `V`.
pub fn compose_fixed_sv<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> Result<DMatrix<Complex64>> {
    if a.is_empty() || a.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain("fixed singular values must be positive".into()));
    }
    let n = a.len();
    let u = haar_unitary(n, rng);
    let mut v = haar_unitary(n, rng);
    for (i, x) in a.iter().enumerate() {
        let s = Complex64::new(x.sqrt(), 0.0);
        v.row_mut(i).iter_mut().for_each(|z| *z *= s);
    }
    Ok(u * v)
}

/// Squared singular values of the Laguerre ensemble with real `alpha > -1`
/// from the complex bidiagonal model: diagonal `χ_{2(α+n-i)}`, sub-diagonal
/// `χ_{2(n-i-1)}`, each divided by `√2`.
pub fn sample_laguerre_bidiagonal<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 || !(alpha > -1.0) {
        return Err(Error::Domain(format!("bidiagonal Laguerre sampler needs n >= 1, alpha > -1, got n = {n}, alpha = {alpha}")));
    }
    // χ²_k / 2 is Gamma(k/2, 1).
    let half_chi2 = |k: f64, rng: &mut R| -> Result<f64> {
        let g = Gamma::new(k / 2.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(g.sample(rng))
    };
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = half_chi2(2.0 * (alpha + (n - i) as f64), rng)?.sqrt();
        if i + 1 < n {
            b[(i + 1, i)] = half_chi2(2.0 * (n - i - 1) as f64, rng)?.sqrt();
        }
    }
    let sv = b.try_svd(false, false, f64::EPSILON, 10_000).ok_or(Error::Decomposition("bidiagonal SVD did not converge".into()))?;
    Ok(sv.singular_values.iter().map(|s| s * s).collect())
}

/// Squared singular values and squared eigenradii of one draw with the
/// outcome of the deterministic audits.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    pub sv2: Vec<f64>,
    pub ev2: Vec<f64>,
    /// `|Π ev2 - Π sv2| / Π sv2`.
    pub prod_gap: f64,
    /// Partial products, partial sums of moduli, and the extreme-value bounds.
    pub weyl_ok: [bool; 3],
    pub condition: f64,
}

impl SpectralSample {
    pub fn from_values(sv2: Vec<f64>, ev2: Vec<f64>) -> Self {
        let mut s: Vec<f64> = sv2.clone();
        let mut e: Vec<f64> = ev2.clone();
        s.sort_by(|x, y| y.total_cmp(x));
        e.sort_by(|x, y| y.total_cmp(x));
        let n = s.len();
        let ps: f64 = s.iter().product();
        let pe: f64 = e.iter().product();
        let prod_gap = (pe - ps).abs() / ps;
        let slack = 1.0 + AUDIT_SLACK;
        let mut products = true;
        let mut sums = true;
        let (mut cs, mut ce) = (0.0, 0.0);
        // Products in log form so that large n cannot overflow.
        let (mut ls, mut le) = (0.0, 0.0);
        for k in 0..n {
            ls += s[k].ln();
            le += e[k].ln();
            products &= le <= ls + AUDIT_SLACK;
            cs += s[k].sqrt();
            ce += e[k].sqrt();
            sums &= ce <= cs * slack;
        }
        let bounds = e[0] <= s[0] * slack && s[n - 1] <= e[n - 1] * slack;
        let condition = (s[0] / s[n - 1]).sqrt();
        SpectralSample { sv2, ev2, prod_gap, weyl_ok: [products, sums, bounds], condition }
    }

    pub fn audits_pass(&self) -> bool {
        self.weyl_ok.iter().all(|x| *x) && self.prod_gap < 1e-6
    }
}

/// Spectra of a square matrix; draws with condition number above
/// [`MAX_CONDITION`] are rejected with [`Error::Degenerate`].
pub fn spectra(x: &DMatrix<Complex64>) -> Result<SpectralSample> {
    if !x.is_square() || x.nrows() == 0 {
        return Err(Error::Domain("spectra needs a non-empty square matrix".into()));
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let svd = x.clone().try_svd(false, false, f64::EPSILON, 10_000).ok_or(Error::Decomposition("SVD did not converge".into()))?;
    let sv2: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::Degenerate { gap: smin / smax });
    }
    let schur = x.clone().try_schur(f64::EPSILON, 10_000).ok_or(Error::Decomposition("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    let ev2: Vec<f64> = (0..t.nrows()).map(|i| t[(i, i)].norm_sqr()).collect();
    Ok(SpectralSample::from_values(sv2, ev2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 3, 7] {
            let u = haar_unitary(dim, &mut rng);
            let e = u.adjoint() * &u - DMatrix::identity(dim, dim);
            assert!(e.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn diagonal_and_triangular_spectra() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let d = DMatrix::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(3.0)]);
        let s = spectra(&d).unwrap();
        let mut sv = s.sv2.clone();
        let mut ev = s.ev2.clone();
        sv.sort_by(f64::total_cmp);
        ev.sort_by(f64::total_cmp);
        assert!((sv[0] - 4.0).abs() < 1e-12 && (sv[1] - 9.0).abs() < 1e-12);
        assert!((ev[0] - 4.0).abs() < 1e-12 && (ev[1] - 9.0).abs() < 1e-12);
        let t = DMatrix::from_row_slice(2, 2, &[c(1.0), Complex64::new(5.0, -3.0), c(0.0), c(2.0)]);
        let mut ev = spectra(&t).unwrap().ev2;
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 4.0).abs() < 1e-12);
        let sing = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        assert!(matches!(spectra(&sing), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn fixed_sv_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = [0.5, 1.0, 2.0];
        for _ in 0..50 {
            let s = spectra(&compose_fixed_sv(&a, &mut rng).unwrap()).unwrap();
            let mut sv = s.sv2.clone();
            sv.sort_by(f64::total_cmp);
            for (x, y) in sv.iter().zip(&a) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(s.prod_gap < 1e-8 && s.audits_pass());
        }
        let b = [0.4, 1.6];
        for _ in 0..50 {
            let s = spectra(&compose_fixed_sv(&b, &mut rng).unwrap()).unwrap();
            assert!(s.ev2.iter().all(|r| *r >= 0.4 - 1e-10 && *r <= 1.6 + 1e-10));
            assert!((s.ev2[0] * s.ev2[1] - 0.64).abs() < 1e-8);
        }
    }

    #[test]
    fn truncation_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_truncated_unitary(3, 3, &mut rng).is_err());
        for _ in 0..100 {
            let s = spectra(&sample_truncated_unitary(3, 6, &mut rng).unwrap()).unwrap();
            assert!(s.sv2.iter().all(|x| *x > 0.0 && *x < 1.0));
            assert!(s.audits_pass());
        }
    }

    #[test]
    fn bidiagonal_mean_trace() {
        // E tr = n (n + α) for the Laguerre weight x^α e^{-x}.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, alpha, draws) = (3, 0.5, 20_000);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..draws {
            let t: f64 = sample_laguerre_bidiagonal(n, alpha, &mut rng).unwrap().iter().sum();
            sum += t;
            sq += t * t;
        }
        let mean = sum / draws as f64;
        let se = ((sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - 10.5).abs() < 5.0 * se, "{mean} ± {se}");
    }
}
