//! Small dense determinants in `f64` or double-double.

use crate::dd::{Dd, Real};

/// Determinant of a square matrix (row-major) with its LU growth factor.
#[derive(Clone, Copy, Debug)]
pub struct DetResult<T> {
    pub det: T,
    /// `max |U_ij| / max |A_ij|` after row scaling.
    pub growth: f64,
}

/// Determinant by Gaussian elimination with partial pivoting on the
/// row-scaled matrix; the scale factors are multiplied back in at the end.
pub fn det_lu<T: Real>(m: &[Vec<T>]) -> DetResult<T> {
    let n = m.len();
    if n == 0 {
        return DetResult { det: T::one(), growth: 1.0 };
    }
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut det = T::one();
    for row in a.iter_mut() {
        debug_assert_eq!(row.len(), n);
        let s = row.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
        if s == 0.0 {
            return DetResult { det: T::zero(), growth: 1.0 };
        }
        // Power-of-two scaling is exact.
        let s2 = 2f64.powi(s.log2().round() as i32);
        let inv = T::from_f64(1.0 / s2);
        for x in row.iter_mut() {
            *x *= inv;
        }
        det *= T::from_f64(s2);
    }
    let amax = a.iter().flatten().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
    let mut umax = amax;
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, a[i][k].to_f64().abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv == 0.0 {
            return DetResult { det: T::zero(), growth: umax / amax };
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        let piv = a[k][k];
        det *= piv;
        for i in k + 1..n {
            let f = a[i][k] / piv;
            if f.to_f64() == 0.0 && f.to_dd() == Dd::ZERO {
                continue;
            }
            for j in k + 1..n {
                let t = a[k][j];
                a[i][j] -= f * t;
                umax = umax.max(a[i][j].to_f64().abs());
            }
        }
    }
    DetResult { det, growth: umax / amax }
}

/// Converts an `f64` matrix to another scalar type.
pub fn convert<T: Real>(m: &[Vec<f64>]) -> Vec<Vec<T>> {
    m.iter().map(|r| r.iter().map(|x| T::from_f64(*x)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_determinants() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        assert!((det_lu(&m).det - 5.0).abs() < 1e-15);
        let m = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 4.0]];
        assert!((det_lu(&m).det + 4.0).abs() < 1e-15);
        let m = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(det_lu(&m).det, 0.0);
    }

    #[test]
    fn vandermonde_in_dd() {
        let xs = [1.0, 1.001, 1.002, 1.003];
        let m: Vec<Vec<Dd>> = xs
            .iter()
            .map(|x| (0..4).map(|k| Dd::from_f64(*x).powi(k)).collect())
            .collect();
        let d = det_lu(&m).det;
        let mut exact = 1.0;
        for i in 0..4 {
            for j in i + 1..4 {
                exact *= xs[j] - xs[i];
            }
        }
        assert!(((d.to_f64() - exact) / exact).abs() < 1e-12);
    }
}
