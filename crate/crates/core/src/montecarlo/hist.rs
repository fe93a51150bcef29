//! Histogram estimators with per-draw standard errors, and bin averages of
//! analytic densities for comparison.

use crate::correlations::{fmt17, par_map};
use crate::error::{Error, Result};
use crate::quad::{integrate_split, QuadratureSpec};
use std::fmt::Write as _;

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("histogram edges must be finite and strictly increasing, at least two".into()));
    }
    Ok(())
}

/// Uniformly spaced edges over `[lo, hi]`.
pub fn linear_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn locate(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0] && x < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|e| *e <= x) - 1)
}

/// Mean and standard error of the per-draw estimator `c_i / norm` where
/// `c_i` is the number of hits of one bin in draw `i`.
fn mean_and_stderr(count: u64, sumsq: u64, samples: u64, norm: f64) -> (f64, f64) {
    let n = samples as f64;
    let c = count as f64;
    let mean = c / n;
    let var = if samples > 1 { ((sumsq as f64 - c * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    (mean / norm, (var / n).sqrt() / norm)
}

/// Adds the hits of one draw: the bin counts and their squares.
fn add_hits(hits: &mut Vec<usize>, counts: &mut [u64], sumsq: &mut [u64]) {
    hits.sort_unstable();
    let mut i = 0;
    while i < hits.len() {
        let mut j = i + 1;
        while j < hits.len() && hits[j] == hits[i] {
            j += 1;
        }
        let c = (j - i) as u64;
        counts[hits[i]] += c;
        sumsq[hits[i]] += c * c;
        i = j;
    }
    hits.clear();
}

/// Density of one of `n` exchangeable values per draw; each value carries
/// weight `1/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hist1D {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sumsq: Vec<u64>,
    pub per_sample: usize,
    pub samples: u64,
    pub overflow: u64,
}

impl Hist1D {
    pub fn new(edges: Vec<f64>, per_sample: usize) -> Result<Self> {
        check_edges(&edges)?;
        let b = edges.len() - 1;
        Ok(Hist1D { edges, counts: vec![0; b], sumsq: vec![0; b], per_sample, samples: 0, overflow: 0 })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn add_sample(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.per_sample);
        let mut hits = Vec::with_capacity(values.len());
        for &v in values {
            match locate(&self.edges, v) {
                Some(i) => hits.push(i),
                None => self.overflow += 1,
            }
        }
        add_hits(&mut hits, &mut self.counts, &mut self.sumsq);
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &Hist1D) -> Result<()> {
        if self.edges != other.edges || self.per_sample != other.per_sample {
            return Err(Error::Config("cannot merge histograms with different layouts".into()));
        }
        for i in 0..self.bins() {
            self.counts[i] += other.counts[i];
            self.sumsq[i] += other.sumsq[i];
        }
        self.samples += other.samples;
        self.overflow += other.overflow;
        Ok(())
    }

    fn norm(&self, i: usize) -> f64 {
        self.per_sample as f64 * (self.edges[i + 1] - self.edges[i])
    }

    /// `(density, stderr)` of bin `i`.
    pub fn estimate(&self, i: usize) -> (f64, f64) {
        mean_and_stderr(self.counts[i], self.sumsq[i], self.samples, self.norm(i))
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.bins()).map(|i| self.estimate(i).0).collect()
    }

    /// Mass inside the bins plus the overflow mass, divided by the samples.
    pub fn total_mass(&self) -> f64 {
        let total: u64 = self.counts.iter().sum::<u64>() + self.overflow;
        total as f64 / (self.samples as f64 * self.per_sample as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi,density,stderr\n");
        for i in 0..self.bins() {
            let (d, e) = self.estimate(i);
            let _ = writeln!(s, "{},{},{},{}", fmt17(self.edges[i]), fmt17(self.edges[i + 1]), fmt17(d), fmt17(e));
        }
        s
    }
}

/// Joint density of one squared eigenradius and one squared singular value;
/// each of the `n²` ordered pairs of a draw carries weight `1/n²`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointHistogram {
    pub r_edges: Vec<f64>,
    pub a_edges: Vec<f64>,
    /// Row-major with `r` outermost.
    pub counts: Vec<u64>,
    pub sumsq: Vec<u64>,
    pub n: usize,
    pub samples: u64,
    pub overflow: u64,
}

impl JointHistogram {
    pub fn new(r_edges: Vec<f64>, a_edges: Vec<f64>, n: usize) -> Result<Self> {
        check_edges(&r_edges)?;
        check_edges(&a_edges)?;
        let b = (r_edges.len() - 1) * (a_edges.len() - 1);
        Ok(JointHistogram { r_edges, a_edges, counts: vec![0; b], sumsq: vec![0; b], n, samples: 0, overflow: 0 })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.r_edges.len() - 1, self.a_edges.len() - 1)
    }

    pub fn add_sample(&mut self, ev2: &[f64], sv2: &[f64]) {
        let na = self.a_edges.len() - 1;
        let ri: Vec<Option<usize>> = ev2.iter().map(|&r| locate(&self.r_edges, r)).collect();
        let ai: Vec<Option<usize>> = sv2.iter().map(|&a| locate(&self.a_edges, a)).collect();
        let mut hits = Vec::with_capacity(ev2.len() * sv2.len());
        for r in &ri {
            for a in &ai {
                match (r, a) {
                    (Some(i), Some(j)) => hits.push(i * na + j),
                    _ => self.overflow += 1,
                }
            }
        }
        add_hits(&mut hits, &mut self.counts, &mut self.sumsq);
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &JointHistogram) -> Result<()> {
        if self.r_edges != other.r_edges || self.a_edges != other.a_edges || self.n != other.n {
            return Err(Error::Config("cannot merge histograms with different layouts".into()));
        }
        for i in 0..self.counts.len() {
            self.counts[i] += other.counts[i];
            self.sumsq[i] += other.sumsq[i];
        }
        self.samples += other.samples;
        self.overflow += other.overflow;
        Ok(())
    }

    fn norm(&self, i: usize, j: usize) -> f64 {
        (self.n * self.n) as f64 * (self.r_edges[i + 1] - self.r_edges[i]) * (self.a_edges[j + 1] - self.a_edges[j])
    }

    /// `(density, stderr)` of bin `(i, j)`.
    pub fn estimate(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * (self.a_edges.len() - 1) + j;
        mean_and_stderr(self.counts[k], self.sumsq[k], self.samples, self.norm(i, j))
    }

    pub fn total_mass(&self) -> f64 {
        let total: u64 = self.counts.iter().sum::<u64>() + self.overflow;
        total as f64 / (self.samples as f64 * (self.n * self.n) as f64)
    }

    /// `f̂₁₁ - ρ̂_EV ⊗ ρ̂_SV` on the joint grid, from marginal histograms with
    /// the same edges.
    pub fn cov_estimate(&self, ev: &Hist1D, sv: &Hist1D) -> Result<Vec<f64>> {
        if ev.edges != self.r_edges || sv.edges != self.a_edges {
            return Err(Error::Config("marginal histograms must share the joint edges".into()));
        }
        let (nr, na) = self.shape();
        let (re, ae) = (ev.densities(), sv.densities());
        Ok((0..nr).flat_map(|i| (0..na).map(move |j| (i, j))).map(|(i, j)| self.estimate(i, j).0 - re[i] * ae[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r_lo,r_hi,a_lo,a_hi,density,stderr\n");
        let (nr, na) = self.shape();
        for i in 0..nr {
            for j in 0..na {
                let (d, e) = self.estimate(i, j);
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    fmt17(self.r_edges[i]),
                    fmt17(self.r_edges[i + 1]),
                    fmt17(self.a_edges[j]),
                    fmt17(self.a_edges[j + 1]),
                    fmt17(d),
                    fmt17(e)
                );
            }
        }
        s
    }
}

/// Quadrature used for analytic bin averages; graded adaptive so that the
/// non-analytic behaviour at the origin and on the diagonal is resolved.
pub fn bin_quadrature() -> QuadratureSpec {
    QuadratureSpec::default().with_tol(1e-11, 1e-7)
}

fn capture<'a, F: Fn(f64) -> Result<f64> + 'a>(f: F, err: &'a mut Option<Error>) -> impl FnMut(f64) -> f64 + 'a {
    move |x| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    }
}

/// Bin average of `f` over `[lo, hi]`, split at `breaks`.
pub fn bin_mean_1d<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let mut err = None;
    let v = integrate_split(capture(f, &mut err), lo, hi, breaks, spec)?.value;
    match err {
        Some(e) => Err(e),
        None => Ok(v / (hi - lo)),
    }
}

/// Bin average of `f(r, a)` over a rectangle; the inner `r` integral is
/// split at the diagonal `r = a`.
pub fn bin_mean_2d<F: Fn(f64, f64) -> Result<f64>>(f: F, r: (f64, f64), a: (f64, f64), spec: &QuadratureSpec) -> Result<f64> {
    let v = bin_mean_1d(|av| Ok(bin_mean_1d(|rv| f(rv, av), r.0, r.1, &[av], spec)? * (r.1 - r.0)), a.0, a.1, &[], spec)?;
    Ok(v / (r.1 - r.0))
}

/// Per-bin comparison of an estimate with its expectation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviationReport {
    /// Bins with at least one hit.
    pub occupied: usize,
    /// Occupied bins deviating by more than `threshold` standard errors.
    pub outliers: usize,
    pub max_abs_z: f64,
    pub threshold: f64,
}

impl DeviationReport {
    pub fn fraction(&self) -> f64 {
        if self.occupied == 0 {
            0.0
        } else {
            self.outliers as f64 / self.occupied as f64
        }
    }

    /// At most `max_fraction` of the occupied bins are outliers.
    pub fn passes(&self, max_fraction: f64) -> bool {
        self.occupied > 0 && self.fraction() <= max_fraction
    }

    fn push(&mut self, count: u64, est: f64, se: f64, expected: f64) {
        if count == 0 {
            return;
        }
        self.occupied += 1;
        let z = if se > 0.0 { (est - expected).abs() / se } else if est == expected { 0.0 } else { f64::INFINITY };
        self.max_abs_z = self.max_abs_z.max(z);
        if z > self.threshold {
            self.outliers += 1;
        }
    }
}

/// Compares every occupied bin with the bin average of `f`.
pub fn compare_1d<F: Fn(f64) -> Result<f64> + Sync>(h: &Hist1D, f: F, breaks: &[f64], threshold: f64, threads: usize) -> Result<DeviationReport> {
    let spec = bin_quadrature();
    let bins: Vec<usize> = (0..h.bins()).collect();
    let expected = par_map(&bins, threads, |&i| bin_mean_1d(&f, h.edges[i], h.edges[i + 1], breaks, &spec));
    let mut rep = DeviationReport { threshold, ..Default::default() };
    for (i, x) in expected.into_iter().enumerate() {
        let (est, se) = h.estimate(i);
        rep.push(h.counts[i], est, se, x?);
    }
    Ok(rep)
}

/// Compares every occupied bin with the bin average of `f(r, a)`.
pub fn compare_joint<F: Fn(f64, f64) -> Result<f64> + Sync>(h: &JointHistogram, f: F, threshold: f64, threads: usize) -> Result<DeviationReport> {
    let spec = bin_quadrature();
    let (nr, na) = h.shape();
    let bins: Vec<(usize, usize)> = (0..nr).flat_map(|i| (0..na).map(move |j| (i, j))).collect();
    let expected = par_map(&bins, threads, |&(i, j)| {
        bin_mean_2d(&f, (h.r_edges[i], h.r_edges[i + 1]), (h.a_edges[j], h.a_edges[j + 1]), &spec)
    });
    let mut rep = DeviationReport { threshold, ..Default::default() };
    for ((i, j), x) in bins.into_iter().zip(expected) {
        let (est, se) = h.estimate(i, j);
        rep.push(h.counts[i * na + j], est, se, x?);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_draw_weights() {
        let mut h = Hist1D::new(linear_edges(0.0, 1.0, 4), 2).unwrap();
        h.add_sample(&[0.1, 0.15]);
        h.add_sample(&[0.6, 1.5]);
        assert_eq!(h.counts, vec![2, 0, 1, 0]);
        assert_eq!(h.sumsq, vec![4, 0, 1, 0]);
        assert_eq!(h.overflow, 1);
        assert!((h.total_mass() - 1.0).abs() < 1e-15);
        // Per-draw values 4 and 0 for the first bin (count / (2 · 0.25)).
        let (d, e) = h.estimate(0);
        assert!((d - 2.0).abs() < 1e-15);
        assert!((e - 2.0).abs() < 1e-15, "{e}");
    }

    #[test]
    fn joint_mass_and_merge() {
        let mut h = JointHistogram::new(linear_edges(0.0, 2.0, 4), linear_edges(0.0, 2.0, 4), 2).unwrap();
        h.add_sample(&[0.3, 1.2], &[0.5, 1.9]);
        let mut g = h.clone();
        g.add_sample(&[2.5, 0.1], &[0.1, 0.2]);
        h.merge(&g).unwrap();
        assert_eq!(h.samples, 3);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        assert!(h.to_csv().starts_with("r_lo,r_hi,a_lo,a_hi,density,stderr\n"));
    }

    #[test]
    fn bin_means_of_polynomials() {
        let spec = bin_quadrature();
        let m = bin_mean_1d(|x| Ok(x * x), 0.0, 3.0, &[1.0], &spec).unwrap();
        assert!((m - 3.0).abs() < 1e-12);
        let k = bin_mean_2d(|r, a| Ok((r - a).abs()), (0.0, 1.0), (0.0, 1.0), &spec).unwrap();
        assert!((k - 1.0 / 3.0).abs() < 1e-12, "{k}");
        let s = bin_mean_2d(|r, _| Ok(r.sqrt()), (0.0, 1.0), (0.0, 2.0), &spec).unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-8, "{s}");
        assert!(bin_mean_1d(|_| Err(Error::Domain("x".into())), 0.0, 1.0, &[], &spec).is_err());
    }
}
