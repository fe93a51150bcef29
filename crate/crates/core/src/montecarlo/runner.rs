//! Deterministic parallel sampling. Draws are grouped into fixed blocks, each
//! with its own ChaCha8 stream derived from the master seed, so results do
//! not depend on the number of worker threads.

use super::hist::{compare_1d, compare_joint, Hist1D, JointHistogram};
use crate::correlations::cov::min_relative_gap;
use crate::correlations::density::{f11_closed, rho_ev_polya, rho_sv};
use crate::correlations::n2::f11_polynomial;
use crate::correlations::{conditional_density, ConditionalOptions, CovContext};
use super::{compose_fixed_sv, sample_ginibre, sample_laguerre_bidiagonal, sample_truncated_unitary, spectra};
use crate::ensembles::EnsembleModel;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

pub use super::hist::DeviationReport;

/// Largest fraction of occupied bins allowed beyond the deviation threshold.
pub const MAX_OUTLIER_FRACTION: f64 = 0.01;
pub const DEVIATION_SIGMAS: f64 = 4.0;
pub const MAX_DISCARD_RATE: f64 = 1e-4;

/// Draws per RNG stream.
pub const BLOCK: u64 = 4096;

/// Matrix model to sample from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Complex Ginibre, `n × n`.
    Ginibre { n: usize },
    /// Top-left `n × n` block of a Haar unitary of dimension `m`.
    TruncatedUnitary { n: usize, m: usize },
    /// `U diag(√a) V` with Haar `U`, `V`.
    FixedSv { a: Vec<f64> },
    /// Laguerre squared singular values from the bidiagonal model, dressed
    /// with Haar unitaries on both sides.
    LaguerreBidiagonal { n: usize, alpha: f64 },
}

impl Source {
    pub fn n(&self) -> usize {
        match self {
            Source::Ginibre { n } | Source::TruncatedUnitary { n, .. } | Source::LaguerreBidiagonal { n, .. } => *n,
            Source::FixedSv { a } => a.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Source::Ginibre { .. } => "ginibre",
            Source::TruncatedUnitary { .. } => "truncated_unitary",
            Source::FixedSv { .. } => "fixed_sv",
            Source::LaguerreBidiagonal { .. } => "laguerre_bidiagonal",
        }
    }

    /// The ensemble whose squared singular values the source produces:
    /// Laguerre `α = 0` for Ginibre and Jacobi `α = 0`, `β = m - 2n` for the
    /// truncation (the Jacobi weight `x^α (1-x)^{β+n-1}` of the Pólya form).
    pub fn model(&self) -> Option<Result<EnsembleModel>> {
        match self {
            Source::Ginibre { n } => Some(EnsembleModel::laguerre(*n, 0.0)),
            Source::TruncatedUnitary { n, m } => Some(EnsembleModel::jacobi(*n, 0.0, *m as f64 - 2.0 * *n as f64)),
            Source::LaguerreBidiagonal { n, alpha } => Some(EnsembleModel::laguerre(*n, *alpha)),
            Source::FixedSv { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Source::Ginibre { n } if *n == 0 => Err(Error::Config("n must be positive".into())),
            Source::TruncatedUnitary { n, m } if *n == 0 || *m < 2 * *n => {
                Err(Error::Config(format!("truncation needs m >= 2n so that no singular value sticks at 1, got n = {n}, m = {m}")))
            }
            Source::FixedSv { a } if a.is_empty() || a.iter().any(|x| !(*x > 0.0) || !x.is_finite()) => {
                Err(Error::Config("fixed singular values must be positive".into()))
            }
            Source::LaguerreBidiagonal { n, alpha } if *n == 0 || !(*alpha > -1.0) => {
                Err(Error::Config(format!("bidiagonal sampler needs n >= 1 and alpha > -1, got n = {n}, alpha = {alpha}")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<DMatrix<Complex64>> {
        match self {
            Source::Ginibre { n } => Ok(sample_ginibre(*n, rng)),
            Source::TruncatedUnitary { n, m } => sample_truncated_unitary(*n, *m, rng),
            Source::FixedSv { a } => compose_fixed_sv(a, rng),
            Source::LaguerreBidiagonal { n, alpha } => {
                let sv2 = sample_laguerre_bidiagonal(*n, *alpha, rng)?;
                compose_fixed_sv(&sv2, rng)
            }
        }
    }

    fn to_kv(&self) -> String {
        let mut s = format!("source={}\nn={}\n", self.name(), self.n());
        match self {
            Source::TruncatedUnitary { m, .. } => {
                let _ = writeln!(s, "m={m}");
            }
            Source::FixedSv { a } => {
                let _ = writeln!(s, "a={}", a.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";"));
            }
            Source::LaguerreBidiagonal { alpha, .. } => {
                let _ = writeln!(s, "alpha={alpha:e}");
            }
            Source::Ginibre { .. } => {}
        }
        if let Some(Ok(m)) = self.model() {
            let _ = writeln!(s, "family={}", m.family.name());
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub source: Source,
    pub draws: u64,
    pub seed: u64,
    pub threads: usize,
    pub r_edges: Vec<f64>,
    pub a_edges: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub config: McConfig,
    pub joint: JointHistogram,
    /// Squared eigenradii, on `r_edges`.
    pub ev: Hist1D,
    /// Squared singular values, on `a_edges`.
    pub sv: Hist1D,
    pub accepted: u64,
    /// Draws rejected as numerically singular.
    pub discards: u64,
    pub decomposition_failures: u64,
    /// Accepted draws violating the partial-product, partial-sum and
    /// extreme-value audits.
    pub weyl_violations: [u64; 3],
    /// Accepted draws with a product-identity error of `1e-6` or more.
    pub product_violations: u64,
    pub max_prod_gap: f64,
}

impl McResult {
    fn empty(config: &McConfig) -> Result<Self> {
        let n = config.source.n();
        Ok(McResult {
            config: config.clone(),
            joint: JointHistogram::new(config.r_edges.clone(), config.a_edges.clone(), n)?,
            ev: Hist1D::new(config.r_edges.clone(), n)?,
            sv: Hist1D::new(config.a_edges.clone(), n)?,
            accepted: 0,
            discards: 0,
            decomposition_failures: 0,
            weyl_violations: [0; 3],
            product_violations: 0,
            max_prod_gap: 0.0,
        })
    }

    fn merge(&mut self, o: &McResult) -> Result<()> {
        self.joint.merge(&o.joint)?;
        self.ev.merge(&o.ev)?;
        self.sv.merge(&o.sv)?;
        self.accepted += o.accepted;
        self.discards += o.discards;
        self.decomposition_failures += o.decomposition_failures;
        for k in 0..3 {
            self.weyl_violations[k] += o.weyl_violations[k];
        }
        self.product_violations += o.product_violations;
        self.max_prod_gap = self.max_prod_gap.max(o.max_prod_gap);
        Ok(())
    }

    pub fn discard_rate(&self) -> f64 {
        (self.discards + self.decomposition_failures) as f64 / self.config.draws as f64
    }

    pub fn audits_clean(&self) -> bool {
        self.weyl_violations == [0; 3] && self.product_violations == 0
    }

    /// Histograms against the analytic densities of the source, where these
    /// exist: ρ_SV, ρ_EV and f₁₁ for the matrix ensembles (f₁₁ needs the
    /// closed covariance, so Jacobi `β = 0` has none), the conditional
    /// density for fixed singular values.
    pub fn deviation_reports(&self, threshold: f64, threads: usize) -> Result<Vec<(&'static str, DeviationReport)>> {
        let mut reports = Vec::new();
        if let Source::FixedSv { a } = &self.config.source {
            if a.len() >= 2 && min_relative_gap(a) >= 1e-9 {
                let opts = ConditionalOptions::default();
                let f = |r: f64| if r <= 0.0 { Ok(0.0) } else { conditional_density(r, a, &opts) };
                reports.push(("ev_vs_conditional", compare_1d(&self.ev, f, a, threshold, threads)?));
            }
            return Ok(reports);
        }
        let Some(model) = self.config.source.model() else { return Ok(reports) };
        self.compare_with(&model?, threshold, threads)
    }

    /// Histograms against the densities of `model`.
    pub fn compare_with(&self, model: &EnsembleModel, threshold: f64, threads: usize) -> Result<Vec<(&'static str, DeviationReport)>> {
        let mut reports = Vec::new();
        let ctx = CovContext::new(*model)?;
        let end = model.support_end();
        let inside = |x: f64| x > 0.0 && x < end;
        reports.push(("sv_vs_rho_sv", compare_1d(&self.sv, |a| if inside(a) { rho_sv(&ctx, a) } else { Ok(0.0) }, &[], threshold, threads)?));
        reports.push(("ev_vs_rho_ev", compare_1d(&self.ev, |r| if inside(r) { rho_ev_polya(&ctx, r) } else { Ok(0.0) }, &[], threshold, threads)?));
        let joint = match model.n {
            2 => Some(compare_joint(&self.joint, |r, a| if inside(r) && inside(a) { f11_polynomial(&ctx, r, a) } else { Ok(0.0) }, threshold, threads)?),
            n if n > 2 && model.require_qn().is_ok() => Some(compare_joint(&self.joint, |r, a| f11_closed(&ctx, r, a), threshold, threads)?),
            _ => None,
        };
        if let Some(j) = joint {
            reports.push(("joint_vs_f11", j));
        }
        Ok(reports)
    }

    /// Metadata sidecar in `key=value` form.
    pub fn sidecar(&self) -> String {
        let mut s = self.config.source.to_kv();
        let _ = write!(
            s,
            "seed={}\ndraws={}\naccepted={}\ndiscards={}\ndecomposition_failures={}\nweyl_product_violations={}\nweyl_sum_violations={}\nbound_violations={}\nproduct_violations={}\nmax_prod_gap={:e}\nrng=chacha8\nblock={}\n",
            self.config.seed,
            self.config.draws,
            self.accepted,
            self.discards,
            self.decomposition_failures,
            self.weyl_violations[0],
            self.weyl_violations[1],
            self.weyl_violations[2],
            self.product_violations,
            self.max_prod_gap,
            BLOCK
        );
        s
    }
}

fn run_block(config: &McConfig, block: u64, out: &mut McResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(block);
    let start = block * BLOCK;
    let end = (start + BLOCK).min(config.draws);
    for _ in start..end {
        let sample = match config.source.draw(&mut rng).and_then(|x| spectra(&x)) {
            Ok(s) => s,
            Err(Error::Degenerate { .. }) => {
                out.discards += 1;
                continue;
            }
            Err(_) => {
                out.decomposition_failures += 1;
                continue;
            }
        };
        out.accepted += 1;
        for k in 0..3 {
            if !sample.weyl_ok[k] {
                out.weyl_violations[k] += 1;
            }
        }
        if !(sample.prod_gap < 1e-6) {
            out.product_violations += 1;
        }
        out.max_prod_gap = out.max_prod_gap.max(sample.prod_gap);
        out.joint.add_sample(&sample.ev2, &sample.sv2);
        out.ev.add_sample(&sample.ev2);
        out.sv.add_sample(&sample.sv2);
    }
}

/// Runs the sampler; the result is bit-identical for a given seed whatever
/// the thread count.
pub fn run(config: &McConfig) -> Result<McResult> {
    config.source.validate()?;
    if config.draws == 0 {
        return Err(Error::Config("draws must be positive".into()));
    }
    let blocks = config.draws.div_ceil(BLOCK);
    let threads = (config.threads.max(1) as u64).min(blocks);
    let mut total = McResult::empty(config)?;
    let parts: Vec<Result<McResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut part = McResult::empty(config)?;
                    let mut b = t;
                    while b < blocks {
                        run_block(config, b, &mut part);
                        b += threads;
                    }
                    Ok(part)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler worker panicked")).collect()
    });
    for p in parts {
        total.merge(&p?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::hist::linear_edges;

    fn config(threads: usize) -> McConfig {
        McConfig {
            source: Source::Ginibre { n: 3 },
            draws: 10_000,
            seed: 42,
            threads,
            r_edges: linear_edges(0.0, 8.0, 16),
            a_edges: linear_edges(0.0, 12.0, 16),
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = run(&config(1)).unwrap();
        let b = run(&config(4)).unwrap();
        assert_eq!(a.joint, b.joint);
        assert_eq!(a.ev, b.ev);
        assert_eq!(a.accepted, 10_000);
        assert!((a.joint.total_mass() - 1.0).abs() < 1e-12);
        assert!(a.audits_clean());
        let mut c = config(2);
        c.seed = 43;
        assert_ne!(run(&c).unwrap().joint, a.joint);
    }

    #[test]
    fn sidecar_has_seed() {
        let r = run(&McConfig { draws: 100, ..config(1) }).unwrap();
        let kv = crate::ensembles::parse_kv(&r.sidecar()).unwrap();
        assert!(kv.contains(&("seed".to_string(), "42".to_string())));
        assert!(kv.contains(&("family".to_string(), "laguerre".to_string())));
    }

    #[test]
    fn invalid_sources() {
        let mut c = config(1);
        c.source = Source::TruncatedUnitary { n: 3, m: 5 };
        assert!(run(&c).is_err());
        c.source = Source::Ginibre { n: 3 };
        c.draws = 0;
        assert!(run(&c).is_err());
    }
}
