//! Parametric bootstrap for the quadratic-form statistics.
//!
//! Each replicate draws `n` pairs from `N(0, Γ̂)`, deletes the second
//! component of `n_u` randomly chosen subjects, re-estimates Σ̂ and
//! recomputes the statistic. The p-value is `#{T*_b ≥ T}/B`.
//!
//! Replicate `b` always reads from stream `b` under the configured seed, so
//! results do not depend on how replicates are scheduled across threads.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{contrast, gamma_hat, moments, moments_from_parts, sigma_hat};
use crate::linalg::{cholesky_lower, LowerTri, SymMat2, Vector};
use crate::rng::{self, Domain, Stream};
use crate::sample::IncompletePairedSample;
use crate::simulate::impose_mar;
use crate::stats::{quad_forms, Detail, QuadForms, TestKind, TestResult};

pub const DEFAULT_REPLICATES: usize = 1000;

/// Replicates that fail to produce a statistic may make up at most this
/// fraction of `B`.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;

/// How missing values are re-inserted into bootstrap draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BootstrapMissingness {
    /// Exactly the observed `n_u` subjects, chosen uniformly.
    #[default]
    Mcar,
    /// The three-group 2σ rule of [`impose_mar`]; `n_u` varies by replicate.
    MarRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub missingness: BootstrapMissingness,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            missingness: BootstrapMissingness::Mcar,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("B must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self::new(DEFAULT_REPLICATES, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapResult {
    pub kind: TestKind,
    pub observed: f64,
    pub p_value: f64,
    pub exceed_count: usize,
    /// Replicates that produced a statistic; the p-value denominator.
    pub replicates: usize,
    pub degenerate: usize,
}

impl BootstrapResult {
    pub fn to_test_result(&self) -> TestResult {
        TestResult {
            kind: self.kind,
            statistic: self.observed,
            p_value: self.p_value,
            detail: Detail::Bootstrap {
                replicates: self.replicates,
                exceed_count: self.exceed_count,
                degenerate: self.degenerate,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Execution {
    Sequential,
    Parallel,
}

/// Draws one bootstrap sample of the same shape `(n_c, n_u)`.
pub fn resample_once(gamma: &SymMat2, n_c: usize, n_u: usize, stream: &mut Stream) -> Result<IncompletePairedSample> {
    let chol = cholesky_lower(gamma)?;
    let mut scratch = Scratch::default();
    scratch.draw_pairs(&chol, n_c + n_u, stream);
    scratch.split_mcar(n_u, stream);
    IncompletePairedSample::new(scratch.complete, scratch.incomplete)
}

#[derive(Debug, Default)]
struct Scratch {
    pairs: Vec<(f64, f64)>,
    missing: Vec<bool>,
    complete: Vec<(f64, f64)>,
    incomplete: Vec<f64>,
}

impl Scratch {
    fn draw_pairs(&mut self, chol: &LowerTri<2>, n: usize, stream: &mut Stream) {
        self.pairs.clear();
        self.pairs.extend((0..n).map(|_| {
            let z = Vector([StandardNormal.sample(stream), StandardNormal.sample(stream)]);
            let x = chol.mul_vec(&z);
            (x[0], x[1])
        }));
    }

    fn split_mcar(&mut self, n_u: usize, stream: &mut Stream) {
        let n = self.pairs.len();
        self.missing.clear();
        self.missing.resize(n, false);
        for i in index::sample(stream, n, n_u) {
            self.missing[i] = true;
        }
        self.complete.clear();
        self.incomplete.clear();
        for (&(a, b), &gone) in self.pairs.iter().zip(&self.missing) {
            if gone {
                self.incomplete.push(a);
            } else {
                self.complete.push((a, b));
            }
        }
    }

    fn replicate(
        &mut self,
        chol: &LowerTri<2>,
        n_c: usize,
        n_u: usize,
        missingness: BootstrapMissingness,
        stream: &mut Stream,
    ) -> Option<QuadForms> {
        self.draw_pairs(chol, n_c + n_u, stream);
        match missingness {
            BootstrapMissingness::Mcar => self.split_mcar(n_u, stream),
            BootstrapMissingness::MarRule => {
                let s = impose_mar(&self.pairs, stream).ok()?;
                self.complete.clear();
                self.complete.extend_from_slice(s.complete());
                self.incomplete.clear();
                self.incomplete.extend_from_slice(s.incomplete_first());
            }
        }
        let m = moments_from_parts(&self.complete, &self.incomplete).ok()?;
        quad_forms(&contrast(&m), &sigma_hat(&m)).ok()
    }
}

/// Bootstrap p-values for several quadratic-form kinds from one shared set
/// of replicates. The result for a kind does not depend on which other kinds
/// are requested.
pub(crate) fn bootstrap_many(
    s: &IncompletePairedSample,
    kinds: &[TestKind],
    cfg: &BootstrapConfig,
    execution: Execution,
) -> Result<Vec<BootstrapResult>> {
    cfg.validate()?;
    if let Some(k) = kinds.iter().find(|k| !k.is_bootstrap()) {
        return Err(Error::NotBootstrapKind { kind: k.name() });
    }
    let m = moments(s)?;
    let observed = quad_forms(&contrast(&m), &sigma_hat(&m))?;
    let chol = cholesky_lower(&gamma_hat(&m))?;
    let key = rng::derive_seed(cfg.seed, Domain::Bootstrap, 0);

    let run = |scratch: &mut Scratch, b: usize| -> [usize; 4] {
        let mut stream = rng::stream(key, b as u64);
        match scratch.replicate(&chol, m.n_c, m.n_u, cfg.missingness, &mut stream) {
            Some(q) => [
                (q.wts >= observed.wts) as usize,
                (q.ats >= observed.ats) as usize,
                (q.mats >= observed.mats) as usize,
                0,
            ],
            None => [0, 0, 0, 1],
        }
    };
    let add = |a: [usize; 4], b: [usize; 4]| std::array::from_fn(|i| a[i] + b[i]);

    let tally = match execution {
        Execution::Sequential => {
            let mut scratch = Scratch::default();
            (0..cfg.replicates).fold([0; 4], |acc, b| add(acc, run(&mut scratch, b)))
        }
        Execution::Parallel => (0..cfg.replicates)
            .into_par_iter()
            .map_init(Scratch::default, run)
            .reduce(|| [0; 4], add),
    };

    let degenerate = tally[3];
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * cfg.replicates as f64 {
        return Err(Error::DegenerateReplicates {
            degenerate,
            total: cfg.replicates,
        });
    }
    let valid = cfg.replicates - degenerate;
    Ok(kinds
        .iter()
        .map(|&kind| {
            let slot = match kind {
                TestKind::Wts => 0,
                TestKind::Ats => 1,
                _ => 2,
            };
            let exceed_count = tally[slot];
            BootstrapResult {
                kind,
                observed: observed.get(kind).expect("quadratic kind"),
                p_value: exceed_count as f64 / valid as f64,
                exceed_count,
                replicates: valid,
                degenerate,
            }
        })
        .collect())
}

/// Bootstrap p-value of one quadratic-form statistic. Replicates run in
/// parallel on the current rayon pool; the result is identical to a
/// sequential run.
pub fn bootstrap_p(s: &IncompletePairedSample, kind: TestKind, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    Ok(bootstrap_many(s, &[kind], cfg, Execution::Parallel)?[0])
}

/// Bootstrap p-values for several kinds sharing the same replicates.
pub fn bootstrap_p_all(
    s: &IncompletePairedSample,
    kinds: &[TestKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<BootstrapResult>> {
    bootstrap_many(s, kinds, cfg, Execution::Parallel)
}

/// The bootstrap replicates of one statistic in replicate order, skipping
/// degenerate draws. Uses the same streams as [`bootstrap_p`].
pub fn bootstrap_distribution(s: &IncompletePairedSample, kind: TestKind, cfg: &BootstrapConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !kind.is_bootstrap() {
        return Err(Error::NotBootstrapKind { kind: kind.name() });
    }
    let m = moments(s)?;
    let chol = cholesky_lower(&gamma_hat(&m))?;
    let key = rng::derive_seed(cfg.seed, Domain::Bootstrap, 0);
    let draws: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, b| {
            let mut stream = rng::stream(key, b as u64);
            scratch
                .replicate(&chol, m.n_c, m.n_u, cfg.missingness, &mut stream)
                .and_then(|q| q.get(kind))
        })
        .collect();
    Ok(draws.into_iter().flatten().collect())
}

/// Bootstrap test wrapped as a [`TestResult`]; reject with
/// [`TestResult::rejects`] (`p ≤ α`).
pub fn bootstrap_test(s: &IncompletePairedSample, kind: TestKind, cfg: &BootstrapConfig, alpha: f64) -> Result<TestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(bootstrap_p(s, kind, cfg)?.to_test_result())
}
