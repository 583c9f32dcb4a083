//! Monte Carlo machinery for type-I error and power studies.
//!
//! Pairs are generated as `Σ^½·ε + (δ, 0)` with standardized residuals `ε`
//! and `Σ^½` the lower Cholesky factor of the homoscedastic design
//! `[[1, ρ], [ρ, 1]]` or the heteroscedastic design `[[1, √2ρ], [√2ρ, 2]]`.
//! Missing values are then inserted completely at random (a fixed count) or
//! at random given the first component (three-group 2σ rule).

use std::io::Write;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution as _, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_many, BootstrapConfig, BootstrapMissingness, Execution};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, SymMat2, Vector};
use crate::rng::{self, Domain, Stream};
use crate::sample::IncompletePairedSample;
use crate::stats::{little, nct, TestKind};

/// Missingness probability for subjects with `|x₁| ≤ 2σ̂₁`.
pub const MAR_CENTER_RATE: f64 = 0.30;
/// Missingness probability for subjects in either tail.
pub const MAR_TAIL_RATE: f64 = 0.15;
pub const MAR_MAX_ATTEMPTS: usize = 1000;
/// Minimum complete pairs a MAR pattern must leave.
pub const MAR_MIN_COMPLETE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Normal,
    Laplace,
    #[serde(alias = "exp")]
    Exponential,
    #[serde(rename = "chisq30", alias = "chisq")]
    ChiSq30,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::Laplace => "laplace",
            Distribution::Exponential => "exponential",
            Distribution::ChiSq30 => "chisq30",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovDesign {
    /// `[[1, ρ], [ρ, 1]]`
    #[serde(alias = "sigma1")]
    Homoscedastic,
    /// `[[1, √2ρ], [√2ρ, 2]]`
    #[serde(alias = "sigma2")]
    Heteroscedastic,
}

impl CovDesign {
    pub fn name(self) -> &'static str {
        match self {
            CovDesign::Homoscedastic => "homoscedastic",
            CovDesign::Heteroscedastic => "heteroscedastic",
        }
    }

    pub fn covariance(self, rho: f64) -> SymMat2 {
        match self {
            CovDesign::Homoscedastic => SymMat2::from_lower([[1.0, 0.0], [rho, 1.0]]),
            CovDesign::Heteroscedastic => {
                SymMat2::from_lower([[1.0, 0.0], [std::f64::consts::SQRT_2 * rho, 2.0]])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Mechanism {
    Mcar { n_c: usize, n_u: usize },
    Mar { n: usize },
}

impl Mechanism {
    pub fn n(self) -> usize {
        match self {
            Mechanism::Mcar { n_c, n_u } => n_c + n_u,
            Mechanism::Mar { n } => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mcar { .. } => "mcar",
            Mechanism::Mar { .. } => "mar",
        }
    }
}

/// Draws standardized residuals (mean 0, variance 1).
#[derive(Debug, Clone, Copy)]
pub struct ResidualSampler {
    dist: Distribution,
    chisq: ChiSquared<f64>,
}

impl ResidualSampler {
    pub fn new(dist: Distribution) -> Self {
        Self {
            dist,
            chisq: ChiSquared::new(30.0).expect("positive degrees of freedom"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.dist {
            Distribution::Normal => rng.sample(StandardNormal),
            Distribution::Laplace => {
                // Inverse CDF with scale 1/√2.
                let u: f64 = rng.random::<f64>() - 0.5;
                -std::f64::consts::FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Distribution::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            Distribution::ChiSq30 => (self.chisq.sample(rng) - 30.0) / 60f64.sqrt(),
        }
    }
}

pub fn residual(dist: Distribution, stream: &mut Stream) -> f64 {
    ResidualSampler::new(dist).sample(stream)
}

/// One simulation cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub distribution: Distribution,
    pub rho: f64,
    pub design: CovDesign,
    pub mechanism: Mechanism,
    /// Shift of the first mean; the second mean is 0.
    pub delta: f64,
    pub alpha: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidArgument("delta must be finite".into()));
        }
        match self.mechanism {
            Mechanism::Mcar { n_c, n_u } if n_c < 2 || n_u < 1 => Err(Error::InvalidCounts { n: n_c + n_u, n_u }),
            Mechanism::Mar { n } if n < 6 => Err(Error::InvalidArgument(format!("MAR needs n ≥ 6, got {n}"))),
            _ => Ok(()),
        }
    }

    pub fn covariance(&self) -> SymMat2 {
        self.design.covariance(self.rho)
    }
}

/// `n` complete pairs from the scenario's model.
pub fn gen_complete(sc: &Scenario, n: usize, stream: &mut Stream) -> Result<Vec<(f64, f64)>> {
    let chol = cholesky_lower(&sc.covariance())?;
    let sampler = ResidualSampler::new(sc.distribution);
    Ok((0..n)
        .map(|_| {
            let eps = Vector([sampler.sample(stream), sampler.sample(stream)]);
            let x = chol.mul_vec(&eps);
            (x[0] + sc.delta, x[1])
        })
        .collect())
}

fn split(pairs: &[(f64, f64)], missing: &[bool]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut complete = Vec::with_capacity(pairs.len());
    let mut incomplete = Vec::new();
    for (&(a, b), &gone) in pairs.iter().zip(missing) {
        if gone {
            incomplete.push(a);
        } else {
            complete.push((a, b));
        }
    }
    (complete, incomplete)
}

/// Deletes the second component of exactly `n_u` uniformly chosen subjects.
pub fn impose_mcar(pairs: &[(f64, f64)], n_u: usize, stream: &mut Stream) -> Result<IncompletePairedSample> {
    let n = pairs.len();
    if n_u == 0 || n_u >= n || n - n_u < 2 {
        return Err(Error::InvalidCounts { n, n_u });
    }
    let mut missing = vec![false; n];
    for i in rand::seq::index::sample(stream, n, n_u) {
        missing[i] = true;
    }
    let (complete, incomplete) = split(pairs, &missing);
    IncompletePairedSample::new(complete, incomplete)
}

/// Three-group 2σ rule: the second component goes missing with probability
/// 0.15 when `x₁ < −2σ̂₁` or `x₁ > 2σ̂₁` and 0.30 otherwise, independently per
/// subject. The pattern is redrawn until at least four complete pairs and
/// one incomplete subject remain.
pub fn impose_mar(pairs: &[(f64, f64)], stream: &mut Stream) -> Result<IncompletePairedSample> {
    let n = pairs.len();
    if n < 6 {
        return Err(Error::InvalidArgument(format!("MAR needs n ≥ 6, got {n}")));
    }
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let sd = (pairs.iter().map(|p| (p.0 - mean) * (p.0 - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let rates: Vec<f64> = pairs
        .iter()
        .map(|&(x1, _)| if x1.abs() <= 2.0 * sd { MAR_CENTER_RATE } else { MAR_TAIL_RATE })
        .collect();

    let mut missing = vec![false; n];
    for _ in 0..MAR_MAX_ATTEMPTS {
        for (m, &p) in missing.iter_mut().zip(&rates) {
            *m = stream.random::<f64>() < p;
        }
        let n_u = missing.iter().filter(|&&m| m).count();
        if n_u >= 1 && n - n_u >= MAR_MIN_COMPLETE {
            let (complete, incomplete) = split(pairs, &missing);
            return IncompletePairedSample::new(complete, incomplete);
        }
    }
    Err(Error::PatternRedrawExhausted {
        attempts: MAR_MAX_ATTEMPTS,
    })
}

/// Generates one incomplete data set for a scenario.
pub fn gen_sample(sc: &Scenario, stream: &mut Stream) -> Result<IncompletePairedSample> {
    let pairs = gen_complete(sc, sc.mechanism.n(), stream)?;
    match sc.mechanism {
        Mechanism::Mcar { n_u, .. } => impose_mcar(&pairs, n_u, stream),
        Mechanism::Mar { .. } => impose_mar(&pairs, stream),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindTally {
    pub kind: TestKind,
    pub rejections: usize,
    /// Runs in which the test was applicable.
    pub n_effective: usize,
}

impl KindTally {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.n_effective as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRates {
    pub scenario: Scenario,
    pub n_sim: usize,
    pub replicates: usize,
    pub seed: u64,
    pub tallies: Vec<KindTally>,
}

impl RejectionRates {
    pub fn rate(&self, kind: TestKind) -> Option<f64> {
        self.tallies.iter().find(|t| t.kind == kind).map(KindTally::rate)
    }

    pub fn tally(&self, kind: TestKind) -> Option<&KindTally> {
        self.tallies.iter().find(|t| t.kind == kind)
    }
}

/// Per-run outcome per requested kind: `Some(reject)` or `None` if skipped.
fn one_run(sc: &Scenario, run: u64, cfg: &BootstrapConfig, kinds: &[TestKind]) -> Result<Vec<Option<bool>>> {
    let mut stream = rng::stream(rng::derive_seed(cfg.seed, Domain::Data, 0), run);
    let sample = gen_sample(sc, &mut stream)?;

    let quad: Vec<TestKind> = kinds.iter().copied().filter(|k| k.is_bootstrap()).collect();
    let boot = if quad.is_empty() {
        Vec::new()
    } else {
        let run_cfg = BootstrapConfig {
            seed: rng::derive_seed(cfg.seed, Domain::Bootstrap, run),
            ..*cfg
        };
        bootstrap_many(&sample, &quad, &run_cfg, Execution::Sequential)?
    };

    kinds
        .iter()
        .map(|&kind| match kind {
            TestKind::Little => match little(&sample) {
                Ok(r) => Ok(Some(r.rejects(sc.alpha))),
                Err(Error::TooFewComplete { .. }) => Ok(None),
                Err(e) => Err(e),
            },
            TestKind::Nct => Ok(Some(nct(&sample)?.rejects(sc.alpha))),
            _ => {
                let r = boot.iter().find(|r| r.kind == kind).expect("bootstrapped kind");
                Ok(Some(r.p_value <= sc.alpha))
            }
        })
        .collect()
}

/// Rejection rates over `n_sim` Monte Carlo runs, executed on the current
/// rayon pool. Run `r` uses data stream `r` and a bootstrap key derived from
/// `(cfg.seed, r)`, so the output is independent of the thread count.
pub fn run_scenario(sc: &Scenario, n_sim: usize, cfg: &BootstrapConfig, kinds: &[TestKind]) -> Result<RejectionRates> {
    sc.validate()?;
    if n_sim == 0 {
        return Err(Error::InvalidArgument("n_sim must be at least 1".into()));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no tests requested".into()));
    }
    let zero = || vec![(0usize, 0usize); kinds.len()];
    let counts = (0..n_sim as u64)
        .into_par_iter()
        .map(|run| {
            one_run(sc, run, cfg, kinds).map(|outcome| {
                outcome
                    .into_iter()
                    .map(|o| match o {
                        Some(rej) => (rej as usize, 1),
                        None => (0, 0),
                    })
                    .collect::<Vec<_>>()
            })
        })
        .try_reduce(zero, |a, b| {
            Ok(a.into_iter().zip(b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect())
        })?;

    Ok(RejectionRates {
        scenario: *sc,
        n_sim,
        replicates: cfg.replicates,
        seed: cfg.seed,
        tallies: kinds
            .iter()
            .zip(counts)
            .map(|(&kind, (rejections, n_effective))| KindTally {
                kind,
                rejections,
                n_effective,
            })
            .collect(),
    })
}

/// A scalar or a list of values; lists are sweep axes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }

    fn is_many(&self) -> bool {
        matches!(self, OneOrMany::Many(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMissingnessSetting {
    #[default]
    Mcar,
    Mar,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_replicates() -> usize {
    crate::bootstrap::DEFAULT_REPLICATES
}

fn default_tests() -> Vec<TestKind> {
    TestKind::ALL.to_vec()
}

/// JSON description of a simulation grid.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub distribution: OneOrMany<Distribution>,
    pub rho: OneOrMany<f64>,
    pub design: OneOrMany<CovDesign>,
    pub mechanism: OneOrMany<Mechanism>,
    pub delta: OneOrMany<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_sim: usize,
    #[serde(rename = "B", default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    #[serde(default)]
    pub bootstrap_missingness: BootstrapMissingnessSetting,
}

fn config_error(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(json_pointer(e.path()), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        fn axis<T: Clone>(name: &str, v: &OneOrMany<T>, check: impl Fn(&T) -> Option<String>) -> Result<()> {
            let values = v.values();
            if values.is_empty() {
                return Err(config_error(format!("/{name}"), "sweep axis must not be empty"));
            }
            for (i, x) in values.iter().enumerate() {
                if let Some(msg) = check(x) {
                    let ptr = if v.is_many() { format!("/{name}/{i}") } else { format!("/{name}") };
                    return Err(config_error(ptr, msg));
                }
            }
            Ok(())
        }
        axis("distribution", &self.distribution, |_| None)?;
        axis("design", &self.design, |_| None)?;
        axis("rho", &self.rho, |r| (!(r.abs() < 1.0)).then(|| format!("|rho| must be < 1, got {r}")))?;
        axis("delta", &self.delta, |d| (!d.is_finite()).then(|| "delta must be finite".to_string()))?;
        axis("mechanism", &self.mechanism, |m| match *m {
            Mechanism::Mcar { n_c, .. } if n_c < 2 => Some(format!("n_c must be ≥ 2, got {n_c}")),
            Mechanism::Mcar { n_u: 0, .. } => Some("n_u must be ≥ 1".into()),
            Mechanism::Mar { n } if n < 6 => Some(format!("n must be ≥ 6 for MAR, got {n}")),
            _ => None,
        })?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_error("/alpha", format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_sim == 0 {
            return Err(config_error("/n_sim", "n_sim must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(config_error("/B", "B must be at least 1"));
        }
        if self.tests.is_empty() {
            return Err(config_error("/tests", "at least one test is required"));
        }
        Ok(())
    }

    /// Distinct requested kinds in canonical order.
    pub fn kinds(&self) -> Vec<TestKind> {
        let mut kinds = self.tests.clone();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Cartesian product of the sweep axes: distribution, design,
    /// mechanism, rho, delta (last varies fastest).
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for distribution in self.distribution.values() {
            for design in self.design.values() {
                for mechanism in self.mechanism.values() {
                    for rho in self.rho.values() {
                        for delta in self.delta.values() {
                            out.push(Scenario {
                                distribution,
                                rho,
                                design,
                                mechanism,
                                delta,
                                alpha: self.alpha,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.replicates,
            seed: self.seed,
            missingness: match self.bootstrap_missingness {
                BootstrapMissingnessSetting::Mcar => BootstrapMissingness::Mcar,
                BootstrapMissingnessSetting::Mar => BootstrapMissingness::MarRule,
            },
        }
    }

    /// Runs every cell. Each cell uses the configured seed, so cells share
    /// random numbers across sweep values.
    pub fn run(&self) -> Result<Vec<RejectionRates>> {
        let cfg = self.bootstrap_config();
        let kinds = self.kinds();
        self.scenarios()
            .iter()
            .map(|sc| run_scenario(sc, self.n_sim, &cfg, &kinds))
            .collect()
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "distribution",
    "design",
    "mechanism",
    "n_c",
    "n_u",
    "n",
    "rho",
    "delta",
    "alpha",
    "n_sim",
    "B",
    "seed",
    "test",
    "rejections",
    "n_effective",
    "rejection_rate",
];

/// Long-format CSV: one row per cell and test kind.
pub fn write_rates_csv<W: Write>(results: &[RejectionRates], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    };
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in results {
        let sc = &r.scenario;
        let (n_c, n_u) = match sc.mechanism {
            Mechanism::Mcar { n_c, n_u } => (n_c.to_string(), n_u.to_string()),
            Mechanism::Mar { .. } => (String::new(), String::new()),
        };
        for t in &r.tallies {
            let rate = if t.n_effective == 0 { String::new() } else { t.rate().to_string() };
            w.write_record([
                sc.distribution.name().to_string(),
                sc.design.name().to_string(),
                sc.mechanism.name().to_string(),
                n_c.clone(),
                n_u.clone(),
                sc.mechanism.n().to_string(),
                sc.rho.to_string(),
                sc.delta.to_string(),
                sc.alpha.to_string(),
                r.n_sim.to_string(),
                r.replicates.to_string(),
                r.seed.to_string(),
                t.kind.name().to_string(),
                t.rejections.to_string(),
                t.n_effective.to_string(),
                rate,
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    fn scenario(mechanism: Mechanism) -> Scenario {
        Scenario {
            distribution: Distribution::Normal,
            rho: 0.5,
            design: CovDesign::Homoscedastic,
            mechanism,
            delta: 0.0,
            alpha: 0.05,
        }
    }

    #[test]
    fn residuals_are_standardized() {
        for dist in [
            Distribution::Normal,
            Distribution::Laplace,
            Distribution::Exponential,
            Distribution::ChiSq30,
        ] {
            let sampler = ResidualSampler::new(dist);
            let mut s = rng::stream(3, dist as u64);
            let xs: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut s)).collect();
            let (m, v) = mean_var(&xs);
            assert!(m.abs() < 0.005, "{dist:?} mean {m}");
            assert!((v - 1.0).abs() < 0.01, "{dist:?} var {v}");
        }
    }

    #[test]
    fn designs_match_stated_moments() {
        let s2 = CovDesign::Heteroscedastic.covariance(0.3);
        assert_eq!((s2[(0, 0)], s2[(1, 1)]), (1.0, 2.0));
        let corr = s2[(0, 1)] / (s2[(0, 0)] * s2[(1, 1)]).sqrt();
        assert!((corr - 0.3).abs() < 1e-15);
        let s1 = CovDesign::Homoscedastic.covariance(-0.9);
        assert_eq!(s1.as_array(), &[[1.0, -0.9], [-0.9, 1.0]]);
    }

    #[test]
    fn generated_pairs_have_target_correlation() {
        let sc = scenario(Mechanism::Mcar { n_c: 10, n_u: 10 });
        let pairs = gen_complete(&sc, 100_000, &mut rng::stream(4, 0)).unwrap();
        let (ma, va) = mean_var(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let (mb, vb) = mean_var(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / (pairs.len() - 1) as f64;
        assert!((cov / (va * vb).sqrt() - 0.5).abs() < 0.01);

        let shifted = Scenario { delta: 2.0, ..sc };
        let pairs = gen_complete(&shifted, 50_000, &mut rng::stream(4, 1)).unwrap();
        let (ma, _) = mean_var(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        assert!((ma - 2.0).abs() < 0.02);
    }

    #[test]
    fn mcar_counts_and_uniformity() {
        let pairs: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, -(i as f64))).collect();
        let s = impose_mcar(&pairs, 30, &mut rng::stream(1, 0)).unwrap();
        let c = s.counts();
        assert_eq!((c.n_c, c.n_u), (10, 30));
        let s = impose_mcar(&pairs[..12], 10, &mut rng::stream(1, 1)).unwrap();
        assert_eq!(s.counts().n_c, 2);
        assert!(matches!(impose_mcar(&pairs[..12], 11, &mut rng::stream(1, 1)), Err(Error::InvalidCounts { .. })));
        assert!(matches!(impose_mcar(&pairs[..12], 0, &mut rng::stream(1, 1)), Err(Error::InvalidCounts { .. })));

        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64)).collect();
        let mut hits = [0usize; 10];
        let mut stream = rng::stream(2, 0);
        let draws = 100_000;
        for _ in 0..draws {
            let s = impose_mcar(&pairs, 3, &mut stream).unwrap();
            for &x in s.incomplete_first() {
                hits[x as usize] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / draws as f64 - 0.3).abs() < 0.01);
        }
    }

    #[test]
    fn mar_single_group_rate() {
        // Two far outliers inflate σ̂₁ so that the other units sit within ±2σ̂₁.
        let mut pairs: Vec<(f64, f64)> = (0..200).map(|i| ((i % 7) as f64 * 0.01, 0.0)).collect();
        pairs.push((10.0, 0.0));
        pairs.push((-10.0, 0.0));
        let sd = {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            mean_var(&xs).1.sqrt()
        };
        assert!(10.0 > 2.0 * sd);
        let mut stream = rng::stream(6, 0);
        let (mut missing, mut total) = (0usize, 0usize);
        for _ in 0..2_000 {
            let s = impose_mar(&pairs, &mut stream).unwrap();
            missing += s.incomplete_first().iter().filter(|x| x.abs() < 1.0).count();
            total += 200;
        }
        assert!((missing as f64 / total as f64 - 0.30).abs() < 0.01);
    }

    #[test]
    fn mar_mixture_rate_for_normal_data() {
        // 0.30·P(|Z| ≤ 2) + 0.15·P(|Z| > 2) ≈ 0.2932 with σ̂₁ ≈ 1.
        let sc = scenario(Mechanism::Mar { n: 1000 });
        let mut stream = rng::stream(8, 0);
        let (mut missing, mut total) = (0usize, 0usize);
        while total < 100_000 {
            let pairs = gen_complete(&sc, 1000, &mut stream).unwrap();
            let s = impose_mar(&pairs, &mut stream).unwrap();
            missing += s.counts().n_u;
            total += 1000;
        }
        assert!((missing as f64 / total as f64 - 0.2932).abs() < 0.01);
    }

    #[test]
    fn mar_small_samples_respect_redraw_contract() {
        let sc = scenario(Mechanism::Mar { n: 10 });
        let mut stream = rng::stream(9, 0);
        for _ in 0..2_000 {
            let s = gen_sample(&sc, &mut stream).unwrap();
            let c = s.counts();
            assert!(c.n_c >= MAR_MIN_COMPLETE && c.n_u >= 1);
        }
        assert!(impose_mar(&[(0.0, 0.0); 5], &mut stream).is_err());
    }

    #[test]
    fn gross_alternative_is_always_rejected() {
        let sc = Scenario {
            delta: 5.0,
            ..scenario(Mechanism::Mcar { n_c: 10, n_u: 10 })
        };
        let r = run_scenario(&sc, 100, &BootstrapConfig::new(200, 1), &TestKind::ALL).unwrap();
        for t in &r.tallies {
            assert!(t.rate() > 0.99, "{:?}", t);
            assert_eq!(t.n_effective, 100);
        }
    }

    #[test]
    fn scenario_is_deterministic_across_pools() {
        let sc = scenario(Mechanism::Mar { n: 10 });
        let cfg = BootstrapConfig::new(50, 77);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_scenario(&sc, 64, &cfg, &TestKind::ALL).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn config_parsing_and_sweeps() {
        let cfg = SimulationConfig::from_json(
            r#"{"distribution": "normal", "rho": [-0.5, 0.5], "design": "homoscedastic",
                "mechanism": {"type": "mcar", "n_c": 10, "n_u": 10}, "delta": [0, 1],
                "alpha": 0.05, "n_sim": 20, "B": 50, "seed": 3, "tests": ["wts", "nct"]}"#,
        )
        .unwrap();
        let cells = cfg.scenarios();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].rho, cells[1].delta), (-0.5, 1.0));
        assert_eq!(cfg.kinds(), vec![TestKind::Wts, TestKind::Nct]);
    }

    #[test]
    fn config_errors_carry_json_pointers() {
        let base = r#"{"distribution": "normal", "rho": [0.1, 1.5], "design": "sigma1",
            "mechanism": {"type": "mcar", "n_c": 10, "n_u": 10}, "delta": 0, "n_sim": 5, "seed": 1}"#;
        match SimulationConfig::from_json(base).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/rho/1"),
            e => panic!("{e}"),
        }
        let bad_type = base.replace(r#""n_sim": 5"#, r#""n_sim": "many""#);
        match SimulationConfig::from_json(&bad_type).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/n_sim"),
            e => panic!("{e}"),
        }
        let bad_mech = base
            .replace("[0.1, 1.5]", "0.1")
            .replace(r#""n_c": 10"#, r#""n_c": 1"#);
        match SimulationConfig::from_json(&bad_mech).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/mechanism"),
            e => panic!("{e}"),
        }
        let unknown = base.replace("[0.1, 1.5]", "0.1").replace(r#""seed": 1"#, r#""seed": 1, "sede": 2"#);
        assert!(matches!(SimulationConfig::from_json(&unknown), Err(Error::Config { .. })));
    }
}
