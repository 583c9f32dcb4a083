#![allow(dead_code)]

use misspair::bootstrap::{bootstrap_p_all, BootstrapConfig};
use misspair::rng::{self, Domain};
use misspair::sample::RawRecord;
use misspair::simulate::{gen_sample, CovDesign, Distribution, Mechanism, Scenario};
use misspair::{IncompletePairedSample, TestKind};
use rayon::prelude::*;

/// `[(1,2), (2,3), (3,7), (4,–), (6,–)]`
pub fn d0() -> IncompletePairedSample {
    IncompletePairedSample::from_records(&[
        RawRecord::pair(1.0, 2.0),
        RawRecord::pair(2.0, 3.0),
        RawRecord::pair(3.0, 7.0),
        RawRecord::first_only(4.0),
        RawRecord::first_only(6.0),
    ])
    .unwrap()
}

pub const D0_CSV: &str = "x1,x2\n1,2\n2,3\n3,7\n4,\n6,\n";

pub fn normal_mcar(rho: f64, n_c: usize, n_u: usize, delta: f64) -> Scenario {
    Scenario {
        distribution: Distribution::Normal,
        rho,
        design: CovDesign::Homoscedastic,
        mechanism: Mechanism::Mcar { n_c, n_u },
        delta,
        alpha: 0.05,
    }
}

/// Sup distance between the empirical CDF of `xs` and `cdf`.
pub fn sup_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // Step over ties so atoms are compared once.
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Asymptotic Kolmogorov p-value for a one-sample sup distance.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Bootstrap p-values of the quadratic forms over `n_sim` null data sets.
pub fn null_p_values(sc: &Scenario, n_sim: usize, replicates: usize, seed: u64) -> Vec<[f64; 3]> {
    (0..n_sim as u64)
        .into_par_iter()
        .map(|run| {
            let mut stream = rng::stream(rng::derive_seed(seed, Domain::Data, 0), run);
            let s = gen_sample(sc, &mut stream).unwrap();
            let cfg = BootstrapConfig::new(replicates, rng::derive_seed(seed, Domain::Bootstrap, run));
            let r = bootstrap_p_all(&s, &TestKind::QUADRATIC, &cfg).unwrap();
            [r[0].p_value, r[1].p_value, r[2].p_value]
        })
        .collect()
}

pub fn chisq2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x / 2.0).exp()
    }
}

/// One line of an acceptance report.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
    /// Failure is a recorded, analysed deviation rather than a regression.
    pub documented: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, detail: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            pass,
            documented: false,
        }
    }

    pub fn documented(mut self) -> Self {
        self.documented = true;
        self
    }

    /// `observed` within `tol` of `target`.
    pub fn near(name: &str, observed: f64, target: f64, tol: f64) -> Self {
        Self::new(
            name,
            format!("{observed:.6} (target {target} ± {tol})"),
            (observed - target).abs() <= tol,
        )
    }

    pub fn at_least(name: &str, observed: f64, floor: f64) -> Self {
        Self::new(name, format!("{observed:.4} (target ≥ {floor})"), observed >= floor)
    }

    pub fn within(name: &str, observed: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            format!("{observed:.4} (target [{lo}, {hi}])"),
            (lo..=hi).contains(&observed),
        )
    }

    pub fn below(name: &str, observed: f64, ceiling: f64) -> Self {
        Self::new(name, format!("{observed:.3e} (target < {ceiling:e})"), observed < ceiling)
    }
}

/// Prints one verdict line per criterion plus the individual checks, then
/// panics if any check failed without a documented analysis.
pub fn verdict(id: &str, title: &str, checks: &[Check]) {
    let pass = checks.iter().all(|c| c.pass);
    let undocumented: Vec<&Check> = checks.iter().filter(|c| !c.pass && !c.documented).collect();
    let tag = if pass {
        "PASS"
    } else if undocumented.is_empty() {
        "FAIL (documented deviation)"
    } else {
        "FAIL"
    };
    println!("[{tag}] {id} {title}");
    for c in checks {
        let mark = if c.pass { "ok " } else { "BAD" };
        println!("    {mark} {}: {}", c.name, c.detail);
    }
    assert!(undocumented.is_empty(), "{id} failed: {undocumented:?}");
}
