//! Observed test statistics.
//!
//! The three quadratic forms (Wald-type, ANOVA-type and modified
//! ANOVA-type) studentize the contrast `A·Zₙ` with the projected covariance
//! `A·Σ̂ₙ·Aᵀ`. Their p-values come from the parametric bootstrap in
//! [`crate::bootstrap`]. Little's test and the nonparametric combination
//! test carry their own reference distributions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::estimate::{contrast, moments, sigma_hat, SigmaHat3};
use crate::linalg::{eig_sym, pinv, quad_form, SymMat2, Vec2, Vector};
use crate::rng;
use crate::sample::IncompletePairedSample;

/// Minimum complete pairs for Little's test (its variance divides by `n_c − 3`).
pub const LITTLE_MIN_COMPLETE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Wts,
    Ats,
    Mats,
    #[serde(rename = "lt")]
    Little,
    Nct,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Wts,
        TestKind::Ats,
        TestKind::Mats,
        TestKind::Little,
        TestKind::Nct,
    ];

    pub const QUADRATIC: [TestKind; 3] = [TestKind::Wts, TestKind::Ats, TestKind::Mats];

    pub fn is_bootstrap(self) -> bool {
        matches!(self, TestKind::Wts | TestKind::Ats | TestKind::Mats)
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Wts => "wts",
            TestKind::Ats => "ats",
            TestKind::Mats => "mats",
            TestKind::Little => "lt",
            TestKind::Nct => "nct",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wts" => Ok(TestKind::Wts),
            "ats" => Ok(TestKind::Ats),
            "mats" => Ok(TestKind::Mats),
            "lt" | "little" => Ok(TestKind::Little),
            "nct" | "nc" => Ok(TestKind::Nct),
            other => Err(Error::InvalidArgument(format!("unknown test kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Detail {
    Bootstrap {
        replicates: usize,
        exceed_count: usize,
        degenerate: usize,
    },
    Little {
        numerator: f64,
        /// Signed variance estimate before taking the magnitude.
        variance: f64,
        sigma_lt: f64,
        df: usize,
    },
    Nct {
        t_s: f64,
        t_m: f64,
        variance: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub detail: Detail,
}

impl TestResult {
    /// Rejects when `p ≤ α`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// The fixed contrast `A = [[1, −1, 0], [0, −1, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContrastMatrix;

impl ContrastMatrix {
    pub const ROWS: [[f64; 3]; 2] = [[1.0, -1.0, 0.0], [0.0, -1.0, 1.0]];

    pub fn apply(&self, z: &Vector<3>) -> Vec2 {
        Vector(Self::ROWS.map(|row| row.iter().zip(z.0).map(|(a, x)| a * x).sum()))
    }

    /// `A·S·Aᵀ`.
    pub fn project(&self, sig: &SigmaHat3) -> SymMat2 {
        let s = sig.matrix();
        let mut out = SymMat2::zeros();
        for (i, ri) in Self::ROWS.iter().enumerate() {
            for (j, rj) in Self::ROWS.iter().enumerate().take(i + 1) {
                let mut acc = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += ri[k] * s[(k, l)] * rj[l];
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

pub fn wts(az: &Vec2, sig: &SigmaHat3) -> f64 {
    let m = ContrastMatrix.project(sig);
    quad_form(az, &pinv(&m)).max(0.0)
}

pub fn ats(az: &Vec2, sig: &SigmaHat3) -> Result<f64> {
    let trace = ContrastMatrix.project(sig).trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateTrace(trace));
    }
    Ok(az.norm_sq() / trace)
}

pub fn mats(az: &Vec2, sig: &SigmaHat3) -> f64 {
    let d = pinv(&ContrastMatrix.project(sig)).diag();
    (az[0] * az[0] * d[0] + az[1] * az[1] * d[1]).max(0.0)
}

/// All three quadratic forms sharing one projection and one pseudoinverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForms {
    pub wts: f64,
    pub ats: f64,
    pub mats: f64,
}

impl QuadForms {
    pub fn get(&self, kind: TestKind) -> Option<f64> {
        match kind {
            TestKind::Wts => Some(self.wts),
            TestKind::Ats => Some(self.ats),
            TestKind::Mats => Some(self.mats),
            _ => None,
        }
    }
}

pub fn quad_forms(az: &Vec2, sig: &SigmaHat3) -> Result<QuadForms> {
    let m = ContrastMatrix.project(sig);
    let trace = m.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateTrace(trace));
    }
    let p = pinv(&m);
    let d = p.diag();
    Ok(QuadForms {
        wts: quad_form(az, &p).max(0.0),
        ats: az.norm_sq() / trace,
        mats: (az[0] * az[0] * d[0] + az[1] * az[1] * d[1]).max(0.0),
    })
}

/// Quadratic forms of an observed sample.
pub fn observed_quad_forms(s: &IncompletePairedSample) -> Result<QuadForms> {
    let m = moments(s)?;
    quad_forms(&contrast(&m), &sigma_hat(&m))
}

fn two_sided_normal(z: f64) -> f64 {
    let normal = Normal::standard();
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Little's regression-adjusted test, referred to a t distribution with
/// `n_c − 1` degrees of freedom.
pub fn little(s: &IncompletePairedSample) -> Result<TestResult> {
    let m = moments(s)?;
    if m.n_c < LITTLE_MIN_COMPLETE {
        return Err(Error::TooFewComplete {
            n_c: m.n_c,
            required: LITTLE_MIN_COMPLETE,
        });
    }
    let n_c = m.n_c as f64;
    let n = m.n() as f64;
    let mean1_all = (n_c * m.mean1_c + m.n_u as f64 * m.mean1_i) / n;

    // Maximum-likelihood scale: divisors n_c and n.
    let var1c = m.var1_complete * (n_c - 1.0) / n_c;
    let var2 = m.var2 * (n_c - 1.0) / n_c;
    let var1 = m.var1_pooled * (n - 1.0) / n;
    let beta = m.rho_hat * (var2 / var1c).sqrt();
    let resid_var = var2 * (1.0 - m.rho_hat * m.rho_hat);
    let var_x = resid_var + beta * beta * var1 * var1;

    // A negative estimate is replaced by its magnitude.
    let variance = var_x / n + (1.0 / n_c - 1.0 / n) * (n_c - 2.0) / (n_c - 3.0) * resid_var
        - 2.0 / n * beta * var1
        + var1 / n;
    if variance == 0.0 || !variance.is_finite() {
        return Err(Error::ZeroVariance("Little's test variance"));
    }
    let sigma_lt = variance.abs().sqrt();
    let numerator = mean1_all - m.mean2_c - beta * (mean1_all - m.mean1_c);
    let statistic = numerator / sigma_lt;

    let df = m.n_c - 1;
    let t = StudentsT::new(0.0, 1.0, df as f64).expect("df ≥ 3");
    let p_value = (2.0 * t.sf(statistic.abs())).min(1.0);
    Ok(TestResult {
        kind: TestKind::Little,
        statistic,
        p_value,
        detail: Detail::Little {
            numerator,
            variance,
            sigma_lt,
            df,
        },
    })
}

fn phi(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Sign-test plus Mann-Whitney combination, normal-approximated around 1.
pub fn nct(s: &IncompletePairedSample) -> Result<TestResult> {
    let complete = s.complete();
    let unpaired = s.incomplete_first();
    let n_c = complete.len() as f64;
    let n_u = unpaired.len() as f64;

    let t_s = complete.iter().map(|&(a, b)| phi(a, b)).sum::<f64>() / n_c;
    let t_m = unpaired
        .iter()
        .map(|&u| complete.iter().map(|&(_, b)| phi(u, b)).sum::<f64>())
        .sum::<f64>()
        / (n_c * n_u);
    // Both indicators share the complete-pair index.
    let joint = complete
        .iter()
        .filter(|&&(a, b)| a > b)
        .map(|&(_, b)| unpaired.iter().filter(|&&u| u > b).count())
        .sum::<usize>() as f64;
    let cov = joint / (n_c * n_c * n_u) - t_s * t_m / n_c;
    let variance = 1.0 / (4.0 * n_c) + (n_c + n_u + 1.0) / (12.0 * n_c * n_u) + 2.0 * cov;
    if !(variance > 0.0) {
        return Err(Error::ZeroVariance("combination test variance"));
    }
    let statistic = t_s + t_m;
    let z = (statistic - 1.0) / variance.sqrt();
    Ok(TestResult {
        kind: TestKind::Nct,
        statistic,
        p_value: two_sided_normal(z),
        detail: Detail::Nct { t_s, t_m, variance },
    })
}

/// Weights of the weighted χ²₁ limit law for ATS (eigenvalues of `A·Σ·Aᵀ`
/// over its trace) or MATS (eigenvalues of `D·A·Σ·Aᵀ`). Other kinds are
/// rejected.
pub fn limit_weights(sig: &SigmaHat3, kind: TestKind) -> Result<Vec2> {
    let m = ContrastMatrix.project(sig);
    match kind {
        TestKind::Ats => {
            let trace = m.trace();
            if !(trace > 0.0) {
                return Err(Error::DegenerateTrace(trace));
            }
            Ok(Vector(eig_sym(&m).values.map(|l| l / trace)))
        }
        TestKind::Mats => {
            // D·M is similar to D^½·M·D^½, which is symmetric.
            let root_d = pinv(&m).diag().map(|d| d.max(0.0).sqrt());
            let mut sym = SymMat2::zeros();
            for i in 0..2 {
                for j in 0..=i {
                    sym.set(i, j, root_d[i] * m[(i, j)] * root_d[j]);
                }
            }
            Ok(Vector(eig_sym(&sym).values))
        }
        other => Err(Error::InvalidArgument(format!(
            "no weighted chi-square limit for {other}"
        ))),
    }
}

/// Monte Carlo estimate of `P(Σ wᵢ·χ²₁ > x)`.
pub fn weighted_chisq_survival(weights: &Vec2, x: f64, draws: usize, seed: u64) -> f64 {
    let mut stream = rng::stream(rng::derive_seed(seed, rng::Domain::Oracle, 0), 0);
    let exceed = (0..draws)
        .filter(|_| {
            let total: f64 = weights
                .0
                .iter()
                .map(|w| {
                    let z: f64 = stream.sample(StandardNormal);
                    w * z * z
                })
                .sum();
            total > x
        })
        .count();
    exceed as f64 / draws as f64
}

/// Holm step-down adjustment; output is in input order.
pub fn holm_adjust(pvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = pvalues
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::InvalidPValue { index, value });
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0_f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * pvalues[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}
