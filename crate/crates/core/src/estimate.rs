//! Moment estimators for incomplete matched pairs and the structured
//! covariance estimate of the scaled mean vector
//! `√n·(X̄₁⁽ᶜ⁾ − μ₁, X̄₂⁽ᶜ⁾ − μ₂, X̄₁⁽ⁱ⁾ − μ₁)`.

use crate::error::{Error, Result};
use crate::linalg::{SymMat2, SymMat3, Vec2, Vector};
use crate::sample::IncompletePairedSample;

/// Correlation bound applied before Γ̂ is factorized for sampling.
pub const RHO_CLAMP: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    /// Mean of the first components of the complete pairs.
    pub mean1_c: f64,
    /// Mean of the second components of the complete pairs.
    pub mean2_c: f64,
    /// Mean of the first components of the incomplete subjects.
    pub mean1_i: f64,
    /// Unbiased variance of all `n` first components.
    pub var1_pooled: f64,
    /// Unbiased variance of the first components of the complete pairs only.
    pub var1_complete: f64,
    /// Unbiased variance of the `n_c` second components.
    pub var2: f64,
    /// Pearson correlation of the complete pairs.
    pub rho_hat: f64,
    pub kappa1_hat: f64,
    pub kappa2_hat: f64,
    pub n_c: usize,
    pub n_u: usize,
}

impl MomentEstimates {
    pub fn n(&self) -> usize {
        self.n_c + self.n_u
    }
}

/// Σ̂ₙ: the 3×3 covariance estimate whose (1,3) and (2,3) entries are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaHat3(SymMat3);

impl SigmaHat3 {
    /// Wraps a matrix after forcing the cross-block entries to exactly zero.
    pub fn from_blocks(complete_block: SymMat2, incomplete_var: f64) -> Self {
        let mut m = SymMat3::zeros();
        m.set(0, 0, complete_block[(0, 0)]);
        m.set(1, 0, complete_block[(1, 0)]);
        m.set(1, 1, complete_block[(1, 1)]);
        m.set(2, 2, incomplete_var);
        Self(m)
    }

    pub fn matrix(&self) -> &SymMat3 {
        &self.0
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// Moments from raw slices, used by the bootstrap hot loop to avoid
/// rebuilding a validated sample per replicate.
pub(crate) fn moments_from_parts(complete: &[(f64, f64)], incomplete: &[f64]) -> Result<MomentEstimates> {
    let n_c = complete.len();
    let n_u = incomplete.len();
    let n = n_c + n_u;

    let mean1_c = mean(complete.iter().map(|p| p.0));
    let mean2_c = mean(complete.iter().map(|p| p.1));
    let mean1_i = mean(incomplete.iter().copied());
    let mean1_all = (n_c as f64 * mean1_c + n_u as f64 * mean1_i) / n as f64;

    let (mut ss1c, mut ss2, mut sp) = (0.0, 0.0, 0.0);
    for &(a, b) in complete {
        let (da, db) = (a - mean1_c, b - mean2_c);
        ss1c += da * da;
        ss2 += db * db;
        sp += da * db;
    }
    let ss1_all: f64 = complete
        .iter()
        .map(|p| p.0)
        .chain(incomplete.iter().copied())
        .map(|x| (x - mean1_all) * (x - mean1_all))
        .sum();

    let var1_pooled = ss1_all / (n - 1) as f64;
    let var1_complete = ss1c / (n_c - 1) as f64;
    let var2 = ss2 / (n_c - 1) as f64;
    if !(var1_pooled > 0.0) {
        return Err(Error::ZeroVariance("pooled first components"));
    }
    if !(var2 > 0.0) {
        return Err(Error::ZeroVariance("second components"));
    }
    if !(var1_complete > 0.0) {
        return Err(Error::ZeroVariance("first components of complete pairs"));
    }
    let rho_hat = (sp / (ss1c * ss2).sqrt()).clamp(-1.0, 1.0);

    Ok(MomentEstimates {
        mean1_c,
        mean2_c,
        mean1_i,
        var1_pooled,
        var1_complete,
        var2,
        rho_hat,
        kappa1_hat: n_c as f64 / n as f64,
        kappa2_hat: n_u as f64 / n as f64,
        n_c,
        n_u,
    })
}

pub fn moments(s: &IncompletePairedSample) -> Result<MomentEstimates> {
    moments_from_parts(s.complete(), s.incomplete_first())
}

pub fn sigma_hat(m: &MomentEstimates) -> SigmaHat3 {
    let cross = m.rho_hat * m.var1_pooled.sqrt() * m.var2.sqrt();
    let block = SymMat2::from_lower([
        [m.var1_pooled / m.kappa1_hat, 0.0],
        [cross / m.kappa1_hat, m.var2 / m.kappa1_hat],
    ]);
    SigmaHat3::from_blocks(block, m.var1_pooled / m.kappa2_hat)
}

/// Γ̂, the estimated covariance of one bivariate observation, with ρ̂
/// clamped to `±RHO_CLAMP` so that it always factorizes.
pub fn gamma_hat(m: &MomentEstimates) -> SymMat2 {
    let rho = m.rho_hat.clamp(-RHO_CLAMP, RHO_CLAMP);
    SymMat2::from_lower([
        [m.var1_pooled, 0.0],
        [rho * m.var1_pooled.sqrt() * m.var2.sqrt(), m.var2],
    ])
}

/// `√n·(X̄₁⁽ᶜ⁾ − X̄₂⁽ᶜ⁾, X̄₁⁽ⁱ⁾ − X̄₂⁽ᶜ⁾)`, the contrast evaluated under the null.
pub fn contrast(m: &MomentEstimates) -> Vec2 {
    let root_n = (m.n() as f64).sqrt();
    Vector([
        root_n * (m.mean1_c - m.mean2_c),
        root_n * (m.mean1_i - m.mean2_c),
    ])
}
