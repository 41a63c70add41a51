//! BlockJS and NeighCoeff shrinkage on a wavelet coefficient tree.
//!
//! Both rules act on the detail levels only; the gross structure terms at the
//! primary resolution level pass through unchanged.

use crate::error::{Error, Result};
use crate::wavelet::{block_partition, WaveletCoeffs};
use serde::{Deserialize, Serialize};

/// lambda* solves lambda - ln(lambda) = 3.
pub const LAMBDA_STAR: f64 = 4.50524;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShrinkRule {
    BlockJs,
    NeighCoeff,
}

/// Configuration of the shrinkage step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub rule: ShrinkRule,
    pub lambda_star: f64,
    /// Variance of each empirical coefficient; 1/n in the pipeline.
    pub noise_variance: f64,
    /// Original sample size, used by the NeighCoeff 2 ln(n) threshold.
    pub n: usize,
    /// Block length for BlockJS; None means floor(ln T), clipped per level.
    pub block_length: Option<usize>,
}

impl ThresholdConfig {
    pub fn new(rule: ShrinkRule, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadConfig("sample size must be positive".into()));
        }
        Ok(ThresholdConfig {
            rule,
            lambda_star: LAMBDA_STAR,
            noise_variance: 1.0 / n as f64,
            n,
            block_length: None,
        })
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) {
            return Err(Error::BadConfig("noise variance must be positive".into()));
        }
        self.noise_variance = noise_variance;
        Ok(self)
    }

    pub fn with_block_length(mut self, block_length: usize) -> Result<Self> {
        if block_length == 0 {
            return Err(Error::BadConfig("block length must be positive".into()));
        }
        self.block_length = Some(block_length);
        Ok(self)
    }
}

/// Default block length: floor(ln T) with a floor of 1.
pub fn default_block_length(t_count: usize) -> usize {
    ((t_count as f64).ln().floor() as usize).max(1)
}

/// Robust noise-variance estimate from the finest-level detail coefficients:
/// (MAD / 0.6745)^2. An extension for real data where n is unknown; the
/// pipeline default stays 1/n.
pub fn mad_noise_variance(finest_details: &[f64]) -> Result<f64> {
    if finest_details.is_empty() {
        return Err(Error::BadShape("no coefficients for MAD estimate".into()));
    }
    let mut abs: Vec<f64> = finest_details.iter().map(|x| x.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = abs.len() / 2;
    let mad = if abs.len() % 2 == 1 {
        abs[mid]
    } else {
        0.5 * (abs[mid - 1] + abs[mid])
    };
    let sigma = mad / 0.6745;
    Ok(sigma * sigma)
}

/// Applies the configured rule, returning a new coefficient tree.
pub fn apply(coeffs: &WaveletCoeffs, cfg: &ThresholdConfig) -> WaveletCoeffs {
    match cfg.rule {
        ShrinkRule::BlockJs => blockjs(coeffs, cfg),
        ShrinkRule::NeighCoeff => neighcoeff(coeffs, cfg),
    }
}

/// Blockwise James-Stein: each home coefficient of a block with energy S^2
/// becomes (1 - lambda* L sigma^2 / S^2)_+ y. The shrink factor is 0 when
/// S^2 = 0 (continuity from S^2 -> 0).
pub fn blockjs(coeffs: &WaveletCoeffs, cfg: &ThresholdConfig) -> WaveletCoeffs {
    let t_count = 1usize << coeffs.j_top;
    let base_len = cfg.block_length.unwrap_or_else(|| default_block_length(t_count));
    let mut out = coeffs.clone();
    for level in &mut out.details {
        let len = level.len();
        let l = base_len.min(len);
        let threshold = cfg.lambda_star * l as f64 * cfg.noise_variance;
        for block in block_partition(len, l) {
            let s2: f64 = block.indices.iter().map(|&i| level[i] * level[i]).sum();
            let factor = if s2 > threshold { 1.0 - threshold / s2 } else { 0.0 };
            for &i in block.home() {
                level[i] *= factor;
            }
        }
    }
    out
}

/// Sliding 3-neighborhood shrinkage: each coefficient is scaled by
/// (1 - 2 ln(n) sigma^2 / S^2)_+ with S^2 the sum of squares of the
/// coefficient and its two periodic neighbors.
pub fn neighcoeff(coeffs: &WaveletCoeffs, cfg: &ThresholdConfig) -> WaveletCoeffs {
    let threshold = 2.0 * (cfg.n as f64).ln() * cfg.noise_variance;
    let mut out = coeffs.clone();
    for level in &mut out.details {
        let len = level.len();
        let original = level.clone();
        for k in 0..len {
            let left = original[(k + len - 1) % len];
            let right = original[(k + 1) % len];
            let s2 = left * left + original[k] * original[k] + right * right;
            let factor = if s2 > threshold { 1.0 - threshold / s2 } else { 0.0 };
            level[k] = original[k] * factor;
        }
    }
    out
}
