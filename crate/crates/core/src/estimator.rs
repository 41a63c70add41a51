//! The four-step pipeline: bin, transform, denoise in the wavelet domain,
//! invert.

use crate::binning::{bin_sums, select_bin_count, transform_bins, BinRegime, BinnedSeries};
use crate::error::{Error, Result};
use crate::families::{FamilyModel, VstVariant};
use crate::thresholding::{self, ShrinkRule, ThresholdConfig};
use crate::wavelet::{dwt, idwt, WaveletCoeffs, WaveletFilter};
use serde::{Deserialize, Serialize};

pub const DEFAULT_J0: usize = 4;

/// Full configuration of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub family: FamilyModel,
    pub variant: VstVariant,
    pub regime: BinRegime,
    pub rule: ShrinkRule,
    pub filter: WaveletFilter,
    pub j0: usize,
    /// Explicit bin-count override; must be a power of two >= 2^{j0+1}.
    pub t_override: Option<usize>,
    /// Counts-per-bin practical rule for T selection.
    pub target_per_bin: Option<f64>,
    /// Override for the coefficient noise variance; defaults to 1/n.
    pub noise_variance: Option<f64>,
    /// Override for the BlockJS block length; defaults to floor(ln T).
    pub block_length: Option<usize>,
}

impl FitConfig {
    pub fn new(family: FamilyModel, variant: VstVariant, rule: ShrinkRule) -> Self {
        FitConfig {
            family,
            variant,
            regime: BinRegime::Qvf,
            rule,
            filter: WaveletFilter::symmlet8(),
            j0: DEFAULT_J0,
            t_override: None,
            target_per_bin: None,
            noise_variance: None,
            block_length: None,
        }
    }

    /// The general-NEF route forces the unshifted transform (a = b = 0).
    pub fn effective_variant(&self) -> VstVariant {
        match self.regime {
            BinRegime::GeneralNef => VstVariant::GeneralNef,
            BinRegime::Qvf => self.variant,
        }
    }
}

/// The estimate on the T-point grid together with every intermediate stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// t_j = j/T, j = 1..T.
    pub grid: Vec<f64>,
    /// Denoised transform-scale values.
    pub g_hat: Vec<f64>,
    /// Inverted (and clamped) mean estimates.
    pub f_hat: Vec<f64>,
    pub binned: BinnedSeries,
    pub coeffs_raw: WaveletCoeffs,
    pub coeffs_shrunk: WaveletCoeffs,
    /// Number of grid points where g_hat fell outside the range of G.
    pub clamp_events: usize,
}

/// Runs the full pipeline. Deterministic: identical inputs give identical
/// outputs.
pub fn fit(y: &[f64], cfg: &FitConfig) -> Result<EstimateResult> {
    let n = y.len();
    let required = 1usize << (cfg.j0 + 2);
    if n < required {
        return Err(Error::TooFewObservations { n, required }.at_step("binning"));
    }
    for (index, &value) in y.iter().enumerate() {
        if !cfg.family.supports(value) {
            return Err(Error::Support { index, value }.at_step("binning"));
        }
    }
    let t_count = match cfg.t_override {
        Some(t) => {
            if !t.is_power_of_two() || t < (1 << (cfg.j0 + 1)) || t > n {
                return Err(Error::BadConfig(format!("invalid bin count override {t}"))
                    .at_step("binning"));
            }
            t
        }
        None => select_bin_count(n, cfg.regime, cfg.target_per_bin, cfg.j0)
            .map_err(|e| e.at_step("binning"))?,
    };

    let (sums, sizes) = bin_sums(y, t_count).map_err(|e| e.at_step("binning"))?;
    let variant = cfg.effective_variant();
    let binned =
        transform_bins(&sums, &sizes, cfg.family, variant).map_err(|e| e.at_step("vst"))?;

    // U = T^{-1/2} W Y*
    let mut coeffs_raw =
        dwt(&binned.transformed, &cfg.filter, cfg.j0).map_err(|e| e.at_step("dwt"))?;
    let tf = t_count as f64;
    coeffs_raw.scale(tf.powf(-0.5));

    let mut thr = ThresholdConfig::new(cfg.rule, n).map_err(|e| e.at_step("thresholding"))?;
    if let Some(v) = cfg.noise_variance {
        thr = thr.with_noise_variance(v).map_err(|e| e.at_step("thresholding"))?;
    }
    if let Some(l) = cfg.block_length {
        thr = thr.with_block_length(l).map_err(|e| e.at_step("thresholding"))?;
    }
    let coeffs_shrunk = thresholding::apply(&coeffs_raw, &thr);

    // G(f)-hat = T^{1/2} W^{-1} theta-hat
    let mut unscaled = coeffs_shrunk.clone();
    unscaled.scale(tf.sqrt());
    let g_hat = idwt(&unscaled, &cfg.filter).map_err(|e| e.at_step("idwt"))?;

    let (range_lo, range_hi) = cfg.family.g_range();
    let mut clamp_events = 0usize;
    let f_hat: Vec<f64> = g_hat
        .iter()
        .map(|&v| {
            if v < range_lo || v > range_hi {
                clamp_events += 1;
            }
            cfg.family.g_inverse(v)
        })
        .collect();

    let grid = (1..=t_count).map(|j| j as f64 / tf).collect();
    Ok(EstimateResult {
        grid,
        g_hat,
        f_hat,
        binned,
        coeffs_raw,
        coeffs_shrunk,
        clamp_events,
    })
}

/// Mean squared error of the estimate against the true mean sampled on the
/// same grid.
pub fn evaluate_mse(result: &EstimateResult, f_true: &[f64]) -> Result<f64> {
    if f_true.len() != result.f_hat.len() {
        return Err(Error::LengthMismatch {
            left: result.f_hat.len(),
            right: f_true.len(),
        });
    }
    let t = result.f_hat.len() as f64;
    Ok(result
        .f_hat
        .iter()
        .zip(f_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / t)
}
