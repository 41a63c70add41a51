//! Exact (non-Monte-Carlo) mean and variance of transformed bin sums.
//!
//! Poisson, Binomial and NegBinomial moments come from direct summation over
//! the support of the sum, with a certified truncation bound. Gamma moments
//! are closed-form through digamma/trigamma.

use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilyModel, VstConstants, VstVariant};
use crate::special::{digamma, trigamma};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Exact moments of H_m(X) together with a bound on the truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformMoments {
    pub mean: f64,
    pub variance: f64,
    pub truncation_bound: f64,
}

/// One grid point of a bias/variance diagnostic curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagPoint {
    pub mu: f64,
    /// sqrt(m) * (E H_m(X) - G(mu))
    pub scaled_bias: f64,
    /// m * Var H_m(X)
    pub scaled_variance: f64,
    pub truncation_bound: f64,
}

/// A bias/variance curve over a mean grid, at fixed bin size m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagCurve {
    pub family: FamilyModel,
    pub m: usize,
    pub variant: VstVariant,
    pub grid: Vec<DiagPoint>,
}

impl DiagCurve {
    /// CSV export: header plus one row per grid point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "mu,scaled_bias,scaled_variance,truncation_bound")?;
        for p in &self.grid {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.mu, p.scaled_bias, p.scaled_variance, p.truncation_bound
            )?;
        }
        Ok(())
    }

    pub fn max_abs_scaled_bias(&self) -> f64 {
        self.grid
            .iter()
            .map(|p| p.scaled_bias.abs())
            .fold(0.0, f64::max)
    }
}

const TAIL_TARGET: f64 = 1e-12;
const MAX_TERMS: usize = 1_000_000;

/// Exact mean and variance of H_m(X) for X the sum of m i.i.d. observations
/// with mean mu.
pub fn exact_transform_moments(
    family: FamilyModel,
    variant: VstVariant,
    mu: f64,
    m: usize,
) -> Result<TransformMoments> {
    if m == 0 {
        return Err(Error::BadConfig("bin size m must be positive".into()));
    }
    let constants = family.vst_constants(variant)?;
    match family.kind() {
        FamilyKind::Poisson => poisson_moments(family, variant, constants, mu, m),
        FamilyKind::Binomial { r } => binomial_moments(family, variant, r, mu, m),
        FamilyKind::NegBinomial { r } => negbin_moments(family, variant, r, mu, m),
        FamilyKind::Gamma { r } => Ok(gamma_moments(r, constants, mu, m)),
        _ => Err(Error::UnsupportedFamily),
    }
}

// E sqrt-transform moments by truncated summation over k = 0..K. The tail is
// bounded by a geometric envelope on the pmf together with the linear bound
// H(k)^2 <= c0 + c1*k that every root/arcsine/asinh transform obeys.
struct TailAccumulator {
    sum_p: f64,
    sum_h: f64,
    sum_h2: f64,
}

fn poisson_moments(
    family: FamilyModel,
    variant: VstVariant,
    constants: VstConstants,
    mu: f64,
    m: usize,
) -> Result<TransformMoments> {
    let nu = mu * m as f64; // X ~ Poisson(nu)
    if !(nu > 0.0) {
        return Err(Error::Domain { mu, lo: 0.0, hi: f64::INFINITY });
    }
    let mf = m as f64;
    // H(k)^2 = 4 (k + a)/m
    let h2_bound = (4.0 * constants.a.max(0.0) / mf, 4.0 / mf);
    let pmf0 = (-nu).exp();
    let ratio = |k: usize| nu / (k as f64 + 1.0);
    discrete_moments(family, variant, m, pmf0, ratio, None, h2_bound, nu)
}

fn binomial_moments(
    family: FamilyModel,
    variant: VstVariant,
    r: u32,
    mu: f64,
    m: usize,
) -> Result<TransformMoments> {
    let rf = r as f64;
    let p = mu / rf;
    let total = r as u64 * m as u64; // X ~ Binomial(rm, p)
    if p == 0.0 || p == 1.0 {
        // degenerate point mass at an endpoint
        let x = if p == 0.0 { 0.0 } else { total as f64 };
        let h = family.hm_transform(variant, x, m as f64)?;
        return Ok(TransformMoments { mean: h, variance: 0.0, truncation_bound: 0.0 });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain { mu, lo: 0.0, hi: rf });
    }
    // finite support: sum everything, no truncation error
    let mut sum_h = 0.0;
    let mut sum_h2 = 0.0;
    let mut pmf = (1.0 - p).powi(total as i32);
    let ratio = p / (1.0 - p);
    for k in 0..=total {
        let h = family.hm_transform(variant, k as f64, m as f64)?;
        sum_h += pmf * h;
        sum_h2 += pmf * h * h;
        if k < total {
            pmf *= ratio * (total - k) as f64 / (k as f64 + 1.0);
        }
    }
    Ok(TransformMoments {
        mean: sum_h,
        variance: (sum_h2 - sum_h * sum_h).max(0.0),
        truncation_bound: 0.0,
    })
}

fn negbin_moments(
    family: FamilyModel,
    variant: VstVariant,
    r: f64,
    mu: f64,
    m: usize,
) -> Result<TransformMoments> {
    if !(mu > 0.0) {
        return Err(Error::Domain { mu, lo: 0.0, hi: f64::INFINITY });
    }
    let shape = r * m as f64; // X ~ NB(rm, p), pmf ratio (k+rm)/(k+1) * (1-p)
    let p = r / (r + mu);
    let q = 1.0 - p;
    let constants = family.vst_constants(variant)?;
    // H = 2 sqrt(r) asinh sqrt(u/r), u = (k+a)/(m+b); asinh(t) <= t gives
    // H^2 <= 4 (k + a)/(m + b)
    let denom = m as f64 + constants.b;
    let h2_bound = (4.0 * constants.a.max(0.0) / denom, 4.0 / denom);
    let pmf0 = p.powf(shape);
    let ratio = move |k: usize| q * (k as f64 + shape) / (k as f64 + 1.0);
    let mean_x = mu * m as f64;
    discrete_moments(family, variant, m, pmf0, ratio, Some(MAX_TERMS), h2_bound, mean_x)
}

#[allow(clippy::too_many_arguments)]
fn discrete_moments<F>(
    family: FamilyModel,
    variant: VstVariant,
    m: usize,
    pmf0: f64,
    ratio: F,
    max_terms: Option<usize>,
    h2_bound: (f64, f64),
    mean_x: f64,
) -> Result<TransformMoments>
where
    F: Fn(usize) -> f64,
{
    let mut acc = TailAccumulator { sum_p: 0.0, sum_h: 0.0, sum_h2: 0.0 };
    let mut pmf = pmf0;
    let mut k = 0usize;
    let (c0, c1) = h2_bound;
    loop {
        let h = family.hm_transform(variant, k as f64, m as f64)?;
        acc.sum_p += pmf;
        acc.sum_h += pmf * h;
        acc.sum_h2 += pmf * h * h;
        let rk = ratio(k);
        // past the mean the pmf ratio is certified < 1 and decreasing, so the
        // tail is dominated by a geometric series
        if k as f64 > mean_x && rk < 1.0 {
            let bound = geometric_tail_bound(pmf * rk, ratio(k + 1).min(rk), k + 1, c0, c1);
            if bound <= TAIL_TARGET {
                return Ok(finish(acc, bound));
            }
        }
        k += 1;
        if let Some(cap) = max_terms {
            if k >= cap {
                return Err(Error::UnsupportedFamily);
            }
        }
        if k > 100_000_000 {
            return Err(Error::UnsupportedFamily);
        }
        pmf *= rk;
    }
}

// Bound on sum_{j>=0} pmf_start * q^j * (1 + c0 + c1 (k_start + j)), covering
// the truncation error of the probability mass, the mean and the second
// moment at once (|H| <= 1 + H^2 and H^2 <= c0 + c1 k).
fn geometric_tail_bound(pmf_start: f64, q: f64, k_start: usize, c0: f64, c1: f64) -> f64 {
    let one_minus = 1.0 - q;
    let tail_p = pmf_start / one_minus;
    let tail_ek = pmf_start * (k_start as f64 / one_minus + q / (one_minus * one_minus));
    (1.0 + c0) * tail_p + c1 * tail_ek
}

fn finish(acc: TailAccumulator, bound: f64) -> TransformMoments {
    let mean = acc.sum_h;
    let variance = (acc.sum_h2 - mean * mean).max(0.0);
    TransformMoments { mean, variance, truncation_bound: bound }
}

// X ~ Gamma(shape rm, scale mu/r); E ln X = psi(rm) + ln(scale) and
// Var ln X = psi'(rm), so H = sqrt(r) ln((X)/(m+b)) has closed-form moments.
fn gamma_moments(r: f64, constants: VstConstants, mu: f64, m: usize) -> TransformMoments {
    let shape = r * m as f64;
    let scale = mu / r;
    let sr = r.sqrt();
    let mean = sr * (digamma(shape) + scale.ln() - (m as f64 + constants.b).ln());
    let variance = r * trigamma(shape);
    TransformMoments { mean, variance, truncation_bound: 0.0 }
}

/// Scaled bias/variance curve over a mean grid, matching the figure axes
/// sqrt(m)*(E - G(mu)) and m*Var.
pub fn bias_variance_curve(
    family: FamilyModel,
    variant: VstVariant,
    m: usize,
    mu_grid: &[f64],
) -> Result<DiagCurve> {
    if mu_grid.is_empty() {
        return Err(Error::BadConfig("empty mean grid".into()));
    }
    let sqrt_m = (m as f64).sqrt();
    let mut grid = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let g = family.g_apply(mu)?;
        let mom = exact_transform_moments(family, variant, mu, m)?;
        grid.push(DiagPoint {
            mu,
            scaled_bias: sqrt_m * (mom.mean - g),
            scaled_variance: m as f64 * mom.variance,
            truncation_bound: mom.truncation_bound,
        });
    }
    Ok(DiagCurve { family, m, variant, grid })
}

/// Bias as a function of m, with the m^2-scaled value alongside; the
/// mean-matching transform keeps bias * m^2 bounded.
pub fn bias_order_check(
    family: FamilyModel,
    variant: VstVariant,
    mu: f64,
    m_list: &[usize],
) -> Result<Vec<(usize, f64, f64)>> {
    if m_list.len() < 2 || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadConfig("m list must be increasing with >= 2 entries".into()));
    }
    let g = family.g_apply(mu)?;
    m_list
        .iter()
        .map(|&m| {
            let mom = exact_transform_moments(family, variant, mu, m)?;
            let bias = mom.mean - g;
            Ok((m, bias, bias * (m as f64) * (m as f64)))
        })
        .collect()
}
