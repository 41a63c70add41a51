//! Partitioning an ordered sample into T bins and transforming the bin sums.

use crate::error::{Error, Result};
use crate::families::{FamilyModel, VstVariant};
use serde::{Deserialize, Serialize};

/// Which bin-count scaling applies: T ~ n^{3/4} for QVF families with the
/// mean-matching transform, T ~ n^{1/2} for the general-NEF route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinRegime {
    Qvf,
    GeneralNef,
}

/// Bin sums and their transformed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSeries {
    pub t_count: usize,
    pub bin_sizes: Vec<usize>,
    pub sums: Vec<f64>,
    pub transformed: Vec<f64>,
    pub family: FamilyModel,
    pub variant: VstVariant,
}

/// Picks the number of bins T as a power of two.
///
/// With `target_per_bin` set (the counts-per-bin practical rule), T is the
/// largest power of two keeping n/T >= target; otherwise T is the power of two
/// nearest to n^{3/4} (QVF) or n^{1/2} (general NEF). Always clamped to
/// [2^{j0+1}, n].
pub fn select_bin_count(
    n: usize,
    regime: BinRegime,
    target_per_bin: Option<f64>,
    j0: usize,
) -> Result<usize> {
    let min_t = 1usize << (j0 + 1);
    if n < 2 * min_t {
        return Err(Error::TooFewObservations { n, required: 2 * min_t });
    }
    let t = match target_per_bin {
        Some(target) => {
            if !(target > 0.0) {
                return Err(Error::BadConfig("target per bin must be positive".into()));
            }
            let max_t = n as f64 / target;
            if max_t < 1.0 {
                1
            } else {
                1usize << (max_t.log2().floor() as u32)
            }
        }
        None => {
            let raw = match regime {
                BinRegime::Qvf => (n as f64).powf(0.75),
                BinRegime::GeneralNef => (n as f64).sqrt(),
            };
            nearest_power_of_two(raw)
        }
    };
    let max_t = prev_power_of_two(n);
    Ok(t.clamp(min_t, max_t))
}

fn nearest_power_of_two(x: f64) -> usize {
    let exp = x.log2().round().max(0.0) as u32;
    1usize << exp
}

fn prev_power_of_two(n: usize) -> usize {
    1usize << (usize::BITS - 1 - n.leading_zeros())
}

/// Contiguous-range bin sums; the first n mod T bins get the extra element.
pub fn bin_sums(y: &[f64], t_count: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = y.len();
    if t_count < 1 || t_count > n {
        return Err(Error::BadShape(format!(
            "cannot split {n} observations into {t_count} bins"
        )));
    }
    let base = n / t_count;
    let rem = n % t_count;
    let mut sums = Vec::with_capacity(t_count);
    let mut sizes = Vec::with_capacity(t_count);
    let mut start = 0;
    for j in 0..t_count {
        let size = base + usize::from(j < rem);
        sums.push(y[start..start + size].iter().sum());
        sizes.push(size);
        start += size;
    }
    Ok((sums, sizes))
}

/// Applies the shifted transform to each bin with its own size.
pub fn transform_bins(
    sums: &[f64],
    bin_sizes: &[usize],
    family: FamilyModel,
    variant: VstVariant,
) -> Result<BinnedSeries> {
    if sums.len() != bin_sizes.len() {
        return Err(Error::LengthMismatch {
            left: sums.len(),
            right: bin_sizes.len(),
        });
    }
    let mut transformed = Vec::with_capacity(sums.len());
    for (j, (&q, &m)) in sums.iter().zip(bin_sizes).enumerate() {
        let y = family
            .hm_transform(variant, q, m as f64)
            .map_err(|_| Error::BinDomain { index: j, value: q })?;
        transformed.push(y);
    }
    Ok(BinnedSeries {
        t_count: sums.len(),
        bin_sizes: bin_sizes.to_vec(),
        sums: sums.to_vec(),
        transformed,
        family,
        variant,
    })
}
