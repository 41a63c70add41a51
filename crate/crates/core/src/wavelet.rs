//! Periodized orthogonal discrete wavelet transform with leveled coefficient
//! bookkeeping.
//!
//! The transform is the plain orthogonal pyramid: periodic convolution with
//! zero phase offset, decimation keeping even indices. No normalization factor
//! is applied here; callers that need the T^{-1/2} scaling apply it to the
//! coefficients themselves.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Symmlet-8 analysis lowpass taps (16 taps, 8 vanishing moments).
///
/// Standard published least-asymmetric Daubechies filter, refined to full
/// double precision by Newton iteration on the orthonormality and
/// vanishing-moment equations.
#[allow(clippy::excessive_precision)]
pub const SYMMLET8_LOWPASS: [f64; 16] = [
    -0.003382415951005003,
    -0.0005421323318000107,
    0.03169508781152599,
    0.007607487324976608,
    -0.14329423835127266,
    -0.06127335906781108,
    0.4813596512590534,
    0.777185751699628,
    0.3644418948361789,
    -0.0519458381078818,
    -0.027219029917103486,
    0.04913717967373029,
    0.003808752013894489,
    -0.014952258337062199,
    -0.00030292051472413306,
    0.0018899503327676892,
];

/// An orthonormal conjugate-quadrature filter pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilter {
    pub name: String,
    pub lowpass: Vec<f64>,
}

impl WaveletFilter {
    pub fn symmlet8() -> Self {
        WaveletFilter {
            name: "symmlet8".into(),
            lowpass: SYMMLET8_LOWPASS.to_vec(),
        }
    }

    pub fn haar() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        WaveletFilter {
            name: "haar".into(),
            lowpass: vec![h, h],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "symmlet8" | "sym8" => Ok(Self::symmlet8()),
            "haar" => Ok(Self::haar()),
            other => Err(Error::BadConfig(format!("unknown wavelet filter `{other}`"))),
        }
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    /// Quadrature-mirror highpass: g_k = (-1)^k h_{L-1-k}.
    pub fn highpass(&self) -> Vec<f64> {
        let l = self.lowpass.len();
        (0..l)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.lowpass[l - 1 - k]
            })
            .collect()
    }
}

/// Leveled coefficient tree of a length-2^J input decomposed down to level j0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    pub j0: usize,
    /// Top level: the input length is 2^J.
    pub j_top: usize,
    /// 2^{j0} scaling ("gross structure") coefficients.
    pub gross: Vec<f64>,
    /// Detail levels j = j0 .. J-1; details[i] has 2^{j0+i} entries.
    pub details: Vec<Vec<f64>>,
}

impl WaveletCoeffs {
    pub fn zeros_like(&self) -> Self {
        WaveletCoeffs {
            j0: self.j0,
            j_top: self.j_top,
            gross: vec![0.0; self.gross.len()],
            details: self.details.iter().map(|d| vec![0.0; d.len()]).collect(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.gross.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    /// Sum of squares over all coefficients.
    pub fn energy(&self) -> f64 {
        self.gross.iter().map(|x| x * x).sum::<f64>()
            + self
                .details
                .iter()
                .map(|d| d.iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
    }

    pub fn scale(&mut self, c: f64) {
        for x in &mut self.gross {
            *x *= c;
        }
        for level in &mut self.details {
            for x in level {
                *x *= c;
            }
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.j_top <= self.j0
            || self.gross.len() != 1 << self.j0
            || self.details.len() != self.j_top - self.j0
        {
            return Err(Error::BadShape("malformed coefficient tree".into()));
        }
        for (i, d) in self.details.iter().enumerate() {
            if d.len() != 1 << (self.j0 + i) {
                return Err(Error::BadShape(format!(
                    "detail level {} has {} coefficients, expected {}",
                    self.j0 + i,
                    d.len(),
                    1 << (self.j0 + i)
                )));
            }
        }
        Ok(())
    }
}

fn analysis_step(a: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for (l, (&hl, &gl)) in h.iter().zip(g.iter()).enumerate() {
            let x = a[(2 * k + l) % n];
            sa += hl * x;
            sd += gl * x;
        }
        approx[k] = sa;
        detail[k] = sd;
    }
    (approx, detail)
}

fn synthesis_step(approx: &[f64], detail: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let mut out = vec![0.0; n];
    for k in 0..half {
        for (l, (&hl, &gl)) in h.iter().zip(g.iter()).enumerate() {
            out[(2 * k + l) % n] += hl * approx[k] + gl * detail[k];
        }
    }
    out
}

/// Forward periodized DWT of a length-2^J vector down to level j0.
pub fn dwt(x: &[f64], filter: &WaveletFilter, j0: usize) -> Result<WaveletCoeffs> {
    let n = x.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::BadLength(n));
    }
    let j_top = n.trailing_zeros() as usize;
    if j_top <= j0 {
        return Err(Error::BadLength(n));
    }
    if (1 << j0) < filter.len() {
        return Err(Error::FilterTooLongForLevel {
            filter_len: filter.len(),
            j0,
        });
    }
    let h = &filter.lowpass;
    let g = filter.highpass();
    let mut details: Vec<Vec<f64>> = Vec::with_capacity(j_top - j0);
    let mut a = x.to_vec();
    for _ in (j0..j_top).rev() {
        let (approx, detail) = analysis_step(&a, h, &g);
        details.push(detail);
        a = approx;
    }
    details.reverse();
    Ok(WaveletCoeffs {
        j0,
        j_top,
        gross: a,
        details,
    })
}

/// Inverse of `dwt`; the adjoint of an orthogonal map.
pub fn idwt(coeffs: &WaveletCoeffs, filter: &WaveletFilter) -> Result<Vec<f64>> {
    coeffs.check_shape()?;
    let h = &filter.lowpass;
    let g = filter.highpass();
    let mut a = coeffs.gross.clone();
    for detail in &coeffs.details {
        if detail.len() != a.len() {
            return Err(Error::BadShape("detail/approx length mismatch".into()));
        }
        a = synthesis_step(&a, detail, h, &g);
    }
    Ok(a)
}

/// One thresholding block at a detail level: `indices[..n_home]` are owned by
/// this block, the wrapped tail participates in the sum of squares only.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub indices: Vec<usize>,
    pub n_home: usize,
}

impl Block {
    pub fn home(&self) -> &[usize] {
        &self.indices[..self.n_home]
    }
}

/// Partitions `0..level_len` into contiguous blocks of length L. When L does
/// not divide the level size, the final block wraps cyclically to reach length
/// L; wrapped indices stay owned by their home block. L is clipped to the
/// level size.
pub fn block_partition(level_len: usize, block_len: usize) -> Vec<Block> {
    assert!(block_len >= 1, "block length must be positive");
    let l = block_len.min(level_len);
    if l == 0 {
        return Vec::new();
    }
    let full = level_len / l;
    let rem = level_len % l;
    let mut blocks = Vec::with_capacity(full + usize::from(rem > 0));
    for i in 0..full {
        blocks.push(Block {
            indices: (i * l..(i + 1) * l).collect(),
            n_home: l,
        });
    }
    if rem > 0 {
        let mut indices: Vec<usize> = (full * l..level_len).collect();
        for w in 0..l - rem {
            indices.push(w % level_len);
        }
        blocks.push(Block { indices, n_home: rem });
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn filter_invariants() {
        for filter in [WaveletFilter::symmlet8(), WaveletFilter::haar()] {
            let h = &filter.lowpass;
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12, "{}", filter.name);
            for l in 0..h.len() / 2 {
                let dot: f64 = (0..h.len() - 2 * l).map(|k| h[k] * h[k + 2 * l]).sum();
                let target = if l == 0 { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-10, "{} shift {l}", filter.name);
            }
        }
    }

    #[test]
    fn constant_input_has_zero_details() {
        let x = vec![3.25; 256];
        let c = dwt(&x, &WaveletFilter::symmlet8(), 4).unwrap();
        for level in &c.details {
            for &d in level {
                assert!(d.abs() < 1e-10);
            }
        }
        let first = c.gross[0];
        for &g in &c.gross {
            assert!((g - first).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_preserved() {
        for &n in &[64usize, 512, 4096] {
            let x = random_vec(n, n as u64);
            let c = dwt(&x, &WaveletFilter::symmlet8(), 4).unwrap();
            let nx: f64 = x.iter().map(|v| v * v).sum();
            assert!((c.energy() - nx).abs() < 1e-10 * nx.max(1.0));
            assert_eq!(c.total_len(), n);
        }
    }

    #[test]
    fn perfect_reconstruction() {
        for filter in [WaveletFilter::symmlet8(), WaveletFilter::haar()] {
            let x = random_vec(512, 7);
            let j0 = if filter.name == "haar" { 1 } else { 4 };
            let c = dwt(&x, &filter, j0).unwrap();
            let back = idwt(&c, &filter).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn haar_hand_computed() {
        // one Haar step of [1,2,3,4]: approx (x0+x1)/sqrt2, detail (x0-x1)/sqrt2
        let c = dwt(&[1.0, 2.0, 3.0, 4.0], &WaveletFilter::haar(), 1).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert!((c.details[0][0] - (1.0 - 2.0) / s).abs() < 1e-14);
        assert!((c.details[0][1] - (3.0 - 4.0) / s).abs() < 1e-14);
        assert!((c.gross[0] - 3.0 / s).abs() < 1e-14);
        assert!((c.gross[1] - 7.0 / s).abs() < 1e-14);
    }

    #[test]
    fn unit_gross_coefficient_has_unit_norm() {
        let filter = WaveletFilter::symmlet8();
        let mut c = dwt(&[0.0; 128], &filter, 4).unwrap().zeros_like();
        c.gross[3] = 1.0;
        let x = idwt(&c, &filter).unwrap();
        let norm: f64 = x.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_coefficients_invert_to_zero() {
        let filter = WaveletFilter::symmlet8();
        let c = dwt(&vec![1.0; 64], &filter, 4).unwrap().zeros_like();
        let x = idwt(&c, &filter).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bad_inputs_rejected() {
        let f = WaveletFilter::symmlet8();
        assert!(matches!(dwt(&[0.0; 100], &f, 4), Err(Error::BadLength(100))));
        assert!(matches!(dwt(&[0.0; 16], &f, 4), Err(Error::BadLength(16))));
        assert!(matches!(
            dwt(&[0.0; 64], &f, 3),
            Err(Error::FilterTooLongForLevel { .. })
        ));
    }

    #[test]
    fn block_partition_examples() {
        let blocks = block_partition(8, 4);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].indices, vec![0, 1, 2, 3]);
        assert_eq!(blocks[1].indices, vec![4, 5, 6, 7]);

        let blocks = block_partition(8, 3);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[2].indices, vec![6, 7, 0]);
        assert_eq!(blocks[2].n_home, 2);

        let blocks = block_partition(4, 8);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].indices, vec![0, 1, 2, 3]);
        assert_eq!(blocks[0].n_home, 4);
    }

    proptest! {
        #[test]
        fn dwt_is_linear(seed_a in 0u64..1000, seed_b in 1000u64..2000,
                         alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let filter = WaveletFilter::symmlet8();
            let x = random_vec(128, seed_a);
            let y = random_vec(128, seed_b);
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let cx = dwt(&x, &filter, 4).unwrap();
            let cy = dwt(&y, &filter, 4).unwrap();
            let cc = dwt(&combo, &filter, 4).unwrap();
            for (i, (&a, &b)) in cx.gross.iter().zip(&cy.gross).enumerate() {
                prop_assert!((cc.gross[i] - (alpha * a + beta * b)).abs() < 1e-10);
            }
            for (lvl, (la, lb)) in cx.details.iter().zip(&cy.details).enumerate() {
                for (i, (&a, &b)) in la.iter().zip(lb).enumerate() {
                    prop_assert!((cc.details[lvl][i] - (alpha * a + beta * b)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn block_partition_covers_each_index_once(level in 1usize..64, l in 1usize..16) {
            let blocks = block_partition(level, l);
            let mut seen = vec![0usize; level];
            for b in &blocks {
                for &i in b.home() {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let effective = l.min(level);
            prop_assert!(blocks.iter().all(|b| b.indices.len() == effective));
        }
    }
}
