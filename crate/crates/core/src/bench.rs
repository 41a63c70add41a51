//! Test-signal generators, signal normalization and the seeded replication
//! harness.

use crate::error::{Error, Result};
use crate::estimator::{evaluate_mse, fit, FitConfig};
use crate::families::{FamilyModel, VstVariant};
use crate::thresholding::ShrinkRule;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// The four Donoho-Johnstone test signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestSignalKind {
    Doppler,
    Bumps,
    Blocks,
    HeaviSine,
}

impl TestSignalKind {
    pub const ALL: [TestSignalKind; 4] = [
        TestSignalKind::Doppler,
        TestSignalKind::Bumps,
        TestSignalKind::Blocks,
        TestSignalKind::HeaviSine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestSignalKind::Doppler => "doppler",
            TestSignalKind::Bumps => "bumps",
            TestSignalKind::Blocks => "blocks",
            TestSignalKind::HeaviSine => "heavisine",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "doppler" => Ok(TestSignalKind::Doppler),
            "bumps" => Ok(TestSignalKind::Bumps),
            "blocks" => Ok(TestSignalKind::Blocks),
            "heavisine" => Ok(TestSignalKind::HeaviSine),
            other => Err(Error::BadConfig(format!("unknown test signal `{other}`"))),
        }
    }
}

// Knot/height tables for Blocks and Bumps, standard values from the original
// benchmark suite.
const DJ_KNOTS: [f64; 11] = [
    0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];
const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMPS_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMPS_WIDTHS: [f64; 11] = [
    0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005,
];

/// Raw (unnormalized) signal value at t in [0, 1].
pub fn signal_eval(kind: TestSignalKind, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain { mu: t, lo: 0.0, hi: 1.0 });
    }
    Ok(match kind {
        TestSignalKind::Doppler => {
            (t * (1.0 - t)).sqrt() * (2.0 * std::f64::consts::PI * 1.05 / (t + 0.05)).sin()
        }
        TestSignalKind::HeaviSine => {
            4.0 * (4.0 * std::f64::consts::PI * t).sin() - sgn(t - 0.3) - sgn(0.72 - t)
        }
        TestSignalKind::Blocks => DJ_KNOTS
            .iter()
            .zip(&BLOCKS_HEIGHTS)
            .map(|(&tj, &hj)| hj * (1.0 + sgn(t - tj)) / 2.0)
            .sum(),
        TestSignalKind::Bumps => DJ_KNOTS
            .iter()
            .zip(BUMPS_HEIGHTS.iter().zip(&BUMPS_WIDTHS))
            .map(|(&tj, (&hj, &wj))| hj * (1.0 + ((t - tj) / wj).abs()).powi(-4))
            .sum(),
    })
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Number of points of the reference grid the normalization is fitted on.
pub const NORMALIZATION_GRID: usize = 1 << 15;

/// A test signal with an affine map onto [lo, hi] on the mean scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSignal {
    pub kind: TestSignalKind,
    pub lo: f64,
    pub hi: f64,
    scale: f64,
    offset: f64,
}

/// Fits the affine map sending the observed min/max over the reference grid
/// to lo/hi.
pub fn normalize_signal(kind: TestSignalKind, lo: f64, hi: f64) -> Result<TestSignal> {
    if !(lo < hi) {
        return Err(Error::BadRange(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 1..=NORMALIZATION_GRID {
        let v = signal_eval(kind, i as f64 / NORMALIZATION_GRID as f64)?;
        min = min.min(v);
        max = max.max(v);
    }
    if max - min < 1e-12 {
        return Err(Error::BadRange("degenerate (constant) signal".into()));
    }
    let scale = (hi - lo) / (max - min);
    Ok(TestSignal {
        kind,
        lo,
        hi,
        scale,
        offset: lo - scale * min,
    })
}

impl TestSignal {
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.offset + self.scale * signal_eval(self.kind, t)?)
    }
}

/// Default normalization range on the mean scale for a family. Success
/// probabilities stay inside (0, 1); count/positive families use a low
/// intensity scale so that bins at the default occupancy hold a single-digit
/// expected count.
pub fn default_signal_range(family: &FamilyModel) -> (f64, f64) {
    use crate::families::FamilyKind;
    match family.kind() {
        FamilyKind::Binomial { .. } | FamilyKind::BetaBinomial { .. } => (0.1, 0.9),
        _ => (0.1, 2.0),
    }
}

/// Configuration of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: FamilyModel,
    pub variants: Vec<VstVariant>,
    pub rules: Vec<ShrinkRule>,
    pub signals: Vec<TestSignalKind>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// Mean-scale normalization range; None picks the family default.
    pub range: Option<(f64, f64)>,
    /// Passed through to T selection; None uses the n^{3/4} rule.
    pub target_per_bin: Option<f64>,
}

impl SimConfig {
    pub fn new(family: FamilyModel, master_seed: u64) -> Self {
        SimConfig {
            family,
            variants: vec![VstVariant::MeanMatching],
            rules: vec![ShrinkRule::BlockJs],
            signals: TestSignalKind::ALL.to_vec(),
            n_list: vec![1024],
            replications: 100,
            master_seed,
            range: None,
            target_per_bin: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::BadConfig("replications must be >= 1".into()));
        }
        if self.variants.is_empty() || self.rules.is_empty() || self.signals.is_empty()
            || self.n_list.is_empty()
        {
            return Err(Error::BadConfig("empty simulation axis".into()));
        }
        Ok(())
    }
}

/// One report cell: a (signal, n, variant, rule) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub label: String,
    pub signal: TestSignalKind,
    pub n: usize,
    pub variant: VstVariant,
    pub rule: ShrinkRule,
    pub mean_mse: f64,
    pub stderr: f64,
    pub r: usize,
    pub seed: u64,
    pub clamp_rate: f64,
    pub ms: f64,
    pub error: Option<String>,
}

/// Replication report with full seed provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub master_seed: u64,
    pub cells: Vec<SimCell>,
}

impl SimReport {
    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    pub fn find(
        &self,
        signal: TestSignalKind,
        n: usize,
        variant: VstVariant,
        rule: ShrinkRule,
    ) -> Option<&SimCell> {
        self.cells
            .iter()
            .find(|c| c.signal == signal && c.n == n && c.variant == variant && c.rule == rule)
    }

    pub fn write_json<W: Write>(&self, w: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(std::io::Error::other)
    }

    /// Flat CSV form, one row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "label,signal,n,variant,rule,mean_mse,stderr,r,seed,clamp_rate,ms,error")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{:.16e},{:.16e},{},{},{:.16e},{:.3},{}",
                c.label,
                c.signal.name(),
                c.n,
                variant_name(c.variant),
                rule_name(c.rule),
                c.mean_mse,
                c.stderr,
                c.r,
                c.seed,
                c.clamp_rate,
                c.ms,
                c.error.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }
}

pub fn variant_name(v: VstVariant) -> String {
    match v {
        VstVariant::MeanMatching => "mm".into(),
        VstVariant::Bartlett => "bartlett".into(),
        VstVariant::Anscombe => "anscombe".into(),
        VstVariant::GeneralNef => "gen".into(),
        VstVariant::CustomOffset(c) => format!("c{c}"),
    }
}

/// Parses a transform token: mm | bartlett | anscombe | gen | c<offset>.
/// The numeric-offset tokens work for every family; c0 and c38 coincide with
/// bartlett/anscombe where those are defined.
pub fn parse_variant(token: &str) -> Result<VstVariant> {
    match token.to_ascii_lowercase().as_str() {
        "mm" => Ok(VstVariant::MeanMatching),
        "bartlett" => Ok(VstVariant::Bartlett),
        "anscombe" => Ok(VstVariant::Anscombe),
        "gen" => Ok(VstVariant::GeneralNef),
        "c0" => Ok(VstVariant::CustomOffset(0.0)),
        "c14" => Ok(VstVariant::CustomOffset(0.25)),
        "c38" => Ok(VstVariant::CustomOffset(0.375)),
        "c12" => Ok(VstVariant::CustomOffset(0.5)),
        other => other
            .strip_prefix('c')
            .and_then(|num| num.parse().ok())
            .map(VstVariant::CustomOffset)
            .ok_or_else(|| Error::BadConfig(format!("bad transform token `{other}`"))),
    }
}

/// Parses a shrinkage-rule token: blockjs | neighcoeff.
pub fn parse_rule(token: &str) -> Result<ShrinkRule> {
    match token.to_ascii_lowercase().as_str() {
        "blockjs" => Ok(ShrinkRule::BlockJs),
        "neighcoeff" => Ok(ShrinkRule::NeighCoeff),
        other => Err(Error::BadConfig(format!("bad rule `{other}`"))),
    }
}

pub fn rule_name(r: ShrinkRule) -> &'static str {
    match r {
        ShrinkRule::BlockJs => "blockjs",
        ShrinkRule::NeighCoeff => "neighcoeff",
    }
}

/// FNV-1a hash of a label.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4b9e9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d9e49a1b4a7c15);
    z ^ (z >> 31)
}

/// Per-replication seed: splitmix64 over the master seed, the FNV hash of the
/// label and the replication index. Variants and rules share data seeds (the
/// label excludes them), so transform comparisons are paired, as in a
/// common-random-numbers design.
pub fn mix_seed(master: u64, label: &str, replication: u64) -> u64 {
    splitmix64(master ^ fnv1a(label).rotate_left(17) ^ replication.wrapping_mul(0x9e3779b97f4a7c15))
}

fn data_label(family: &FamilyModel, signal: TestSignalKind, n: usize) -> String {
    format!("{:?}/{}/{}", family.kind(), signal.name(), n)
}

/// Runs every (signal, n, variant, rule) cell with R replications each.
/// Replication r of a cell draws data with seed mix(master, data-label, r);
/// the data label omits variant and rule so every transform and shrinkage
/// rule sees the same draws.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let (lo, hi) = cfg.range.unwrap_or_else(|| default_signal_range(&cfg.family));

    struct CellSpec {
        signal: TestSignalKind,
        n: usize,
        variant: VstVariant,
        rule: ShrinkRule,
    }
    let mut specs = Vec::new();
    for &signal in &cfg.signals {
        for &n in &cfg.n_list {
            for &variant in &cfg.variants {
                for &rule in &cfg.rules {
                    specs.push(CellSpec { signal, n, variant, rule });
                }
            }
        }
    }

    let cells: Vec<SimCell> = specs
        .par_iter()
        .map(|spec| {
            let label = format!(
                "{}/{}/{}",
                data_label(&cfg.family, spec.signal, spec.n),
                variant_name(spec.variant),
                rule_name(spec.rule)
            );
            let data_label = data_label(&cfg.family, spec.signal, spec.n);
            let start = Instant::now();
            let outcome = run_cell(cfg, spec.signal, spec.n, spec.variant, spec.rule, lo, hi,
                &data_label);
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok((mean_mse, stderr, clamp_rate)) => SimCell {
                    label,
                    signal: spec.signal,
                    n: spec.n,
                    variant: spec.variant,
                    rule: spec.rule,
                    mean_mse,
                    stderr,
                    r: cfg.replications,
                    seed: cfg.master_seed,
                    clamp_rate,
                    ms,
                    error: None,
                },
                Err(e) => SimCell {
                    label,
                    signal: spec.signal,
                    n: spec.n,
                    variant: spec.variant,
                    rule: spec.rule,
                    mean_mse: f64::NAN,
                    stderr: f64::NAN,
                    r: cfg.replications,
                    seed: cfg.master_seed,
                    clamp_rate: f64::NAN,
                    ms,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok(SimReport { master_seed: cfg.master_seed, cells })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &SimConfig,
    signal: TestSignalKind,
    n: usize,
    variant: VstVariant,
    rule: ShrinkRule,
    lo: f64,
    hi: f64,
    data_label: &str,
) -> Result<(f64, f64, f64)> {
    let sig = normalize_signal(signal, lo, hi)?;
    let means: Vec<f64> = (1..=n)
        .map(|i| sig.eval(i as f64 / n as f64))
        .collect::<Result<_>>()?;

    let mut fit_cfg = FitConfig::new(cfg.family, variant, rule);
    fit_cfg.target_per_bin = cfg.target_per_bin;

    let r = cfg.replications;
    let mses: Vec<(f64, f64)> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let seed = mix_seed(cfg.master_seed, data_label, rep as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let data: Vec<f64> = means
                .iter()
                .map(|&mu| cfg.family.sample(mu, &mut rng))
                .collect::<Result<_>>()
                .map_err(|e| Error::BadConfig(format!("replication {rep}: {e}")))?;
            let result = fit(&data, &fit_cfg)
                .map_err(|e| Error::BadConfig(format!("replication {rep}: {e}")))?;
            let t = result.grid.len();
            let truth: Vec<f64> = result
                .grid
                .iter()
                .map(|&t| sig.eval(t))
                .collect::<Result<_>>()?;
            let mse = evaluate_mse(&result, &truth)?;
            Ok((mse, result.clamp_events as f64 / t as f64))
        })
        .collect::<Result<_>>()?;

    let rf = r as f64;
    let mean = mses.iter().map(|(m, _)| m).sum::<f64>() / rf;
    let var = if r > 1 {
        mses.iter().map(|(m, _)| (m - mean) * (m - mean)).sum::<f64>() / (rf - 1.0)
    } else {
        0.0
    };
    let stderr = (var / rf).sqrt();
    let clamp_rate = mses.iter().map(|(_, c)| c).sum::<f64>() / rf;
    Ok((mean, stderr, clamp_rate))
}

/// Seeded Monte Carlo moments of H_m(sum of m draws); the cross-check for the
/// exact diagnostics and the only route for the mixture families.
pub fn mc_transform_moments(
    family: FamilyModel,
    variant: VstVariant,
    mu: f64,
    m: usize,
    draws: usize,
    seed: u64,
) -> Result<(f64, Option<f64>)> {
    if draws == 0 {
        return Err(Error::BadConfig("need at least one draw".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut x = 0.0;
        for _ in 0..m {
            x += family.sample(mu, &mut rng)?;
        }
        let h = family.hm_transform(variant, x, m as f64)?;
        sum += h;
        sum_sq += h * h;
    }
    let df = draws as f64;
    let mean = sum / df;
    let variance = if draws > 1 {
        Some((sum_sq - df * mean * mean).max(0.0) / (df - 1.0))
    } else {
        None
    };
    Ok((mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavisine_midpoint() {
        // 4 sin(2 pi) - sgn(0.2) - sgn(0.22) = -2
        let v = signal_eval(TestSignalKind::HeaviSine, 0.5).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn doppler_vanishes_at_origin() {
        assert_eq!(signal_eval(TestSignalKind::Doppler, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn blocks_is_piecewise_constant() {
        // two points inside the same knot interval
        let a = signal_eval(TestSignalKind::Blocks, 0.26).unwrap();
        let b = signal_eval(TestSignalKind::Blocks, 0.39).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_outside_unit_interval_rejected() {
        assert!(signal_eval(TestSignalKind::Doppler, -0.1).is_err());
        assert!(signal_eval(TestSignalKind::Doppler, 1.1).is_err());
    }

    #[test]
    fn normalization_hits_requested_range() {
        for kind in TestSignalKind::ALL {
            let sig = normalize_signal(kind, 0.1, 0.9).unwrap();
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for i in 1..=NORMALIZATION_GRID {
                let v = sig.eval(i as f64 / NORMALIZATION_GRID as f64).unwrap();
                min = min.min(v);
                max = max.max(v);
            }
            assert!((min - 0.1).abs() < 1e-10, "{kind:?} min {min}");
            assert!((max - 0.9).abs() < 1e-10, "{kind:?} max {max}");
        }
    }

    #[test]
    fn normalization_rejects_bad_range() {
        assert!(normalize_signal(TestSignalKind::Doppler, 0.9, 0.1).is_err());
    }

    #[test]
    fn poisson_default_range_is_positive() {
        let sig = normalize_signal(TestSignalKind::Bumps, 0.5, 10.0).unwrap();
        for i in 1..=256 {
            assert!(sig.eval(i as f64 / 256.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn seed_mixing_is_stable_and_distinct() {
        let a = mix_seed(1, "cell-a", 0);
        assert_eq!(a, mix_seed(1, "cell-a", 0));
        assert_ne!(a, mix_seed(1, "cell-a", 1));
        assert_ne!(a, mix_seed(1, "cell-b", 0));
        assert_ne!(a, mix_seed(2, "cell-a", 0));
    }

    #[test]
    fn zero_replications_rejected() {
        let mut cfg = SimConfig::new(FamilyModel::poisson(), 1);
        cfg.replications = 0;
        assert!(matches!(run_simulation(&cfg), Err(Error::BadConfig(_))));
    }

    #[test]
    fn small_simulation_is_reproducible_per_cell() {
        let mut cfg = SimConfig::new(FamilyModel::poisson(), 314);
        cfg.signals = vec![TestSignalKind::HeaviSine];
        cfg.n_list = vec![640];
        cfg.replications = 5;
        let full = run_simulation(&cfg).unwrap();
        assert_eq!(full.cells.len(), 1);
        // rerunning the same single cell matches bitwise (modulo wall time)
        let again = run_simulation(&cfg).unwrap();
        for (a, b) in full.cells.iter().zip(&again.cells) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.mean_mse.to_bits(), b.mean_mse.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
            assert_eq!(a.clamp_rate.to_bits(), b.clamp_rate.to_bits());
        }
        assert!(!full.has_failures());
    }

    #[test]
    fn mse_shrinks_with_sample_size() {
        let mut cfg = SimConfig::new(FamilyModel::poisson(), 99);
        cfg.signals = vec![TestSignalKind::HeaviSine];
        cfg.n_list = vec![640, 2560, 10240];
        cfg.replications = 10;
        let report = run_simulation(&cfg).unwrap();
        let mse: Vec<f64> = cfg
            .n_list
            .iter()
            .map(|&n| {
                report
                    .find(TestSignalKind::HeaviSine, n, VstVariant::MeanMatching, ShrinkRule::BlockJs)
                    .unwrap()
                    .mean_mse
            })
            .collect();
        assert!(mse[0] > mse[1] && mse[1] > mse[2], "{mse:?}");
    }

    #[test]
    fn mc_agrees_with_exact_moments() {
        let fam = FamilyModel::poisson();
        let draws = 200_000;
        let (mc_mean, mc_var) =
            mc_transform_moments(fam, VstVariant::MeanMatching, 2.0, 20, draws, 99).unwrap();
        let exact =
            crate::diagnostics::exact_transform_moments(fam, VstVariant::MeanMatching, 2.0, 20)
                .unwrap();
        let se = (exact.variance / draws as f64).sqrt();
        assert!((mc_mean - exact.mean).abs() < 5.0 * se);
        let var_se = exact.variance * (2.0 / draws as f64).sqrt();
        assert!((mc_var.unwrap() - exact.variance).abs() < 8.0 * var_se);
    }

    #[test]
    fn mc_single_draw_has_no_variance() {
        let fam = FamilyModel::poisson();
        let (_, var) =
            mc_transform_moments(fam, VstVariant::MeanMatching, 2.0, 5, 1, 7).unwrap();
        assert!(var.is_none());
        assert!(mc_transform_moments(fam, VstVariant::MeanMatching, 2.0, 5, 0, 7).is_err());
    }

    #[test]
    fn mc_deterministic_per_seed() {
        let fam = FamilyModel::gamma_poisson(0.5).unwrap();
        let a = mc_transform_moments(fam, VstVariant::MeanMatching, 3.0, 10, 500, 5).unwrap();
        let b = mc_transform_moments(fam, VstVariant::MeanMatching, 3.0, 10, 500, 5).unwrap();
        assert_eq!(a, b);
    }
}
