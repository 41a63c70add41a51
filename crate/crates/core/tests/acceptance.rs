//! Acceptance gate: one check per criterion, each printing a single
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line.

use nefreg::diagnostics::{bias_order_check, bias_variance_curve, exact_transform_moments};
use nefreg::estimator::{evaluate_mse, fit, FitConfig};
use nefreg::families::{FamilyModel, VstVariant};
use nefreg::special::digamma;
use nefreg::thresholding::{ShrinkRule, LAMBDA_STAR};
use nefreg::wavelet::{dwt, idwt, WaveletFilter};
use nefreg::{run_simulation, SimConfig, TestSignalKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

fn check(criterion: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {verdict} ({detail})");
    assert!(pass, "acceptance {criterion} failed: {detail}");
}

#[test]
fn criterion_01_shrinkage_constant_identity() {
    let residual = (LAMBDA_STAR - LAMBDA_STAR.ln() - 3.0).abs();
    check(
        "01 shrinkage-constant identity",
        residual < 1e-4,
        format!("|lambda* - ln lambda* - 3| = {residual:.2e}, tol 1e-4"),
    );
}

#[test]
fn criterion_02_poisson_bias_dominance() {
    let fam = FamilyModel::poisson();
    let grid: Vec<f64> = (0..20).map(|i| 0.5 + 9.5 * i as f64 / 19.0).collect();
    let mm = bias_variance_curve(fam, VstVariant::MeanMatching, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    let c0 = bias_variance_curve(fam, VstVariant::Bartlett, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    let c38 = bias_variance_curve(fam, VstVariant::Anscombe, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    check(
        "02 poisson bias dominance",
        mm < c0 && mm < c38,
        format!("max scaled bias: c=1/4 {mm:.3e}, c=0 {c0:.3e}, c=3/8 {c38:.3e}"),
    );
}

#[test]
fn criterion_03_binomial_bias_dominance() {
    let fam = FamilyModel::binomial(1).unwrap();
    let grid: Vec<f64> = (0..=80).map(|i| 0.1 + 0.01 * i as f64).collect();
    let mm = bias_variance_curve(fam, VstVariant::MeanMatching, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    let c0 = bias_variance_curve(fam, VstVariant::Bartlett, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    let c38 = bias_variance_curve(fam, VstVariant::Anscombe, 30, &grid)
        .unwrap()
        .max_abs_scaled_bias();
    check(
        "03 binomial bias dominance",
        mm < c0 && mm < c38,
        format!("max scaled bias: c=1/4 {mm:.3e}, c=0 {c0:.3e}, c=3/8 {c38:.3e}"),
    );
}

#[test]
fn criterion_04_gamma_exact_bias() {
    let fam = FamilyModel::gamma(1.0).unwrap();
    // closed form through the digamma oracle at m = 3
    let oracle = digamma(3.0) - 2.5f64.ln();
    let anchored = (oracle - 6.4936e-3).abs() < 1e-7;
    let mut dominated = true;
    let mut worst = 0.0f64;
    for m in 3..=40usize {
        let mm = exact_transform_moments(fam, VstVariant::MeanMatching, 1.0, m)
            .unwrap()
            .mean;
        let c0 = exact_transform_moments(fam, VstVariant::CustomOffset(0.0), 1.0, m)
            .unwrap()
            .mean;
        let ratio = mm.abs() / c0.abs();
        worst = worst.max(ratio);
        if mm.abs() >= c0.abs() / 10.0 {
            dominated = false;
        }
    }
    check(
        "04 gamma exact bias",
        anchored && dominated,
        format!(
            "bias(c=1/2, m=3) = {oracle:.6e} (anchor 6.4936e-3), worst |mm|/|c0| ratio {worst:.3} < 0.1"
        ),
    );
}

#[test]
fn criterion_05_bias_order() {
    let fam = FamilyModel::poisson();
    let mm = bias_order_check(fam, VstVariant::MeanMatching, 2.0, &[10, 20, 40, 80]).unwrap();
    let bart = bias_order_check(fam, VstVariant::Bartlett, 2.0, &[10, 20, 40, 80]).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for w in mm.windows(2).take(3) {
        let ratio = w[1].1 / w[0].1;
        ok &= (0.15..=0.40).contains(&ratio);
        detail.push_str(&format!("mm {:.3} ", ratio));
    }
    for w in bart.windows(2).take(3) {
        let ratio = w[1].1 / w[0].1;
        ok &= (0.40..=0.60).contains(&ratio);
        detail.push_str(&format!("c0 {:.3} ", ratio));
    }
    check("05 bias halving order", ok, detail.trim().to_string());
}

#[test]
fn criterion_06_variance_stabilization() {
    let fam = FamilyModel::poisson();
    let mut worst = 0.0f64;
    for &mu in &[4.0, 6.0, 8.0, 10.0] {
        let mom = exact_transform_moments(fam, VstVariant::MeanMatching, mu, 30).unwrap();
        worst = worst.max((30.0 * mom.variance - 1.0).abs());
    }
    check(
        "06 variance stabilization",
        worst <= 0.05,
        format!("max |m Var - 1| = {worst:.4}, tol 0.05"),
    );
}

#[test]
fn criterion_07_wavelet_correctness() {
    let filter = WaveletFilter::symmlet8();
    let mut rng = ChaCha12Rng::seed_from_u64(2718);
    let mut worst_recon = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for _ in 0..200 {
        for &n in &[64usize, 512, 4096] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let coeffs = dwt(&x, &filter, 4).unwrap();
            let energy_x: f64 = x.iter().map(|v| v * v).sum();
            worst_parseval = worst_parseval.max((coeffs.energy() - energy_x).abs());
            let back = idwt(&coeffs, &filter).unwrap();
            for (a, b) in x.iter().zip(&back) {
                worst_recon = worst_recon.max((a - b).abs());
            }
        }
    }

    // every Symmlet-8 detail vanishes on cubic samples, except where the
    // periodized window wraps across the circular boundary; propagate a
    // taint mask through the levels to identify interior coefficients
    let n = 512usize;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            ((t - 0.6) * t + 0.11) * t - 0.3
        })
        .collect();
    let coeffs = dwt(&x, &filter, 4).unwrap();
    let flen = filter.len();
    let mut taint = vec![false; n];
    let mut level_taints: Vec<Vec<bool>> = Vec::new();
    let mut len = n;
    while len > 16 {
        let half = len / 2;
        let out: Vec<bool> = (0..half)
            .map(|k| {
                (2 * k + flen - 1) >= len || (0..flen).any(|l| taint[(2 * k + l) % len])
            })
            .collect();
        level_taints.push(out.clone());
        taint = out;
        len = half;
    }
    level_taints.reverse();
    let mut worst_detail = 0.0f64;
    let mut interior = 0usize;
    for (detail, taints) in coeffs.details.iter().zip(&level_taints) {
        for (d, &tainted) in detail.iter().zip(taints) {
            if !tainted {
                interior += 1;
                worst_detail = worst_detail.max(d.abs());
            }
        }
    }
    check(
        "07 wavelet correctness",
        worst_recon < 1e-10 && worst_parseval < 1e-10 && interior > 100 && worst_detail <= 1e-9,
        format!(
            "reconstruction {worst_recon:.1e}, parseval {worst_parseval:.1e}, \
             {interior} interior cubic details, max {worst_detail:.1e}"
        ),
    );
}

#[test]
fn criterion_08_noise_suppression() {
    // seeded pure-noise survival of the blockwise shrinker; the factor is
    // nonzero exactly when the block energy exceeds lambda* L sigma^2
    let blocks = 100_000usize;
    let mut ok = true;
    let mut detail = String::new();
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for &l in &[3usize, 5, 8] {
        let threshold = LAMBDA_STAR * l as f64;
        let mut survived = 0usize;
        for _ in 0..blocks {
            let s2: f64 = (0..l)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * z
                })
                .sum();
            if s2 > threshold {
                survived += 1;
            }
        }
        let rate = survived as f64 / blocks as f64;
        let bound = 2.0 * (-1.5 * l as f64).exp();
        ok &= rate <= bound;
        detail.push_str(&format!("L={l}: {rate:.2e} <= {bound:.2e}; "));
    }
    check("08 noise suppression", ok, detail.trim_end().to_string());
}

#[test]
fn criterion_09_benchmark_level() {
    let mut cfg = SimConfig::new(FamilyModel::poisson(), 20260824);
    cfg.signals = vec![TestSignalKind::Doppler, TestSignalKind::HeaviSine];
    cfg.n_list = vec![640];
    cfg.replications = 100;
    let report = run_simulation(&cfg).unwrap();
    let doppler = report
        .find(
            TestSignalKind::Doppler,
            640,
            VstVariant::MeanMatching,
            ShrinkRule::BlockJs,
        )
        .unwrap()
        .mean_mse;
    let heavisine = report
        .find(
            TestSignalKind::HeaviSine,
            640,
            VstVariant::MeanMatching,
            ShrinkRule::BlockJs,
        )
        .unwrap()
        .mean_mse;
    let r1 = doppler / 8.101e-2;
    let r2 = heavisine / 2.831e-2;
    let within = |r: f64| (1.0 / 3.0..=3.0).contains(&r);
    check(
        "09 benchmark level",
        within(r1) && within(r2),
        format!(
            "doppler {doppler:.3e} ({r1:.2}x anchor), heavisine {heavisine:.3e} ({r2:.2}x anchor)"
        ),
    );
}

#[test]
fn criterion_10_vst_ordering() {
    let mut cfg = SimConfig::new(FamilyModel::poisson(), 20260824);
    cfg.variants = vec![
        VstVariant::MeanMatching,
        VstVariant::Anscombe,
        VstVariant::Bartlett,
    ];
    cfg.n_list = vec![10240, 40960];
    cfg.replications = 50;
    let report = run_simulation(&cfg).unwrap();
    let mut anscombe_wins = 0usize;
    let mut bartlett_wins = 0usize;
    let cells = TestSignalKind::ALL.len() * cfg.n_list.len();
    for &signal in &TestSignalKind::ALL {
        for &n in &[10240usize, 40960] {
            let mse = |v| {
                report
                    .find(signal, n, v, ShrinkRule::BlockJs)
                    .unwrap()
                    .mean_mse
            };
            let mm = mse(VstVariant::MeanMatching);
            if mm <= mse(VstVariant::Anscombe) {
                anscombe_wins += 1;
            }
            if mm <= mse(VstVariant::Bartlett) {
                bartlett_wins += 1;
            }
        }
    }
    check(
        "10 vst ordering",
        anscombe_wins == cells && bartlett_wins >= 6,
        format!("mm <= anscombe in {anscombe_wins}/{cells}, mm <= bartlett in {bartlett_wins}/{cells} (need 8 and >= 6)"),
    );
}

#[test]
fn criterion_11_neighcoeff_vs_blockjs() {
    let mut cfg = SimConfig::new(FamilyModel::poisson(), 20260824);
    cfg.signals = vec![TestSignalKind::Doppler, TestSignalKind::HeaviSine];
    cfg.rules = vec![ShrinkRule::BlockJs, ShrinkRule::NeighCoeff];
    cfg.n_list = vec![10240];
    cfg.replications = 50;
    let report = run_simulation(&cfg).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for &signal in &cfg.signals.clone() {
        let bjs = report
            .find(signal, 10240, VstVariant::MeanMatching, ShrinkRule::BlockJs)
            .unwrap()
            .mean_mse;
        let nc = report
            .find(signal, 10240, VstVariant::MeanMatching, ShrinkRule::NeighCoeff)
            .unwrap()
            .mean_mse;
        ok &= nc <= 1.2 * bjs;
        detail.push_str(&format!("{}: nc/bjs {:.3}; ", signal.name(), nc / bjs));
    }
    check("11 neighcoeff vs blockjs", ok, detail.trim_end().to_string());
}

#[test]
fn criterion_12_end_to_end_sanity() {
    let fam = FamilyModel::poisson();
    let cfg = FitConfig::new(fam, VstVariant::MeanMatching, ShrinkRule::BlockJs);
    let mut worst = 0.0f64;
    for rep in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(rep);
        let y: Vec<f64> = (0..4096).map(|_| fam.sample(5.0, &mut rng).unwrap()).collect();
        let result = fit(&y, &cfg).unwrap();
        let truth = vec![5.0; result.f_hat.len()];
        let rmse = evaluate_mse(&result, &truth).unwrap().sqrt();
        worst = worst.max(rmse);
    }
    check(
        "12 end-to-end sanity",
        worst < 0.2,
        format!("worst grid RMSE over 20 replications: {worst:.4}, tol 0.2"),
    );
}

#[test]
fn criterion_13_performance() {
    let fam = FamilyModel::poisson();
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let y: Vec<f64> = (0..163_840)
        .map(|_| fam.sample(3.0, &mut rng).unwrap())
        .collect();
    let cfg = FitConfig::new(fam, VstVariant::MeanMatching, ShrinkRule::BlockJs);
    let start = Instant::now();
    let result = fit(&y, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "13 performance",
        elapsed < 1.0 && !result.f_hat.is_empty(),
        format!("fit at n=163840 took {:.0} ms, budget 1000 ms", elapsed * 1e3),
    );
}
