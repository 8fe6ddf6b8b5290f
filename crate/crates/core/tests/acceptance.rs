//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs on synthetic data only.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steercal::geometry::{random_angle_baseline, AnalysisSpace};
use steercal::numerics::linalg::{cosine, orthonormality_error};
use steercal::numerics::{cohens_d, default_lambdas, ece, monotone_interp_fit, pava, pearson_r};
use steercal::probes::{fit_probe, ProbeTarget};
use steercal::steering::{build_caa, DEFAULT_TAU_HI, DEFAULT_TAU_LO};
use steercal::store::{read_dataset, split_by_question, write_dataset, Condition, Split, SplitFractions};
use steercal::synth::{generate, run_closed_loop_with, ClosedLoopOptions, SynthConfig};
use steercal::{Error, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn p1_random_baseline() -> Result<Outcome> {
    let start = Instant::now();
    let b = random_angle_baseline(10, 200, 1000, 0)?;
    let secs = start.elapsed().as_secs_f64();
    let mean_ok = (b.mean_deg - 79.1).abs() <= 0.5;
    let spread_ok = (b.two_sigma_deg - 0.8).abs() <= 0.4;
    outcome(
        mean_ok && spread_ok && secs < 60.0,
        format!(
            "mean {:.3}° (79.1 ± 0.5), 2σ {:.3}° (0.8 ± 0.4), {secs:.2} s",
            b.mean_deg, b.two_sigma_deg
        ),
    )
}

fn probe_cosine(rho: f64, layer: u32) -> Result<f64> {
    let base = SynthConfig {
        planted_cosine: rho,
        noise_sigma: 0.1,
        n_questions: 2000,
        layer,
        ..Default::default()
    };
    let acc = generate(&SynthConfig {
        condition: Condition::PureCorrectness,
        ..base.clone()
    })?
    .0;
    let conf = generate(&SynthConfig {
        condition: Condition::PureConfidence,
        ..base
    })?
    .0;
    let wa = fit_probe(&acc, ProbeTarget::EmpiricalAccuracy, &default_lambdas())?;
    let wc = fit_probe(&conf, ProbeTarget::VerbalizedConfidence, &default_lambdas())?;
    cosine(&wa.fit.weights, &wc.fit.weights)
}

fn p2_orthogonality() -> Result<Outcome> {
    let layers = 0..4u32;
    let ortho: Vec<f64> = layers.clone().map(|l| probe_cosine(0.0, l)).collect::<Result<_>>()?;
    let aligned: Vec<f64> = layers.map(|l| probe_cosine(0.9, l)).collect::<Result<_>>()?;
    let pass = ortho.iter().all(|c| c.abs() < 0.05) && aligned.iter().all(|c| (0.75..=0.98).contains(c));
    outcome(
        pass,
        format!("ρ=0 cosines {ortho:.4?} (|cos| < 0.05); ρ=0.9 cosines {aligned:.4?} (in [0.75, 0.98])"),
    )
}

fn p3_probe_recovery() -> Result<Outcome> {
    let cfg = SynthConfig {
        condition: Condition::PureCorrectness,
        noise_sigma: 0.0,
        n_questions: 1000,
        ..Default::default()
    };
    let (ds, truth) = generate(&cfg)?;
    let fit = fit_probe(&ds, ProbeTarget::EmpiricalAccuracy, &default_lambdas())?.fit;
    let r2 = fit.r2_test.unwrap_or(f64::NAN);
    let cos = cosine(&fit.weights, &truth.u)?;

    let (mut null_ds, _) = generate(&SynthConfig {
        noise_sigma: 0.1,
        ..cfg
    })?;
    let n = null_ds.len();
    let mut order: Vec<usize> = (0..truth.accuracy.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for m in null_ds.meta.iter_mut() {
        let q = truth.index_of(&m.question_id).expect("generated id");
        m.empirical_accuracy = Some(truth.accuracy[order[q]]);
    }
    debug_assert_eq!(n, null_ds.len());
    let null_r2 = fit_probe(&null_ds, ProbeTarget::EmpiricalAccuracy, &default_lambdas())?
        .fit
        .r2_test
        .unwrap_or(f64::NAN);
    outcome(
        r2 >= 0.999 && cos >= 0.999 && null_r2 <= 0.05,
        format!("noiseless R² {r2:.6}, cosine {cos:.6}; shuffled R² {null_r2:.4}"),
    )
}

fn p4_caa_recovery() -> Result<Outcome> {
    let mut cosines = Vec::new();
    for sigma in [0.05, 0.1, 0.2] {
        let (ds, truth) = generate(&SynthConfig {
            condition: Condition::PureConfidence,
            noise_sigma: sigma,
            ..Default::default()
        })?;
        let sv = build_caa(&ds, DEFAULT_TAU_HI, DEFAULT_TAU_LO)?;
        cosines.push(cosine(&sv.raw, &truth.v)?);
    }
    outcome(
        cosines.iter().all(|&c| c >= 0.95),
        format!("cosine(raw, v) at σ = 0.05, 0.1, 0.2: {cosines:.4?} (≥ 0.95)"),
    )
}

fn p5_closed_loop() -> Result<Outcome> {
    let start = Instant::now();
    let r = run_closed_loop_with(
        &SynthConfig {
            response_gain: 0.3,
            confidence_bias: 0.5,
            noise_sigma: 0.1,
            n_questions: 500,
            ..Default::default()
        },
        &ClosedLoopOptions {
            samples_per_question: 50,
            ..Default::default()
        },
    )?;
    let secs = start.elapsed().as_secs_f64();
    let (before, after) = (r.ece_unsteered(), r.ece_steered());
    outcome(
        after <= before / 3.0 && secs < 120.0,
        format!(
            "ECE {before:.4} → {after:.4} (ratio {:.2}, needs ≥ 3), {secs:.2} s",
            before / after
        ),
    )
}

fn p6_transfer_inversion() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut clamp_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let mut x = vec![rng.random_range(-3.0..0.0)];
        let mut y = vec![rng.random_range(0.0..0.5)];
        for _ in 1..n {
            x.push(x[x.len() - 1] + rng.random_range(0.01..1.0));
            y.push(y[y.len() - 1] + rng.random_range(1e-4..0.3));
        }
        let f = monotone_interp_fit(&x, &y)?;
        let (lo, hi) = (y[0], y[n - 1]);
        for _ in 0..10 {
            let t = rng.random_range(lo..=hi);
            let inv = f.invert(t)?;
            worst = worst.max((f.eval(inv.x) - t).abs());
            clamp_ok &= !inv.clamped;
        }
        let below = f.invert(lo - 0.1)?;
        let above = f.invert(hi + 0.1)?;
        clamp_ok &= below.clamped && below.x == x[0] && above.clamped && above.x == x[n - 1];
    }
    outcome(
        worst <= 1e-8 && clamp_ok,
        format!(
            "max |eval(invert(t)) − t| = {worst:.2e} over 10000 targets; clamping {}",
            if clamp_ok { "ok" } else { "wrong" }
        ),
    )
}

/// Merges the first adjacent violating pair of blocks and rescans from the
/// start until none remain.
fn pava_reference(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    let mean = |b: &Vec<f64>| b.iter().sum::<f64>() / b.len() as f64;
    loop {
        let violation = (0..blocks.len().saturating_sub(1)).find(|&i| mean(&blocks[i]) > mean(&blocks[i + 1]));
        match violation {
            Some(i) => {
                let next = blocks.remove(i + 1);
                blocks[i].extend(next);
            }
            None => break,
        }
    }
    blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(mean(b), b.len()))
        .collect()
}

fn sse(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Least squared error over every partition into contiguous blocks whose
/// block means are nondecreasing.
fn best_monotone_step(y: &[f64]) -> f64 {
    let n = y.len();
    let mut best = f64::INFINITY;
    for cuts in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for i in 0..n {
            if i == n - 1 || cuts & (1 << i) != 0 {
                let m = y[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64;
                ok &= m >= prev;
                prev = m;
                fit.extend(std::iter::repeat_n(m, i + 1 - start));
                start = i + 1;
            }
        }
        if ok {
            best = best.min(sse(y, &fit));
        }
    }
    best
}

fn p7_isotonic() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        // Multiples of 1/64 keep every block sum exact.
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..=64) as f64 / 64.0).collect();
        if pava(&y, &vec![1.0; n]) != pava_reference(&y) {
            mismatches += 1;
        }
    }
    let mut instances = 0;
    let mut worst_gap = 0.0f64;
    for n in 1..=6u32 {
        for code in 0..3usize.pow(n) {
            let y: Vec<f64> = (0..n).map(|i| (code / 3usize.pow(i) % 3) as f64 * 0.5).collect();
            let fitted = pava(&y, &vec![1.0; y.len()]);
            worst_gap = worst_gap.max((sse(&y, &fitted) - best_monotone_step(&y)).abs());
            instances += 1;
        }
    }
    outcome(
        mismatches == 0 && worst_gap <= 1e-12,
        format!(
            "{mismatches}/1000 mismatches vs reference; {instances} exhaustive instances, max SSE gap {worst_gap:.1e}"
        ),
    )
}

fn p8_metrics() -> Result<Outcome> {
    let mut errs: Vec<(&str, f64)> = Vec::new();
    let r = ece(&[0.9, 0.1], &[0.5, 0.1], 10)?;
    errs.push(("two-point ece", (r.ece - 0.2).abs()));
    errs.push(("two-point mae", (r.mae - 0.2).abs()));
    errs.push(("two-point brier", (r.brier - 0.08).abs()));
    errs.push(("two-point bins", (r.ece_from_bins() - r.ece).abs()));
    let r = ece(&[0.3, 0.6, 0.8], &[0.3, 0.6, 0.8], 10)?;
    errs.push(("perfect", r.ece + r.mae + r.brier));
    let r = ece(&[1.0; 4], &[0.0; 4], 10)?;
    errs.push((
        "maximal",
        (r.ece - 1.0).abs() + (r.brier - 1.0).abs() + (r.mae - 1.0).abs(),
    ));
    let d = cohens_d(&[2.0, 3.0], &[0.0, 1.0])?.d;
    errs.push(("cohens d", (d - 2.0 / 0.5f64.sqrt()).abs()));
    errs.push((
        "cohens d identical",
        cohens_d(&[1.0, 2.0, 4.0], &[4.0, 1.0, 2.0])?.d.abs(),
    ));
    errs.push((
        "pearson affine",
        (pearson_r(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0])? - 1.0).abs(),
    ));
    errs.push((
        "pearson reflection",
        (pearson_r(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0])? + 1.0).abs(),
    ));
    errs.push((
        "pearson hand",
        (pearson_r(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])? - 0.5).abs(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut consistency = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..50);
        let c: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r = ece(&c, &a, rng.random_range(1..=20))?;
        consistency = consistency.max((r.ece - r.ece_from_bins()).abs());
    }
    errs.push(("bin consistency", consistency));
    let worst = errs
        .iter()
        .cloned()
        .fold(("", 0.0), |w, e| if e.1 > w.1 { e } else { w });
    outcome(
        errs.iter().all(|e| e.1 <= 1e-12),
        format!(
            "{} checks, worst error {:.1e} ({})",
            errs.len(),
            worst.1,
            if worst.0.is_empty() { "none" } else { worst.0 }
        ),
    )
}

fn p9_subspaces() -> Result<Outcome> {
    let (ds, _) = generate(&SynthConfig {
        condition: Condition::Joint,
        planted_cosine: 0.0,
        noise_sigma: 0.2,
        dim: 256,
        n_questions: 1000,
        ..Default::default()
    })?;
    let lambdas = default_lambdas();
    let space = AnalysisSpace::new(&ds, 200)?;
    let (ta, tb) = (ProbeTarget::EmpiricalAccuracy, ProbeTarget::VerbalizedConfidence);
    let a = space.extract_subspace(ta, 10, &lambdas)?;
    let b = space.extract_subspace(tb, 10, &lambdas)?;
    let ortho = orthonormality_error(&a.basis).max(orthonormality_error(&b.basis));
    let self_a = space.removal_retention(ta, &a, &lambdas)?.r2_after;
    let self_b = space.removal_retention(tb, &b, &lambdas)?.r2_after;
    let cross_a = space.removal_retention(ta, &b, &lambdas)?.ratio.unwrap_or(f64::NAN);
    let cross_b = space.removal_retention(tb, &a, &lambdas)?.ratio.unwrap_or(f64::NAN);
    let shared_a = space.variance_decomposition(ta, &a, &b, &lambdas)?.shared;
    let shared_b = space.variance_decomposition(tb, &b, &a, &lambdas)?.shared;
    let pass = ortho <= 1e-8
        && self_a <= 0.01
        && self_b <= 0.01
        && cross_a >= 0.9
        && cross_b >= 0.9
        && shared_a <= 0.05
        && shared_b <= 0.05;
    outcome(
        pass,
        format!(
            "orthonormality {ortho:.1e}; self-removal R² {self_a:.4}/{self_b:.4} (≤ 0.01); \
             cross retention {cross_a:.3}/{cross_b:.3} (≥ 0.9); shared R² {shared_a:.4}/{shared_b:.4} (≤ 0.05)"
        ),
    )
}

fn p10_format() -> Result<Outcome> {
    let (ds, _) = generate(&SynthConfig {
        n_questions: 50,
        dim: 16,
        ..Default::default()
    })?;
    let tmp = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let dir = tmp.path().join("ds");
    write_dataset(&ds, &dir)?;
    let back = read_dataset(&dir)?;
    let bit_exact = back == ds
        && back
            .values
            .iter()
            .zip(&ds.values)
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let payload_path = dir.join(steercal::store::ACTIVATIONS_FILE);
    let clean = std::fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let mut flipped = clean.clone();
    flipped[clean.len() / 2] ^= 0x10;
    std::fs::write(&payload_path, &flipped).map_err(|e| Error::io(&payload_path, e))?;
    let flip_rejected = matches!(read_dataset(&dir), Err(Error::Checksum { .. }));
    std::fs::write(&payload_path, &clean[..clean.len() - 4]).map_err(|e| Error::io(&payload_path, e))?;
    let trunc_rejected = matches!(read_dataset(&dir), Err(Error::Format { .. }));

    let (big, _) = generate(&SynthConfig {
        n_questions: 1000,
        dim: 2,
        rows_per_question: 2,
        ..Default::default()
    })?;
    let fr = SplitFractions::new(0.6, 0.2, 0.2)?;
    let s1 = split_by_question(&big, fr, 42)?;
    let s2 = split_by_question(&big, fr, 42)?;
    let counts: Vec<usize> = [Split::Train, Split::Val, Split::Test]
        .iter()
        .map(|&s| s1.split_indices(s).len() / 2)
        .collect();
    let near = counts
        .iter()
        .zip([600usize, 200, 200])
        .all(|(&c, t)| c.abs_diff(t) <= 50);
    let together = s1.meta.chunks(2).all(|p| p[0].split == p[1].split);
    outcome(
        bit_exact && flip_rejected && trunc_rejected && s1 == s2 && near && together,
        format!(
            "round trip {bit_exact}; bit flip rejected {flip_rejected}; truncation rejected {trunc_rejected}; \
             splits deterministic {}, grouped {together}, question counts {counts:?}",
            s1 == s2
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("P1", p1_random_baseline),
        ("P2", p2_orthogonality),
        ("P3", p3_probe_recovery),
        ("P4", p4_caa_recovery),
        ("P5", p5_closed_loop),
        ("P6", p6_transfer_inversion),
        ("P7", p7_isotonic),
        ("P8", p8_metrics),
        ("P9", p9_subspaces),
        ("P10", p10_format),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{name} {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed > 0 {
        std::process::exit(1);
    }
}
