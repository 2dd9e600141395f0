//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Always exits 0 so that a criterion that is known not to hold does not
//! hide the others; set `DASR_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.
//! `DASR_ACCEPTANCE=2,3,11` runs a subset (AC12 reuses AC7's model when
//! both run, and trains its own otherwise).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::path::Path;
use std::time::Instant;

use common::{mse_oracle, psnr_oracle, random_image, random_vec, rng, sobel_oracle, ssim_oracle};
use dasr_core::imaging::{sobel_map, Image};
use dasr_core::losses::{adversarial_value, l_adversarial_d, l_noise, l_trans, TransMode};
use dasr_core::metrics::{mse, psnr, psnr_from_mse, ssim};
use dasr_core::models::{DiscTrans, Generator, GeneratorConfig, GeneratorPreset, Module, PriorDepth, Rrdb};
use dasr_core::pipeline::{
    evaluate_samples, generator_from, load_samples, make_synthetic_dataset, train_stage1_on, train_stage2_on,
    Checkpoint, DatasetManifest, Sample, SyntheticSceneSpec, TrainConfig,
};
use dasr_core::tensor::{
    conv2d, grad_check, grad_check_scaled, leaky_relu, linear, mean, mean_abs_diff, mul, pixel_shuffle, spatial_mean,
    sum, Tensor,
};
use dasr_core::Error;
use rand::Rng;

type Outcome = (bool, String);

/// Trained stage-1 checkpoints shared by AC7, AC8 and AC12.
#[derive(Default)]
struct Shared {
    stage1: Vec<(u64, Checkpoint)>,
    train_samples: Vec<Sample>,
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("DASR_ACCEPTANCE").ok().map(|v| {
        v.split(',')
            .filter_map(|s| s.trim().trim_start_matches("AC").parse().ok())
            .collect()
    });
    let strict = std::env::var("DASR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let work = tempfile::tempdir().expect("temp dir");
    let mut shared = Shared::default();

    let criteria: [(u32, &str); 12] = [
        (1, "paper-scale results substituted by desk-scale suites"),
        (2, "Sobel oracle"),
        (3, "metric oracles"),
        (4, "gradient checks"),
        (5, "analytic GAN values"),
        (6, "loss sign/zero properties"),
        (7, "stage-1 toy training beats bicubic"),
        (8, "stage-2 noise distance grows"),
        (9, "ablation axes reachable by config"),
        (10, "determinism"),
        (11, "checkpoint format"),
        (12, "degradation monotonicity"),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, title) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = match id {
            1 => ac1(),
            2 => ac2(),
            3 => ac3(),
            4 => ac4(),
            5 => ac5(),
            6 => ac6(),
            7 => ac7(work.path(), &mut shared),
            8 => ac8(&shared),
            9 => ac9(work.path()),
            10 => ac10(work.path()),
            11 => ac11(work.path()),
            _ => ac12(work.path(), &mut shared),
        };
        let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        ran += 1;
        if !pass {
            failed += 1;
        }
        println!(
            "AC{id} {} {title}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if strict && failed > 0 {
        std::process::exit(1);
    }
}

fn ac1() -> Result<Outcome, Error> {
    // Paper numbers need the full dataset and paper-scale training; what
    // can be checked here is that the paper-scale preset is wired.
    let cfg = GeneratorConfig::preset(GeneratorPreset::PaperScale, 2);
    let g = Generator::new(cfg, 0)?;
    let out = g.forward(&Tensor::zeros(&[1, 1, 8, 8]))?;
    let ok = cfg.n_blocks == 23 && out.shape() == [1, 1, 16, 16];
    Ok((
        ok,
        format!(
            "not reproducible at desk scale (substituted by AC2-AC12); paper-scale preset builds {} RRDBs, {} parameters",
            cfg.n_blocks,
            g.num_parameters()
        ),
    ))
}

fn ac2() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst = 0f64;
    for _ in 0..100 {
        let img = random_image(&mut r, 8, 8);
        let got = sobel_map(&img)?;
        for (a, e) in got.data.iter().zip(sobel_oracle(&img)) {
            worst = worst.max((f64::from(*a) - e).abs());
        }
    }
    let ramp = sobel_map(&Image::from_fn(6, 6, |_, x| x as f32))?;
    let ramp_ok = ramp.data.iter().all(|&v| (v - 8.0).abs() <= 1e-6);
    let diag = sobel_map(&Image::from_fn(6, 6, |y, x| (x + y) as f32))?;
    let want = 8.0 * std::f64::consts::SQRT_2;
    let diag_ok = diag.data.iter().all(|&v| (f64::from(v) - want).abs() <= 1e-5);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-6 && ramp_ok && diag_ok && secs < 1.0,
        format!(
            "max |Δ| {worst:.1e} on 100 8x8 (tol 1e-6), ramp=8 {ramp_ok}, diagonal=8√2 {diag_ok}, {secs:.3}s (< 1s)"
        ),
    ))
}

fn ac3() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut r = rng(3);
    let (mut dp, mut dm, mut ds) = (0f64, 0f64, 0f64);
    for _ in 0..20 {
        let a = random_image(&mut r, 32, 32);
        // Correlated partner so PSNR and SSIM sit in a realistic range.
        let noise = random_image(&mut r, 32, 32);
        let b = Image::new(
            32,
            32,
            1,
            a.data()
                .iter()
                .zip(noise.data())
                .map(|(x, n)| (x + 0.2 * (n - 0.5)).clamp(0.0, 1.0))
                .collect(),
        )?;
        dp = dp.max((psnr(&a, &b)? - psnr_oracle(&a, &b)).abs());
        dm = dm.max((mse(&a, &b)? - mse_oracle(&a, &b)).abs());
        ds = ds.max((ssim(&a, &b)? - ssim_oracle(&a, &b)).abs());
    }
    let p4 = psnr_from_mse(4.0);
    let secs = start.elapsed().as_secs_f64();
    let oracles = dp <= 1e-4 && dm <= 1e-9 && ds <= 1e-5;
    let constant = (p4 - 42.1113).abs() <= 1e-3;
    Ok((
        oracles && constant && secs < 5.0,
        format!(
            "max |Δ| psnr {dp:.1e} dB, mse {dm:.1e}, ssim {ds:.1e} (oracles {}); psnr(MSE=4) = {p4:.4} vs 42.1113 ± 1e-3 ({}; 10·log10(65025/4) = 42.1102); {secs:.2}s",
            if oracles { "ok" } else { "off" },
            if constant { "ok" } else { "the expected constant itself is off by 1.1e-3" }
        ),
    ))
}

fn tensor(r: &mut impl Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    Tensor::new(random_vec(r, shape.iter().product(), lo, hi), shape).unwrap()
}

/// Each op is probed through `sum(op(x) ⊙ r)` with a positive random `r`.
fn ac4() -> Result<Outcome, Error> {
    let start = Instant::now();
    let eps = 1e-3;
    let mut results: Vec<(&str, f32)> = Vec::new();
    let mut worst = |name: &'static str, e: f32| match results.iter_mut().find(|(n, _)| *n == name) {
        Some(slot) => slot.1 = slot.1.max(e),
        None => results.push((name, e)),
    };
    for seed in 0..5u64 {
        let mut r = rng(40 + seed);
        // conv2d: positive weights and inputs keep every gradient component O(1).
        let w = tensor(&mut r, &[3, 2, 3, 3], 0.1, 1.0);
        let b = tensor(&mut r, &[3], -1.0, 1.0);
        let x = tensor(&mut r, &[1, 2, 5, 5], 0.1, 1.0);
        let p = tensor(&mut r, &[1, 3, 5, 5], 0.5, 1.0);
        let p2 = tensor(&mut r, &[1, 3, 3, 3], 0.5, 1.0);
        worst(
            "conv2d/input",
            grad_check(|x| Ok(sum(&mul(&conv2d(x, &w, Some(&b), 1, 1)?, &p)?)), &x, eps)?,
        );
        worst(
            "conv2d/weight",
            grad_check(|w| Ok(sum(&mul(&conv2d(&x, w, Some(&b), 1, 1)?, &p)?)), &w, eps)?,
        );
        worst(
            "conv2d/bias",
            grad_check(|b| Ok(sum(&mul(&conv2d(&x, &w, Some(b), 1, 1)?, &p)?)), &b, eps)?,
        );
        worst(
            "conv2d/stride2",
            grad_check(|x| Ok(sum(&mul(&conv2d(x, &w, None, 2, 1)?, &p2)?)), &x, eps)?,
        );

        // leaky_relu: inputs kept 0.05 away from the kink.
        let lx: Vec<f32> = random_vec(&mut r, 24, 0.05, 1.0)
            .into_iter()
            .map(|v| if r.random::<bool>() { v } else { -v })
            .collect();
        let lx = Tensor::new(lx, &[24])?;
        let lp = tensor(&mut r, &[24], 0.5, 1.0);
        worst(
            "leaky_relu",
            grad_check(|x| Ok(sum(&mul(&leaky_relu(x, 0.2), &lp)?)), &lx, eps)?,
        );

        let sx = tensor(&mut r, &[1, 8, 2, 3], -1.0, 1.0);
        let sp = tensor(&mut r, &[1, 2, 4, 6], 0.5, 1.0);
        worst(
            "pixel_shuffle",
            grad_check(|x| Ok(sum(&mul(&pixel_shuffle(x, 2)?, &sp)?)), &sx, eps)?,
        );

        let x = tensor(&mut r, &[2, 5], -1.0, 1.0);
        let w = tensor(&mut r, &[3, 5], 0.1, 1.0);
        let b = tensor(&mut r, &[3], -1.0, 1.0);
        let p = tensor(&mut r, &[2, 3], 0.5, 1.0);
        worst(
            "linear/input",
            grad_check(|x| Ok(sum(&mul(&linear(x, &w, &b)?, &p)?)), &x, eps)?,
        );
        worst(
            "linear/weight",
            grad_check(|w| Ok(sum(&mul(&linear(&x, w, &b)?, &p)?)), &w, eps)?,
        );
        worst(
            "linear/bias",
            grad_check(|b| Ok(sum(&mul(&linear(&x, &w, b)?, &p)?)), &b, eps)?,
        );

        let x = tensor(&mut r, &[2, 3, 4, 4], -1.0, 1.0);
        let y = Tensor::new(
            x.to_vec()
                .iter()
                .map(|v| v + if r.random::<bool>() { 0.3 } else { -0.3 })
                .collect(),
            x.shape(),
        )?;
        let p = tensor(&mut r, &[2, 3], 0.5, 1.0);
        worst("sum", grad_check(|x| Ok(sum(&mul(x, x)?)), &x, eps)?);
        worst("mean", grad_check(|x| Ok(mean(&mul(x, x)?)), &x, eps)?);
        worst("mean_abs_diff", grad_check(|x| mean_abs_diff(x, &y), &x, eps)?);
        worst(
            "spatial_mean",
            grad_check(|x| Ok(sum(&mul(&spatial_mean(x)?, &p)?)), &x, eps)?,
        );

        // Full RRDB, weights amplified so the dense path is visible next to the skip.
        let block = Rrdb::new(60 + seed, 4, 2, 0.2);
        for prm in block.parameters() {
            prm.tensor
                .set_data(prm.tensor.to_vec().iter().map(|v| v * 5.0).collect())?;
        }
        let x = tensor(&mut r, &[1, 4, 5, 5], -1.0, 1.0);
        let p = tensor(&mut r, &[1, 4, 5, 5], 0.5, 1.0);
        worst("rrdb", grad_check(|x| Ok(sum(&mul(&block.forward(x)?, &p)?)), &x, eps)?);
    }

    // disc_trans logit w.r.t. a 1x1x32x32 input, on a well-conditioned
    // instance (positive conv rows with unit L1 norm, positive head).
    let d = DiscTrans::new(4, 32, 32, PriorDepth::Middle)?;
    for prm in d.parameters() {
        let row: usize = prm.tensor.shape()[1..].iter().product();
        let conv = prm.tensor.rank() == 4;
        let mut v = prm.tensor.to_vec();
        for chunk in v.chunks_mut(row.max(1)) {
            let t: f32 = chunk.iter().map(|x| x.abs()).sum();
            let t = if conv { t.max(1e-6) } else { 1.0 };
            chunk.iter_mut().for_each(|x| *x = x.abs() / t);
        }
        prm.tensor.set_data(v)?;
    }
    let x = tensor(&mut rng(45), &[1, 1, 32, 32], 0.0, 1.0);
    let logit = |x: &Tensor| Ok(sum(&d.forward(x)?.logit));
    let elementwise = grad_check(logit, &x, eps)?;
    let scaled = grad_check_scaled(logit, &x, eps)?;
    worst("disc_trans/logit", elementwise);

    let secs = start.elapsed().as_secs_f64();
    let failing: Vec<String> = results
        .iter()
        .filter(|(_, e)| !(*e < 1e-3))
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    let max_ok = results
        .iter()
        .filter(|(_, e)| *e < 1e-3)
        .map(|(_, e)| *e)
        .fold(0.0, f32::max);
    let detail = if failing.is_empty() {
        format!(
            "{} checks, max rel err {max_ok:.1e} (< 1e-3), {secs:.1}s",
            results.len()
        )
    } else {
        format!(
            "{} of {} checks < 1e-3 (max {max_ok:.1e}); over: {}; disc_trans max|a−n|/max|a| = {scaled:.1e} (f32 accumulation noise); {secs:.1}s",
            results.len() - failing.len(),
            results.len(),
            failing.join(", ")
        )
    };
    Ok((failing.is_empty() && secs < 30.0, detail))
}

fn logit_of(p: f32) -> f32 {
    (p / (1.0 - p)).ln()
}

fn ac5() -> Result<Outcome, Error> {
    let half = l_adversarial_d(&Tensor::scalar(0.0), &Tensor::scalar(0.0)).item_f64();
    let skewed = l_adversarial_d(&Tensor::scalar(logit_of(0.9)), &Tensor::scalar(logit_of(0.1))).item_f64();
    let direct = -(0.9f64.ln() + 0.9f64.ln());
    let v = adversarial_value(&Tensor::scalar(0.0), &Tensor::scalar(0.0)).item_f64();
    let e1 = (half - 2.0 * std::f64::consts::LN_2).abs();
    let e2 = (skewed - 0.21072).abs();
    Ok((
        e1 <= 1e-6 && e2 <= 1e-4 && (v + half).abs() < 1e-12,
        format!("D≡0.5 → {half:.8} (|Δ| {e1:.1e} vs 2ln2); (0.9, 0.1) → {skewed:.6} (direct {direct:.6}, |Δ| {e2:.1e} vs 0.21072)"),
    ))
}

fn ac6() -> Result<Outcome, Error> {
    let mut r = rng(6);
    let mut bad_noise = 0;
    for i in 0..1000 {
        let k = r.random_range(1..=3usize);
        let sizes: Vec<usize> = (0..k).map(|_| r.random_range(1..40usize)).collect();
        let a: Vec<Tensor> = sizes.iter().map(|&n| tensor(&mut r, &[n], -2.0, 2.0)).collect();
        let identical = i % 5 == 0;
        let b: Vec<Tensor> = if identical {
            a.clone()
        } else {
            sizes.iter().map(|&n| tensor(&mut r, &[n], -2.0, 2.0)).collect()
        };
        let w = vec![1.0 / k as f32; k];
        let v = l_noise(&a, &b, &w)?.item_f64();
        if !(v <= 0.0) || (v == 0.0) != identical {
            bad_noise += 1;
        }
    }
    let discs: Vec<DiscTrans> = (0..5)
        .map(|s| DiscTrans::new(600 + s, 16, 16, PriorDepth::Middle))
        .collect::<Result<_, _>>()?;
    let (mut bad_trans, mut bad_zero) = (0, 0);
    for i in 0..1000 {
        let x = tensor(&mut r, &[1, 1, 16, 16], 0.0, 1.0);
        let y = tensor(&mut r, &[1, 1, 16, 16], 0.0, 1.0);
        let d = &discs[i % discs.len()];
        for mode in [TransMode::RawSobel, TransMode::PriorBranch] {
            let v = l_trans(&x, &y, d, mode)?.item_f64();
            if !(v >= 0.0 && v.is_finite()) {
                bad_trans += 1;
            }
            if l_trans(&x, &x, d, mode)?.item_f64() != 0.0 {
                bad_zero += 1;
            }
        }
    }
    Ok((
        bad_noise + bad_trans + bad_zero == 0,
        format!(
            "1000 l_noise cases: {bad_noise} violations; 1000 l_trans pairs × 2 modes: {bad_trans} negative, {bad_zero} nonzero self-distances"
        ),
    ))
}

const AC7_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn toy_config(seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        batch: 2,
        lr_crop: 10,
        steps_stage1: 2000,
        steps_stage2: 500,
        seed,
        ..TrainConfig::default()
    }
}

fn synth(dir: &Path, count: usize, extent: usize, seed: u64) -> Result<DatasetManifest, Error> {
    make_synthetic_dataset(
        &SyntheticSceneSpec {
            count,
            extent,
            seed,
            scale: 2,
        },
        dir,
    )
}

fn ac7(work: &Path, shared: &mut Shared) -> Result<Outcome, Error> {
    let start = Instant::now();
    let train = load_samples(&synth(&work.join("ac7-train"), 64, 64, 100)?)?;
    let held = load_samples(&synth(&work.join("ac7-held"), 16, 64, 200)?)?;
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in AC7_SEEDS {
        let out = train_stage1_on(&train, &toy_config(seed), &mut |_, _| {})?;
        let g = generator_from(&out.checkpoint)?;
        let ev = evaluate_samples(&g, &held, "held-out", None)?;
        let delta = ev.model.psnr - ev.bicubic.psnr;
        if delta >= 0.3 {
            wins += 1;
        }
        parts.push(format!("{delta:+.2}"));
        shared.stage1.push((seed, out.checkpoint));
    }
    shared.train_samples = train;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        wins >= 4 && secs <= 600.0,
        format!(
            "{wins}/5 seeds ≥ bicubic + 0.3 dB (ΔPSNR {}; need 4), {:.0}s (≤ 600s)",
            parts.join(" "),
            secs
        ),
    ))
}

fn ac8(shared: &Shared) -> Result<Outcome, Error> {
    if shared.stage1.is_empty() {
        return Ok((false, "needs AC7's stage-1 checkpoints (run AC7 too)".into()));
    }
    let mut grew = 0;
    let mut parts = Vec::new();
    for (seed, ckpt) in &shared.stage1 {
        let cfg = TrainConfig {
            lr: 1e-4,
            ..toy_config(*seed)
        };
        let out = train_stage2_on(ckpt, &shared.train_samples, &cfg, &mut |_, _| {})?;
        let (a, b) = out.noise_distance.expect("stage 2 reports the noise distance");
        if b > a {
            grew += 1;
        }
        parts.push(format!("{a:.4}→{b:.4}"));
    }
    Ok((
        grew >= 4,
        format!("{grew}/5 seeds grew after 500 steps, α=0.1 ({})", parts.join(", ")),
    ))
}

fn smoke_config(json: &str) -> Result<TrainConfig, Error> {
    let mut cfg = TrainConfig::from_json(json)?;
    (cfg.batch, cfg.lr_crop, cfg.steps_stage1, cfg.steps_stage2, cfg.lr) = (2, 8, 3, 3, 1e-3);
    Ok(cfg)
}

fn distinct<T: PartialEq>(rows: &[T]) -> bool {
    rows.iter()
        .enumerate()
        .all(|(i, a)| rows[i + 1..].iter().all(|b| a != b))
}

fn ac9(work: &Path) -> Result<Outcome, Error> {
    let start = Instant::now();
    let m = synth(&work.join("ac9"), 4, 32, 9)?;
    let samples = load_samples(&m)?;
    let s1 = train_stage1_on(&samples, &smoke_config("{}")?, &mut |_, _| {})?.checkpoint;
    let stage2 = |json: &str| -> Result<Vec<_>, Error> {
        Ok(train_stage2_on(&s1, &samples, &smoke_config(json)?, &mut |_, _| {})?.log)
    };
    let ladder = [
        r#"{"d_trans_enabled": false, "alpha": 0.0, "beta": 0.0}"#,
        r#"{"d_trans_enabled": true, "alpha": 0.0, "beta": 0.0}"#,
        r#"{"alpha": 0.1, "beta": 0.0}"#,
        r#"{"alpha": 0.1, "beta": 1.0}"#,
    ];
    let depths = [
        r#"{"prior_depth": "shallow"}"#,
        r#"{"prior_depth": "middle"}"#,
        r#"{"prior_depth": "deep"}"#,
    ];
    let grid = ["0.1/0.0", "0.0/1.0", "0.5/1.0", "0.5/0.1", "1.0/0.0", "0.1/1.0"].map(|ab| {
        let (a, b) = ab.split_once('/').unwrap();
        format!(r#"{{"alpha": {a}, "beta": {b}}}"#)
    });
    let mut axes = Vec::new();
    let logs = ladder.iter().map(|j| stage2(j)).collect::<Result<Vec<_>, _>>()?;
    axes.push(("component ladder", distinct(&logs), logs.len()));
    let logs = depths.iter().map(|j| stage2(j)).collect::<Result<Vec<_>, _>>()?;
    axes.push(("prior depth", distinct(&logs), logs.len()));
    let logs = grid.iter().map(|j| stage2(j)).collect::<Result<Vec<_>, _>>()?;
    axes.push(("(α, β) grid", distinct(&logs), logs.len()));
    let mut logs = Vec::new();
    for sigma in [1.0, 3.0, 5.0] {
        let blurred = load_samples(&m.with_degradation(sigma, 0.0))?;
        logs.push(train_stage1_on(&blurred, &smoke_config("{}")?, &mut |_, _| {})?.log);
    }
    axes.push(("blur σ 1/3/5", distinct(&logs), logs.len()));
    let secs = start.elapsed().as_secs_f64();
    let all = axes.iter().all(|a| a.1);
    let detail = axes
        .iter()
        .map(|(n, ok, k)| format!("{n}: {k} runs {}", if *ok { "distinct" } else { "NOT distinct" }))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((all && secs <= 900.0, format!("{detail}; {secs:.0}s (≤ 900s)")))
}

fn ac10(work: &Path) -> Result<Outcome, Error> {
    let m = synth(&work.join("ac10"), 4, 32, 10)?;
    let run = |tag: &str| -> Result<(Vec<u8>, String), Error> {
        let samples = load_samples(&m)?;
        let cfg = TrainConfig {
            steps_stage1: 20,
            steps_stage2: 10,
            ..smoke_config("{}")?
        };
        let s1 = train_stage1_on(&samples, &cfg, &mut |_, _| {})?.checkpoint;
        let s2 = train_stage2_on(&s1, &samples, &cfg, &mut |_, _| {})?.checkpoint;
        let path = work.join(format!("ac10-{tag}.ckpt"));
        s2.save(&path)?;
        let loaded = Checkpoint::load(&path)?;
        let ev = evaluate_samples(
            &generator_from(&loaded)?,
            &samples,
            "ac10",
            Some(&work.join(format!("ac10-{tag}"))),
        )?;
        let mut csv = dasr_core::metrics::csv_table(&[ev.model, ev.bicubic]);
        for (name, a, b) in ev.per_image {
            csv.push_str(&format!(
                "{name},{},{},{},{},{},{}\n",
                a.psnr, a.mse, a.ssim, b.psnr, b.mse, b.ssim
            ));
        }
        Ok((std::fs::read(&path).map_err(|e| Error::Config(e.to_string()))?, csv))
    };
    let (a, b) = (run("a")?, run("b")?);
    Ok((
        a.0 == b.0 && a.1 == b.1,
        format!(
            "stage1→stage2→eval twice: checkpoints {} ({} bytes), metric CSVs {}",
            if a.0 == b.0 { "byte-identical" } else { "differ" },
            a.0.len(),
            if a.1 == b.1 { "identical" } else { "differ" }
        ),
    ))
}

fn ac11(work: &Path) -> Result<Outcome, Error> {
    let m = synth(&work.join("ac11"), 1, 32, 11)?;
    let samples = load_samples(&m)?;
    let ckpt = train_stage1_on(&samples, &smoke_config("{}")?, &mut |_, _| {})?.checkpoint;
    let (p, q) = (work.join("ac11-a.ckpt"), work.join("ac11-b.ckpt"));
    ckpt.save(&p)?;
    Checkpoint::load(&p)?.save(&q)?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::Config(e.to_string()));
    let bytes = read(&p)?;
    let round_trip = bytes == read(&q)?;
    let mut bad_magic = bytes.clone();
    bad_magic[..4].copy_from_slice(b"NOPE");
    let magic = Checkpoint::from_bytes(&bad_magic).err();
    let truncated = Checkpoint::from_bytes(&bytes[..bytes.len() / 2]).err();
    let distinct = matches!(magic, Some(Error::BadMagic(_))) && matches!(truncated, Some(Error::Truncated(_)));
    let show = |e: &Option<Error>| e.as_ref().map_or("accepted".to_string(), ToString::to_string);
    Ok((
        round_trip && distinct,
        format!(
            "save→load→save {}; magic: \"{}\"; truncation: \"{}\"",
            if round_trip { "byte-identical" } else { "differs" },
            show(&magic),
            show(&truncated)
        ),
    ))
}

fn ac12(work: &Path, shared: &mut Shared) -> Result<Outcome, Error> {
    let ckpt = match shared.stage1.first() {
        Some((_, c)) => c.clone(),
        None => {
            let train = load_samples(&synth(&work.join("ac12-train"), 16, 64, 100)?)?;
            let cfg = TrainConfig {
                steps_stage1: 300,
                ..toy_config(0)
            };
            train_stage1_on(&train, &cfg, &mut |_, _| {})?.checkpoint
        }
    };
    let g = generator_from(&ckpt)?;
    let corpus = synth(&work.join("ac12"), 50, 64, 300)?;
    let mut per_sigma = Vec::new();
    for sigma in [1.0, 3.0, 5.0] {
        let samples = load_samples(&corpus.with_degradation(sigma, corpus.degradation.noise_sigma))?;
        let ev = evaluate_samples(&g, &samples, "ac12", None)?;
        per_sigma.push(ev.per_image.into_iter().map(|(_, m, _)| m.psnr).collect::<Vec<_>>());
    }
    let monotone = (0..50)
        .filter(|&i| per_sigma[0][i] >= per_sigma[1][i] && per_sigma[1][i] >= per_sigma[2][i])
        .count();
    let means: Vec<String> = per_sigma
        .iter()
        .map(|v| format!("{:.2}", v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    Ok((
        monotone * 10 >= 50 * 9,
        format!(
            "{monotone}/50 images non-increasing over σ 1→3→5 (need 45); mean PSNR {}",
            means.join(" → ")
        ),
    ))
}
