use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::parser::ValueSource;
use clap::ArgMatches;
use dasr_core::imaging::{load_image, modcrop, save_image, sobel_map, DegradationSpec, Image};
use dasr_core::losses::LossBreakdown;
use dasr_core::metrics::{csv_table, evaluate_pair, markdown_table, BenchRow, MetricReport};
use dasr_core::pipeline::{
    evaluate_checkpoint, load_samples, make_synthetic_dataset, self_check, train_stage1_on, train_stage2_on,
    Checkpoint, DatasetManifest, Stage, SyntheticSceneSpec, TrainConfig,
};
use dasr_core::seed;

use crate::args::{
    ConfigFlags, DegradeArgs, EvalArgs, MetricsArgs, ResidualArgs, SobelArgs, SynthArgs, TableFormat, TrainArgs,
};
use crate::colormap::heat_ramp;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Single file, or every image in a directory in name order.
fn inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
        let p = entry?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        if p.is_file() && IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("{}: no images found", path.display());
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSceneSpec {
        count: args.count,
        extent: args.size,
        seed: args.seed,
        scale: args.scale,
    };
    make_synthetic_dataset(&spec, &args.out)?;
    println!("{}", args.out.join(dasr_core::pipeline::MANIFEST_FILE).display());
    Ok(())
}

pub fn degrade(args: &DegradeArgs) -> Result<()> {
    let files = inputs(&args.input)?;
    create_dir(&args.out)?;
    for (i, f) in files.iter().enumerate() {
        let spec = DegradationSpec {
            scale: args.scale,
            blur_sigma: args.blur_sigma,
            noise_sigma: args.noise_sigma,
            seed: seed::derive_indexed(args.seed, "degrade", i as u64),
        };
        let hr = modcrop(&load_image(f)?, args.scale)?;
        let lr = spec.apply(&hr)?;
        let dst = args.out.join(format!("{}.png", stem(f)));
        save_image(&lr, &dst)?;
        log::info!("{} -> {} ({}x{})", f.display(), dst.display(), lr.height(), lr.width());
    }
    Ok(())
}

/// Defaults, then the JSON file, then flags given on the command line.
pub fn resolve_config(args: &TrainArgs, matches: &ArgMatches) -> Result<TrainConfig> {
    let (mut cfg, file_keys) = match &args.config {
        None => (TrainConfig::default(), Vec::new()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
                .keys()
                .cloned()
                .collect();
            let cfg = TrainConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?;
            (cfg, keys)
        }
    };
    let on_cli = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
    let f: &ConfigFlags = &args.flags;
    macro_rules! layer {
        ($($field:ident $(=> $conv:expr)?),* $(,)?) => {
            $(
                if on_cli(stringify!($field)) {
                    cfg.$field = layer!(@conv f.$field.clone() $(, $conv)?);
                }
            )*
        };
        (@conv $v:expr) => { $v };
        (@conv $v:expr, $conv:expr) => { $conv($v) };
    }
    layer!(
        scale, lr, adam_beta1, adam_beta2, adam_eps, batch, lr_crop, steps_stage1, steps_stage2,
        alpha, beta, gamma, noise_sigma, adv_enabled, adv_stage1, d_trans_enabled, replay_ir, copy_main,
        grad_clip, ema_decay, seed,
        prior_depth => |v: crate::args::PriorDepthArg| v.0,
        trans_mode => |v: crate::args::TransModeArg| v.0,
        preset => |v: crate::args::PresetArg| v.into(),
        feature_weights => |v: Option<Vec<f32>>| v.unwrap_or_default(),
    );
    if let Some(n) = args.steps {
        match args.stage {
            1 => cfg.steps_stage1 = n,
            _ => cfg.steps_stage2 = n,
        }
    }

    // Audit trail of where every value came from.
    let json: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&cfg.to_json())?;
    for (k, v) in &json {
        let source = if on_cli(k) || (args.steps.is_some() && k == &format!("steps_stage{}", args.stage)) {
            "flag"
        } else if file_keys.contains(k) {
            "config file"
        } else {
            "default"
        };
        log::info!("config {k} = {v} ({source})");
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs, matches: &ArgMatches) -> Result<()> {
    let cfg = resolve_config(args, matches)?;
    let manifest = DatasetManifest::load(&args.data)?;
    if manifest.scale != cfg.scale {
        bail!(
            "data scale {} does not match config scale {}",
            manifest.scale,
            cfg.scale
        );
    }
    let samples = load_samples(&manifest)?;
    let csv_path = args
        .log_csv
        .clone()
        .unwrap_or_else(|| args.ckpt_out.with_extension("csv"));
    let mut csv = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    writeln!(csv, "{}", LossBreakdown::CSV_HEADER)?;
    let mut write_err = None;
    let mut observer = |step: u64, row: &LossBreakdown| {
        if let Err(e) = writeln!(csv, "{}", row.csv_row(step)) {
            write_err.get_or_insert(e);
        }
        if step.is_multiple_of(100) {
            log::info!("step {step}: total_g {:.5} total_d {:.5}", row.total_g, row.total_d);
        }
    };
    let outcome = if args.stage == 1 {
        train_stage1_on(&samples, &cfg, &mut observer)?
    } else {
        let path = args
            .ckpt_in
            .as_ref()
            .ok_or_else(|| anyhow!("stage 2 needs --ckpt-in"))?;
        let stage1 = Checkpoint::load(path)?;
        train_stage2_on(&stage1, &samples, &cfg, &mut observer)?
    };
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", csv_path.display()));
    }
    outcome.checkpoint.save(&args.ckpt_out)?;
    if let Some(last) = outcome.log.last() {
        println!("final {}", LossBreakdown::CSV_HEADER);
        println!("final {}", last.csv_row(outcome.log.len() as u64 - 1));
    }
    if let Some((a, b)) = outcome.noise_distance {
        println!("noise-distance {a:.6} -> {b:.6}");
    }
    if outcome.frozen_before != outcome.frozen_after {
        bail!("frozen parameters changed during training");
    }
    println!("frozen {}", outcome.frozen_after);
    println!(
        "checkpoint {} {} sha256 {}",
        args.ckpt_out.display(),
        outcome.checkpoint.stage,
        outcome.checkpoint.digest()
    );
    Ok(())
}

fn render_table(rows: &[BenchRow], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => csv_table(rows),
        TableFormat::Md => markdown_table(rows),
    }
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let mut manifest = DatasetManifest::load(&args.data)?;
    if args.blur_sigma.is_some() || args.noise_sigma.is_some() {
        manifest = manifest.with_degradation(
            args.blur_sigma.unwrap_or(manifest.degradation.blur_sigma),
            args.noise_sigma.unwrap_or(manifest.degradation.noise_sigma),
        );
    }
    create_dir(&args.out)?;
    let rows = if args.self_check {
        vec![self_check(&manifest)?]
    } else {
        let path = args.ckpt.as_ref().ok_or_else(|| anyhow!("--ckpt is required"))?;
        let ckpt = Checkpoint::load(path)?;
        if ckpt.stage == Stage::Stage1 {
            log::info!("evaluating a stage-1 checkpoint");
        }
        let outcome = evaluate_checkpoint(&ckpt, &manifest, &args.out)?;
        let mut per = String::from("name,psnr,mse,ssim,bicubic_psnr,bicubic_mse,bicubic_ssim\n");
        for (name, m, b) in &outcome.per_image {
            per.push_str(&format!(
                "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                m.psnr, m.mse, m.ssim, b.psnr, b.mse, b.ssim
            ));
        }
        let p = args.out.join("per_image.csv");
        fs::write(&p, per).with_context(|| format!("writing {}", p.display()))?;
        vec![outcome.model, outcome.bicubic]
    };
    let table = render_table(&rows, args.table);
    let ext = match args.table {
        TableFormat::Csv => "csv",
        TableFormat::Md => "md",
    };
    let p = args.out.join(format!("results.{ext}"));
    fs::write(&p, &table).with_context(|| format!("writing {}", p.display()))?;
    print!("{table}");
    Ok(())
}

/// Name-matched `(name, hr, sr)` files; unmatched names are an error.
fn match_pairs(hr: &Path, sr: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if hr.is_file() && sr.is_file() {
        return Ok(vec![(stem(hr), hr.to_path_buf(), sr.to_path_buf())]);
    }
    let (hrs, srs) = (inputs(hr)?, inputs(sr)?);
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for h in &hrs {
        match srs.iter().find(|s| stem(s) == stem(h)) {
            Some(s) => pairs.push((stem(h), h.clone(), s.clone())),
            None => missing.push(format!("{} (no SR image)", stem(h))),
        }
    }
    for s in &srs {
        if !hrs.iter().any(|h| stem(h) == stem(s)) {
            missing.push(format!("{} (no HR image)", stem(s)));
        }
    }
    if !missing.is_empty() {
        bail!("unmatched names: {}", missing.join(", "));
    }
    Ok(pairs)
}

pub fn metrics(args: &MetricsArgs) -> Result<()> {
    let pairs = match_pairs(&args.hr, &args.sr)?;
    let mut reports: Vec<MetricReport> = Vec::new();
    println!("name,psnr,mse,ssim");
    for (name, h, s) in &pairs {
        let r = evaluate_pair(&load_image(h)?, &load_image(s)?).with_context(|| format!("comparing {name}"))?;
        println!("{name},{},{},{}", r.psnr, r.mse, r.ssim);
        reports.push(r);
    }
    let row = BenchRow::from_reports("mean", 0, &reports)?;
    println!("mean,{},{},{}", row.psnr, row.mse, row.ssim);
    Ok(())
}

pub fn sobel(args: &SobelArgs) -> Result<()> {
    create_dir(&args.out)?;
    for f in inputs(&args.input)? {
        let map = sobel_map(&load_image(&f)?).with_context(|| format!("{}", f.display()))?;
        let dst = args.out.join(format!("{}_sobel.png", stem(&f)));
        save_image(&map.to_image(), &dst)?;
        println!("{},{}", dst.display(), map.mean());
    }
    Ok(())
}

/// Per-pixel mean over channels of `|hr − sr|`, and the mean over all samples.
pub fn residual_map(hr: &Image, sr: &Image) -> Result<(Image, f64)> {
    if !hr.same_extent(sr) || hr.channels() != sr.channels() {
        bail!(
            "extent mismatch: HR {}x{}x{} vs SR {}x{}x{}",
            hr.height(),
            hr.width(),
            hr.channels(),
            sr.height(),
            sr.width(),
            sr.channels()
        );
    }
    let c = hr.channels();
    let diffs: Vec<f32> = hr.data().iter().zip(sr.data()).map(|(a, b)| (a - b).abs()).collect();
    let mean = diffs.iter().map(|&d| f64::from(d)).sum::<f64>() / diffs.len() as f64;
    let per_pixel = diffs.chunks(c).map(|p| p.iter().sum::<f32>() / c as f32).collect();
    Ok((Image::new(hr.height(), hr.width(), 1, per_pixel)?, mean))
}

pub fn residual(args: &ResidualArgs) -> Result<()> {
    create_dir(&args.out)?;
    let ramp = heat_ramp();
    println!("name,mean_residual");
    for (name, h, s) in match_pairs(&args.hr, &args.sr)? {
        let (map, mean) = residual_map(&load_image(&h)?, &load_image(&s)?).with_context(|| name.clone())?;
        save_image(&map, args.out.join(format!("{name}_residual.png")))?;
        let bytes = map.to_u8();
        let colored: Vec<u8> = bytes.iter().flat_map(|&b| ramp[usize::from(b)]).collect();
        let colored = Image::from_u8(map.height(), map.width(), 3, &colored)?;
        save_image(&colored, args.out.join(format!("{name}_residual_color.png")))?;
        println!("{name},{mean}");
    }
    Ok(())
}
