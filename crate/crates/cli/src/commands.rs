//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fdfnet_core::checkpoint::{
    apply_to_store, fingerprint_params, load_checkpoint, save_checkpoint, Checkpoint,
    CheckpointMeta, StageTag,
};
use fdfnet_core::config::RunConfig;
use fdfnet_core::data::{
    read_wav_with_format, si_sdr, snr, synth_dataset, write_wav, DatasetManifest, Split,
};
use fdfnet_core::models::count_parameters;
use fdfnet_core::pipeline::{
    enhance_streaming, full_forward, oracle_mask_only, train_stage1, train_stage2, FdfNet,
    TrainOutcome,
};
use fdfnet_core::CoreError;
use fdfnet_dsp::Waveform;

use crate::log;

fn build_model(config: &RunConfig) -> Result<FdfNet<f32>, CoreError> {
    let frame = config.frame.to_frame_config()?;
    FdfNet::new(frame, &config.fme, &config.dsr, config.seed)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CoreError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn check_fingerprint(ckpt: &Checkpoint, config: &RunConfig, force: bool) -> Result<(), CoreError> {
    if ckpt.meta.config_fingerprint != config.fingerprint() {
        if force {
            log::info("config fingerprint mismatch overridden by --force");
            return Ok(());
        }
        return Err(CoreError::Usage(format!(
            "checkpoint was written for config fingerprint {:#018x}, current is {:#018x}; \
             pass --force to load anyway",
            ckpt.meta.config_fingerprint,
            config.fingerprint()
        )));
    }
    Ok(())
}

fn write_log_file(path: &Path, outcome: &TrainOutcome<f32>) -> Result<(), CoreError> {
    let mut text = String::new();
    for l in &outcome.logs {
        text.push_str(&format!(
            "{}\t{:.6e}\t{:.6e}\t{:.6e}\n",
            l.epoch, l.train_loss, l.val_loss, l.learning_rate
        ));
    }
    let tmp = path.with_extension("tsv.tmp");
    {
        let mut f =
            fs::File::create(&tmp).map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
        f.write_all(text.as_bytes())
            .map_err(|e| CoreError::io(tmp.display().to_string(), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}

fn resolve_dataset(config: &RunConfig) -> Result<fdfnet_core::pipeline::Dataset, CoreError> {
    if let Some(manifest) = &config.data.manifest {
        return DatasetManifest::load(manifest)?.build_dataset();
    }
    if let Some(synth) = &config.data.synth {
        // Materialize the corpus so evaluation can reuse the same manifest.
        let corpus_dir = config.output_dir.join("corpus");
        let manifest = synth_dataset(synth, &corpus_dir)?;
        log::info(format!("synthetic corpus written to {}", manifest.display()));
        return DatasetManifest::load(&manifest)?.build_dataset();
    }
    Err(CoreError::Usage(
        "config has no data source; set data.manifest or data.synth".into(),
    ))
}

pub fn train(stage: u8, config_path: &Path, force: bool) -> Result<(), CoreError> {
    if !matches!(stage, 1 | 2) {
        return Err(CoreError::Usage(format!("unknown stage {stage}; use 1 or 2")));
    }
    let config = RunConfig::load(config_path)?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| CoreError::io(config.output_dir.display().to_string(), e))?;
    let mut model = build_model(&config)?;
    let data = resolve_dataset(&config)?;
    log::info(format!(
        "training stage {stage}: {} train / {} val items, batch {}, {} epochs",
        data.train.len(),
        data.val.len(),
        config.train.batch_size,
        config.train.max_epochs
    ));

    match stage {
        1 => {
            let outcome = train_stage1(&mut model, &data, &config.train, config.seed)?;
            let meta = CheckpointMeta {
                stage: StageTag::Fme,
                config_fingerprint: config.fingerprint(),
                stage1_fingerprint: 0,
                epoch: outcome.best_epoch as u32,
                best_val: outcome.best_val,
            };
            let ckpt_path = config.output_dir.join("stage1.ckpt");
            save_checkpoint(&ckpt_path, &meta, &outcome.best_params, "fme.", Some(&outcome.optimizer))?;
            write_log_file(&config.output_dir.join("stage1_log.tsv"), &outcome)?;
            log::info(format!(
                "stage 1 done: best val {:.6e} at epoch {}; checkpoint {}",
                outcome.best_val,
                outcome.best_epoch,
                ckpt_path.display()
            ));
            Ok(())
        }
        2 => {
            let stage1_path = config
                .stage1_checkpoint
                .clone()
                .unwrap_or_else(|| config.output_dir.join("stage1.ckpt"));
            if !stage1_path.exists() {
                return Err(CoreError::Usage(format!(
                    "stage 2 needs the stage-1 checkpoint at {}; run `fdfnet train --stage 1 \
                     --config ...` first or set stage1_checkpoint in the config",
                    stage1_path.display()
                )));
            }
            let ckpt = load_checkpoint(&stage1_path)?;
            if ckpt.meta.stage != StageTag::Fme {
                return Err(CoreError::Usage(format!(
                    "{} is a '{}' checkpoint, expected stage-1 ('fme')",
                    stage1_path.display(),
                    ckpt.meta.stage.as_str()
                )));
            }
            check_fingerprint(&ckpt, &config, force)?;
            apply_to_store(&mut model.params, &ckpt)?;
            let stage1_fp = fingerprint_params(&model.params, "fme.");

            let mut outcome =
                train_stage2(&mut model, &data, &config.train, config.seed, config.clip_bound)?;
            // The stage-2 freeze is session state; persist the intrinsic
            // parameter/buffer flags instead.
            let fresh = build_model(&config)?;
            outcome.best_params.copy_trainability_from(&fresh.params);
            let meta = CheckpointMeta {
                stage: StageTag::Dsr,
                config_fingerprint: config.fingerprint(),
                stage1_fingerprint: stage1_fp,
                epoch: outcome.best_epoch as u32,
                best_val: outcome.best_val,
            };
            save_checkpoint(
                &config.output_dir.join("stage2.ckpt"),
                &meta,
                &outcome.best_params,
                "dsr.",
                Some(&outcome.optimizer),
            )?;
            let full_meta = CheckpointMeta { stage: StageTag::Full, ..meta };
            let full_path = config.output_dir.join("full.ckpt");
            save_checkpoint(&full_path, &full_meta, &outcome.best_params, "", None)?;
            write_log_file(&config.output_dir.join("stage2_log.tsv"), &outcome)?;
            log::info(format!(
                "stage 2 done: best val {:.6e} at epoch {}; full model {}",
                outcome.best_val,
                outcome.best_epoch,
                full_path.display()
            ));
            Ok(())
        }
        other => Err(CoreError::Usage(format!("unknown stage {other}; use 1 or 2"))),
    }
}

fn load_full_model(
    checkpoint: &Path,
    config: &RunConfig,
    force: bool,
) -> Result<FdfNet<f32>, CoreError> {
    let ckpt = load_checkpoint(checkpoint)?;
    if ckpt.meta.stage != StageTag::Full {
        return Err(CoreError::Usage(format!(
            "{} is a '{}' checkpoint; enhancement needs a 'full' checkpoint from stage-2 training",
            checkpoint.display(),
            ckpt.meta.stage.as_str()
        )));
    }
    check_fingerprint(&ckpt, config, force)?;
    let mut model = build_model(config)?;
    apply_to_store(&mut model.params, &ckpt)?;
    Ok(model)
}

pub fn enhance(
    input: &Path,
    checkpoint: &Path,
    output: Option<&Path>,
    streaming: bool,
    chunk: usize,
    config_path: Option<&Path>,
    force: bool,
) -> Result<(), CoreError> {
    let config = load_config(config_path)?;
    let model = load_full_model(checkpoint, &config, force)?;
    let (wave, format) = read_wav_with_format(input)?;
    let enhanced: Waveform = if streaming {
        log::debug(format!("streaming with chunk {chunk}"));
        enhance_streaming(&model, &wave, chunk)?
    } else {
        full_forward(&model, &wave)?
    };
    debug_assert_eq!(enhanced.len(), wave.len());
    let default_out = input.with_extension("enhanced.wav");
    let out_path: PathBuf = output.map(Path::to_path_buf).unwrap_or(default_out);
    write_wav(&out_path, &enhanced, format)?;
    log::info(format!("wrote {}", out_path.display()));
    Ok(())
}

pub fn eval(
    manifest_path: &Path,
    checkpoint: Option<&Path>,
    oracle: bool,
    config_path: Option<&Path>,
    force: bool,
) -> Result<(), CoreError> {
    let config = load_config(config_path)?;
    let manifest = DatasetManifest::load(manifest_path)?;
    let pairs = manifest.build_pairs(Split::Test)?;
    if pairs.is_empty() {
        return Err(CoreError::Usage("manifest has no test records".into()));
    }
    let model = match (oracle, checkpoint) {
        (true, _) => None,
        (false, Some(ckpt)) => Some(load_full_model(ckpt, &config, force)?),
        (false, None) => {
            return Err(CoreError::Usage(
                "eval needs --checkpoint, or --oracle for the mask-oracle baseline".into(),
            ))
        }
    };
    let frame = config.frame.to_frame_config()?;

    println!("item\tsi_sdr_noisy\tsi_sdr_enh\tsi_sdr_gain\tsnr_noisy\tsnr_enh\tsnr_gain");
    let mut sums = [0.0f64; 6];
    for (i, (clean, mixture)) in pairs.iter().enumerate() {
        let enhanced = match &model {
            Some(m) => full_forward(m, mixture)?,
            None => oracle_mask_only(mixture, clean, &frame, config.clip_bound)?,
        };
        let row = [
            si_sdr(mixture, clean),
            si_sdr(&enhanced, clean),
            si_sdr(&enhanced, clean) - si_sdr(mixture, clean),
            snr(mixture, clean),
            snr(&enhanced, clean),
            snr(&enhanced, clean) - snr(mixture, clean),
        ];
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
        println!(
            "{i}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            row[0], row[1], row[2], row[3], row[4], row[5]
        );
    }
    let n = pairs.len() as f64;
    println!(
        "mean\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
        sums[0] / n,
        sums[1] / n,
        sums[2] / n,
        sums[3] / n,
        sums[4] / n,
        sums[5] / n
    );
    Ok(())
}

pub fn inspect(path: &Path, config_path: Option<&Path>) -> Result<(), CoreError> {
    // A checkpoint starts with the magic bytes; anything else is treated as
    // a config file.
    let looks_like_checkpoint = fs::read(path)
        .map(|b| b.len() >= 4 && &b[0..4] == b"FDFC")
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;

    if looks_like_checkpoint {
        let ckpt = load_checkpoint(path)?;
        println!("checkpoint: {}", path.display());
        println!("stage: {}", ckpt.meta.stage.as_str());
        println!("config fingerprint: {:#018x}", ckpt.meta.config_fingerprint);
        if ckpt.meta.stage1_fingerprint != 0 {
            println!("stage-1 fingerprint: {:#018x}", ckpt.meta.stage1_fingerprint);
        }
        println!("best epoch: {}  best val loss: {:.6e}", ckpt.meta.epoch, ckpt.meta.best_val);
        let mut total = 0usize;
        for t in &ckpt.tensors {
            let n = t.value.numel();
            if t.trainable {
                total += n;
            }
            let tag = if t.trainable { "" } else { "  (buffer)" };
            println!("{:<28} {:>14?} {:>10}{}", t.name, t.value.shape(), n, tag);
        }
        println!("total trainable parameters: {total}");
        if let Some(opt) = &ckpt.optimizer {
            println!("optimizer state tensors: {}", opt.len());
        }
        return Ok(());
    }

    let config = match config_path {
        Some(_) => load_config(config_path)?,
        None => RunConfig::load(path)?,
    };
    let model = build_model(&config)?;
    let report = count_parameters(&model.params);
    println!("config fingerprint: {:#018x}", config.fingerprint());
    print!("{}", report.render());
    println!(
        "stage-1 parameters: {}   stage-2 parameters: {}",
        report.total_for_prefix("fme."),
        report.total_for_prefix("dsr.")
    );
    let fme_ladder = config.fme.freq_ladder();
    let dsr_ladder = config.dsr.freq_ladder();
    let fmt = |l: &[usize]| l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" -> ");
    println!("stage-1 frequency ladder: {}", fmt(&fme_ladder));
    println!("stage-2 frequency ladder: {}", fmt(&dsr_ladder));
    println!(
        "bottleneck interface: {} channels x {} bins = {} units",
        config.fme.encoder_channels.last().unwrap(),
        fme_ladder.last().unwrap(),
        config.fme.fc_units
    );
    Ok(())
}
