use std::fs::{File, OpenOptions};
use std::io::Write;

use anyhow::{bail, Context, Result};
use otproto::io::{read_config, render_config, rng_from_blob, rng_to_blob, write_checkpoint, DatasetManifest, ProtoCheckpoint};
use otproto::learn::resume;
use otproto::{EpochStats, ScaleData, TrainConfig, TrainState};

use crate::banks::{bank_name, checkpoint_path, load_checkpoint};
use crate::TrainArgs;

/// Line-oriented training log. Every line starts with `train ` followed by an
/// event word and `key=value` fields.
struct Log {
    file: File,
}

impl Log {
    fn line(&mut self, text: String) -> Result<()> {
        println!("{text}");
        writeln!(self.file, "{text}").context("writing train.log")
    }
}

fn write_checkpoints(args: &TrainArgs, cfg: &TrainConfig, state: &TrainState) -> otproto::Result<()> {
    let rng = rng_to_blob(state.rng());
    for bank in state.banks() {
        let ck = ProtoCheckpoint {
            protos: bank.clone(),
            eta: cfg.eta as f32,
            epsilon: cfg.epsilon as f32,
            epoch: state.epoch() as u32,
            rng: rng.clone(),
        };
        write_checkpoint(&checkpoint_path(&args.out, bank.scale_id(), bank.alpha()), &ck)?;
    }
    Ok(())
}

fn resume_state(args: &TrainArgs, cfg: &TrainConfig, dataset: &[ScaleData]) -> Result<TrainState> {
    let mut banks = Vec::new();
    let mut epoch = None;
    let mut rng = None;
    for scale in dataset {
        for zero in [true, false] {
            let ck = load_checkpoint(&args.out, scale.scale_id, zero)?;
            if !zero && (ck.protos.alpha() as f64 - cfg.alpha_local).abs() > 1e-6 {
                bail!(
                    "checkpoint alpha {} differs from alpha_local {}",
                    ck.protos.alpha(),
                    cfg.alpha_local
                );
            }
            if *epoch.get_or_insert(ck.epoch) != ck.epoch || *rng.get_or_insert(ck.rng.clone()) != ck.rng {
                bail!("checkpoints in {} come from different epochs", args.out.display());
            }
            banks.push(ck.protos);
        }
    }
    let rng = rng_from_blob(&rng.unwrap_or_default())?;
    Ok(TrainState::from_parts(banks, epoch.unwrap_or(0) as usize, rng))
}

fn epoch_line(s: &EpochStats) -> String {
    format!(
        "train epoch epoch={} scale={} bank={} alpha={} mean_cost={} converged_fraction={} batches={}",
        s.epoch,
        s.scale_id,
        bank_name(s.alpha),
        s.alpha,
        s.mean_cost,
        s.converged_fraction,
        s.batches
    )
}

pub fn run(args: TrainArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let mut cfg = match &args.config {
        Some(path) => read_config(path)?,
        None => TrainConfig::default(),
    };
    args.params.apply(&mut cfg);
    cfg.validate()?;

    let dataset = manifest.load_training_set()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    std::fs::write(args.out.join("config.txt"), render_config(&cfg)).context("writing config.txt")?;

    let mut state = if args.resume {
        resume_state(&args, &cfg, &dataset)?
    } else {
        TrainState::new(&dataset, &cfg)?
    };
    let log_path = args.out.join("train.log");
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(args.resume)
        .truncate(!args.resume)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    let mut log = Log { file };
    let scales: Vec<String> = dataset.iter().map(|s| s.scale_id.to_string()).collect();
    log.line(format!(
        "train start category={} scales={} samples={} banks={} epoch={} epochs={} seed={}",
        manifest.category,
        scales.join(","),
        dataset[0].grids.len(),
        state.banks().len(),
        state.epoch(),
        cfg.epochs,
        cfg.rng_seed
    ))?;

    let mut log_err = None;
    resume(&mut state, &dataset, &cfg, |st, stats| {
        for s in stats {
            if let Err(e) = log.line(epoch_line(s)) {
                log_err.get_or_insert(e);
            }
        }
        write_checkpoints(&args, &cfg, st)
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    write_checkpoints(&args, &cfg, &state)?;
    log.line(format!("train done epoch={} banks={}", state.epoch(), state.banks().len()))?;
    Ok(())
}
