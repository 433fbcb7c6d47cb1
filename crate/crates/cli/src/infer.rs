use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use otproto::io::{text::scores_tsv, write_map, DatasetManifest, Sample, Split};
use otproto::score::gaussian_smooth;
use otproto::{aggregate, score_grid, AnomalyMap, ScaleFields, ZeroVectorPolicy};
use rayon::prelude::*;

use crate::banks::{load_banks, ScaleBanks};
use crate::BankChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Test,
    Train,
    All,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the training checkpoints.
    #[arg(long)]
    pub checkpoints: PathBuf,
    /// Output directory: maps/<id>.amap and scores.tsv.
    #[arg(long)]
    pub out: PathBuf,
    /// Map height in pixels.
    #[arg(long = "image_height", default_value_t = 224)]
    pub image_height: usize,
    /// Map width in pixels.
    #[arg(long = "image_width", default_value_t = 224)]
    pub image_width: usize,
    /// Gaussian smoothing of the final map, 0 = off.
    #[arg(long = "smooth_sigma", default_value_t = 0.0)]
    pub smooth_sigma: f64,
    #[arg(long, value_enum, default_value_t = BankChoice::Both)]
    pub bank: BankChoice,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    #[arg(long = "zero_vector", default_value_t = ZeroVectorPolicy::Error)]
    pub zero_vector: ZeroVectorPolicy,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

/// Anomaly map of one sample.
pub fn infer_sample(
    manifest: &DatasetManifest,
    sample: &Sample,
    banks: &[ScaleBanks],
    args: &InferArgs,
) -> otproto::Result<AnomalyMap> {
    let mut fields = Vec::with_capacity(banks.len());
    for b in banks {
        let grid = manifest.load_grid(sample, b.scale)?;
        let (g, l) = b.pick(args.bank);
        let (global, _) = score_grid(&grid, g, args.zero_vector)?;
        let (local, _) = score_grid(&grid, l, args.zero_vector)?;
        fields.push(ScaleFields { global, local });
    }
    let map = aggregate(&fields, args.image_height, args.image_width)?;
    if args.smooth_sigma > 0.0 {
        gaussian_smooth(&map, args.smooth_sigma)
    } else {
        Ok(map)
    }
}

pub fn run(args: InferArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let banks = load_banks(&args.checkpoints, &manifest.scales())?;
    let samples: Vec<&Sample> = manifest
        .samples
        .iter()
        .filter(|s| match args.split {
            SplitChoice::Test => s.split == Split::Test,
            SplitChoice::Train => s.split == Split::Train,
            SplitChoice::All => true,
        })
        .collect();

    let maps: Vec<AnomalyMap> = samples
        .par_iter()
        .map(|s| infer_sample(&manifest, s, &banks, &args).with_context(|| format!("sample {}", s.id)))
        .collect::<Result<_>>()?;

    let map_dir = args.out.join("maps");
    for (s, map) in samples.iter().zip(&maps) {
        write_map(&map_dir.join(format!("{}.amap", s.id)), map)?;
    }
    let table = scores_tsv(samples.iter().zip(&maps).map(|(s, m)| (s.id.as_str(), m.image_score())));
    std::fs::write(args.out.join("scores.tsv"), &table).context("writing scores.tsv")?;
    println!("infer done images={} out={}", maps.len(), args.out.display());
    Ok(())
}
