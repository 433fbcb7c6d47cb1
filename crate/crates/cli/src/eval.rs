use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use otproto::io::{read_map, DatasetManifest, Mask, Sample, Split};
use otproto::report::{evaluate, EvalItem, DEFAULT_FPR_CAP};
use rayon::prelude::*;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding <id>.amap for every test sample.
    #[arg(long)]
    pub maps: PathBuf,
    /// Output directory for report.txt and report.kv.
    #[arg(long)]
    pub out: PathBuf,
    /// FPR limit of the sPRO integral.
    #[arg(long = "fpr_cap", default_value_t = DEFAULT_FPR_CAP)]
    pub fpr_cap: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

fn load_item(manifest: &DatasetManifest, sample: &Sample, args: &EvalArgs) -> Result<EvalItem> {
    let path = args.maps.join(format!("{}.amap", sample.id));
    let map = read_map(&path).with_context(|| format!("reading {}", path.display()))?;
    let mask = match manifest.load_mask(sample)? {
        Some(m) => m,
        None => Mask::new(map.height(), map.width(), vec![0; map.height() * map.width()])?,
    };
    let regions = manifest.regions(sample, &mask)?;
    Ok(EvalItem {
        id: sample.id.clone(),
        tag: sample.tag(),
        map,
        mask,
        regions,
    })
}

pub fn run(args: EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let samples: Vec<&Sample> = manifest.split(Split::Test).collect();
    let items: Vec<EvalItem> = samples
        .par_iter()
        .map(|s| load_item(&manifest, s, &args).with_context(|| format!("sample {}", s.id)))
        .collect::<Result<_>>()?;
    let report = evaluate(&manifest.category, &items, args.fpr_cap)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let text = report.to_text();
    std::fs::write(args.out.join("report.txt"), &text).context("writing report.txt")?;
    std::fs::write(args.out.join("report.kv"), report.to_kv()).context("writing report.kv")?;
    print!("{text}");
    Ok(())
}
