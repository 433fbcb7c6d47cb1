use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use otproto::io::text::{assignments_tsv, provenance_tsv, restore_tsv};
use otproto::io::{DatasetManifest, Sample, Split};
use otproto::score::{reconstruct_prototypes, restore_image_patches, Provenance};
use otproto::{score_grid, FeatureGrid, PrototypeSet, ZeroVectorPolicy};

use crate::banks::{bank_name, load_banks};

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoints: PathBuf,
    /// Output directory for provenance_s<scale>_<bank>.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "zero_vector", default_value_t = ZeroVectorPolicy::Error)]
    pub zero_vector: ZeroVectorPolicy,
}

#[derive(Args, Debug)]
pub struct AssignArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoints: PathBuf,
    /// Output directory for <id>_s<scale>_<bank>.tsv and the restore recipes.
    #[arg(long)]
    pub out: PathBuf,
    /// Sample ids to export (repeatable); all test samples by default.
    #[arg(long)]
    pub sample: Vec<String>,
    #[arg(long = "zero_vector", default_value_t = ZeroVectorPolicy::Error)]
    pub zero_vector: ZeroVectorPolicy,
}

fn training_grids(manifest: &DatasetManifest, scale: u16) -> Result<Vec<(String, FeatureGrid)>> {
    manifest
        .split(Split::Train)
        .map(|s| Ok((s.id.clone(), manifest.load_grid(s, scale)?)))
        .collect()
}

fn provenance(
    protos: &PrototypeSet,
    train: &[(String, FeatureGrid)],
    policy: ZeroVectorPolicy,
) -> otproto::Result<Vec<Provenance>> {
    let refs: Vec<(&str, &FeatureGrid)> = train.iter().map(|(id, g)| (id.as_str(), g)).collect();
    reconstruct_prototypes(protos, &refs, policy)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run_protos(args: ExportArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    for b in load_banks(&args.checkpoints, &manifest.scales())? {
        let train = training_grids(&manifest, b.scale)?;
        for protos in b.both() {
            let prov = provenance(protos, &train, args.zero_vector)?;
            let name = format!("provenance_s{}_{}.tsv", b.scale, bank_name(protos.alpha()));
            write(&args.out.join(name), &provenance_tsv(protos, &prov))?;
        }
    }
    println!("export-protos done out={}", args.out.display());
    Ok(())
}

pub fn run_assignments(args: AssignArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let samples: Vec<&Sample> = if args.sample.is_empty() {
        manifest.split(Split::Test).collect()
    } else {
        args.sample
            .iter()
            .map(|id| match manifest.sample(id) {
                Some(s) => Ok(s),
                None => bail!("unknown sample {id:?}"),
            })
            .collect::<Result<_>>()?
    };
    for b in load_banks(&args.checkpoints, &manifest.scales())? {
        let train = training_grids(&manifest, b.scale)?;
        for protos in b.both() {
            let prov = provenance(protos, &train, args.zero_vector)?;
            let bank = bank_name(protos.alpha());
            for s in &samples {
                let grid = manifest.load_grid(s, b.scale)?;
                let (_, map) = score_grid(&grid, protos, args.zero_vector)?;
                let stem = format!("{}_s{}_{bank}", s.id, b.scale);
                write(&args.out.join(format!("{stem}.tsv")), &assignments_tsv(&map, protos))?;
                let recipe = restore_image_patches(&map, &prov)?;
                write(&args.out.join(format!("{stem}_restore.tsv")), &restore_tsv(&recipe))?;
            }
        }
    }
    println!("assignments done samples={} out={}", samples.len(), args.out.display());
    Ok(())
}
