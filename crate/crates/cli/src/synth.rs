use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::Args;
use otproto::io::synth::{synth_dataset, SynthScale, SynthSpec};
use otproto::io::AnomalyTag;

/// `scale_id:HxW`, e.g. `2:8x8`.
#[derive(Debug, Clone, Copy)]
pub struct ScaleArg(SynthScale);

impl FromStr for ScaleArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected scale_id:HxW, got {s:?}");
        let (id, dims) = s.split_once(':').ok_or_else(bad)?;
        let (h, w) = dims.split_once('x').ok_or_else(bad)?;
        Ok(ScaleArg(SynthScale {
            scale_id: id.trim().parse().map_err(|_| bad())?,
            height: h.trim().parse().map_err(|_| bad())?,
            width: w.trim().parse().map_err(|_| bad())?,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Logical,
    Structural,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; receives manifest.toml, grids/ and masks/.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "synth")]
    pub category: String,
    /// Number of cluster means per scale.
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    /// Scales as scale_id:HxW, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2:8x8")]
    pub scales: Vec<ScaleArg>,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Per-entry Gaussian noise std.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Anomaly kinds to plant, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "logical")]
    pub kinds: Vec<KindArg>,
    #[arg(long, default_value_t = 20)]
    pub train: usize,
    #[arg(long = "test_good", default_value_t = 5)]
    pub test_good: usize,
    #[arg(long = "test_per_kind", default_value_t = 5)]
    pub test_per_kind: usize,
    /// Anomaly block side in cells of the coarsest scale.
    #[arg(long, default_value_t = 2)]
    pub block: usize,
    /// Mask height in pixels (matches infer's default).
    #[arg(long = "image_height", default_value_t = 224)]
    pub image_height: usize,
    /// Mask width in pixels (matches infer's default).
    #[arg(long = "image_width", default_value_t = 224)]
    pub image_width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        category: args.category,
        clusters: args.clusters,
        scales: args.scales.iter().map(|s| s.0).collect(),
        dim: args.dim,
        noise: args.noise,
        kinds: args
            .kinds
            .iter()
            .map(|k| match k {
                KindArg::Logical => AnomalyTag::Logical,
                KindArg::Structural => AnomalyTag::Structural,
            })
            .collect(),
        train: args.train,
        test_good: args.test_good,
        test_per_kind: args.test_per_kind,
        block: args.block,
        image_height: args.image_height,
        image_width: args.image_width,
        seed: args.seed,
    };
    let manifest = synth_dataset(&spec, &args.out)?;
    println!(
        "synth done samples={} manifest={}",
        manifest.samples.len(),
        args.out.join("manifest.toml").display()
    );
    Ok(())
}
