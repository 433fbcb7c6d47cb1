//! Checkpoint file naming and lookup.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use otproto::io::{read_checkpoint, ProtoCheckpoint};
use otproto::PrototypeSet;

use crate::BankChoice;

pub fn bank_name(alpha: f32) -> &'static str {
    if alpha == 0.0 {
        "global"
    } else {
        "local"
    }
}

pub fn checkpoint_path(dir: &Path, scale: u16, alpha: f32) -> PathBuf {
    dir.join(format!("s{scale}_{}.prdt", bank_name(alpha)))
}

/// The global and local bank of one scale.
#[derive(Debug, Clone)]
pub struct ScaleBanks {
    pub scale: u16,
    pub global: PrototypeSet,
    pub local: PrototypeSet,
}

impl ScaleBanks {
    pub fn pick(&self, choice: BankChoice) -> (&PrototypeSet, &PrototypeSet) {
        match choice {
            BankChoice::Both => (&self.global, &self.local),
            BankChoice::Global => (&self.global, &self.global),
            BankChoice::Local => (&self.local, &self.local),
        }
    }

    pub fn both(&self) -> [&PrototypeSet; 2] {
        [&self.global, &self.local]
    }
}

pub fn load_checkpoint(dir: &Path, scale: u16, alpha_is_zero: bool) -> Result<ProtoCheckpoint> {
    let path = checkpoint_path(dir, scale, if alpha_is_zero { 0.0 } else { 1.0 });
    if !path.is_file() {
        bail!(
            "no {} checkpoint for scale {scale} (expected {})",
            if alpha_is_zero { "global" } else { "local" },
            path.display()
        );
    }
    let ck = read_checkpoint(&path).with_context(|| format!("reading {}", path.display()))?;
    if ck.protos.scale_id() != scale || (ck.protos.alpha() == 0.0) != alpha_is_zero {
        bail!(
            "{} holds scale {} alpha {}, expected scale {scale}",
            path.display(),
            ck.protos.scale_id(),
            ck.protos.alpha()
        );
    }
    Ok(ck)
}

/// Loads both banks of every scale in `scales`.
pub fn load_banks(dir: &Path, scales: &[u16]) -> Result<Vec<ScaleBanks>> {
    scales
        .iter()
        .map(|&scale| {
            Ok(ScaleBanks {
                scale,
                global: load_checkpoint(dir, scale, true)?.protos,
                local: load_checkpoint(dir, scale, false)?.protos,
            })
        })
        .collect()
}
