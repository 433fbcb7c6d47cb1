//! `PRDT`: magic | version u16 | scale_id u16 | n u32 | H u32 | W u32 | D u32 |
//! alpha f32 | eta f32 | epsilon f32 | epoch u32 | n*H*W*D f32 weights |
//! rng_len u32 | rng state bytes.
//!
//! The rng state is the shuffling stream of the training run (ChaCha8:
//! 32-byte seed, u64 stream, u128 word position), so a run can resume
//! exactly where the checkpoint was taken.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::binary::{to_u32, Reader, Writer};
use crate::error::{Error, Result};
use crate::grid::PrototypeSet;

pub const MAGIC: &[u8; 4] = b"PRDT";
const RNG_BLOB_LEN: usize = 32 + 8 + 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtoCheckpoint {
    pub protos: PrototypeSet,
    pub eta: f32,
    pub epsilon: f32,
    pub epoch: u32,
    pub rng: Vec<u8>,
}

pub fn rng_to_blob(rng: &ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(RNG_BLOB_LEN);
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    out
}

pub fn rng_from_blob(blob: &[u8]) -> Result<ChaCha8Rng> {
    if blob.len() != RNG_BLOB_LEN {
        return Err(Error::Corrupt(format!("rng state of {} bytes, expected {RNG_BLOB_LEN}", blob.len())));
    }
    let seed: [u8; 32] = blob[..32].try_into().expect("32 bytes");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(u64::from_le_bytes(blob[32..40].try_into().expect("8 bytes")));
    rng.set_word_pos(u128::from_le_bytes(blob[40..].try_into().expect("16 bytes")));
    Ok(rng)
}

pub fn encode_checkpoint(ck: &ProtoCheckpoint) -> Result<Vec<u8>> {
    let p = &ck.protos;
    let mut w = Writer::with_header(MAGIC);
    w.u16(p.scale_id());
    w.u32(to_u32(p.per_cell(), "n")?);
    w.u32(to_u32(p.height(), "height")?);
    w.u32(to_u32(p.width(), "width")?);
    w.u32(to_u32(p.dim(), "dim")?);
    w.f32(p.alpha());
    w.f32(ck.eta);
    w.f32(ck.epsilon);
    w.u32(ck.epoch);
    w.f32s(p.weights());
    w.u32(to_u32(ck.rng.len(), "rng state length")?);
    w.bytes(&ck.rng);
    Ok(w.finish())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ProtoCheckpoint> {
    let mut r = Reader::open(bytes, MAGIC)?;
    let scale_id = r.u16()?;
    let n = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let d = r.u32()? as usize;
    let alpha = r.f32()?;
    let eta = r.f32()?;
    let epsilon = r.f32()?;
    let epoch = r.u32()?;
    let count = n
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::Corrupt("prototype count overflows".into()))?;
    let weights = r.f32s(count)?;
    let rng_len = r.u32()? as usize;
    let rng = r.bytes(rng_len)?.to_vec();
    r.finish()?;
    for (name, v) in [("alpha", alpha), ("eta", eta), ("epsilon", epsilon)] {
        if !v.is_finite() {
            return Err(Error::Corrupt(format!("{name} is not finite")));
        }
    }
    let protos = PrototypeSet::new(n, h, w, d, alpha, scale_id, weights)?;
    Ok(ProtoCheckpoint {
        protos,
        eta,
        epsilon,
        epoch,
        rng,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<ProtoCheckpoint> {
    decode_checkpoint(&super::read_file(path)?)
}

pub fn write_checkpoint(path: &Path, ck: &ProtoCheckpoint) -> Result<()> {
    super::write_file(path, &encode_checkpoint(ck)?)
}
