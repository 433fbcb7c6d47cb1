//! `AMAP`: magic | version u16 | H u32 | W u32 | image_score f32 | H*W f32.

use std::path::Path;

use super::binary::{to_u32, Reader, Writer};
use crate::error::{Error, Result};
use crate::score::AnomalyMap;

pub const MAGIC: &[u8; 4] = b"AMAP";

pub fn encode_map(map: &AnomalyMap) -> Result<Vec<u8>> {
    let mut w = Writer::with_header(MAGIC);
    w.u32(to_u32(map.height(), "height")?);
    w.u32(to_u32(map.width(), "width")?);
    w.f32(map.image_score());
    w.f32s(map.scores());
    Ok(w.finish())
}

pub fn decode_map(bytes: &[u8]) -> Result<AnomalyMap> {
    let mut r = Reader::open(bytes, MAGIC)?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let image_score = r.f32()?;
    let count = h.checked_mul(w);
    r.expect_payload(count.and_then(|c| c.checked_mul(4)))?;
    let scores = r.f32s(count.unwrap_or(0))?;
    r.finish()?;
    let map = AnomalyMap::new(h, w, scores)?;
    if map.image_score().to_bits() != image_score.to_bits() {
        return Err(Error::Corrupt(format!(
            "stored image score {image_score} differs from map maximum {}",
            map.image_score()
        )));
    }
    Ok(map)
}

pub fn read_map(path: &Path) -> Result<AnomalyMap> {
    decode_map(&super::read_file(path)?)
}

pub fn write_map(path: &Path, map: &AnomalyMap) -> Result<()> {
    super::write_file(path, &encode_map(map)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_score_check() {
        let m = AnomalyMap::new(2, 2, vec![0.0, 0.5, 1.25, 0.1]).unwrap();
        let bytes = encode_map(&m).unwrap();
        assert_eq!(decode_map(&bytes).unwrap(), m);
        let mut bad = bytes;
        bad[14..18].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(decode_map(&bad), Err(Error::Corrupt(_))));
    }
}
