//! `AMSK`: magic | version u16 | H u32 | W u32 | H*W u8.
//!
//! 0 is normal, 255 anomalous; 1..=254 label explicit regions.

use std::path::Path;

use super::binary::{to_u32, Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AMSK";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDim("mask"));
        }
        if pixels.len() != height * width {
            return Err(Error::dims("mask pixels", height * width, pixels.len()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn is_anomalous(&self, pixel: usize) -> bool {
        self.pixels[pixel] != 0
    }

    pub fn anomalous_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>> {
    let mut w = Writer::with_header(MAGIC);
    w.u32(to_u32(mask.height, "height")?);
    w.u32(to_u32(mask.width, "width")?);
    w.bytes(&mask.pixels);
    Ok(w.finish())
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let mut r = Reader::open(bytes, MAGIC)?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let count = h.checked_mul(w);
    r.expect_payload(count)?;
    let pixels = r.bytes(count.unwrap_or(0))?.to_vec();
    r.finish()?;
    Mask::new(h, w, pixels)
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask(&super::read_file(path)?)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    super::write_file(path, &encode_mask(mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_errors() {
        let m = Mask::new(2, 3, vec![0, 255, 0, 7, 0, 0]).unwrap();
        let bytes = encode_mask(&m).unwrap();
        assert_eq!(bytes.len(), 4 + 2 + 8 + 6);
        assert_eq!(decode_mask(&bytes).unwrap(), m);
        assert_eq!(m.anomalous_count(), 2);
        assert!(matches!(decode_mask(&bytes[..15]), Err(Error::TruncatedPayload { .. })));
        let mut bad = bytes;
        bad[3] = b'Q';
        assert!(matches!(decode_mask(&bad), Err(Error::BadMagic { .. })));
    }
}
