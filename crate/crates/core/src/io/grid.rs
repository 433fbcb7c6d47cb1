//! `FGRD`: magic | version u16 | scale_id u16 | H u32 | W u32 | D u32 |
//! H*W*D f32, row-major with the feature index innermost.

use std::path::Path;

use super::binary::{to_u32, Reader, Writer};
use crate::error::Result;
use crate::grid::FeatureGrid;

pub const MAGIC: &[u8; 4] = b"FGRD";
pub const HEADER_LEN: usize = 20;

pub fn encode_grid(grid: &FeatureGrid) -> Result<Vec<u8>> {
    let mut w = Writer::with_header(MAGIC);
    w.u16(grid.scale_id());
    w.u32(to_u32(grid.height(), "height")?);
    w.u32(to_u32(grid.width(), "width")?);
    w.u32(to_u32(grid.dim(), "dim")?);
    w.f32s(grid.features());
    Ok(w.finish())
}

pub fn decode_grid(bytes: &[u8]) -> Result<FeatureGrid> {
    let mut r = Reader::open(bytes, MAGIC)?;
    let scale_id = r.u16()?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let d = r.u32()? as usize;
    let count = h.checked_mul(w).and_then(|v| v.checked_mul(d));
    r.expect_payload(count.and_then(|c| c.checked_mul(4)))?;
    let features = r.f32s(count.unwrap_or(0))?;
    r.finish()?;
    FeatureGrid::new(h, w, d, scale_id, features)
}

pub fn read_grid(path: &Path) -> Result<FeatureGrid> {
    decode_grid(&super::read_file(path)?)
}

pub fn write_grid(path: &Path, grid: &FeatureGrid) -> Result<()> {
    super::write_file(path, &encode_grid(grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::grid::make_feature_grid;

    #[test]
    fn minimal_file() {
        let g = make_feature_grid(&[0.0], 1, 1, 1, 2).unwrap();
        let bytes = encode_grid(&g).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(&bytes[..4], b"FGRD");
        assert_eq!(&bytes[4..8], &[1, 0, 2, 0]);
        assert_eq!(decode_grid(&bytes).unwrap(), g);
    }

    #[test]
    fn corrupt_magic() {
        let g = make_feature_grid(&[1.0], 1, 1, 1, 2).unwrap();
        let mut bytes = encode_grid(&g).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_grid(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn version_and_length_errors() {
        let g = make_feature_grid(&[1.0, 2.0], 1, 2, 1, 3).unwrap();
        let bytes = encode_grid(&g).unwrap();
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_grid(&v2), Err(Error::BadVersion { found: 2, .. })));
        assert!(matches!(decode_grid(&bytes[..bytes.len() - 1]), Err(Error::TruncatedPayload { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_grid(&long), Err(Error::TruncatedPayload { .. })));
        let mut nan = bytes;
        nan[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_grid(&nan), Err(Error::NonFiniteFloat { index: 0 })));
    }
}
