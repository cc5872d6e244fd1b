//! `HVA1` binary layout (little-endian):
//!
//! ```text
//! magic "HVA1" | u32 version = 1 | u32 width | u32 height | u32 n_windows
//! | u8 variant (0 integration, 1 disintegration)
//! | n_windows x height x width f32, row-major
//! ```

use std::io::{Read, Write};

use super::{AttentionMap, HvaError, Variant};

pub const HVA_MAGIC: [u8; 4] = *b"HVA1";
pub const HVA_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 1;

/// Write the maps of one variant. All maps must share dims and variant.
pub fn write_hva<W: Write>(maps: &[AttentionMap], mut sink: W) -> Result<(), HvaError> {
    let first = maps
        .first()
        .ok_or_else(|| HvaError::Invalid("no maps to write".into()))?;
    if maps
        .iter()
        .any(|m| (m.height, m.width, m.variant) != (first.height, first.width, first.variant))
    {
        return Err(HvaError::Invalid("maps differ in size or variant".into()));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + maps.len() * first.grid.len() * 4);
    buf.extend_from_slice(&HVA_MAGIC);
    for v in [
        HVA_VERSION,
        first.width as u32,
        first.height as u32,
        maps.len() as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(first.variant.code());
    for m in maps {
        for &v in &m.grid {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HvaError> {
        if self.bytes.len() - self.pos < n {
            return Err(HvaError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.bytes.len() - self.pos,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, HvaError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Read one HVA file; map `window_index` follows storage order.
pub fn read_hva<R: Read>(mut source: R) -> Result<Vec<AttentionMap>, HvaError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    let magic = cur.take(4)?;
    if magic != HVA_MAGIC {
        return Err(HvaError::BadMagic {
            offset: 0,
            found: magic.to_vec(),
        });
    }
    let version_offset = cur.pos;
    let version = cur.u32()?;
    if version != HVA_VERSION {
        return Err(HvaError::Version {
            offset: version_offset,
            found: version,
        });
    }
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let n_windows = cur.u32()? as usize;
    let variant_offset = cur.pos;
    let code = cur.take(1)?[0];
    let variant = Variant::from_code(code).ok_or(HvaError::BadVariant {
        offset: variant_offset,
        found: code,
    })?;
    if width == 0 || height == 0 || n_windows == 0 {
        return Err(HvaError::Invalid(format!(
            "header declares {n_windows} windows of {width}x{height}"
        )));
    }
    let mut maps = Vec::with_capacity(n_windows);
    for t in 0..n_windows {
        let raw = cur.take(width * height * 4)?;
        let grid = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        maps.push(AttentionMap {
            height,
            width,
            grid,
            variant,
            window_index: t,
        });
    }
    if cur.pos != bytes.len() {
        return Err(HvaError::TrailingBytes {
            offset: cur.pos,
            extra: bytes.len() - cur.pos,
        });
    }
    Ok(maps)
}
