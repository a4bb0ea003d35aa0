//! Binary vector-map container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "DCMEVMAP"
//! 8       4     version, u32 LE = 1
//! 12      4     height, u32 LE
//! 16      4     width, u32 LE
//! 20      8*N   (dx, dy) f32 LE pairs, row-major, N = height * width
//! ```

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{DisplacementVector, GridDims, VectorMap};

pub const MAGIC: &[u8; 8] = b"DCMEVMAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

pub fn write_vecmap<W: Write>(vm: &VectorMap, mut out: W) -> Result<()> {
    let dims = vm.dims();
    let (h, w) = (
        u32::try_from(dims.height).map_err(|_| Error::Overflow)?,
        u32::try_from(dims.width).map_err(|_| Error::Overflow)?,
    );
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * dims.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&w.to_le_bytes());
    for v in vm.as_slice() {
        buf.extend_from_slice(&v.dx.to_le_bytes());
        buf.extend_from_slice(&v.dy.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn vecmap_to_bytes(vm: &VectorMap) -> Vec<u8> {
    let mut buf = Vec::new();
    write_vecmap(vm, &mut buf).expect("writing to memory");
    buf
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn f32_at(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn read_vecmap(bytes: &[u8]) -> Result<VectorMap> {
    let n = bytes.len().min(MAGIC.len());
    if bytes[..n] != MAGIC[..n] {
        return Err(Error::NotAVecmap("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!(
            "{} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(Error::NotAVecmap(format!("unsupported version {version}")));
    }
    let (h, w) = (u32_at(bytes, 12) as usize, u32_at(bytes, 16) as usize);
    let dims = GridDims::new(h, w)
        .map_err(|_| Error::NotAVecmap(format!("invalid dimensions {h}x{w}")))?;
    let payload = &bytes[HEADER_LEN..];
    let expected = (dims.len() as u64).checked_mul(8);
    match expected {
        Some(e) if (payload.len() as u64) < e => {
            return Err(Error::Truncated(format!(
                "payload has {} of {e} bytes",
                payload.len()
            )))
        }
        None => {
            return Err(Error::Truncated(format!(
                "payload for {dims} is unaddressable"
            )))
        }
        Some(e) if payload.len() as u64 > e => {
            return Err(Error::NotAVecmap(format!(
                "{} trailing bytes",
                payload.len() as u64 - e
            )))
        }
        _ => {}
    }
    let mut vectors = Vec::with_capacity(dims.len());
    for index in 0..dims.len() {
        let v = DisplacementVector::new(f32_at(payload, 8 * index), f32_at(payload, 8 * index + 4));
        if !v.is_finite() {
            return Err(Error::CorruptComponents { index });
        }
        vectors.push(v);
    }
    VectorMap::from_vec(dims, vectors)
}
