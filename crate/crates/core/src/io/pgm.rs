//! Binary PGM (P5). Label maps use maxval 65535 with big-endian samples;
//! 8-bit renders use maxval 255.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDims, InstanceLabelMap};

fn header(dims: GridDims, maxval: u32) -> Vec<u8> {
    format!("P5\n{} {}\n{}\n", dims.width, dims.height, maxval).into_bytes()
}

pub fn write_labelmap<W: Write>(lm: &InstanceLabelMap, mut out: W) -> Result<()> {
    let mut buf = header(lm.dims(), 65535);
    buf.reserve(2 * lm.as_slice().len());
    for &id in lm.as_slice() {
        buf.extend_from_slice(&id.to_be_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn labelmap_to_bytes(lm: &InstanceLabelMap) -> Vec<u8> {
    let mut buf = Vec::new();
    write_labelmap(lm, &mut buf).expect("writing to memory");
    buf
}

pub fn write_pgm8<W: Write>(img: &Grid<u8>, mut out: W) -> Result<()> {
    let mut buf = header(img.dims(), 255);
    buf.extend_from_slice(img.as_slice());
    out.write_all(&buf)?;
    Ok(())
}

struct Header {
    dims: GridDims,
    maxval: u32,
    data_offset: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadPgm(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(bad(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| bad(format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if !bytes.starts_with(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(bad("missing whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    let dims = usize::try_from(height)
        .ok()
        .zip(usize::try_from(width).ok())
        .and_then(|(h, w)| GridDims::new(h, w).ok())
        .ok_or_else(|| bad(format!("invalid dimensions {width}x{height}")))?;
    Ok(Header {
        dims,
        maxval: maxval as u32,
        data_offset: cur.pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], h: &Header, bytes_per_sample: u64) -> Result<&'a [u8]> {
    let data = &bytes[h.data_offset..];
    let expected = (h.dims.len() as u64)
        .checked_mul(bytes_per_sample)
        .ok_or_else(|| bad("payload size overflows"))?;
    if (data.len() as u64) < expected {
        return Err(bad(format!(
            "truncated: {} of {expected} sample bytes",
            data.len()
        )));
    }
    if data.len() as u64 > expected {
        return Err(bad(format!(
            "{} trailing bytes",
            data.len() as u64 - expected
        )));
    }
    Ok(data)
}

/// Read a 16-bit label map. Only maxval 65535 is accepted.
pub fn read_labelmap(bytes: &[u8]) -> Result<InstanceLabelMap> {
    let h = parse_header(bytes)?;
    if h.maxval != 65535 {
        return Err(Error::UnsupportedDepth(h.maxval));
    }
    let data = payload(bytes, &h, 2)?;
    let ids = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Grid::from_vec(h.dims, ids)
}

/// Read an 8-bit PGM (maxval <= 255).
pub fn read_pgm8(bytes: &[u8]) -> Result<Grid<u8>> {
    let h = parse_header(bytes)?;
    if h.maxval > 255 {
        return Err(Error::UnsupportedDepth(h.maxval));
    }
    let data = payload(bytes, &h, 1)?;
    Grid::from_vec(h.dims, data.to_vec())
}
