//! Grayscale portable float maps.
//!
//! Rows are stored bottom to top. A negative scale means a little-endian
//! payload, a positive one big-endian. The magnitude of the scale is ignored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::RadianceMap;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<(&'a str, usize)> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, format!("missing {what}")));
        }
        let tok = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start as u64, format!("{what} is not ASCII")))?;
        Ok((tok, start))
    }
}

/// Parse a PFM from memory.
pub fn decode_pfm(bytes: &[u8]) -> Result<RadianceMap> {
    let mut cur = Cursor { bytes, pos: 0 };
    let (magic, at) = cur.token("magic")?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Error::Unsupported(
                "colour PFM (PF); only grayscale Pf is supported".into(),
            ))
        }
        other => {
            return Err(Error::format(
                at as u64,
                format!("bad magic `{}`", other.escape_debug()),
            ));
        }
    }
    let mut dim = |what: &str| -> Result<usize> {
        let (tok, at) = cur.token(what)?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(Error::format(
                at as u64,
                format!("{what} `{tok}` is not a positive integer"),
            )),
        }
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let (tok, at) = cur.token("scale")?;
    let scale: f64 = tok
        .parse()
        .map_err(|_| Error::format(at as u64, format!("scale `{tok}` is not a number")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(at as u64, "scale must be finite and non-zero"));
    }
    let little = scale < 0.0;
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos as u64, "header not terminated by whitespace"));
    }
    let data = cur.pos + 1;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(at as u64, "image dimensions overflow"))?;
    let needed = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(data))
        .ok_or_else(|| Error::format(at as u64, "image dimensions overflow"))?;
    if bytes.len() < needed {
        return Err(Error::format(
            bytes.len() as u64,
            format!("raster truncated: need {needed} bytes, have {}", bytes.len()),
        ));
    }
    if bytes.len() > needed {
        return Err(Error::format(needed as u64, "trailing bytes after raster"));
    }
    let mut flux = vec![0.0; count];
    for (i, chunk) in bytes[data..needed].chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("chunk of 4");
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let offset = (data + 4 * i) as u64;
        if v.is_nan() {
            return Err(Error::format(offset, "NaN pixel"));
        }
        if v.is_infinite() {
            return Err(Error::format(offset, "infinite pixel"));
        }
        if v < 0.0 {
            return Err(Error::format(offset, format!("negative pixel {v}")));
        }
        let (row, col) = (i / width, i % width);
        flux[(height - 1 - row) * width + col] = v as f64;
    }
    RadianceMap::new(width, height, flux)
}

/// Serialize as little-endian PFM. Values are narrowed to `f32`.
pub fn encode_pfm(map: &RadianceMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let header = format!("Pf\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + 4 * w * h);
    out.extend_from_slice(header.as_bytes());
    for row in map.flux().chunks_exact(w).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<RadianceMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

pub fn write_pfm(path: impl AsRef<Path>, map: &RadianceMap) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(map)).map_err(|e| Error::io(path, e))
}

/// Write raw values (no range checks beyond finiteness), e.g. weight maps.
pub fn write_pfm_values(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let map = RadianceMap::new(width, height, values.iter().map(|v| v.max(0.0)).collect())?;
    write_pfm(path, &map)
}
