//! Binary masks as P5 graymaps (0 or 255).

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::losses::{Mask, MaskKind};
use std::path::Path;

pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>> {
    if mask.kind() == MaskKind::Probability {
        return Err(Error::precondition("probability masks are stored as tensors, not graymaps"));
    }
    encode_raw(mask.width(), mask.height(), mask.data())
}

/// Encodes raw values; anything outside {0, 1} is rejected with its pixel index.
pub fn encode_raw(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != width * height {
        return Err(Error::shape("mask raster", width * height, values.len()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for (i, &v) in values.iter().enumerate() {
        out.push(if v == 0.0 {
            0
        } else if v == 1.0 {
            255
        } else {
            return Err(Error::precondition(format!(
                "binary mask value {v} at pixel {i} (row {}, col {})",
                i / width.max(1),
                i % width.max(1)
            )));
        });
    }
    Ok(out)
}

pub fn decode_mask(bytes: &[u8], kind: MaskKind, path: &Path) -> Result<Mask> {
    let bad = |d: String| Error::format(path, d);
    // Header: magic, width, height, maxval, each separated by whitespace; comments start with '#'.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad(format!("truncated header after {} fields", tokens.len())));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(bad(format!("bad magic '{}', expected P5", tokens[0])));
    }
    let num = |i: usize, what: &str| {
        tokens[i]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad {what} '{}'", tokens[i])))
    };
    let (w, h, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval != 255 {
        return Err(bad(format!("maxval {maxval}, expected 255")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing separator after header".into()));
    }
    let body = &bytes[pos + 1..];
    let expected = w
        .checked_mul(h)
        .ok_or_else(|| bad("raster dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(bad(format!(
            "raster size mismatch: expected {expected} bytes, got {}",
            body.len()
        )));
    }
    let mut data = Vec::with_capacity(expected);
    for (i, &b) in body.iter().enumerate() {
        data.push(match b {
            0 => 0.0,
            255 => 1.0,
            v => return Err(bad(format!("non-binary value {v} at pixel {i}"))),
        });
    }
    Mask::new(w, h, kind, data)
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    write_atomic(path, &encode_mask(mask)?)
}

pub fn read_mask(path: &Path, kind: MaskKind) -> Result<Mask> {
    decode_mask(&read_bytes(path)?, kind, path)
}
