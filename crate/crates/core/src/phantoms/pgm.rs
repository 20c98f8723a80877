//! Portable graymap (P2/P5) masks.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Parses a PGM image into a mask indexed `[x, z]` (image columns are x,
/// rows are z). A pixel is set when it reaches half the maximum gray value.
pub fn parse_pgm(bytes: &[u8]) -> std::result::Result<Array2<bool>, String> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> std::result::Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let width = num(token(&mut pos)?)?;
    let height = num(token(&mut pos)?)?;
    let maxval = num(token(&mut pos)?)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(format!("bad dimensions {width}x{height} or maxval {maxval}"));
    }
    let n = width * height;
    let levels: Vec<usize> = match magic.as_str() {
        "P2" => (0..n).map(|_| token(&mut pos).and_then(num)).collect::<std::result::Result<_, _>>()?,
        "P5" => {
            // exactly one whitespace byte separates header and raster
            pos += 1;
            let wide = maxval > 255;
            let need = n * if wide { 2 } else { 1 };
            let data = bytes.get(pos..pos + need).ok_or("raster is truncated")?;
            if wide {
                data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize).collect()
            } else {
                data.iter().map(|&b| b as usize).collect()
            }
        }
        other => return Err(format!("unsupported magic {other:?}")),
    };
    Ok(Array2::from_shape_fn((width, height), |(x, z)| 2 * levels[z * width + x] >= maxval))
}

pub fn read_pgm(path: &Path) -> Result<Array2<bool>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| Error::format(path, reason))
}

/// Binary P5 encoding of a mask (255 for set pixels).
pub fn encode_pgm(mask: &Array2<bool>) -> Vec<u8> {
    let (w, h) = mask.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for z in 0..h {
        for x in 0..w {
            out.push(if mask[[x, z]] { 255 } else { 0 });
        }
    }
    out
}
