//! 8-bit grayscale netpbm (PGM) codec: P5 and P2 readers, P5 writer.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Header tokenizer that skips whitespace and `#` comments.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_number(&mut self, what: &str) -> Result<u32> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                Error::MalformedHeader(format!(
                    "{what} is not a number: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes a P5 (binary) or P2 (ASCII) PGM with maxval at most 255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("missing magic number".into()));
    }
    let magic = &bytes[..2];
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        [b'P', d] if d.is_ascii_digit() => {
            return Err(Error::UnsupportedFormat(
                String::from_utf8_lossy(magic).into_owned(),
            ))
        }
        _ => return Err(Error::MalformedHeader("bad magic number".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.next_number("width")? as usize;
    let height = cur.next_number("height")? as usize;
    let maxval = cur.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let count = width * height;

    let samples: Vec<f64> = if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::TruncatedPayload {
                expected: count,
                found: 0,
            });
        }
        let raster = &bytes[cur.pos + 1..];
        if raster.len() < count {
            return Err(Error::TruncatedPayload {
                expected: count,
                found: raster.len(),
            });
        }
        raster[..count].iter().map(|&b| f64::from(b)).collect()
    } else {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let Some(tok) = cur.next_token() else {
                return Err(Error::TruncatedPayload {
                    expected: count,
                    found: out.len(),
                });
            };
            let v = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| {
                    Error::MalformedHeader(format!(
                        "bad ASCII sample {:?}",
                        String::from_utf8_lossy(tok)
                    ))
                })?;
            if v > maxval {
                return Err(Error::MalformedHeader(format!(
                    "sample {v} exceeds maxval {maxval}"
                )));
            }
            out.push(f64::from(v));
        }
        out
    };
    GrayImage::new(width, height, samples)
}

/// Quantizes a sample the way [`write_pgm`] does.
#[inline]
pub fn quantize(sample: f64) -> u8 {
    if sample.is_nan() {
        return 0;
    }
    sample.round().clamp(0.0, 255.0) as u8
}

/// Encodes as binary P5 with maxval 255, rounding then clamping each sample.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.samples().iter().map(|&s| quantize(s)));
    out
}

/// Encodes as ASCII P2 with maxval 255.
pub fn write_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width(), img.height());
    for row in img.samples().chunks(img.width()) {
        let line: Vec<String> = row.iter().map(|&s| quantize(s).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    read_pgm(&fs::read(path)?)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, write_pgm(img))?;
    Ok(())
}
