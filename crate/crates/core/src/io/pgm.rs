//! Binary NetPBM graymap ("P5") codec.
//!
//! Writers always emit the header `P5\n<w> <h>\n<maxval>\n` followed by the raw
//! samples: one byte per sample when `maxval < 256`, otherwise two bytes,
//! big-endian. Readers accept any conforming header, including `#` comments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::LabelRaster;
use crate::raster::{ChangeRaster, Image};

/// Upper bound on decoded samples, to refuse absurd headers before allocating.
const MAX_SAMPLES: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

fn malformed(offset: usize, message: impl Into<String>) -> Error {
    Error::Pgm {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(self.pos) {
                None => malformed(start, format!("truncated header, expected {what}")),
                Some(_) => malformed(start, format!("expected {what}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse::<u64>()
            .map_err(|_| malformed(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    if bytes.len() < 2 {
        return Err(malformed(bytes.len(), "truncated magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(malformed(0, "magic number is not P5"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(malformed(2, "expected whitespace after magic number"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(maxval_at, "zero image dimension"));
    }
    if width > u64::from(u32::MAX)
        || height > u64::from(u32::MAX)
        || width.saturating_mul(height) > MAX_SAMPLES
    {
        return Err(malformed(maxval_at, format!("dimension overflow: {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(malformed(cur.pos, "expected single whitespace before raster")),
        None => return Err(malformed(cur.pos, "truncated header")),
    }
    let n = (width * height) as usize;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let data = &bytes[cur.pos..];
    if data.len() < need {
        return Err(malformed(
            bytes.len(),
            format!("truncated raster: expected {need} bytes, found {}", data.len()),
        ));
    }
    let samples: Vec<u16> = if wide {
        data[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data[..need].iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(i) = samples.iter().position(|&s| u64::from(s) > maxval) {
        let offset = cur.pos + if wide { 2 * i } else { i };
        return Err(malformed(offset, format!("sample exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width: width as u32,
        height: height as u32,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pgm(pgm: &Pgm) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval);
    let wide = pgm.maxval > 255;
    let mut out = Vec::with_capacity(header.len() + pgm.samples.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    if wide {
        for s in &pgm.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(pgm.samples.iter().map(|&s| s as u8));
    }
    out
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Pgm { offset, message } => Error::Pgm {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        e => e,
    })
}

pub fn encode_label_raster(r: &LabelRaster) -> Result<Vec<u8>> {
    let samples = r
        .labels
        .iter()
        .map(|&l| u16::try_from(l).map_err(|_| Error::LabelOverflow(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(encode_pgm(&Pgm {
        width: r.width,
        height: r.height,
        maxval: u16::MAX,
        samples,
    }))
}

pub fn decode_label_raster(bytes: &[u8]) -> Result<LabelRaster> {
    let pgm = decode_pgm(bytes)?;
    LabelRaster::new(
        pgm.width,
        pgm.height,
        pgm.samples.into_iter().map(u32::from).collect(),
    )
}

pub fn read_label_raster(path: impl AsRef<Path>) -> Result<LabelRaster> {
    let path = path.as_ref();
    with_path(path, decode_label_raster(&read_bytes(path)?))
}

pub fn write_label_raster(r: &LabelRaster, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_label_raster(r)?)
}

pub fn encode_image(img: &Image) -> Vec<u8> {
    encode_pgm(&Pgm {
        width: img.width,
        height: img.height,
        maxval: u16::MAX,
        samples: img.pixels.clone(),
    })
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let pgm = with_path(path, decode_pgm(&read_bytes(path)?))?;
    Image::new(pgm.width, pgm.height, pgm.samples)
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(img))
}

pub fn encode_change_map(r: &ChangeRaster) -> Vec<u8> {
    encode_pgm(&Pgm {
        width: r.width,
        height: r.height,
        maxval: 255,
        samples: r.codes.iter().map(|&c| u16::from(c)).collect(),
    })
}

pub fn decode_change_map(bytes: &[u8]) -> Result<ChangeRaster> {
    let pgm = decode_pgm(bytes)?;
    if pgm.maxval > 255 {
        return Err(malformed(0, format!("change map maxval {} exceeds 255", pgm.maxval)));
    }
    ChangeRaster::new(
        pgm.width,
        pgm.height,
        pgm.samples.into_iter().map(|s| s as u8).collect(),
    )
}

pub fn read_change_map(path: impl AsRef<Path>) -> Result<ChangeRaster> {
    let path = path.as_ref();
    with_path(path, decode_change_map(&read_bytes(path)?))
}

pub fn write_change_map(r: &ChangeRaster, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_change_map(r))
}
