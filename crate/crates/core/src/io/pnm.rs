//! PFM (32-bit float, 1 or 3 channels) and binary PGM (P5) images.
//!
//! Headers are whitespace-separated tokens; `#` starts a comment running to
//! end of line, as in the other netpbm formats. PFM rows are stored bottom to
//! top and the negative scale marks little-endian samples. In memory, rows are
//! top to bottom.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major from the top row, channels interleaved.
    pub data: Vec<f32>,
}

pub(crate) struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Offset of the next header token.
    pub(crate) fn next_pos(&mut self) -> usize {
        self.skip_space_and_comments();
        self.pos
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
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

    pub(crate) fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("unexpected end of header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Parse {
            offset: start,
            message: "header token is not ASCII".into(),
        })
    }

    pub(crate) fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let start = self.next_pos();
        let tok = self.token()?;
        tok.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid {what} {tok:?}"),
        })
    }

    /// Consume the single whitespace byte that ends the header.
    pub(crate) fn end_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(self.pos)
            }
            _ => Err(self.error("missing whitespace after header")),
        }
    }
}

pub fn read_pfm(bytes: &[u8]) -> Result<PfmImage> {
    let mut r = HeaderReader::new(bytes);
    let channels = match r.token()? {
        "Pf" => 1,
        "PF" => 3,
        other => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("not a PFM file (magic {other:?})"),
            })
        }
    };
    let width: usize = r.number("width")?;
    let height: usize = r.number("height")?;
    let scale_at = r.next_pos();
    let scale: f64 = r.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Parse {
            offset: scale_at,
            message: format!("invalid scale {scale}"),
        });
    }
    let little = scale < 0.0;
    let start = r.end_header()?;
    let n = width * height * channels;
    let body = &bytes[start..];
    if body.len() < 4 * n {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("expected {} bytes of samples, found {}", 4 * n, body.len()),
        });
    }
    let row_len = width * channels;
    let mut data = vec![0.0f32; n];
    for (file_row, chunk) in body[..4 * n].chunks_exact(4 * row_len.max(1)).enumerate() {
        let row = height - 1 - file_row;
        for (k, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            data[row * row_len + k] = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

/// Write a little-endian PFM. `comment` lines are emitted after the magic.
pub fn write_pfm(out: &mut impl Write, img: &PfmImage, comment: Option<&str>) -> Result<()> {
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::InvalidArgument(
            "PFM sample count does not match shape".into(),
        ));
    }
    if let Some(index) = img.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::InvalidArgument(format!(
                "PFM supports 1 or 3 channels, got {c}"
            )))
        }
    };
    let mut header = format!("{magic}\n");
    if let Some(c) = comment {
        for line in c.lines() {
            header.push_str(&format!("# {line}\n"));
        }
    }
    header.push_str(&format!("{} {}\n-1.0\n", img.width, img.height));
    let row_len = img.width * img.channels;
    let mut buf = Vec::with_capacity(header.len() + 4 * img.data.len());
    buf.extend_from_slice(header.as_bytes());
    for row in (0..img.height).rev() {
        for x in &img.data[row * row_len..(row + 1) * row_len] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u8>,
}

pub fn read_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let mut r = HeaderReader::new(bytes);
    let magic = r.token()?;
    if magic != "P5" {
        return Err(Error::Parse {
            offset: 0,
            message: format!("not a binary PGM file (magic {magic:?})"),
        });
    }
    let width: usize = r.number("width")?;
    let height: usize = r.number("height")?;
    let max_at = r.next_pos();
    let maxval: u16 = r.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse {
            offset: max_at,
            message: format!("unsupported maxval {maxval}"),
        });
    }
    let start = r.end_header()?;
    let n = width * height;
    if bytes.len() - start < n {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!(
                "expected {n} bytes of samples, found {}",
                bytes.len() - start
            ),
        });
    }
    Ok(PgmImage {
        width,
        height,
        maxval,
        data: bytes[start..start + n].to_vec(),
    })
}

pub fn write_pgm(out: &mut impl Write, img: &PgmImage, comment: Option<&str>) -> Result<()> {
    if img.data.len() != img.width * img.height {
        return Err(Error::InvalidArgument(
            "PGM sample count does not match shape".into(),
        ));
    }
    let mut header = String::from("P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            header.push_str(&format!("# {line}\n"));
        }
    }
    header.push_str(&format!("{} {}\n{}\n", img.width, img.height, img.maxval));
    out.write_all(header.as_bytes())?;
    out.write_all(&img.data)?;
    Ok(())
}
