//! Binary Netpbm I/O: P6 (PPM, maxval 255) for rasters and P4 (PBM) for
//! masks. Writes are canonical so save/load round-trips are byte-identical.
//! Masks may also be supplied as P6 with white = road surface.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::raster::{Mask, Raster, RasterError};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic number, expected {expected}")]
    BadMagic { expected: &'static str },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("only maxval 255 is supported, got {0}")]
    BadMaxval(u32),
    #[error("truncated pixel data, expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid raster: {0}")]
    Raster(#[from] RasterError),
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Tokens { bytes, pos: 0 }
    }

    /// Skip whitespace and `#` comments (comments run to end of line).
    fn skip_space(&mut self) {
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

    fn read_uint(&mut self) -> Result<u32, PnmError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::Header("expected an unsigned integer".into()));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        s.parse::<u32>().map_err(|e| PnmError::Header(format!("bad integer: {e}")))
    }

    /// Consume exactly one whitespace byte separating the header from data.
    fn expect_single_space(&mut self) -> Result<(), PnmError> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(PnmError::Header("missing whitespace before pixel data".into()))
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

pub fn write_ppm<W: Write>(raster: &Raster, out: &mut W) -> Result<(), PnmError> {
    write!(out, "P6\n{} {}\n255\n", raster.width(), raster.height())?;
    out.write_all(raster.bytes())?;
    Ok(())
}

pub fn read_ppm<R: Read>(input: &mut R) -> Result<Raster, PnmError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if !bytes.starts_with(b"P6") {
        return Err(PnmError::BadMagic { expected: "P6" });
    }
    let mut t = Tokens::new(&bytes[2..]);
    let width = t.read_uint()?;
    let height = t.read_uint()?;
    let maxval = t.read_uint()?;
    if maxval != 255 {
        return Err(PnmError::BadMaxval(maxval));
    }
    t.expect_single_space()?;
    let expected = 3 * width as usize * height as usize;
    let rest = t.rest();
    if rest.len() < expected {
        return Err(PnmError::Truncated { expected, got: rest.len() });
    }
    Ok(Raster::from_raw(width, height, rest[..expected].to_vec())?)
}

pub fn write_pbm<W: Write>(mask: &Mask, out: &mut W) -> Result<(), PnmError> {
    write!(out, "P4\n{} {}\n", mask.width(), mask.height())?;
    let row_bytes = (mask.width() as usize + 7) / 8;
    let mut row = vec![0u8; row_bytes];
    for y in 0..mask.height() {
        row.iter_mut().for_each(|b| *b = 0);
        for x in 0..mask.width() {
            // PBM: 1 = black. Road surface is white, so road cells stay 0.
            if !mask.get(x, y) {
                row[x as usize / 8] |= 0x80 >> (x % 8);
            }
        }
        out.write_all(&row)?;
    }
    Ok(())
}

pub fn read_pbm<R: Read>(input: &mut R) -> Result<Mask, PnmError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if !bytes.starts_with(b"P4") {
        return Err(PnmError::BadMagic { expected: "P4" });
    }
    let mut t = Tokens::new(&bytes[2..]);
    let width = t.read_uint()?;
    let height = t.read_uint()?;
    if width == 0 || height == 0 {
        return Err(PnmError::Raster(RasterError::BadDimensions(width, height)));
    }
    t.expect_single_space()?;
    let row_bytes = (width as usize + 7) / 8;
    let expected = row_bytes * height as usize;
    let rest = t.rest();
    if rest.len() < expected {
        return Err(PnmError::Truncated { expected, got: rest.len() });
    }
    let mut cells = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height as usize {
        let row = &rest[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..width as usize {
            let black = row[x / 8] & (0x80 >> (x % 8)) != 0;
            cells.push(!black);
        }
    }
    Ok(Mask::from_cells(width, height, cells)?)
}

/// Read a mask from either P4 (white = road) or P6 (near-white = road).
pub fn read_mask<R: Read>(input: &mut R) -> Result<Mask, PnmError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"P4") {
        read_pbm(&mut &bytes[..])
    } else if bytes.starts_with(b"P6") {
        let raster = read_ppm(&mut &bytes[..])?;
        let mut cells = Vec::with_capacity(raster.width() as usize * raster.height() as usize);
        for y in 0..raster.height() {
            for x in 0..raster.width() {
                let [r, g, b] = raster.get(x, y);
                cells.push(r >= 128 && g >= 128 && b >= 128);
            }
        }
        Ok(Mask::from_cells(raster.width(), raster.height(), cells)?)
    } else {
        Err(PnmError::BadMagic { expected: "P4 or P6" })
    }
}

pub fn save_ppm(path: &Path, raster: &Raster) -> Result<(), PnmError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ppm(raster, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_ppm(path: &Path) -> Result<Raster, PnmError> {
    read_ppm(&mut BufReader::new(File::open(path)?))
}

pub fn save_pbm(path: &Path, mask: &Mask) -> Result<(), PnmError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pbm(mask, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_mask(path: &Path) -> Result<Mask, PnmError> {
    read_mask(&mut BufReader::new(File::open(path)?))
}
