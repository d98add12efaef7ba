use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image extents must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("positive extents")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels).expect("positive extents")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

pub fn decode_file(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes)
}

/// Decodes binary PGM (`P5`) or 8-bit grayscale PNG, chosen by magic bytes.
pub fn decode_bytes(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        Err(Error::UnsupportedImage(
            "only binary grayscale PGM (P5) is accepted".into(),
        ))
    } else {
        Err(Error::format(0, "not a PGM (P5) or PNG file"))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::format(pos as u64, "truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "expected a decimal number in PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start as u64, "PGM header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(pos as u64, "missing whitespace after PGM maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedImage(format!(
            "PGM maxval {maxval} is not 8-bit"
        )));
    }
    let len = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(0, "PGM extents overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < len {
        return Err(Error::format(
            bytes.len() as u64,
            format!("PGM raster truncated: {} of {len} bytes", raster.len()),
        ));
    }
    let mut pixels = raster[..len].to_vec();
    if maxval != 255 {
        for p in &mut pixels {
            *p = ((usize::from(*p).min(maxval) * 255 + maxval / 2) / maxval) as u8;
        }
    }
    GrayImage::new(width, height, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let png_err = |e: png::DecodingError| Error::format(0, format!("PNG: {e}"));
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!(
            "PNG is {:?} at {:?} bits, need 8-bit grayscale",
            info.color_type, info.bit_depth
        )));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    GrayImage::new(frame.width as usize, frame.height as usize, buf)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| Error::format(0, format!("PNG encode: {e}"));
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&img.pixels).map_err(png_err)?;
    }
    Ok(out)
}
