//! Image file codecs: PGM/PPM (ASCII and binary, 8 and 16 bit), PNG
//! (8/16-bit gray and RGB) and PFM (32-bit float).
//!
//! Loading sniffs the magic bytes; saving picks the format from the file
//! extension. Integer formats store samples rounded and clamped to the
//! format's range. 16-bit netpbm samples are big-endian.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Pgm,
    Ppm,
    Png,
    Pfm,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("pgm") => Ok(Self::Pgm),
            Some("ppm") => Ok(Self::Ppm),
            Some("png") => Ok(Self::Png),
            Some("pfm") => Ok(Self::Pfm),
            _ => Err(Error::Format(format!(
                "unsupported output extension for {}",
                path.display()
            ))),
        }
    }
}

/// Sample depth for integer formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
    /// Eight bits if every rounded sample fits in `[0, 255]`, else sixteen.
    Auto,
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path.as_ref())?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return decode_png(bytes);
    }
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P3") | Some(b"P5") | Some(b"P6") => decode_pnm(bytes),
        Some(b"PF") | Some(b"Pf") => decode_pfm(bytes),
        _ => Err(Error::Format("unrecognized image signature".into())),
    }
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_image_with(img, path, BitDepth::Auto)
}

pub fn save_image_with(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let format = FileFormat::from_path(path)?;
    let bytes = encode(img, format, depth)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn encode(img: &Image, format: FileFormat, depth: BitDepth) -> Result<Vec<u8>> {
    let ch = img.channels();
    match format {
        FileFormat::Pgm if ch != 1 => Err(Error::Format(format!(
            "PGM holds one channel, image has {ch}"
        ))),
        FileFormat::Ppm if ch != 3 => Err(Error::Format(format!(
            "PPM holds three channels, image has {ch}"
        ))),
        FileFormat::Png | FileFormat::Pfm if ch != 1 && ch != 3 => Err(Error::Format(format!(
            "{format:?} supports 1 or 3 channels, image has {ch}"
        ))),
        FileFormat::Pgm | FileFormat::Ppm => Ok(encode_pnm(img, resolve_depth(img, depth))),
        FileFormat::Png => encode_png(img, resolve_depth(img, depth)),
        FileFormat::Pfm => Ok(encode_pfm(img)),
    }
}

fn resolve_depth(img: &Image, depth: BitDepth) -> BitDepth {
    match depth {
        BitDepth::Auto => {
            if img.data().iter().all(|&v| v.round() <= 255.0) {
                BitDepth::Eight
            } else {
                BitDepth::Sixteen
            }
        }
        d => d,
    }
}

fn quantize(v: f64, max: f64) -> u16 {
    v.round().clamp(0.0, max) as u16
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' {
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

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode("truncated header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Decode("non-ASCII header".into()))
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Decode(format!("bad header field {tok:?}")))
    }

    /// Consumes the single whitespace byte that ends a binary header.
    fn end_header(&mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(Error::Decode("missing raster after header".into())),
        }
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut hdr = HeaderReader { bytes, pos: 0 };
    let magic = hdr.token()?;
    let (ascii, channels) = match magic {
        "P2" => (true, 1),
        "P3" => (true, 3),
        "P5" => (false, 1),
        "P6" => (false, 3),
        _ => return Err(Error::Format(format!("unsupported netpbm type {magic}"))),
    };
    let width: usize = hdr.number()?;
    let height: usize = hdr.number()?;
    let maxval: u32 = hdr.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!("maxval {maxval} out of range")));
    }
    let count = width * height * channels;
    let mut data = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            let v: u32 = hdr.number()?;
            if v > maxval {
                return Err(Error::Decode(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64);
        }
    } else {
        let raster = hdr.end_header()?;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if raster.len() < need {
            return Err(Error::Decode(format!(
                "raster holds {} bytes, expected {need}",
                raster.len()
            )));
        }
        if wide {
            data.extend(
                raster[..need]
                    .chunks_exact(2)
                    .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64),
            );
        } else {
            data.extend(raster[..need].iter().map(|&b| b as f64));
        }
    }
    Image::new(width, height, channels, data)
}

fn encode_pnm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let (maxval, wide) = match depth {
        BitDepth::Sixteen => (65535u32, true),
        _ => (255, false),
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    for &v in img.data() {
        let q = quantize(v, maxval as f64);
        if wide {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}

fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let mut hdr = HeaderReader { bytes, pos: 0 };
    let channels = match hdr.token()? {
        "PF" => 3,
        _ => 1,
    };
    let width: usize = hdr.number()?;
    let height: usize = hdr.number()?;
    let scale: f64 = hdr.number()?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Decode("PFM scale must be non-zero".into()));
    }
    let little = scale < 0.0;
    let raster = hdr.end_header()?;
    let row_len = width * channels;
    let need = row_len * height * 4;
    if raster.len() < need {
        return Err(Error::Decode(format!(
            "PFM raster holds {} bytes, expected {need}",
            raster.len()
        )));
    }
    let mut data = vec![0.0; row_len * height];
    // Rows are stored bottom to top.
    for (file_row, chunk) in raster[..need].chunks_exact(row_len * 4).enumerate() {
        let row = height - 1 - file_row;
        for (k, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            data[row * row_len + k] = v as f64;
        }
    }
    Image::new(width, height, channels, data)
}

fn encode_pfm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "Pf" } else { "PF" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    let row_len = img.width() * img.channels();
    for row in (0..img.height()).rev() {
        for &v in &img.data()[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let buf = &buf[..info.buffer_size()];
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => {
            return Err(Error::Format("indexed PNG not expanded".into()));
        }
    };
    let samples: Vec<f64> = match info.bit_depth {
        png::BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64)
            .collect(),
        png::BitDepth::Eight => buf.iter().map(|&b| b as f64).collect(),
        other => return Err(Error::Format(format!("unsupported PNG bit depth {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let data: Vec<f64> = samples
        .chunks_exact(src_channels)
        .flat_map(|px| px[..keep].to_vec())
        .collect();
    Image::new(w, h, keep, data)
}

fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        let wide = depth == BitDepth::Sixteen;
        encoder.set_depth(if wide {
            png::BitDepth::Sixteen
        } else {
            png::BitDepth::Eight
        });
        let raster: Vec<u8> = if wide {
            img.data()
                .iter()
                .flat_map(|&v| quantize(v, 65535.0).to_be_bytes())
                .collect()
        } else {
            img.data().iter().map(|&v| quantize(v, 255.0) as u8).collect()
        };
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Format(e.to_string()))?;
        writer
            .write_image_data(&raster)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}
