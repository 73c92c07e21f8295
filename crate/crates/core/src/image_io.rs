//! Grayscale raster type and its PGM/PNG codecs.
//!
//! PGM (binary `P5`, maxval 255) is the bit-exact interchange format. PNG is
//! accepted in any 8-bit colour type and always written as 8-bit grayscale.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit single-channel raster, row-major, 0 = black and 255 = white.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// True when the image is not yet usable by the patch pipeline, which
    /// requires a square raster with a power-of-two side of at least 4.
    /// Such images must go through [`prepare_image`] first.
    pub fn needs_preparation(&self) -> bool {
        !(self.width == self.height && is_valid_side(self.width))
    }

    /// Side length of a prepared (square) image.
    pub fn side(&self) -> Result<u32> {
        if self.needs_preparation() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} is not a square power-of-two image",
                self.width, self.height
            )));
        }
        Ok(self.width)
    }
}

fn is_valid_side(side: u32) -> bool {
    side >= 4 && side.is_power_of_two()
}

/// BT.601 luma, rounded half away from zero.
///
/// Evaluated in integer thousandths so the rounding is exact on every platform.
pub fn to_grayscale(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

/// Center-crops `img` to `side`×`side`.
pub fn prepare_image(img: &GrayImage, side: u32) -> Result<GrayImage> {
    if !is_valid_side(side) {
        return Err(Error::InvalidParameter(format!(
            "image side {side} must be a power of two >= 4"
        )));
    }
    if img.width < side || img.height < side {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
            side,
        });
    }
    let x0 = (img.width - side) / 2;
    let y0 = (img.height - side) / 2;
    let w = img.width as usize;
    let mut pixels = Vec::with_capacity(side as usize * side as usize);
    for y in y0..y0 + side {
        let start = y as usize * w + x0 as usize;
        pixels.extend_from_slice(&img.pixels[start..start + side as usize]);
    }
    Ok(GrayImage {
        width: side,
        height: side,
        pixels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Picks the format from a file extension (`.pgm` or `.png`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Loads a PGM (`P5`) or PNG file, detected by content rather than extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, path)
}

fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, path)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: "expected binary PGM (P5) or PNG".into(),
        })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let bad = |what: &str| Error::corrupt(path, format!("bad PGM header: {what}"));
    let width = cursor.number().ok_or_else(|| bad("width"))?;
    let height = cursor.number().ok_or_else(|| bad("height"))?;
    let maxval = cursor.number().ok_or_else(|| bad("maxval"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: format!("PGM maxval {maxval}, only 255 is supported"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(c) if c.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(bad("missing separator before raster")),
    }
    let len = width as usize * height as usize;
    let raster = bytes.get(cursor.pos..cursor.pos + len).ok_or_else(|| {
        Error::corrupt(
            path,
            format!(
                "truncated raster: expected {len} bytes, found {}",
                bytes.len() - cursor.pos
            ),
        )
    })?;
    GrayImage::new(width, height, raster.to_vec())
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let corrupt = |e: png::DecodingError| Error::corrupt(path, e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: format!("PNG bit depth {depth:?}, only 8-bit is supported"),
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::corrupt(path, "PNG dimensions overflow"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (width, height) = (info.width, info.height);
    buf.truncate(info.buffer_size());
    let stride = info.line_size;
    let channels = color.samples();
    let mut pixels = Vec::with_capacity(width as usize * height as usize);
    for row in buf.chunks_exact(stride).take(height as usize) {
        for px in row[..width as usize * channels].chunks_exact(channels) {
            let v = match color {
                png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => px[0],
                png::ColorType::Rgb | png::ColorType::Rgba => to_grayscale(px[0], px[1], px[2]),
                png::ColorType::Indexed => unreachable!("EXPAND resolves palettes"),
            };
            pixels.push(v);
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Writes `img` to `path`. PGM output is `P5\n<w> <h>\n255\n` followed by the raster.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ImageFormat::Pgm => {
            write!(out, "P5\n{} {}\n255\n", img.width, img.height)
                .and_then(|_| out.write_all(&img.pixels))
                .map_err(|e| Error::io(path, e))?;
        }
        ImageFormat::Png => {
            let mut encoder = png::Encoder::new(&mut out, img.width, img.height);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let to_io = |e: png::EncodingError| match e {
                png::EncodingError::IoError(e) => Error::io(path, e),
                other => Error::io(path, std::io::Error::other(other)),
            };
            let mut writer = encoder.write_header().map_err(to_io)?;
            writer.write_image_data(&img.pixels).map_err(to_io)?;
            writer.finish().map_err(to_io)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads the file at `path` through a buffered reader; used by container loaders.
pub(crate) fn open_buffered(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_png(path: &Path, w: u32, h: u32, color: png::ColorType, data: &[u8]) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().unwrap();
        writer.write_image_data(data).unwrap();
    }

    #[test]
    fn grayscale_fixed_points() {
        assert_eq!(to_grayscale(255, 255, 255), 255);
        assert_eq!(to_grayscale(0, 0, 0), 0);
        // 0.299 * 255 = 76.245
        assert_eq!(to_grayscale(255, 0, 0), 76);
        // 0.587 * 255 = 149.685, 0.114 * 255 = 29.07
        assert_eq!(to_grayscale(0, 255, 0), 150);
        assert_eq!(to_grayscale(0, 0, 255), 29);
    }

    #[test]
    fn grayscale_identity_on_gray() {
        for v in 0..=255u8 {
            assert_eq!(to_grayscale(v, v, v), v);
        }
    }

    #[test]
    fn grayscale_rounds_half_away_from_zero() {
        // 299*1 + 587*0 + 114*2 = 527 thousandths -> 0.527 -> 1
        assert_eq!(to_grayscale(1, 0, 2), 1);
        // 0.114*4 = 0.456 -> 0 ; 0.114*5 = 0.570 -> 1
        assert_eq!(to_grayscale(0, 0, 4), 0);
        assert_eq!(to_grayscale(0, 0, 5), 1);
    }

    proptest! {
        #[test]
        fn grayscale_is_monotone(r in 0u8..255, g: u8, b: u8) {
            prop_assert!(to_grayscale(r + 1, g, b) >= to_grayscale(r, g, b));
            prop_assert!(to_grayscale(g, r + 1, b) >= to_grayscale(g, r, b));
            prop_assert!(to_grayscale(g, b, r + 1) >= to_grayscale(g, b, r));
        }

        #[test]
        fn prepare_always_yields_valid_image(w in 8u32..80, h in 8u32..80, log_side in 2u32..4) {
            let side = 1 << log_side;
            let img = GrayImage::from_fn(w, h, |x, y| (x * 7 + y * 13) as u8);
            let out = prepare_image(&img, side).unwrap();
            prop_assert!(!out.needs_preparation());
            prop_assert_eq!(out.side().unwrap(), side);
        }
    }

    #[test]
    fn center_crop_offsets() {
        let img = GrayImage::from_fn(1280, 1024, |x, _| (x % 256) as u8);
        let out = prepare_image(&img, 1024).unwrap();
        assert_eq!((out.width(), out.height()), (1024, 1024));
        // x offset floor((1280-1024)/2) = 128
        assert_eq!(out.get(0, 0), 128);
        assert_eq!(out.get(1023, 0), ((128 + 1023) % 256) as u8);

        let odd = GrayImage::from_fn(7, 9, |x, y| (10 * y + x) as u8);
        let out = prepare_image(&odd, 4).unwrap();
        // offsets floor(3/2)=1, floor(5/2)=2
        assert_eq!(out.get(0, 0), 21);
    }

    #[test]
    fn prepare_identity_and_too_small() {
        let img = GrayImage::from_fn(16, 16, |x, y| (x ^ y) as u8);
        assert_eq!(prepare_image(&img, 16).unwrap(), img);
        let small = GrayImage::filled(512, 512, 0);
        assert!(matches!(
            prepare_image(&small, 1024),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(matches!(
            prepare_image(&img, 12),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn pgm_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.pgm");
        save_image(&GrayImage::filled(4, 4, 0), &path, ImageFormat::Pgm).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n4 4\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 16]);
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_fn(32, 16, |x, y| (x * 31 + y * 17) as u8);
        for (name, fmt) in [("a.pgm", ImageFormat::Pgm), ("a.png", ImageFormat::Png)] {
            let path = dir.path().join(name);
            save_image(&img, &path, fmt).unwrap();
            let back = load_image(&path).unwrap();
            assert_eq!(back, img);
            assert!(back.needs_preparation());
        }
    }

    #[test]
    fn large_pgm_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.pgm");
        let img = GrayImage::from_fn(1024, 1024, |x, y| (x + y) as u8);
        save_image(&img, &path, ImageFormat::Pgm).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!((back.width(), back.height()), (1024, 1024));
        assert!(!back.needs_preparation());
    }

    #[test]
    fn pgm_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut bytes = b"P5\n# made by hand\n2 # width\n2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        std::fs::write(&path, bytes).unwrap();
        assert_eq!(load_image(&path).unwrap().pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn truncated_pgm_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 10]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn unknown_format_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bmp");
        std::fs::write(&path, b"BM....").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(Error::UnsupportedFormat { .. })
        ));
        assert!(matches!(
            load_image(dir.path().join("nope.pgm")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rgb_png_with_equal_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        write_png(&path, 4, 4, png::ColorType::Rgb, &[77; 48]);
        let img = load_image(&path).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn rgba_png_uses_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        write_png(&path, 1, 1, png::ColorType::Rgba, &[255, 0, 0, 10]);
        assert_eq!(load_image(&path).unwrap().pixels(), &[76]);
    }

    #[test]
    fn save_to_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing-dir").join("x.pgm");
        let err = save_image(&GrayImage::filled(4, 4, 0), &path, ImageFormat::Pgm).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
