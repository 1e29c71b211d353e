//! Image planes, color images, and the PNG/PPM codecs.
//!
//! Everything downstream works on `f64` intensities in `[0, 1]`. Decoding maps
//! an 8-bit code `v` to `v / 255`; encoding clamps to `[0, 1]` and quantizes with
//! round-half-up, so `decode(encode(img))` is within `1/510` of `img` and
//! `encode(decode(bytes))` reproduces bytes written by this module exactly.

use std::io::Cursor;

use crate::error::{JedError, Result};

/// A single-channel `width x height` grid of finite reals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(JedError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(JedError::InvalidImage(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(JedError::InvalidImage(format!(
                "non-finite value {} at index {i}",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Panics if either dimension is zero or `value` is not finite.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant plane")
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a plane from `f(x, y)`. Panics on zero dimensions or non-finite values.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produced an invalid plane")
    }

    /// Wraps internally computed data without re-validating it.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; planes have at least one pixel.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_dims(&self, other: &ImagePlane) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_dims(&self, other: &ImagePlane) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(JedError::Shape {
                expected_width: self.width,
                expected_height: self.height,
                width: other.width,
                height: other.height,
            })
        }
    }

    /// Applies `f` pointwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePlane {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(
            data.iter().all(|v| v.is_finite()),
            "map produced a non-finite value"
        );
        Self::from_raw(self.width, self.height, data)
    }

    /// Pointwise combination of two equally sized planes.
    pub fn zip_map(&self, other: &ImagePlane, f: impl Fn(f64, f64) -> f64) -> Result<ImagePlane> {
        self.check_dims(other)?;
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(JedError::Numerical(
                "pointwise combination produced a non-finite value".into(),
            ));
        }
        Ok(Self::from_raw(self.width, self.height, data))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> ImagePlane {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dot(&self, other: &ImagePlane) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &ImagePlane) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Three planes sharing one size, in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub r: ImagePlane,
    pub g: ImagePlane,
    pub b: ImagePlane,
}

impl ColorImage {
    pub fn new(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self> {
        r.check_dims(&g)?;
        r.check_dims(&b)?;
        Ok(Self { r, g, b })
    }

    /// A gray image with all three channels equal to `plane`.
    pub fn from_gray(plane: &ImagePlane) -> Self {
        Self {
            r: plane.clone(),
            g: plane.clone(),
            b: plane.clone(),
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut r = Vec::with_capacity(width * height);
        let mut g = Vec::with_capacity(width * height);
        let mut b = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let [pr, pg, pb] = f(x, y);
                r.push(pr);
                g.push(pg);
                b.push(pb);
            }
        }
        Self {
            r: ImagePlane::new(width, height, r).expect("from_fn produced an invalid plane"),
            g: ImagePlane::new(width, height, g).expect("from_fn produced an invalid plane"),
            b: ImagePlane::new(width, height, b).expect("from_fn produced an invalid plane"),
        }
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn planes(&self) -> [&ImagePlane; 3] {
        [&self.r, &self.g, &self.b]
    }

    pub fn from_planes([r, g, b]: [ImagePlane; 3]) -> Result<Self> {
        Self::new(r, g, b)
    }

    pub fn map_planes(&self, mut f: impl FnMut(&ImagePlane) -> ImagePlane) -> ColorImage {
        ColorImage {
            r: f(&self.r),
            g: f(&self.g),
            b: f(&self.b),
        }
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> ColorImage {
        self.map_planes(|p| p.clamp(lo, hi))
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        [self.r.get(x, y), self.g.get(x, y), self.b.get(x, y)]
    }
}

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Luma `Y = 0.299 r + 0.587 g + 0.114 b`, the initial illumination estimate.
pub fn rgb_to_luma(img: &ColorImage) -> ImagePlane {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = img
        .r
        .as_slice()
        .iter()
        .zip(img.g.as_slice())
        .zip(img.b.as_slice())
        .map(|((&r, &g), &b)| wr * r + wg * g + wb * b)
        .collect();
    ImagePlane::from_raw(img.width(), img.height(), data)
}

/// On-disk container for [`encode_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary PPM (`P6`, maxval 255).
    Ppm,
}

impl ImageFormat {
    /// Picks PPM for `.ppm`/`.pnm` paths and PNG for everything else.
    pub fn from_path(path: &std::path::Path) -> ImageFormat {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("ppm") | Some("pnm") => ImageFormat::Ppm,
            _ => ImageFormat::Png,
        }
    }
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Decodes an 8-bit RGB/RGBA PNG or a binary PPM, sniffing the format from the magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<ColorImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(JedError::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P6 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(JedError::Decode("unrecognized file signature".into()))
    }
}

pub fn encode_image(img: &ColorImage, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Ppm => Ok(encode_ppm(img)),
    }
}

/// Clamps to `[0, 1]` and rounds half up to an 8-bit code.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[inline]
pub fn dequantize(code: u8) -> f64 {
    f64::from(code) / 255.0
}

fn interleave(img: &ColorImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.r.len() * 3);
    for ((&r, &g), &b) in img
        .r
        .as_slice()
        .iter()
        .zip(img.g.as_slice())
        .zip(img.b.as_slice())
    {
        out.extend_from_slice(&[quantize(r), quantize(g), quantize(b)]);
    }
    out
}

fn deinterleave(width: usize, height: usize, samples: &[u8], channels: usize) -> ColorImage {
    let n = width * height;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in samples.chunks_exact(channels).take(n) {
        for (plane, &code) in planes.iter_mut().zip(px) {
            plane.push(dequantize(code));
        }
    }
    let [r, g, b] = planes;
    ColorImage {
        r: ImagePlane::from_raw(width, height, r),
        g: ImagePlane::from_raw(width, height, g),
        b: ImagePlane::from_raw(width, height, b),
    }
}

fn decode_png(bytes: &[u8]) -> Result<ColorImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| JedError::Decode(format!("png: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(JedError::UnsupportedFormat(format!(
            "png bit depth {depth:?} (only 8-bit is supported)"
        )));
    }
    let channels = match color {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(JedError::UnsupportedFormat(format!(
                "png color type {other:?} (only RGB and RGBA are supported)"
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| JedError::Decode("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| JedError::Decode(format!("png: {e}")))?;
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(JedError::Decode("png: zero dimension".into()));
    }
    let row = width * channels;
    let mut samples = Vec::with_capacity(row * height);
    for line in buf[..info.buffer_size()].chunks(info.line_size).take(height) {
        samples.extend_from_slice(&line[..row]);
    }
    Ok(deinterleave(width, height, &samples, channels))
}

fn encode_png(img: &ColorImage) -> Result<Vec<u8>> {
    let (width, height) = img.dims();
    let too_big = |_| JedError::InvalidImage(format!("{width}x{height} exceeds PNG limits"));
    let w = u32::try_from(width).map_err(too_big)?;
    let h = u32::try_from(height).map_err(too_big)?;
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, w, h);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| JedError::Io(std::io::Error::other(e)))?;
        writer
            .write_image_data(&interleave(img))
            .map_err(|e| JedError::Io(std::io::Error::other(e)))?;
        writer
            .finish()
            .map_err(|e| JedError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let (width, height) = img.dims();
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&interleave(img));
    out
}

/// Header tokenizer for netpbm: whitespace-separated, `#` comments to end of line.
struct PpmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PpmHeader<'_> {
    fn next_number(&mut self, what: &str) -> Result<usize> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(JedError::Decode(format!("ppm: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| JedError::Decode(format!("ppm: {what} out of range")))
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<ColorImage> {
    let mut header = PpmHeader { bytes, pos: 2 };
    let width = header.next_number("width")?;
    let height = header.next_number("height")?;
    let maxval = header.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(JedError::Decode("ppm: zero dimension".into()));
    }
    if maxval != 255 {
        return Err(JedError::UnsupportedFormat(format!(
            "ppm maxval {maxval} (only 255 is supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(JedError::Decode("ppm: missing raster separator".into())),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| JedError::Decode("ppm: dimensions overflow".into()))?;
    let raster = &bytes[header.pos..];
    if raster.len() < needed {
        return Err(JedError::Decode(format!(
            "ppm: truncated raster ({} of {needed} bytes)",
            raster.len()
        )));
    }
    Ok(deinterleave(width, height, &raster[..needed], 3))
}
