//! Raster types and PNG I/O.
//!
//! Everything here is immutable once built: images, masks and label rasters
//! are validated on construction and only handed out by shared reference.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("unsupported raster format in {path}: {reason}")]
    UnsupportedFormat { path: String, reason: String },
    #[error("raster has a zero dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("pixel buffer of length {got} does not match {width}x{height} (expected {expected})")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("rectangle ({x}, {y}, {w}, {h}) is outside a {width}x{height} raster")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("label value {value} at ({x}, {y}) is not in the class map")]
    UnknownLabelValue { value: u8, x: usize, y: usize },
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("malformed class map: {0}")]
    BadClassMap(String),
    #[error("cannot write {path}: {reason}")]
    UnwritableFile { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// RGB image, 8 bits per channel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(RasterError::BufferSize {
                width,
                height,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "zero-sized raster");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| color)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw channel data, `[r, g, b, r, g, b, ...]` in row-major order.
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Half-open axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// Luminance raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if values.len() != width * height {
            return Err(RasterError::BufferSize {
                width,
                height,
                expected: width * height,
                got: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn column(&self, x: usize) -> Vec<f64> {
        (0..self.height).map(|y| self.get(x, y)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskRaster {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl MaskRaster {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if bits.len() != width * height {
            return Err(RasterError::BufferSize {
                width,
                height,
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "zero-sized raster");
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "zero-sized raster");
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row-major indices of the true pixels.
    pub fn true_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Pixel value to class name.
pub type ClassMap = BTreeMap<u8, String>;

/// Per-pixel class identifiers plus the names they stand for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    class_names: ClassMap,
}

impl LabelRaster {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, class_names: ClassMap) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if labels.len() != width * height {
            return Err(RasterError::BufferSize {
                width,
                height,
                expected: width * height,
                got: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|l| !class_names.contains_key(l)) {
            return Err(RasterError::UnknownLabelValue {
                value: labels[i],
                x: i % width,
                y: i / width,
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            class_names,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn class_names(&self) -> &ClassMap {
        &self.class_names
    }

    /// Looks up the id of a class by name.
    pub fn class_id(&self, name: &str) -> Result<u8> {
        self.class_names
            .iter()
            .find_map(|(&id, n)| (n == name).then_some(id))
            .ok_or_else(|| RasterError::UnknownClass(name.to_string()))
    }

    /// Distinct label values actually present, ascending.
    pub fn present_classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..=255u8).filter(|&v| seen[v as usize]).collect()
    }
}

/// BT.601 luma, normalized to `[0, 1]`.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0
}

pub fn to_grayscale(img: &RasterImage) -> GrayRaster {
    GrayRaster {
        width: img.width,
        height: img.height,
        // min() guards the 1.0 + ulp that the coefficient sum can produce.
        values: img.pixels().map(|p| luma(p).min(1.0)).collect(),
    }
}

/// Copies the `w`x`h` rectangle with top-left corner `(x, y)`.
pub fn crop(img: &RasterImage, x: usize, y: usize, w: usize, h: usize) -> Result<RasterImage> {
    if w == 0 || h == 0 || x + w > img.width || y + h > img.height {
        return Err(RasterError::OutOfBounds {
            x,
            y,
            w,
            h,
            width: img.width,
            height: img.height,
        });
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for row in y..y + h {
        let start = (row * img.width + x) * 3;
        data.extend_from_slice(&img.data[start..start + w * 3]);
    }
    Ok(RasterImage {
        width: w,
        height: h,
        data,
    })
}

/// True exactly where the label equals `target_class`.
pub fn mask_from_labels(labels: &LabelRaster, target_class: u8) -> Result<MaskRaster> {
    if !labels.class_names.contains_key(&target_class) {
        return Err(RasterError::UnknownClass(target_class.to_string()));
    }
    Ok(MaskRaster {
        width: labels.width,
        height: labels.height,
        bits: labels.labels.iter().map(|&l| l == target_class).collect(),
    })
}

// ---------------------------------------------------------------------------
// PNG I/O

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

struct Decoded {
    width: usize,
    height: usize,
    color: png::ColorType,
    data: Vec<u8>,
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn decode_png(path: &Path, transformations: png::Transformations) -> Result<Decoded> {
    let unreadable = |reason: String| RasterError::UnreadableFile {
        path: display(path),
        reason,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| unreadable(e.to_string()))?;

    if bytes.len() < 8 || bytes[..8] != PNG_SIGNATURE {
        return Err(RasterError::UnsupportedFormat {
            path: display(path),
            reason: "not a PNG file".into(),
        });
    }
    // The decoder rejects zero-sized headers with a generic format error, so
    // peek at IHDR first to report the dimension problem precisely.
    if bytes.len() >= 24 && &bytes[12..16] == b"IHDR" {
        let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap()) as usize;
        if w == 0 || h == 0 {
            return Err(RasterError::ZeroDimension {
                width: w,
                height: h,
            });
        }
    }

    let mut decoder = png::Decoder::new(BufReader::new(&bytes[..]));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(|e| unreadable(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| unreadable(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::UnsupportedFormat {
            path: display(path),
            reason: format!("bit depth {:?}, expected 8", info.bit_depth),
        });
    }
    buf.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        data: buf,
    })
}

/// Loads a PNG as RGB. Grayscale is replicated across channels; alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let d = decode_png(
        path,
        png::Transformations::EXPAND | png::Transformations::STRIP_16,
    )?;
    let channels = match d.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(RasterError::UnsupportedFormat {
                path: display(path),
                reason: "unexpanded palette".into(),
            })
        }
    };
    let mut data = Vec::with_capacity(d.width * d.height * 3);
    for px in d.data.chunks_exact(channels) {
        match channels {
            1 | 2 => data.extend_from_slice(&[px[0], px[0], px[0]]),
            _ => data.extend_from_slice(&px[..3]),
        }
    }
    RasterImage::new(d.width, d.height, data)
}

/// Loads an 8-bit single-channel PNG as a mask; nonzero means true.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskRaster> {
    let path = path.as_ref();
    let d = decode_png(path, png::Transformations::IDENTITY)?;
    if d.color != png::ColorType::Grayscale {
        return Err(RasterError::UnsupportedFormat {
            path: display(path),
            reason: format!("mask must be 8-bit grayscale, got {:?}", d.color),
        });
    }
    MaskRaster::new(d.width, d.height, d.data.iter().map(|&v| v != 0).collect())
}

/// Loads an 8-bit grayscale or palette PNG whose raw values are class ids.
pub fn load_labels(path: impl AsRef<Path>, class_map: &ClassMap) -> Result<LabelRaster> {
    let path = path.as_ref();
    let d = decode_png(path, png::Transformations::IDENTITY)?;
    match d.color {
        png::ColorType::Grayscale | png::ColorType::Indexed => {}
        other => {
            return Err(RasterError::UnsupportedFormat {
                path: display(path),
                reason: format!("labels must be grayscale or palette, got {other:?}"),
            })
        }
    }
    LabelRaster::new(d.width, d.height, d.data, class_map.clone())
}

/// Parses a JSON object mapping pixel values (as strings) to class names.
pub fn parse_class_map(json: &str) -> Result<ClassMap> {
    let raw: BTreeMap<String, String> =
        serde_json::from_str(json).map_err(|e| RasterError::BadClassMap(e.to_string()))?;
    let mut map = ClassMap::new();
    for (k, v) in raw {
        let id: u8 = k
            .trim()
            .parse()
            .map_err(|_| RasterError::BadClassMap(format!("key {k:?} is not a value in 0..=255")))?;
        if map.values().any(|existing| existing == &v) {
            return Err(RasterError::BadClassMap(format!("class name {v:?} repeated")));
        }
        map.insert(id, v);
    }
    Ok(map)
}

pub fn load_class_map(path: impl AsRef<Path>) -> Result<ClassMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RasterError::UnreadableFile {
        path: display(path),
        reason: e.to_string(),
    })?;
    parse_class_map(&text)
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    data: &[u8],
    palette: Option<Vec<u8>>,
) -> Result<()> {
    let unwritable = |reason: String| RasterError::UnwritableFile {
        path: display(path),
        reason,
    };
    let file = File::create(path).map_err(|e| unwritable(e.to_string()))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    if let Some(p) = palette {
        encoder.set_palette(p);
    }
    let mut writer = encoder
        .write_header()
        .map_err(|e| unwritable(e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| unwritable(e.to_string()))?;
    writer.finish().map_err(|e| unwritable(e.to_string()))
}

pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        img.width,
        img.height,
        png::ColorType::Rgb,
        &img.data,
        None,
    )
}

/// Writes a mask as 8-bit grayscale, 255 for true.
pub fn save_mask(mask: &MaskRaster, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(
        path.as_ref(),
        mask.width,
        mask.height,
        png::ColorType::Grayscale,
        &data,
        None,
    )
}

/// Writes label ids as an 8-bit grayscale PNG.
pub fn save_labels(labels: &LabelRaster, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        labels.width,
        labels.height,
        png::ColorType::Grayscale,
        &labels.labels,
        None,
    )
}

/// Writes label ids as a palette PNG using a generated grey palette.
pub fn save_labels_indexed(labels: &LabelRaster, path: impl AsRef<Path>) -> Result<()> {
    let palette: Vec<u8> = (0..=255u8).flat_map(|v| [v, 255 - v, v / 2]).collect();
    write_png(
        path.as_ref(),
        labels.width,
        labels.height,
        png::ColorType::Indexed,
        &labels.labels,
        Some(palette),
    )
}
