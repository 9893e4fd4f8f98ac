//! Random square crops on the background mask.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::raster::{crop, MaskRaster, RasterImage, Rect};
use crate::rng::{stream, Domain};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("mask has no true pixels")]
    MaskEmpty,
    #[error("only {accepted} of {attempts} crops accepted (wanted {wanted}); the mask cannot host crops")]
    AcceptanceFloor {
        accepted: usize,
        attempts: usize,
        wanted: usize,
    },
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    DimensionMismatch {
        image_w: usize,
        image_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("window at ({x}, {y}) with side {side} leaves the raster")]
    OutOfBounds { x: usize, y: usize, side: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub sample_count: usize,
    pub min_side: usize,
    pub max_side: usize,
    pub coverage_threshold: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            sample_count: 10_000,
            min_side: 16,
            max_side: 48,
            coverage_threshold: 0.9,
            max_attempts: 200_000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.min_side == 0 || self.min_side > self.max_side {
            return bad("need 1 <= min_side <= max_side");
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return bad("coverage must lie in (0, 1]");
        }
        if self.max_attempts < self.sample_count {
            return bad("max_attempts must be at least the sample count");
        }
        Ok(())
    }
}

/// One accepted crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Position in acceptance order.
    pub index: usize,
    pub center: (usize, usize),
    pub side: usize,
    pub patch: RasterImage,
    pub subarea_id: usize,
    pub mask_coverage: f64,
}

impl Candidate {
    pub fn rect(&self) -> Rect {
        crop_rect(self.center, self.side).expect("accepted candidates have valid geometry")
    }
}

/// Square window of `side` centred on `center`; the top-left corner sits at
/// `center - side / 2` (integer division). `None` if that underflows.
pub fn crop_rect(center: (usize, usize), side: usize) -> Option<Rect> {
    let half = side / 2;
    let x = center.0.checked_sub(half)?;
    let y = center.1.checked_sub(half)?;
    Some(Rect::new(x, y, side, side))
}

/// Fraction of true pixels in the `side`x`side` window whose top-left is `(x, y)`.
pub fn coverage_fraction(mask: &MaskRaster, x: usize, y: usize, side: usize) -> Result<f64, SamplerError> {
    if side == 0 || x + side > mask.width() || y + side > mask.height() {
        return Err(SamplerError::OutOfBounds { x, y, side });
    }
    let mut count = 0usize;
    for row in y..y + side {
        count += (x..x + side).filter(|&col| mask.get(col, row)).count();
    }
    Ok(count as f64 / (side * side) as f64)
}

/// Summed-area table over a mask, for O(1) window counts.
struct IntegralMask {
    stride: usize,
    sums: Vec<u32>,
}

impl IntegralMask {
    fn new(mask: &MaskRaster) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += mask.get(x, y) as u32;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    fn count(&self, r: Rect) -> u32 {
        let s = self.stride;
        let (x0, y0, x1, y1) = (r.x, r.y, r.x + r.w, r.y + r.h);
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Uniform draws over the true mask pixels at which a window of a given side
/// fits inside the raster.
struct CentreTable {
    width: usize,
    /// `row_prefix[y * (w + 1) + x]` = true pixels in row `y` left of column `x`.
    row_prefix: Vec<u32>,
    min_side: usize,
    per_side: Vec<SideRange>,
}

struct SideRange {
    x_lo: usize,
    x_hi: usize,
    y_lo: usize,
    /// Cumulative true-centre counts over rows `y_lo..`.
    cumulative: Vec<u64>,
}

impl CentreTable {
    fn new(mask: &MaskRaster, min_side: usize, max_side: usize) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut row_prefix = vec![0u32; (w + 1) * h];
        for y in 0..h {
            for x in 0..w {
                row_prefix[y * (w + 1) + x + 1] = row_prefix[y * (w + 1) + x] + mask.get(x, y) as u32;
            }
        }
        let per_side = (min_side..=max_side)
            .map(|side| {
                if side > w || side > h {
                    return SideRange {
                        x_lo: 0,
                        x_hi: 0,
                        y_lo: 0,
                        cumulative: Vec::new(),
                    };
                }
                let half = side / 2;
                let (x_lo, x_hi) = (half, w - side + half);
                let (y_lo, y_hi) = (half, h - side + half);
                let mut total = 0u64;
                let cumulative = (y_lo..=y_hi)
                    .map(|y| {
                        let base = y * (w + 1);
                        total += (row_prefix[base + x_hi + 1] - row_prefix[base + x_lo]) as u64;
                        total
                    })
                    .collect();
                SideRange {
                    x_lo,
                    x_hi,
                    y_lo,
                    cumulative,
                }
            })
            .collect();
        Self {
            width: w,
            row_prefix,
            min_side,
            per_side,
        }
    }

    fn draw(&self, side: usize, rng: &mut impl Rng) -> Option<(usize, usize)> {
        let range = &self.per_side[side - self.min_side];
        let total = *range.cumulative.last()?;
        if total == 0 {
            return None;
        }
        let k = rng.gen_range(0..total);
        let row = range.cumulative.partition_point(|&c| c <= k);
        let before = if row == 0 { 0 } else { range.cumulative[row - 1] };
        let y = range.y_lo + row;
        let base = y * (self.width + 1);
        let target = (k - before) as u32 + self.row_prefix[base + range.x_lo];
        // first column whose inclusive prefix exceeds target
        let offset = self.row_prefix[base + range.x_lo + 1..=base + range.x_hi + 1].partition_point(|&c| c <= target);
        Some((range.x_lo + offset, y))
    }
}

/// Attempts evaluated per parallel block; fixed so that the accepted sequence
/// never depends on the number of workers.
const BLOCK: usize = 4096;

/// Draws square crops until `cfg.sample_count` are accepted or
/// `cfg.max_attempts` are spent.
///
/// Attempt `a` draws from stream `(seed, a)`: first a side uniform in
/// `[min_side, max_side]`, then a centre uniform over the true mask pixels at
/// which that window stays inside the image. The crop is kept when its mask
/// coverage reaches the threshold. Accepted crops keep attempt order.
pub fn sample_candidates(
    img: &RasterImage,
    mask: &MaskRaster,
    cfg: &SamplerConfig,
) -> Result<Vec<Candidate>, SamplerError> {
    cfg.validate()?;
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(SamplerError::DimensionMismatch {
            image_w: img.width(),
            image_h: img.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    if mask.count_true() == 0 {
        return Err(SamplerError::MaskEmpty);
    }
    let integral = IntegralMask::new(mask);
    let centres = CentreTable::new(mask, cfg.min_side, cfg.max_side);

    let attempt = |a: usize| -> Option<(usize, usize, usize, f64)> {
        let mut rng = stream(cfg.seed, Domain::Sampling, a as u64);
        let side = rng.gen_range(cfg.min_side..=cfg.max_side);
        let (cx, cy) = centres.draw(side, &mut rng)?;
        let rect = crop_rect((cx, cy), side)?;
        debug_assert!(rect.fits_in(mask.width(), mask.height()));
        let coverage = integral.count(rect) as f64 / (side * side) as f64;
        (coverage >= cfg.coverage_threshold).then_some((cx, cy, side, coverage))
    };

    let mut accepted = Vec::with_capacity(cfg.sample_count);
    let mut start = 0;
    while start < cfg.max_attempts && accepted.len() < cfg.sample_count {
        let end = (start + BLOCK).min(cfg.max_attempts);
        let block: Vec<_> = (start..end).into_par_iter().map(attempt).collect();
        for hit in block.into_iter().flatten() {
            if accepted.len() == cfg.sample_count {
                break;
            }
            accepted.push(hit);
        }
        start = end;
    }

    if accepted.len() < cfg.sample_count && accepted.len() * 10 < cfg.max_attempts {
        return Err(SamplerError::AcceptanceFloor {
            accepted: accepted.len(),
            attempts: cfg.max_attempts,
            wanted: cfg.sample_count,
        });
    }

    Ok(accepted
        .into_par_iter()
        .enumerate()
        .map(|(index, (cx, cy, side, mask_coverage))| {
            let r = crop_rect((cx, cy), side).unwrap();
            Candidate {
                index,
                center: (cx, cy),
                side,
                patch: crop(img, r.x, r.y, r.w, r.h).expect("window checked against bounds"),
                subarea_id: 0,
                mask_coverage,
            }
        })
        .collect())
}
