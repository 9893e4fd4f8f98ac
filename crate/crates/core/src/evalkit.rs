//! Synthetic ground truth and scoring: tiled images with optional
//! contamination blocks, a translation-tolerant NCC score, and corpus
//! summaries of selected candidates.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::raster::{luma, to_grayscale, MaskRaster, Rect, RasterImage};
use crate::rng::{derive, stream, Domain};
use crate::sampler::Candidate;
use crate::selector::{boundary_cosines, SelectionResult};

/// Attempts per block before contamination placement gives up.
const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("could only place {placed} of {wanted} non-overlapping contamination blocks")]
    PlacementFailed { placed: usize, wanted: usize },
    #[error("candidate rectangle {rect:?} leaves the {width}x{height} noise mask")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contamination {
    pub block_size: usize,
    pub count: usize,
    pub fill: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tile: RasterImage,
    pub reps_x: usize,
    pub reps_y: usize,
    /// Uniform additive noise in `[-jitter_amp, jitter_amp]` (fraction of full scale).
    pub jitter_amp: f64,
    pub contamination: Option<Contamination>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.reps_x == 0 || self.reps_y == 0 {
            return Err(EvalError::InvalidSpec("reps must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.jitter_amp) {
            return Err(EvalError::InvalidSpec("jitter_amp must lie in [0, 0.5)".into()));
        }
        if let Some(c) = self.contamination {
            let (w, h) = (self.tile.width() * self.reps_x, self.tile.height() * self.reps_y);
            if c.count > 0 && (c.block_size == 0 || c.block_size > w || c.block_size > h) {
                return Err(EvalError::InvalidSpec(format!(
                    "block size {} does not fit a {w}x{h} image",
                    c.block_size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image: RasterImage,
    pub mask: MaskRaster,
    pub noise_mask: MaskRaster,
    pub truth_tile: RasterImage,
    pub blocks: Vec<Rect>,
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h
}

/// Tiles `spec.tile`, adds per-channel jitter (one stream per row) and
/// paints non-overlapping contamination blocks by rejection placement.
pub fn generate_tiled_image(spec: &SynthSpec) -> Result<SynthImage, EvalError> {
    spec.validate()?;
    let (tw, th) = (spec.tile.width(), spec.tile.height());
    let (w, h) = (tw * spec.reps_x, th * spec.reps_y);
    let amp = spec.jitter_amp * 255.0;

    let rows: Vec<Vec<u8>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rng = stream(spec.seed, Domain::Synth, y as u64);
            let mut row = Vec::with_capacity(w * 3);
            for x in 0..w {
                let p = spec.tile.pixel(x % tw, y % th);
                for v in p {
                    let noise = if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
                    row.push((v as f64 + noise).round().clamp(0.0, 255.0) as u8);
                }
            }
            row
        })
        .collect();
    let mut image = RasterImage::new(w, h, rows.concat()).expect("dimensions are consistent");

    let mut noise_mask = MaskRaster::filled(w, h, false);
    let mut blocks: Vec<Rect> = Vec::new();
    if let Some(c) = spec.contamination.filter(|c| c.count > 0) {
        let mut rng = stream(derive(spec.seed, 1), Domain::Synth, 0);
        let bs = c.block_size;
        'blocks: for _ in 0..c.count {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let r = Rect::new(rng.gen_range(0..=w - bs), rng.gen_range(0..=h - bs), bs, bs);
                if blocks.iter().all(|b| !overlaps(b, &r)) {
                    blocks.push(r);
                    continue 'blocks;
                }
            }
            return Err(EvalError::PlacementFailed {
                placed: blocks.len(),
                wanted: c.count,
            });
        }
        for r in &blocks {
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    image.put_pixel(x, y, c.fill);
                    noise_mask.set(x, y, true);
                }
            }
        }
    }

    Ok(SynthImage {
        image,
        mask: MaskRaster::filled(w, h, true),
        noise_mask,
        truth_tile: spec.tile.clone(),
        blocks,
    })
}

/// Bilinear resample of a luminance grid (half-pixel centres, clamped edges).
fn resize_luma(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    let (fx, fy) = (sw as f64 / dw as f64, sh as f64 / dh as f64);
    let mut out = Vec::with_capacity(dw * dh);
    for oy in 0..dh {
        let y = ((oy as f64 + 0.5) * fy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ty = y - y0 as f64;
        for ox in 0..dw {
            let x = ((ox as f64 + 0.5) * fx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let tx = x - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
            let bottom = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Zero-mean copy and its norm.
fn centred(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c, norm)
}

/// Relative spread below which a luminance field counts as constant.
const FLAT: f64 = 1e-9;

/// Best zero-normalized cross-correlation between the luminance of
/// `extracted` (resized to the tile) and any cyclic shift of the tile.
/// Constant inputs score 0.
pub fn ncc_score(extracted: &RasterImage, truth_tile: &RasterImage) -> f64 {
    let (tw, th) = (truth_tile.width(), truth_tile.height());
    let e: Vec<f64> = extracted.pixels().map(luma).collect();
    let e = resize_luma(&e, extracted.width(), extracted.height(), tw, th);
    let t: Vec<f64> = truth_tile.pixels().map(luma).collect();
    let (e, en) = centred(&e);
    let (t, tn) = centred(&t);
    let scale = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    if en <= FLAT * scale(&e) * (tw * th) as f64 || tn <= FLAT * scale(&t) * (tw * th) as f64 {
        return 0.0;
    }
    let best = (0..th * tw)
        .into_par_iter()
        .map(|s| {
            let (dx, dy) = (s % tw, s / tw);
            let mut acc = 0.0;
            for y in 0..th {
                let ty = (y + dy) % th;
                for x in 0..tw {
                    acc += e[y * tw + x] * t[ty * tw + (x + dx) % tw];
                }
            }
            acc
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    (best / (en * tn)).clamp(-1.0, 1.0)
}

/// Share of the candidate footprint covered by contamination.
pub fn contamination_fraction(cand: &Candidate, noise_mask: &MaskRaster) -> Result<f64, EvalError> {
    let r = cand.rect();
    if !r.fits_in(noise_mask.width(), noise_mask.height()) {
        return Err(EvalError::OutOfBounds {
            rect: r,
            width: noise_mask.width(),
            height: noise_mask.height(),
        });
    }
    let mut hits = 0usize;
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            hits += noise_mask.get(x, y) as usize;
        }
    }
    Ok(hits as f64 / r.area() as f64)
}

/// Mean of the two clamped boundary cosines of a patch.
pub fn boundary_similarity(patch: &RasterImage) -> f64 {
    match boundary_cosines(&to_grayscale(patch)) {
        Ok((rows, cols)) => (rows + cols) / 2.0,
        Err(_) => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub images: usize,
    pub plain_mean_side: f64,
    pub weighted_mean_side: f64,
    /// Percent.
    pub plain_boundary_similarity: f64,
    /// Percent.
    pub weighted_boundary_similarity: f64,
}

/// Mean selected side and mean boundary similarity (percent) of the plain
/// and weighted picks across a corpus of `(result, candidates)` pairs.
pub fn corpus_stats(entries: &[(&SelectionResult, &[Candidate])]) -> Result<CorpusStats, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let n = entries.len() as f64;
    let mut s = [0.0f64; 4];
    for (r, cands) in entries {
        let (p, w) = (&cands[r.chosen_plain], &cands[r.chosen_weighted]);
        s[0] += p.side as f64;
        s[1] += w.side as f64;
        s[2] += boundary_similarity(&p.patch);
        s[3] += boundary_similarity(&w.patch);
    }
    Ok(CorpusStats {
        images: entries.len(),
        plain_mean_side: s[0] / n,
        weighted_mean_side: s[1] / n,
        plain_boundary_similarity: 100.0 * s[2] / n,
        weighted_boundary_similarity: 100.0 * s[3] / n,
    })
}

/// Deterministic brick-wall tile: two courses per tile, the second offset by
/// half a brick, with shaded bricks and light mortar joints.
pub fn brick_tile(size: usize) -> RasterImage {
    let course = size / 2;
    let brick = size;
    let joint = (size / 16).max(1);
    RasterImage::from_fn(size, size, |x, y| {
        let row = y / course;
        let yy = y % course;
        let xx = (x + row * brick / 2) % brick;
        if yy < joint || xx < joint {
            return [205, 200, 190];
        }
        // darker toward the lower right of each brick
        let u = (xx - joint) as f64 / (brick - joint) as f64;
        let v = (yy - joint) as f64 / (course - joint) as f64;
        let shade = 1.0 - 0.35 * (0.6 * u + 0.4 * v);
        let base = if row % 2 == 0 { [170.0, 70.0, 50.0] } else { [140.0, 60.0, 45.0] };
        base.map(|c: f64| (c * shade).round() as u8)
    })
}
