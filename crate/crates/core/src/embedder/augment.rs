//! Resampling to the network's canonical size and geometric augmentation.
//!
//! Augmentation only moves pixels around (scale, translate, flip, crop
//! jitter); colours are never altered, so every augmented channel value is a
//! convex combination of original values.

use rand::Rng;
use serde::Serialize;

use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentationSpec {
    pub flip_prob: f64,
    /// Maximum shift as a fraction of the patch side.
    pub translate_max: f64,
    /// Scale factor drawn uniformly from `(lo, hi)`.
    pub scale_range: (f64, f64),
    /// Maximum crop-window shift as a fraction of the patch side.
    pub crop_jitter: f64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            translate_max: 0.25,
            scale_range: (0.8, 1.25),
            crop_jitter: 0.1,
        }
    }
}

impl AugmentationSpec {
    /// No-op augmentation: pairs become `(original, original)`.
    pub const fn identity() -> Self {
        Self {
            flip_prob: 0.0,
            translate_max: 0.0,
            scale_range: (1.0, 1.0),
            crop_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.scale_range;
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err("flip_prob must lie in [0, 1]".into());
        }
        if !(0.0..0.5).contains(&self.translate_max) {
            return Err("translate_max must lie in [0, 0.5)".into());
        }
        if !(0.0..0.5).contains(&self.crop_jitter) {
            return Err("crop_jitter must lie in [0, 0.5)".into());
        }
        if !(lo > 0.0 && lo <= 1.0 && 1.0 <= hi && hi.is_finite()) {
            return Err("scale_range must satisfy 0 < lo <= 1 <= hi".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPair {
    pub augmented: RasterImage,
    pub original: RasterImage,
}

/// Concrete transform parameters drawn for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Transform {
    scale: f64,
    shift_x: f64,
    shift_y: f64,
    flip: bool,
}

impl Transform {
    const IDENTITY: Self = Self {
        scale: 1.0,
        shift_x: 0.0,
        shift_y: 0.0,
        flip: false,
    };

    fn draw(spec: &AugmentationSpec, w: usize, h: usize, rng: &mut impl Rng) -> Self {
        let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let scale = uniform(spec.scale_range.0, spec.scale_range.1);
        let tx = uniform(-spec.translate_max, spec.translate_max) * w as f64;
        let ty = uniform(-spec.translate_max, spec.translate_max) * h as f64;
        let flip = spec.flip_prob > 0.0 && uniform(0.0, 1.0) < spec.flip_prob;
        let jx = uniform(-spec.crop_jitter, spec.crop_jitter) * w as f64;
        let jy = uniform(-spec.crop_jitter, spec.crop_jitter) * h as f64;
        // jitter happens after the flip, which mirrors its horizontal sign
        Self {
            scale,
            shift_x: tx + if flip { -jx } else { jx },
            shift_y: ty + jy,
            flip,
        }
    }
}

/// Folds a continuous coordinate into `[-0.5, n - 0.5]` by mirroring at the
/// outer pixel edges.
#[inline]
fn reflect(q: f64, n: usize) -> f64 {
    let n = n as f64;
    if (-0.5..=n - 0.5).contains(&q) {
        return q;
    }
    let period = 2.0 * n;
    let mut t = (q + 0.5).rem_euclid(period);
    if t > n {
        t = period - t;
    }
    t - 0.5
}

#[inline]
fn bilinear(img: &RasterImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let (p00, p10, p01, p11) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Renders `transform(patch)` at `size x size` with bilinear sampling.
///
/// Output pixel centres map to source coordinates with the usual
/// half-pixel convention; the transform then scales about the patch centre
/// and shifts, with mirror padding outside the patch.
fn render(patch: &RasterImage, size: usize, t: Transform) -> RasterImage {
    let (w, h) = (patch.width(), patch.height());
    let (sx, sy) = (w as f64 / size as f64, h as f64 / size as f64);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    RasterImage::from_fn(size, size, |ox, oy| {
        let ox = if t.flip { size - 1 - ox } else { ox };
        let px = (ox as f64 + 0.5) * sx - 0.5;
        let py = (oy as f64 + 0.5) * sy - 0.5;
        let qx = reflect((px - cx) / t.scale + cx - t.shift_x, w);
        let qy = reflect((py - cy) / t.scale + cy - t.shift_y, h);
        let v = bilinear(patch, qx, qy);
        [0, 1, 2].map(|c| v[c].round().clamp(0.0, 255.0) as u8)
    })
}

/// Bilinear resample to `size x size`.
pub fn canonicalize(patch: &RasterImage, size: usize) -> RasterImage {
    if patch.width() == size && patch.height() == size {
        return patch.clone();
    }
    render(patch, size, Transform::IDENTITY)
}

/// Builds `(canonicalize(transform(patch)), canonicalize(patch))`.
///
/// The transform applies, in order, a scale drawn from `scale_range`, a
/// translation up to `translate_max` of the side with mirror padding, a
/// horizontal flip with probability `flip_prob`, and a crop jitter up to
/// `crop_jitter` of the side.
pub fn make_augmented_pair(
    patch: &RasterImage,
    spec: &AugmentationSpec,
    size: usize,
    rng: &mut impl Rng,
) -> AugmentedPair {
    let t = Transform::draw(spec, patch.width(), patch.height(), rng);
    let original = canonicalize(patch, size);
    let augmented = if t == Transform::IDENTITY {
        original.clone()
    } else {
        render(patch, size, t)
    };
    AugmentedPair {
        augmented,
        original,
    }
}

/// Just the augmented image, skipping the original (used by the trainer,
/// which canonicalizes each patch once).
pub(crate) fn augment_only(patch: &RasterImage, spec: &AugmentationSpec, size: usize, rng: &mut impl Rng) -> RasterImage {
    let t = Transform::draw(spec, patch.width(), patch.height(), rng);
    if t == Transform::IDENTITY {
        canonicalize(patch, size)
    } else {
        render(patch, size, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn textured(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| [(x * 9 + y * 3) as u8, (y * 11) as u8, ((x * y) % 251) as u8])
    }

    #[test]
    fn canonical_patch_is_untouched() {
        let p = textured(32, 32);
        assert_eq!(canonicalize(&p, 32), p);
        assert_eq!(render(&p, 32, Transform::IDENTITY), p);
    }

    #[test]
    fn uniform_patch_stays_uniform() {
        for side in [7, 16, 48] {
            let p = RasterImage::filled(side, side, [12, 200, 77]);
            assert!(canonicalize(&p, 32).pixels().all(|px| px == [12, 200, 77]));
        }
    }

    #[test]
    fn halving_a_checkerboard_averages_blocks() {
        let src = RasterImage::from_fn(64, 64, |x, y| {
            let v = if (x + y) % 2 == 0 { 0 } else { 200 };
            [v, (x * 4) as u8, (y * 2) as u8]
        });
        let out = canonicalize(&src, 32);
        for oy in 0..32 {
            for ox in 0..32 {
                for c in 0..3 {
                    let mut sum = 0.0;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            sum += src.pixel(2 * ox + dx, 2 * oy + dy)[c] as f64;
                        }
                    }
                    assert_eq!(out.pixel(ox, oy)[c], (sum / 4.0).round() as u8, "({ox},{oy}) ch {c}");
                }
            }
        }
    }

    #[test]
    fn identity_spec_gives_equal_pair() {
        let p = textured(20, 20);
        let mut rng = stream(1, Domain::Augment, 0);
        let pair = make_augmented_pair(&p, &AugmentationSpec::identity(), 32, &mut rng);
        assert_eq!(pair.augmented, pair.original);
    }

    #[test]
    fn flip_only_spec_mirrors() {
        let p = textured(24, 24);
        let spec = AugmentationSpec {
            flip_prob: 1.0,
            ..AugmentationSpec::identity()
        };
        let mut rng = stream(2, Domain::Augment, 0);
        let pair = make_augmented_pair(&p, &spec, 32, &mut rng);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(pair.augmented.pixel(x, y), pair.original.pixel(31 - x, y));
            }
        }
    }

    #[test]
    fn augmentation_stays_within_channel_range() {
        let p = RasterImage::from_fn(30, 30, |x, y| [40 + (x * 5) as u8, 90 + ((x + y) % 40) as u8, 180 - y as u8]);
        let mut lo = [255u8; 3];
        let mut hi = [0u8; 3];
        for px in p.pixels() {
            for c in 0..3 {
                lo[c] = lo[c].min(px[c]);
                hi[c] = hi[c].max(px[c]);
            }
        }
        let spec = AugmentationSpec {
            flip_prob: 0.5,
            translate_max: 0.45,
            scale_range: (0.5, 2.0),
            crop_jitter: 0.3,
        };
        for draw in 0..100 {
            let mut rng = stream(3, Domain::Augment, draw);
            let pair = make_augmented_pair(&p, &spec, 32, &mut rng);
            for px in pair.augmented.pixels() {
                for c in 0..3 {
                    assert!(px[c] >= lo[c] && px[c] <= hi[c], "draw {draw}: {px:?}");
                }
            }
        }
    }

    #[test]
    fn reflect_folds_into_range() {
        assert_eq!(reflect(2.0, 5), 2.0);
        assert_eq!(reflect(-1.5, 5), 0.5);
        assert_eq!(reflect(5.5, 5), 3.5);
        for q in [-17.3, -3.0, 9.9, 31.0] {
            let r = reflect(q, 5);
            assert!((-0.5..=4.5).contains(&r), "{q} -> {r}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(AugmentationSpec::default().validate().is_ok());
        assert!(AugmentationSpec::identity().validate().is_ok());
        let bad = AugmentationSpec {
            translate_max: 0.5,
            ..AugmentationSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentationSpec {
            scale_range: (1.1, 2.0),
            ..AugmentationSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
