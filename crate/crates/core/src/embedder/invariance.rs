//! Translate-invariance of an embedding on periodic patches.

use super::model::{embed_all, EmbedderModel};
use super::EmbedderError;
use crate::raster::RasterImage;

/// Cyclic shift by `(dx, dy)` pixels. On a patch cut at whole periods of a
/// periodic texture this equals cutting the same window at an offset.
pub fn cyclic_translate(patch: &RasterImage, dx: usize, dy: usize) -> RasterImage {
    let (w, h) = (patch.width(), patch.height());
    RasterImage::from_fn(w, h, |x, y| patch.pixel((x + dx) % w, (y + dy) % h))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lower median of the pairwise distances within `vectors`.
fn median_pairwise(vectors: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(vectors.len() * vectors.len().saturating_sub(1) / 2);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            d.push(distance(&vectors[i], &vectors[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    d[(d.len() - 1) / 2]
}

/// Fraction of `(patch, translated patch)` pairs whose embedding distance is
/// below the median pairwise distance among the first elements.
pub fn translate_invariance_fraction(
    model: &EmbedderModel,
    pairs: &[(RasterImage, RasterImage)],
) -> Result<f64, EmbedderError> {
    if pairs.len() < 2 {
        return Err(EmbedderError::InvalidConfig("need at least two pairs".into()));
    }
    let originals: Vec<&RasterImage> = pairs.iter().map(|(p, _)| p).collect();
    let moved: Vec<&RasterImage> = pairs.iter().map(|(_, q)| q).collect();
    let a: Vec<Vec<f64>> = embed_all(model, &originals)?.into_iter().map(|e| e.0).collect();
    let b: Vec<Vec<f64>> = embed_all(model, &moved)?.into_iter().map(|e| e.0).collect();
    let median = median_pairwise(&a);
    let hits = a.iter().zip(&b).filter(|(x, y)| distance(x, y) < median).count();
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(seed: usize) -> RasterImage {
        RasterImage::from_fn(16, 16, |x, y| [((x * 16 + seed * 37) % 256) as u8, ((y * 9) % 256) as u8, (seed * 50 % 256) as u8])
    }

    #[test]
    fn full_shift_is_identity_and_shifts_compose() {
        let p = patch(1);
        assert_eq!(cyclic_translate(&p, 16, 32), p);
        assert_eq!(cyclic_translate(&cyclic_translate(&p, 3, 5), 2, 1), cyclic_translate(&p, 5, 6));
    }

    #[test]
    fn median_is_lower_middle() {
        let v = vec![vec![0.0], vec![1.0], vec![3.0]];
        // distances 1, 3, 2
        assert_eq!(median_pairwise(&v), 2.0);
        let v = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]];
        // 1 2 3 4 6 7
        assert_eq!(median_pairwise(&v), 3.0);
    }

    #[test]
    fn descriptor_histograms_make_cyclic_pairs_close() {
        let pairs: Vec<(RasterImage, RasterImage)> = (0..12)
            .map(|i| {
                let p = patch(i);
                let q = cyclic_translate(&p, 5, 3);
                (p, q)
            })
            .collect();
        let f = translate_invariance_fraction(&EmbedderModel::descriptor(), &pairs).unwrap();
        assert!(f >= 0.9, "{f}");
    }

    #[test]
    fn needs_two_pairs() {
        let p = patch(0);
        assert!(translate_invariance_fraction(&EmbedderModel::descriptor(), &[(p.clone(), p)]).is_err());
    }
}
