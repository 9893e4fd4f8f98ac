//! Final pick inside the largest cluster: plain distance to the centroid,
//! and the same distance weighted by patch width and boundary similarity.

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{largest_cluster, ClusterModel};
use crate::raster::{to_grayscale, GrayRaster};
use crate::sampler::Candidate;

/// Lower clamp for each boundary cosine.
pub const COSINE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectorError {
    #[error("vector {index} has dimension {got}, centre has {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },
    #[error("boundary factor needs at least 2x2 pixels, got {width}x{height}")]
    DegeneratePatch { width: usize, height: usize },
    #[error("{candidates} candidates but {embeddings} embeddings")]
    Misaligned { candidates: usize, embeddings: usize },
    #[error("cluster model covers {got} vectors, expected {expected}")]
    ModelMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub cluster_id: usize,
    pub member_indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub width_factors: Vec<f64>,
    pub boundary_factors: Vec<f64>,
    pub weights: Vec<f64>,
    pub weighted_distances: Vec<f64>,
    pub chosen_plain: usize,
    pub chosen_weighted: usize,
    pub chosen_median: usize,
}

pub fn center_distances<V: AsRef<[f64]>>(embeddings: &[V], center: &[f64]) -> Result<Vec<f64>, SelectorError> {
    embeddings
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let e = e.as_ref();
            if e.len() != center.len() {
                return Err(SelectorError::DimensionMismatch {
                    index,
                    got: e.len(),
                    expected: center.len(),
                });
            }
            Ok(e.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        })
        .collect()
}

/// `1 / sqrt(side * side)` for a square candidate.
pub fn width_factor(side: usize) -> f64 {
    1.0 / side as f64
}

/// Cosine of two non-negative vectors, clamped to `[COSINE_FLOOR, 1]`.
/// Two all-zero vectors are identical and score 1; one zero vector scores
/// the floor.
pub fn boundary_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>();
    let nb = b.iter().map(|x| x * x).sum::<f64>();
    // one square root of the product keeps cos(v, v) exactly 1
    let cos = match (na > 0.0, nb > 0.0) {
        (false, false) => 1.0,
        (true, true) => dot / (na * nb).sqrt(),
        _ => 0.0,
    };
    cos.clamp(COSINE_FLOOR, 1.0)
}

/// Clamped top/bottom row and left/right column cosines.
pub fn boundary_cosines(gray: &GrayRaster) -> Result<(f64, f64), SelectorError> {
    let (w, h) = (gray.width(), gray.height());
    if w < 2 || h < 2 {
        return Err(SelectorError::DegeneratePatch { width: w, height: h });
    }
    let rows = boundary_cosine(gray.row(0), gray.row(h - 1));
    let cols = boundary_cosine(&gray.column(0), &gray.column(w - 1));
    Ok((rows, cols))
}

/// `2 / (cos(top, bottom) + cos(left, right))`, in `[1, 1 / COSINE_FLOOR]`.
pub fn boundary_factor(gray: &GrayRaster) -> Result<f64, SelectorError> {
    let (rows, cols) = boundary_cosines(gray)?;
    Ok(2.0 / (rows + cols))
}

pub fn weight(t: f64, b: f64) -> f64 {
    t * b
}

pub fn weighted_distance(d: f64, v: f64) -> f64 {
    d * v
}

/// Position of the smallest value; ties go to the smaller candidate index.
fn argmin(values: &[f64], indices: &[usize]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] || (values[i] == values[best] && indices[i] < indices[best]) {
            best = i;
        }
    }
    best
}

/// Restricts to the largest cluster and scores its members.
///
/// `chosen_median` is the member at the lower median rank of `D`
/// (sorted by distance, then index).
pub fn select<V: AsRef<[f64]>>(
    candidates: &[Candidate],
    embeddings: &[V],
    model: &ClusterModel,
) -> Result<SelectionResult, SelectorError> {
    if candidates.len() != embeddings.len() {
        return Err(SelectorError::Misaligned {
            candidates: candidates.len(),
            embeddings: embeddings.len(),
        });
    }
    if model.assignments.len() != embeddings.len() {
        return Err(SelectorError::ModelMismatch {
            got: model.assignments.len(),
            expected: embeddings.len(),
        });
    }
    let (cluster_id, members) = largest_cluster(embeddings, model);
    let member_vecs: Vec<&[f64]> = members.iter().map(|&i| embeddings[i].as_ref()).collect();
    let distances = center_distances(&member_vecs, &model.centroids[cluster_id])?;
    let width_factors: Vec<f64> = members.iter().map(|&i| width_factor(candidates[i].side)).collect();
    let boundary_factors = members
        .iter()
        .map(|&i| boundary_factor(&to_grayscale(&candidates[i].patch)))
        .collect::<Result<Vec<_>, _>>()?;
    let weights: Vec<f64> = width_factors.iter().zip(&boundary_factors).map(|(&t, &b)| weight(t, b)).collect();
    let weighted_distances: Vec<f64> = distances.iter().zip(&weights).map(|(&d, &v)| weighted_distance(d, v)).collect();

    let plain = argmin(&distances, &members);
    let weighted = argmin(&weighted_distances, &members);
    let mut ranked: Vec<usize> = (0..members.len()).collect();
    ranked.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(members[a].cmp(&members[b])));
    let median = ranked[(ranked.len() - 1) / 2];

    Ok(SelectionResult {
        cluster_id,
        chosen_plain: members[plain],
        chosen_weighted: members[weighted],
        chosen_median: members[median],
        member_indices: members,
        distances,
        width_factors,
        boundary_factors,
        weights,
        weighted_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterImage;

    fn gray(w: usize, h: usize, values: &[f64]) -> GrayRaster {
        GrayRaster::new(w, h, values.to_vec()).unwrap()
    }

    fn candidate(index: usize, side: usize, patch: RasterImage) -> Candidate {
        Candidate {
            index,
            center: (100, 100),
            side,
            patch,
            subarea_id: 0,
            mask_coverage: 1.0,
        }
    }

    fn model(assignments: Vec<usize>, centroids: Vec<Vec<f64>>) -> ClusterModel {
        ClusterModel {
            k: centroids.len(),
            centroids,
            assignments,
            inertia: 0.0,
            dbi: 0.0,
            inertia_history: vec![],
            iterations: 0,
        }
    }

    #[test]
    fn distances() {
        let c = vec![0.0; 5];
        let d = center_distances(&[vec![3.0, 4.0, 0.0, 0.0, 0.0], c.clone()], &c).unwrap();
        assert_eq!(d, vec![5.0, 0.0]);
        assert!(matches!(
            center_distances(&[vec![1.0]], &c),
            Err(SelectorError::DimensionMismatch { index: 0, got: 1, expected: 5 })
        ));
    }

    #[test]
    fn width_factor_values() {
        assert_eq!(width_factor(48), 1.0 / 48.0);
        assert_eq!(width_factor(16), 0.0625);
        assert_eq!(width_factor(1), 1.0);
    }

    #[test]
    fn boundary_factor_values() {
        assert_eq!(boundary_factor(&gray(3, 3, &[0.4; 9])).unwrap(), 1.0);
        assert_eq!(boundary_factor(&gray(2, 2, &[1.0, 1.0, 2.0, 2.0])).unwrap(), 1.0);
        // top [1,0] bottom [1,1]; left [1,1] right [0,1]
        let b = boundary_factor(&gray(2, 2, &[1.0, 0.0, 1.0, 1.0])).unwrap();
        assert!((b - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            boundary_factor(&gray(1, 4, &[0.0; 4])),
            Err(SelectorError::DegeneratePatch { width: 1, height: 4 })
        );
    }

    #[test]
    fn boundary_factor_is_bounded_for_disjoint_edges() {
        // top row lit only on the left, bottom only on the right
        let b = boundary_factor(&gray(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(b, 2.0 / (2.0 * COSINE_FLOOR));
        let black = boundary_factor(&gray(2, 2, &[0.0; 4])).unwrap();
        assert_eq!(black, 1.0);
    }

    #[test]
    fn weights_and_products() {
        assert_eq!(weight(1.0, 1.0), 1.0);
        assert_eq!(weight(1.0 / 48.0, 1.0), 1.0 / 48.0);
        assert!((weight(0.0625, 2f64.sqrt()) - 0.0883883).abs() < 1e-7);
        assert_eq!(weighted_distance(0.0, 7.0), 0.0);
        assert_eq!(weighted_distance(2.0, 0.5), 1.0);
    }

    #[test]
    fn single_member_cluster_picks_it_everywhere() {
        let cands = vec![
            candidate(0, 16, RasterImage::filled(16, 16, [10, 10, 10])),
            candidate(1, 20, RasterImage::filled(20, 20, [90, 10, 10])),
            candidate(2, 24, RasterImage::filled(24, 24, [10, 90, 10])),
        ];
        let emb = vec![vec![0.0], vec![5.0], vec![5.5]];
        let m = model(vec![0, 1, 1], vec![vec![0.0], vec![5.25]]);
        // cluster 1 is larger
        let r = select(&cands, &emb, &m).unwrap();
        assert_eq!(r.cluster_id, 1);
        assert_eq!(r.member_indices, vec![1, 2]);
        let m = model(vec![0, 1, 2], vec![vec![0.0], vec![5.0], vec![5.5]]);
        let r = select(&cands, &emb, &m).unwrap();
        assert_eq!(r.member_indices, vec![0]);
        assert_eq!((r.chosen_plain, r.chosen_weighted, r.chosen_median), (0, 0, 0));
    }

    #[test]
    fn equal_distance_prefers_the_wider_member() {
        let cands = vec![
            candidate(0, 16, RasterImage::filled(16, 16, [50, 50, 50])),
            candidate(1, 48, RasterImage::filled(48, 48, [50, 50, 50])),
        ];
        let emb = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let m = model(vec![0, 0], vec![vec![0.0, 0.0], vec![9.0, 9.0]]);
        let r = select(&cands, &emb, &m).unwrap();
        assert_eq!(r.distances, vec![1.0, 1.0]);
        assert_eq!(r.chosen_plain, 0);
        assert_eq!(r.chosen_weighted, 1);
        for i in 0..2 {
            assert_eq!(r.weights[i], r.width_factors[i] * r.boundary_factors[i]);
            assert_eq!(r.weighted_distances[i], r.distances[i] * r.weights[i]);
        }
    }

    #[test]
    fn coincident_optimum_and_median() {
        let cands: Vec<Candidate> = (0..5)
            .map(|i| candidate(i, 48 - i, RasterImage::filled(48 - i, 48 - i, [40, 40, 40])))
            .collect();
        let emb: Vec<Vec<f64>> = [0.1, 0.4, 0.2, 0.3, 0.5].iter().map(|&d| vec![d]).collect();
        let m = model(vec![0; 5], vec![vec![0.0], vec![100.0]]);
        let r = select(&cands, &emb, &m).unwrap();
        assert_eq!(r.chosen_plain, 0);
        assert_eq!(r.chosen_weighted, 0);
        assert_eq!(r.chosen_median, 3);
    }

    #[test]
    fn weighted_choice_ignores_uniform_rescaling_of_weights() {
        let d = [0.7, 0.3, 0.9, 0.31];
        let v = [0.02, 0.05, 0.01, 0.048];
        let idx = [0, 1, 2, 3];
        let w: Vec<f64> = d.iter().zip(&v).map(|(&d, &v)| weighted_distance(d, v)).collect();
        let base = argmin(&w, &idx);
        for scale in [1e-3, 0.5, 7.0, 1e4] {
            let w: Vec<f64> = d.iter().zip(&v).map(|(&d, &v)| weighted_distance(d, v * scale)).collect();
            assert_eq!(argmin(&w, &idx), base);
        }
    }

    #[test]
    fn misaligned_inputs() {
        let cands = vec![candidate(0, 16, RasterImage::filled(16, 16, [0, 0, 0]))];
        let m = model(vec![0, 1], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            select(&cands, &[vec![0.0], vec![1.0]], &m),
            Err(SelectorError::Misaligned { .. })
        ));
    }
}
