//! Tiled previews and the cluster overlay.

use crate::cluster::ClusterModel;
use crate::raster::{Rect, RasterImage};
use crate::sampler::Candidate;
use crate::selector::SelectionResult;

pub const PLAIN_COLOR: [u8; 3] = [255, 0, 0];
pub const WEIGHTED_COLOR: [u8; 3] = [0, 0, 255];
pub const MEDIAN_COLOR: [u8; 3] = [0, 200, 0];

/// Cluster dot colours, cycled by cluster id.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 160, 0],
    [0, 200, 255],
    [255, 0, 200],
    [160, 255, 0],
    [255, 255, 0],
    [120, 0, 255],
    [0, 255, 140],
    [255, 100, 100],
];

pub fn cluster_color(cluster: usize) -> [u8; 3] {
    PALETTE[cluster % PALETTE.len()]
}

/// Repeats `tex` to fill `out_w x out_h`.
pub fn tile_texture(tex: &RasterImage, out_w: usize, out_h: usize) -> RasterImage {
    let (w, h) = (tex.width(), tex.height());
    RasterImage::from_fn(out_w, out_h, |x, y| tex.pixel(x % w, y % h))
}

fn put_clipped(img: &mut RasterImage, x: isize, y: isize, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.put_pixel(x as usize, y as usize, color);
    }
}

/// One-pixel outline along the border of `rect`.
pub fn outline_pixels(rect: &Rect) -> Vec<(usize, usize)> {
    let (x0, y0, x1, y1) = (rect.x, rect.y, rect.x + rect.w - 1, rect.y + rect.h - 1);
    let mut out = Vec::new();
    for x in x0..=x1 {
        out.push((x, y0));
        if y1 != y0 {
            out.push((x, y1));
        }
    }
    for y in y0 + 1..y1 {
        out.push((x0, y));
        if x1 != x0 {
            out.push((x1, y));
        }
    }
    out
}

/// Copy of `img` with a 3x3 dot per candidate centre coloured by cluster and
/// outlines for the chosen rectangles (red plain, blue weighted, green
/// median). Outlines are drawn median first so plain and weighted stay on top
/// where they coincide.
pub fn render_cluster_overlay(
    img: &RasterImage,
    candidates: &[Candidate],
    model: &ClusterModel,
    result: Option<&SelectionResult>,
) -> RasterImage {
    let mut out = img.clone();
    for (i, c) in candidates.iter().enumerate() {
        let color = cluster_color(model.assignments.get(i).copied().unwrap_or(0));
        let (cx, cy) = (c.center.0 as isize, c.center.1 as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                put_clipped(&mut out, cx + dx, cy + dy, color);
            }
        }
    }
    if let Some(r) = result {
        for (index, color) in [
            (r.chosen_median, MEDIAN_COLOR),
            (r.chosen_weighted, WEIGHTED_COLOR),
            (r.chosen_plain, PLAIN_COLOR),
        ] {
            let Some(rect) = candidates.get(index).map(Candidate::rect) else {
                continue;
            };
            for (x, y) in outline_pixels(&rect) {
                put_clipped(&mut out, x as isize, y as isize, color);
            }
        }
    }
    out
}
