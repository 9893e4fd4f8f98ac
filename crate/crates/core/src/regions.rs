//! Subarea discovery: connected background regions split by other classes.

use std::collections::VecDeque;

use thiserror::Error;

use crate::raster::{LabelRaster, MaskRaster, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegionError {
    #[error("no pixel carries the background class {0}")]
    NoBackgroundPixels(u8),
    #[error("background class {0} is also listed as a separator")]
    BackgroundIsSeparator(u8),
    #[error("subarea pixel ({x}, {y}) lies outside a {width}x{height} raster")]
    PixelOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// One maximal 4-connected run of background pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subarea {
    pub id: usize,
    /// Member coordinates `(x, y)` in row-major order.
    pub member_pixels: Vec<(usize, usize)>,
    pub bounding_box: Rect,
    /// Separator classes touching the subarea (4-neighbourhood), ascending.
    pub adjacent_separators: Vec<u8>,
}

impl Subarea {
    pub fn pixel_count(&self) -> usize {
        self.member_pixels.len()
    }
}

/// Smallest subarea that downstream sampling still considers.
pub fn min_subarea_pixels(min_side: usize) -> usize {
    min_side * min_side * 2
}

const NEIGHBOURS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Labels 4-connected components of `background_class` by breadth-first search.
///
/// Every non-background class blocks a path; `separator_classes` only decides
/// which barriers get reported on each subarea. Output is sorted by pixel count
/// (descending), then by the bounding box's top-left corner `(y, x)`, then by
/// the first member in row-major order; ids follow that order.
pub fn find_subareas(
    labels: &LabelRaster,
    background_class: u8,
    separator_classes: &[u8],
) -> Result<Vec<Subarea>, RegionError> {
    if separator_classes.contains(&background_class) {
        return Err(RegionError::BackgroundIsSeparator(background_class));
    }
    let (w, h) = (labels.width(), labels.height());
    let raw = labels.labels();
    let mut visited = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if visited[start] || raw[start] != background_class {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut seps = [false; 256];
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let l = raw[j];
                if l == background_class {
                    if !visited[j] {
                        visited[j] = true;
                        queue.push_back(j);
                    }
                } else if separator_classes.contains(&l) {
                    seps[l as usize] = true;
                }
            }
        }
        members.sort_unstable();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for &i in &members {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        out.push(Subarea {
            id: 0,
            member_pixels: members.iter().map(|&i| (i % w, i / w)).collect(),
            bounding_box: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            adjacent_separators: (0..=255u8).filter(|&c| seps[c as usize]).collect(),
        });
    }

    if out.is_empty() {
        return Err(RegionError::NoBackgroundPixels(background_class));
    }
    out.sort_by(|a, b| {
        b.pixel_count()
            .cmp(&a.pixel_count())
            .then(a.bounding_box.y.cmp(&b.bounding_box.y))
            .then(a.bounding_box.x.cmp(&b.bounding_box.x))
            .then((a.member_pixels[0].1, a.member_pixels[0].0).cmp(&(b.member_pixels[0].1, b.member_pixels[0].0)))
    });
    for (id, s) in out.iter_mut().enumerate() {
        s.id = id;
    }
    Ok(out)
}

pub fn subarea_mask(sub: &Subarea, width: usize, height: usize) -> Result<MaskRaster, RegionError> {
    let mut mask = MaskRaster::filled(width.max(1), height.max(1), false);
    for &(x, y) in &sub.member_pixels {
        if x >= width || y >= height {
            return Err(RegionError::PixelOutOfBounds {
                x,
                y,
                width,
                height,
            });
        }
        mask.set(x, y, true);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{mask_from_labels, ClassMap};
    use proptest::prelude::*;

    const BG: u8 = 0;
    const WIN: u8 = 1;
    const CORNICE: u8 = 2;

    fn classes() -> ClassMap {
        [
            (BG, "background".into()),
            (WIN, "window".into()),
            (CORNICE, "cornice".into()),
        ]
        .into()
    }

    fn raster(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> LabelRaster {
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                v.push(f(x, y));
            }
        }
        LabelRaster::new(w, h, v, classes()).unwrap()
    }

    /// Recursive flood fill used as an independent component oracle.
    fn oracle_components(l: &LabelRaster) -> Vec<Vec<(usize, usize)>> {
        fn fill(l: &LabelRaster, x: usize, y: usize, seen: &mut Vec<Vec<bool>>, acc: &mut Vec<(usize, usize)>) {
            if seen[y][x] || l.get(x, y) != BG {
                return;
            }
            seen[y][x] = true;
            acc.push((x, y));
            if x > 0 {
                fill(l, x - 1, y, seen, acc);
            }
            if y > 0 {
                fill(l, x, y - 1, seen, acc);
            }
            if x + 1 < l.width() {
                fill(l, x + 1, y, seen, acc);
            }
            if y + 1 < l.height() {
                fill(l, x, y + 1, seen, acc);
            }
        }
        let mut seen = vec![vec![false; l.width()]; l.height()];
        let mut comps = Vec::new();
        for y in 0..l.height() {
            for x in 0..l.width() {
                let mut acc = Vec::new();
                fill(l, x, y, &mut seen, &mut acc);
                if !acc.is_empty() {
                    acc.sort_by_key(|&(x, y)| (y, x));
                    comps.push(acc);
                }
            }
        }
        comps.sort();
        comps
    }

    #[test]
    fn all_background_is_one_subarea() {
        let l = raster(5, 4, |_, _| BG);
        let subs = find_subareas(&l, BG, &[CORNICE]).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].pixel_count(), 20);
        assert_eq!(subs[0].bounding_box, Rect::new(0, 0, 5, 4));
        assert!(subs[0].adjacent_separators.is_empty());
    }

    #[test]
    fn horizontal_cornice_splits_in_two() {
        // rows 0..3 upper (larger), row 3 cornice, rows 4..6 lower
        let l = raster(6, 6, |_, y| if y == 3 { CORNICE } else { BG });
        let subs = find_subareas(&l, BG, &[CORNICE]).unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].bounding_box, Rect::new(0, 0, 6, 3));
        assert_eq!(subs[1].bounding_box, Rect::new(0, 4, 6, 2));
        assert_eq!(subs[0].adjacent_separators, vec![CORNICE]);
        assert_eq!((subs[0].id, subs[1].id), (0, 1));
    }

    #[test]
    fn l_shaped_cornice_matches_flood_fill_oracle() {
        // L: vertical bar at x=3 for y<5, horizontal bar at y=5 for x>=3; a window blob too.
        let l = raster(8, 8, |x, y| {
            if (x == 3 && y <= 5) || (y == 5 && x >= 3) {
                CORNICE
            } else if (6..8).contains(&x) && (1..3).contains(&y) {
                WIN
            } else {
                BG
            }
        });
        let subs = find_subareas(&l, BG, &[CORNICE]).unwrap();
        let mut ours: Vec<_> = subs.iter().map(|s| s.member_pixels.clone()).collect();
        ours.sort();
        assert_eq!(ours, oracle_components(&l));
        assert_eq!(subs.len(), 2);
    }

    #[test]
    fn equal_sized_components_order_by_corner() {
        // two 2x2 blocks separated by a column of cornice
        let l = raster(5, 2, |x, _| if x == 2 { CORNICE } else { BG });
        let subs = find_subareas(&l, BG, &[CORNICE]).unwrap();
        assert_eq!(subs[0].bounding_box.x, 0);
        assert_eq!(subs[1].bounding_box.x, 3);
    }

    #[test]
    fn errors() {
        let l = raster(3, 3, |_, _| WIN);
        assert_eq!(
            find_subareas(&l, BG, &[CORNICE]).unwrap_err(),
            RegionError::NoBackgroundPixels(BG)
        );
        assert_eq!(
            find_subareas(&l, BG, &[BG]).unwrap_err(),
            RegionError::BackgroundIsSeparator(BG)
        );
        let sub = Subarea {
            id: 0,
            member_pixels: vec![(4, 0)],
            bounding_box: Rect::new(4, 0, 1, 1),
            adjacent_separators: vec![],
        };
        assert!(matches!(
            subarea_mask(&sub, 3, 3),
            Err(RegionError::PixelOutOfBounds { x: 4, .. })
        ));
    }

    #[test]
    fn subarea_mask_cases() {
        let full = raster(4, 3, |_, _| BG);
        let subs = find_subareas(&full, BG, &[]).unwrap();
        assert_eq!(subarea_mask(&subs[0], 4, 3).unwrap().count_true(), 12);

        let single = Subarea {
            id: 0,
            member_pixels: vec![(1, 2)],
            bounding_box: Rect::new(1, 2, 1, 1),
            adjacent_separators: vec![],
        };
        let m = subarea_mask(&single, 4, 3).unwrap();
        assert_eq!(m.count_true(), 1);
        assert!(m.get(1, 2));

        let split = raster(6, 6, |_, y| if y == 3 { CORNICE } else { BG });
        let subs = find_subareas(&split, BG, &[CORNICE]).unwrap();
        let a = subarea_mask(&subs[0], 6, 6).unwrap();
        let b = subarea_mask(&subs[1], 6, 6).unwrap();
        let bg = mask_from_labels(&split, BG).unwrap();
        for i in 0..36 {
            assert!(!(a.bits()[i] && b.bits()[i]));
            assert_eq!(a.bits()[i] || b.bits()[i], bg.bits()[i]);
        }
    }

    proptest! {
        #[test]
        fn union_equals_background_and_no_separator_inside(
            cells in proptest::collection::vec(0u8..3, 100),
        ) {
            let l = LabelRaster::new(10, 10, cells, classes()).unwrap();
            let Ok(subs) = find_subareas(&l, BG, &[CORNICE]) else {
                prop_assert_eq!(mask_from_labels(&l, BG).unwrap().count_true(), 0);
                return Ok(());
            };
            let bg = mask_from_labels(&l, BG).unwrap();
            let mut union = vec![0u8; 100];
            for s in &subs {
                for &(x, y) in &s.member_pixels {
                    prop_assert_eq!(l.get(x, y), BG);
                    prop_assert!(s.bounding_box.contains(x, y));
                    union[y * 10 + x] += 1;
                }
            }
            for i in 0..100 {
                prop_assert_eq!(union[i] == 1, bg.bits()[i]);
                prop_assert!(union[i] <= 1);
            }
            let mut ours: Vec<_> = subs.iter().map(|s| s.member_pixels.clone()).collect();
            ours.sort();
            prop_assert_eq!(ours, oracle_components(&l));
            for pair in subs.windows(2) {
                prop_assert!(pair[0].pixel_count() >= pair[1].pixel_count());
            }
        }
    }
}
