#![allow(dead_code)]

use std::path::{Path, PathBuf};

use reptex::evalkit::{brick_tile, generate_tiled_image, SynthSpec};
use reptex::raster::{save_image, save_labels, LabelRaster, RasterImage};

pub const WALL: u8 = 0;
pub const CORNICE: u8 = 1;
pub const WINDOW: u8 = 2;

pub fn brick_image(reps: usize, seed: u64) -> RasterImage {
    generate_tiled_image(&SynthSpec {
        tile: brick_tile(32),
        reps_x: reps,
        reps_y: reps,
        jitter_amp: 0.02,
        contamination: None,
        seed,
    })
    .unwrap()
    .image
}

pub fn write_brick_image(dir: &Path, reps: usize, seed: u64) -> PathBuf {
    let path = dir.join("bricks.png");
    save_image(&brick_image(reps, seed), &path).unwrap();
    path
}

pub struct Facade {
    pub image: PathBuf,
    pub labels: PathBuf,
    pub class_map: PathBuf,
    pub raster: LabelRaster,
}

/// 192x160 wall split by a full-width cornice stripe at rows 72..88, with a
/// window in the lower half.
pub fn cornice_facade(dir: &Path) -> Facade {
    let (w, h) = (192, 160);
    let label_at = |x: usize, y: usize| {
        if (72..88).contains(&y) {
            CORNICE
        } else if (120..150).contains(&x) && (104..140).contains(&y) {
            WINDOW
        } else {
            WALL
        }
    };
    let labels: Vec<u8> = (0..w * h).map(|i| label_at(i % w, i / w)).collect();
    let class_map_json = r#"{"0": "wall", "1": "cornice", "2": "window"}"#;
    let map = reptex::raster::parse_class_map(class_map_json).unwrap();
    let raster = LabelRaster::new(w, h, labels, map).unwrap();

    let bricks = brick_image(6, 3);
    let image = RasterImage::from_fn(w, h, |x, y| match label_at(x, y) {
        CORNICE => [230, 230, 225],
        WINDOW => [30, 40, 60],
        _ => bricks.pixel(x, y),
    });

    let paths = Facade {
        image: dir.join("facade.png"),
        labels: dir.join("facade_labels.png"),
        class_map: dir.join("classes.json"),
        raster,
    };
    save_image(&image, &paths.image).unwrap();
    save_labels(&paths.raster, &paths.labels).unwrap();
    std::fs::write(&paths.class_map, class_map_json).unwrap();
    paths
}

/// Sorted list of `(file name, bytes)` in `dir`, skipping the timing sidecar.
pub fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
