mod common;

use std::process::Command;

use serde_json::Value;

use common::*;

fn reptex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reptex"))
}

#[test]
fn end_to_end_mask_free() {
    let dir = tempfile::tempdir().unwrap();
    let image = write_brick_image(dir.path(), 8, 7);
    let out = dir.path().join("out");
    let status = reptex()
        .args(["--image", image.to_str().unwrap()])
        .args(["--samples", "1000", "--seed", "7", "--embedder", "descriptor"])
        .args(["--k-set", "3,4", "--overlay", "--tile-preview", "64x32", "--threads", "2"])
        .args(["--out-dir", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["report.json", "texture_plain_0.png", "texture_weighted_0.png", "overlay_0.png", "tiled_0.png"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["config"]["k_set"], serde_json::json!([3, 4]));
    assert_eq!(r["config"]["tile_preview"], serde_json::json!([64, 32]));
}

#[test]
fn labels_mode_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let facade = cornice_facade(dir.path());
    let out = dir.path().join("out");
    let status = reptex()
        .args(["--image", facade.image.to_str().unwrap()])
        .args(["--labels", facade.labels.to_str().unwrap()])
        .args(["--class-map", facade.class_map.to_str().unwrap()])
        .args(["--background-class", "wall", "--separator-classes", "cornice,window"])
        .args(["--samples", "500", "--embedder", "descriptor"])
        .args(["--out-dir", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("texture_weighted_0.png").is_file());
    assert!(out.join("texture_weighted_1.png").is_file());
}

#[test]
fn labels_without_class_map_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let facade = cornice_facade(dir.path());
    let out = reptex()
        .args(["--image", facade.image.to_str().unwrap()])
        .args(["--labels", facade.labels.to_str().unwrap()])
        .args(["--out-dir", dir.path().join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--class-map"));
}

#[test]
fn unknown_background_class_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let facade = cornice_facade(dir.path());
    let out_dir = dir.path().join("out");
    let out = reptex()
        .args(["--image", facade.image.to_str().unwrap()])
        .args(["--labels", facade.labels.to_str().unwrap()])
        .args(["--class-map", facade.class_map.to_str().unwrap()])
        .args(["--background-class", "roof"])
        .args(["--out-dir", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["error"]["kind"], "UnknownClass");
}

#[test]
fn unusable_mask_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let image = write_brick_image(dir.path(), 2, 0);
    let mask = dir.path().join("mask.png");
    reptex::raster::save_mask(&reptex::raster::MaskRaster::filled(64, 64, false), &mask).unwrap();
    let out = reptex()
        .args(["--image", image.to_str().unwrap(), "--mask", mask.to_str().unwrap()])
        .args(["--embedder", "descriptor", "--out-dir", dir.path().join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling"));
}

#[test]
fn bad_flag_values_are_rejected() {
    let out = reptex().args(["--image", "x.png", "--tile-preview", "64by32"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = reptex().args(["--image", "x.png", "--embedder", "pca"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
