use std::ffi::{CStr, CString};
use std::ptr;

use reptex_ffi::*;

fn stripes(w: usize, h: usize) -> Vec<u8> {
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let v = if (x / 8 + y / 8) % 2 == 0 { 200 } else { 40 };
            rgb.extend_from_slice(&[v, (x * 3 % 256) as u8, (y * 5 % 256) as u8]);
        }
    }
    rgb
}

fn last_error() -> String {
    let p = reptex_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn image(w: usize, h: usize) -> *mut ReptexImage {
    let rgb = stripes(w, h);
    let mut img = ptr::null_mut();
    assert_eq!(reptex_image_new(w, h, rgb.as_ptr(), &mut img), ReptexStatus::Ok);
    img
}

unsafe fn fast_params(seed: u64) -> *mut ReptexParams {
    let p = reptex_params_new();
    assert_eq!(reptex_params_set_embedder(p, ReptexEmbedder::Descriptor), ReptexStatus::Ok);
    assert_eq!(reptex_params_set_samples(p, 300), ReptexStatus::Ok);
    assert_eq!(reptex_params_set_seed(p, seed), ReptexStatus::Ok);
    p
}

#[test]
fn image_roundtrip_through_handles() {
    unsafe {
        let img = image(12, 7);
        assert_eq!(reptex_image_width(img), 12);
        assert_eq!(reptex_image_height(img), 7);
        let mut buf = vec![0u8; 12 * 7 * 3];
        assert_eq!(reptex_image_copy_pixels(img, buf.as_mut_ptr(), buf.len()), ReptexStatus::Ok);
        assert_eq!(buf, stripes(12, 7));

        let mut small = vec![0u8; 10];
        assert_eq!(reptex_image_copy_pixels(img, small.as_mut_ptr(), small.len()), ReptexStatus::OutOfRange);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("a.png").to_str().unwrap()).unwrap();
        assert_eq!(reptex_image_save(img, path.as_ptr()), ReptexStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(reptex_image_load(path.as_ptr(), &mut back), ReptexStatus::Ok);
        let mut buf2 = vec![0u8; buf.len()];
        assert_eq!(reptex_image_copy_pixels(back, buf2.as_mut_ptr(), buf2.len()), ReptexStatus::Ok);
        assert_eq!(buf, buf2);
        reptex_image_free(back);
        reptex_image_free(img);
    }
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(reptex_image_new(4, 4, ptr::null(), &mut img), ReptexStatus::NullArgument);
        assert!(last_error().contains("rgb"));
        assert_eq!(reptex_image_load(ptr::null(), &mut img), ReptexStatus::NullArgument);
        assert_eq!(reptex_params_set_seed(ptr::null_mut(), 1), ReptexStatus::NullArgument);
        let mut out = ptr::null_mut();
        assert_eq!(
            reptex_extract(ptr::null(), ptr::null(), ptr::null(), &mut out),
            ReptexStatus::NullArgument
        );
        assert_eq!(reptex_image_width(ptr::null()), 0);
        assert_eq!(reptex_result_selected_k(ptr::null()), 0);
        reptex_image_free(ptr::null_mut());
        reptex_mask_free(ptr::null_mut());
        reptex_params_free(ptr::null_mut());
        reptex_result_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        let rgb = [0u8; 3];
        assert_eq!(reptex_image_new(0, 1, rgb.as_ptr(), &mut img), ReptexStatus::InvalidArgument);
        let missing = CString::new("/nonexistent/dir/x.png").unwrap();
        assert_eq!(reptex_image_load(missing.as_ptr(), &mut img), ReptexStatus::Io);
        assert!(!last_error().is_empty());

        let p = reptex_params_new();
        assert_eq!(reptex_params_set_side_range(p, 40, 20), ReptexStatus::InvalidArgument);
        assert_eq!(reptex_params_set_coverage(p, 1.5), ReptexStatus::InvalidArgument);
        let ks = [1usize, 3];
        assert_eq!(reptex_params_set_k_set(p, ks.as_ptr(), ks.len()), ReptexStatus::InvalidArgument);
        reptex_params_free(p);
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(reptex_image_new(1, 1, ptr::null(), &mut img), ReptexStatus::NullArgument);
        assert!(!reptex_last_error().is_null());
        let p = reptex_params_new();
        assert_eq!(reptex_params_set_seed(p, 3), ReptexStatus::Ok);
        assert!(reptex_last_error().is_null());
        reptex_params_free(p);
    }
}

#[test]
fn extract_mask_free_and_masked() {
    unsafe {
        let img = image(96, 96);
        let p = fast_params(4);
        let mut res = ptr::null_mut();
        assert_eq!(reptex_extract(img, ptr::null(), p, &mut res), ReptexStatus::Ok, "{}", {
            let e = reptex_last_error();
            if e.is_null() { String::new() } else { CStr::from_ptr(e).to_string_lossy().into_owned() }
        });
        assert_eq!(reptex_result_candidate_count(res), 300);
        let k = reptex_result_selected_k(res);
        assert!((3..=6).contains(&k));
        assert!(reptex_result_cluster_size(res) >= 1);

        for which in [ReptexChoice::Plain, ReptexChoice::Weighted, ReptexChoice::Median] {
            let mut rect = ReptexRect::default();
            assert_eq!(reptex_result_chosen_rect(res, which, &mut rect), ReptexStatus::Ok);
            assert!(rect.width >= 16 && rect.width <= 48 && rect.width == rect.height);
            assert!(rect.x + rect.width <= 96 && rect.y + rect.height <= 96);
            let mut tex = ptr::null_mut();
            assert_eq!(reptex_result_texture(res, which, &mut tex), ReptexStatus::Ok);
            assert_eq!(reptex_image_width(tex), rect.width);
            reptex_image_free(tex);
        }

        // Only the left half is region.
        let bits: Vec<u8> = (0..96 * 96).map(|i| u8::from(i % 96 < 48)).collect();
        let mut mask = ptr::null_mut();
        assert_eq!(reptex_mask_new(96, 96, bits.as_ptr(), &mut mask), ReptexStatus::Ok);
        let mut masked = ptr::null_mut();
        assert_eq!(reptex_extract(img, mask, p, &mut masked), ReptexStatus::Ok);
        let mut rect = ReptexRect::default();
        assert_eq!(reptex_result_chosen_rect(masked, ReptexChoice::Weighted, &mut rect), ReptexStatus::Ok);
        assert!(rect.x < 48);

        reptex_result_free(masked);
        reptex_mask_free(mask);
        reptex_result_free(res);
        reptex_params_free(p);
        reptex_image_free(img);
    }
}

#[test]
fn extraction_is_repeatable() {
    unsafe {
        let img = image(80, 80);
        let p = fast_params(11);
        let rect_of = || {
            let mut res = ptr::null_mut();
            assert_eq!(reptex_extract(img, ptr::null(), p, &mut res), ReptexStatus::Ok);
            let mut r = ReptexRect::default();
            reptex_result_chosen_rect(res, ReptexChoice::Weighted, &mut r);
            reptex_result_free(res);
            r
        };
        assert_eq!(rect_of(), rect_of());
        reptex_params_free(p);
        reptex_image_free(img);
    }
}

#[test]
fn pipeline_failure_is_not_a_panic() {
    unsafe {
        // Region too small for any crop of the minimum side.
        let img = image(10, 10);
        let p = fast_params(0);
        let mut res = ptr::null_mut();
        let status = reptex_extract(img, ptr::null(), p, &mut res);
        assert_ne!(status, ReptexStatus::Ok);
        assert_ne!(status, ReptexStatus::Panic);
        assert!(res.is_null());
        assert!(!last_error().is_empty());
        reptex_params_free(p);
        reptex_image_free(img);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/reptex.h")).unwrap();
    for name in [
        "typedef struct ReptexImage ReptexImage",
        "reptex_extract(",
        "reptex_last_error(",
        "REPTEX_STATUS_PANIC",
        "reptex_result_chosen_rect(",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(reptex_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
