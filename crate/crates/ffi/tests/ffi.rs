use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cbb_ffi::*;

fn last_error() -> String {
    let p = cbb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn generate(k: u32, seed: u64) -> *mut CbbPolygon {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cbb_polygon_generate(10, k, 0.5, 0.3, seed, &mut p) }, CbbStatus::Ok);
    p
}

fn square() -> *mut CbbPolygon {
    // clockwise on purpose
    let xy = [0.2, 0.2, 0.2, 0.8, 0.8, 0.8, 0.8, 0.2];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { cbb_polygon_from_xy(xy.as_ptr(), 4, &mut p) }, CbbStatus::Ok);
    p
}

#[test]
fn generated_polygon_round_trips_through_handles() {
    let p = generate(2, 7);
    unsafe {
        assert_eq!(cbb_polygon_len(p), 10);
        assert_eq!(cbb_polygon_reflex_count(p), 2);
        let mut xy = vec![0.0; 20];
        assert_eq!(cbb_polygon_vertices(p, xy.as_mut_ptr(), 20), CbbStatus::Ok);
        let mut q = ptr::null_mut();
        assert_eq!(cbb_polygon_from_xy(xy.as_ptr(), 10, &mut q), CbbStatus::Ok);
        assert_eq!(cbb_polygon_area(q), cbb_polygon_area(p));

        let mut small = vec![0.0; 19];
        assert_eq!(cbb_polygon_vertices(p, small.as_mut_ptr(), 19), CbbStatus::BufferTooSmall);
        assert!(last_error().contains("20"));

        let mut hull = ptr::null_mut();
        assert_eq!(cbb_polygon_convex_hull(p, &mut hull), CbbStatus::Ok);
        assert_eq!(cbb_polygon_reflex_count(hull), 0);
        assert!(cbb_polygon_area(hull) > cbb_polygon_area(p));
        for h in [p, q, hull] {
            cbb_polygon_free(h);
        }
    }
}

#[test]
fn clockwise_input_is_normalized() {
    let p = square();
    unsafe {
        assert!((cbb_polygon_area(p) - 0.36).abs() < 1e-12);
        cbb_polygon_free(p);
    }
}

#[test]
fn edit_status_codes() {
    let p = generate(2, 11);
    let sq = square();
    unsafe {
        let mut out = ptr::null_mut();
        let mut piece = 0.0;
        assert_eq!(cbb_make_edit(p, CbbEditCondition::Convex, 0.05, 1, &mut out, &mut piece), CbbStatus::Ok);
        assert!((cbb_polygon_area(out) - cbb_polygon_area(p) - piece).abs() < 1e-12);
        assert!((piece - 0.05 * cbb_polygon_area(p)).abs() < 1e-12);
        cbb_polygon_free(out);

        let mut none = ptr::null_mut();
        assert_eq!(
            cbb_make_edit(sq, CbbEditCondition::Concave, 0.05, 1, &mut none, ptr::null_mut()),
            CbbStatus::NoSuitableSite
        );
        assert!(none.is_null());
        assert!(last_error().contains("CONCAVE"));
        assert_eq!(
            cbb_make_edit(p, CbbEditCondition::Convex, 0.5, 1, &mut none, ptr::null_mut()),
            CbbStatus::InvalidArgument
        );
        cbb_polygon_free(p);
        cbb_polygon_free(sq);
    }
}

#[test]
fn generator_errors_map_to_codes() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(cbb_polygon_generate(3, 0, 0.5, 0.5, 1, &mut p), CbbStatus::InvalidArgument);
        assert!(p.is_null());
        assert_eq!(cbb_polygon_generate(8, 0, 0.5, 0.5, 1, ptr::null_mut()), CbbStatus::NullPointer);
    }
}

#[test]
fn null_handles_are_rejected() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cbb_rasterize(ptr::null(), 8, 8, &mut m), CbbStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(cbb_polygon_len(ptr::null()), 0);
        assert!(cbb_polygon_area(ptr::null()).is_nan());
        assert_eq!(cbb_mask_count(ptr::null()), 0);
        cbb_polygon_free(ptr::null_mut());
        cbb_mask_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(cbb_rac(0, 1, 0, &mut v), CbbStatus::Domain);
        assert!(!cbb_last_error_message().is_null());
        assert_eq!(cbb_rac(10, 30, 20, &mut v), CbbStatus::Ok);
    }
    assert_eq!(v, 1.0);
    assert!(cbb_last_error_message().is_null());
}

#[test]
fn raster_closing_and_png_io() {
    let sq = square();
    let tmp = tempfile::tempdir().unwrap();
    let file = CString::new(tmp.path().join("m.png").to_str().unwrap()).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cbb_rasterize(sq, 100, 100, &mut m), CbbStatus::Ok);
        assert_eq!((cbb_mask_width(m), cbb_mask_height(m)), (100, 100));
        assert_eq!(cbb_mask_count(m), 3600);

        let mut c = ptr::null_mut();
        assert_eq!(cbb_mask_closing(m, 5, &mut c), CbbStatus::Ok);
        assert_eq!(cbb_mask_count(c), 3600);
        assert_eq!(cbb_mask_closing(m, 0, &mut c), CbbStatus::InvalidArgument);

        assert_eq!(cbb_mask_write_png(m, file.as_ptr()), CbbStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cbb_mask_read_png(file.as_ptr(), &mut back), CbbStatus::Ok);
        let (mut a, mut b) = (vec![0u8; 10_000], vec![0u8; 10_000]);
        assert_eq!(cbb_mask_copy_bytes(m, a.as_mut_ptr(), a.len()), CbbStatus::Ok);
        assert_eq!(cbb_mask_copy_bytes(back, b.as_mut_ptr(), b.len()), CbbStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(cbb_mask_copy_bytes(m, a.as_mut_ptr(), 9_999), CbbStatus::BufferTooSmall);

        let missing = CString::new(tmp.path().join("none.png").to_str().unwrap()).unwrap();
        let mut gone = ptr::null_mut();
        assert_eq!(cbb_mask_read_png(missing.as_ptr(), &mut gone), CbbStatus::Io);
        let junk = tmp.path().join("junk.png");
        std::fs::write(&junk, b"not a png").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(cbb_mask_read_png(junk.as_ptr(), &mut gone), CbbStatus::MalformedInput);

        for h in [m, c, back] {
            cbb_mask_free(h);
        }
        cbb_polygon_free(sq);
    }
}

#[test]
fn mask_from_bytes_treats_nonzero_as_foreground() {
    let bytes = [0u8, 7, 255, 0, 1, 0];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(cbb_mask_from_bytes(bytes.as_ptr(), 3, 2, &mut m), CbbStatus::Ok);
        assert_eq!(cbb_mask_count(m), 3);
        cbb_mask_free(m);
    }
}

#[test]
fn detect_is_strict() {
    assert!(!cbb_detect(0.01, 1.0));
    assert!(cbb_detect(0.0101, 1.0));
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_generated_header() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libcbb_ffi.a");
    assert!(header_dir.join("cbb.h").is_file());
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping link check");
        return;
    }

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "cbb.h"
int main(void) {
    CbbPolygon *p = NULL, *q = NULL;
    CbbMask *m = NULL;
    double piece = 0.0, rac = 0.0;
    if (cbb_polygon_generate(9, 1, 0.4, 0.2, 3, &p) != CBB_STATUS_OK) return 1;
    if (cbb_make_edit(p, CBB_EDIT_CONDITION_CONVEX, 0.05, 1, &q, &piece) != CBB_STATUS_OK) return 2;
    if (cbb_rasterize(q, 64, 64, &m) != CBB_STATUS_OK) return 3;
    if (cbb_rac(0, 0, 0, &rac) != CBB_STATUS_DOMAIN || cbb_last_error_message() == NULL) return 4;
    printf("%s %zu %llu\n", cbb_version(), cbb_polygon_len(q), (unsigned long long)cbb_mask_count(m));
    cbb_mask_free(m);
    cbb_polygon_free(q);
    cbb_polygon_free(p);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    assert!(fields[1].parse::<usize>().unwrap() > 9);
    assert!(fields[2].parse::<u64>().unwrap() > 0);
}
