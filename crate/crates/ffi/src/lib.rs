//! C ABI over the cbb geometry, raster and metric primitives.
//!
//! Polygons and masks cross the boundary as opaque handles created by the
//! library and released with the matching `*_free` call. Fallible calls
//! return a [`CbbStatus`]; the message for the most recent failure on the
//! calling thread is available from [`cbb_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cbb::geometry::{generate_polygon, make_edit, EditCondition, GenParams, Point2, Polygon};
use cbb::metrics;
use cbb::morphology::morphological_closing;
use cbb::observers::read_external_mask;
use cbb::raster::{rasterize_mask, write_mask, MaskGrid};
use cbb::{Error, GeometryError};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GenerationFailed = 3,
    NoSuitableSite = 4,
    Io = 5,
    MalformedInput = 6,
    Domain = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbbEditCondition {
    Concave = 0,
    Nofill = 1,
    Convex = 2,
}

impl From<CbbEditCondition> for EditCondition {
    fn from(c: CbbEditCondition) -> Self {
        match c {
            CbbEditCondition::Concave => EditCondition::Concave,
            CbbEditCondition::Nofill => EditCondition::Nofill,
            CbbEditCondition::Convex => EditCondition::Convex,
        }
    }
}

/// Simple counter-clockwise polygon in unit scene coordinates.
pub struct CbbPolygon(Polygon);

/// Binary mask, row-major, one byte per pixel.
pub struct CbbMask(MaskGrid);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CbbStatus, String);

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let status = match e {
            GeometryError::GenerationFailed { .. } => CbbStatus::GenerationFailed,
            GeometryError::NoSuitableSite { .. } => CbbStatus::NoSuitableSite,
            _ => CbbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Geometry(g) => return g.clone().into(),
            Error::Io { .. } => CbbStatus::Io,
            Error::Image { .. } | Error::MalformedMask { .. } | Error::Parse { .. } => CbbStatus::MalformedInput,
            Error::Domain => CbbStatus::Domain,
            _ => CbbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: CbbStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CbbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CbbStatus::Panic
        }
    }
}

unsafe fn polygon<'a>(p: *const CbbPolygon) -> Result<&'a Polygon, Failure> {
    match p.as_ref() {
        Some(p) => Ok(&p.0),
        None => fail(CbbStatus::NullPointer, "polygon handle is null"),
    }
}

unsafe fn mask<'a>(m: *const CbbMask) -> Result<&'a MaskGrid, Failure> {
    match m.as_ref() {
        Some(m) => Ok(&m.0),
        None => fail(CbbStatus::NullPointer, "mask handle is null"),
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(p) => Ok(p),
        None => fail(CbbStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return fail(CbbStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => fail(CbbStatus::InvalidArgument, "path is not valid UTF-8"),
    }
}

/// Why the most recent status-returning call on this thread failed, or NULL
/// if it succeeded. Valid until the next such call on the same thread.
#[no_mangle]
pub extern "C" fn cbb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cbb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a random simple polygon with exactly `n_concavities` reflex vertices.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_generate(
    n_vertices: u32,
    n_concavities: u32,
    irregularity: f64,
    spikiness: f64,
    seed: u64,
    out: *mut *mut CbbPolygon,
) -> CbbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = generate_polygon(&GenParams {
            n_vertices,
            n_concavities,
            irregularity,
            spikiness,
            seed,
        })?;
        *out = Box::into_raw(Box::new(CbbPolygon(p)));
        Ok(())
    })
}

/// Builds a polygon from `n` interleaved `x, y` pairs. Clockwise input is reversed.
///
/// # Safety
/// `xy` must point to `2 * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_from_xy(xy: *const f64, n: usize, out: *mut *mut CbbPolygon) -> CbbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if xy.is_null() {
            return fail(CbbStatus::NullPointer, "xy is null");
        }
        let coords = std::slice::from_raw_parts(xy, 2 * n);
        let pts = coords.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect();
        let p = Polygon::new_any_orientation(pts)?;
        *out = Box::into_raw(Box::new(CbbPolygon(p)));
        Ok(())
    })
}

/// # Safety
/// `poly` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_free(poly: *mut CbbPolygon) {
    if !poly.is_null() {
        drop(Box::from_raw(poly));
    }
}

/// Number of vertices, 0 for NULL.
///
/// # Safety
/// `poly` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_len(poly: *const CbbPolygon) -> usize {
    poly.as_ref().map_or(0, |p| p.0.len())
}

/// Copies vertices as interleaved `x, y` pairs into `xy`, which holds `cap` doubles.
///
/// # Safety
/// `poly` must be a live handle and `xy` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_vertices(poly: *const CbbPolygon, xy: *mut f64, cap: usize) -> CbbStatus {
    guard(|| {
        let p = polygon(poly)?;
        if xy.is_null() {
            return fail(CbbStatus::NullPointer, "xy is null");
        }
        if cap < 2 * p.len() {
            return fail(CbbStatus::BufferTooSmall, format!("need {} doubles, got {cap}", 2 * p.len()));
        }
        let dst = std::slice::from_raw_parts_mut(xy, 2 * p.len());
        for (d, v) in dst.chunks_exact_mut(2).zip(p.vertices()) {
            d[0] = v.x;
            d[1] = v.y;
        }
        Ok(())
    })
}

/// Shoelace area, NaN for NULL.
///
/// # Safety
/// `poly` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_area(poly: *const CbbPolygon) -> f64 {
    poly.as_ref().map_or(f64::NAN, |p| p.0.area())
}

/// Number of reflex vertices, 0 for NULL.
///
/// # Safety
/// `poly` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_reflex_count(poly: *const CbbPolygon) -> usize {
    poly.as_ref().map_or(0, |p| p.0.reflex_count())
}

/// # Safety
/// `poly` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_polygon_convex_hull(poly: *const CbbPolygon, out: *mut *mut CbbPolygon) -> CbbStatus {
    guard(|| {
        let p = polygon(poly)?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(CbbPolygon(p.convex_hull())));
        Ok(())
    })
}

/// Adds a piece of area `rel_area * area(poly)` at a site of the given kind.
/// `piece_area` may be NULL.
///
/// # Safety
/// `poly` must be a live handle; `out` must be writable; `piece_area` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_make_edit(
    poly: *const CbbPolygon,
    condition: CbbEditCondition,
    rel_area: f64,
    seed: u64,
    out: *mut *mut CbbPolygon,
    piece_area: *mut f64,
) -> CbbStatus {
    guard(|| {
        let p = polygon(poly)?;
        let out = out_ptr(out, "out")?;
        let (edited, piece) = make_edit(p, condition.into(), rel_area, seed)?;
        if let Some(a) = piece_area.as_mut() {
            *a = piece.area;
        }
        *out = Box::into_raw(Box::new(CbbPolygon(edited)));
        Ok(())
    })
}

/// Rasterizes the polygon by pixel-center sampling onto a `width` x `height` grid.
///
/// # Safety
/// `poly` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_rasterize(poly: *const CbbPolygon, width: u32, height: u32, out: *mut *mut CbbMask) -> CbbStatus {
    guard(|| {
        let p = polygon(poly)?;
        let out = out_ptr(out, "out")?;
        if width == 0 || height == 0 {
            return fail(CbbStatus::InvalidArgument, "mask dimensions must be positive");
        }
        *out = Box::into_raw(Box::new(CbbMask(rasterize_mask(p, width, height))));
        Ok(())
    })
}

/// Builds a mask from `width * height` bytes; any nonzero byte is foreground.
///
/// # Safety
/// `bits` must point to `width * height` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_from_bytes(bits: *const u8, width: u32, height: u32, out: *mut *mut CbbMask) -> CbbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if bits.is_null() {
            return fail(CbbStatus::NullPointer, "bits is null");
        }
        let n = width as usize * height as usize;
        let data = std::slice::from_raw_parts(bits, n).iter().map(|&b| u8::from(b != 0)).collect();
        *out = Box::into_raw(Box::new(CbbMask(MaskGrid::from_bits(width, height, data)?)));
        Ok(())
    })
}

/// # Safety
/// `mask` must be NULL or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_free(mask: *mut CbbMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Width in pixels, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_width(m: *const CbbMask) -> u32 {
    m.as_ref().map_or(0, |m| m.0.width())
}

/// Height in pixels, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_height(m: *const CbbMask) -> u32 {
    m.as_ref().map_or(0, |m| m.0.height())
}

/// Foreground pixel count, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_count(m: *const CbbMask) -> u64 {
    m.as_ref().map_or(0, |m| m.0.count())
}

/// Copies the mask as 0/1 bytes, row-major, into `dst` of `cap` bytes.
///
/// # Safety
/// `m` must be a live handle and `dst` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_copy_bytes(m: *const CbbMask, dst: *mut u8, cap: usize) -> CbbStatus {
    guard(|| {
        let bits = mask(m)?.bits();
        if dst.is_null() {
            return fail(CbbStatus::NullPointer, "dst is null");
        }
        if cap < bits.len() {
            return fail(CbbStatus::BufferTooSmall, format!("need {} bytes, got {cap}", bits.len()));
        }
        ptr::copy_nonoverlapping(bits.as_ptr(), dst, bits.len());
        Ok(())
    })
}

/// Morphological closing with a Euclidean disk of `radius` pixels.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_closing(m: *const CbbMask, radius: u32, out: *mut *mut CbbMask) -> CbbStatus {
    guard(|| {
        let src = mask(m)?;
        let out = out_ptr(out, "out")?;
        if radius == 0 {
            return fail(CbbStatus::InvalidArgument, "closing radius must be at least 1");
        }
        *out = Box::into_raw(Box::new(CbbMask(morphological_closing(src, radius))));
        Ok(())
    })
}

/// Reads an 8-bit mask or a 16-bit probability map (binarized at p > 0.5).
///
/// # Safety
/// `file` must be a NUL-terminated UTF-8 path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_read_png(file: *const c_char, out: *mut *mut CbbMask) -> CbbStatus {
    guard(|| {
        let file = path(file)?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(CbbMask(read_external_mask(file)?)));
        Ok(())
    })
}

/// Writes the mask as an 8-bit {0, 255} PNG.
///
/// # Safety
/// `m` must be a live handle; `file` must be a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn cbb_mask_write_png(m: *const CbbMask, file: *const c_char) -> CbbStatus {
    guard(|| {
        let src = mask(m)?;
        write_mask(path(file)?, src)?;
        Ok(())
    })
}

/// Relative area change `(a_out - a_init) / a_seg_gt`; `CBB_STATUS_DOMAIN` when `a_seg_gt` is 0.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbb_rac(a_init: u64, a_out: u64, a_seg_gt: u64, out: *mut f64) -> CbbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = metrics::rac(a_init, a_out, a_seg_gt)?;
        Ok(())
    })
}

/// True when `rac` exceeds `tau_percent / 100`.
#[no_mangle]
pub extern "C" fn cbb_detect(rac: f64, tau_percent: f64) -> bool {
    metrics::detect(rac, tau_percent)
}
