//! C ABI over `srw-core`.
//!
//! Every fallible function returns an [`SrwStatus`]; on failure the message
//! is available from [`srw_last_error`] on the same thread. Scenes and views
//! are opaque handles released with their `_free` function. Strings returned
//! through `out_json` parameters are owned by the caller and released with
//! [`srw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use srw_core::config::Tolerances;
use srw_core::doors::DoorStateReport;
use srw_core::geometry::fit_plane_dlt;
use srw_core::ingest::{self, CameraView, FilterReason};
use srw_core::metrics::{evaluate, EvalOptions};
use srw_core::scene::{line_label_from_planes, LineLabel, PlaneLabel, SceneGraph, Vec3};
use srw_core::visibility::{visible_segments, AnnotatedView};
use srw_core::wireframe::PredictionFile;
use srw_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Topology = 5,
    Geometry = 6,
    UnmappedLabel = 7,
    DimensionMismatch = 8,
    InvalidArgument = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrwPlaneLabel {
    Wall = 0,
    Floor = 1,
    Ceiling = 2,
    Door = 3,
    Window = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrwLineLabel {
    Invalid = 0,
    Wall = 1,
    Floor = 2,
    Ceiling = 3,
    Door = 4,
    Window = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrwFilterReason {
    Ok = 0,
    PlaneWithTwoJunctions = 1,
    DegeneratePlane = 2,
    /// A junction lies farther than the allowed distance from its plane.
    ResidualExceedsMax = 3,
}

/// Outcome of [`srw_scene_filter`]. `plane_id` is meaningful only when
/// `has_plane_id` is set.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrwFilterReport {
    pub accepted: bool,
    pub reason: SrwFilterReason,
    pub max_residual_mm: f64,
    pub has_plane_id: bool,
    pub plane_id: i64,
}

/// Opaque scene handle.
pub struct SrwScene {
    inner: SceneGraph,
}

/// Opaque camera view handle.
pub struct SrwView {
    inner: CameraView,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SrwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => SrwStatus::Parse,
            Error::Io { .. } | Error::Image { .. } | Error::MissingViews(_) => SrwStatus::Io,
            Error::Topology { .. } => SrwStatus::Topology,
            Error::UnmappedPair(..) => SrwStatus::UnmappedLabel,
            Error::DimensionMismatch { .. } => SrwStatus::DimensionMismatch,
            Error::Config(_) => SrwStatus::InvalidArgument,
            Error::InvalidRotation { .. }
            | Error::InvalidIntrinsics(_)
            | Error::PointAtInfinity(_)
            | Error::Degenerate(_)
            | Error::EmptyInput
            | Error::BehindCamera(_)
            | Error::DegeneratePolygon(_) => SrwStatus::Geometry,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrwStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SrwStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SrwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SrwStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON contains no NUL").into_raw()
}

fn parse_failure(what: &str, e: serde_json::Error) -> Failure {
    Failure(SrwStatus::Parse, format!("{what}: {e}"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn srw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn srw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn srw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn new_scene(out: *mut *mut SrwScene, inner: SceneGraph) -> Result<(), Failure> {
    let handle = Box::into_raw(Box::new(SrwScene { inner }));
    // SAFETY: checked non-null by callers
    unsafe { out.write(handle) };
    Ok(())
}

/// Parses a scene document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_scene_from_json(json: *const c_char, out: *mut *mut SrwScene) -> SrwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = ingest::parse_scene(read_str(json, "json")?)?;
        new_scene(out, scene)
    })
}

/// Loads a scene document from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_scene_load(path: *const c_char, out: *mut *mut SrwScene) -> SrwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = ingest::load_scene(read_str(path, "path")?)?;
        new_scene(out, scene)
    })
}

/// Releases a scene. Null is ignored.
///
/// # Safety
/// `scene` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn srw_scene_free(scene: *mut SrwScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of junctions, lines and planes in a scene.
///
/// # Safety
/// `scene` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_scene_counts(
    scene: *const SrwScene,
    junctions: *mut usize,
    lines: *mut usize,
    planes: *mut usize,
) -> SrwStatus {
    guard(|| {
        let s = &scene.as_ref().ok_or_else(|| null("scene"))?.inner;
        write_out(junctions, s.junctions().len(), "junctions")?;
        write_out(lines, s.lines().len(), "lines")?;
        write_out(planes, s.planes().len(), "planes")
    })
}

/// Checks plane topology and planarity. An accepted scene has its plane
/// parameters replaced by the refit values.
///
/// # Safety
/// `scene` must be a live handle; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_scene_filter(
    scene: *mut SrwScene,
    max_residual_mm: f64,
    report: *mut SrwFilterReport,
) -> SrwStatus {
    guard(|| {
        let handle = scene.as_mut().ok_or_else(|| null("scene"))?;
        if report.is_null() {
            return Err(null("report"));
        }
        if max_residual_mm.is_nan() || max_residual_mm <= 0.0 {
            return Err(Failure(SrwStatus::InvalidArgument, format!("max_residual_mm must be positive, got {max_residual_mm}")));
        }
        let outcome = ingest::filter_scene(handle.inner.clone(), max_residual_mm);
        let r = &outcome.report;
        report.write(SrwFilterReport {
            accepted: r.accepted,
            reason: match r.reason {
                FilterReason::Ok => SrwFilterReason::Ok,
                FilterReason::PlaneWithTwoJunctions => SrwFilterReason::PlaneWithTwoJunctions,
                FilterReason::DegeneratePlane => SrwFilterReason::DegeneratePlane,
                FilterReason::ResidualExceeds1mm => SrwFilterReason::ResidualExceedsMax,
            },
            max_residual_mm: r.max_residual_mm,
            has_plane_id: r.plane_id.is_some(),
            plane_id: r.plane_id.unwrap_or(0),
        });
        if r.accepted {
            handle.inner = outcome.scene;
        }
        Ok(())
    })
}

fn new_view(out: *mut *mut SrwView, inner: CameraView) -> Result<(), Failure> {
    let handle = Box::into_raw(Box::new(SrwView { inner }));
    // SAFETY: checked non-null by callers
    unsafe { out.write(handle) };
    Ok(())
}

/// Parses a camera view document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_view_from_json(json: *const c_char, out: *mut *mut SrwView) -> SrwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let view = ingest::parse_view(read_str(json, "json")?)?;
        new_view(out, view)
    })
}

/// Loads a camera view document from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_view_load(path: *const c_char, out: *mut *mut SrwView) -> SrwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let view = ingest::load_view(read_str(path, "path")?)?;
        new_view(out, view)
    })
}

/// Releases a view. Null is ignored.
///
/// # Safety
/// `view` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn srw_view_free(view: *mut SrwView) {
    if !view.is_null() {
        drop(Box::from_raw(view));
    }
}

/// Annotates one view of a scene and returns the wireframe as JSON.
/// `door_states_json` is a JSON array of door reports, or null to treat
/// every door as closed.
///
/// # Safety
/// `scene` and `view` must be live handles; `door_states_json` must be null
/// or a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_annotate(
    scene: *const SrwScene,
    view: *const SrwView,
    door_states_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SrwStatus {
    guard(|| {
        let s = &scene.as_ref().ok_or_else(|| null("scene"))?.inner;
        let v = &view.as_ref().ok_or_else(|| null("view"))?.inner;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let doors: Vec<DoorStateReport> = if door_states_json.is_null() {
            Vec::new()
        } else {
            serde_json::from_str(read_str(door_states_json, "door_states_json")?).map_err(|e| parse_failure("door states", e))?
        };
        let annotated = visible_segments(s, v, &doors, &Tolerances::default())?;
        out_json.write(into_c_string(annotated.to_json()));
        Ok(())
    })
}

/// Fits a plane to `count` points stored as consecutive `x, y, z` triples.
/// Writes `nx, ny, nz, d` with a unit normal.
///
/// # Safety
/// `points` must hold `3 * count` doubles; `out_plane` must hold 4.
#[no_mangle]
pub unsafe extern "C" fn srw_fit_plane(points: *const f64, count: usize, out_plane: *mut f64) -> SrwStatus {
    guard(|| {
        if points.is_null() {
            return Err(null("points"));
        }
        if out_plane.is_null() {
            return Err(null("out_plane"));
        }
        let flat = std::slice::from_raw_parts(points, count * 3);
        let pts: Vec<Vec3> = flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let plane = fit_plane_dlt(&pts)?;
        let out = std::slice::from_raw_parts_mut(out_plane, 4);
        out.copy_from_slice(&[plane.normal.x, plane.normal.y, plane.normal.z, plane.offset]);
        Ok(())
    })
}

fn plane_label(l: SrwPlaneLabel) -> PlaneLabel {
    match l {
        SrwPlaneLabel::Wall => PlaneLabel::Wall,
        SrwPlaneLabel::Floor => PlaneLabel::Floor,
        SrwPlaneLabel::Ceiling => PlaneLabel::Ceiling,
        SrwPlaneLabel::Door => PlaneLabel::Door,
        SrwPlaneLabel::Window => PlaneLabel::Window,
    }
}

/// Semantic label of a line shared by planes labelled `a` and `b`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_line_label_from_planes(a: SrwPlaneLabel, b: SrwPlaneLabel, out: *mut SrwLineLabel) -> SrwStatus {
    guard(|| {
        let label = match line_label_from_planes(plane_label(a), plane_label(b))? {
            LineLabel::Invalid => SrwLineLabel::Invalid,
            LineLabel::Wall => SrwLineLabel::Wall,
            LineLabel::Floor => SrwLineLabel::Floor,
            LineLabel::Ceiling => SrwLineLabel::Ceiling,
            LineLabel::Door => SrwLineLabel::Door,
            LineLabel::Window => SrwLineLabel::Window,
        };
        write_out(out, label, "out")
    })
}

/// Scores `count` predictions against ground truth with the default
/// thresholds. `gt_json[i]` is an annotated view and `pred_json[i]` its
/// prediction. Writes the evaluation report as JSON.
///
/// # Safety
/// `gt_json` and `pred_json` must each hold `count` NUL-terminated strings;
/// `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srw_evaluate(
    gt_json: *const *const c_char,
    pred_json: *const *const c_char,
    count: usize,
    semantic: bool,
    out_json: *mut *mut c_char,
) -> SrwStatus {
    guard(|| {
        if count > 0 && (gt_json.is_null() || pred_json.is_null()) {
            return Err(null("input array"));
        }
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let mut pairs = Vec::with_capacity(count);
        for i in 0..count {
            let gt: AnnotatedView =
                serde_json::from_str(read_str(*gt_json.add(i), "gt_json entry")?).map_err(|e| parse_failure("ground truth", e))?;
            let pred = PredictionFile::parse(read_str(*pred_json.add(i), "pred_json entry")?)?;
            pairs.push((gt, pred));
        }
        let opts = EvalOptions { semantic, ..EvalOptions::default() };
        let report = evaluate(&pairs, &opts)?;
        out_json.write(into_c_string(report.to_json()));
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_recorded_per_call() {
        let mut out = ptr::null_mut();
        let bad = c"{not json";
        let status = unsafe { srw_scene_from_json(bad.as_ptr(), &mut out) };
        assert_eq!(status, SrwStatus::Parse);
        assert!(out.is_null());
        assert!(!srw_last_error().is_null());

        let mut label = SrwLineLabel::Invalid;
        let status = unsafe { srw_line_label_from_planes(SrwPlaneLabel::Wall, SrwPlaneLabel::Floor, &mut label) };
        assert_eq!(status, SrwStatus::Ok);
        assert_eq!(label, SrwLineLabel::Floor);
        assert!(srw_last_error().is_null());
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status = unsafe { srw_scene_from_json(ptr::null(), ptr::null_mut()) };
        assert_eq!(status, SrwStatus::NullPointer);
        let status = unsafe { srw_fit_plane(ptr::null(), 3, ptr::null_mut()) };
        assert_eq!(status, SrwStatus::NullPointer);
    }
}
