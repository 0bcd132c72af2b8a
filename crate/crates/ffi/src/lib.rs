//! C ABI over the streaming triangle-counting pipeline.
//!
//! Handles are opaque and single-threaded: callers must not share one
//! `TcPipeline` across threads without external synchronization. Every
//! fallible function returns a `TcStatus`; panics are caught at the boundary
//! and surface as `TC_STATUS_PANIC` instead of unwinding into C.
//!
//! The committed header `include/tricount.h` is generated by cbindgen and
//! kept current by a test; regenerate with
//! `TRICOUNT_REGEN_HEADER=1 cargo test -p tricount-ffi`.

use std::collections::HashSet;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use tricount::pipeline::{Algorithm, Pipeline, PipelineConfig};
use tricount::stream::{Edge, GraphStream};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    /// Self-loops are not part of the model.
    InvalidEdge = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcAlgorithm {
    Trifly = 0,
    CocosSimple = 1,
    CocosOpt = 2,
}

/// Opaque incremental pipeline handle.
pub struct TcPipeline {
    inner: Pipeline,
}

fn guard(f: impl FnOnce() -> TcStatus) -> TcStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(TcStatus::Panic)
}

/// Creates a pipeline. `theta` only matters for `TC_ALGORITHM_COCOS_OPT`;
/// pass 0.2 for the default policy. On success writes the handle to `out`.
///
/// # Safety
/// `out` must be a valid pointer to a `TcPipeline*` slot.
#[no_mangle]
pub unsafe extern "C" fn tc_pipeline_new(
    algorithm: TcAlgorithm,
    k: usize,
    budget: usize,
    theta: f64,
    seed: u64,
    out: *mut *mut TcPipeline,
) -> TcStatus {
    if out.is_null() {
        return TcStatus::NullPointer;
    }
    guard(|| {
        let algorithm = match algorithm {
            TcAlgorithm::Trifly => Algorithm::TriFly,
            TcAlgorithm::CocosSimple => Algorithm::CocosSimple,
            TcAlgorithm::CocosOpt => Algorithm::CocosOpt,
        };
        let mut cfg = PipelineConfig::new(algorithm, k, budget, seed);
        cfg.theta = theta;
        match Pipeline::new(cfg) {
            Ok(p) => {
                unsafe { *out = Box::into_raw(Box::new(TcPipeline { inner: p })) };
                TcStatus::Ok
            }
            Err(_) => TcStatus::InvalidConfig,
        }
    })
}

/// Feeds one undirected edge `{u, v}`; endpoint order does not matter.
///
/// # Safety
/// `pipeline` must be a live handle from `tc_pipeline_new`.
#[no_mangle]
pub unsafe extern "C" fn tc_pipeline_process_edge(
    pipeline: *mut TcPipeline,
    u: u64,
    v: u64,
) -> TcStatus {
    if pipeline.is_null() {
        return TcStatus::NullPointer;
    }
    if u == v {
        return TcStatus::InvalidEdge;
    }
    guard(|| {
        unsafe { &mut *pipeline }.inner.process_edge(Edge::new(u, v));
        TcStatus::Ok
    })
}

/// Writes the current global triangle estimate to `out`.
///
/// # Safety
/// `pipeline` must be a live handle; `out` must be a valid `double` slot.
#[no_mangle]
pub unsafe extern "C" fn tc_pipeline_global_estimate(
    pipeline: *mut TcPipeline,
    out: *mut f64,
) -> TcStatus {
    if pipeline.is_null() || out.is_null() {
        return TcStatus::NullPointer;
    }
    guard(|| {
        let est = unsafe { &mut *pipeline }.inner.query();
        unsafe { *out = est.global };
        TcStatus::Ok
    })
}

/// Writes the current estimate of triangles incident to `node` to `out`
/// (0 for nodes never seen).
///
/// # Safety
/// `pipeline` must be a live handle; `out` must be a valid `double` slot.
#[no_mangle]
pub unsafe extern "C" fn tc_pipeline_local_estimate(
    pipeline: *mut TcPipeline,
    node: u64,
    out: *mut f64,
) -> TcStatus {
    if pipeline.is_null() || out.is_null() {
        return TcStatus::NullPointer;
    }
    guard(|| {
        let est = unsafe { &mut *pipeline }.inner.query();
        unsafe { *out = est.local(node) };
        TcStatus::Ok
    })
}

/// Frees a pipeline handle; a null pointer is a no-op.
///
/// # Safety
/// `pipeline` must be null or a live handle, and must not be used afterward.
#[no_mangle]
pub unsafe extern "C" fn tc_pipeline_free(pipeline: *mut TcPipeline) {
    if !pipeline.is_null() {
        drop(unsafe { Box::from_raw(pipeline) });
    }
}

/// Exact global triangle count of an edge list given as `len` pairs laid out
/// flat: `edges[2*i]`, `edges[2*i + 1]`. Duplicate edges are ignored after
/// their first occurrence; a self-loop fails the whole call.
///
/// # Safety
/// `edges` must point to at least `2 * len` readable `uint64_t` values
/// (unless `len` is 0); `out` must be a valid slot.
#[no_mangle]
pub unsafe extern "C" fn tc_exact_global_count(
    edges: *const u64,
    len: usize,
    out: *mut u64,
) -> TcStatus {
    if out.is_null() || (edges.is_null() && len > 0) {
        return TcStatus::NullPointer;
    }
    if len == 0 {
        unsafe { *out = 0 };
        return TcStatus::Ok;
    }
    let pairs = unsafe { std::slice::from_raw_parts(edges, 2 * len) };
    if pairs.chunks_exact(2).any(|p| p[0] == p[1]) {
        return TcStatus::InvalidEdge;
    }
    guard(|| {
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for p in pairs.chunks_exact(2) {
            let e = Edge::new(p[0], p[1]);
            if seen.insert(e) {
                list.push(e);
            }
        }
        let set = tricount::oracle::exact_count(&GraphStream::from_edges(list));
        unsafe { *out = set.global() };
        TcStatus::Ok
    })
}

/// NUL-terminated library version; storage is static.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    unsafe fn new_pipeline(algorithm: TcAlgorithm, k: usize, budget: usize) -> *mut TcPipeline {
        let mut h: *mut TcPipeline = std::ptr::null_mut();
        let st = tc_pipeline_new(algorithm, k, budget, 0.2, 42, &mut h);
        assert_eq!(st, TcStatus::Ok);
        assert!(!h.is_null());
        h
    }

    #[test]
    fn triangle_through_the_c_surface() {
        unsafe {
            let h = new_pipeline(TcAlgorithm::CocosOpt, 3, 100);
            for (u, v) in [(1, 2), (2, 3), (3, 1)] {
                assert_eq!(tc_pipeline_process_edge(h, u, v), TcStatus::Ok);
            }
            let mut g = 0.0;
            assert_eq!(tc_pipeline_global_estimate(h, &mut g), TcStatus::Ok);
            assert_eq!(g, 1.0);
            let mut l = -1.0;
            assert_eq!(tc_pipeline_local_estimate(h, 2, &mut l), TcStatus::Ok);
            assert_eq!(l, 1.0);
            assert_eq!(tc_pipeline_local_estimate(h, 99, &mut l), TcStatus::Ok);
            assert_eq!(l, 0.0);
            tc_pipeline_free(h);
        }
    }

    #[test]
    fn status_codes_cover_misuse() {
        unsafe {
            let mut h: *mut TcPipeline = std::ptr::null_mut();
            assert_eq!(
                tc_pipeline_new(TcAlgorithm::Trifly, 0, 100, 0.2, 1, &mut h),
                TcStatus::InvalidConfig
            );
            assert_eq!(
                tc_pipeline_new(TcAlgorithm::Trifly, 1, 1, 0.2, 1, &mut h),
                TcStatus::InvalidConfig
            );
            assert_eq!(
                tc_pipeline_new(TcAlgorithm::Trifly, 1, 10, 0.2, 1, std::ptr::null_mut()),
                TcStatus::NullPointer
            );

            let h = new_pipeline(TcAlgorithm::Trifly, 1, 10);
            assert_eq!(tc_pipeline_process_edge(h, 5, 5), TcStatus::InvalidEdge);
            assert_eq!(
                tc_pipeline_process_edge(std::ptr::null_mut(), 1, 2),
                TcStatus::NullPointer
            );
            assert_eq!(
                tc_pipeline_global_estimate(h, std::ptr::null_mut()),
                TcStatus::NullPointer
            );
            tc_pipeline_free(h);
            tc_pipeline_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn exact_count_over_flat_pairs() {
        // K4 with one duplicated edge: 4 triangles.
        let edges: Vec<u64> = vec![1, 2, 1, 3, 1, 4, 2, 3, 2, 4, 3, 4, 1, 2];
        let mut out = 0u64;
        unsafe {
            assert_eq!(
                tc_exact_global_count(edges.as_ptr(), edges.len() / 2, &mut out),
                TcStatus::Ok
            );
            assert_eq!(out, 4);

            assert_eq!(
                tc_exact_global_count(std::ptr::null(), 1, &mut out),
                TcStatus::NullPointer
            );
            let loop_edge = [7u64, 7u64];
            assert_eq!(
                tc_exact_global_count(loop_edge.as_ptr(), 1, &mut out),
                TcStatus::InvalidEdge
            );
            assert_eq!(tc_exact_global_count(std::ptr::null(), 0, &mut out), TcStatus::Ok);
            assert_eq!(out, 0);
        }
    }

    #[test]
    fn version_is_nul_terminated() {
        let p = tc_version();
        let s = unsafe { std::ffi::CStr::from_ptr(p) }.to_str().unwrap();
        assert_eq!(s, env!("CARGO_PKG_VERSION"));
    }
}
