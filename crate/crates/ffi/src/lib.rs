//! C ABI for the hflvne simulator.
//!
//! Every function returns an [`HvStatus`]. On failure a message is kept in a
//! thread-local slot, readable through [`hv_last_error`]. Handles are opaque
//! and owned by the caller once returned; free them with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hflvne::agent::{read_checkpoint, Checkpoint, PolicyParams};
use hflvne::config::{ExperimentConfig, PolicyKind};
use hflvne::experiment::{evaluate, make_policy};
use hflvne::federation::{aggregate, Upload};
use hflvne::workload::{generate_substrate, generate_vnr_stream, load_substrate, load_vnrs, SubstrateConfig, VnrConfig};
use hflvne::{Error, MultiDomainSubstrate, VirtualNetworkRequest};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Runtime = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvPolicy {
    Hfl = 0,
    NodeRank = 1,
    Random = 2,
}

/// Whole-run indicators. Undefined ratios are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvSummary {
    pub ltar: f64,
    pub ltar2c: f64,
    pub acc: f64,
    pub accepted: u64,
    pub total: u64,
}

/// Opaque substrate handle.
pub struct HvSubstrate(MultiDomainSubstrate);

/// Opaque VNR stream handle.
pub struct HvVnrs(Vec<VirtualNetworkRequest>);

/// Opaque checkpoint handle.
pub struct HvCheckpoint(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HvStatus {
    use hflvne::workload::WorkloadError;
    match e {
        Error::Io { .. } | Error::Workload(WorkloadError::Io { .. }) => HvStatus::Io,
        Error::Workload(_) | Error::Csv(_) | Error::Agent(_) => HvStatus::Parse,
        Error::Config(_) => HvStatus::Config,
        _ => HvStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (HvStatus, String)>) -> HvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HvStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside hflvne");
            HvStatus::Panic
        }
    }
}

fn fail<T>(e: impl Into<Error>) -> Result<T, (HvStatus, String)> {
    let e = e.into();
    Err((status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HvStatus, String) {
    (HvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, (HvStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HvStatus::InvalidArgument, "path is not valid UTF-8".to_string()))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (HvStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HvStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a substrate file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_substrate_load(path: *const c_char, out: *mut *mut HvSubstrate) -> HvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = load_substrate(path_arg(path)?).or_else(fail)?;
        *out = Box::into_raw(Box::new(HvSubstrate(s)));
        Ok(())
    })
}

/// Generates a substrate with default resource ranges.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_substrate_generate(
    seed: u64,
    num_domains: usize,
    nodes_per_domain: usize,
    total_links: usize,
    out: *mut *mut HvSubstrate,
) -> HvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if num_domains == 0 || nodes_per_domain == 0 {
            return Err((HvStatus::InvalidArgument, "domain and node counts must be positive".into()));
        }
        let cfg = SubstrateConfig {
            num_domains,
            nodes_per_domain,
            total_links,
            ..SubstrateConfig::default()
        };
        let s = generate_substrate(&cfg, seed).or_else(fail)?;
        *out = Box::into_raw(Box::new(HvSubstrate(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hv_substrate_free(s: *mut HvSubstrate) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Node, link and domain counts; any output pointer may be null.
///
/// # Safety
/// `s` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn hv_substrate_shape(
    s: *const HvSubstrate,
    nodes: *mut usize,
    links: *mut usize,
    domains: *mut usize,
) -> HvStatus {
    guard(|| {
        let s = &handle(s, "substrate")?.0;
        if let Some(n) = nodes.as_mut() {
            *n = s.num_nodes();
        }
        if let Some(l) = links.as_mut() {
            *l = s.num_links();
        }
        if let Some(d) = domains.as_mut() {
            *d = s.num_domains();
        }
        Ok(())
    })
}

/// Available cpu of one node.
///
/// # Safety
/// `s` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_substrate_node_cpu(s: *const HvSubstrate, node: usize, out: *mut f64) -> HvStatus {
    guard(|| {
        let s = &handle(s, "substrate")?.0;
        let out = out_ptr(out, "out")?;
        let n = s
            .node(node)
            .ok_or_else(|| (HvStatus::InvalidArgument, format!("no node {node}")))?;
        *out = n.cpu_available;
        Ok(())
    })
}

/// Loads a VNR stream file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_vnrs_load(path: *const c_char, out: *mut *mut HvVnrs) -> HvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = load_vnrs(path_arg(path)?).or_else(fail)?;
        *out = Box::into_raw(Box::new(HvVnrs(v)));
        Ok(())
    })
}

/// Generates `count` requests with default demand ranges and timing.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_vnrs_generate(seed: u64, count: usize, out: *mut *mut HvVnrs) -> HvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = VnrConfig {
            count,
            ..VnrConfig::default()
        };
        *out = Box::into_raw(Box::new(HvVnrs(generate_vnr_stream(&cfg, seed))));
        Ok(())
    })
}

/// # Safety
/// `v` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_vnrs_len(v: *const HvVnrs, out: *mut usize) -> HvStatus {
    guard(|| {
        let v = &handle(v, "vnrs")?.0;
        *out_ptr(out, "out")? = v.len();
        Ok(())
    })
}

/// # Safety
/// `v` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hv_vnrs_free(v: *mut HvVnrs) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Loads a parameter checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_checkpoint_load(path: *const c_char, out: *mut *mut HvCheckpoint) -> HvStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = path_arg(path)?;
        let file = File::open(path).map_err(|e| (HvStatus::Io, format!("{path}: {e}")))?;
        let ck = read_checkpoint(file).or_else(fail)?;
        *out = Box::into_raw(Box::new(HvCheckpoint(ck)));
        Ok(())
    })
}

/// Writes the global model as `kernel_0, kernel_1, kernel_2, bias` into
/// `out[0..4]`.
///
/// # Safety
/// `c` must be a live handle and `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hv_checkpoint_global(c: *const HvCheckpoint, out: *mut f64) -> HvStatus {
    guard(|| {
        let c = &handle(c, "checkpoint")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&c.global.to_array());
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hv_checkpoint_free(c: *mut HvCheckpoint) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs `policy` over the whole stream on a fresh copy of the substrate.
/// `checkpoint` is required for `Hfl` and ignored otherwise; `seed` drives
/// the random policy.
///
/// # Safety
/// Handles must be live (checkpoint may be null) and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hv_evaluate(
    substrate: *const HvSubstrate,
    vnrs: *const HvVnrs,
    policy: HvPolicy,
    checkpoint: *const HvCheckpoint,
    seed: u64,
    out: *mut HvSummary,
) -> HvStatus {
    guard(|| {
        let s = &handle(substrate, "substrate")?.0;
        let v = &handle(vnrs, "vnrs")?.0;
        let out = out_ptr(out, "out")?;
        let ck = checkpoint.as_ref().map(|c| &c.0);
        let kind = match policy {
            HvPolicy::Hfl => PolicyKind::Hfl,
            HvPolicy::NodeRank => PolicyKind::NodeRank,
            HvPolicy::Random => PolicyKind::Random,
        };
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let mut provider = make_policy(kind, &cfg, ck, s.num_domains()).or_else(fail)?;
        let report = evaluate(&cfg, s, v, 0.0, provider.as_mut());
        let sm = report.summary;
        *out = HvSummary {
            ltar: sm.ltar,
            ltar2c: sm.ltar2c.unwrap_or(f64::NAN),
            acc: sm.acc.unwrap_or(f64::NAN),
            accepted: sm.accepted as u64,
            total: sm.total as u64,
        };
        Ok(())
    })
}

/// Sample-count-weighted average of `n` parameter vectors. `params` holds
/// `n` rows of `kernel_0, kernel_1, kernel_2, bias`; the result goes to
/// `out[0..4]`.
///
/// # Safety
/// `params` must point to `4 * n` doubles, `counts` to `n` values and `out`
/// to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hv_aggregate(params: *const f64, counts: *const u64, n: usize, out: *mut f64) -> HvStatus {
    guard(|| {
        if params.is_null() || counts.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let rows = std::slice::from_raw_parts(params, 4 * n);
        let counts = std::slice::from_raw_parts(counts, n);
        let uploads: Vec<Upload> = (0..n)
            .map(|i| Upload {
                domain_id: i,
                params: PolicyParams::from_array([rows[4 * i], rows[4 * i + 1], rows[4 * i + 2], rows[4 * i + 3]]),
                sample_count: counts[i] as usize,
                local_loss: 0.0,
                reward_mean: 0.0,
            })
            .collect();
        let g = aggregate(&uploads).map_err(|e| (HvStatus::InvalidArgument, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&g.to_array());
        Ok(())
    })
}
