//! C ABI over the core library.
//!
//! Objects cross the boundary as opaque handles created by `*_open`/`*_load`
//! and released by the matching `*_free`. Every fallible call returns an
//! [`XrecapStatus`]; on failure [`xrecap_last_error`] gives the message for
//! the calling thread. Panics are caught and reported as
//! `XRECAP_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use xrecap::corpus::EmbeddingStore;
use xrecap::eval::{self, RougeVariant};
use xrecap::pipeline::{PipelineConfig, Run};
use xrecap::refsel::NnIndex;
use xrecap::trainer::{self, ProjectionHead};
use xrecap::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XrecapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DimMismatch = 5,
    MissingId = 6,
    Config = 7,
    Network = 8,
    Numeric = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

impl From<&Error> for XrecapStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => XrecapStatus::Io,
            Error::MalformedLine { .. }
            | Error::DuplicateId { .. }
            | Error::LanguageMismatch { .. }
            | Error::EmbeddingFormat(_)
            | Error::Truncated { .. }
            | Error::Checkpoint(_)
            | Error::Cycle(_)
            | Error::Dangling(_)
            | Error::TaxonomyParse { .. }
            | Error::Json(_)
            | Error::MissingFinalTag
            | Error::MissingClosingTag
            | Error::EmptyFinal => XrecapStatus::Format,
            Error::DimMismatch { .. } => XrecapStatus::DimMismatch,
            Error::MissingId(_) | Error::MissingCaption { .. } => XrecapStatus::MissingId,
            Error::ConfigValidation(_) | Error::SupercategoryMismatch => XrecapStatus::Config,
            Error::Transport { .. } | Error::HttpStatus { .. } | Error::EmptyResponse | Error::FailureThreshold { .. } => {
                XrecapStatus::Network
            }
            Error::NonFinite { .. } | Error::ZeroVector { .. } | Error::NonFiniteLoss { .. } => XrecapStatus::Numeric,
            _ => XrecapStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, record any error, and map it to a status.
fn guard(f: impl FnOnce() -> Result<(), (XrecapStatus, String)>) -> XrecapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            XrecapStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            XrecapStatus::Internal
        }
    }
}

fn lib(e: Error) -> (XrecapStatus, String) {
    (XrecapStatus::from(&e), format!("{}: {e}", e.class()))
}

fn null(what: &str) -> (XrecapStatus, String) {
    (XrecapStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (XrecapStatus, String)> {
    str_arg(p, what).map(PathBuf::from)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (XrecapStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (XrecapStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (XrecapStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the most recent failure on this thread, or NULL. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn xrecap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xrecap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// An embedding store with a nearest-neighbor index over all of its ids.
pub struct XrecapStore {
    store: EmbeddingStore,
    index: NnIndex,
    ids: Vec<CString>,
}

/// Open an embedding store (binary or JSON). Vectors are normalized.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_open(path: *const c_char, out: *mut *mut XrecapStore) -> XrecapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let store = xrecap::corpus::ingest_embeddings(&path).map_err(lib)?;
        let index = NnIndex::build(&store, store.ids()).map_err(lib)?;
        let ids = store
            .ids()
            .iter()
            .map(|id| CString::new(id.as_str()).map_err(|_| (XrecapStatus::Format, format!("id {id:?} contains NUL"))))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(XrecapStore { store, index, ids }));
        Ok(())
    })
}

/// # Safety
/// `store` must come from [`xrecap_store_open`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_free(store: *mut XrecapStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// # Safety
/// `store` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_len(store: *const XrecapStore) -> usize {
    store.as_ref().map_or(0, |s| s.store.len())
}

/// # Safety
/// `store` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_dim(store: *const XrecapStore) -> usize {
    store.as_ref().map_or(0, |s| s.store.dim())
}

/// Id at position `i`, or NULL when out of range. Owned by the store.
///
/// # Safety
/// `store` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_id(store: *const XrecapStore, i: usize) -> *const c_char {
    store
        .as_ref()
        .and_then(|s| s.ids.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Copy the vector for `id` into `out` (`out_len` must equal the dim).
///
/// # Safety
/// `id` must be NUL-terminated; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_get(
    store: *const XrecapStore,
    id: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> XrecapStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let id = str_arg(id, "id")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != s.store.dim() {
            return Err(lib(Error::DimMismatch {
                expected: s.store.dim(),
                found: out_len,
            }));
        }
        let v = s.store.get_f64(id).ok_or_else(|| lib(Error::MissingId(id.into())))?;
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&v);
        Ok(())
    })
}

/// Exact top-`k` cosine neighbors of `query` over the store. Writes store
/// positions to `out_index` and similarities to `out_similarity` (each
/// holding `k` entries) and the number found to `out_count`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn xrecap_store_query(
    store: *const XrecapStore,
    query: *const f64,
    dim: usize,
    k: usize,
    out_index: *mut usize,
    out_similarity: *mut f64,
    out_count: *mut usize,
) -> XrecapStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| null("store"))?;
        let q = slice_arg(query, dim, "query")?;
        if out_index.is_null() || out_similarity.is_null() || out_count.is_null() {
            return Err(null("output buffer"));
        }
        let hits = s.index.query(q, k).map_err(lib)?;
        let idx = std::slice::from_raw_parts_mut(out_index, k);
        let sim = std::slice::from_raw_parts_mut(out_similarity, k);
        for (i, h) in hits.iter().enumerate() {
            idx[i] = s.store.ids().iter().position(|x| *x == h.image_id).expect("indexed id");
            sim[i] = h.similarity;
        }
        *out_count = hits.len();
        Ok(())
    })
}

/// A trained text projection head.
pub struct XrecapHead(ProjectionHead);

/// Load a head from a checkpoint file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_load(path: *const c_char, out: *mut *mut XrecapHead) -> XrecapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ck = trainer::load_checkpoint(&path_arg(path, "path")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(XrecapHead(ck.head)));
        Ok(())
    })
}

/// Seeded initial head (identity plus small noise).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_init(d_text: usize, d_joint: usize, seed: u64, out: *mut *mut XrecapHead) -> XrecapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if d_text == 0 || d_joint == 0 {
            return Err((XrecapStatus::InvalidArgument, "dimensions must be positive".into()));
        }
        *out = Box::into_raw(Box::new(XrecapHead(ProjectionHead::init(d_text, d_joint, seed))));
        Ok(())
    })
}

/// # Safety
/// `head` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_free(head: *mut XrecapHead) {
    if !head.is_null() {
        drop(Box::from_raw(head));
    }
}

/// # Safety
/// `head` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_d_text(head: *const XrecapHead) -> usize {
    head.as_ref().map_or(0, |h| h.0.d_text())
}

/// # Safety
/// `head` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_d_joint(head: *const XrecapHead) -> usize {
    head.as_ref().map_or(0, |h| h.0.d_joint())
}

/// Project a text feature to a unit vector in the joint space.
///
/// # Safety
/// `feature` holds `feature_len` doubles; `out` holds `out_len`.
#[no_mangle]
pub unsafe extern "C" fn xrecap_head_project(
    head: *const XrecapHead,
    feature: *const f64,
    feature_len: usize,
    out: *mut f64,
    out_len: usize,
) -> XrecapStatus {
    guard(|| {
        let h = &head.as_ref().ok_or_else(|| null("head"))?.0;
        let x = slice_arg(feature, feature_len, "feature")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < h.d_joint() {
            return Err((
                XrecapStatus::BufferTooSmall,
                format!("output holds {out_len}, need {}", h.d_joint()),
            ));
        }
        let u = h.project(x).map_err(lib)?;
        std::slice::from_raw_parts_mut(out, u.len()).copy_from_slice(&u);
        Ok(())
    })
}

/// Symmetric contrastive loss of `n` unit text/image pairs stored row-major
/// (`n * dim` doubles each).
///
/// # Safety
/// `text` and `image` hold `n * dim` doubles; `out_loss` is writable.
#[no_mangle]
pub unsafe extern "C" fn xrecap_contrastive_loss(
    text: *const f64,
    image: *const f64,
    n: usize,
    dim: usize,
    tau: f64,
    out_loss: *mut f64,
) -> XrecapStatus {
    guard(|| {
        let len = n.checked_mul(dim).ok_or((XrecapStatus::InvalidArgument, "size overflow".to_string()))?;
        let t = slice_arg(text, len, "text")?;
        let i = slice_arg(image, len, "image")?;
        if out_loss.is_null() {
            return Err(null("out_loss"));
        }
        if dim == 0 {
            return Err((XrecapStatus::InvalidArgument, "dim must be positive".into()));
        }
        let rows = |s: &[f64]| s.chunks(dim).map(<[f64]>::to_vec).collect::<Vec<_>>();
        *out_loss = trainer::contrastive_loss(&rows(t), &rows(i), tau).map_err(lib)?.loss;
        Ok(())
    })
}

/// ROUGE F1 for `variant` (`r1`..`r4`, `rL`).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn xrecap_rouge(
    candidate: *const c_char,
    reference: *const c_char,
    variant: *const c_char,
    out: *mut f64,
) -> XrecapStatus {
    guard(|| {
        let c = str_arg(candidate, "candidate")?;
        let r = str_arg(reference, "reference")?;
        let v: RougeVariant = str_arg(variant, "variant")?.parse().map_err(lib)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = eval::rouge(c, r, v);
        Ok(())
    })
}

/// Run every pipeline stage for the TOML config at `config_path`.
///
/// # Safety
/// `config_path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn xrecap_pipeline_all(config_path: *const c_char) -> XrecapStatus {
    guard(|| {
        let cfg = PipelineConfig::load(&path_arg(config_path, "config_path")?).map_err(lib)?;
        let run = Run::new(cfg).map_err(lib)?;
        let reports = run.all().map_err(lib)?;
        let manifest = run.manifest("pipeline all", &reports).map_err(lib)?;
        manifest.write(&run.layout.manifest("pipeline all")).map_err(lib)
    })
}
