//! C ABI over `art-core`.
//!
//! Every fallible function returns an [`ArtStatus`]; on anything but
//! `ART_STATUS_OK` a message is available from [`art_last_error`] on the
//! same thread. Handles are opaque, created by `*_load` / `*_builtin`
//! style constructors and released with the matching `*_free`. Outputs are
//! written only on success.
//!
//! Predicates crossing the boundary as arrays are identified by index.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use art_core::adaptive::allocate_budget;
use art_core::balanced::{allocate_round_robin, draw};
use art_core::config::PipelineConfig;
use art_core::model::DatasetPartition;
use art_core::pipeline::{self, AdaptiveInputs, EvalInputs};
use art_core::scoring::{entropy_of, similarity, BuiltinProvider, EmbeddingProvider, TableProvider};
use art_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// Well-formed input the algorithms reject (unknown ids, missing records, ...).
    Domain = 5,
    Panic = 6,
}

/// Embedding provider handle.
pub struct ArtProvider {
    inner: Box<dyn EmbeddingProvider>,
}

/// Train / pool / validation partition handle.
pub struct ArtPartition {
    inner: DatasetPartition,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> ArtStatus {
    match e {
        Error::Io { .. } => ArtStatus::Io,
        Error::Parse { .. } => ArtStatus::Parse,
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::LogitsShape(_)
        | Error::NonFiniteLogits(_)
        | Error::EmptyPhrase => ArtStatus::InvalidArgument,
        _ => ArtStatus::Domain,
    }
}

struct Fail(ArtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> ArtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ArtStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ArtStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ArtStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ArtStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    text(p, what).map(PathBuf::from)
}

unsafe fn optional_path(p: *const c_char, what: &str) -> Result<Option<PathBuf>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        path(p, what).map(Some)
    }
}

unsafe fn config(p: *const c_char) -> Result<PipelineConfig, Fail> {
    Ok(match optional_path(p, "config")? {
        Some(path) => PipelineConfig::load(&path)?,
        None => PipelineConfig::default(),
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn index_name(i: usize) -> String {
    format!("{i:08}")
}

/// Message for the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn art_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Mean beam entropy of `beams × length × vocab` row-major logits.
///
/// # Safety
/// `values` must point to `beams * length * vocab` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn art_entropy(
    values: *const f64,
    beams: usize,
    length: usize,
    vocab: usize,
    out: *mut f64,
) -> ArtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let n = beams
            .checked_mul(length)
            .and_then(|x| x.checked_mul(vocab))
            .ok_or_else(|| Fail(ArtStatus::InvalidArgument, "logits shape overflows".into()))?;
        let h = entropy_of(slice(values, n, "values")?, beams, length, vocab)?;
        *out = h;
        Ok(())
    })
}

/// Hashed bag-of-words embeddings of `dimension >= 8`.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with
/// [`art_provider_free`].
#[no_mangle]
pub unsafe extern "C" fn art_provider_builtin(dimension: usize, seed: u64, out: *mut *mut ArtProvider) -> ArtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Box::new(BuiltinProvider::new(dimension, seed)?);
        *out = Box::into_raw(Box::new(ArtProvider { inner }));
        Ok(())
    })
}

/// Provider backed by a `phrase<TAB>v1 v2 ...` table file.
///
/// # Safety
/// `table_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn art_provider_from_table(table_path: *const c_char, out: *mut *mut ArtProvider) -> ArtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Box::new(TableProvider::load(&path(table_path, "table_path")?)?);
        *out = Box::into_raw(Box::new(ArtProvider { inner }));
        Ok(())
    })
}

/// # Safety
/// `provider` must come from an `art_provider_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn art_provider_free(provider: *mut ArtProvider) {
    if !provider.is_null() {
        drop(Box::from_raw(provider));
    }
}

/// Cosine similarity of two phrases' embeddings.
///
/// # Safety
/// Strings must be NUL-terminated; `provider` a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn art_similarity(
    provider: *const ArtProvider,
    predicted: *const c_char,
    ground_truth: *const c_char,
    out: *mut f64,
) -> ArtStatus {
    guard(|| {
        let provider = provider.as_ref().ok_or_else(|| null("provider"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = similarity(text(predicted, "predicted")?, text(ground_truth, "ground_truth")?, provider.inner.as_ref())?;
        *out = s;
        Ok(())
    })
}

/// Balanced allocation: `out[i]` slots for predicate `i`. Ties in
/// availability are broken by index.
///
/// # Safety
/// `availability` and `out` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn art_allocate_round_robin(
    availability: *const usize,
    n: usize,
    budget: usize,
    out: *mut usize,
) -> ArtStatus {
    guard(|| {
        let av: BTreeMap<String, usize> =
            slice(availability, n, "availability")?.iter().enumerate().map(|(i, a)| (index_name(i), *a)).collect();
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        let alloc = allocate_round_robin(&av, budget);
        for (i, v) in alloc.per_predicate.values().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Recall-weighted allocation: predicate `i` gets a share proportional to
/// `1 - recalls[i]`, capped at `availability[i]`.
///
/// # Safety
/// `recalls`, `availability` and `out` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn art_allocate_budget(
    recalls: *const f64,
    availability: *const usize,
    n: usize,
    budget: usize,
    out: *mut usize,
) -> ArtStatus {
    guard(|| {
        let r: BTreeMap<String, f64> =
            slice(recalls, n, "recalls")?.iter().enumerate().map(|(i, x)| (index_name(i), *x)).collect();
        let av: BTreeMap<String, usize> =
            slice(availability, n, "availability")?.iter().enumerate().map(|(i, a)| (index_name(i), *a)).collect();
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        let alloc = allocate_budget(&r, &av, budget)?;
        for (i, v) in alloc.per_predicate.values().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `partition_path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn art_partition_load(partition_path: *const c_char, out: *mut *mut ArtPartition) -> ArtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = DatasetPartition::load(&path(partition_path, "partition_path")?)?;
        *out = Box::into_raw(Box::new(ArtPartition { inner }));
        Ok(())
    })
}

/// # Safety
/// `partition` must be a live handle and `partition_path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn art_partition_save(partition: *const ArtPartition, partition_path: *const c_char) -> ArtStatus {
    guard(|| {
        let p = partition.as_ref().ok_or_else(|| null("partition"))?;
        p.inner.save(&path(partition_path, "partition_path")?)?;
        Ok(())
    })
}

/// # Safety
/// `partition` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn art_partition_free(partition: *mut ArtPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}

/// # Safety
/// `partition` must be a live handle; each output pointer valid.
#[no_mangle]
pub unsafe extern "C" fn art_partition_counts(
    partition: *const ArtPartition,
    train: *mut usize,
    pool: *mut usize,
    val: *mut usize,
) -> ArtStatus {
    guard(|| {
        let p = &partition.as_ref().ok_or_else(|| null("partition"))?.inner;
        if train.is_null() || pool.is_null() || val.is_null() {
            return Err(null("train/pool/val"));
        }
        *train = p.train().len();
        *pool = p.pool().len();
        *val = p.val().len();
        Ok(())
    })
}

/// One balanced round of `budget` samples. The input handle is left
/// untouched; the updated partition is returned as a new handle.
///
/// # Safety
/// `partition` must be a live handle; `out` and `selected` valid.
#[no_mangle]
pub unsafe extern "C" fn art_partition_sample_balanced(
    partition: *const ArtPartition,
    budget: usize,
    seed: u64,
    out: *mut *mut ArtPartition,
    selected: *mut usize,
) -> ArtStatus {
    guard(|| {
        let p = &partition.as_ref().ok_or_else(|| null("partition"))?.inner;
        if out.is_null() || selected.is_null() {
            return Err(null("out/selected"));
        }
        let alloc = allocate_round_robin(p.availability(), budget);
        let (ids, next) = draw(p, &alloc, seed)?;
        *selected = ids.len();
        *out = Box::into_raw(Box::new(ArtPartition { inner: next }));
        Ok(())
    })
}

/// File-level instruction generation; `config_path` may be null for defaults.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn art_gen_instructions(
    annotations: *const c_char,
    vocab: *const c_char,
    config_path: *const c_char,
    out_path: *const c_char,
) -> ArtStatus {
    guard(|| {
        let cfg = config(config_path)?;
        pipeline::cmd_gen_instructions(
            &path(annotations, "annotations")?,
            &path(vocab, "vocab")?,
            &cfg,
            &path(out_path, "out_path")?,
        )?;
        Ok(())
    })
}

/// One adaptive round, writing its artifacts under `out_dir`.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated; only `config_path`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn art_sample_adaptive(
    partition_path: *const c_char,
    records: *const c_char,
    recalls: *const c_char,
    annotations: *const c_char,
    vocab: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
) -> ArtStatus {
    guard(|| {
        let cfg = config(config_path)?;
        let (partition, records, recalls) =
            (path(partition_path, "partition_path")?, path(records, "records")?, path(recalls, "recalls")?);
        let (annotations, vocab) = (path(annotations, "annotations")?, path(vocab, "vocab")?);
        let inputs = AdaptiveInputs {
            partition: &partition,
            records: &records,
            recalls: &recalls,
            annotations: &annotations,
            vocab: &vocab,
        };
        pipeline::cmd_sample_adaptive(&inputs, &cfg, &path(out_dir, "out_dir")?)?;
        Ok(())
    })
}

/// Metrics JSON for a record file. `partition_path` restricts ground truth
/// to the validation split; it and `config_path` may be null.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn art_eval(
    annotations: *const c_char,
    vocab: *const c_char,
    records: *const c_char,
    partition_path: *const c_char,
    config_path: *const c_char,
    out_path: *const c_char,
) -> ArtStatus {
    guard(|| {
        let cfg = config(config_path)?;
        let (annotations, vocab, records) =
            (path(annotations, "annotations")?, path(vocab, "vocab")?, path(records, "records")?);
        let partition = optional_path(partition_path, "partition_path")?;
        let inputs = EvalInputs {
            annotations: &annotations,
            vocab: &vocab,
            records: &records,
            partition: partition.as_deref(),
            recalls_out: None,
        };
        pipeline::cmd_eval(&inputs, &cfg, &path(out_path, "out_path")?)?;
        Ok(())
    })
}
