//! C ABI over `klines-denoise`.
//!
//! Objects cross the boundary as opaque handles (`KdImage`, `KdDictionary`)
//! that the caller releases with the matching `*_free` function. Every
//! fallible call returns a [`KdStatus`]; on failure a human-readable message
//! is available from [`kd_last_error_message`] on the same thread.
//! Strings and byte buffers handed out by the library must be released with
//! [`kd_string_free`] and [`kd_buffer_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use klines_denoise::clustering::{
    cluster_spectrum, clustering_cost, spectrum_from_moments, BlockMatrixDoc, ClusterModelDoc,
};
use klines_denoise::dictionary::DictionaryDoc;
use klines_denoise::pgm::{read_pgm, write_pgm};
use klines_denoise::pipeline::{denoise_image_with_training, denoise_with_dictionary, train, Selection};
use klines_denoise::{add_awgn, psnr, DenoiseReport, Dictionary, Error, GrayImage, NoiseSpec, PipelineConfig};

/// Result code of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or unsupported image data.
    Format = 3,
    Dimension = 4,
    Io = 5,
    Json = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Opaque grayscale image.
pub struct KdImage {
    inner: GrayImage,
}

/// Opaque trained dictionary.
pub struct KdDictionary {
    inner: Dictionary,
}

/// Byte buffer owned by the library.
#[repr(C)]
pub struct KdBuffer {
    pub data: *mut u8,
    pub len: usize,
}

struct Failure {
    status: KdStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MalformedHeader(_)
            | Error::TruncatedPayload { .. }
            | Error::UnsupportedMaxval(_)
            | Error::UnsupportedFormat(_) => KdStatus::Format,
            Error::DimensionMismatch(_)
            | Error::BlockTooLarge { .. }
            | Error::OriginOutOfBounds { .. } => KdStatus::Dimension,
            Error::Io(_) => KdStatus::Io,
            Error::Json(_) => KdStatus::Json,
            _ => KdStatus::InvalidArgument,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            status: KdStatus::Json,
            message: e.to_string(),
        }
    }
}

fn fail(status: KdStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KdStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&msg);
            KdStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(KdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(KdStatus::NullPointer, format!("{what} is null")))
}

/// Null means "use the defaults".
unsafe fn config_from(json: *const c_char) -> Result<PipelineConfig, Failure> {
    if json.is_null() {
        return Ok(PipelineConfig::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|_| fail(KdStatus::InvalidArgument, "config is not UTF-8"))?;
    Ok(PipelineConfig::from_json(text)?)
}

unsafe fn str_from<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(KdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(KdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(KdStatus::InvalidArgument, "string contains NUL"))
}

fn image_handle(inner: GrayImage) -> *mut KdImage {
    Box::into_raw(Box::new(KdImage { inner }))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an image from `width * height` row-major samples.
///
/// # Safety
/// `samples` must point to `width * height` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_image_new(
    width: usize,
    height: usize,
    samples: *const f64,
    out: *mut *mut KdImage,
) -> KdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if samples.is_null() {
            return Err(fail(KdStatus::NullPointer, "samples is null"));
        }
        let count = width
            .checked_mul(height)
            .ok_or_else(|| fail(KdStatus::InvalidArgument, "image too large"))?;
        let data = std::slice::from_raw_parts(samples, count).to_vec();
        *out = image_handle(GrayImage::new(width, height, data)?);
        Ok(())
    })
}

/// Decodes a P5 or P2 PGM held in memory.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_image_read_pgm(bytes: *const u8, len: usize, out: *mut *mut KdImage) -> KdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if bytes.is_null() {
            return Err(fail(KdStatus::NullPointer, "bytes is null"));
        }
        let img = read_pgm(std::slice::from_raw_parts(bytes, len))?;
        *out = image_handle(img);
        Ok(())
    })
}

/// Encodes as binary P5; release the buffer with [`kd_buffer_free`].
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_image_write_pgm(img: *const KdImage, out: *mut KdBuffer) -> KdStatus {
    guard(|| {
        let img = borrow(img, "img")?;
        let out = out_ptr(out, "out")?;
        let bytes = write_pgm(&img.inner).into_boxed_slice();
        let len = bytes.len();
        *out = KdBuffer {
            data: Box::into_raw(bytes) as *mut u8,
            len,
        };
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kd_image_width(img: *const KdImage) -> usize {
    img.as_ref().map_or(0, |i| i.inner.width())
}

/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kd_image_height(img: *const KdImage) -> usize {
    img.as_ref().map_or(0, |i| i.inner.height())
}

/// Borrows the row-major samples; valid while `img` is alive.
///
/// # Safety
/// `img` must be a live handle; `data` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_image_samples(img: *const KdImage, data: *mut *const f64, len: *mut usize) -> KdStatus {
    guard(|| {
        let img = borrow(img, "img")?;
        let data = out_ptr(data, "data")?;
        let len = out_ptr(len, "len")?;
        *data = img.inner.samples().as_ptr();
        *len = img.inner.samples().len();
        Ok(())
    })
}

/// # Safety
/// `img` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kd_image_free(img: *mut KdImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Adds seeded Gaussian noise; the result is not clamped.
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_add_awgn(img: *const KdImage, sigma: f64, seed: u64, out: *mut *mut KdImage) -> KdStatus {
    guard(|| {
        let img = borrow(img, "img")?;
        let out = out_ptr(out, "out")?;
        let noisy = add_awgn(&img.inner, NoiseSpec::new(sigma, seed)?);
        *out = image_handle(noisy);
        Ok(())
    })
}

/// PSNR in dB; `INFINITY` for identical images.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kd_psnr(a: *const KdImage, b: *const KdImage, out: *mut f64) -> KdStatus {
    guard(|| {
        let a = borrow(a, "a")?;
        let b = borrow(b, "b")?;
        let out = out_ptr(out, "out")?;
        *out = psnr(&a.inner, &b.inner)?;
        Ok(())
    })
}

unsafe fn write_report(report_json: *mut *mut c_char, report: &DenoiseReport) -> Result<(), Failure> {
    if let Some(slot) = report_json.as_mut() {
        *slot = into_c_string(serde_json::to_string(report)?)?;
    }
    Ok(())
}

/// Trains on `noisy` and denoises it. `config_json` and `clean` may be null;
/// when `report_json` is non-null it receives the JSON report (free with
/// [`kd_string_free`]).
///
/// # Safety
/// Pointers must be live handles, valid NUL-terminated strings, or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn kd_denoise(
    noisy: *const KdImage,
    config_json: *const c_char,
    clean: *const KdImage,
    out: *mut *mut KdImage,
    report_json: *mut *mut c_char,
) -> KdStatus {
    guard(|| {
        let noisy = borrow(noisy, "noisy")?;
        let out = out_ptr(out, "out")?;
        let cfg = config_from(config_json)?;
        let clean = clean.as_ref().map(|c| &c.inner);
        let (img, report, _) = denoise_image_with_training(&noisy.inner, &cfg, clean)?;
        write_report(report_json, &report)?;
        *out = image_handle(img);
        Ok(())
    })
}

/// Learns a dictionary from `noisy`.
///
/// # Safety
/// `noisy` must be a live handle, `config_json` a valid string or null, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_train(
    noisy: *const KdImage,
    config_json: *const c_char,
    out: *mut *mut KdDictionary,
) -> KdStatus {
    guard(|| {
        let noisy = borrow(noisy, "noisy")?;
        let out = out_ptr(out, "out")?;
        let cfg = config_from(config_json)?;
        let (training, _) = train(&noisy.inner, &cfg, Selection::Equalized)?;
        *out = Box::into_raw(Box::new(KdDictionary {
            inner: training.dictionary,
        }));
        Ok(())
    })
}

/// Denoises with a previously trained dictionary.
///
/// # Safety
/// As [`kd_denoise`]; `dict` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kd_denoise_with_dictionary(
    noisy: *const KdImage,
    dict: *const KdDictionary,
    config_json: *const c_char,
    clean: *const KdImage,
    out: *mut *mut KdImage,
    report_json: *mut *mut c_char,
) -> KdStatus {
    guard(|| {
        let noisy = borrow(noisy, "noisy")?;
        let dict = borrow(dict, "dict")?;
        let out = out_ptr(out, "out")?;
        let cfg = config_from(config_json)?;
        let clean = clean.as_ref().map(|c| &c.inner);
        let (img, report) = denoise_with_dictionary(&noisy.inner, &dict.inner, &cfg, clean)?;
        write_report(report_json, &report)?;
        *out = image_handle(img);
        Ok(())
    })
}

/// Parses a dictionary JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_dictionary_from_json(json: *const c_char, out: *mut *mut KdDictionary) -> KdStatus {
    guard(|| {
        let text = str_from(json, "json")?;
        let out = out_ptr(out, "out")?;
        let doc: DictionaryDoc = serde_json::from_str(text)?;
        *out = Box::into_raw(Box::new(KdDictionary {
            inner: doc.to_dictionary()?,
        }));
        Ok(())
    })
}

/// Serializes a dictionary; free the string with [`kd_string_free`].
///
/// # Safety
/// `dict` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kd_dictionary_to_json(dict: *const KdDictionary, out: *mut *mut c_char) -> KdStatus {
    guard(|| {
        let dict = borrow(dict, "dict")?;
        let out = out_ptr(out, "out")?;
        *out = into_c_string(serde_json::to_string(&DictionaryDoc::from_dictionary(&dict.inner))?)?;
        Ok(())
    })
}

/// # Safety
/// `dict` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kd_dictionary_atom_count(dict: *const KdDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `dict` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kd_dictionary_free(dict: *mut KdDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Clustering cost of a cluster-model JSON document. `data_json` (a block
/// matrix document) may be null when the model carries eigenvalues.
/// `smooth_cutoff < 0` selects the default `sigma^2`.
///
/// # Safety
/// Strings must be valid NUL-terminated UTF-8 (or null where allowed); outputs writable.
#[no_mangle]
pub unsafe extern "C" fn kd_clustering_cost(
    model_json: *const c_char,
    data_json: *const c_char,
    sigma: f64,
    smooth_cutoff: f64,
    total: *mut f64,
    non_smooth: *mut f64,
) -> KdStatus {
    guard(|| {
        let text = str_from(model_json, "model_json")?;
        let total = out_ptr(total, "total")?;
        let non_smooth = out_ptr(non_smooth, "non_smooth")?;
        if !(sigma > 0.0) {
            return Err(fail(KdStatus::InvalidArgument, "sigma must be > 0"));
        }
        let doc: ClusterModelDoc = serde_json::from_str(text)?;
        let model = doc.to_model()?;
        let spectrum = if !data_json.is_null() {
            let data: BlockMatrixDoc = serde_json::from_str(str_from(data_json, "data_json")?)?;
            cluster_spectrum(&data.to_matrix()?, &model, sigma)?
        } else if let Some(eigs) = &doc.second_moment_eigenvalues {
            spectrum_from_moments(eigs, &model.sizes, sigma)?
        } else {
            return Err(fail(
                KdStatus::InvalidArgument,
                "model has no eigenvalues and no data was given",
            ));
        };
        let cutoff = if smooth_cutoff < 0.0 { sigma * sigma } else { smooth_cutoff };
        let cost = clustering_cost(&spectrum, sigma, cutoff)?;
        *total = cost.total;
        *non_smooth = cost.non_smooth;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `buf` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kd_buffer_free(buf: KdBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}
