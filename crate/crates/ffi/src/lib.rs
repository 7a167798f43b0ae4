//! C interface to sentigraph.
//!
//! Treebanks, models and lexicons are passed around as opaque handles that
//! must be released with their `_free` function. Every fallible call returns
//! an [`SgStatus`]; on failure the message and the library error code of the
//! most recent error on the calling thread are available through
//! [`sg_last_error_message`] and [`sg_last_error_code`]. Strings handed out
//! by the library are released with [`sg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sentigraph::codec::{read_json, read_treebank_graph, write_json, write_treebank_graph, CodecError, EncodeMode};
use sentigraph::metrics::{evaluate, MetricsError};
use sentigraph::parser::{load_checkpoint, predict_treebank, read_embeddings, EmbeddingProvider, Model, ParserError};
use sentigraph::treebank_ops::{load_lexicon, merge_treebanks, stats, translate_word_level, Lexicon, OpsError};
use sentigraph::Treebank;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Codec = 4,
    Metrics = 5,
    Treebank = 6,
    Parser = 7,
    Panic = 8,
}

/// Corpus counts of a treebank.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SgStats {
    pub sentences: usize,
    pub holders: usize,
    pub targets: usize,
    pub expressions: usize,
}

/// Lexicon coverage of a translation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgCoverage {
    pub tokens: usize,
    pub translated: usize,
    pub coverage: f64,
}

/// Opaque treebank handle.
pub struct SgTreebank(Treebank);

/// Opaque parser model handle.
pub struct SgModel(Model);

/// Opaque translation lexicon handle.
pub struct SgLexicon(Lexicon);

#[derive(Debug)]
struct Error {
    status: SgStatus,
    code: &'static str,
    message: String,
}

impl Error {
    fn new(status: SgStatus, code: &'static str, message: impl Into<String>) -> Self {
        Error {
            status,
            code,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Error::new(SgStatus::NullArgument, "NULL_ARGUMENT", format!("{} is null", what))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Error::new(SgStatus::InvalidArgument, "INVALID_ARGUMENT", message)
    }
}

impl From<CodecError> for Error {
    fn from(e: CodecError) -> Self {
        Error::new(SgStatus::Codec, e.code(), e.to_string())
    }
}

impl From<MetricsError> for Error {
    fn from(e: MetricsError) -> Self {
        Error::new(SgStatus::Metrics, e.code(), e.to_string())
    }
}

impl From<OpsError> for Error {
    fn from(e: OpsError) -> Self {
        Error::new(SgStatus::Treebank, e.code(), e.to_string())
    }
}

impl From<ParserError> for Error {
    fn from(e: ParserError) -> Self {
        Error::new(SgStatus::Parser, e.code(), e.to_string())
    }
}

struct LastError {
    message: CString,
    code: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last_error(e: &Error) {
    let message = CString::new(e.message.replace('\0', " ")).unwrap_or_default();
    let code = CString::new(e.code).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(LastError { message, code }));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> SgStatus {
    clear_last_error();
    let err = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return SgStatus::Ok,
        Ok(Err(e)) => e,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            Error::new(SgStatus::Panic, "PANIC", message)
        }
    };
    set_last_error(&err);
    err.status
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| Error::null(what))
}

unsafe fn bytes<'a>(data: *const u8, len: usize, what: &str) -> Result<&'a [u8], Error> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Error::null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Error> {
    if s.is_null() {
        return Err(Error::null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Error::new(SgStatus::InvalidUtf8, "INVALID_UTF8", format!("{}: {}", what, e)))
}

unsafe fn optional_string<'a>(s: *const c_char, what: &str) -> Result<Option<&'a str>, Error> {
    if s.is_null() {
        Ok(None)
    } else {
        string(s, what).map(Some)
    }
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Error> {
    if out.is_null() {
        Err(Error::null(what))
    } else {
        Ok(())
    }
}

fn mode(s: Option<&str>) -> Result<EncodeMode, Error> {
    s.map_or(Ok(EncodeMode::default()), |m| {
        m.parse()
            .map_err(|_| Error::invalid(format!("unknown encoding mode {:?}", m)))
    })
}

fn into_c_string(s: String) -> Result<*mut c_char, Error> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::invalid("output contains a NUL byte"))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last error on this thread, or null. Valid until the next
/// library call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Library error code of the last error on this thread (for example
/// `BAD_MAGIC`), or null. Valid until the next library call on the same
/// thread.
#[no_mangle]
pub extern "C" fn sg_last_error_code() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Release a string returned by the library.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a treebank from JSON bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes, `name` must be a
/// NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_from_json(
    data: *const u8,
    len: usize,
    name: *const c_char,
    out: *mut *mut SgTreebank,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let tb = read_json(bytes(data, len, "data")?, string(name, "name")?)?;
        *out = boxed(SgTreebank(tb));
        Ok(())
    })
}

/// Parse a graph file and decode its opinions. `dangling` may be null;
/// otherwise it receives the number of edges that could not be decoded.
///
/// # Safety
/// `text` and `name` must be NUL-terminated strings, `out` must be writable
/// and `dangling` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_from_graph(
    text: *const c_char,
    name: *const c_char,
    out: *mut *mut SgTreebank,
    dangling: *mut usize,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let (tb, n) = read_treebank_graph(string(text, "text")?, string(name, "name")?)?;
        if !dangling.is_null() {
            *dangling = n;
        }
        *out = boxed(SgTreebank(tb));
        Ok(())
    })
}

/// Serialize a treebank as JSON.
///
/// # Safety
/// `tb` must be a live treebank handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_to_json(tb: *const SgTreebank, out: *mut *mut c_char) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let tb = handle(tb, "treebank")?;
        let json = String::from_utf8(write_json(&tb.0)).map_err(|e| Error::invalid(e.to_string()))?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Encode a treebank and render it as a graph file. `mode` is `head_final`,
/// `head_first` or null for the default. A non-zero `force` resolves label
/// collisions instead of failing.
///
/// # Safety
/// `tb` must be a live treebank handle, `mode` null or a NUL-terminated
/// string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_to_graph(
    tb: *const SgTreebank,
    mode: *const c_char,
    force: bool,
    out: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let tb = handle(tb, "treebank")?;
        let text = write_treebank_graph(&tb.0, self::mode(optional_string(mode, "mode")?)?, force)?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Number of sentences in a treebank.
///
/// # Safety
/// `tb` must be a live treebank handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_len(tb: *const SgTreebank, out: *mut usize) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = handle(tb, "treebank")?.0.len();
        Ok(())
    })
}

/// Corpus counts of a treebank.
///
/// # Safety
/// `tb` must be a live treebank handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_stats(tb: *const SgTreebank, out: *mut SgStats) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let st = stats(&handle(tb, "treebank")?.0);
        *out = SgStats {
            sentences: st.sentences,
            holders: st.holders,
            targets: st.targets,
            expressions: st.expressions,
        };
        Ok(())
    })
}

/// Concatenate treebanks, prefixing sentence ids with the treebank name.
///
/// # Safety
/// `parts` must point to `count` live treebank handles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_merge(
    parts: *const *const SgTreebank,
    count: usize,
    out: *mut *mut SgTreebank,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        if count > 0 && parts.is_null() {
            return Err(Error::null("parts"));
        }
        let handles: &[*const SgTreebank] = if count == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(parts, count)
        };
        let owned = handles
            .iter()
            .map(|&p| handle(p, "part").map(|t| t.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        *out = boxed(SgTreebank(merge_treebanks(&owned)?));
        Ok(())
    })
}

/// Release a treebank handle.
///
/// # Safety
/// `tb` must be null or a treebank handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sg_treebank_free(tb: *mut SgTreebank) {
    if !tb.is_null() {
        drop(Box::from_raw(tb));
    }
}

/// Score a predicted treebank against gold. The report is written to `out`
/// as JSON with `sentiment_graph`, `edges` and `spans` sections.
///
/// # Safety
/// `pred` and `gold` must be live treebank handles, `mode` null or a
/// NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_evaluate(
    pred: *const SgTreebank,
    gold: *const SgTreebank,
    require_polarity: bool,
    labeled: bool,
    mode: *const c_char,
    out: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let report = evaluate(
            &handle(pred, "pred")?.0,
            &handle(gold, "gold")?.0,
            require_polarity,
            labeled,
            self::mode(optional_string(mode, "mode")?)?,
        )?;
        let json = serde_json::to_string(&report).map_err(|e| Error::invalid(e.to_string()))?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Load a tab-separated word-to-word lexicon.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_lexicon_load(
    data: *const u8,
    len: usize,
    case_fold: bool,
    out: *mut *mut SgLexicon,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let lex = load_lexicon(bytes(data, len, "data")?, case_fold)?;
        *out = boxed(SgLexicon(lex));
        Ok(())
    })
}

/// Release a lexicon handle.
///
/// # Safety
/// `lex` must be null or a lexicon handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sg_lexicon_free(lex: *mut SgLexicon) {
    if !lex.is_null() {
        drop(Box::from_raw(lex));
    }
}

/// Translate a treebank word by word. `coverage` may be null.
///
/// # Safety
/// `tb` and `lex` must be live handles, `out` writable and `coverage` null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_translate(
    tb: *const SgTreebank,
    lex: *const SgLexicon,
    out: *mut *mut SgTreebank,
    coverage: *mut SgCoverage,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let (translated, cov) = translate_word_level(&handle(tb, "treebank")?.0, &handle(lex, "lexicon")?.0)?;
        if !coverage.is_null() {
            *coverage = SgCoverage {
                tokens: cov.tokens,
                translated: cov.translated,
                coverage: cov.coverage,
            };
        }
        *out = boxed(SgTreebank(translated));
        Ok(())
    })
}

/// Load a parser checkpoint.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(data: *const u8, len: usize, out: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let model = load_checkpoint(bytes(data, len, "data")?)?;
        *out = boxed(SgModel(model));
        Ok(())
    })
}

/// Release a model handle.
///
/// # Safety
/// `model` must be null or a model handle that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predict opinions for every sentence of `input`. Models trained on
/// precomputed vectors need the embedding file in `embeddings`; pass null
/// and zero otherwise. `dangling` may be null.
///
/// # Safety
/// `model` and `input` must be live handles, `embeddings` must point to
/// `embeddings_len` readable bytes, `out` must be writable and `dangling`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn sg_model_predict(
    model: *const SgModel,
    input: *const SgTreebank,
    embeddings: *const u8,
    embeddings_len: usize,
    out: *mut *mut SgTreebank,
    dangling: *mut usize,
) -> SgStatus {
    guard(|| {
        check_out(out, "out")?;
        let model = handle(model, "model")?;
        let input = handle(input, "input")?;
        let provider = if embeddings.is_null() {
            EmbeddingProvider::Trainable
        } else {
            EmbeddingProvider::Precomputed(read_embeddings(bytes(embeddings, embeddings_len, "embeddings")?)?)
        };
        let (tb, n) = predict_treebank(&model.0, &input.0, &provider)?;
        if !dangling.is_null() {
            *dangling = n;
        }
        *out = boxed(SgTreebank(tb));
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, SgStatus::Panic);
        let message = unsafe { CStr::from_ptr(sg_last_error_message()) };
        assert_eq!(message.to_str().unwrap(), "boom");
        assert_eq!(guard(|| Ok(())), SgStatus::Ok);
        assert!(sg_last_error_message().is_null());
    }

    #[test]
    fn mode_defaults_to_head_final() {
        assert_eq!(mode(None).unwrap(), EncodeMode::HeadFinal);
        assert_eq!(mode(Some("head_first")).unwrap(), EncodeMode::HeadFirst);
        assert_eq!(mode(Some("x")).err().unwrap().status, SgStatus::InvalidArgument);
    }

    #[test]
    fn nul_bytes_in_messages_are_replaced() {
        set_last_error(&Error::invalid("a\0b"));
        let message = unsafe { CStr::from_ptr(sg_last_error_message()) };
        assert_eq!(message.to_str().unwrap(), "a b");
    }
}
