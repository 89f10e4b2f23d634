//! C ABI for jtcr-core.
//!
//! Every fallible call returns a [`JtcrStatus`]. On failure the message is
//! available from [`jtcr_last_error_message`] on the same thread. Objects are
//! opaque handles created by `*_load` / [`jtcr_train`] and released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use jtcr_core::data::{chronological_split, filter_min_activity, parse_checkins, InputFormat, SplitDataset, SplitRatios};
use jtcr_core::eval::{evaluate_model, recommend, EvalOptions};
use jtcr_core::geo::{distance_km, geo_similarity, influence_factor, GeoPoint, EARTH_RADIUS_KM};
use jtcr_core::model::{Checkpoint, Normalizer};
use jtcr_core::train::{train_on_split, Mode, TrainConfig};
use jtcr_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtcrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// Empty or incompatible data, corrupt checkpoint.
    Data = 5,
    Divergence = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtcrFormat {
    Csv = 0,
    Tsv = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtcrMode {
    Joint = 0,
    Phase1Only = 1,
    NoVar = 2,
    NoGeo = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JtcrNormalizer {
    PairCount = 0,
    Positives = 1,
    Negatives = 2,
    One = 3,
}

/// Training settings. `negative_samples == 0` uses every irrelevant POI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct JtcrTrainConfig {
    pub d: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: JtcrMode,
    pub normalizer: JtcrNormalizer,
    pub negative_samples: usize,
}

/// A filtered check-in dataset together with its chronological split.
pub struct JtcrDataset {
    split: SplitDataset,
}

/// A trained model and its id maps.
pub struct JtcrModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(JtcrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => JtcrStatus::Io,
            Error::Parse { .. } | Error::ConflictingPoi { .. } => JtcrStatus::Parse,
            Error::InvalidArgument(_) | Error::Config(_) | Error::OutOfRange { .. } => JtcrStatus::InvalidArgument,
            Error::Divergence { .. } => JtcrStatus::Divergence,
            _ => JtcrStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(JtcrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(JtcrStatus::InvalidArgument, message.into())
}

fn guard<F>(body: F) -> JtcrStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => JtcrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {message}"));
            JtcrStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jtcr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jtcr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a check-in file, drop users and POIs below `min_count` check-ins
/// and split each user's history chronologically (70/10/20).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jtcr_dataset_load(
    path: *const c_char,
    format: JtcrFormat,
    min_count: usize,
    out: *mut *mut JtcrDataset,
) -> JtcrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        if min_count == 0 {
            return Err(invalid("min_count must be at least 1"));
        }
        let format = match format {
            JtcrFormat::Csv => InputFormat::Csv,
            JtcrFormat::Tsv => InputFormat::Tsv,
        };
        let ds = filter_min_activity(&parse_checkins(&path, format)?, min_count);
        if ds.is_empty() {
            return Err(Error::EmptyDataset(format!("{} is empty after filtering", path.display())).into());
        }
        let split = chronological_split(&ds, SplitRatios::default())?;
        *out = Box::into_raw(Box::new(JtcrDataset { split }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from [`jtcr_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jtcr_dataset_free(ds: *mut JtcrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_dataset_num_users(ds: *const JtcrDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.split.train.n_users())
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_dataset_num_pois(ds: *const JtcrDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.split.train.n_pois())
}

/// Check-ins across all three split parts.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_dataset_num_checkins(ds: *const JtcrDataset) -> usize {
    ds.as_ref()
        .map_or(0, |d| d.split.train.len() + d.split.validation.len() + d.split.test.len())
}

#[no_mangle]
pub extern "C" fn jtcr_train_config_default() -> JtcrTrainConfig {
    let c = TrainConfig::default();
    JtcrTrainConfig {
        d: c.d,
        gamma: c.gamma,
        lambda: c.lambda,
        alpha: c.alpha,
        max_iter: c.max_iter,
        epsilon: c.epsilon,
        seed: c.seed,
        mode: JtcrMode::Joint,
        normalizer: JtcrNormalizer::PairCount,
        negative_samples: 0,
    }
}

fn to_config(c: &JtcrTrainConfig) -> TrainConfig {
    TrainConfig {
        d: c.d,
        gamma: c.gamma,
        lambda: c.lambda,
        alpha: c.alpha,
        max_iter: c.max_iter,
        epsilon: c.epsilon,
        seed: c.seed,
        mode: match c.mode {
            JtcrMode::Joint => Mode::Joint,
            JtcrMode::Phase1Only => Mode::Phase1Only,
            JtcrMode::NoVar => Mode::NoVar,
            JtcrMode::NoGeo => Mode::NoGeo,
        },
        normalizer: match c.normalizer {
            JtcrNormalizer::PairCount => Normalizer::PairCount,
            JtcrNormalizer::Positives => Normalizer::Positives,
            JtcrNormalizer::Negatives => Normalizer::Negatives,
            JtcrNormalizer::One => Normalizer::One,
        },
        negative_samples: (c.negative_samples > 0).then_some(c.negative_samples),
        ..TrainConfig::default()
    }
}

/// Train on the dataset's training part.
///
/// # Safety
/// `ds` and `config` must be live/valid pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jtcr_train(
    ds: *const JtcrDataset,
    config: *const JtcrTrainConfig,
    out: *mut *mut JtcrModel,
) -> JtcrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let (model, _) = train_on_split(&to_config(config), &ds.split)?;
        let train = &ds.split.train;
        let poi_ids = train.poi_ids().map(str::to_owned).collect();
        let checkpoint = Checkpoint::new(model, train.user_ids().to_vec(), poi_ids)?;
        *out = Box::into_raw(Box::new(JtcrModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_load(path: *const c_char, out: *mut *mut JtcrModel) -> JtcrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let checkpoint = Checkpoint::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(JtcrModel { checkpoint }));
        Ok(())
    })
}

/// Write the model atomically in the binary checkpoint format.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_save(model: *const JtcrModel, path: *const c_char) -> JtcrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        model.checkpoint.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_free(model: *mut JtcrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_dim(model: *const JtcrModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.model.d())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_num_users(model: *const JtcrModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.model.n_users())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_num_pois(model: *const JtcrModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.model.n_pois())
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jtcr_model_score(model: *const JtcrModel, user: usize, poi: usize, out: *mut f64) -> JtcrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        *out = model.checkpoint.model.score(user, poi)?;
        Ok(())
    })
}

/// Top-`k` POIs for `user`, best first. With a non-null `ds`, POIs the user
/// visited in its training part are skipped. Writes up to `k` entries to
/// `out_pois` / `out_scores` and the count to `out_len`.
///
/// # Safety
/// `out_pois` and `out_scores` must have room for `k` elements.
#[no_mangle]
pub unsafe extern "C" fn jtcr_recommend(
    model: *const JtcrModel,
    ds: *const JtcrDataset,
    user: usize,
    k: usize,
    out_pois: *mut usize,
    out_scores: *mut f64,
    out_len: *mut usize,
) -> JtcrStatus {
    guard(|| {
        let len = out_arg(out_len, "out_len")?;
        *len = 0;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_pois.is_null() || out_scores.is_null() {
            return Err(null("output buffer"));
        }
        let excluded: Vec<usize> = match ds.as_ref() {
            Some(d) => {
                model.checkpoint.check_compatible(&d.split.train)?;
                let visits = d.split.train.visit_counts();
                visits.get(user).map(|row| row.iter().map(|&(j, _)| j).collect()).unwrap_or_default()
            }
            None => Vec::new(),
        };
        let recs = recommend(&model.checkpoint.model, user, &excluded, k)?;
        let pois = std::slice::from_raw_parts_mut(out_pois, k);
        let scores = std::slice::from_raw_parts_mut(out_scores, k);
        for (slot, (j, s)) in recs.iter().enumerate() {
            pois[slot] = *j;
            scores[slot] = *s;
        }
        *len = recs.len();
        Ok(())
    })
}

/// Mean Prec@k and nDCG@k over users with test check-ins.
///
/// # Safety
/// `model` and `ds` must be live handles; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn jtcr_evaluate(
    model: *const JtcrModel,
    ds: *const JtcrDataset,
    k: usize,
    out_precision: *mut f64,
    out_ndcg: *mut f64,
) -> JtcrStatus {
    guard(|| {
        let precision = out_arg(out_precision, "out_precision")?;
        let ndcg = out_arg(out_ndcg, "out_ndcg")?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        model.checkpoint.check_compatible(&ds.split.test)?;
        let opts = EvalOptions {
            ks: vec![k],
            include_train_pois: false,
        };
        let metrics = evaluate_model(&model.checkpoint.model, &ds.split.train, &ds.split.test, &opts)?;
        *precision = metrics.means[0];
        *ndcg = metrics.means[1];
        Ok(())
    })
}

fn point(lat: f64, lon: f64) -> Option<GeoPoint> {
    GeoPoint::from_degrees(lat, lon).ok()
}

/// Great-circle distance in km between two points in degrees; NaN for
/// invalid coordinates.
#[no_mangle]
pub extern "C" fn jtcr_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    match (point(lat1, lon1), point(lat2, lon2)) {
        (Some(a), Some(b)) => distance_km(a, b),
        _ => f64::NAN,
    }
}

/// `1 / (1 + distance_km)`; NaN for invalid coordinates.
#[no_mangle]
pub extern "C" fn jtcr_geo_similarity(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    match (point(lat1, lon1), point(lat2, lon2)) {
        (Some(a), Some(b)) => geo_similarity(a, b, EARTH_RADIUS_KM),
        _ => f64::NAN,
    }
}

/// `1 + alpha * exp(similarity)`.
#[no_mangle]
pub extern "C" fn jtcr_influence_factor(similarity: f64, alpha: f64) -> f64 {
    influence_factor(similarity, alpha)
}
