//! C ABI over the evaluation side of `advscen`: load a world, an ego
//! controller and surrounding traffic, then run Monte-Carlo episodes.
//!
//! Every fallible function returns an [`AdvscenStatus`]; on failure the
//! message is available from [`advscen_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use advscen::adversary::{store, ActorAdversary, Traffic};
use advscen::analysis::{evaluate_episodes, EvalReport};
use advscen::ego::dqn::q_shape;
use advscen::ego::{DqnPolicy, EgoPolicy, GapAcceptance, GapThresholds};
use advscen::neural::{actor_shape, io};
use advscen::scenario::{EnvConfig, Outcome, ADV_ACTION_DIM, STATE_DIM};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvscenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Runtime = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvscenOutcome {
    Success = 0,
    Crash = 1,
    Timeout = 2,
}

/// World dynamics and reward settings.
pub struct AdvscenEnv {
    env: EnvConfig,
}

/// Controller under test.
pub struct AdvscenEgo {
    ego: EgoPolicy,
}

/// Surrounding traffic: naturalistic IDM or one trained adversary.
pub struct AdvscenTraffic {
    traffic: Traffic,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdvscenEvalStats {
    pub episodes: u64,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_ego_return: f64,
    pub mean_adv_return: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvscenEpisode {
    pub seed: u64,
    pub outcome: AdvscenOutcome,
    pub steps: u32,
    pub ego_return: f64,
    pub adv_return: f64,
}

struct Failure(AdvscenStatus, String);

type Result<T> = std::result::Result<T, Failure>;

fn fail<T>(status: AdvscenStatus, msg: impl Into<String>) -> Result<T> {
    Err(Failure(status, msg.into()))
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<()>) -> AdvscenStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdvscenStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AdvscenStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str> {
    if s.is_null() {
        return fail(AdvscenStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(s).to_str().or_else(|_| fail(AdvscenStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T> {
    p.as_ref().map_or_else(|| fail(AdvscenStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<()> {
    if out.is_null() {
        return fail(AdvscenStatus::NullPointer, "out is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn outcome(o: Outcome) -> AdvscenOutcome {
    match o {
        Outcome::Success => AdvscenOutcome::Success,
        Outcome::Crash => AdvscenOutcome::Crash,
        Outcome::Timeout | Outcome::Running => AdvscenOutcome::Timeout,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn advscen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn advscen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a world from JSON `{"scenario": {...}, "reward": {...}}`; NULL
/// selects the defaults.
///
/// # Safety
/// `json` is NULL or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_env_new(json: *const c_char, out: *mut *mut AdvscenEnv) -> AdvscenStatus {
    guard(|| {
        let env = if json.is_null() {
            EnvConfig::default()
        } else {
            serde_json::from_str::<EnvConfig>(text(json, "json")?)
                .or_else(|e| fail(AdvscenStatus::Config, e.to_string()))?
        };
        env.validate().or_else(|e| fail(AdvscenStatus::Config, e.to_string()))?;
        put(out, AdvscenEnv { env })
    })
}

/// # Safety
/// `env` is NULL or a handle from [`advscen_env_new`], not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn advscen_env_free(env: *mut AdvscenEnv) {
    drop_handle(env)
}

/// Rule-based gap-acceptance ego with default thresholds.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_ego_gap_new(out: *mut *mut AdvscenEgo) -> AdvscenStatus {
    guard(|| put(out, AdvscenEgo { ego: EgoPolicy::Gap(GapAcceptance::new(GapThresholds::default())) }))
}

/// DQN ego from a `q_network.json` written by `advscen train-ego`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_ego_dqn_load(path: *const c_char, out: *mut *mut AdvscenEgo) -> AdvscenStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let q_network = io::load_from(&path).or_else(|e| fail(AdvscenStatus::Io, format!("{}: {e}", path.display())))?;
        if q_network.shape() != q_shape() {
            return fail(AdvscenStatus::InvalidArgument, format!("{}: not a Q-network", path.display()));
        }
        put(out, AdvscenEgo { ego: EgoPolicy::Dqn(DqnPolicy { q_network }) })
    })
}

/// # Safety
/// `ego` is NULL or a handle from an `advscen_ego_*` constructor, not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn advscen_ego_free(ego: *mut AdvscenEgo) {
    drop_handle(ego)
}

/// Naturalistic IDM traffic.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_traffic_naturalistic_new(out: *mut *mut AdvscenTraffic) -> AdvscenStatus {
    guard(|| put(out, AdvscenTraffic { traffic: Traffic::Naturalistic }))
}

/// Trained adversary from an ensemble member directory
/// (`.../ensemble/member-XXX`).
///
/// # Safety
/// `member_dir` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_traffic_member_load(
    member_dir: *const c_char,
    out: *mut *mut AdvscenTraffic,
) -> AdvscenStatus {
    guard(|| {
        let dir = PathBuf::from(text(member_dir, "member_dir")?);
        let actor = store::load_actor(&dir).or_else(|e| fail(AdvscenStatus::Io, e.to_string()))?;
        if actor.shape() != actor_shape(STATE_DIM, ADV_ACTION_DIM) {
            return fail(AdvscenStatus::InvalidArgument, format!("{}: not an adversary actor", dir.display()));
        }
        put(out, AdvscenTraffic { traffic: Traffic::Learned(ActorAdversary { actor }) })
    })
}

/// # Safety
/// `traffic` is NULL or a handle from an `advscen_traffic_*` constructor,
/// not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn advscen_traffic_free(traffic: *mut AdvscenTraffic) {
    drop_handle(traffic)
}

unsafe fn run(
    env: *const AdvscenEnv,
    traffic: *const AdvscenTraffic,
    ego: *const AdvscenEgo,
    episodes: u64,
    seed: u64,
) -> Result<Vec<advscen::analysis::EpisodeResult>> {
    let env = get(env, "env")?;
    let traffic = get(traffic, "traffic")?;
    let ego = get(ego, "ego")?;
    let n = usize::try_from(episodes).or_else(|_| fail(AdvscenStatus::InvalidArgument, "too many episodes"))?;
    if n == 0 {
        return fail(AdvscenStatus::InvalidArgument, "episodes must be positive");
    }
    evaluate_episodes(&env.env, &traffic.traffic, &ego.ego, n, seed).or_else(|e| fail(AdvscenStatus::Runtime, e.to_string()))
}

/// Run `episodes` fresh episodes from evaluation seed `seed` and write the
/// aggregate rates. Identical arguments give identical results.
///
/// # Safety
/// Handles are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn advscen_evaluate(
    env: *const AdvscenEnv,
    traffic: *const AdvscenTraffic,
    ego: *const AdvscenEgo,
    episodes: u64,
    seed: u64,
    out: *mut AdvscenEvalStats,
) -> AdvscenStatus {
    guard(|| {
        if out.is_null() {
            return fail(AdvscenStatus::NullPointer, "out is null");
        }
        let results = run(env, traffic, ego, episodes, seed)?;
        let r = EvalReport::from_episodes("ffi", &results, seed);
        *out = AdvscenEvalStats {
            episodes: r.episodes as u64,
            success_rate: r.success_rate,
            crash_rate: r.crash_rate,
            timeout_rate: r.timeout_rate,
            mean_ego_return: r.mean_ego_return,
            mean_adv_return: r.mean_adv_return,
        };
        Ok(())
    })
}

/// Like [`advscen_evaluate`] but writes one record per episode into `out`,
/// which must hold `capacity >= episodes` entries.
///
/// # Safety
/// Handles are valid; `out` points to `capacity` writable records.
#[no_mangle]
pub unsafe extern "C" fn advscen_episodes(
    env: *const AdvscenEnv,
    traffic: *const AdvscenTraffic,
    ego: *const AdvscenEgo,
    episodes: u64,
    seed: u64,
    out: *mut AdvscenEpisode,
    capacity: usize,
) -> AdvscenStatus {
    guard(|| {
        if out.is_null() {
            return fail(AdvscenStatus::NullPointer, "out is null");
        }
        if (capacity as u64) < episodes {
            return fail(AdvscenStatus::InvalidArgument, format!("capacity {capacity} < episodes {episodes}"));
        }
        let results = run(env, traffic, ego, episodes, seed)?;
        let slots = std::slice::from_raw_parts_mut(out, results.len());
        for (slot, r) in slots.iter_mut().zip(&results) {
            *slot = AdvscenEpisode {
                seed: r.seed,
                outcome: outcome(r.outcome),
                steps: r.steps,
                ego_return: r.ego_return,
                adv_return: r.adv_return,
            };
        }
        Ok(())
    })
}
