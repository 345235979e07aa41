//! C ABI over explorekit.
//!
//! Every fallible call returns an [`EkStatus`]; on failure the message is
//! available from [`ek_last_error_message`] on the same thread. Strings
//! returned through `out` pointers are owned by the caller and must be
//! released with [`ek_string_free`]. Worlds are opaque handles released with
//! [`ek_world_free`].

use explorekit::dataset;
use explorekit::explore::{EpisodeSpec, Explorer};
use explorekit::planner::{self, PlanError};
use explorekit::policy::OraclePolicy;
use explorekit::prompt::{collection_map, compute_gaps, parse_collection, render_decision, render_requirements};
use explorekit::retrieval::{parse_output, retrieve, LexicalSimilarity};
use explorekit::trajectory::{EpisodeSettings, Trajectory};
use explorekit::World;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    NotFound = 4,
    Unreachable = 5,
    Internal = 6,
}

/// Opaque world handle.
pub struct EkWorld {
    world: World,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(EkStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EkStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EkStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(EkStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EkStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn world<'a>(p: *const EkWorld) -> Result<&'a World, Fail> {
    p.as_ref()
        .map(|w| &w.world)
        .ok_or_else(|| Fail(EkStatus::NullArgument, "`world` is null".into()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(EkStatus::NullArgument, "`out` is null".into()));
    }
    let c = CString::new(s).map_err(|_| Fail(EkStatus::Internal, "result contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn parse_err(e: impl std::fmt::Display) -> Fail {
    Fail(EkStatus::Parse, e.to_string())
}

unsafe fn put_world(out: *mut *mut EkWorld, w: World) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(EkStatus::NullArgument, "`out` is null".into()));
    }
    *out = Box::into_raw(Box::new(EkWorld { world: w }));
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ek_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ek_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ek_world_load_file(path: *const c_char, out: *mut *mut EkWorld) -> EkStatus {
    guard(|| {
        let path = text(path, "path")?;
        let w = World::load(path).map_err(|e| match e {
            explorekit::world::WorldError::Io { .. } => Fail(EkStatus::NotFound, e.to_string()),
            other => parse_err(other),
        })?;
        put_world(out, w)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ek_world_from_json(json: *const c_char, out: *mut *mut EkWorld) -> EkStatus {
    guard(|| {
        let w = World::from_json_str(text(json, "json")?).map_err(parse_err)?;
        put_world(out, w)
    })
}

/// # Safety
/// `w` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ek_world_free(w: *mut EkWorld) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of tasks, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ek_world_task_count(w: *const EkWorld) -> usize {
    w.as_ref().map_or(0, |w| w.world.tasks.len())
}

/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ek_world_skill_count(w: *const EkWorld) -> usize {
    w.as_ref().map_or(0, |w| w.world.skills.len())
}

/// Shortest number of skill executions that completes `task`.
///
/// # Safety
/// Pointers must be valid; `task` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ek_min_plan_length(w: *const EkWorld, task: *const c_char, out: *mut usize) -> EkStatus {
    guard(|| {
        let w = world(w)?;
        let name = text(task, "task")?;
        let t = w
            .task(name)
            .ok_or_else(|| Fail(EkStatus::NotFound, format!("unknown task `{name}`")))?;
        let n = planner::min_plan_length(w, t).map_err(|e| match e {
            PlanError::Unreachable(_) => Fail(EkStatus::Unreachable, e.to_string()),
            other => Fail(EkStatus::Internal, other.to_string()),
        })?;
        if out.is_null() {
            return Err(Fail(EkStatus::NullArgument, "`out` is null".into()));
        }
        *out = n;
        Ok(())
    })
}

/// Maps free text such as "Next skill: get sticks" to a catalog skill name.
///
/// # Safety
/// Pointers must be valid; `output` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ek_retrieve(w: *const EkWorld, output: *const c_char, out: *mut *mut c_char) -> EkStatus {
    guard(|| {
        let w = world(w)?;
        let parsed = parse_output(text(output, "output")?).map_err(parse_err)?;
        let sim = LexicalSimilarity::new(w.synonyms.clone());
        let i = retrieve(&parsed, &w.skills, &w.synonyms, &sim).map_err(|e| Fail(EkStatus::Internal, e.to_string()))?;
        put_string(out, w.skills[i].description.clone())
    })
}

/// Gap analysis for requirements against collections, all given in the
/// "2.0 log; 3.0 dirt" form.
///
/// # Safety
/// All string arguments NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ek_gap_check(
    task: *const c_char,
    requirements: *const c_char,
    inventory: *const c_char,
    surroundings: *const c_char,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let task = text(task, "task")?;
        let reqs = parse_collection(text(requirements, "requirements")?).map_err(parse_err)?;
        let inv = collection_map(text(inventory, "inventory")?).map_err(parse_err)?;
        let surr = collection_map(text(surroundings, "surroundings")?).map_err(parse_err)?;
        let report = compute_gaps(&reqs, &inv, &surr);
        put_string(out, report.analysis(task))
    })
}

/// Decision prompt for a world task. `history` holds executed skill names
/// separated by newlines (may be empty).
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ek_render_decision(
    w: *const EkWorld,
    task: *const c_char,
    inventory: *const c_char,
    surroundings: *const c_char,
    history: *const c_char,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let w = world(w)?;
        let name = text(task, "task")?;
        let t = w
            .task(name)
            .ok_or_else(|| Fail(EkStatus::NotFound, format!("unknown task `{name}`")))?;
        let history: Vec<String> = text(history, "history")?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect();
        let p = render_decision(
            &t.name,
            text(inventory, "inventory")?,
            text(surroundings, "surroundings")?,
            &history,
            &render_requirements(&t.requirements),
        );
        put_string(out, p.text)
    })
}

/// Runs one oracle episode and returns the trajectory as JSON.
///
/// # Safety
/// Pointers must be valid; `task` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ek_run_oracle_episode(
    w: *const EkWorld,
    task: *const c_char,
    seed: u64,
    deterministic: bool,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let base = world(w)?;
        let name = text(task, "task")?;
        let index = base
            .task_index(name)
            .ok_or_else(|| Fail(EkStatus::NotFound, format!("unknown task `{name}`")))?;
        let det;
        let w = if deterministic {
            det = base.deterministic();
            &det
        } else {
            base
        };
        let sim = LexicalSimilarity::new(w.synonyms.clone());
        let settings = EpisodeSettings {
            deterministic_world: deterministic,
            ..EpisodeSettings::default()
        };
        let explorer = Explorer::new(w, &OraclePolicy, &sim, settings);
        let t = explorer.run_episode(&EpisodeSpec {
            task: w.tasks[index].clone(),
            task_index: index,
            episode_index: 0,
            campaign_seed: seed,
        });
        put_string(out, t.to_json())
    })
}

/// Builds dataset JSON-Lines from a JSON array of trajectories.
///
/// # Safety
/// Pointers must be valid; `trajectories_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ek_build_dataset_jsonl(
    trajectories_json: *const c_char,
    dedup: bool,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let ts: Vec<Trajectory> = serde_json::from_str(text(trajectories_json, "trajectories_json")?).map_err(parse_err)?;
        let mut s = String::new();
        for i in dataset::build_dataset(&ts, dedup) {
            s.push_str(&serde_json::to_string(&i).map_err(|e| Fail(EkStatus::Internal, e.to_string()))?);
            s.push('\n');
        }
        put_string(out, s)
    })
}
