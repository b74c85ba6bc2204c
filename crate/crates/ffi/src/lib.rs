//! C interface to the `winstab` solvers.
//!
//! Games are loaded from the JSON game format into opaque [`WsGame`]
//! handles; objectives, lassos and reports are exchanged as JSON strings.
//! Every fallible call returns a [`WsStatus`]; on failure a message is
//! available from [`ws_last_error`] on the same thread. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`ws_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use winstab::hardgen::{gen_balanced_sat_instance, Cnf};
use winstab::io::{objectives_to_json, parse_objectives, to_dot, GameBundle, Objective, ObjectiveSpec};
use winstab::mpsolve::{max_bound, solve_combined};
use winstab::semantics::{check_window_run, mp_of_lasso, va_of_lasso};
use winstab::variance::{freq_constraints_check, freq_feasibility, SupportRule, DEFAULT_MAX_CYCLES};
use winstab::window::build_scheme_capped;
use winstab::{Error, Lasso, MeanPayoffObjective, MultiObjective, StrategyScheme, VarianceObjective, WindowObjective};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// JSON, DIMACS or rational syntax error.
    Parse = 3,
    /// Well-formed input that the solver rejects.
    Invalid = 4,
    /// A size cap was exceeded.
    TooLarge = 5,
    /// Internal failure; the handle arguments remain valid.
    Panic = 6,
}

/// A game with its named reward functions.
pub struct WsGame {
    bundle: GameBundle,
}

/// A permissive strategy scheme for a conjunction of window objectives.
pub struct WsScheme {
    scheme: StrategyScheme,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(WsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::TooLarge(_) => WsStatus::TooLarge,
            Error::Parse(_) | Error::Io(_) => WsStatus::Parse,
            _ => WsStatus::Invalid,
        };
        Failure(status, e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> Outcome<()>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            WsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(WsStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(WsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Outcome<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &str) -> Outcome<()> {
    let c = CString::new(s).map_err(|_| Failure(WsStatus::Invalid, "string contains nul".into()))?;
    put(out, c.into_raw(), what)
}

fn objectives(bundle: &GameBundle, json: &str) -> Outcome<Vec<Objective>> {
    Ok(parse_objectives(json)?
        .iter()
        .map(|s| s.resolve(bundle))
        .collect::<winstab::Result<_>>()?)
}

struct Split {
    windows: Vec<WindowObjective>,
    mean_payoff: Vec<MeanPayoffObjective>,
    variance: Vec<VarianceObjective>,
}

fn split(objs: Vec<Objective>) -> Split {
    let mut s = Split {
        windows: Vec::new(),
        mean_payoff: Vec::new(),
        variance: Vec::new(),
    };
    for o in objs {
        match o {
            Objective::Window(w) => s.windows.push(w),
            Objective::MeanPayoff(m) => s.mean_payoff.push(m),
            Objective::Variance(v) => s.variance.push(v),
        }
    }
    s
}

fn conjunction(windows: Vec<WindowObjective>) -> Outcome<MultiObjective> {
    MultiObjective::new(windows)
        .map_err(|_| Failure(WsStatus::Invalid, "at least one window objective is required".into()))
}

fn invalid(msg: &str) -> Failure {
    Failure(WsStatus::Invalid, msg.into())
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a game file.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_game_from_json(json: *const c_char, out: *mut *mut WsGame) -> WsStatus {
    guard(|| {
        let bundle = GameBundle::parse(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(WsGame { bundle })), "out")
    })
}

/// Releases a game. Null is ignored.
///
/// # Safety
/// `game` must come from [`ws_game_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_game_free(game: *mut WsGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_game_num_states(game: *const WsGame) -> usize {
    game.as_ref().map_or(0, |g| g.bundle.game.num_states())
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_game_num_edges(game: *const WsGame) -> usize {
    game.as_ref().map_or(0, |g| g.bundle.game.num_edges())
}

/// Graphviz rendering of the game.
///
/// # Safety
/// `game` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_game_to_dot(game: *const WsGame, out: *mut *mut c_char) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        put_string(out, to_dot(&g.bundle), "out")
    })
}

/// Builds the permissive scheme for the window objectives in
/// `objectives_json` (one object or an array). `max_pairs == 0` means no
/// cap.
///
/// # Safety
/// `game` must be a live handle, `objectives_json` nul-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_solve_window(
    game: *const WsGame,
    objectives_json: *const c_char,
    max_pairs: usize,
    out: *mut *mut WsScheme,
) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        let sp = split(objectives(&g.bundle, text(objectives_json, "objectives_json")?)?);
        if !sp.mean_payoff.is_empty() || !sp.variance.is_empty() {
            return Err(invalid("only window objectives are accepted"));
        }
        let delta = conjunction(sp.windows)?;
        let cap = if max_pairs == 0 { usize::MAX } else { max_pairs };
        let game = &g.bundle.game;
        let roots: Vec<usize> = (0..game.num_states()).collect();
        let schemes = delta
            .conjuncts()
            .iter()
            .map(|phi| build_scheme_capped(game, phi, &roots, cap))
            .collect::<winstab::Result<Vec<_>>>()?;
        let scheme = if schemes.len() == 1 {
            schemes.into_iter().next().expect("one scheme")
        } else {
            let refs: Vec<&StrategyScheme> = schemes.iter().collect();
            winstab::scheme::product_scheme(game, &refs)?
        };
        if scheme.num_pairs() > cap {
            return Err(Error::TooLarge(format!("more than {cap} scheme pairs")).into());
        }
        put(out, Box::into_raw(Box::new(WsScheme { scheme })), "out")
    })
}

/// Releases a scheme. Null is ignored.
///
/// # Safety
/// `scheme` must come from [`ws_solve_window`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ws_scheme_free(scheme: *mut WsScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Whether the objectives are achievable from `state` (`Init` defined).
///
/// # Safety
/// `scheme` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ws_scheme_is_winning(scheme: *const WsScheme, state: usize, out: *mut bool) -> WsStatus {
    guard(|| {
        let s = handle(scheme, "scheme")?;
        if state >= s.scheme.num_states() {
            return Err(Error::UnknownState(state).into());
        }
        put(out, s.scheme.init(state).is_some(), "out")
    })
}

/// Number of memory elements, or 0 for a null handle.
///
/// # Safety
/// `scheme` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_scheme_num_memory(scheme: *const WsScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.scheme.num_mem())
}

/// Number of materialized (state, memory) pairs, or 0 for a null handle.
///
/// # Safety
/// `scheme` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_scheme_num_pairs(scheme: *const WsScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.scheme.num_pairs())
}

/// Decides window objectives together with one mean-payoff objective from
/// `state`.
///
/// # Safety
/// `game` must be a live handle, `objectives_json` nul-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_solve_combined(
    game: *const WsGame,
    objectives_json: *const c_char,
    state: usize,
    out: *mut bool,
) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        let sp = split(objectives(&g.bundle, text(objectives_json, "objectives_json")?)?);
        let [psi] = <[MeanPayoffObjective; 1]>::try_from(sp.mean_payoff)
            .map_err(|_| invalid("exactly one mean-payoff objective is required"))?;
        let delta = conjunction(sp.windows)?;
        let sol = solve_combined(&g.bundle.game, &delta, &psi, state)?;
        put(out, sol.achievable, "out")
    })
}

/// Largest mean payoff of `reward` compatible with the window objectives
/// from `state`, written as a rational string (`"p/q"`). `*out` is set to
/// null when the window objectives are not achievable.
///
/// # Safety
/// `game` must be a live handle, the strings nul-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_max_bound(
    game: *const WsGame,
    objectives_json: *const c_char,
    reward: *const c_char,
    state: usize,
    out: *mut *mut c_char,
) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        let sp = split(objectives(&g.bundle, text(objectives_json, "objectives_json")?)?);
        let r = g.bundle.reward(text(reward, "reward")?)?;
        let delta = conjunction(sp.windows)?;
        match max_bound(&g.bundle.game, &delta, r, state)? {
            Some(v) => put_string(out, v.to_string(), "out"),
            None => put(out, ptr::null_mut(), "out"),
        }
    })
}

/// Frequency feasibility of one variance objective from `state`. Writes a
/// JSON report `{"feasible", "mp", "va", "frequencies"}`.
///
/// # Safety
/// `game` must be a live handle, `objective_json` nul-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_variance_check(
    game: *const WsGame,
    objective_json: *const c_char,
    state: usize,
    out: *mut *mut c_char,
) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        let sp = split(objectives(&g.bundle, text(objective_json, "objective_json")?)?);
        let [obj] = <[VarianceObjective; 1]>::try_from(sp.variance)
            .map_err(|_| invalid("exactly one variance objective is required"))?;
        let game = &g.bundle.game;
        let report = match freq_feasibility(game, &obj, state, DEFAULT_MAX_CYCLES)? {
            Some(f) => {
                let chk = freq_constraints_check(game, &f, &obj, SupportRule::SccClosure)?;
                serde_json::json!({"feasible": true, "mp": chk.mp, "va": chk.va, "frequencies": f})
            }
            None => serde_json::json!({"feasible": false}),
        };
        put_string(out, report.to_string(), "out")
    })
}

/// Evaluates every objective on a lasso `{"prefix": [...], "cycle": [...]}`.
///
/// # Safety
/// `game` must be a live handle, the strings nul-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ws_check_run(
    game: *const WsGame,
    objectives_json: *const c_char,
    lasso_json: *const c_char,
    out: *mut bool,
) -> WsStatus {
    guard(|| {
        let g = handle(game, "game")?;
        let objs = objectives(&g.bundle, text(objectives_json, "objectives_json")?)?;
        let lasso: Lasso = serde_json::from_str(text(lasso_json, "lasso_json")?).map_err(Error::from)?;
        lasso.validate(&g.bundle.game)?;
        let mut ok = true;
        for o in &objs {
            ok &= match o {
                Objective::Window(phi) => check_window_run(&lasso, std::slice::from_ref(phi))?,
                Objective::MeanPayoff(psi) => mp_of_lasso(&lasso, &psi.reward)[0] >= psi.bound,
                Objective::Variance(v) => {
                    mp_of_lasso(&lasso, &v.reward)[0] >= v.mean_bound
                        && va_of_lasso(&lasso, &v.reward)[0] <= v.variance_bound
                }
            };
        }
        put(out, ok, "out")
    })
}

/// Builds the window game of a DIMACS CNF formula. Writes the game (rewards
/// `r` and `r_shifted`), the objective over `r`, and the initial state.
///
/// # Safety
/// `dimacs` must be nul-terminated and every out-pointer writable.
#[no_mangle]
pub unsafe extern "C" fn ws_gen_sat(
    dimacs: *const c_char,
    game_json: *mut *mut c_char,
    objective_json: *mut *mut c_char,
    initial: *mut usize,
) -> WsStatus {
    guard(|| {
        let phi: Cnf = text(dimacs, "dimacs")?.parse()?;
        let inst = gen_balanced_sat_instance(&phi)?;
        let bundle = GameBundle::new(
            inst.game.clone(),
            [
                inst.original.reward.clone(),
                inst.objective.reward.clone().renamed("r_shifted"),
            ],
        )?;
        let spec = ObjectiveSpec::from_objective(&Objective::Window(inst.original.clone()));
        if game_json.is_null() || objective_json.is_null() {
            return Err(null("out"));
        }
        put(initial, inst.initial, "initial")?;
        put_string(game_json, bundle.to_json(), "game_json")?;
        put_string(objective_json, objectives_to_json(&[spec]), "objective_json")
    })
}
