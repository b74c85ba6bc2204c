use std::ffi::{c_char, CStr, CString};
use std::ptr;

use winstab_ffi::*;

const FOUR_STATE: &str = include_str!("../../core/tests/data/four_state.json");
const WINDOW: &str = include_str!("../../core/tests/data/window.json");
const MEAN_PAYOFF: &str = include_str!("../../core/tests/data/meanpayoff.json");
const VARIANCE: &str = include_str!("../../core/tests/data/variance.json");

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ws_last_error()) }.to_str().unwrap().to_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    ws_string_free(s);
    out
}

struct Game(*mut WsGame);

impl Game {
    fn load(json: &str) -> Self {
        let mut g = ptr::null_mut();
        assert_eq!(
            unsafe { ws_game_from_json(c(json).as_ptr(), &mut g) },
            WsStatus::Ok,
            "{}",
            last_error()
        );
        Game(g)
    }
}

impl Drop for Game {
    fn drop(&mut self) {
        unsafe { ws_game_free(self.0) }
    }
}

#[test]
fn game_handle_basics() {
    let g = Game::load(FOUR_STATE);
    unsafe {
        assert_eq!(ws_game_num_states(g.0), 4);
        assert_eq!(ws_game_num_edges(g.0), 7);
        assert_eq!(ws_game_num_states(ptr::null()), 0);
        let mut dot = ptr::null_mut();
        assert_eq!(ws_game_to_dot(g.0, &mut dot), WsStatus::Ok);
        assert!(take(dot).starts_with("digraph"));
    }
    assert!(!unsafe { CStr::from_ptr(ws_version()) }.to_bytes().is_empty());
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(ws_game_from_json(ptr::null(), &mut g), WsStatus::NullArgument);
        assert!(last_error().contains("json"));
        assert_eq!(ws_game_from_json(c("{not json").as_ptr(), &mut g), WsStatus::Parse);
        assert!(!last_error().is_empty());
        assert!(g.is_null());
        let bad = [0xffu8, 0];
        assert_eq!(ws_game_from_json(bad.as_ptr().cast(), &mut g), WsStatus::InvalidUtf8);
    }
    let g = Game::load(FOUR_STATE);
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            ws_solve_window(g.0, c(MEAN_PAYOFF).as_ptr(), 0, &mut s),
            WsStatus::Invalid
        );
        ws_game_free(ptr::null_mut());
        ws_string_free(ptr::null_mut());
        ws_scheme_free(ptr::null_mut());
    }
}

#[test]
fn window_scheme_matches_the_cli() {
    let g = Game::load(FOUR_STATE);
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            ws_solve_window(g.0, c(WINDOW).as_ptr(), 0, &mut s),
            WsStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(last_error(), "");
        assert_eq!(ws_scheme_num_memory(s), 5);
        assert_eq!(ws_scheme_num_pairs(s), 11);
        let mut win = Vec::new();
        for q in 0..4 {
            let mut w = false;
            assert_eq!(ws_scheme_is_winning(s, q, &mut w), WsStatus::Ok);
            win.push(w);
        }
        assert_eq!(win, [true, true, false, true]);
        let mut w = false;
        assert_eq!(ws_scheme_is_winning(s, 9, &mut w), WsStatus::Invalid);
        ws_scheme_free(s);

        let mut capped = ptr::null_mut();
        assert_eq!(
            ws_solve_window(g.0, c(WINDOW).as_ptr(), 3, &mut capped),
            WsStatus::TooLarge
        );
        assert!(capped.is_null());
    }
}

#[test]
fn combined_and_max_bound() {
    let g = Game::load(FOUR_STATE);
    let both = format!("[{WINDOW}, {MEAN_PAYOFF}]");
    unsafe {
        let mut ok = false;
        assert_eq!(
            ws_solve_combined(g.0, c(&both).as_ptr(), 0, &mut ok),
            WsStatus::Ok,
            "{}",
            last_error()
        );
        assert!(ok);
        assert_eq!(
            ws_solve_combined(g.0, c(WINDOW).as_ptr(), 0, &mut ok),
            WsStatus::Invalid
        );

        let mut bound = ptr::null_mut();
        assert_eq!(
            ws_max_bound(g.0, c(WINDOW).as_ptr(), c("r").as_ptr(), 0, &mut bound),
            WsStatus::Ok
        );
        assert_eq!(take(bound), "2");
        assert_eq!(
            ws_max_bound(g.0, c(WINDOW).as_ptr(), c("r").as_ptr(), 2, &mut bound),
            WsStatus::Ok
        );
        assert!(bound.is_null());
        assert_eq!(
            ws_max_bound(g.0, c(WINDOW).as_ptr(), c("missing").as_ptr(), 0, &mut bound),
            WsStatus::Invalid
        );
    }
}

#[test]
fn variance_report() {
    let g = Game::load(FOUR_STATE);
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            ws_variance_check(g.0, c(VARIANCE).as_ptr(), 0, &mut out),
            WsStatus::Ok,
            "{}",
            last_error()
        );
        let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(report["feasible"], true);
        assert_eq!(report["mp"], "3/2");
        assert_eq!(report["va"], "9/4");

        let strict = r#"{"type": "variance", "reward": "r", "b": "3", "c": "0"}"#;
        assert_eq!(ws_variance_check(g.0, c(strict).as_ptr(), 0, &mut out), WsStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(report["feasible"], false);
    }
}

#[test]
fn check_run_on_lassos() {
    let g = Game::load(FOUR_STATE);
    let lasso = c(r#"{"prefix": [0, 1, 2], "cycle": [3]}"#);
    unsafe {
        let mut ok = false;
        assert_eq!(
            ws_check_run(g.0, c(MEAN_PAYOFF).as_ptr(), lasso.as_ptr(), &mut ok),
            WsStatus::Ok
        );
        assert!(ok);
        assert_eq!(
            ws_check_run(g.0, c(VARIANCE).as_ptr(), lasso.as_ptr(), &mut ok),
            WsStatus::Ok
        );
        assert!(!ok);
        let broken = c(r#"{"prefix": [], "cycle": [0]}"#);
        assert_eq!(
            ws_check_run(g.0, c(MEAN_PAYOFF).as_ptr(), broken.as_ptr(), &mut ok),
            WsStatus::Invalid
        );
    }
}

#[test]
fn sat_generation_round_trips_through_the_api() {
    let dimacs = c("p cnf 2 2\n1 2 0\n-1 -2 0\n");
    let (mut game, mut obj, mut init) = (ptr::null_mut(), ptr::null_mut(), usize::MAX);
    unsafe {
        assert_eq!(
            ws_gen_sat(dimacs.as_ptr(), &mut game, &mut obj, &mut init),
            WsStatus::Ok,
            "{}",
            last_error()
        );
        let game_text = take(game);
        let obj_text = take(obj);
        let g = Game::load(&game_text);
        assert!(init < ws_game_num_states(g.0));
        let mut s = ptr::null_mut();
        assert_eq!(
            ws_solve_window(g.0, c(&obj_text).as_ptr(), 0, &mut s),
            WsStatus::Ok,
            "{}",
            last_error()
        );
        let mut win = false;
        assert_eq!(ws_scheme_is_winning(s, init, &mut win), WsStatus::Ok);
        assert!(win);
        ws_scheme_free(s);

        let bad = c("p cnf 1 1\n1 x 0\n");
        assert_eq!(
            ws_gen_sat(bad.as_ptr(), &mut game, &mut obj, &mut init),
            WsStatus::Parse
        );
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/winstab.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 18);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for code in [
        "WS_STATUS_OK = 0",
        "WS_STATUS_TOO_LARGE = 5",
        "typedef struct WsGame WsGame",
    ] {
        assert!(header.contains(code), "{code}");
    }
}
