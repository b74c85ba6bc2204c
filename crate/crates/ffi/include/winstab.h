#ifndef WINSTAB_H
#define WINSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  WS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  WS_STATUS_INVALID_UTF8 = 2,
  /**
   * JSON, DIMACS or rational syntax error.
   */
  WS_STATUS_PARSE = 3,
  /**
   * Well-formed input that the solver rejects.
   */
  WS_STATUS_INVALID = 4,
  /**
   * A size cap was exceeded.
   */
  WS_STATUS_TOO_LARGE = 5,
  /**
   * Internal failure; the handle arguments remain valid.
   */
  WS_STATUS_PANIC = 6,
} WsStatus;

/**
 * A game with its named reward functions.
 */
typedef struct WsGame WsGame;

/**
 * A permissive strategy scheme for a conjunction of window objectives.
 */
typedef struct WsScheme WsScheme;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *ws_last_error(void);

/**
 * Library version as a static string.
 */
const char *ws_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ws_string_free(char *s);

/**
 * Parses a game file.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` writable.
 */
enum WsStatus ws_game_from_json(const char *json, struct WsGame **out);

/**
 * Releases a game. Null is ignored.
 *
 * # Safety
 * `game` must come from [`ws_game_from_json`] and not have been freed.
 */
void ws_game_free(struct WsGame *game);

/**
 * Number of states, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live handle.
 */
size_t ws_game_num_states(const struct WsGame *game);

/**
 * Number of edges, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live handle.
 */
size_t ws_game_num_edges(const struct WsGame *game);

/**
 * Graphviz rendering of the game.
 *
 * # Safety
 * `game` must be a live handle and `out` writable.
 */
enum WsStatus ws_game_to_dot(const struct WsGame *game, char **out);

/**
 * Builds the permissive scheme for the window objectives in
 * `objectives_json` (one object or an array). `max_pairs == 0` means no
 * cap.
 *
 * # Safety
 * `game` must be a live handle, `objectives_json` nul-terminated and `out`
 * writable.
 */
enum WsStatus ws_solve_window(const struct WsGame *game,
                              const char *objectives_json,
                              size_t max_pairs,
                              struct WsScheme **out);

/**
 * Releases a scheme. Null is ignored.
 *
 * # Safety
 * `scheme` must come from [`ws_solve_window`] and not have been freed.
 */
void ws_scheme_free(struct WsScheme *scheme);

/**
 * Whether the objectives are achievable from `state` (`Init` defined).
 *
 * # Safety
 * `scheme` must be a live handle and `out` writable.
 */
enum WsStatus ws_scheme_is_winning(const struct WsScheme *scheme, size_t state, bool *out);

/**
 * Number of memory elements, or 0 for a null handle.
 *
 * # Safety
 * `scheme` must be null or a live handle.
 */
size_t ws_scheme_num_memory(const struct WsScheme *scheme);

/**
 * Number of materialized (state, memory) pairs, or 0 for a null handle.
 *
 * # Safety
 * `scheme` must be null or a live handle.
 */
size_t ws_scheme_num_pairs(const struct WsScheme *scheme);

/**
 * Decides window objectives together with one mean-payoff objective from
 * `state`.
 *
 * # Safety
 * `game` must be a live handle, `objectives_json` nul-terminated and `out`
 * writable.
 */
enum WsStatus ws_solve_combined(const struct WsGame *game,
                                const char *objectives_json,
                                size_t state,
                                bool *out);

/**
 * Largest mean payoff of `reward` compatible with the window objectives
 * from `state`, written as a rational string (`"p/q"`). `*out` is set to
 * null when the window objectives are not achievable.
 *
 * # Safety
 * `game` must be a live handle, the strings nul-terminated and `out`
 * writable.
 */
enum WsStatus ws_max_bound(const struct WsGame *game,
                           const char *objectives_json,
                           const char *reward,
                           size_t state,
                           char **out);

/**
 * Frequency feasibility of one variance objective from `state`. Writes a
 * JSON report `{"feasible", "mp", "va", "frequencies"}`.
 *
 * # Safety
 * `game` must be a live handle, `objective_json` nul-terminated and `out`
 * writable.
 */
enum WsStatus ws_variance_check(const struct WsGame *game,
                                const char *objective_json,
                                size_t state,
                                char **out);

/**
 * Evaluates every objective on a lasso `{"prefix": [...], "cycle": [...]}`.
 *
 * # Safety
 * `game` must be a live handle, the strings nul-terminated and `out`
 * writable.
 */
enum WsStatus ws_check_run(const struct WsGame *game,
                           const char *objectives_json,
                           const char *lasso_json,
                           bool *out);

/**
 * Builds the window game of a DIMACS CNF formula. Writes the game (rewards
 * `r` and `r_shifted`), the objective over `r`, and the initial state.
 *
 * # Safety
 * `dimacs` must be nul-terminated and every out-pointer writable.
 */
enum WsStatus ws_gen_sat(const char *dimacs,
                         char **game_json,
                         char **objective_json,
                         size_t *initial);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WINSTAB_H */
