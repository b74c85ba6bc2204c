//! Small named instances used by the tests, the CLI and the examples.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::game::{Game, Owner, RewardFunction, StateId};
use crate::objective::WindowObjective;
use crate::rational::Rational;
use crate::variance::{simple_cycles, FrequencyVector};

/// The four-state graph `A, B, C, D` with rewards `0, 4, -10, 1`:
/// `A <-> B`, `B -> C`, `C -> A`, `C <-> D`, `D -> D`.
///
/// `mp ≥ 3/2 ∧ va ≤ 9/4` is achievable from `A`, but only with infinite
/// memory.
pub fn infinite_memory_graph() -> (Game, RewardFunction) {
    let g = Game::graph(4, &[(1, 0), (0, 1), (1, 2), (3, 2), (2, 3), (2, 0), (3, 3)])
        .expect("valid graph")
        .with_labels(["A", "B", "C", "D"].map(String::from).to_vec());
    (g, RewardFunction::scalar("r", &[0, 4, -10, 1]))
}

pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;
pub const D: usize = 3;

/// One state with a self-loop.
pub fn self_loop(reward: i64) -> (Game, RewardFunction) {
    (
        Game::graph(1, &[(0, 0)]).expect("valid graph"),
        RewardFunction::scalar("r", &[reward]),
    )
}

/// A random total game with `1..=max_states` states and at most `max_edges`
/// edges (never fewer than one per state). Each state is an adversary state
/// with probability `p_diamond`.
pub fn random_game(rng: &mut impl Rng, max_states: usize, max_edges: usize, p_diamond: f64) -> Game {
    let n = rng.gen_range(1..=max_states);
    let mut edges: BTreeSet<(StateId, StateId)> = (0..n).map(|s| (s, rng.gen_range(0..n))).collect();
    let target = rng.gen_range(n..=max_edges.max(n)).min(n * n);
    while edges.len() < target {
        edges.insert((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    let owners = (0..n)
        .map(|_| {
            if rng.gen_bool(p_diamond) {
                Owner::Diamond
            } else {
                Owner::Box
            }
        })
        .collect();
    let edges: Vec<_> = edges.into_iter().collect();
    Game::new(owners, &edges).expect("every state has a successor")
}

/// Uniform integer rewards in `lo..=hi`.
pub fn random_reward(rng: &mut impl Rng, name: &str, n: usize, lo: i64, hi: i64) -> RewardFunction {
    let values: Vec<i64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    RewardFunction::scalar(name, &values)
}

/// A random one-dimensional window objective over `reward` with
/// `W ∈ windows`, `D` a divisor of `W` and bounds that are multiples of
/// `1/W` between the reward's extremes.
pub fn random_window(rng: &mut impl Rng, reward: RewardFunction, windows: &[usize]) -> WindowObjective {
    let w = windows[rng.gen_range(0..windows.len())];
    let divisors: Vec<usize> = (1..=w).filter(|d| w.is_multiple_of(*d)).collect();
    let d = divisors[rng.gen_range(0..divisors.len())];
    let vals: Vec<i64> = reward.raw_values().iter().map(|v| v[0]).collect();
    let (min, max) = (*vals.iter().min().unwrap(), *vals.iter().max().unwrap());
    let span = (min * w as i64)..=(max * w as i64);
    let a = rng.gen_range(span.clone());
    let b = rng.gen_range(span);
    let scale = w as i64 * reward.scale();
    WindowObjective::scalar(
        w,
        d,
        reward,
        Rational::new(a.min(b), scale),
        Rational::new(a.max(b), scale),
    )
    .expect("D divides W")
}

/// A random strongly connected graph on `2..=max_states` states: a shuffled
/// Hamiltonian cycle plus up to `extra` random edges.
pub fn random_strongly_connected(rng: &mut impl Rng, max_states: usize, extra: usize) -> Game {
    let n = rng.gen_range(2..=max_states.max(2));
    let mut order: Vec<StateId> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges: BTreeSet<(StateId, StateId)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    for _ in 0..rng.gen_range(0..=extra) {
        edges.insert((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    let edges: Vec<_> = edges.into_iter().collect();
    Game::graph(n, &edges).expect("every state has a successor")
}

/// A random rational frequency vector on a strongly connected graph whose
/// support is every edge: a positive integer combination of simple cycles
/// covering all edges, normalized.
pub fn random_circulation(rng: &mut impl Rng, game: &Game, max_weight: u64) -> FrequencyVector {
    let all = vec![true; game.num_states()];
    let cycles = simple_cycles(game, &all, 10_000).expect("small graph");
    let mut counts: BTreeMap<(StateId, StateId), u64> = BTreeMap::new();
    let mut covered: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    for c in &cycles {
        let edges: Vec<_> = (0..c.len()).map(|i| (c[i], c[(i + 1) % c.len()])).collect();
        let needed = edges.iter().any(|e| !covered.contains(e));
        if !needed && rng.gen_bool(0.5) {
            continue;
        }
        let w = rng.gen_range(1..=max_weight);
        for e in edges {
            covered.insert(e);
            *counts.entry(e).or_insert(0) += w;
        }
    }
    FrequencyVector::from_counts(&counts)
}
