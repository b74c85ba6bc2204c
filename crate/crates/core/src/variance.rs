//! Variance-stability on graphs.
//!
//! A strategy on a graph is summarized by the long-run frequency of every
//! edge. This module checks frequency vectors against `(ρ, b, c)`, finds
//! feasible ones, turns rational vectors into Euler-cycle strategies and
//! schedules sequences of cycles whose concatenation realizes a limit vector.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{scc_ids, Game, Lasso, RewardFunction, StateId};
use crate::objective::VarianceObjective;
use crate::rational::Rational;

pub type Edge = (StateId, StateId);

/// Default cap on simple cycles enumerated by [`freq_feasibility`].
pub const DEFAULT_MAX_CYCLES: usize = 2000;

/// Longest Euler period [`euler_cycle`] will materialize.
pub const MAX_EULER_PERIOD: u64 = 10_000_000;

/// Edge frequencies. Zero entries are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(
    into = "Vec<(StateId, StateId, Rational)>",
    from = "Vec<(StateId, StateId, Rational)>"
)]
pub struct FrequencyVector {
    freq: BTreeMap<Edge, Rational>,
}

impl FrequencyVector {
    /// Sums repeated edges and drops zeros.
    pub fn new(entries: impl IntoIterator<Item = (Edge, Rational)>) -> Self {
        let mut freq: BTreeMap<Edge, Rational> = BTreeMap::new();
        for (e, v) in entries {
            *freq.entry(e).or_default() += &v;
        }
        freq.retain(|_, v| !v.is_zero());
        FrequencyVector { freq }
    }

    /// Each transition of the closed walk `cycle` (including the wrap from
    /// the last state to the first) with weight `1/|cycle|`.
    pub fn uniform_cycle(cycle: &[StateId]) -> Self {
        let w = Rational::new(1, cycle.len() as i64);
        FrequencyVector::new((0..cycle.len()).map(|i| ((cycle[i], cycle[(i + 1) % cycle.len()]), w.clone())))
    }

    /// Counts divided by their total.
    pub fn from_counts(counts: &BTreeMap<Edge, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let total = Rational::from(BigInt::from(total));
        FrequencyVector::new(
            counts
                .iter()
                .map(|(&e, &c)| (e, Rational::from(BigInt::from(c)) / &total)),
        )
    }

    pub fn get(&self, e: Edge) -> Rational {
        self.freq.get(&e).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, &Rational)> {
        self.freq.iter().map(|(&e, v)| (e, v))
    }

    /// Edges with non-zero frequency, sorted.
    pub fn support(&self) -> Vec<Edge> {
        self.freq.keys().copied().collect()
    }

    /// States touched by the support, sorted.
    pub fn support_states(&self) -> Vec<StateId> {
        let set: BTreeSet<StateId> = self.freq.keys().flat_map(|&(a, b)| [a, b]).collect();
        set.into_iter().collect()
    }

    pub fn total(&self) -> Rational {
        self.freq.values().sum()
    }

    /// `f_s = Σ_{(s', s)} f_{(s', s)}` for every state `s < n`.
    pub fn state_frequencies(&self, n: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for (&(_, b), v) in &self.freq {
            if b < n {
                out[b] += v;
            }
        }
        out
    }

    /// Values in the order of [`Game::edges`].
    pub fn dense(&self, game: &Game) -> Vec<Rational> {
        game.edges().into_iter().map(|e| self.get(e)).collect()
    }

    /// `λ·self + (1 − λ)·other`.
    pub fn mix(&self, other: &FrequencyVector, lambda: &Rational) -> Self {
        let rest = Rational::one() - lambda;
        FrequencyVector::new(
            self.iter()
                .map(|(e, v)| (e, v * lambda))
                .chain(other.iter().map(|(e, v)| (e, v * &rest))),
        )
    }
}

impl From<FrequencyVector> for Vec<(StateId, StateId, Rational)> {
    fn from(f: FrequencyVector) -> Self {
        f.freq.into_iter().map(|((a, b), v)| (a, b, v)).collect()
    }
}

impl From<Vec<(StateId, StateId, Rational)>> for FrequencyVector {
    fn from(v: Vec<(StateId, StateId, Rational)>) -> Self {
        FrequencyVector::new(v.into_iter().map(|(a, b, f)| ((a, b), f)))
    }
}

/// How the support of a frequency vector must be connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportRule {
    /// The support edges form a strongly connected graph.
    Strict,
    /// The support edges lie inside one strongly connected component of the
    /// whole graph. Limits of strictly supported vectors satisfy this.
    SccClosure,
}

/// Checks that `f` is a distribution over edges of `game`, satisfies flow
/// conservation and has a support allowed by `rule`.
pub fn validate_frequencies(game: &Game, f: &FrequencyVector, rule: SupportRule) -> Result<()> {
    for ((a, b), v) in f.iter() {
        if !game.has_edge(a, b) {
            return Err(Error::NotDistribution(format!("({a}, {b}) is not an edge")));
        }
        if v.is_negative() || *v > 1 {
            return Err(Error::NotDistribution(format!("f({a}, {b}) = {v} lies outside [0, 1]")));
        }
    }
    let total = f.total();
    if total != 1 {
        return Err(Error::NotDistribution(format!("frequencies sum to {total}")));
    }
    let n = game.num_states();
    let mut balance = vec![Rational::zero(); n];
    for ((a, b), v) in f.iter() {
        balance[b] += v;
        balance[a] = &balance[a] - v;
    }
    if let Some(s) = balance.iter().position(|v| !v.is_zero()) {
        return Err(Error::FlowViolation(s));
    }
    check_support(game, f, rule)
}

fn check_support(game: &Game, f: &FrequencyVector, rule: SupportRule) -> Result<()> {
    let states = f.support_states();
    let ids = match rule {
        SupportRule::SccClosure => game.scc_ids(),
        SupportRule::Strict => {
            let mut succ = vec![Vec::new(); game.num_states()];
            for (a, b) in f.support() {
                succ[a].push(b);
            }
            let succ: Vec<&[StateId]> = succ.iter().map(Vec::as_slice).collect();
            scc_ids(&succ)
        }
    };
    let comps: BTreeSet<usize> = states.iter().map(|&s| ids[s]).collect();
    if comps.len() > 1 {
        let what = match rule {
            SupportRule::Strict => "support graph",
            SupportRule::SccClosure => "graph",
        };
        return Err(Error::SupportNotScc(format!(
            "support meets {} strongly connected components of the {what}",
            comps.len()
        )));
    }
    Ok(())
}

/// Mean payoff and variance induced by a frequency vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyCheck {
    pub mp: Rational,
    pub va: Rational,
    /// `mp ≥ b ∧ va ≤ c`.
    pub holds: bool,
}

/// `mp = Σ_s f_s·ρ(s)` and `va = Σ_s f_s·(ρ(s) − mp)²`, compared against the
/// objective's bounds.
pub fn freq_constraints_check(
    game: &Game,
    f: &FrequencyVector,
    objective: &VarianceObjective,
    rule: SupportRule,
) -> Result<FrequencyCheck> {
    objective.reward.check_states(game)?;
    validate_frequencies(game, f, rule)?;
    let (mp, va) = moments(&f.state_frequencies(game.num_states()), &objective.reward);
    let holds = mp >= objective.mean_bound && va <= objective.variance_bound;
    Ok(FrequencyCheck { mp, va, holds })
}

/// Mean and variance of the reward under state weights summing to one.
fn moments(weights: &[Rational], reward: &RewardFunction) -> (Rational, Rational) {
    let mp: Rational = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(s, w)| w * &reward.value(s, 0))
        .sum();
    let va = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(s, w)| w * &(reward.value(s, 0) - &mp).pow2())
        .sum();
    (mp, va)
}

struct CycleStats {
    states: Vec<StateId>,
    scc: usize,
    mean: Rational,
    second: Rational,
}

/// Minimum-variance frequency vector with `mp ≥ b`, if its variance is at
/// most `c`.
///
/// Only strongly connected components reachable from `initial` are
/// considered. On each component `va` is a concave function of the frequency
/// vector, so its minimum over the flow polytope cut by `mp ≥ b` is attained
/// at a vertex: either a simple cycle with mean at least `b`, or a mix of a
/// cycle above `b` with one below it that has mean exactly `b`. All such
/// points are enumerated with exact arithmetic, so `None` means that no
/// frequency vector with support inside one reachable component satisfies
/// the bounds. Ties are broken by the vector in [`Game::edges`] order.
///
/// Fails with [`Error::TooLarge`] once more than `max_cycles` simple cycles
/// are found.
pub fn freq_feasibility(
    game: &Game,
    objective: &VarianceObjective,
    initial: StateId,
    max_cycles: usize,
) -> Result<Option<FrequencyVector>> {
    if !game.is_graph() {
        return Err(Error::Unsupported("variance-stability is only solved on graphs".into()));
    }
    if initial >= game.num_states() {
        return Err(Error::UnknownState(initial));
    }
    objective.reward.check_states(game)?;
    let reward = &objective.reward;
    let ids = game.scc_ids();
    let reach = game.reachable_from(initial);
    let cycles: Vec<CycleStats> = simple_cycles(game, &reach, max_cycles)?
        .into_iter()
        .map(|states| {
            let len = Rational::integer(states.len() as i64);
            let mean = states.iter().map(|&s| reward.value(s, 0)).sum::<Rational>() / &len;
            let second = states.iter().map(|&s| reward.value(s, 0).pow2()).sum::<Rational>() / &len;
            CycleStats {
                scc: ids[states[0]],
                states,
                mean,
                second,
            }
        })
        .collect();

    let b = &objective.mean_bound;
    let b2 = b.pow2();
    // (va, cycle index, optional partner and weight on the first cycle)
    let mut best: Option<Rational> = None;
    let mut ties: Vec<(usize, Option<(usize, Rational)>)> = Vec::new();
    let mut offer = |va: Rational, cand: (usize, Option<(usize, Rational)>)| match &best {
        Some(v) if va > *v => {}
        Some(v) if va == *v => ties.push(cand),
        _ => {
            best = Some(va);
            ties.clear();
            ties.push(cand);
        }
    };
    for (i, c) in cycles.iter().enumerate() {
        if c.mean >= *b {
            offer(&c.second - &c.mean.pow2(), (i, None));
        }
    }
    for (i, hi) in cycles.iter().enumerate() {
        if hi.mean <= *b {
            continue;
        }
        for (j, lo) in cycles.iter().enumerate() {
            if lo.scc != hi.scc || lo.mean >= *b {
                continue;
            }
            let lambda = (b - &lo.mean) / (&hi.mean - &lo.mean);
            let va = &lambda * &hi.second + (Rational::one() - &lambda) * &lo.second - &b2;
            offer(va, (i, Some((j, lambda))));
        }
    }
    let Some(best) = best else { return Ok(None) };
    if best > objective.variance_bound {
        return Ok(None);
    }
    let f = ties
        .into_iter()
        .map(|(i, partner)| {
            let fi = FrequencyVector::uniform_cycle(&cycles[i].states);
            match partner {
                None => fi,
                Some((j, lambda)) => fi.mix(&FrequencyVector::uniform_cycle(&cycles[j].states), &lambda),
            }
        })
        .min_by(|x, y| x.dense(game).cmp(&y.dense(game)))
        .expect("at least one candidate");
    let check = freq_constraints_check(game, &f, objective, SupportRule::SccClosure)?;
    assert!(
        check.holds && check.va == best,
        "feasibility candidate failed its re-check"
    );
    Ok(Some(f))
}

/// Simple cycles through allowed states, each listed once starting from its
/// smallest state.
pub fn simple_cycles(game: &Game, allowed: &[bool], cap: usize) -> Result<Vec<Vec<StateId>>> {
    let ids = game.scc_ids();
    let n = game.num_states();
    let mut out = Vec::new();
    let mut on_path = vec![false; n];
    for start in (0..n).filter(|&s| allowed[s]) {
        let mut path = vec![start];
        on_path[start] = true;
        extend_cycles(game, &ids, start, &mut path, &mut on_path, &mut out, cap)?;
        on_path[start] = false;
    }
    Ok(out)
}

fn extend_cycles(
    game: &Game,
    ids: &[usize],
    start: StateId,
    path: &mut Vec<StateId>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<StateId>>,
    cap: usize,
) -> Result<()> {
    let v = *path.last().expect("non-empty path");
    for &w in game.successors(v) {
        if w == start {
            out.push(path.clone());
            if out.len() > cap {
                return Err(Error::TooLarge(format!("more than {cap} simple cycles")));
            }
        } else if w > start && ids[w] == ids[start] && !on_path[w] {
            path.push(w);
            on_path[w] = true;
            extend_cycles(game, ids, start, path, on_path, out, cap)?;
            on_path[w] = false;
            path.pop();
        }
    }
    Ok(())
}

/// Closed walk using every edge `e` exactly `f_e·L` times, where `L` is the
/// least common multiple of the denominators of `f`.
///
/// The walk starts at `start` (default: the smallest support state); the
/// returned vector omits the final return to the start.
pub fn euler_cycle(game: &Game, f: &FrequencyVector, start: Option<StateId>) -> Result<Vec<StateId>> {
    validate_frequencies(game, f, SupportRule::Strict)?;
    let lcm = f.iter().fold(BigInt::one(), |acc, (_, v)| acc.lcm(v.denom()));
    let period = lcm
        .to_u64()
        .filter(|&p| p <= MAX_EULER_PERIOD)
        .ok_or_else(|| Error::TooLarge(format!("Euler period {lcm} exceeds {MAX_EULER_PERIOD}")))?;
    let n = game.num_states();
    let mut mult: BTreeMap<Edge, u64> = BTreeMap::new();
    let mut adj: Vec<Vec<(StateId, u64)>> = vec![Vec::new(); n];
    for (e, v) in f.iter() {
        let m = (v.numer() * (&lcm / v.denom()))
            .to_u64()
            .expect("multiplicity bounded by the period");
        mult.insert(e, m);
        adj[e.0].push((e.1, m));
    }
    let start = start.unwrap_or_else(|| f.support()[0].0);
    if adj.get(start).is_none_or(|a| a.is_empty()) {
        return Err(Error::SupportNotScc(format!("state {start} is not on the support")));
    }

    let mut ptr = vec![0usize; n];
    let mut stack = vec![start];
    let mut circuit = Vec::with_capacity(period as usize + 1);
    while let Some(&v) = stack.last() {
        while ptr[v] < adj[v].len() && adj[v][ptr[v]].1 == 0 {
            ptr[v] += 1;
        }
        if ptr[v] < adj[v].len() {
            adj[v][ptr[v]].1 -= 1;
            stack.push(adj[v][ptr[v]].0);
        } else {
            circuit.push(v);
            stack.pop();
        }
    }
    circuit.reverse();
    if circuit.len() as u64 != period + 1 {
        return Err(Error::NotEulerian(format!(
            "circuit covers {} of {period} edge copies",
            circuit.len().saturating_sub(1)
        )));
    }
    circuit.pop();
    if walk_edge_counts(&circuit, 0, period) != mult {
        return Err(Error::NotEulerian("circuit multiplicities differ from f".into()));
    }
    Ok(circuit)
}

/// Repeats the Euler cycle of `f` forever. Its edge frequencies are exactly
/// `f`.
pub fn euler_strategy(game: &Game, f: &FrequencyVector) -> Result<Lasso> {
    Ok(Lasso::cycle_only(euler_cycle(game, f, None)?))
}

/// [`euler_strategy`] started in `initial`, with a shortest path from
/// `initial` to the support as prefix.
pub fn euler_strategy_from(game: &Game, f: &FrequencyVector, initial: StateId) -> Result<Lasso> {
    validate_frequencies(game, f, SupportRule::Strict)?;
    let support: BTreeSet<StateId> = f.support().into_iter().map(|e| e.0).collect();
    let mut path = shortest_path(game, initial, |s| support.contains(&s))
        .ok_or_else(|| Error::SupportNotScc(format!("support is not reachable from state {initial}")))?;
    let entry = path.pop().expect("path ends at the support");
    Ok(Lasso::new(path, euler_cycle(game, f, Some(entry))?))
}

/// BFS path from `from` to the first state satisfying `target`, inclusive.
fn shortest_path(game: &Game, from: StateId, target: impl Fn(StateId) -> bool) -> Option<Vec<StateId>> {
    let mut parent = vec![usize::MAX; game.num_states()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if target(s) {
            let mut path = vec![s];
            let mut cur = s;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &t in game.successors(s) {
            if parent[t] == usize::MAX {
                parent[t] = s;
                queue.push_back(t);
            }
        }
    }
    None
}

/// Edge counts of the transitions `offset..offset + steps` of the periodic
/// walk `cycle^ω`.
fn walk_edge_counts(cycle: &[StateId], offset: u64, steps: u64) -> BTreeMap<Edge, u64> {
    let p = cycle.len() as u64;
    let (q, r) = (steps / p, steps % p);
    let mut out = BTreeMap::new();
    for t in 0..p.min(steps) {
        let i = ((offset + t) % p) as usize;
        let e = (cycle[i], cycle[(i + 1) % cycle.len()]);
        *out.entry(e).or_insert(0) += q + u64::from(t < r);
    }
    out
}

/// Empirical edge frequencies of a finite run: transition counts divided by
/// the number of transitions.
pub fn empirical_frequencies(prefix: &[StateId]) -> FrequencyVector {
    let mut counts = BTreeMap::new();
    for w in prefix.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0u64) += 1;
    }
    if counts.is_empty() {
        return FrequencyVector::default();
    }
    FrequencyVector::from_counts(&counts)
}

/// One segment of a scheduled run: positions `start..start + steps` follow
/// `cycle` repeated from its first entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseBlock {
    pub cycle: Vec<StateId>,
    pub start: u64,
    /// `None` for the final, infinite block.
    pub steps: Option<u64>,
}

/// A run `α` assembled from cycles `c_1, c_2, …`.
///
/// Phase `i` follows `c_i` from position `K_{i−1}` to `K_i` (with `K_0 = 0`,
/// `K_1 = 1`), entering `c_i` at the state reached at `K_{i−1}`. Each `K_i`
/// (for `i ≥ 2`) is the least value above `K_{i−1}` such that every edge
/// frequency of `α` over the first `K_i` transitions is at least
/// `f^i_e − ε_i` and `ε_i²·K_i ≥ L_{i+1}`. `L_i` is the length after which
/// every rotation of `c_i` keeps all running edge frequencies above
/// `f^i_e − ε_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhasePlan {
    pub blocks: Vec<PhaseBlock>,
    pub epsilons: Vec<Rational>,
    /// `k[i]` is `K_{i+1}`; the last entry bounds the steps needed to see
    /// the final phase's guarantee.
    pub k: Vec<u64>,
    /// `l[i]` is `L_{i+1}`.
    pub l: Vec<u64>,
}

/// Builds the phase schedule for frequency vectors `fs` and tolerances
/// `epsilons`, starting at `start`.
///
/// Every vector must have strongly connected support over the same set of
/// states, which must contain `start`. The tolerances must be positive,
/// strictly decreasing and at most `1/10`.
pub fn phase_plan(game: &Game, fs: &[FrequencyVector], epsilons: &[Rational], start: StateId) -> Result<PhasePlan> {
    if fs.is_empty() || fs.len() != epsilons.len() {
        return Err(Error::BadSchedule(format!(
            "{} frequency vectors for {} tolerances",
            fs.len(),
            epsilons.len()
        )));
    }
    if epsilons[0] > Rational::new(1, 10) {
        return Err(Error::BadSchedule(format!(
            "first tolerance {} exceeds 1/10",
            epsilons[0]
        )));
    }
    if epsilons.iter().any(|e| *e <= 0) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadSchedule(
            "tolerances must be positive and strictly decreasing".into(),
        ));
    }
    let states = fs[0].support_states();
    if !states.contains(&start) {
        return Err(Error::SupportNotScc(format!("state {start} is not on the support")));
    }
    let mut cycles = Vec::with_capacity(fs.len());
    for f in fs {
        if f.support_states() != states {
            return Err(Error::SupportNotScc("frequency vectors cover different states".into()));
        }
        cycles.push(euler_cycle(game, f, Some(start))?);
    }
    let l: Vec<u64> = cycles
        .iter()
        .zip(epsilons)
        .map(|(c, eps)| stabilization_length(c, eps))
        .collect::<Result<_>>()?;

    let mut blocks: Vec<PhaseBlock> = Vec::with_capacity(fs.len());
    let mut k: Vec<u64> = Vec::with_capacity(fs.len());
    let mut counts: BTreeMap<Edge, u64> = BTreeMap::new();
    let mut entry = start;
    for i in 0..fs.len() {
        let prev = k.last().copied().unwrap_or(0);
        let cycle = rotate_to(&cycles[i], entry);
        let ki = if i == 0 {
            1
        } else {
            let growth = match l.get(i + 1) {
                Some(&next) => {
                    let (en, ed) = eps_parts(&epsilons[i])?;
                    let need = i128::from(next) * ed * ed;
                    to_u64((need + en * en - 1) / (en * en), "phase length")?
                }
                None => 0,
            };
            next_checkpoint(&cycle, &counts, prev, &epsilons[i], growth)?
        };
        let steps = ki - prev;
        for (e, c) in walk_edge_counts(&cycle, 0, steps) {
            *counts.entry(e).or_insert(0) += c;
        }
        entry = cycle[(steps % cycle.len() as u64) as usize];
        blocks.push(PhaseBlock {
            cycle,
            start: prev,
            steps: Some(steps),
        });
        k.push(ki);
    }
    blocks.last_mut().expect("at least one phase").steps = None;
    Ok(PhasePlan {
        blocks,
        epsilons: epsilons.to_vec(),
        k,
        l,
    })
}

fn rotate_to(cycle: &[StateId], s: StateId) -> Vec<StateId> {
    let i = cycle.iter().position(|&x| x == s).expect("state on the cycle");
    cycle[i..].iter().chain(&cycle[..i]).copied().collect()
}

/// Numerator and denominator of a tolerance.
fn eps_parts(eps: &Rational) -> Result<(i128, i128)> {
    eps.to_i64_pair()
        .map(|(n, d)| (i128::from(n), i128::from(d)))
        .ok_or_else(|| Error::Overflow(format!("tolerance {eps} exceeds 64 bits")))
}

fn to_u64(v: i128, what: &str) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::Overflow(format!("{what} exceeds 64 bits")))
}

/// Dense edge ids of a closed walk: `ids[t]` names transition `t` and
/// `mult[e]` counts edge `e` per period.
struct CycleEdges {
    edges: Vec<Edge>,
    ids: Vec<usize>,
    mult: Vec<i128>,
}

impl CycleEdges {
    fn new(cycle: &[StateId]) -> Self {
        let mut index: BTreeMap<Edge, usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut mult = Vec::new();
        let ids = (0..cycle.len())
            .map(|t| {
                let e = (cycle[t], cycle[(t + 1) % cycle.len()]);
                let id = *index.entry(e).or_insert_with(|| {
                    edges.push(e);
                    mult.push(0);
                    edges.len() - 1
                });
                mult[id] += 1;
                id
            })
            .collect();
        CycleEdges { edges, ids, mult }
    }
}

/// Least `L` such that for every rotation of the Euler cycle `cycle` and
/// every `N > L`, each edge occurs at least `(f_e − ε)·N` times among the
/// first `N` transitions.
fn stabilization_length(cycle: &[StateId], eps: &Rational) -> Result<u64> {
    let (en, ed) = eps_parts(eps)?;
    let ce = CycleEdges::new(cycle);
    let p = cycle.len();
    let pi = p as i128;
    let mut seen = BTreeSet::new();
    let mut worst = 0i128;
    let mut pre = vec![0i128; ce.edges.len()];
    for offset in 0..p {
        if !seen.insert(cycle[offset]) {
            continue;
        }
        pre.iter_mut().for_each(|c| *c = 0);
        for r in 0..p {
            // Among N ≡ r (mod p) transitions the count is q·m_e + pre_e(r)
            // and f_e = m_e/p, so the bound fails exactly when
            // ε·N < f_e·r − pre_e(r).
            let ri = r as i128;
            for (e, &m) in ce.mult.iter().enumerate() {
                let x = ed * (m * ri - pre[e] * pi);
                if x <= 0 {
                    continue;
                }
                let nmax = (x - 1) / (en * pi);
                if nmax < ri {
                    continue;
                }
                let bad = ri + (nmax - ri) / pi * pi;
                worst = worst.max(bad);
            }
            pre[ce.ids[(offset + r) % p]] += 1;
        }
    }
    to_u64(worst, "stabilization length")
}

/// Least `K > prev` with `K ≥ growth` such that following the Euler cycle
/// `cycle` from position `prev` brings every edge count over the first `K`
/// transitions to at least `(f_e − ε)·K`.
fn next_checkpoint(
    cycle: &[StateId],
    counts: &BTreeMap<Edge, u64>,
    prev: u64,
    eps: &Rational,
    growth: u64,
) -> Result<u64> {
    let (en, ed) = eps_parts(eps)?;
    let ce = CycleEdges::new(cycle);
    let p = cycle.len() as i128;
    let prev = i128::from(prev);
    let min_m = (i128::from(growth) - prev).max(1);
    let before: Vec<i128> = ce
        .edges
        .iter()
        .map(|e| i128::from(counts.get(e).copied().unwrap_or(0)))
        .collect();
    let mut pre = vec![0i128; ce.edges.len()];
    let mut best = i128::MAX;
    for r in 0..p {
        // With M = q·p + r further transitions the count of e is
        // P_e + q·m_e + pre_e(r), so the bound is linear in q.
        let mut q = 0i128;
        for (e, &m) in ce.mult.iter().enumerate() {
            let y = (m * ed - en * p) * (prev + r) - (before[e] + pre[e]) * p * ed;
            if y > 0 {
                q = q.max((y + en * p * p - 1) / (en * p * p));
            }
        }
        if min_m > r {
            q = q.max((min_m - r + p - 1) / p);
        }
        best = best.min(prev + q * p + r);
        pre[ce.ids[r as usize]] += 1;
    }
    to_u64(best, "phase length")
}

impl PhasePlan {
    /// A lasso as a schedule: its prefix, then its cycle forever.
    pub fn from_lasso(lasso: &Lasso) -> PhasePlan {
        let mut blocks = Vec::new();
        if !lasso.prefix.is_empty() {
            blocks.push(PhaseBlock {
                cycle: lasso.prefix.clone(),
                start: 0,
                steps: Some(lasso.prefix.len() as u64),
            });
        }
        blocks.push(PhaseBlock {
            cycle: lasso.cycle.clone(),
            start: lasso.prefix.len() as u64,
            steps: None,
        });
        PhasePlan {
            blocks,
            epsilons: Vec::new(),
            k: Vec::new(),
            l: Vec::new(),
        }
    }

    /// Same plan, preceded by the finite path `prefix`.
    pub fn with_prefix(mut self, prefix: &[StateId]) -> PhasePlan {
        if prefix.is_empty() {
            return self;
        }
        let shift = prefix.len() as u64;
        for b in &mut self.blocks {
            b.start += shift;
        }
        self.blocks.insert(
            0,
            PhaseBlock {
                cycle: prefix.to_vec(),
                start: 0,
                steps: Some(shift),
            },
        );
        self
    }

    fn block_at(&self, pos: u64) -> usize {
        self.blocks.partition_point(|b| b.start <= pos) - 1
    }

    /// State at position `pos` of the run.
    pub fn state_at(&self, pos: u64) -> StateId {
        let b = &self.blocks[self.block_at(pos)];
        b.cycle[((pos - b.start) % b.cycle.len() as u64) as usize]
    }

    /// The first `len` states of the run.
    pub fn prefix(&self, len: usize) -> Vec<StateId> {
        (0..len as u64).map(|p| self.state_at(p)).collect()
    }

    /// Visit counts of every state `< n` over positions `0..positions`.
    pub fn state_counts(&self, positions: u64, n: usize) -> Vec<u64> {
        let mut out = vec![0u64; n];
        for b in &self.blocks {
            if b.start >= positions {
                break;
            }
            let len = b.steps.map_or(positions - b.start, |s| s.min(positions - b.start));
            let p = b.cycle.len() as u64;
            let (q, r) = (len / p, len % p);
            for (t, &s) in b.cycle.iter().enumerate().take(len.min(p) as usize) {
                out[s] += q + u64::from((t as u64) < r);
            }
        }
        out
    }

    /// Counts of the transitions `0..transitions`.
    pub fn edge_counts(&self, transitions: u64) -> BTreeMap<Edge, u64> {
        let mut out = BTreeMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.start >= transitions {
                break;
            }
            let len = b.steps.map_or(transitions - b.start, |s| s.min(transitions - b.start));
            let inner = match b.steps {
                Some(s) if len == s => len - 1,
                _ => len,
            };
            let p = b.cycle.len() as u64;
            let (q, r) = (inner / p, inner % p);
            for t in 0..inner.min(p) {
                let i = t as usize;
                let e = (b.cycle[i], b.cycle[(i + 1) % b.cycle.len()]);
                *out.entry(e).or_insert(0) += q + u64::from(t < r);
            }
            if inner < len {
                let last = b.cycle[((len - 1) % p) as usize];
                let next = self.blocks[i + 1].cycle[0];
                *out.entry((last, next)).or_insert(0) += 1;
            }
        }
        out
    }

    /// Empirical mean and variance of the reward over positions
    /// `0..positions`, the variance taken around the empirical mean.
    pub fn empirical_moments(&self, positions: u64, reward: &RewardFunction) -> (Rational, Rational) {
        let total = Rational::from(BigInt::from(positions));
        let weights: Vec<Rational> = self
            .state_counts(positions, reward.num_states())
            .into_iter()
            .map(|c| Rational::from(BigInt::from(c)) / &total)
            .collect();
        moments(&weights, reward)
    }
}

/// One row of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: u64,
    pub mp: f64,
    pub va: f64,
}

/// Empirical mean payoff and variance of the scheduled run at each of
/// `steps` (prefix lengths).
pub fn convergence_trace(plan: &PhasePlan, reward: &RewardFunction, steps: &[u64]) -> Vec<TracePoint> {
    steps
        .iter()
        .filter(|&&n| n > 0)
        .map(|&step| {
            let (mp, va) = plan.empirical_moments(step, reward);
            TracePoint {
                step,
                mp: mp.to_f64(),
                va: va.to_f64(),
            }
        })
        .collect()
}

/// Roughly geometric sample points `1, 2, 4, …` up to and including `max`.
pub fn geometric_steps(max: u64, per_doubling: u32) -> Vec<u64> {
    let mut out = BTreeSet::new();
    let mut x = 1f64;
    let factor = 2f64.powf(1.0 / f64::from(per_doubling.max(1)));
    while (x as u64) < max {
        out.insert(x as u64);
        x *= factor;
    }
    out.insert(max);
    out.into_iter().collect()
}

/// Strictly supported vectors converging to `f`: `f^i = (1 − 2^{−i})·f +
/// 2^{−i}·g`, where `g` spreads weight over every edge of the component of
/// `f`'s support.
pub fn approximating_sequence(game: &Game, f: &FrequencyVector, count: usize) -> Result<Vec<FrequencyVector>> {
    validate_frequencies(game, f, SupportRule::SccClosure)?;
    let ids = game.scc_ids();
    let comp = ids[f.support()[0].0];
    // Every component edge (a, b) closed by a shortest path back to a.
    let mut counts: BTreeMap<Edge, u64> = BTreeMap::new();
    for (a, b) in game.edges() {
        if ids[a] != comp || ids[b] != comp {
            continue;
        }
        let back = shortest_path(game, b, |s| s == a).expect("same component");
        *counts.entry((a, b)).or_insert(0) += 1;
        for w in back.windows(2) {
            *counts.entry((w[0], w[1])).or_insert(0) += 1;
        }
    }
    let g = FrequencyVector::from_counts(&counts);
    Ok((1..=count)
        .map(|i| {
            let lambda =
                Rational::one() - Rational::from(BigInt::one()) / Rational::from(BigInt::from(2u64).pow(i as u32));
            f.mix(&g, &lambda)
        })
        .collect())
}

/// A scheduled run from `initial` whose edge frequencies converge to `f`,
/// entered along a shortest path.
///
/// With strongly connected support this is the Euler strategy; otherwise
/// the phase schedule over `phases` vectors of [`approximating_sequence`]
/// with [`halving_epsilons`].
pub fn realizing_plan(game: &Game, f: &FrequencyVector, initial: StateId, phases: usize) -> Result<PhasePlan> {
    if validate_frequencies(game, f, SupportRule::Strict).is_ok() {
        return Ok(PhasePlan::from_lasso(&euler_strategy_from(game, f, initial)?));
    }
    let fs = approximating_sequence(game, f, phases.max(1))?;
    let states: BTreeSet<StateId> = fs[0].support_states().into_iter().collect();
    let mut path = shortest_path(game, initial, |s| states.contains(&s))
        .ok_or_else(|| Error::SupportNotScc(format!("support is not reachable from state {initial}")))?;
    let entry = path.pop().expect("path ends at the support");
    Ok(phase_plan(game, &fs, &halving_epsilons(fs.len()), entry)?.with_prefix(&path))
}

/// Tolerances `1/10, 1/20, 1/40, …`.
pub fn halving_epsilons(count: usize) -> Vec<Rational> {
    (0..count)
        .map(|i| Rational::from(BigInt::one()) / Rational::from(BigInt::from(10) * BigInt::from(2u64).pow(i as u32)))
        .collect()
}

/// The alternating cycle on the four-state example graph: `n` round trips
/// `A → B → A`, then `A → B → C → D`, `2n` steps on the `D` loop, and back
/// through `C` to `A`.
pub fn alternation_cycle(n: usize) -> Vec<StateId> {
    use crate::fixtures::{A, B, C, D};
    let mut c = Vec::with_capacity(4 * n + 5);
    for _ in 0..n {
        c.extend([A, B]);
    }
    c.extend([A, B, C]);
    c.extend(std::iter::repeat_n(D, 2 * n + 1));
    c.push(C);
    c
}

/// Phase schedule on the four-state example graph whose phase `i` runs
/// [`alternation_cycle`] with `n = base·2^{i−1}`, starting in `A`.
pub fn alternation_plan(game: &Game, base: usize, phases: usize) -> Result<PhasePlan> {
    let fs: Vec<FrequencyVector> = (0..phases)
        .map(|i| FrequencyVector::uniform_cycle(&alternation_cycle(base << i)))
        .collect();
    phase_plan(game, &fs, &halving_epsilons(phases), crate::fixtures::A)
}

/// Variance of a run on the four-state example graph with mean payoff `x`
/// and frequency `f_c` of `C`, after eliminating the other frequencies via
/// `f_A = f_B = (x + 11·f_C − 1)/2` and `f_D = 2 − x − 12·f_C`.
pub fn variance_expression(x: &Rational, f_c: &Rational) -> Rational {
    let half = Rational::new(1, 2);
    let one = Rational::one();
    let spread = x.pow2() + (Rational::integer(4) - x).pow2();
    let base = (x - &one) * &half * &spread + (Rational::integer(2) - x) * (one - x).pow2();
    base + f_c * &variance_expression_slope(x)
}

/// Coefficient of `f_C` in [`variance_expression`].
pub fn variance_expression_slope(x: &Rational) -> Rational {
    let spread = x.pow2() + (Rational::integer(4) - x).pow2();
    Rational::new(11, 2) * spread + (Rational::integer(-10) - x).pow2()
        - Rational::integer(12) * (Rational::one() - x).pow2()
}
