//! Brute-force reference solvers for cross-checking on small instances.
//!
//! The window oracle plays the safety game over explicit reward histories
//! (the last `W − 1` reward vectors and the position modulo `D`), evaluates
//! every closing window by direct summation, and solves safety by naive
//! fixed-point iteration. Mean-payoff references enumerate positional
//! strategies, which suffices because mean-payoff and safety games are
//! positionally determined.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::game::{Game, Owner, RewardFunction, StateId};
use crate::hardgen::{Cnf, Qbf, Quantifier};
use crate::objective::WindowObjective;
use crate::rational::Rational;

/// Size limits; exceeding any of them is an error, never a silent cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    /// Explored history states per query.
    pub history_states: usize,
    /// Positional strategy profiles enumerated by [`mp_oracle`].
    pub strategy_profiles: u64,
    /// Controller strategies enumerated by [`combined_oracle`] before it
    /// switches to [`horizon_value`].
    pub box_strategies: u64,
    /// Variables of the formula oracles.
    pub formula_vars: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            history_states: 2_000_000,
            strategy_profiles: 5_000_000,
            box_strategies: 100_000,
            formula_vars: 20,
        }
    }
}

/// The explicit history safety game of a conjunction of window objectives.
#[derive(Debug, Clone)]
pub struct HistoryGame {
    /// Game state of each history node.
    pub state: Vec<StateId>,
    pub owner: Vec<Owner>,
    /// Successors; empty for bad nodes, which are never expanded.
    pub succ: Vec<Vec<usize>>,
    /// Visiting this node closes some window outside its bounds.
    pub bad: Vec<bool>,
}

impl HistoryGame {
    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Nodes from which the controller avoids bad nodes forever.
    pub fn safe(&self) -> Vec<bool> {
        let mut safe: Vec<bool> = self.bad.iter().map(|b| !b).collect();
        loop {
            let mut changed = false;
            for v in 0..self.len() {
                if !safe[v] {
                    continue;
                }
                let ok = match self.owner[v] {
                    Owner::Box => self.succ[v].iter().any(|&w| safe[w]),
                    Owner::Diamond => self.succ[v].iter().all(|&w| safe[w]),
                };
                if !ok {
                    safe[v] = false;
                    changed = true;
                }
            }
            if !changed {
                return safe;
            }
        }
    }
}

/// Per-conjunct data in stored units: rewards and inclusive window-sum bounds.
struct Conjunct<'a> {
    window: usize,
    checkpoint: usize,
    reward: &'a RewardFunction,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

/// Explores the history game from `start`. Node 0 is the start node.
pub fn history_game(
    game: &Game,
    conjuncts: &[WindowObjective],
    start: StateId,
    caps: &OracleCaps,
) -> Result<HistoryGame> {
    if start >= game.num_states() {
        return Err(Error::UnknownState(start));
    }
    let cs: Vec<Conjunct> = conjuncts
        .iter()
        .map(|phi| {
            phi.check_game(game)?;
            let (lo, hi) = phi.raw_sum_bounds()?;
            Ok(Conjunct {
                window: phi.window,
                checkpoint: phi.checkpoint,
                reward: &phi.reward,
                lo,
                hi,
            })
        })
        .collect::<Result<_>>()?;

    // Node: (state, per conjunct (position mod D, buffer of past rewards)).
    type Node = (StateId, Vec<(usize, VecDeque<Vec<i64>>)>);
    let root: Node = (start, cs.iter().map(|_| (0, VecDeque::new())).collect());
    let mut index: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = vec![root.clone()];
    index.insert(root, 0);
    let mut out = HistoryGame {
        state: Vec::new(),
        owner: Vec::new(),
        succ: Vec::new(),
        bad: Vec::new(),
    };
    let mut i = 0;
    while i < nodes.len() {
        let (s, hist) = nodes[i].clone();
        let bad = cs.iter().zip(&hist).any(|(c, (phase, buf))| {
            let closes = buf.len() + 1 == c.window && (phase + 1) % c.checkpoint == 0;
            closes
                && (0..c.reward.dim()).any(|x| {
                    let sum: i64 = buf.iter().map(|r| r[x]).sum::<i64>() + c.reward.raw(s)[x];
                    sum < c.lo[x] || sum > c.hi[x]
                })
        });
        let mut succ = Vec::new();
        if !bad {
            let next_hist: Vec<(usize, VecDeque<Vec<i64>>)> = cs
                .iter()
                .zip(&hist)
                .map(|(c, (phase, buf))| {
                    let mut b = buf.clone();
                    b.push_back(c.reward.raw(s).to_vec());
                    if b.len() >= c.window {
                        b.pop_front();
                    }
                    ((phase + 1) % c.checkpoint, b)
                })
                .collect();
            for &t in game.successors(s) {
                let node = (t, next_hist.clone());
                let id = match index.get(&node) {
                    Some(&id) => id,
                    None => {
                        if nodes.len() >= caps.history_states {
                            return Err(Error::TooLarge(format!(
                                "history game exceeds {} states",
                                caps.history_states
                            )));
                        }
                        nodes.push(node.clone());
                        index.insert(node, nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                succ.push(id);
            }
        }
        out.state.push(s);
        out.owner.push(game.owner(s));
        out.succ.push(succ);
        out.bad.push(bad);
        i += 1;
    }
    Ok(out)
}

/// Whether the controller achieves `phi` from `s`.
pub fn window_oracle(game: &Game, phi: &WindowObjective, s: StateId, caps: &OracleCaps) -> Result<bool> {
    joint_window_oracle(game, std::slice::from_ref(phi), s, caps)
}

/// Whether the controller achieves the conjunction from `s`.
pub fn joint_window_oracle(game: &Game, conjuncts: &[WindowObjective], s: StateId, caps: &OracleCaps) -> Result<bool> {
    let h = history_game(game, conjuncts, s, caps)?;
    Ok(h.safe()[0])
}

/// Winning states of the conjunction, one history game per state.
pub fn window_oracle_set(game: &Game, conjuncts: &[WindowObjective], caps: &OracleCaps) -> Result<Vec<StateId>> {
    let mut out = Vec::new();
    for s in 0..game.num_states() {
        if joint_window_oracle(game, conjuncts, s, caps)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Optimal mean-payoff values by enumerating positional strategy profiles.
pub fn mp_oracle(game: &Game, reward: &RewardFunction, caps: &OracleCaps) -> Result<Vec<Rational>> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    let n = game.num_states();
    let profiles = (0..n).try_fold(1u64, |acc, s| acc.checked_mul(game.successors(s).len() as u64));
    match profiles {
        Some(p) if p <= caps.strategy_profiles => {}
        _ => {
            return Err(Error::TooLarge(format!(
                "more than {} positional strategy profiles",
                caps.strategy_profiles
            )))
        }
    }
    let boxes: Vec<StateId> = (0..n).filter(|&s| game.owner(s) == Owner::Box).collect();
    let diamonds: Vec<StateId> = (0..n).filter(|&s| game.owner(s) == Owner::Diamond).collect();
    let scale = reward.scale();
    let mut best: Vec<Option<Rational>> = vec![None; n];
    let mut choice = vec![0usize; n];
    for_each_choice(game, &boxes, &mut choice, &mut |choice| {
        let mut worst: Vec<Option<Rational>> = vec![None; n];
        let mut full = choice.to_vec();
        for_each_choice(game, &diamonds, &mut full, &mut |full| {
            let vals = functional_cycle_values(game, full, |s| reward.raw(s)[0], scale);
            for s in 0..n {
                if worst[s].as_ref().is_none_or(|w| vals[s] < *w) {
                    worst[s] = Some(vals[s].clone());
                }
            }
        });
        for s in 0..n {
            let w = worst[s].take().unwrap();
            if best[s].as_ref().is_none_or(|b| w > *b) {
                best[s] = Some(w);
            }
        }
    });
    Ok(best.into_iter().map(Option::unwrap).collect())
}

/// Calls `f` for every assignment of a successor index to the `states`.
fn for_each_choice(game: &Game, states: &[StateId], choice: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    fn rec(game: &Game, states: &[StateId], k: usize, choice: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k == states.len() {
            f(choice);
            return;
        }
        let s = states[k];
        for c in 0..game.successors(s).len() {
            choice[s] = c;
            rec(game, states, k + 1, choice, f);
        }
    }
    rec(game, states, 0, choice, f);
}

/// Cycle average reached from every state when each state `s` moves to its
/// `choice[s]`-th successor.
fn functional_cycle_values(
    game: &Game,
    choice: &[usize],
    reward: impl Fn(StateId) -> i64,
    scale: i64,
) -> Vec<Rational> {
    let n = game.num_states();
    let next = |s: StateId| game.successors(s)[choice[s]];
    let mut value: Vec<Option<Rational>> = vec![None; n];
    for s in 0..n {
        if value[s].is_some() {
            continue;
        }
        let mut path = Vec::new();
        let mut pos: HashMap<StateId, usize> = HashMap::new();
        let mut v = s;
        while value[v].is_none() && !pos.contains_key(&v) {
            pos.insert(v, path.len());
            path.push(v);
            v = next(v);
        }
        let val = match &value[v] {
            Some(x) => x.clone(),
            None => {
                let cycle = &path[pos[&v]..];
                let sum: i64 = cycle.iter().map(|&u| reward(u)).sum();
                Rational::new(sum, cycle.len() as i64 * scale)
            }
        };
        for u in path {
            value[u] = Some(val.clone());
        }
    }
    value.into_iter().map(Option::unwrap).collect()
}

/// Exact optimum of `Δ ∧ mp_ρ ≥ b` from `s`: the largest achievable `b`, or
/// `None` when `Δ` is not achievable.
///
/// Controller strategies are positional on the safe part of the history game
/// and enumerated lazily over the nodes they reach; the adversary's best
/// response is the minimum mean cycle reachable under the strategy.
pub fn combined_oracle(
    game: &Game,
    conjuncts: &[WindowObjective],
    reward: &RewardFunction,
    s: StateId,
    caps: &OracleCaps,
) -> Result<Option<Rational>> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    let h = history_game(game, conjuncts, s, caps)?;
    let safe = h.safe();
    if !safe[0] {
        return Ok(None);
    }
    let succ: Vec<Vec<usize>> = (0..h.len())
        .map(|v| h.succ[v].iter().copied().filter(|&w| safe[w]).collect())
        .collect();
    let weight: Vec<i64> = h.state.iter().map(|&st| reward.raw(st)[0]).collect();
    let mut search = LazyEnumeration {
        owner: &h.owner,
        succ: &succ,
        weight: &weight,
        assign: vec![None; h.len()],
        best: None,
        count: 0,
        cap: caps.box_strategies,
    };
    let best = match search.run() {
        Ok(()) => search.best.expect("at least one strategy"),
        Err(Error::TooLarge(_)) => horizon_value(&h.owner, &succ, &weight),
        Err(e) => return Err(e),
    };
    Ok(Some(best / &Rational::integer(reward.scale())))
}

/// Mean-payoff value of node 0 by finite-horizon value iteration.
///
/// With `n` reachable nodes and weights spanning `w`, the `k`-step optimum
/// `v_k` satisfies `|v_k/k − ν| ≤ 2nw/k`, and `ν` is a cycle mean with
/// denominator at most `n`. For `k > 4n³w` the interval around `v_k/k`
/// contains exactly one such fraction.
pub fn horizon_value(owner: &[Owner], succ: &[Vec<usize>], weight: &[i64]) -> Rational {
    let mut local = vec![usize::MAX; succ.len()];
    let mut order = vec![0];
    local[0] = 0;
    let mut i = 0;
    while i < order.len() {
        for &w in &succ[order[i]] {
            if local[w] == usize::MAX {
                local[w] = order.len();
                order.push(w);
            }
        }
        i += 1;
    }
    let n = order.len() as i128;
    let lo_w = order.iter().map(|&v| weight[v]).min().expect("non-empty") as i128;
    let span = (order.iter().map(|&v| weight[v]).max().expect("non-empty") as i128 - lo_w).max(1);
    let adj: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| succ[v].iter().map(|&w| local[w]).collect())
        .collect();
    let w: Vec<i128> = order.iter().map(|&v| weight[v] as i128 - lo_w).collect();
    let maximize: Vec<bool> = order.iter().map(|&v| owner[v] == Owner::Box).collect();
    let k = 4 * n * n * n * span + 1;
    let mut cur = vec![0i128; order.len()];
    let mut next = cur.clone();
    for _ in 0..k {
        for (u, out) in next.iter_mut().enumerate() {
            let succ_vals = adj[u].iter().map(|&x| cur[x]);
            let best = if maximize[u] { succ_vals.max() } else { succ_vals.min() };
            *out = w[u] + best.expect("total successors");
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let (lo, hi) = (cur[0] - 2 * n * span, cur[0] + 2 * n * span);
    for q in 1..=n {
        let p = -(-lo * q).div_euclid(k);
        if p * k <= hi * q {
            return Rational::new(p as i64, q as i64) + Rational::integer(lo_w as i64);
        }
    }
    unreachable!("the value is a fraction with denominator at most the node count")
}

struct LazyEnumeration<'a> {
    owner: &'a [Owner],
    succ: &'a [Vec<usize>],
    weight: &'a [i64],
    assign: Vec<Option<usize>>,
    best: Option<Rational>,
    count: u64,
    cap: u64,
}

impl LazyEnumeration<'_> {
    fn moves(&self, v: usize) -> &[usize] {
        match (self.owner[v], self.assign[v]) {
            (Owner::Box, Some(c)) => std::slice::from_ref(&self.succ[v][c]),
            _ => &self.succ[v],
        }
    }

    /// Nodes reachable from the root under the current partial assignment.
    fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.succ.len()];
        seen[0] = true;
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            if !(self.owner[v] == Owner::Box && self.assign[v].is_none()) {
                for &w in self.moves(v) {
                    if !seen[w] {
                        seen[w] = true;
                        order.push(w);
                    }
                }
            }
            i += 1;
        }
        order
    }

    fn run(&mut self) -> Result<()> {
        let reach = self.reachable();
        match reach
            .iter()
            .copied()
            .find(|&v| self.owner[v] == Owner::Box && self.assign[v].is_none())
        {
            Some(v) => {
                // Cycles among committed nodes stay available to the adversary
                // in every completion, so they bound the value from above.
                if let Some(best) = &self.best {
                    let committed: Vec<usize> = reach
                        .iter()
                        .copied()
                        .filter(|&u| !(self.owner[u] == Owner::Box && self.assign[u].is_none()))
                        .collect();
                    if self.min_mean_cycle(&committed).is_some_and(|ub| ub <= *best) {
                        return Ok(());
                    }
                }
                for c in 0..self.succ[v].len() {
                    self.assign[v] = Some(c);
                    self.run()?;
                }
                self.assign[v] = None;
            }
            None => {
                self.count += 1;
                if self.count > self.cap {
                    return Err(Error::TooLarge(format!("more than {} controller strategies", self.cap)));
                }
                let value = self
                    .min_mean_cycle(&reach)
                    .expect("a finite graph with total successors has a cycle");
                if self.best.as_ref().is_none_or(|b| value > *b) {
                    self.best = Some(value);
                }
            }
        }
        Ok(())
    }

    /// Minimum cycle mean (stored units) over the subgraph induced by
    /// `nodes`, by Karp's algorithm on each strongly connected component.
    fn min_mean_cycle(&self, nodes: &[usize]) -> Option<Rational> {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&v| self.moves(v).iter().filter_map(|w| local.get(w).copied()).collect())
            .collect();
        let refs: Vec<&[usize]> = adj.iter().map(Vec::as_slice).collect();
        let comp = crate::game::scc_ids(&refs);
        let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
        let mut best: Option<Rational> = None;
        for c in 0..ncomp {
            let members: Vec<usize> = (0..nodes.len()).filter(|&i| comp[i] == c).collect();
            let has_cycle = members.iter().any(|&i| adj[i].iter().any(|&j| comp[j] == c));
            if !has_cycle {
                continue;
            }
            let m = karp(&members, &adj, &comp, c, |i| self.weight[nodes[i]]);
            if best.as_ref().is_none_or(|b| m < *b) {
                best = Some(m);
            }
        }
        best
    }
}

/// Karp's minimum mean cycle for one strongly connected component; the
/// weight of an edge is the weight of its source.
fn karp(members: &[usize], adj: &[Vec<usize>], comp: &[usize], c: usize, weight: impl Fn(usize) -> i64) -> Rational {
    let k = members.len();
    let pos: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    const INF: i64 = i64::MAX;
    let mut d = vec![vec![INF; k]; k + 1];
    d[0][0] = 0;
    for step in 0..k {
        for (i, &v) in members.iter().enumerate() {
            if d[step][i] == INF {
                continue;
            }
            for &w in &adj[v] {
                if comp[w] != c {
                    continue;
                }
                let j = pos[&w];
                let cand = d[step][i] + weight(v);
                if cand < d[step + 1][j] {
                    d[step + 1][j] = cand;
                }
            }
        }
    }
    let mut best: Option<Rational> = None;
    for i in 0..k {
        if d[k][i] == INF {
            continue;
        }
        let mut worst: Option<Rational> = None;
        for step in 0..k {
            if d[step][i] == INF {
                continue;
            }
            let r = Rational::new(d[k][i] - d[step][i], (k - step) as i64);
            if worst.as_ref().is_none_or(|w| r > *w) {
                worst = Some(r);
            }
        }
        if let Some(w) = worst {
            if best.as_ref().is_none_or(|b| w < *b) {
                best = Some(w);
            }
        }
    }
    best.expect("strongly connected component with a cycle")
}

/// Whether some assignment with exactly `n/2` true variables satisfies `phi`.
/// Odd `n` has no balanced assignment.
pub fn balanced_sat_oracle(phi: &Cnf, caps: &OracleCaps) -> Result<bool> {
    let n = phi.num_vars;
    if n > caps.formula_vars {
        return Err(Error::TooLarge(format!("{n} variables")));
    }
    if !n.is_multiple_of(2) {
        return Ok(false);
    }
    let mut assignment = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize != n / 2 {
            continue;
        }
        for (i, a) in assignment.iter_mut().enumerate() {
            *a = mask >> i & 1 == 1;
        }
        if phi.eval(&assignment) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Standard QBF truth by game-tree evaluation.
pub fn qbf_eval(psi: &Qbf) -> bool {
    fn rec(psi: &Qbf, assignment: &mut Vec<bool>) -> bool {
        let i = assignment.len();
        if i == psi.num_vars() {
            return psi.matrix.eval(assignment);
        }
        let branch = |v: bool, a: &mut Vec<bool>| {
            a.push(v);
            let r = rec(psi, a);
            a.pop();
            r
        };
        match psi.prefix[i] {
            Quantifier::Exists => branch(false, assignment) || branch(true, assignment),
            Quantifier::Forall => branch(false, assignment) && branch(true, assignment),
        }
    }
    rec(psi, &mut Vec::new())
}

/// Whether `psi` has a balanced model: every root-leaf assignment sets
/// exactly `n/2` variables and satisfies the matrix.
pub fn balanced_qbf_oracle(psi: &Qbf, caps: &OracleCaps) -> Result<bool> {
    let n = psi.num_vars();
    if n > caps.formula_vars {
        return Err(Error::TooLarge(format!("{n} variables")));
    }
    if !n.is_multiple_of(2) {
        return Ok(false);
    }
    fn rec(psi: &Qbf, assignment: &mut Vec<bool>, ones: usize) -> bool {
        let n = psi.num_vars();
        let i = assignment.len();
        if ones > n / 2 || ones + (n - i) < n / 2 {
            return false;
        }
        if i == n {
            return psi.matrix.eval(assignment);
        }
        let branch = |v: bool, a: &mut Vec<bool>| {
            a.push(v);
            let r = rec(psi, a, ones + v as usize);
            a.pop();
            r
        };
        match psi.prefix[i] {
            Quantifier::Exists => branch(false, assignment) || branch(true, assignment),
            Quantifier::Forall => branch(false, assignment) && branch(true, assignment),
        }
    }
    Ok(rec(psi, &mut Vec::new(), 0))
}
