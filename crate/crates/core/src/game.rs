//! Finite two-player games, reward functions and lassos.

use std::collections::HashSet;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{common_denominator, Rational};

pub type StateId = usize;

/// Which player picks the successor in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    /// The controller.
    Box,
    /// The adversary.
    Diamond,
}

/// A game `(S, (S_box, S_diamond), E)` with dense state ids `0..n`.
///
/// Every state has at least one successor and the edge relation has no
/// duplicates; [`Game::new`] rejects anything else. A graph is a game without
/// adversary states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    owners: Vec<Owner>,
    succ: Vec<Vec<StateId>>,
    pred: Vec<Vec<StateId>>,
    labels: Vec<String>,
}

impl Game {
    pub fn new(owners: Vec<Owner>, edges: &[(StateId, StateId)]) -> Result<Self> {
        validate_game(owners.len(), edges)?;
        let n = owners.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(a, b) in edges {
            succ[a].push(b);
            pred[b].push(a);
        }
        let labels = (0..n).map(|s| format!("s{s}")).collect();
        Ok(Game {
            owners,
            succ,
            pred,
            labels,
        })
    }

    /// A one-player game.
    pub fn graph(num_states: usize, edges: &[(StateId, StateId)]) -> Result<Self> {
        Game::new(vec![Owner::Box; num_states], edges)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.owners.len());
        self.labels = labels;
        self
    }

    pub fn num_states(&self) -> usize {
        self.owners.len()
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn owner(&self, s: StateId) -> Owner {
        self.owners[s]
    }

    pub fn owners(&self) -> &[Owner] {
        &self.owners
    }

    pub fn successors(&self, s: StateId) -> &[StateId] {
        &self.succ[s]
    }

    pub fn predecessors(&self, s: StateId) -> &[StateId] {
        &self.pred[s]
    }

    pub fn label(&self, s: StateId) -> &str {
        &self.labels[s]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_edge(&self, a: StateId, b: StateId) -> bool {
        a < self.num_states() && self.succ[a].contains(&b)
    }

    /// Edges in insertion order grouped by source.
    pub fn edges(&self) -> Vec<(StateId, StateId)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, ss)| ss.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn is_graph(&self) -> bool {
        self.owners.iter().all(|o| *o == Owner::Box)
    }

    /// States reachable from `start` (including `start`).
    pub fn reachable_from(&self, start: StateId) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for &t in &self.succ[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Strongly connected component index of every state (Tarjan).
    pub fn scc_ids(&self) -> Vec<usize> {
        let succ: Vec<&[StateId]> = self.succ.iter().map(Vec::as_slice).collect();
        scc_ids(&succ)
    }
}

/// Totality and well-formedness of an edge list over `num_states` states.
pub fn validate_game(num_states: usize, edges: &[(StateId, StateId)]) -> Result<()> {
    if num_states == 0 {
        return Err(Error::EmptyGame);
    }
    let mut seen = HashSet::new();
    let mut has_out = vec![false; num_states];
    for &(a, b) in edges {
        if a >= num_states || b >= num_states {
            return Err(Error::BadEdge(a, b));
        }
        if !seen.insert((a, b)) {
            return Err(Error::DuplicateEdge(a, b));
        }
        has_out[a] = true;
    }
    match has_out.iter().position(|h| !h) {
        Some(s) => Err(Error::DanglingState(s)),
        None => Ok(()),
    }
}

/// Iterative Tarjan over an adjacency list.
pub(crate) fn scc_ids(succ: &[&[usize]]) -> Vec<usize> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// A `k`-dimensional reward function with integer storage.
///
/// The semantic reward of state `s` in dimension `i` is
/// `values[s][i] / scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardFunction {
    name: String,
    dim: usize,
    values: Vec<Vec<i64>>,
    scale: i64,
}

impl RewardFunction {
    pub fn new(name: impl Into<String>, values: Vec<Vec<i64>>, scale: i64) -> Result<Self> {
        let name = name.into();
        if scale <= 0 {
            return Err(Error::BadReward(format!("{name}: scale must be positive")));
        }
        let dim = values.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::BadReward(format!("{name}: dimension must be at least 1")));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::BadReward(format!("{name}: inconsistent dimensions")));
        }
        Ok(RewardFunction {
            name,
            dim,
            values,
            scale,
        })
    }

    /// One-dimensional integer rewards.
    pub fn scalar(name: impl Into<String>, values: &[i64]) -> Self {
        RewardFunction::new(name, values.iter().map(|&v| vec![v]).collect(), 1).expect("non-empty scalar reward")
    }

    /// Builds the integer representation of rational per-state vectors, using
    /// the least common denominator as scale.
    pub fn from_rationals(name: impl Into<String>, values: &[Vec<Rational>]) -> Result<Self> {
        let name = name.into();
        let den = common_denominator(values.iter().flatten());
        let scale = den
            .to_i64()
            .ok_or_else(|| Error::BadReward(format!("{name}: denominator too large")))?;
        let mut ints = Vec::with_capacity(values.len());
        for v in values {
            let mut row = Vec::with_capacity(v.len());
            for r in v {
                let x = r.numer() * (&den / r.denom());
                row.push(
                    x.to_i64()
                        .ok_or_else(|| Error::BadReward(format!("{name}: value too large")))?,
                );
            }
            ints.push(row);
        }
        RewardFunction::new(name, ints, scale)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    /// Stored integer vector of `s`.
    pub fn raw(&self, s: StateId) -> &[i64] {
        &self.values[s]
    }

    pub fn raw_values(&self) -> &[Vec<i64>] {
        &self.values
    }

    pub fn value(&self, s: StateId, i: usize) -> Rational {
        Rational::new(self.values[s][i], self.scale)
    }

    pub fn vector(&self, s: StateId) -> Vec<Rational> {
        (0..self.dim).map(|i| self.value(s, i)).collect()
    }

    /// Largest stored value (at least 0).
    pub fn maxr(&self) -> i64 {
        self.values.iter().flatten().copied().max().unwrap_or(0).max(0)
    }

    pub fn min_raw(&self) -> i64 {
        self.values.iter().flatten().copied().min().unwrap_or(0)
    }

    pub fn max_abs_raw(&self) -> i64 {
        self.values.iter().flatten().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Reward lifted to a game whose state `p` projects onto `proj[p]`.
    pub fn lift(&self, proj: impl IntoIterator<Item = StateId>) -> RewardFunction {
        RewardFunction {
            name: self.name.clone(),
            dim: self.dim,
            values: proj.into_iter().map(|s| self.values[s].clone()).collect(),
            scale: self.scale,
        }
    }

    pub(crate) fn check_states(&self, game: &Game) -> Result<()> {
        if self.values.len() != game.num_states() {
            return Err(Error::BadReward(format!(
                "{}: {} values for {} states",
                self.name,
                self.values.len(),
                game.num_states()
            )));
        }
        Ok(())
    }

    pub(crate) fn require_scalar(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!(
                "reward {} has dimension {}; only one-dimensional rewards are supported here",
                self.name, self.dim
            )));
        }
        Ok(())
    }
}

/// Ultimately periodic run `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lasso {
    #[serde(default)]
    pub prefix: Vec<StateId>,
    pub cycle: Vec<StateId>,
}

impl Lasso {
    pub fn new(prefix: Vec<StateId>, cycle: Vec<StateId>) -> Self {
        Lasso { prefix, cycle }
    }

    pub fn cycle_only(cycle: Vec<StateId>) -> Self {
        Lasso {
            prefix: Vec::new(),
            cycle,
        }
    }

    /// State at position `p` of the infinite run.
    pub fn at(&self, p: usize) -> StateId {
        if p < self.prefix.len() {
            self.prefix[p]
        } else {
            self.cycle[(p - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.cycle.is_empty() {
            return Err(Error::BadLasso("empty cycle".into()));
        }
        let n = game.num_states();
        if let Some(&s) = self.prefix.iter().chain(&self.cycle).find(|&&s| s >= n) {
            return Err(Error::BadLasso(format!("unknown state {s}")));
        }
        let len = self.prefix.len() + self.cycle.len();
        for p in 0..len {
            let (a, b) = (self.at(p), self.at(p + 1));
            if !game.has_edge(a, b) {
                return Err(Error::BadLasso(format!("missing edge {a} -> {b}")));
            }
        }
        Ok(())
    }
}
