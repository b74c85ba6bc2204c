//! Finite-memory strategy schemes `(Mem, Up, Const, Init)`.
//!
//! A scheme is stored explicitly over the `(state, memory)` pairs it
//! materializes. `Up` and `Const` are looked up per pair; asking for a pair
//! that was never materialized yields [`Error::Unmaterialized`].

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Lasso, Owner, RewardFunction, StateId};

pub type MemId = usize;

#[derive(Debug, Clone)]
pub struct StrategyScheme {
    num_states: usize,
    /// Opaque key of every memory element (encoding depends on the builder).
    mem_keys: Vec<Box<[i64]>>,
    pairs: Vec<(StateId, MemId)>,
    index: HashMap<(StateId, MemId), usize>,
    up: Vec<MemId>,
    /// `Some` exactly for pairs whose state belongs to the controller.
    constrainer: Vec<Option<Vec<StateId>>>,
    init: Vec<Option<MemId>>,
    work: u64,
}

impl StrategyScheme {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        num_states: usize,
        mem_keys: Vec<Box<[i64]>>,
        pairs: Vec<(StateId, MemId)>,
        index: HashMap<(StateId, MemId), usize>,
        up: Vec<MemId>,
        constrainer: Vec<Option<Vec<StateId>>>,
        init: Vec<Option<MemId>>,
        work: u64,
    ) -> Self {
        StrategyScheme {
            num_states,
            mem_keys,
            pairs,
            index,
            up,
            constrainer,
            init,
            work,
        }
    }

    /// The memoryless scheme that admits every strategy from every state.
    pub fn trivial(game: &Game) -> Self {
        let n = game.num_states();
        let pairs: Vec<_> = (0..n).map(|s| (s, 0)).collect();
        let index = pairs.iter().enumerate().map(|(p, &k)| (k, p)).collect();
        let constrainer = (0..n)
            .map(|s| match game.owner(s) {
                Owner::Box => Some(game.successors(s).to_vec()),
                Owner::Diamond => None,
            })
            .collect();
        StrategyScheme {
            num_states: n,
            mem_keys: vec![Box::new([])],
            pairs,
            index,
            up: vec![0; n],
            constrainer,
            init: vec![Some(0); n],
            work: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Number of materialized memory elements.
    pub fn num_mem(&self) -> usize {
        self.mem_keys.len()
    }

    pub fn mem_key(&self, m: MemId) -> &[i64] {
        &self.mem_keys[m]
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(StateId, MemId)] {
        &self.pairs
    }

    pub fn pair_id(&self, s: StateId, m: MemId) -> Option<usize> {
        self.index.get(&(s, m)).copied()
    }

    pub fn up(&self, s: StateId, m: MemId) -> Result<MemId> {
        self.pair_id(s, m)
            .map(|p| self.up[p])
            .ok_or(Error::Unmaterialized(s, m))
    }

    /// `Const(s, m)`; `None` for adversary states.
    pub fn constrainer(&self, s: StateId, m: MemId) -> Result<Option<&[StateId]>> {
        let p = self.pair_id(s, m).ok_or(Error::Unmaterialized(s, m))?;
        Ok(self.constrainer[p].as_deref())
    }

    pub fn init(&self, s: StateId) -> Option<MemId> {
        self.init[s]
    }

    /// States where `Init` is defined, i.e. where the objective is achievable.
    pub fn winning_states(&self) -> Vec<StateId> {
        (0..self.num_states).filter(|&s| self.init[s].is_some()).collect()
    }

    /// Successor-evaluation count of the fixed-point computation that built
    /// this scheme.
    pub fn work(&self) -> u64 {
        self.work
    }

    /// Debug export: the transition table as JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(p, &(s, m))| {
                serde_json::json!({
                    "state": s,
                    "memory": m,
                    "up": self.up[p],
                    "const": self.constrainer[p],
                })
            })
            .collect();
        serde_json::json!({
            "memory": self.mem_keys.iter().map(|k| k.to_vec()).collect::<Vec<_>>(),
            "init": self.init,
            "pairs": rows,
        })
    }
}

/// Greatest fixed point of the safety operator over an explicit pair graph.
///
/// A pair survives if it is not `bad` and: for the controller, at least one
/// successor survives; for the adversary, all successors survive. Returns the
/// survivor flags and the number of successor evaluations performed.
pub(crate) fn safety_gfix(owner: &[Owner], succ: &[Vec<usize>], bad: &[bool]) -> (Vec<bool>, u64) {
    let n = succ.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (p, ss) in succ.iter().enumerate() {
        for &q in ss {
            pred[q].push(p);
        }
    }
    let mut alive = vec![true; n];
    let mut count: Vec<usize> = succ.iter().map(Vec::len).collect();
    let mut queue = VecDeque::new();
    for p in 0..n {
        if bad[p] || (owner[p] == Owner::Box && count[p] == 0) {
            alive[p] = false;
            queue.push_back(p);
        }
    }
    let mut work = 0u64;
    while let Some(q) = queue.pop_front() {
        for &p in &pred[q] {
            work += 1;
            if !alive[p] {
                continue;
            }
            match owner[p] {
                Owner::Diamond => {
                    alive[p] = false;
                    queue.push_back(p);
                }
                Owner::Box => {
                    count[p] -= 1;
                    if count[p] == 0 {
                        alive[p] = false;
                        queue.push_back(p);
                    }
                }
            }
        }
    }
    (alive, work)
}

fn moves<'a>(game: &'a Game, scheme: &'a StrategyScheme, s: StateId, m: MemId) -> Result<Option<&'a [StateId]>> {
    Ok(match game.owner(s) {
        Owner::Diamond => Some(game.successors(s)),
        Owner::Box => {
            let c = scheme.constrainer(s, m)?.unwrap_or(&[]);
            if c.is_empty() {
                None
            } else {
                Some(c)
            }
        }
    })
}

/// `Reach(Init)`: pairs reachable from the initial pairs, with controller
/// moves restricted to `Const`.
pub fn reach_init(scheme: &StrategyScheme, game: &Game) -> Result<Vec<(StateId, MemId)>> {
    let mut seen = HashSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..game.num_states() {
        if let Some(m) = scheme.init(s) {
            if seen.insert((s, m)) {
                queue.push_back((s, m));
            }
        }
    }
    while let Some((s, m)) = queue.pop_front() {
        order.push((s, m));
        let next = scheme.up(s, m)?;
        let Some(targets) = moves(game, scheme, s, m)? else {
            return Err(Error::SchemeInvalid(s, m));
        };
        for &t in targets {
            if seen.insert((t, next)) {
                queue.push_back((t, next));
            }
        }
    }
    Ok(order)
}

/// Synchronized product of schemes over the same game.
///
/// Memory tuples are interned on demand starting from the component-wise
/// initial pairs; the constrainer is the intersection of the component
/// constrainers pruned by the greatest fixed point that removes pairs from
/// which the intersection can become empty.
pub fn product_scheme(game: &Game, schemes: &[&StrategyScheme]) -> Result<StrategyScheme> {
    if schemes.is_empty() {
        return Err(Error::BadObjective("product of zero schemes".into()));
    }
    let n = game.num_states();
    let mut tuple_index: HashMap<Vec<MemId>, MemId> = HashMap::new();
    let mut tuples: Vec<Vec<MemId>> = Vec::new();
    let mut intern_tuple = |t: Vec<MemId>, tuples: &mut Vec<Vec<MemId>>| -> MemId {
        *tuple_index.entry(t.clone()).or_insert_with(|| {
            tuples.push(t);
            tuples.len() - 1
        })
    };

    let mut pairs: Vec<(StateId, MemId)> = Vec::new();
    let mut index: HashMap<(StateId, MemId), usize> = HashMap::new();
    let mut up: Vec<MemId> = Vec::new();
    let mut succ: Vec<Vec<usize>> = Vec::new();
    let mut owner: Vec<Owner> = Vec::new();
    let mut queue = VecDeque::new();

    let mut candidate = vec![None; n];
    for s in 0..n {
        let comps: Option<Vec<MemId>> = schemes.iter().map(|g| g.init(s)).collect();
        if let Some(t) = comps {
            let m = intern_tuple(t, &mut tuples);
            candidate[s] = Some(m);
            index.insert((s, m), pairs.len());
            pairs.push((s, m));
            queue.push_back(pairs.len() - 1);
        }
    }

    while let Some(p) = queue.pop_front() {
        let (s, m) = pairs[p];
        let comps = tuples[m].clone();
        let next: Vec<MemId> = comps
            .iter()
            .zip(schemes)
            .map(|(&mi, g)| g.up(s, mi))
            .collect::<Result<_>>()?;
        let next = intern_tuple(next, &mut tuples);
        let targets: Vec<StateId> = match game.owner(s) {
            Owner::Diamond => game.successors(s).to_vec(),
            Owner::Box => {
                let mut allowed: Option<Vec<StateId>> = None;
                for (&mi, g) in comps.iter().zip(schemes) {
                    let c = g.constrainer(s, mi)?.unwrap_or(&[]);
                    allowed = Some(match allowed {
                        None => c.to_vec(),
                        Some(a) => a.into_iter().filter(|t| c.contains(t)).collect(),
                    });
                }
                allowed.unwrap_or_default()
            }
        };
        let mut out = Vec::with_capacity(targets.len());
        for t in targets {
            let q = *index.entry((t, next)).or_insert_with(|| {
                pairs.push((t, next));
                queue.push_back(pairs.len() - 1);
                pairs.len() - 1
            });
            out.push(q);
        }
        if up.len() <= p {
            up.resize(p + 1, 0);
            succ.resize(p + 1, Vec::new());
        }
        up[p] = next;
        succ[p] = out;
    }
    up.resize(pairs.len(), 0);
    succ.resize(pairs.len(), Vec::new());
    owner.extend(pairs.iter().map(|&(s, _)| game.owner(s)));

    let bad = vec![false; pairs.len()];
    let (alive, work) = safety_gfix(&owner, &succ, &bad);
    let constrainer = (0..pairs.len())
        .map(|p| match owner[p] {
            Owner::Diamond => None,
            Owner::Box => Some(succ[p].iter().filter(|&&q| alive[q]).map(|&q| pairs[q].0).collect()),
        })
        .collect();
    let init = (0..n)
        .map(|s| candidate[s].filter(|&m| alive[index[&(s, m)]]))
        .collect();
    let mem_keys = tuples
        .into_iter()
        .map(|t| t.into_iter().map(|x| x as i64).collect::<Vec<_>>().into_boxed_slice())
        .collect();
    Ok(StrategyScheme::from_parts(
        n,
        mem_keys,
        pairs,
        index,
        up,
        constrainer,
        init,
        work,
    ))
}

/// The game `G_Γ` over the materialized pairs of a scheme.
#[derive(Debug, Clone)]
pub struct ProductGame {
    pub game: Game,
    back: Vec<(StateId, MemId)>,
    index: HashMap<(StateId, MemId), usize>,
}

impl ProductGame {
    pub fn pair(&self, p: usize) -> (StateId, MemId) {
        self.back[p]
    }

    pub fn pair_id(&self, s: StateId, m: MemId) -> Option<usize> {
        self.index.get(&(s, m)).copied()
    }

    pub fn num_states(&self) -> usize {
        self.back.len()
    }

    /// Reward of a product state is the reward of its first projection.
    pub fn lift(&self, reward: &RewardFunction) -> RewardFunction {
        reward.lift(self.back.iter().map(|&(s, _)| s))
    }
}

pub fn product_game(game: &Game, scheme: &StrategyScheme) -> Result<ProductGame> {
    let back: Vec<(StateId, MemId)> = scheme.pairs().to_vec();
    let index: HashMap<(StateId, MemId), usize> = back.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut edges = Vec::new();
    for (p, &(s, m)) in back.iter().enumerate() {
        let next = scheme.up(s, m)?;
        match moves(game, scheme, s, m)? {
            Some(targets) => {
                for &t in targets {
                    let q = *index.get(&(t, next)).ok_or(Error::Unmaterialized(t, next))?;
                    edges.push((p, q));
                }
            }
            None => edges.push((p, p)),
        }
    }
    let owners = back.iter().map(|&(s, _)| game.owner(s)).collect();
    let labels = back
        .iter()
        .map(|&(s, m)| format!("({},{})", game.label(s), m))
        .collect();
    let g = Game::new(owners, &edges)?.with_labels(labels);
    Ok(ProductGame { game: g, back, index })
}

/// A finite-memory controller strategy for a fixed initial state.
///
/// Memory elements are scheme memory ids; only configurations reachable from
/// `(initial, initial_memory)` are stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteStrategy {
    pub initial: StateId,
    pub initial_memory: MemId,
    /// `(state, memory) -> next memory`.
    pub update: BTreeMap<(StateId, MemId), MemId>,
    /// `(controller state, memory) -> chosen successor`.
    pub choice: BTreeMap<(StateId, MemId), StateId>,
}

impl FiniteStrategy {
    pub fn next_memory(&self, s: StateId, m: MemId) -> Option<MemId> {
        self.update.get(&(s, m)).copied()
    }

    pub fn choose(&self, s: StateId, m: MemId) -> Option<StateId> {
        self.choice.get(&(s, m)).copied()
    }

    /// The outcome against a positional adversary (`adversary[s]` for every
    /// adversary state). The joint configuration space is finite, so the
    /// outcome is a lasso.
    pub fn outcome(&self, game: &Game, adversary: &[StateId]) -> Result<Lasso> {
        let mut seen: HashMap<(StateId, MemId), usize> = HashMap::new();
        let mut states = Vec::new();
        let (mut s, mut m) = (self.initial, self.initial_memory);
        loop {
            if let Some(&start) = seen.get(&(s, m)) {
                let cycle = states.split_off(start);
                return Ok(Lasso::new(states, cycle));
            }
            seen.insert((s, m), states.len());
            states.push(s);
            let t = match game.owner(s) {
                Owner::Box => self
                    .choose(s, m)
                    .ok_or_else(|| Error::BadStrategy(format!("no choice at ({s}, {m})")))?,
                Owner::Diamond => adversary[s],
            };
            m = self
                .next_memory(s, m)
                .ok_or_else(|| Error::BadStrategy(format!("no update at ({s}, {m})")))?;
            s = t;
        }
    }

    /// JSON strategy file: `{"initial", "memory", "choice"}`.
    pub fn to_file(&self) -> StrategyFile {
        StrategyFile {
            initial: self.initial,
            initial_memory: self.initial_memory,
            memory: self.update.iter().map(|(&(s, m), &n)| [s, m, n]).collect(),
            choice: self.choice.iter().map(|(&(s, m), &t)| [s, m, t]).collect(),
        }
    }

    pub fn from_file(f: &StrategyFile) -> Self {
        FiniteStrategy {
            initial: f.initial,
            initial_memory: f.initial_memory,
            update: f.memory.iter().map(|r| ((r[0], r[1]), r[2])).collect(),
            choice: f.choice.iter().map(|r| ((r[0], r[1]), r[2])).collect(),
        }
    }
}

/// Serialized [`FiniteStrategy`]: rows are `[state, memory, next memory]`
/// and `[state, memory, successor]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub initial: StateId,
    #[serde(default)]
    pub initial_memory: MemId,
    pub memory: Vec<[usize; 3]>,
    pub choice: Vec<[usize; 3]>,
}

/// `σ[τ, s]` for a positional strategy `τ` of the product game, given as a
/// successor product state for every controller product state.
pub fn induce_strategy(
    game: &Game,
    scheme: &StrategyScheme,
    product: &ProductGame,
    tau: &[Option<usize>],
    s: StateId,
) -> Result<FiniteStrategy> {
    let m0 = scheme.init(s).ok_or(Error::NotWinning(s))?;
    let mut update = BTreeMap::new();
    let mut choice = BTreeMap::new();
    let mut queue = VecDeque::from([(s, m0)]);
    let mut seen = HashSet::from([(s, m0)]);
    while let Some((t, m)) = queue.pop_front() {
        let next = scheme.up(t, m)?;
        update.insert((t, m), next);
        let targets: Vec<StateId> = match game.owner(t) {
            Owner::Diamond => game.successors(t).to_vec(),
            Owner::Box => {
                let p = product.pair_id(t, m).ok_or(Error::Unmaterialized(t, m))?;
                let q = tau
                    .get(p)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::BadStrategy(format!("no choice at product state {p}")))?;
                if !product.game.has_edge(p, q) {
                    return Err(Error::BadStrategy(format!("{p} -> {q} is not a product edge")));
                }
                let (succ_state, succ_mem) = product.pair(q);
                if succ_mem != next || !game.has_edge(t, succ_state) {
                    // The self-loop of an unconstrained pair has no counterpart in the game.
                    return Err(Error::SchemeInvalid(t, m));
                }
                choice.insert((t, m), succ_state);
                vec![succ_state]
            }
        };
        for u in targets {
            if seen.insert((u, next)) {
                queue.push_back((u, next));
            }
        }
    }
    Ok(FiniteStrategy {
        initial: s,
        initial_memory: m0,
        update,
        choice,
    })
}

/// Whether `strategy` is admitted by the scheme in `s`: `Init(s)` is defined
/// and every consistent finite path keeps the controller inside `Const`.
pub fn admits(game: &Game, scheme: &StrategyScheme, s: StateId, strategy: &FiniteStrategy) -> bool {
    let Some(m0) = scheme.init(s) else {
        return false;
    };
    if strategy.initial != s {
        return false;
    }
    // Joint exploration of (state, strategy memory, scheme memory).
    let start = (s, strategy.initial_memory, m0);
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((t, sm, gm)) = queue.pop_front() {
        let (Some(sm2), Ok(gm2)) = (strategy.next_memory(t, sm), scheme.up(t, gm)) else {
            return false;
        };
        let targets: Vec<StateId> = match game.owner(t) {
            Owner::Diamond => game.successors(t).to_vec(),
            Owner::Box => {
                let Some(u) = strategy.choose(t, sm) else {
                    return false;
                };
                match scheme.constrainer(t, gm) {
                    Ok(Some(c)) if c.contains(&u) => vec![u],
                    _ => return false,
                }
            }
        };
        for u in targets {
            let k = (u, sm2, gm2);
            if seen.insert(k) {
                queue.push_back(k);
            }
        }
    }
    true
}

/// Whether a finite play from its first state stays inside `Const` at every
/// controller step.
pub fn admits_play(game: &Game, scheme: &StrategyScheme, play: &[StateId]) -> bool {
    let Some(&s) = play.first() else {
        return false;
    };
    let Some(mut m) = scheme.init(s) else {
        return false;
    };
    for w in play.windows(2) {
        let (t, u) = (w[0], w[1]);
        if !game.has_edge(t, u) {
            return false;
        }
        if game.owner(t) == Owner::Box {
            match scheme.constrainer(t, m) {
                Ok(Some(c)) if c.contains(&u) => {}
                _ => return false,
            }
        }
        match scheme.up(t, m) {
            Ok(n) => m = n,
            Err(_) => return false,
        }
    }
    true
}
