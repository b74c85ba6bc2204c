//! One-dimensional mean-payoff games and their combination with
//! window-stability objectives.
//!
//! Thresholds are decided by the energy-game reduction: `mp ≥ p/q` holds from
//! a state iff the controller has finite initial credit for the integer
//! weights `q·r − p·scale`. Values are recovered by a Farey search over
//! thresholds whose denominators are bounded by the number of states.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::game::{Game, Owner, RewardFunction, StateId};
use crate::objective::{MeanPayoffObjective, MultiObjective};
use crate::rational::Rational;
use crate::scheme::{induce_strategy, product_game, product_scheme, FiniteStrategy, ProductGame, StrategyScheme};
use crate::window::build_scheme_capped;

/// Winning region and positional witness for a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdSolution {
    pub winning: Vec<bool>,
    /// Successor chosen at every controller state (argmin of the credit).
    pub strategy: Vec<Option<StateId>>,
    /// Minimal initial credit per state; `None` for losing states.
    pub credit: Vec<Option<i64>>,
    pub lifts: u64,
}

impl ThresholdSolution {
    pub fn winning_states(&self) -> Vec<StateId> {
        (0..self.winning.len()).filter(|&s| self.winning[s]).collect()
    }
}

/// Minimal initial credit for state-weighted energy games.
///
/// The credit needed at `v` is `max(0, f(v') − w(v))` for the best successor
/// `v'` of the owner; credits above the sum of negative weights are infinite.
pub fn energy_credit(game: &Game, weights: &[i64]) -> ThresholdSolution {
    let n = game.num_states();
    let top: i64 = weights.iter().filter(|&&w| w < 0).map(|w| -w).sum();
    const INF: i64 = i64::MAX;
    let mut f = vec![0i64; n];
    let lift = |f: &[i64], v: StateId| -> i64 {
        let succ = game.successors(v).iter().map(|&t| f[t]);
        let best = match game.owner(v) {
            Owner::Box => succ.min().unwrap(),
            Owner::Diamond => succ.max().unwrap(),
        };
        if best == INF {
            return INF;
        }
        let need = (best - weights[v]).max(0);
        if need > top {
            INF
        } else {
            need
        }
    };
    let mut queue: VecDeque<StateId> = VecDeque::new();
    let mut queued = vec![false; n];
    for v in 0..n {
        if lift(&f, v) > f[v] {
            queue.push_back(v);
            queued[v] = true;
        }
    }
    let mut lifts = 0u64;
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let val = lift(&f, v);
        if val <= f[v] {
            continue;
        }
        f[v] = val;
        lifts += 1;
        for &u in game.predecessors(v) {
            if !queued[u] && f[u] != INF && lift(&f, u) > f[u] {
                queued[u] = true;
                queue.push_back(u);
            }
        }
    }
    // Each state is lifted at most top + 1 times before reaching infinity.
    assert!(lifts <= n as u64 * (top as u64 + 1), "energy lift bound exceeded");
    let strategy = (0..n)
        .map(|v| match game.owner(v) {
            Owner::Box => game.successors(v).iter().copied().min_by_key(|&t| f[t]),
            Owner::Diamond => None,
        })
        .collect();
    ThresholdSolution {
        winning: f.iter().map(|&x| x != INF).collect(),
        strategy,
        credit: f.iter().map(|&x| (x != INF).then_some(x)).collect(),
        lifts,
    }
}

fn threshold_weights(reward: &RewardFunction, b: &Rational) -> Result<Vec<i64>> {
    let scale = BigInt::from(reward.scale());
    (0..reward.num_states())
        .map(|s| {
            let w = b.denom() * BigInt::from(reward.raw(s)[0]) - b.numer() * &scale;
            w.to_i64()
                .filter(|w| w.abs() < i64::MAX / (4 * reward.num_states() as i64 + 4))
                .ok_or_else(|| Error::Overflow(format!("threshold weight for {b}")))
        })
        .collect()
}

/// Winning region for `mp ≥ b` with a positional witness.
pub fn mp_threshold(game: &Game, reward: &RewardFunction, b: &Rational) -> Result<ThresholdSolution> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    Ok(energy_credit(game, &threshold_weights(reward, b)?))
}

/// Optimal mean-payoff value per state.
pub fn mp_value(game: &Game, reward: &RewardFunction) -> Result<Vec<Rational>> {
    let states: Vec<StateId> = (0..game.num_states()).collect();
    mp_value_of(game, reward, &states)
}

/// Optimal values for the listed states only.
pub fn mp_value_of(game: &Game, reward: &RewardFunction, states: &[StateId]) -> Result<Vec<Rational>> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    let mut search = ValueSearch {
        game,
        reward,
        cache: HashMap::new(),
    };
    let n = game.num_states() as i64;
    let lo = reward.raw_values().iter().map(|v| v[0]).min().unwrap();
    let hi = reward.raw_values().iter().map(|v| v[0]).max().unwrap();
    let scale = Rational::integer(reward.scale());
    states
        .iter()
        .map(|&s| Ok(search.value(s, lo, hi, n)? / &scale))
        .collect()
}

/// Farey search over stored-unit thresholds `x` (semantic threshold
/// `x / scale`), sharing threshold solutions between states.
struct ValueSearch<'a> {
    game: &'a Game,
    reward: &'a RewardFunction,
    cache: HashMap<(i64, i64), Vec<bool>>,
}

impl ValueSearch<'_> {
    fn test(&mut self, s: StateId, p: i64, q: i64) -> Result<bool> {
        if !self.cache.contains_key(&(p, q)) {
            let b = Rational::new(p, q) / &Rational::integer(self.reward.scale());
            let sol = mp_threshold(self.game, self.reward, &b)?;
            self.cache.insert((p, q), sol.winning);
        }
        Ok(self.cache[&(p, q)][s])
    }

    /// Value of `s` in stored units: a fraction with denominator at most `n`
    /// inside `[lo, hi]`.
    fn value(&mut self, s: StateId, lo: i64, hi: i64, n: i64) -> Result<Rational> {
        // Largest integer a with test(a) true.
        let (mut a, mut b) = (lo, hi + 1);
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if self.test(s, mid, 1)? {
                a = mid;
            } else {
                b = mid;
            }
        }
        if a == hi {
            return Ok(Rational::integer(a));
        }
        // Invariant: value in [L, R), L and R Farey neighbours.
        let (mut lp, mut lq, mut rp, mut rq) = (a, 1i64, a + 1, 1i64);
        loop {
            if lq + rq > n {
                return Ok(Rational::new(lp, lq));
            }
            // Move L towards R: largest k with test((lp + k rp)/(lq + k rq)).
            let kmax = (n - lq) / rq;
            let k = self.last_true(kmax, |this, k| this.test(s, lp + k * rp, lq + k * rq))?;
            if k > 0 {
                lp += k * rp;
                lq += k * rq;
                continue;
            }
            // Move R towards L: largest k with the mediant still failing.
            let kmax = (n - rq) / lq;
            let k = self.last_true(kmax, |this, k| Ok(!this.test(s, k * lp + rp, k * lq + rq)?))?;
            if k == 0 {
                return Ok(Rational::new(lp, lq));
            }
            rp += k * lp;
            rq += k * lq;
        }
    }

    /// Largest `k` in `1..=kmax` with `pred(k)` for a monotone predicate that
    /// holds up to some point, or 0.
    fn last_true(&mut self, kmax: i64, mut pred: impl FnMut(&mut Self, i64) -> Result<bool>) -> Result<i64> {
        if kmax < 1 || !pred(self, 1)? {
            return Ok(0);
        }
        // Exponential probe, then bisection.
        let mut good = 1;
        let mut bad = None;
        while bad.is_none() {
            let next = (good * 2).min(kmax);
            if next == good {
                return Ok(good);
            }
            if pred(self, next)? {
                good = next;
            } else {
                bad = Some(next);
            }
        }
        let mut bad = bad.unwrap();
        while bad - good > 1 {
            let mid = good + (bad - good) / 2;
            if pred(self, mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    }
}

/// Scheme for a conjunction, materialized from `roots`.
pub fn build_multi_scheme(game: &Game, delta: &MultiObjective, roots: &[StateId]) -> Result<StrategyScheme> {
    build_multi_scheme_capped(game, delta, roots, usize::MAX)
}

/// [`build_multi_scheme`] failing with [`Error::TooLarge`] when a conjunct's
/// scheme or the product has more than `max_pairs` pairs.
pub fn build_multi_scheme_capped(
    game: &Game,
    delta: &MultiObjective,
    roots: &[StateId],
    max_pairs: usize,
) -> Result<StrategyScheme> {
    let schemes = delta
        .conjuncts()
        .iter()
        .map(|phi| build_scheme_capped(game, phi, roots, max_pairs))
        .collect::<Result<Vec<_>>>()?;
    if schemes.len() == 1 {
        return Ok(schemes.into_iter().next().unwrap());
    }
    let refs: Vec<&StrategyScheme> = schemes.iter().collect();
    let product = product_scheme(game, &refs)?;
    if product.num_pairs() > max_pairs {
        return Err(Error::TooLarge(format!("more than {max_pairs} product scheme pairs")));
    }
    Ok(product)
}

#[derive(Debug, Clone)]
pub struct CombinedSolution {
    pub achievable: bool,
    pub strategy: Option<FiniteStrategy>,
    pub scheme: StrategyScheme,
    pub product: ProductGame,
}

/// Decides `Δ ∧ (ρ, b)` from `s` on the product with the permissive scheme
/// of `Δ`; on success returns the induced finite-memory strategy.
pub fn solve_combined(
    game: &Game,
    delta: &MultiObjective,
    psi: &MeanPayoffObjective,
    s: StateId,
) -> Result<CombinedSolution> {
    if s >= game.num_states() {
        return Err(Error::UnknownState(s));
    }
    psi.reward.check_states(game)?;
    solve_combined_with(game, build_multi_scheme(game, delta, &[s])?, psi, s)
}

/// [`solve_combined`] over an already built scheme whose `Init` covers `s`.
pub fn solve_combined_with(
    game: &Game,
    scheme: StrategyScheme,
    psi: &MeanPayoffObjective,
    s: StateId,
) -> Result<CombinedSolution> {
    psi.reward.check_states(game)?;
    let product = product_game(game, &scheme)?;
    let Some(m0) = scheme.init(s) else {
        return Ok(CombinedSolution {
            achievable: false,
            strategy: None,
            scheme,
            product,
        });
    };
    let lifted = product.lift(&psi.reward);
    let sol = mp_threshold(&product.game, &lifted, &psi.bound)?;
    let p0 = product.pair_id(s, m0).ok_or(Error::Unmaterialized(s, m0))?;
    let strategy = if sol.winning[p0] {
        Some(induce_strategy(game, &scheme, &product, &sol.strategy, s)?)
    } else {
        None
    };
    Ok(CombinedSolution {
        achievable: strategy.is_some(),
        strategy,
        scheme,
        product,
    })
}

/// Largest `b` such that `Δ ∧ (ρ, b)` is achievable from `s`; `None` when
/// `Δ` itself is not.
pub fn max_bound(game: &Game, delta: &MultiObjective, reward: &RewardFunction, s: StateId) -> Result<Option<Rational>> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    if s >= game.num_states() {
        return Err(Error::UnknownState(s));
    }
    max_bound_with(game, &build_multi_scheme(game, delta, &[s])?, reward, s)
}

/// [`max_bound`] over an already built scheme whose `Init` covers `s`.
pub fn max_bound_with(
    game: &Game,
    scheme: &StrategyScheme,
    reward: &RewardFunction,
    s: StateId,
) -> Result<Option<Rational>> {
    reward.require_scalar()?;
    reward.check_states(game)?;
    let Some(m0) = scheme.init(s) else {
        return Ok(None);
    };
    let product = product_game(game, scheme)?;
    let p0 = product.pair_id(s, m0).ok_or(Error::Unmaterialized(s, m0))?;
    let sub = reachable_from(&product.game, p0);
    let lifted = product.lift(reward);
    let sub_reward = lifted.lift(sub.iter().copied());
    let sub_game = restrict(&product.game, &sub)?;
    Ok(Some(mp_value_of(&sub_game, &sub_reward, &[0])?.remove(0)))
}

/// States reachable from `start`, starting with `start`.
fn reachable_from(game: &Game, start: StateId) -> Vec<StateId> {
    let mut seen = HashSet::from([start]);
    let mut order = vec![start];
    let mut i = 0;
    while i < order.len() {
        for &t in game.successors(order[i]) {
            if seen.insert(t) {
                order.push(t);
            }
        }
        i += 1;
    }
    order
}

/// The subgame on a successor-closed state list.
fn restrict(game: &Game, states: &[StateId]) -> Result<Game> {
    let index: HashMap<StateId, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut edges = Vec::new();
    for (i, &s) in states.iter().enumerate() {
        for t in game.successors(s) {
            edges.push((i, index[t]));
        }
    }
    Game::new(states.iter().map(|&s| game.owner(s)).collect(), &edges)
}
