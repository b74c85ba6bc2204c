//! Permissive strategy schemes for window-stability objectives.
//!
//! Memory elements are `(i, j, α_0, …, α_{ℓ-1})` with `ℓ = W/D`: `i` counts
//! steps since the last checkpoint, `j` counts open windows (saturating at
//! `ℓ − 1`) and `α_r` accumulates the rewards of the `r`-th open window with
//! addition capped at `maxr·(W − 1)`. The scheme keeps exactly the
//! `(state, memory)` pairs of the greatest fixed point of the safety operator
//! that removes pairs closing a window outside `[μW, νW]`.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::game::{Game, Owner, StateId};
use crate::objective::WindowObjective;
use crate::scheme::{safety_gfix, MemId, StrategyScheme};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MemoryElement {
    /// Steps since the last checkpoint, in `0..D`.
    pub phase: usize,
    /// Open-window counter, in `0..ℓ`.
    pub counter: usize,
    /// `ℓ` accumulated reward vectors (normalized, non-negative units).
    pub alphas: Vec<Vec<i64>>,
}

impl MemoryElement {
    pub fn initial(ell: usize, dim: usize) -> Self {
        MemoryElement {
            phase: 0,
            counter: 0,
            alphas: vec![vec![0; dim]; ell],
        }
    }

    /// Decodes a window-scheme memory key.
    pub fn from_key(key: &[i64], dim: usize) -> Self {
        MemoryElement {
            phase: key[0] as usize,
            counter: key[1] as usize,
            alphas: key[2..].chunks(dim).map(<[i64]>::to_vec).collect(),
        }
    }

    pub fn to_key(&self) -> Box<[i64]> {
        let mut k = vec![self.phase as i64, self.counter as i64];
        k.extend(self.alphas.iter().flatten());
        k.into_boxed_slice()
    }
}

impl fmt::Display for MemoryElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}", self.phase, self.counter)?;
        for a in &self.alphas {
            write!(f, ",{a:?}")?;
        }
        write!(f, ")")
    }
}

/// Integer data of a window objective, normalized so that rewards are
/// non-negative: every reward is shifted by `shift` and the window-sum
/// bounds by `W·shift`.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    pub window: usize,
    pub checkpoint: usize,
    pub ell: usize,
    pub dim: usize,
    pub shift: i64,
    pub rewards: Vec<Vec<i64>>,
    pub cap: i64,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl WindowKernel {
    pub fn new(phi: &WindowObjective) -> Result<Self> {
        let shift = (-phi.reward.min_raw()).max(0);
        let rewards: Vec<Vec<i64>> = phi
            .reward
            .raw_values()
            .iter()
            .map(|v| v.iter().map(|x| x + shift).collect())
            .collect();
        let maxr = rewards.iter().flatten().copied().max().unwrap_or(0);
        let (lo, hi) = phi.raw_sum_bounds()?;
        let w = phi.window as i64;
        Ok(WindowKernel {
            window: phi.window,
            checkpoint: phi.checkpoint,
            ell: phi.checkpoints_per_window(),
            dim: phi.dim(),
            shift,
            cap: maxr * (w - 1),
            lo: lo.iter().map(|x| x.saturating_add(w * shift)).collect(),
            hi: hi.iter().map(|x| x.saturating_add(w * shift)).collect(),
            rewards,
        })
    }

    pub fn initial_key(&self) -> Box<[i64]> {
        MemoryElement::initial(self.ell, self.dim).to_key()
    }

    fn add(&self, a: i64, b: i64) -> i64 {
        (a + b).min(self.cap)
    }

    /// `Up(s, m)` on encoded memory.
    pub fn update_key(&self, s: StateId, m: &[i64]) -> Box<[i64]> {
        let (d, ell, k) = (self.checkpoint, self.ell, self.dim);
        let (i, j) = (m[0] as usize, m[1] as usize);
        let alpha = |r: usize| &m[2 + r * k..2 + (r + 1) * k];
        let r = &self.rewards[s];
        let mut out = Vec::with_capacity(m.len());
        let push_added = |out: &mut Vec<i64>, a: &[i64]| {
            out.extend(a.iter().zip(r).map(|(&x, &y)| self.add(x, y)));
        };
        if i + 2 <= d {
            out.extend([(i + 1) as i64, j as i64]);
            for q in 0..ell {
                if q <= j {
                    push_added(&mut out, alpha(q));
                } else {
                    out.extend_from_slice(alpha(q));
                }
            }
        } else if j + 2 <= ell {
            out.extend([0, (j + 1) as i64]);
            out.extend(std::iter::repeat_n(0, k));
            for q in 0..ell - 1 {
                if q <= j {
                    push_added(&mut out, alpha(q));
                } else {
                    out.extend_from_slice(alpha(q));
                }
            }
        } else {
            out.extend([0, (ell - 1) as i64]);
            out.extend(std::iter::repeat_n(0, k));
            for q in 0..ell - 1 {
                push_added(&mut out, alpha(q));
            }
        }
        out.into_boxed_slice()
    }

    /// Whether `(s, m)` does not close a window out of bounds.
    pub fn check_key(&self, s: StateId, m: &[i64]) -> bool {
        let (i, j) = (m[0] as usize, m[1] as usize);
        if i + 1 != self.checkpoint || j + 1 != self.ell {
            return true;
        }
        let k = self.dim;
        let last = &m[2 + (self.ell - 1) * k..2 + self.ell * k];
        last.iter()
            .zip(&self.rewards[s])
            .enumerate()
            .all(|(x, (&a, &r))| (self.lo[x]..=self.hi[x]).contains(&(a + r)))
    }
}

/// `Up(s, m)` for an objective.
pub fn mem_update(s: StateId, m: &MemoryElement, phi: &WindowObjective) -> Result<MemoryElement> {
    let kernel = WindowKernel::new(phi)?;
    Ok(MemoryElement::from_key(&kernel.update_key(s, &m.to_key()), kernel.dim))
}

/// Whether `(s, m)` passes the window test (only checked when a window closes).
pub fn window_check(s: StateId, m: &MemoryElement, phi: &WindowObjective) -> Result<bool> {
    let kernel = WindowKernel::new(phi)?;
    Ok(kernel.check_key(s, &m.to_key()))
}

/// Permissive scheme for `phi`, materialized from every state.
pub fn build_scheme(game: &Game, phi: &WindowObjective) -> Result<StrategyScheme> {
    let roots: Vec<StateId> = (0..game.num_states()).collect();
    build_scheme_rooted(game, phi, &roots)
}

/// Permissive scheme materialized only from `(s, m_0)` for `s ∈ roots`.
///
/// `Init` is defined only on roots; on those it coincides with the full
/// construction because the fixed point is computed over the whole forward
/// closure of the roots under unconstrained moves.
pub fn build_scheme_rooted(game: &Game, phi: &WindowObjective, roots: &[StateId]) -> Result<StrategyScheme> {
    build_scheme_capped(game, phi, roots, usize::MAX)
}

/// [`build_scheme_rooted`] failing with [`Error::TooLarge`] once more than
/// `max_pairs` (state, memory) pairs are materialized.
pub fn build_scheme_capped(
    game: &Game,
    phi: &WindowObjective,
    roots: &[StateId],
    max_pairs: usize,
) -> Result<StrategyScheme> {
    phi.check_game(game)?;
    let kernel = WindowKernel::new(phi)?;
    let n = game.num_states();

    let mut keys: Vec<Box<[i64]>> = Vec::new();
    let mut key_index: HashMap<Box<[i64]>, MemId> = HashMap::new();
    let mut intern = |k: Box<[i64]>, keys: &mut Vec<Box<[i64]>>| -> MemId {
        if let Some(&m) = key_index.get(&k) {
            return m;
        }
        keys.push(k.clone());
        key_index.insert(k, keys.len() - 1);
        keys.len() - 1
    };
    let m0 = intern(kernel.initial_key(), &mut keys);

    let mut pairs: Vec<(StateId, MemId)> = Vec::new();
    let mut index: HashMap<(StateId, MemId), usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for &s in roots {
        if index.contains_key(&(s, m0)) {
            continue;
        }
        index.insert((s, m0), pairs.len());
        pairs.push((s, m0));
        queue.push_back(pairs.len() - 1);
    }
    let mut up = Vec::new();
    let mut succ: Vec<Vec<usize>> = Vec::new();
    let mut bad = Vec::new();
    // Pairs are numbered in BFS order, so `p` equals the number processed.
    while let Some(p) = queue.pop_front() {
        debug_assert_eq!(p, up.len());
        if pairs.len() > max_pairs {
            return Err(Error::TooLarge(format!("more than {max_pairs} scheme pairs")));
        }
        let (s, m) = pairs[p];
        bad.push(!kernel.check_key(s, &keys[m]));
        let next_key = kernel.update_key(s, &keys[m]);
        let next = intern(next_key, &mut keys);
        up.push(next);
        let mut out = Vec::with_capacity(game.successors(s).len());
        for &t in game.successors(s) {
            let q = *index.entry((t, next)).or_insert_with(|| {
                pairs.push((t, next));
                queue.push_back(pairs.len() - 1);
                pairs.len() - 1
            });
            out.push(q);
        }
        succ.push(out);
    }

    let owner: Vec<Owner> = pairs.iter().map(|&(s, _)| game.owner(s)).collect();
    let (alive, work) = safety_gfix(&owner, &succ, &bad);
    let constrainer = (0..pairs.len())
        .map(|p| match owner[p] {
            Owner::Diamond => None,
            Owner::Box => Some(succ[p].iter().filter(|&&q| alive[q]).map(|&q| pairs[q].0).collect()),
        })
        .collect();
    let mut init = vec![None; n];
    for &s in roots {
        if alive[index[&(s, m0)]] {
            init[s] = Some(m0);
        }
    }
    Ok(StrategyScheme::from_parts(
        n,
        keys,
        pairs,
        index,
        up,
        constrainer,
        init,
        work,
    ))
}

/// Decodes memory element `m` of a scheme built by [`build_scheme`].
pub fn memory_element(scheme: &StrategyScheme, m: MemId, dim: usize) -> MemoryElement {
    MemoryElement::from_key(scheme.mem_key(m), dim)
}
