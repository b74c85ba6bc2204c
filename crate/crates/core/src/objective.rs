//! Objective descriptions: window-stability, mean-payoff and variance-stability.

use num_bigint::BigInt;
use num_traits::{One, Pow, ToPrimitive};

use crate::error::{Error, Result};
use crate::game::{Game, RewardFunction};
use crate::rational::Rational;

/// A window-stability objective `(W, D, ρ, μ, ν)`.
///
/// A run satisfies it when every checkpoint window (positions `ℓ·D` to
/// `ℓ·D + W − 1`, `ℓ ≥ 0`) has local mean payoff within `[μ, ν]` in every
/// dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowObjective {
    pub window: usize,
    pub checkpoint: usize,
    pub reward: RewardFunction,
    pub mu: Vec<Rational>,
    pub nu: Vec<Rational>,
}

impl WindowObjective {
    pub fn new(
        window: usize,
        checkpoint: usize,
        reward: RewardFunction,
        mu: Vec<Rational>,
        nu: Vec<Rational>,
    ) -> Result<Self> {
        if window == 0 || checkpoint == 0 {
            return Err(Error::BadObjective("W and D must be positive".into()));
        }
        if !window.is_multiple_of(checkpoint) {
            return Err(Error::BadObjective(format!(
                "D = {checkpoint} does not divide W = {window}"
            )));
        }
        if mu.len() != reward.dim() || nu.len() != reward.dim() {
            return Err(Error::BadObjective(format!(
                "bounds have length {}/{} but reward {} has dimension {}",
                mu.len(),
                nu.len(),
                reward.name(),
                reward.dim()
            )));
        }
        Ok(WindowObjective {
            window,
            checkpoint,
            reward,
            mu,
            nu,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(
        window: usize,
        checkpoint: usize,
        reward: RewardFunction,
        mu: Rational,
        nu: Rational,
    ) -> Result<Self> {
        WindowObjective::new(window, checkpoint, reward, vec![mu], vec![nu])
    }

    /// Number of checkpoints per window, `W / D`.
    pub fn checkpoints_per_window(&self) -> usize {
        self.window / self.checkpoint
    }

    pub fn dim(&self) -> usize {
        self.reward.dim()
    }

    pub(crate) fn check_game(&self, game: &Game) -> Result<()> {
        self.reward.check_states(game)
    }

    /// Inclusive bounds on a window sum of stored (unscaled) rewards:
    /// `ceil(μ·W·scale) ..= floor(ν·W·scale)` per dimension.
    pub fn raw_sum_bounds(&self) -> Result<(Vec<i64>, Vec<i64>)> {
        let factor = Rational::integer(self.window as i64 * self.reward.scale());
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (mu, nu) in self.mu.iter().zip(&self.nu) {
            lo.push(clamp_i64((mu * &factor).ceil()));
            hi.push(clamp_i64((nu * &factor).floor()));
        }
        Ok((lo, hi))
    }

    /// Memory bound `W · (maxr·W)^{k·W/D}`, with `maxr` taken over the
    /// non-negative normalization of the stored rewards and at least 1.
    pub fn memory_bound(&self) -> BigInt {
        let shift = (-self.reward.min_raw()).max(0);
        let maxr = (self.reward.maxr() + shift).max(1);
        let base = BigInt::from(maxr) * BigInt::from(self.window);
        let exp = (self.dim() * self.checkpoints_per_window()) as u32;
        BigInt::from(self.window) * Pow::pow(base, exp)
    }

    /// The objective after [`affine_shift`](crate::semantics::affine_shift).
    pub fn shifted(&self, t: &Rational, c: &Rational) -> Result<Self> {
        let (reward, mu, nu) = crate::semantics::affine_shift(&self.reward, &self.mu, &self.nu, t, c)?;
        WindowObjective::new(self.window, self.checkpoint, reward, mu, nu)
    }
}

fn clamp_i64(v: BigInt) -> i64 {
    v.to_i64().unwrap_or(if v.sign() == num_bigint::Sign::Minus {
        i64::MIN / 4
    } else {
        i64::MAX / 4
    })
}

/// Conjunction of window-stability objectives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiObjective {
    conjuncts: Vec<WindowObjective>,
}

impl MultiObjective {
    pub fn new(conjuncts: Vec<WindowObjective>) -> Result<Self> {
        if conjuncts.is_empty() {
            return Err(Error::BadObjective("empty conjunction".into()));
        }
        Ok(MultiObjective { conjuncts })
    }

    pub fn single(phi: WindowObjective) -> Self {
        MultiObjective { conjuncts: vec![phi] }
    }

    pub fn conjuncts(&self) -> &[WindowObjective] {
        &self.conjuncts
    }

    /// `M_Δ = Π W_i·(maxr_i·W_i)^{k_i·W_i/D_i}`.
    pub fn memory_bound(&self) -> BigInt {
        self.conjuncts
            .iter()
            .fold(BigInt::one(), |acc, phi| acc * phi.memory_bound())
    }

    pub fn shifted(&self, t: &Rational, c: &Rational) -> Result<Self> {
        let conjuncts = self
            .conjuncts
            .iter()
            .map(|phi| phi.shifted(t, c))
            .collect::<Result<Vec<_>>>()?;
        MultiObjective::new(conjuncts)
    }
}

/// `mp_ρ ≥ b` with a one-dimensional reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeanPayoffObjective {
    pub reward: RewardFunction,
    pub bound: Rational,
}

impl MeanPayoffObjective {
    pub fn new(reward: RewardFunction, bound: Rational) -> Result<Self> {
        reward.require_scalar()?;
        Ok(MeanPayoffObjective { reward, bound })
    }
}

/// `mp_ρ ≥ b` and `va_ρ ≤ c` with a one-dimensional reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarianceObjective {
    pub reward: RewardFunction,
    pub mean_bound: Rational,
    pub variance_bound: Rational,
}

impl VarianceObjective {
    pub fn new(reward: RewardFunction, mean_bound: Rational, variance_bound: Rational) -> Result<Self> {
        reward.require_scalar()?;
        Ok(VarianceObjective {
            reward,
            mean_bound,
            variance_bound,
        })
    }
}
