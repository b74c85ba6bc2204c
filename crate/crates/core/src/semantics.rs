//! Run-level semantics on lassos: mean payoff, long-run variance, local mean
//! payoffs at checkpoints, and the affine reward normalization.

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::game::{Lasso, RewardFunction};
use crate::objective::WindowObjective;
use crate::rational::Rational;

/// Mean payoff of a lasso: the component-wise cycle average.
pub fn mp_of_lasso(lasso: &Lasso, reward: &RewardFunction) -> Vec<Rational> {
    let len = lasso.cycle.len() as i64;
    (0..reward.dim())
        .map(|i| {
            let total: i64 = lasso.cycle.iter().map(|&s| reward.raw(s)[i]).sum();
            Rational::new(total, len * reward.scale())
        })
        .collect()
}

/// Long-run variance of a lasso: the cycle average of squared deviations
/// from the mean payoff, per dimension.
pub fn va_of_lasso(lasso: &Lasso, reward: &RewardFunction) -> Vec<Rational> {
    let mp = mp_of_lasso(lasso, reward);
    let len = Rational::integer(lasso.cycle.len() as i64);
    (0..reward.dim())
        .map(|i| {
            let sq: Rational = lasso.cycle.iter().map(|&s| (reward.value(s, i) - &mp[i]).pow2()).sum();
            sq / &len
        })
        .collect()
}

/// Local mean payoffs of a lasso at every checkpoint up to the point where
/// the checkpoint sequence becomes periodic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointReport {
    /// `values[ℓ]` is the local mean payoff vector at checkpoint `ℓ`.
    pub values: Vec<Vec<Rational>>,
    /// From this checkpoint on the sequence repeats with period `period`.
    pub period_start: usize,
    pub period: usize,
    pub first_violation: Option<usize>,
}

impl CheckpointReport {
    pub fn satisfied(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Number of checkpoints that determine the whole (infinite) checkpoint
/// sequence of `lasso`: `ceil(|prefix|/D) + lcm(|cycle|, D)/D`.
pub fn checkpoint_horizon(lasso: &Lasso, checkpoint: usize) -> (usize, usize) {
    let start = lasso.prefix.len().div_ceil(checkpoint);
    let period = lasso.cycle.len().lcm(&checkpoint) / checkpoint;
    (start, period)
}

pub fn lmp_sequence(lasso: &Lasso, phi: &WindowObjective) -> Result<CheckpointReport> {
    if !phi.window.is_multiple_of(phi.checkpoint) || phi.checkpoint == 0 {
        return Err(Error::BadObjective("D must divide W".into()));
    }
    if lasso.cycle.is_empty() {
        return Err(Error::BadLasso("empty cycle".into()));
    }
    let reward = &phi.reward;
    let (start, period) = checkpoint_horizon(lasso, phi.checkpoint);
    let (lo, hi) = phi.raw_sum_bounds()?;
    let denom = phi.window as i64 * reward.scale();
    let k = reward.dim();
    let count = start + period;

    // Sliding sums over positions 0 .. count*D + W.
    let positions = (count - 1) * phi.checkpoint + phi.window;
    let mut prefix_sums = vec![vec![0i64; k]; positions + 1];
    for p in 0..positions {
        let r = reward.raw(lasso.at(p));
        for i in 0..k {
            prefix_sums[p + 1][i] = prefix_sums[p][i] + r[i];
        }
    }
    let mut values = Vec::with_capacity(count);
    let mut first_violation = None;
    for l in 0..count {
        let a = l * phi.checkpoint;
        let b = a + phi.window;
        let sums: Vec<i64> = (0..k).map(|i| prefix_sums[b][i] - prefix_sums[a][i]).collect();
        if first_violation.is_none() && (0..k).any(|i| sums[i] < lo[i] || sums[i] > hi[i]) {
            first_violation = Some(l);
        }
        values.push(sums.iter().map(|&x| Rational::new(x, denom)).collect());
    }
    Ok(CheckpointReport {
        values,
        period_start: start,
        period,
        first_violation,
    })
}

/// Whether the run satisfies every conjunct.
pub fn check_window_run(lasso: &Lasso, conjuncts: &[WindowObjective]) -> Result<bool> {
    for phi in conjuncts {
        if !lmp_sequence(lasso, phi)?.satisfied() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Maps `ρ` to `ρ' = c·(ρ + t)` and the bounds to `c·(μ + t)`, `c·(ν + t)`.
///
/// Every window contains exactly `W` summands, so window satisfaction is
/// unchanged. The result uses the least common denominator of the shifted
/// values as its scale and must be non-negative.
pub fn affine_shift(
    reward: &RewardFunction,
    mu: &[Rational],
    nu: &[Rational],
    t: &Rational,
    c: &Rational,
) -> Result<(RewardFunction, Vec<Rational>, Vec<Rational>)> {
    if *c <= 0 {
        return Err(Error::BadShift(format!("scale factor {c} must be positive")));
    }
    let map = |x: &Rational| c * &(x + t);
    let shifted: Vec<Vec<Rational>> = (0..reward.num_states())
        .map(|s| reward.vector(s).iter().map(map).collect())
        .collect();
    if let Some(v) = shifted.iter().flatten().find(|v| v.is_negative()) {
        return Err(Error::BadShift(format!("value {v} is negative")));
    }
    let out = RewardFunction::from_rationals(reward.name(), &shifted)?;
    Ok((out, mu.iter().map(map).collect(), nu.iter().map(map).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[i64]) -> RewardFunction {
        RewardFunction::scalar("r", v)
    }

    #[test]
    fn mp_examples() {
        // cycle rewards (n,0,...,0) of length n
        let r = scalar(&[4, 0, 0, 0]);
        let l = Lasso::cycle_only(vec![0, 1, 2, 3]);
        assert_eq!(mp_of_lasso(&l, &r), vec![Rational::one()]);
        // A, B with rewards 0, 4
        let r = scalar(&[0, 4]);
        assert_eq!(
            mp_of_lasso(&Lasso::cycle_only(vec![0, 1]), &r),
            vec![Rational::integer(2)]
        );
    }

    #[test]
    fn va_examples() {
        let r = scalar(&[0, 4, 3]);
        assert_eq!(
            va_of_lasso(&Lasso::cycle_only(vec![0, 1]), &r),
            vec![Rational::integer(4)]
        );
        assert_eq!(va_of_lasso(&Lasso::new(vec![0], vec![2]), &r), vec![Rational::zero()]);
    }

    #[test]
    fn constant_run_checkpoints() {
        let r = scalar(&[1]);
        let phi = WindowObjective::scalar(2, 1, r, Rational::one(), Rational::one()).unwrap();
        let rep = lmp_sequence(&Lasso::cycle_only(vec![0]), &phi).unwrap();
        assert!(rep.values.iter().all(|v| v[0] == 1));
        assert!(rep.satisfied());
    }

    #[test]
    fn mu_two_fails_at_first_checkpoint() {
        let r = scalar(&[1]);
        let phi = WindowObjective::scalar(2, 2, r, Rational::integer(2), Rational::integer(2)).unwrap();
        let rep = lmp_sequence(&Lasso::cycle_only(vec![0]), &phi).unwrap();
        assert_eq!(rep.first_violation, Some(0));
    }

    #[test]
    fn periodic_n_zero_pattern() {
        // rewards 3,0,0 with W = D = 3: every window sums to 3.
        let r = scalar(&[3, 0, 0]);
        let l = Lasso::cycle_only(vec![0, 1, 2]);
        let phi = WindowObjective::scalar(3, 3, r.clone(), Rational::one(), Rational::one()).unwrap();
        let rep = lmp_sequence(&l, &phi).unwrap();
        assert!(rep.values.iter().all(|v| v[0] == 1));
        // With D = 1 every window of length 3 also contains exactly one 3.
        let phi = WindowObjective::scalar(3, 1, r, Rational::one(), Rational::one()).unwrap();
        let rep = lmp_sequence(&l, &phi).unwrap();
        assert_eq!(rep.values.len(), 3);
        assert!(rep.values.iter().all(|v| v[0] == 1));
    }

    #[test]
    fn identity_shift() {
        let r = scalar(&[0, 1]);
        let (r2, mu, nu) = affine_shift(
            &r,
            &[Rational::zero()],
            &[Rational::one()],
            &Rational::zero(),
            &Rational::one(),
        )
        .unwrap();
        assert_eq!(r2, r);
        assert_eq!((mu[0].clone(), nu[0].clone()), (Rational::zero(), Rational::one()));
    }

    #[test]
    fn tenth_shift_produces_integers() {
        let vals: Vec<Vec<Rational>> = [(-1, 10), (1, 10), (11, 10), (0, 1), (1, 1)]
            .iter()
            .map(|&(a, b)| vec![Rational::new(a, b)])
            .collect();
        let r = RewardFunction::from_rationals("r", &vals).unwrap();
        let (r2, _, _) = affine_shift(
            &r,
            &[Rational::zero()],
            &[Rational::zero()],
            &Rational::new(1, 10),
            &Rational::integer(10),
        )
        .unwrap();
        assert_eq!(r2.scale(), 1);
        let flat: Vec<i64> = r2.raw_values().iter().map(|v| v[0]).collect();
        assert_eq!(flat, vec![0, 2, 12, 1, 11]);
    }

    #[test]
    fn negative_result_rejected() {
        let r = scalar(&[-3]);
        let e = affine_shift(
            &r,
            &[Rational::zero()],
            &[Rational::zero()],
            &Rational::one(),
            &Rational::one(),
        );
        assert!(matches!(e, Err(Error::BadShift(_))));
    }
}
