//! Property tests over random small instances, each checked against a
//! direct computation that does not share code with the solver under test.

use std::collections::{BTreeMap, HashSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winstab::fixtures::{random_circulation, random_game, random_reward, random_strongly_connected, random_window};
use winstab::game::{Game, Lasso, Owner, RewardFunction, StateId};
use winstab::mpsolve::{energy_credit, mp_threshold, mp_value, solve_combined};
use winstab::objective::{MeanPayoffObjective, MultiObjective, VarianceObjective, WindowObjective};
use winstab::oracle::{combined_oracle, history_game, window_oracle_set, OracleCaps};
use winstab::rational::Rational;
use winstab::scheme::{admits, induce_strategy, product_game, product_scheme, FiniteStrategy};
use winstab::semantics::{affine_shift, check_window_run, lmp_sequence, mp_of_lasso, va_of_lasso};
use winstab::variance::{
    euler_cycle, euler_strategy, freq_constraints_check, phase_plan, variance_expression, variance_expression_slope,
    FrequencyVector, SupportRule,
};
use winstab::window::{build_scheme, WindowKernel};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_case(seed: u64, windows: &[usize]) -> (Game, WindowObjective) {
    let mut r = rng(seed);
    let game = random_game(&mut r, 5, 10, 0.4);
    let w = random_reward(&mut r, "r", game.num_states(), 0, 2);
    let phi = random_window(&mut r, w, windows);
    (game, phi)
}

/// A random walk of the game as a lasso: `prefix_len` steps then a cycle
/// closed on the first repeated state.
fn random_lasso(r: &mut ChaCha8Rng, game: &Game, start: StateId, prefix_len: usize) -> Lasso {
    let mut s = start;
    let mut prefix = Vec::new();
    for _ in 0..prefix_len {
        prefix.push(s);
        let succ = game.successors(s);
        s = succ[r.gen_range(0..succ.len())];
    }
    let mut walk: Vec<StateId> = Vec::new();
    loop {
        if let Some(i) = walk.iter().position(|&x| x == s) {
            prefix.extend_from_slice(&walk[..i]);
            return Lasso::new(prefix, walk[i..].to_vec());
        }
        walk.push(s);
        let succ = game.successors(s);
        s = succ[r.gen_range(0..succ.len())];
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn shift_params() -> impl Strategy<Value = (Rational, Rational)> {
    (0i64..20, 1i64..10, 1i64..30, 1i64..5).prop_map(|(tn, td, cn, cd)| (Rational::new(tn, td), Rational::new(cn, cd)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoint_verdict_matches_long_unrolling(seed in any::<u64>(), prefix_len in 0usize..5) {
        let (game, phi) = small_case(seed, &[1, 2, 3, 4]);
        let mut r = rng(seed ^ 1);
        let lasso = random_lasso(&mut r, &game, 0, prefix_len);
        let report = lmp_sequence(&lasso, &phi).unwrap();
        let (w, d) = (phi.window, phi.checkpoint);
        let lcm = lasso.cycle.len() * d / gcd(lasso.cycle.len(), d);
        let horizon = lasso.prefix.len() + 3 * lcm * w;
        let scale = phi.reward.scale() * w as i64;
        let mut brute = None;
        for l in 0..horizon {
            let sum: i64 = (l * d..l * d + w).map(|p| phi.reward.raw(lasso.at(p))[0]).sum();
            let lmp = Rational::new(sum, scale);
            if lmp < phi.mu[0] || lmp > phi.nu[0] {
                brute = Some(l);
                break;
            }
        }
        prop_assert_eq!(report.first_violation, brute);
    }

    #[test]
    fn moments_invariant_under_rotation(seed in any::<u64>(), k in 0usize..8) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 6, 12, 0.0);
        let reward = random_reward(&mut r, "r", game.num_states(), -5, 5);
        let lasso = random_lasso(&mut r, &game, 0, 2);
        let mut rotated = lasso.cycle.clone();
        let len = rotated.len();
        rotated.rotate_left(k % len);
        let other = Lasso::new(lasso.prefix.clone(), rotated);
        prop_assert_eq!(mp_of_lasso(&lasso, &reward), mp_of_lasso(&other, &reward));
        prop_assert_eq!(va_of_lasso(&lasso, &reward), va_of_lasso(&other, &reward));
    }

    #[test]
    fn variance_is_zero_exactly_on_constant_cycles(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 6, 12, 0.0);
        let reward = random_reward(&mut r, "r", game.num_states(), -3, 3);
        let lasso = random_lasso(&mut r, &game, 0, 1);
        let va = va_of_lasso(&lasso, &reward).remove(0);
        let constant = lasso.cycle.iter().all(|&s| reward.raw(s) == reward.raw(lasso.cycle[0]));
        prop_assert!(va >= 0);
        prop_assert_eq!(va.is_zero(), constant);
    }

    #[test]
    fn run_verdict_invariant_under_affine_shift(seed in any::<u64>(), (t, c) in shift_params()) {
        let (game, phi) = small_case(seed, &[2, 3, 4]);
        let (_, psi) = small_case(seed ^ 7, &[2, 3]);
        if psi.reward.num_states() != game.num_states() {
            return Ok(());
        }
        let conj = vec![phi, psi];
        let shifted: Vec<WindowObjective> = conj.iter().map(|p| p.shifted(&t, &c).unwrap()).collect();
        let mut r = rng(seed ^ 2);
        for _ in 0..5 {
            let lasso = random_lasso(&mut r, &game, 0, 3);
            prop_assert_eq!(check_window_run(&lasso, &conj).unwrap(), check_window_run(&lasso, &shifted).unwrap());
        }
    }

    #[test]
    fn shift_maps_bounds_and_rewards_affinely(seed in any::<u64>(), (t, c) in shift_params()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..5);
        let reward = random_reward(&mut r, "r", n, 0, 4);
        let mu = vec![Rational::new(r.gen_range(0..4), 3)];
        let (out, mu2, _) = affine_shift(&reward, &mu, &mu, &t, &c).unwrap();
        for s in 0..n {
            prop_assert_eq!(out.value(s, 0), &c * &(reward.value(s, 0) + &t));
        }
        prop_assert_eq!(&mu2[0], &(&c * &(&mu[0] + &t)));
    }

    #[test]
    fn scheme_memory_within_bound(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3, 4]);
        let scheme = build_scheme(&game, &phi).unwrap();
        prop_assert!(num_bigint::BigInt::from(scheme.num_mem()) <= phi.memory_bound());
    }

    #[test]
    fn scheme_winning_set_invariant_under_shift(seed in any::<u64>(), (t, c) in shift_params()) {
        let (game, phi) = small_case(seed, &[2, 3, 4]);
        let a = build_scheme(&game, &phi).unwrap().winning_states();
        let b = build_scheme(&game, &phi.shifted(&t, &c).unwrap()).unwrap().winning_states();
        prop_assert_eq!(a, b);
    }

    /// The surviving pairs are exactly those from which the adversary cannot
    /// force a window violation in the full memory graph, recomputed here by
    /// an attractor.
    #[test]
    fn surviving_pairs_are_the_adversary_losing_ones(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3, 4]);
        let scheme = build_scheme(&game, &phi).unwrap();
        let kernel = WindowKernel::new(&phi).unwrap();
        let mut ids: BTreeMap<(StateId, Box<[i64]>), usize> = BTreeMap::new();
        let mut nodes: Vec<(StateId, Box<[i64]>)> = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..game.num_states() {
            let k = (s, kernel.initial_key());
            ids.insert(k.clone(), nodes.len());
            nodes.push(k);
            queue.push_back(nodes.len() - 1);
        }
        let mut succ: Vec<Vec<usize>> = Vec::new();
        while let Some(v) = queue.pop_front() {
            let (s, m) = nodes[v].clone();
            let next = kernel.update_key(s, &m);
            let mut out = Vec::new();
            for &t in game.successors(s) {
                let k = (t, next.clone());
                let id = *ids.entry(k.clone()).or_insert_with(|| {
                    nodes.push(k);
                    queue.push_back(nodes.len() - 1);
                    nodes.len() - 1
                });
                out.push(id);
            }
            succ.push(out);
        }
        // Adversary attractor of the violating nodes.
        let n = nodes.len();
        let mut lost: Vec<bool> = (0..n).map(|v| !kernel.check_key(nodes[v].0, &nodes[v].1)).collect();
        loop {
            let mut changed = false;
            for v in 0..n {
                if lost[v] {
                    continue;
                }
                let f = match game.owner(nodes[v].0) {
                    Owner::Box => succ[v].iter().all(|&w| lost[w]),
                    Owner::Diamond => succ[v].iter().any(|&w| lost[w]),
                };
                if f {
                    lost[v] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let expected: Vec<StateId> = (0..game.num_states()).filter(|&s| !lost[s]).collect();
        prop_assert_eq!(scheme.winning_states(), expected);
        for &(s, m) in scheme.pairs() {
            let v = ids[&(s, scheme.mem_key(m).into())];
            if game.owner(s) == Owner::Box && !lost[v] {
                let mut allowed: Vec<StateId> = scheme.constrainer(s, m).unwrap().unwrap().to_vec();
                let mut want: Vec<StateId> = succ[v].iter().filter(|&&w| !lost[w]).map(|&w| nodes[w].0).collect();
                allowed.sort_unstable();
                want.sort_unstable();
                prop_assert_eq!(allowed, want);
            }
        }
    }

    #[test]
    fn induced_strategies_satisfy_the_objective(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3, 4]);
        let scheme = build_scheme(&game, &phi).unwrap();
        let product = product_game(&game, &scheme).unwrap();
        let mut r = rng(seed ^ 3);
        let tau: Vec<Option<usize>> = (0..product.num_states())
            .map(|p| {
                let succ = product.game.successors(p);
                (product.game.owner(p) == Owner::Box).then(|| succ[r.gen_range(0..succ.len())])
            })
            .collect();
        for s in scheme.winning_states() {
            let Ok(strategy) = induce_strategy(&game, &scheme, &product, &tau, s) else {
                continue;
            };
            prop_assert!(admits(&game, &scheme, s, &strategy));
            for _ in 0..8 {
                let adversary: Vec<StateId> = (0..game.num_states())
                    .map(|t| game.successors(t)[r.gen_range(0..game.successors(t).len())])
                    .collect();
                let lasso = strategy.outcome(&game, &adversary).unwrap();
                prop_assert!(check_window_run(&lasso, std::slice::from_ref(&phi)).unwrap());
            }
        }
    }

    /// A positional controller strategy is admitted iff no violation is
    /// reachable in the history game when the controller follows it.
    #[test]
    fn admission_matches_history_reachability(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3]);
        let scheme = build_scheme(&game, &phi).unwrap();
        let mut r = rng(seed ^ 4);
        let n = game.num_states();
        let sigma: Vec<StateId> = (0..n).map(|s| game.successors(s)[r.gen_range(0..game.successors(s).len())]).collect();
        for s in 0..n {
            let strategy = FiniteStrategy {
                initial: s,
                initial_memory: 0,
                update: (0..n).map(|t| ((t, 0), 0)).collect(),
                choice: (0..n).filter(|&t| game.owner(t) == Owner::Box).map(|t| ((t, 0), sigma[t])).collect(),
            };
            let h = history_game(&game, std::slice::from_ref(&phi), s, &OracleCaps::default()).unwrap();
            let mut seen = HashSet::from([0usize]);
            let mut stack = vec![0usize];
            let mut violated = false;
            while let Some(v) = stack.pop() {
                violated |= h.bad[v];
                for &w in &h.succ[v] {
                    if h.owner[v] == Owner::Box && h.state[w] != sigma[h.state[v]] {
                        continue;
                    }
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            prop_assert_eq!(admits(&game, &scheme, s, &strategy), !violated);
        }
    }

    #[test]
    fn product_work_within_budget(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3]);
        let mut r = rng(seed ^ 5);
        let w2 = random_reward(&mut r, "q", game.num_states(), 0, 2);
        let psi = random_window(&mut r, w2, &[2, 3]);
        let a = build_scheme(&game, &phi).unwrap();
        let b = build_scheme(&game, &psi).unwrap();
        let p = product_scheme(&game, &[&a, &b]).unwrap();
        let mem = (a.num_mem() * b.num_mem()) as u64;
        let (s, e) = (game.num_states() as u64, game.num_edges() as u64);
        prop_assert!(p.num_mem() as u64 <= mem);
        prop_assert!(p.work() <= s * s * e * mem * mem);
        let joint = window_oracle_set(&game, &[phi, psi], &OracleCaps::default()).unwrap();
        prop_assert_eq!(p.winning_states(), joint);
    }

    /// `Δ ∧ mp ≥ b` holds in the game iff `mp ≥ b` holds in the product game
    /// from the initial pair, against the history-game oracle.
    #[test]
    fn conjunction_transfers_to_product(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 4, 8, 0.4);
        let n = game.num_states();
        let w = random_reward(&mut r, "w", n, 0, 2);
        let phi = random_window(&mut r, w, &[2, 3]);
        let reward = random_reward(&mut r, "r", n, -2, 3);
        let b = Rational::new(r.gen_range(-4..=6), r.gen_range(1..=3));
        let delta = MultiObjective::single(phi.clone());
        let psi = MeanPayoffObjective::new(reward.clone(), b.clone()).unwrap();
        for s in 0..n {
            let oracle = combined_oracle(&game, std::slice::from_ref(&phi), &reward, s, &OracleCaps::default()).unwrap();
            let sol = solve_combined(&game, &delta, &psi, s).unwrap();
            prop_assert_eq!(sol.achievable, oracle.is_some_and(|v| v >= b));
        }
    }

    #[test]
    fn combined_witness_is_sound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 4, 8, 0.4);
        let n = game.num_states();
        let w = random_reward(&mut r, "w", n, 0, 2);
        let phi = random_window(&mut r, w, &[2, 3]);
        let reward = random_reward(&mut r, "r", n, -2, 3);
        let b = Rational::new(r.gen_range(-4..=4), 2);
        let delta = MultiObjective::single(phi.clone());
        let psi = MeanPayoffObjective::new(reward.clone(), b.clone()).unwrap();
        let diamonds: Vec<StateId> = (0..n).filter(|&s| game.owner(s) == Owner::Diamond).collect();
        for s in 0..n {
            let Some(strategy) = solve_combined(&game, &delta, &psi, s).unwrap().strategy else {
                continue;
            };
            let mut adversary: Vec<StateId> = (0..n).map(|t| game.successors(t)[0]).collect();
            let mut choice = vec![0usize; diamonds.len()];
            loop {
                for (i, &d) in diamonds.iter().enumerate() {
                    adversary[d] = game.successors(d)[choice[i]];
                }
                let lasso = strategy.outcome(&game, &adversary).unwrap();
                prop_assert!(mp_of_lasso(&lasso, &reward)[0] >= b);
                prop_assert!(check_window_run(&lasso, std::slice::from_ref(&phi)).unwrap());
                let mut i = 0;
                while i < diamonds.len() {
                    choice[i] += 1;
                    if choice[i] < game.successors(diamonds[i]).len() {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
                if i == diamonds.len() {
                    break;
                }
            }
        }
    }

    #[test]
    fn threshold_regions_agree_with_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 6, 12, 0.5);
        let reward = random_reward(&mut r, "r", game.num_states(), -3, 3);
        let values = mp_value(&game, &reward).unwrap();
        for _ in 0..4 {
            let b = Rational::new(r.gen_range(-9..=9), r.gen_range(1..=4));
            let sol = mp_threshold(&game, &reward, &b).unwrap();
            for s in 0..game.num_states() {
                prop_assert_eq!(sol.winning[s], values[s] >= b);
            }
        }
    }

    #[test]
    fn energy_lifts_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_game(&mut r, 6, 12, 0.5);
        let weights: Vec<i64> = (0..game.num_states()).map(|_| r.gen_range(-6..=6)).collect();
        let sol = energy_credit(&game, &weights);
        let (n, e) = (game.num_states() as u64, game.num_edges() as u64);
        let maxw = weights.iter().map(|w| w.unsigned_abs()).max().unwrap().max(1);
        // One extra lift per state for the final jump to infinite credit.
        prop_assert!(sol.lifts <= n * n * e * maxw + n);
    }

    /// Renumbering states does not change the oracle's winning set.
    #[test]
    fn oracle_independent_of_state_order(seed in any::<u64>()) {
        let (game, phi) = small_case(seed, &[2, 3]);
        let n = game.num_states();
        let mut r = rng(seed ^ 6);
        let mut perm: Vec<StateId> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let mut owners = vec![Owner::Box; n];
        let mut raw = vec![0i64; n];
        for s in 0..n {
            owners[perm[s]] = game.owner(s);
            raw[perm[s]] = phi.reward.raw(s)[0];
        }
        let edges: Vec<(StateId, StateId)> = game.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let g2 = Game::new(owners, &edges).unwrap();
        let r2 = RewardFunction::new("r", raw.iter().map(|&x| vec![x]).collect(), phi.reward.scale()).unwrap();
        let phi2 = WindowObjective::new(phi.window, phi.checkpoint, r2, phi.mu.clone(), phi.nu.clone()).unwrap();
        let caps = OracleCaps::default();
        let a: Vec<StateId> = window_oracle_set(&game, &[phi], &caps).unwrap();
        let mut mapped: Vec<StateId> = a.iter().map(|&s| perm[s]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, window_oracle_set(&g2, &[phi2], &caps).unwrap());
    }

    #[test]
    fn frequency_semantics_equals_run_semantics(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_strongly_connected(&mut r, 5, 6);
        let f = random_circulation(&mut r, &game, 5);
        let reward = random_reward(&mut r, "r", game.num_states(), -4, 4);
        let obj = VarianceObjective::new(reward.clone(), Rational::zero(), Rational::zero()).unwrap();
        let check = freq_constraints_check(&game, &f, &obj, SupportRule::Strict).unwrap();
        let lasso = euler_strategy(&game, &f).unwrap();
        prop_assert_eq!(check.mp, mp_of_lasso(&lasso, &reward).remove(0));
        prop_assert_eq!(check.va, va_of_lasso(&lasso, &reward).remove(0));
    }

    #[test]
    fn euler_period_uses_each_edge_its_share(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_strongly_connected(&mut r, 5, 6);
        let f = random_circulation(&mut r, &game, 5);
        let cycle = euler_cycle(&game, &f, None).unwrap();
        let len = cycle.len();
        let mut counts: BTreeMap<(StateId, StateId), u64> = BTreeMap::new();
        for i in 0..len {
            *counts.entry((cycle[i], cycle[(i + 1) % len])).or_insert(0) += 1;
        }
        for (e, v) in f.iter() {
            prop_assert_eq!(Rational::integer(counts[&e] as i64), v * &Rational::integer(len as i64));
        }
        prop_assert_eq!(counts.len(), f.support().len());
    }

    #[test]
    fn variance_expression_matches_direct_sum(i in 0i64..=500, fc in 0i64..=20) {
        let x = Rational::new(3, 2) + Rational::new(i, 1000);
        let f_c = Rational::new(fc, 1000);
        let half = Rational::new(1, 2);
        let f_ab = (&x + &(Rational::integer(11) * f_c.clone()) - Rational::one()) * &half;
        let f_d = Rational::integer(2) - &x - Rational::integer(12) * f_c.clone();
        let dev = |r: i64| (Rational::integer(r) - &x).pow2();
        let direct = &f_ab * &dev(0) + &f_ab * &dev(4) + &f_c * &dev(-10) + &f_d * &dev(1);
        prop_assert_eq!(variance_expression(&x, &f_c), direct);
        prop_assert!(variance_expression(&x, &Rational::zero()) >= Rational::new(9, 4));
        prop_assert!(variance_expression_slope(&x) > 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Between consecutive checkpoints `K_i ≤ n < K_{i+1}` (from the second
    /// checkpoint on) every edge frequency stays above
    /// `min(f^i_e, f^{i+1}_e) − 2ε_i`.
    #[test]
    fn phase_frequencies_stay_above_the_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let game = random_strongly_connected(&mut r, 4, 4);
        let phases = 3;
        let fs: Vec<FrequencyVector> = (0..phases).map(|_| random_circulation(&mut r, &game, 3)).collect();
        let eps: Vec<Rational> = (0..phases).map(|i| Rational::new(1, 10 << i)).collect();
        let start = fs[0].support_states()[0];
        let plan = phase_plan(&game, &fs, &eps, start).unwrap();
        for i in 1..phases - 1 {
            let (lo, hi) = (plan.k[i], plan.k[i + 1]);
            let samples: Vec<u64> = (0..40).map(|_| r.gen_range(lo..hi)).chain([lo, hi - 1]).collect();
            for n in samples {
                let counts = plan.edge_counts(n);
                for (e, fe) in fs[i].iter() {
                    let floor = std::cmp::min(fe.clone(), fs[i + 1].get(e)) - Rational::integer(2) * eps[i].clone();
                    let seen = Rational::new(*counts.get(&e).unwrap_or(&0) as i64, n as i64);
                    prop_assert!(seen >= floor, "edge {:?} at {}: {} < {}", e, n, seen, floor);
                }
            }
        }
    }
}
