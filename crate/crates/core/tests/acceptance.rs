//! End-to-end acceptance suite. Run with `--nocapture` to see one line per
//! criterion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winstab::fixtures::{
    infinite_memory_graph, random_circulation, random_game, random_reward, random_strongly_connected, random_window, A,
    B, C, D,
};
use winstab::hardgen::{gen_balanced_qbf_instance, gen_balanced_sat_instance, random_cnf, random_qbf};
use winstab::mpsolve::{max_bound, mp_value, solve_combined};
use winstab::oracle::{balanced_qbf_oracle, balanced_sat_oracle, combined_oracle, window_oracle_set, OracleCaps};
use winstab::scheme::product_scheme;
use winstab::semantics::{mp_of_lasso, va_of_lasso};
use winstab::variance::{
    alternation_plan, empirical_frequencies, euler_strategy, freq_constraints_check, geometric_steps,
    variance_expression, variance_expression_slope, FrequencyVector, SupportRule,
};
use winstab::window::build_scheme;
use winstab::{
    Game, Lasso, MeanPayoffObjective, MultiObjective, Rational, RewardFunction, VarianceObjective, WindowObjective,
};

const SEED: u64 = 0x5eed_0001;
const WINDOW_GAMES: usize = 500;
const WINDOW_MAX_STATES: usize = 6;
const WINDOW_MAX_EDGES: usize = 12;
const WINDOW_LENGTHS: [usize; 3] = [2, 3, 4];
const MAX_REWARD: i64 = 2;
const DIAMOND_PROBABILITY: f64 = 0.4;
const WINDOW_TIME_LIMIT: Duration = Duration::from_secs(300);
const COMBINED_GAMES: usize = 150;
const COMBINED_MAX_STATES: usize = 5;
const COMBINED_MAX_EDGES: usize = 10;
const SAT_INSTANCES: usize = 200;
const SAT_VARS: [usize; 3] = [2, 4, 6];
const QBF_INSTANCES: usize = 50;
const QBF_VARS: [usize; 2] = [2, 4];
const MAX_CLAUSES: usize = 6;
const ALGEBRA_STEPS: i64 = 500;
const EULER_VECTORS: usize = 50;
const EULER_MAX_STATES: usize = 5;
const ALTERNATION_BASE: usize = 256;
const ALTERNATION_PHASES: usize = 5;
const MOMENT_TOLERANCE: f64 = 0.05;
const C_EDGE_TOLERANCE: f64 = 0.01;

fn shift_t() -> Rational {
    Rational::new(1, 10)
}

fn shift_c() -> Rational {
    Rational::integer(10)
}

fn shift_value(x: &Rational) -> Rational {
    &shift_c() * &(x + &shift_t())
}

/// `c·(ρ + t)` for rewards that may go negative (mean payoff is invariant
/// under any positive affine map).
fn shift_reward(r: &RewardFunction) -> RewardFunction {
    let vals: Vec<Vec<Rational>> = (0..r.num_states())
        .map(|s| r.vector(s).iter().map(shift_value).collect())
        .collect();
    RewardFunction::from_rationals(r.name(), &vals).expect("valid reward")
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

struct WindowCase {
    game: Game,
    phi: WindowObjective,
    second: WindowObjective,
}

fn window_corpus() -> Vec<WindowCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..WINDOW_GAMES)
        .map(|_| {
            let game = random_game(&mut rng, WINDOW_MAX_STATES, WINDOW_MAX_EDGES, DIAMOND_PROBABILITY);
            let n = game.num_states();
            let r1 = random_reward(&mut rng, "r1", n, 0, MAX_REWARD);
            let phi = random_window(&mut rng, r1, &WINDOW_LENGTHS);
            let r2 = random_reward(&mut rng, "r2", n, 0, MAX_REWARD);
            let second = random_window(&mut rng, r2, &WINDOW_LENGTHS);
            WindowCase { game, phi, second }
        })
        .collect()
}

/// Criteria 1, 2 and the window part of 9.
fn window_criteria(corpus: &[WindowCase], caps: &OracleCaps) -> (Outcome, Outcome, Vec<usize>) {
    let start = Instant::now();
    let mut disagreements = 0;
    let mut oversized = 0;
    let mut shift_changes = Vec::new();
    let mut largest = 0;
    for (i, case) in corpus.iter().enumerate() {
        let scheme = build_scheme(&case.game, &case.phi).unwrap();
        let oracle = window_oracle_set(&case.game, std::slice::from_ref(&case.phi), caps).unwrap();
        if scheme.winning_states() != oracle {
            disagreements += 1;
        }
        let bound = case.phi.memory_bound();
        largest = largest.max(scheme.num_mem());
        if num_bigint::BigInt::from(scheme.num_mem()) > bound {
            oversized += 1;
        }
        let shifted = case.phi.shifted(&shift_t(), &shift_c()).unwrap();
        if build_scheme(&case.game, &shifted).unwrap().winning_states() != scheme.winning_states() {
            shift_changes.push(i);
        }
    }
    let elapsed = start.elapsed();
    (
        Outcome::new(
            disagreements == 0 && elapsed < WINDOW_TIME_LIMIT,
            format!("{} games, {disagreements} disagreements, {:.1?}", corpus.len(), elapsed),
        ),
        Outcome::new(
            oversized == 0,
            format!("{oversized} instances above W·(maxr·W)^(k·W/D); largest |Mem| = {largest}"),
        ),
        shift_changes,
    )
}

fn product_criterion(corpus: &[WindowCase], caps: &OracleCaps) -> (Outcome, Vec<usize>) {
    let mut disagreements = 0;
    let mut shift_changes = Vec::new();
    for (i, case) in corpus.iter().enumerate() {
        let s1 = build_scheme(&case.game, &case.phi).unwrap();
        let s2 = build_scheme(&case.game, &case.second).unwrap();
        let product = product_scheme(&case.game, &[&s1, &s2]).unwrap();
        let oracle = window_oracle_set(&case.game, &[case.phi.clone(), case.second.clone()], caps).unwrap();
        if product.winning_states() != oracle {
            disagreements += 1;
        }
        let t1 = build_scheme(&case.game, &case.phi.shifted(&shift_t(), &shift_c()).unwrap()).unwrap();
        let t2 = build_scheme(&case.game, &case.second.shifted(&shift_t(), &shift_c()).unwrap()).unwrap();
        if product_scheme(&case.game, &[&t1, &t2]).unwrap().winning_states() != product.winning_states() {
            shift_changes.push(i);
        }
    }
    (
        Outcome::new(
            disagreements == 0,
            format!("{} conjunctions, {disagreements} disagreements", corpus.len()),
        ),
        shift_changes,
    )
}

fn combined_criterion(caps: &OracleCaps) -> (Outcome, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut verdicts = 0;
    let mut verdict_mismatch = 0;
    let mut bound_mismatch = 0;
    let mut shift_changes = Vec::new();
    for i in 0..COMBINED_GAMES {
        let game = random_game(&mut rng, COMBINED_MAX_STATES, COMBINED_MAX_EDGES, DIAMOND_PROBABILITY);
        let n = game.num_states();
        let w = random_reward(&mut rng, "w", n, 0, MAX_REWARD);
        let phi = random_window(&mut rng, w, &[2, 3]);
        let reward = random_reward(&mut rng, "r", n, -2, 3);
        let delta = MultiObjective::single(phi.clone());
        let shifted_delta = MultiObjective::single(phi.shifted(&shift_t(), &shift_c()).unwrap());
        let shifted_reward = shift_reward(&reward);
        for s in 0..n {
            let expected = combined_oracle(&game, std::slice::from_ref(&phi), &reward, s, caps).unwrap();
            let got = max_bound(&game, &delta, &reward, s).unwrap();
            if got != expected {
                bound_mismatch += 1;
            }
            let got_shifted = max_bound(&game, &shifted_delta, &shifted_reward, s).unwrap();
            if got_shifted != got.as_ref().map(shift_value) {
                shift_changes.push(i);
            }
            let mut bounds = vec![Rational::new(rng.gen_range(-4..=6), 2)];
            if let Some(v) = &expected {
                bounds.push(v.clone());
                bounds.push(v + &Rational::new(1, 97));
            }
            for b in bounds {
                let want = expected.as_ref().is_some_and(|v| *v >= b);
                let psi = MeanPayoffObjective::new(reward.clone(), b.clone()).unwrap();
                let sol = solve_combined(&game, &delta, &psi, s).unwrap();
                verdicts += 1;
                if sol.achievable != want {
                    verdict_mismatch += 1;
                }
                let psi_shifted = MeanPayoffObjective::new(shifted_reward.clone(), shift_value(&b)).unwrap();
                if solve_combined(&game, &shifted_delta, &psi_shifted, s)
                    .unwrap()
                    .achievable
                    != sol.achievable
                {
                    shift_changes.push(i);
                }
            }
        }
    }
    (
        Outcome::new(
            verdict_mismatch == 0 && bound_mismatch == 0,
            format!(
                "{COMBINED_GAMES} games, {verdicts} verdicts: {verdict_mismatch} verdict and {bound_mismatch} \
                 max-bound disagreements"
            ),
        ),
        shift_changes,
    )
}

fn parameters_match(inst: &winstab::hardgen::ReductionInstance, n: usize, m: usize) -> bool {
    let phi = &inst.original;
    let w = 2 * (n + m);
    let wq = Rational::integer(w as i64);
    let mu = Rational::integer(n as i64) / (Rational::integer(2) * wq.clone());
    let nu = &mu + &(Rational::one() / (Rational::integer(5) * wq));
    phi.window == w && phi.checkpoint == 1 && phi.mu == vec![mu] && phi.nu == vec![nu]
}

fn hardness_criterion(caps: &OracleCaps) -> (Outcome, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut disagreements = 0;
    let mut bad_parameters = 0;
    let mut positives = 0;
    let mut shift_changes = Vec::new();
    for i in 0..SAT_INSTANCES + QBF_INSTANCES {
        let m = rng.gen_range(1..=MAX_CLAUSES);
        let (inst, expected, n) = if i < SAT_INSTANCES {
            let n = SAT_VARS[rng.gen_range(0..SAT_VARS.len())];
            let phi = random_cnf(&mut rng, n, m);
            (
                gen_balanced_sat_instance(&phi).unwrap(),
                balanced_sat_oracle(&phi, caps).unwrap(),
                n,
            )
        } else {
            let n = QBF_VARS[rng.gen_range(0..QBF_VARS.len())];
            let psi = random_qbf(&mut rng, n, m);
            (
                gen_balanced_qbf_instance(&psi).unwrap(),
                balanced_qbf_oracle(&psi, caps).unwrap(),
                n,
            )
        };
        let got = inst.solve().unwrap();
        positives += usize::from(expected);
        if got != expected {
            disagreements += 1;
        }
        if !parameters_match(&inst, n, m) {
            bad_parameters += 1;
        }
        if inst.shift != (shift_t(), shift_c()) || inst.solve_original().unwrap() != got {
            shift_changes.push(i);
        }
    }
    (
        Outcome::new(
            disagreements == 0 && bad_parameters == 0,
            format!(
                "{SAT_INSTANCES} SAT + {QBF_INSTANCES} QBF instances ({positives} positive): {disagreements} \
                 disagreements, {bad_parameters} with wrong W/D/mu/nu"
            ),
        ),
        shift_changes,
    )
}

fn four_state_values() -> Outcome {
    let (game, r) = infinite_memory_graph();
    let q = Rational::new;
    let f = FrequencyVector::new([((A, B), q(1, 4)), ((B, A), q(1, 4)), ((D, D), q(1, 2))]);
    let obj = VarianceObjective::new(r.clone(), q(3, 2), q(9, 4)).unwrap();
    let check = freq_constraints_check(&game, &f, &obj, SupportRule::SccClosure).unwrap();
    let state_freq = f.state_frequencies(4);
    let values = mp_value(&game, &r).unwrap();
    let ab = Lasso::cycle_only(vec![A, B]);
    let dd = Lasso::new(vec![A, B, C], vec![D]);
    let ab_va = va_of_lasso(&ab, &r).remove(0);
    let dd_mp = mp_of_lasso(&dd, &r).remove(0);
    let pass = state_freq == vec![q(1, 4), q(1, 4), q(0, 1), q(1, 2)]
        && check.mp == q(3, 2)
        && check.va == q(9, 4)
        && values.iter().all(|v| *v == 2)
        && ab_va == 4
        && dd_mp == 1;
    Outcome::new(
        pass,
        format!(
            "mp = {}, va = {}, mp_value = {:?}, A-B lasso va = {ab_va}, D lasso mp = {dd_mp}",
            check.mp,
            check.va,
            values.iter().map(ToString::to_string).collect::<Vec<_>>()
        ),
    )
}

fn algebra_criterion() -> Outcome {
    let mut min_value: Option<Rational> = None;
    let mut min_slope: Option<Rational> = None;
    for i in 0..=ALGEBRA_STEPS {
        let x = Rational::new(3, 2) + Rational::new(i, 1000);
        let v = variance_expression(&x, &Rational::zero());
        let s = variance_expression_slope(&x);
        if min_value.as_ref().is_none_or(|m| v < *m) {
            min_value = Some(v);
        }
        if min_slope.as_ref().is_none_or(|m| s < *m) {
            min_slope = Some(s);
        }
    }
    let (v, s) = (min_value.unwrap(), min_slope.unwrap());
    Outcome::new(
        v >= Rational::new(9, 4) && s > 0,
        format!("{} points: min value {v}, min f_C coefficient {s}", ALGEBRA_STEPS + 1),
    )
}

fn euler_and_phase_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let mut euler_mismatch = 0;
    for _ in 0..EULER_VECTORS {
        let game = random_strongly_connected(&mut rng, EULER_MAX_STATES, 6);
        let f = random_circulation(&mut rng, &game, 4);
        let lasso = euler_strategy(&game, &f).unwrap();
        let mut period = lasso.cycle.clone();
        period.push(lasso.cycle[0]);
        if empirical_frequencies(&period) != f {
            euler_mismatch += 1;
        }
    }

    let (game, r) = infinite_memory_graph();
    let plan = alternation_plan(&game, ALTERNATION_BASE, ALTERNATION_PHASES).unwrap();
    let budget = plan.k[plan.k.len() - 2];
    let mut reached = None;
    for step in geometric_steps(budget, 16) {
        let (mp, va) = plan.empirical_moments(step + 1, &r);
        let counts = plan.edge_counts(step);
        let c_edges: u64 = counts
            .iter()
            .filter(|((a, b), _)| *a == C || *b == C)
            .map(|(_, n)| n)
            .sum();
        let c_freq = c_edges as f64 / step as f64;
        let (mp, va) = (mp.to_f64(), va.to_f64());
        if (mp - 1.5).abs() <= MOMENT_TOLERANCE && (va - 2.25).abs() <= MOMENT_TOLERANCE && c_freq < C_EDGE_TOLERANCE {
            reached = Some((step, mp, va, c_freq));
            break;
        }
    }
    let detail = match reached {
        Some((step, mp, va, c)) => format!(
            "{EULER_VECTORS} Euler strategies, {euler_mismatch} mismatches; plan within tolerance at step {step} \
             (budget {budget}): mp {mp:.4}, va {va:.4}, C-edge frequency {c:.5}"
        ),
        None => format!(
            "{EULER_VECTORS} Euler strategies, {euler_mismatch} mismatches; plan not within tolerance by step {budget}"
        ),
    };
    Outcome::new(euler_mismatch == 0 && reached.is_some(), detail)
}

#[test]
fn acceptance() {
    let caps = OracleCaps::default();
    let corpus = window_corpus();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let (c1, c2, shift1) = window_criteria(&corpus, &caps);
    results.push(("scheme matches history oracle", c1));
    results.push(("scheme size within memory bound", c2));
    let (c3, shift3) = product_criterion(&corpus, &caps);
    results.push(("product scheme matches joint oracle", c3));
    let (c4, shift4) = combined_criterion(&caps);
    results.push(("combined verdicts and max bound match oracle", c4));
    let (c5, shift5) = hardness_criterion(&caps);
    results.push(("reduction verdicts match formula oracle", c5));
    results.push(("four-state example values", four_state_values()));
    results.push(("variance lower bound algebra", algebra_criterion()));
    results.push(("Euler strategy and phase schedule", euler_and_phase_criterion()));
    let shifts = [shift1.len(), shift3.len(), shift4.len(), shift5.len()];
    results.push((
        "verdicts invariant under affine shift (1/10, 10)",
        Outcome::new(
            shifts.iter().all(|&c| c == 0),
            format!("changed verdicts per suite (window, product, combined, reduction): {shifts:?}"),
        ),
    ));

    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "[{}] {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
