use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winstab::fixtures::{random_circulation, random_game, random_strongly_connected};
use winstab::hardgen::{random_cnf, random_qbf, Cnf, Qbf};
use winstab::io::{objectives_to_json, parse_objectives, read_json, write_json, GameBundle, ObjectiveSpec};
use winstab::scheme::{FiniteStrategy, StrategyFile};
use winstab::variance::FrequencyVector;
use winstab::{Lasso, Rational, RewardFunction};

fn rational(r: &mut ChaCha8Rng) -> Rational {
    Rational::new(r.gen_range(-20..=20), r.gen_range(1..=6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn game_bundle_round_trip(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&mut r, 6, 12, 0.5);
        let n = game.num_states();
        let labelled = r.gen_bool(0.5);
        let game = if labelled { game.with_labels((0..n).map(|s| format!("q{s}")).collect()) } else { game };
        let dim = r.gen_range(1..=2);
        let values: Vec<Vec<Rational>> = (0..n).map(|_| (0..dim).map(|_| rational(&mut r)).collect()).collect();
        let a = RewardFunction::from_rationals("a", &values).unwrap();
        let b = RewardFunction::scalar("b", &(0..n).map(|_| r.gen_range(-3..=3)).collect::<Vec<_>>());
        let bundle = GameBundle::new(game, [a, b]).unwrap();
        let text = bundle.to_json();
        let back = GameBundle::parse(&text).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn objective_round_trip(w in 1usize..6, mu in -9i64..9, nu in -9i64..9, den in 1i64..7, b in -5i64..5) {
        let specs = vec![
            ObjectiveSpec::Window {
                window: w,
                checkpoint: 1,
                reward: "r".into(),
                mu: winstab::io::Bounds::Scalar(Rational::new(mu, den)),
                nu: winstab::io::Bounds::Vector(vec![Rational::new(nu, den), Rational::integer(nu)]),
            },
            ObjectiveSpec::MeanPayoff { reward: "r".into(), b: Rational::new(b, den) },
            ObjectiveSpec::Variance { reward: "s".into(), b: Rational::integer(b), c: Rational::new(mu.abs(), den) },
        ];
        let text = objectives_to_json(&specs);
        prop_assert_eq!(parse_objectives(&text).unwrap(), specs);
    }

    #[test]
    fn lasso_and_strategy_round_trip(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let dir = tempfile::tempdir().unwrap();
        let lasso = Lasso::new(
            (0..r.gen_range(0..4)).map(|_| r.gen_range(0..9)).collect(),
            (0..r.gen_range(1..5)).map(|_| r.gen_range(0..9)).collect(),
        );
        let path = dir.path().join("lasso.json");
        write_json(&path, &lasso).unwrap();
        prop_assert_eq!(read_json::<Lasso>(&path).unwrap(), lasso);

        let strategy = FiniteStrategy {
            initial: r.gen_range(0..5),
            initial_memory: r.gen_range(0..3),
            update: (0..r.gen_range(1..8)).map(|_| ((r.gen_range(0..5), r.gen_range(0..3)), r.gen_range(0..3))).collect(),
            choice: (0..r.gen_range(0..8)).map(|_| ((r.gen_range(0..5), r.gen_range(0..3)), r.gen_range(0..5))).collect(),
        };
        let path = dir.path().join("strategy.json");
        write_json(&path, &strategy.to_file()).unwrap();
        let back: StrategyFile = read_json(&path).unwrap();
        prop_assert_eq!(FiniteStrategy::from_file(&back), strategy);
    }

    #[test]
    fn frequency_vector_round_trip(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let game = random_strongly_connected(&mut r, 5, 5);
        let f = random_circulation(&mut r, &game, 7);
        let text = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<FrequencyVector>(&text).unwrap(), f);
    }

    #[test]
    fn dimacs_round_trip(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = r.gen_range(1..8);
        let m = r.gen_range(1..8);
        let phi = random_cnf(&mut r, n, m);
        prop_assert_eq!(phi.to_dimacs().parse::<Cnf>().unwrap(), phi);
        let psi = random_qbf(&mut r, n, m);
        prop_assert_eq!(psi.to_dimacs().parse::<Qbf>().unwrap(), psi);
    }
}
