//! The `winstab` command-line front end.
//!
//! Exit codes: 0 success, 1 negative verdict, 2 usage or input error,
//! 3 size cap exceeded.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fixtures::{random_game, random_reward, random_window};
use crate::game::{Game, Lasso, Owner, StateId};
use crate::hardgen::{
    gen_balanced_qbf_instance, gen_balanced_sat_instance, random_cnf, random_qbf, Cnf, Qbf, ReductionInstance,
};
use crate::io::{
    objectives_to_json, read_json, read_objectives, read_text, to_dot, trace_csv, write_json, GameBundle, Objective,
    ObjectiveSpec,
};
use crate::mpsolve::{build_multi_scheme_capped, max_bound_with, solve_combined_with};
use crate::objective::{MeanPayoffObjective, MultiObjective, VarianceObjective, WindowObjective};
use crate::oracle::{balanced_qbf_oracle, balanced_sat_oracle, combined_oracle, window_oracle_set, OracleCaps};
use crate::rational::Rational;
use crate::scheme::{induce_strategy, product_game, product_scheme, FiniteStrategy, StrategyFile, StrategyScheme};
use crate::semantics::{lmp_sequence, mp_of_lasso, va_of_lasso};
use crate::variance::{
    convergence_trace, freq_constraints_check, freq_feasibility, geometric_steps, realizing_plan, validate_frequencies,
    SupportRule, DEFAULT_MAX_CYCLES,
};
use crate::window::build_scheme_capped;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "winstab",
    version,
    about = "Window-stability, mean-payoff and variance-stability games"
)]
pub struct Cli {
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Permissive scheme for a conjunction of window objectives.
    SolveWindow(SolveWindowArgs),
    /// Window objectives together with a mean-payoff threshold.
    SolveCombined(SolveArgs),
    /// Largest mean-payoff bound compatible with the window objectives.
    MaxBound(MaxBoundArgs),
    /// Frequency-vector feasibility of a variance-stability objective.
    VarianceCheck(VarianceArgs),
    /// Play a strategy file against a positional adversary.
    Simulate(SimulateArgs),
    /// Evaluate objectives on a lasso.
    CheckRun(CheckRunArgs),
    /// Window game from a CNF formula.
    GenSat(GenArgs),
    /// Window game from a QBF.
    GenQbf(GenArgs),
    /// Solvers against brute-force oracles on random instances.
    OracleCompare(CompareArgs),
    /// Graphviz rendering of a game.
    ExportDot(DotArgs),
}

#[derive(Debug, Args)]
pub struct SolveWindowArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long = "objective", required = true)]
    pub objectives: Vec<PathBuf>,
    /// States to report (default: all).
    #[arg(long = "state")]
    pub states: Vec<StateId>,
    /// Strategy file for the first reported winning state.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of scheme pairs.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long = "objective", required = true)]
    pub objectives: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub state: StateId,
    /// Strategy file written when the objective is achievable.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of scheme pairs.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MaxBoundArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long = "objective", required = true)]
    pub objectives: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub state: StateId,
    /// Reward to maximize (default: the reward of a mean-payoff objective).
    #[arg(long)]
    pub reward: Option<String>,
    /// Maximum number of scheme pairs.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long = "objective", required = true)]
    pub objectives: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub state: StateId,
    /// Convergence trace CSV (`step,mp,va`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Longest prefix sampled by the trace.
    #[arg(long, default_value_t = 1_000_000_000_000)]
    pub steps: u64,
    /// Phases of the schedule when the support is not strongly connected.
    #[arg(long, default_value_t = 6)]
    pub phases: usize,
    /// Maximum number of simple cycles enumerated.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub strategy: PathBuf,
    /// JSON array with the adversary's successor for every state (default:
    /// the first successor).
    #[arg(long)]
    pub adversary: Option<PathBuf>,
    /// Objectives to evaluate on the outcome.
    #[arg(long = "objective")]
    pub objectives: Vec<PathBuf>,
    /// Lasso file for the outcome.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckRunArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long = "objective", required = true)]
    pub objectives: Vec<PathBuf>,
    #[arg(long)]
    pub lasso: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// DIMACS input; a random formula is drawn when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub vars: usize,
    #[arg(long, default_value_t = 3)]
    pub clauses: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for game.json, objective.json, provenance.json and
    /// the formula.
    #[arg(long)]
    pub out: PathBuf,
    /// Also solve the generated game.
    #[arg(long)]
    pub solve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareKind {
    Window,
    Product,
    Combined,
    Sat,
    Qbf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value_t = CompareKind::Window)]
    pub kind: CompareKind,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum history states explored by the oracle per query.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            code
        }
    }
}

/// Runs a parsed command, writing the report to `out` and errors to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::SolveWindow(a) => cmd_solve_window(a),
        Command::SolveCombined(a) => cmd_solve_combined(a),
        Command::MaxBound(a) => cmd_max_bound(a),
        Command::VarianceCheck(a) => cmd_variance_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CheckRun(a) => cmd_check_run(a),
        Command::GenSat(a) => cmd_gen(a, false),
        Command::GenQbf(a) => cmd_gen(a, true),
        Command::OracleCompare(a) => cmd_oracle_compare(a),
        Command::ExportDot(a) => cmd_export_dot(a),
    };
    match result {
        Ok(report) => {
            let text = if cli.json {
                serde_json::to_string_pretty(&report.json).expect("report serializes") + "\n"
            } else {
                report.text
            };
            let _ = out.write_all(text.as_bytes());
            report.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TooLarge(_) => EXIT_CAP,
        _ => EXIT_USAGE,
    }
}

/// A command's outcome in both output formats.
pub struct Report {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

fn verdict_code(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn load(game: &Path, objectives: &[PathBuf]) -> Result<(GameBundle, Vec<Objective>)> {
    let bundle = GameBundle::read(game)?;
    let mut objs = Vec::new();
    for path in objectives {
        for spec in read_objectives(path)? {
            objs.push(spec.resolve(&bundle)?);
        }
    }
    Ok((bundle, objs))
}

struct Split {
    windows: Vec<WindowObjective>,
    mean_payoff: Vec<MeanPayoffObjective>,
    variance: Vec<VarianceObjective>,
}

fn split(objs: Vec<Objective>) -> Split {
    let mut s = Split {
        windows: Vec::new(),
        mean_payoff: Vec::new(),
        variance: Vec::new(),
    };
    for o in objs {
        match o {
            Objective::Window(w) => s.windows.push(w),
            Objective::MeanPayoff(m) => s.mean_payoff.push(m),
            Objective::Variance(v) => s.variance.push(v),
        }
    }
    s
}

fn check_state(game: &Game, s: StateId) -> Result<()> {
    if s >= game.num_states() {
        return Err(Error::UnknownState(s));
    }
    Ok(())
}

fn window_conjunction(windows: Vec<WindowObjective>) -> Result<MultiObjective> {
    MultiObjective::new(windows).map_err(|_| Error::BadObjective("at least one window objective is required".into()))
}

/// A strategy admitted by the scheme from `s`: the smallest allowed move in
/// every controller pair.
fn some_admitted_strategy(game: &Game, scheme: &StrategyScheme, s: StateId) -> Result<FiniteStrategy> {
    let product = product_game(game, scheme)?;
    let tau: Vec<Option<usize>> = (0..product.num_states())
        .map(|p| match product.game.owner(p) {
            Owner::Box => product.game.successors(p).iter().copied().min(),
            Owner::Diamond => None,
        })
        .collect();
    induce_strategy(game, scheme, &product, &tau, s)
}

fn cmd_solve_window(a: &SolveWindowArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let sp = split(objs);
    if !sp.mean_payoff.is_empty() || !sp.variance.is_empty() {
        return Err(Error::BadObjective("solve-window takes window objectives only".into()));
    }
    let delta = window_conjunction(sp.windows)?;
    let game = &bundle.game;
    let cap = a.cap.unwrap_or(usize::MAX);
    for &s in &a.states {
        check_state(game, s)?;
    }
    let roots: Vec<StateId> = (0..game.num_states()).collect();
    let schemes = delta
        .conjuncts()
        .iter()
        .map(|phi| build_scheme_capped(game, phi, &roots, cap))
        .collect::<Result<Vec<_>>>()?;
    let scheme = if schemes.len() == 1 {
        schemes[0].clone()
    } else {
        let refs: Vec<&StrategyScheme> = schemes.iter().collect();
        let p = product_scheme(game, &refs)?;
        if p.num_pairs() > cap {
            return Err(Error::TooLarge(format!("more than {cap} product scheme pairs")));
        }
        p
    };
    let queried = if a.states.is_empty() {
        roots.clone()
    } else {
        a.states.clone()
    };
    let verdicts: Vec<(StateId, bool)> = queried.iter().map(|&s| (s, scheme.init(s).is_some())).collect();
    let all = verdicts.iter().all(|v| v.1);

    let mut strategy_path = None;
    if let Some(path) = &a.out {
        if let Some(&(s, _)) = verdicts.iter().find(|v| v.1) {
            write_json(path, &some_admitted_strategy(game, &scheme, s)?.to_file())?;
            strategy_path = Some(path.display().to_string());
        }
    }

    let mems: Vec<usize> = schemes.iter().map(StrategyScheme::num_mem).collect();
    let bound = delta.memory_bound().to_string();
    let mut text = String::new();
    for (s, w) in &verdicts {
        text += &format!(
            "state {s} ({}): {}\n",
            game.label(*s),
            if *w { "winning" } else { "losing" }
        );
    }
    for (i, m) in mems.iter().enumerate() {
        text += &format!("conjunct {i}: {m} memory elements\n");
    }
    text += &format!(
        "product: {} memory elements, {} pairs; memory bound {bound}\n",
        scheme.num_mem(),
        scheme.num_pairs()
    );
    if let Some(p) = &strategy_path {
        text += &format!("strategy written to {p}\n");
    }
    Ok(Report {
        code: verdict_code(all),
        text,
        json: json!({
            "command": "solve-window",
            "states": verdicts.iter().map(|(s, w)| json!({"state": s, "winning": w})).collect::<Vec<_>>(),
            "memory": mems,
            "product_memory": scheme.num_mem(),
            "pairs": scheme.num_pairs(),
            "memory_bound": bound,
            "strategy": strategy_path,
        }),
    })
}

fn cmd_solve_combined(a: &SolveArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let sp = split(objs);
    let [psi] = <[MeanPayoffObjective; 1]>::try_from(sp.mean_payoff)
        .map_err(|_| Error::BadObjective("exactly one mean-payoff objective is required".into()))?;
    if !sp.variance.is_empty() {
        return Err(Error::BadObjective("variance objectives are not supported here".into()));
    }
    let delta = window_conjunction(sp.windows)?;
    let game = &bundle.game;
    check_state(game, a.state)?;
    let scheme = build_multi_scheme_capped(game, &delta, &[a.state], a.cap.unwrap_or(usize::MAX))?;
    let window_ok = scheme.init(a.state).is_some();
    let sol = solve_combined_with(game, scheme, &psi, a.state)?;
    let mut strategy_path = None;
    if let (Some(path), Some(strategy)) = (&a.out, &sol.strategy) {
        write_json(path, &strategy.to_file())?;
        strategy_path = Some(path.display().to_string());
    }
    let text = format!(
        "state {}: window objectives {}; with mean payoff >= {}: {}\n{}",
        a.state,
        if window_ok { "achievable" } else { "not achievable" },
        psi.bound,
        if sol.achievable { "achievable" } else { "not achievable" },
        strategy_path
            .as_ref()
            .map(|p| format!("strategy written to {p}\n"))
            .unwrap_or_default()
    );
    Ok(Report {
        code: verdict_code(sol.achievable),
        text,
        json: json!({
            "command": "solve-combined",
            "state": a.state,
            "window_achievable": window_ok,
            "b": psi.bound,
            "achievable": sol.achievable,
            "strategy": strategy_path,
        }),
    })
}

fn cmd_max_bound(a: &MaxBoundArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let sp = split(objs);
    let reward = match (&a.reward, sp.mean_payoff.first()) {
        (Some(name), _) => bundle.reward(name)?.clone(),
        (None, Some(psi)) => psi.reward.clone(),
        (None, None) => return Err(Error::BadObjective("no reward given (use --reward)".into())),
    };
    let delta = window_conjunction(sp.windows)?;
    let game = &bundle.game;
    check_state(game, a.state)?;
    let scheme = build_multi_scheme_capped(game, &delta, &[a.state], a.cap.unwrap_or(usize::MAX))?;
    let bound = max_bound_with(game, &scheme, &reward, a.state)?;
    let text = match &bound {
        Some(b) => format!("state {}: max mean payoff of {} = {b}\n", a.state, reward.name()),
        None => format!("state {}: window objectives not achievable\n", a.state),
    };
    Ok(Report {
        code: verdict_code(bound.is_some()),
        text,
        json: json!({"command": "max-bound", "state": a.state, "reward": reward.name(), "bound": bound}),
    })
}

fn cmd_variance_check(a: &VarianceArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let sp = split(objs);
    let [obj] = <[VarianceObjective; 1]>::try_from(sp.variance)
        .map_err(|_| Error::BadObjective("exactly one variance objective is required".into()))?;
    let game = &bundle.game;
    check_state(game, a.state)?;
    let found = freq_feasibility(game, &obj, a.state, a.cap.unwrap_or(DEFAULT_MAX_CYCLES))?;
    let Some(f) = found else {
        return Ok(Report {
            code: EXIT_NEGATIVE,
            text: format!(
                "state {}: no frequency vector with mp >= {} and va <= {}\n",
                a.state, obj.mean_bound, obj.variance_bound
            ),
            json: json!({"command": "variance-check", "state": a.state, "feasible": false}),
        });
    };
    let chk = freq_constraints_check(game, &f, &obj, SupportRule::SccClosure)?;
    let strict = validate_frequencies(game, &f, SupportRule::Strict).is_ok();
    let plan = realizing_plan(game, &f, a.state, a.phases)?;
    let trace = convergence_trace(&plan, &obj.reward, &geometric_steps(a.steps.max(1), 4));
    if let Some(path) = &a.out {
        std::fs::write(path, trace_csv(&trace)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    let mut text = format!(
        "state {}: feasible, mp = {}, va = {}\nsupport: {}\n",
        a.state,
        chk.mp,
        chk.va,
        if strict {
            "strongly connected (finite memory)"
        } else {
            "within one component (infinite memory)"
        }
    );
    for ((x, y), v) in f.iter() {
        text += &format!("  f({} -> {}) = {v}\n", game.label(x), game.label(y));
    }
    if let Some(last) = trace.last() {
        text += &format!("after {} steps: mp ~ {:.6}, va ~ {:.6}\n", last.step, last.mp, last.va);
    }
    Ok(Report {
        code: EXIT_OK,
        text,
        json: json!({
            "command": "variance-check",
            "state": a.state,
            "feasible": true,
            "mp": chk.mp,
            "va": chk.va,
            "support": if strict { "strict" } else { "scc-closure" },
            "frequencies": f,
            "trace": trace,
        }),
    })
}

/// Evaluates every objective on `lasso`; returns the overall verdict and a
/// per-objective report.
fn evaluate(lasso: &Lasso, objs: &[Objective]) -> Result<(bool, Vec<Value>, String)> {
    let mut all = true;
    let mut rows = Vec::new();
    let mut text = String::new();
    for (i, o) in objs.iter().enumerate() {
        let spec = ObjectiveSpec::from_objective(o);
        let (ok, row) = match o {
            Objective::Window(phi) => {
                let rep = lmp_sequence(lasso, phi)?;
                (rep.satisfied(), json!({"first_violation": rep.first_violation}))
            }
            Objective::MeanPayoff(psi) => {
                let mp = mp_of_lasso(lasso, &psi.reward).remove(0);
                (mp >= psi.bound, json!({"mp": mp}))
            }
            Objective::Variance(v) => {
                let mp = mp_of_lasso(lasso, &v.reward).remove(0);
                let va = va_of_lasso(lasso, &v.reward).remove(0);
                (
                    mp >= v.mean_bound && va <= v.variance_bound,
                    json!({"mp": mp, "va": va}),
                )
            }
        };
        all &= ok;
        text += &format!("objective {i}: {} {}\n", if ok { "satisfied" } else { "violated" }, row);
        rows.push(json!({"objective": spec, "satisfied": ok, "detail": row}));
    }
    Ok((all, rows, text))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let game = &bundle.game;
    let file: StrategyFile = read_json(&a.strategy)?;
    let strategy = FiniteStrategy::from_file(&file);
    check_state(game, strategy.initial)?;
    let adversary: Vec<StateId> = match &a.adversary {
        Some(p) => read_json(p)?,
        None => (0..game.num_states()).map(|s| game.successors(s)[0]).collect(),
    };
    if adversary.len() != game.num_states() || adversary.iter().enumerate().any(|(s, &t)| !game.has_edge(s, t)) {
        return Err(Error::BadStrategy(
            "adversary choices must name a successor of every state".into(),
        ));
    }
    let lasso = strategy.outcome(game, &adversary)?;
    if let Some(path) = &a.out {
        write_json(path, &lasso)?;
    }
    let (ok, rows, mut text) = evaluate(&lasso, &objs)?;
    text.insert_str(
        0,
        &format!("outcome: prefix {:?}, cycle {:?}\n", lasso.prefix, lasso.cycle),
    );
    Ok(Report {
        code: verdict_code(ok),
        text,
        json: json!({"command": "simulate", "lasso": lasso, "objectives": rows, "satisfied": ok}),
    })
}

fn cmd_check_run(a: &CheckRunArgs) -> Result<Report> {
    let (bundle, objs) = load(&a.game, &a.objectives)?;
    let lasso: Lasso = read_json(&a.lasso)?;
    lasso.validate(&bundle.game)?;
    let (ok, rows, text) = evaluate(&lasso, &objs)?;
    Ok(Report {
        code: verdict_code(ok),
        text: text + &format!("verdict: {ok}\n"),
        json: json!({"command": "check-run", "objectives": rows, "satisfied": ok}),
    })
}

fn cmd_gen(a: &GenArgs, qbf: bool) -> Result<Report> {
    let (inst, formula): (ReductionInstance, String) = if qbf {
        let psi: Qbf = match &a.input {
            Some(p) => read_text(p)?.parse()?,
            None => random_qbf(&mut ChaCha8Rng::seed_from_u64(a.seed), a.vars, a.clauses),
        };
        (gen_balanced_qbf_instance(&psi)?, psi.to_dimacs())
    } else {
        let phi: Cnf = match &a.input {
            Some(p) => read_text(p)?.parse()?,
            None => random_cnf(&mut ChaCha8Rng::seed_from_u64(a.seed), a.vars, a.clauses),
        };
        (gen_balanced_sat_instance(&phi)?, phi.to_dimacs())
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io(format!("{}: {e}", a.out.display())))?;
    let bundle = GameBundle::new(
        inst.game.clone(),
        [
            inst.original.reward.clone(),
            inst.objective.reward.clone().renamed("r_shifted"),
        ],
    )?;
    bundle.write(a.out.join("game.json"))?;
    let spec = ObjectiveSpec::from_objective(&Objective::Window(inst.original.clone()));
    let shifted = match ObjectiveSpec::from_objective(&Objective::Window(inst.objective.clone())) {
        ObjectiveSpec::Window {
            window,
            checkpoint,
            mu,
            nu,
            ..
        } => ObjectiveSpec::Window {
            window,
            checkpoint,
            reward: "r_shifted".into(),
            mu,
            nu,
        },
        other => other,
    };
    std::fs::write(a.out.join("objective.json"), objectives_to_json(&[spec]) + "\n")?;
    std::fs::write(
        a.out.join("objective_shifted.json"),
        objectives_to_json(&[shifted]) + "\n",
    )?;
    write_json(a.out.join("provenance.json"), &inst.provenance())?;
    let ext = if qbf { "qdimacs" } else { "cnf" };
    std::fs::write(a.out.join(format!("formula.{ext}")), formula)?;

    let verdict = if a.solve { Some(inst.solve()?) } else { None };
    let phi = &inst.original;
    let mut text = format!(
        "{} states, W = {}, D = {}, mu = {}, nu = {}, initial state {}\nwritten to {}\n",
        inst.game.num_states(),
        phi.window,
        phi.checkpoint,
        phi.mu[0],
        phi.nu[0],
        inst.initial,
        a.out.display()
    );
    if let Some(v) = verdict {
        text += &format!("controller wins: {v}\n");
    }
    Ok(Report {
        code: verdict_code(verdict.unwrap_or(true)),
        text,
        json: json!({
            "command": if qbf { "gen-qbf" } else { "gen-sat" },
            "states": inst.game.num_states(),
            "initial": inst.initial,
            "W": phi.window,
            "D": phi.checkpoint,
            "mu": phi.mu[0],
            "nu": phi.nu[0],
            "out": a.out.display().to_string(),
            "winning": verdict,
        }),
    })
}

/// One solver/oracle comparison on a random instance; `true` on agreement.
fn compare_one(kind: CompareKind, rng: &mut ChaCha8Rng, caps: &OracleCaps) -> Result<bool> {
    match kind {
        CompareKind::Window | CompareKind::Product => {
            let game = random_game(rng, 6, 12, 0.4);
            let n = game.num_states();
            let count = if kind == CompareKind::Window { 1 } else { 2 };
            let conjuncts: Vec<WindowObjective> = (0..count)
                .map(|i| {
                    let r = random_reward(rng, &format!("r{i}"), n, 0, 2);
                    random_window(rng, r, &[2, 3, 4])
                })
                .collect();
            let schemes = conjuncts
                .iter()
                .map(|phi| crate::window::build_scheme(&game, phi))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&StrategyScheme> = schemes.iter().collect();
            let scheme = if count == 1 {
                schemes[0].clone()
            } else {
                product_scheme(&game, &refs)?
            };
            Ok(scheme.winning_states() == window_oracle_set(&game, &conjuncts, caps)?)
        }
        CompareKind::Combined => {
            let game = random_game(rng, 5, 10, 0.4);
            let n = game.num_states();
            let w = random_reward(rng, "w", n, 0, 2);
            let phi = random_window(rng, w, &[2, 3]);
            let reward = random_reward(rng, "r", n, -2, 3);
            let delta = MultiObjective::single(phi.clone());
            for s in 0..n {
                let expected = combined_oracle(&game, std::slice::from_ref(&phi), &reward, s, caps)?;
                let scheme = build_multi_scheme_capped(&game, &delta, &[s], usize::MAX)?;
                if max_bound_with(&game, &scheme, &reward, s)? != expected {
                    return Ok(false);
                }
                let b = Rational::new(rng.gen_range(-4..=6), 2);
                let psi = MeanPayoffObjective::new(reward.clone(), b.clone())?;
                let got = solve_combined_with(&game, scheme, &psi, s)?.achievable;
                if got != expected.is_some_and(|v| v >= b) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        CompareKind::Sat => {
            let n = [2, 4][rng.gen_range(0..2)];
            let m = rng.gen_range(1..=4);
            let phi = random_cnf(rng, n, m);
            Ok(gen_balanced_sat_instance(&phi)?.solve()? == balanced_sat_oracle(&phi, caps)?)
        }
        CompareKind::Qbf => {
            let n = [2, 4][rng.gen_range(0..2)];
            let m = rng.gen_range(1..=4);
            let psi = random_qbf(rng, n, m);
            Ok(gen_balanced_qbf_instance(&psi)?.solve()? == balanced_qbf_oracle(&psi, caps)?)
        }
    }
}

fn cmd_oracle_compare(a: &CompareArgs) -> Result<Report> {
    let mut caps = OracleCaps::default();
    if let Some(c) = a.cap {
        caps.history_states = c;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut disagreements = Vec::new();
    for i in 0..a.count {
        if !compare_one(a.kind, &mut rng, &caps)? {
            disagreements.push(i);
        }
    }
    let kind = format!("{:?}", a.kind).to_lowercase();
    Ok(Report {
        code: verdict_code(disagreements.is_empty()),
        text: format!(
            "{kind}: {} instances, {} disagreements{}\n",
            a.count,
            disagreements.len(),
            if disagreements.is_empty() {
                String::new()
            } else {
                format!(" at {disagreements:?}")
            }
        ),
        json: json!({
            "command": "oracle-compare",
            "kind": kind,
            "seed": a.seed,
            "instances": a.count,
            "disagreements": disagreements,
        }),
    })
}

fn cmd_export_dot(a: &DotArgs) -> Result<Report> {
    let bundle = GameBundle::read(&a.game)?;
    let dot = to_dot(&bundle);
    if let Some(path) = &a.out {
        std::fs::write(path, &dot).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(Report {
        code: EXIT_OK,
        json: json!({
            "command": "export-dot",
            "nodes": bundle.game.num_states(),
            "edges": bundle.game.num_edges(),
            "dot": dot,
        }),
        text: if a.out.is_some() { String::new() } else { dot },
    })
}
