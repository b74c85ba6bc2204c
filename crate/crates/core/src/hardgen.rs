//! Balanced-SAT / balanced-QBF formulas and their reduction to
//! window-stability games.
//!
//! For a formula with `n` variables (`n` even) and `m` clauses the game has
//! one assignment gadget `G_0` (states `s_0^i`, `t_0^{i,1}`, `t_0^{i,0}`),
//! one clause gadget `G_j` per clause (the same states plus `r_j^{k,z}` for
//! every literal of `C_j`), and a force path `u_j^1 … u_j^{2m}` after
//! every gadget. Every gadget plus its force path has exactly `W = 2(n+m)`
//! states, so each window of length `W` sees every variable exactly once.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Lasso, Owner, RewardFunction, StateId};
use crate::objective::WindowObjective;
use crate::rational::Rational;
use crate::window::build_scheme_rooted;

/// A CNF formula over variables `1..=num_vars`; literals are DIMACS integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    #[serde(rename = "e")]
    Exists,
    #[serde(rename = "a")]
    Forall,
}

/// A prenex CNF formula `Q_1 x_1 … Q_n x_n φ`, quantified in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qbf {
    pub prefix: Vec<Quantifier>,
    pub matrix: Cnf,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self> {
        let cnf = Cnf { num_vars, clauses };
        cnf.validate()?;
        Ok(cnf)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, c) in self.clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::BadFormula(format!("clause {} is empty", j + 1)));
            }
            if let Some(&l) = c.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > self.num_vars) {
                return Err(Error::BadFormula(format!("literal {l} in clause {}", j + 1)));
            }
        }
        Ok(())
    }

    /// Whether `assignment[i]` (for variable `i + 1`) satisfies every clause.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&format!("{l} "));
            }
            out.push_str("0\n");
        }
        out
    }
}

impl Qbf {
    pub fn new(prefix: Vec<Quantifier>, matrix: Cnf) -> Result<Self> {
        if prefix.len() != matrix.num_vars {
            return Err(Error::BadFormula(format!(
                "prefix quantifies {} of {} variables",
                prefix.len(),
                matrix.num_vars
            )));
        }
        matrix.validate()?;
        Ok(Qbf { prefix, matrix })
    }

    pub fn existential(matrix: Cnf) -> Self {
        Qbf {
            prefix: vec![Quantifier::Exists; matrix.num_vars],
            matrix,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.matrix.num_vars
    }

    /// DIMACS text with a `q e 1 a 2 …` prefix line.
    pub fn to_dimacs(&self) -> String {
        let mut out = self.matrix.to_dimacs();
        let mut q = String::from("q");
        for (i, p) in self.prefix.iter().enumerate() {
            let c = match p {
                Quantifier::Exists => 'e',
                Quantifier::Forall => 'a',
            };
            q.push_str(&format!(" {c} {}", i + 1));
        }
        let header_end = out.find('\n').map(|p| p + 1).unwrap_or(0);
        out.insert_str(header_end, &(q + "\n"));
        out
    }
}

impl FromStr for Cnf {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Ok(text.parse::<Qbf>()?.matrix)
    }
}

/// Parses DIMACS CNF. Quantifiers come from `q e 1 a 2 …` lines or QDIMACS
/// `e …` / `a …` lines; unlisted variables are existential. Variables must
/// be quantified in increasing order.
impl FromStr for Qbf {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut num_vars: Option<usize> = None;
        let mut expected_clauses: Option<usize> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        let mut quant: Vec<(usize, Quantifier)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("p") => {
                    if tok.next() != Some("cnf") {
                        return Err(bad("expected 'p cnf <vars> <clauses>'"));
                    }
                    let n = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad variable count"))?;
                    let m = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad clause count"))?;
                    num_vars = Some(n);
                    expected_clauses = Some(m);
                }
                Some("q") => {
                    let mut q = None;
                    for t in tok {
                        match t {
                            "e" => q = Some(Quantifier::Exists),
                            "a" => q = Some(Quantifier::Forall),
                            "0" => {}
                            v => {
                                let v: usize = v.parse().map_err(|_| bad("bad prefix token"))?;
                                quant.push((v, q.ok_or_else(|| bad("variable before quantifier"))?));
                            }
                        }
                    }
                }
                Some(first @ ("e" | "a")) => {
                    let q = if first == "e" {
                        Quantifier::Exists
                    } else {
                        Quantifier::Forall
                    };
                    for t in tok {
                        let v: usize = t.parse().map_err(|_| bad("bad prefix token"))?;
                        if v != 0 {
                            quant.push((v, q));
                        }
                    }
                }
                Some(_) => {
                    for t in line.split_whitespace() {
                        let l: i64 = t.parse().map_err(|_| bad("bad literal"))?;
                        if l == 0 {
                            clauses.push(std::mem::take(&mut current));
                        } else {
                            current.push(l);
                        }
                    }
                }
                None => {}
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let n = num_vars.ok_or_else(|| Error::Parse("missing 'p cnf' header".into()))?;
        if let Some(m) = expected_clauses {
            if m != clauses.len() {
                return Err(Error::Parse(format!(
                    "header declares {m} clauses, found {}",
                    clauses.len()
                )));
            }
        }
        let mut prefix = vec![Quantifier::Exists; n];
        let mut last = 0;
        for (v, q) in quant {
            if v == 0 || v > n {
                return Err(Error::Parse(format!("quantified variable {v} out of range")));
            }
            if v <= last {
                return Err(Error::BadFormula("quantifier prefix must follow variable order".into()));
            }
            last = v;
            prefix[v - 1] = q;
        }
        Qbf::new(prefix, Cnf::new(n, clauses)?)
    }
}

/// Appends `n` fresh innermost existential variables `x_{n+1} … x_{2n}`
/// with the clauses `x_i ∨ ¬x_i`. The result has a balanced model iff the
/// input is true.
pub fn qbf_to_balanced(psi: &Qbf) -> Qbf {
    let n = psi.num_vars();
    let mut prefix = psi.prefix.clone();
    prefix.extend(std::iter::repeat_n(Quantifier::Exists, n));
    let mut clauses = psi.matrix.clauses.clone();
    for i in n + 1..=2 * n {
        clauses.push(vec![i as i64, -(i as i64)]);
    }
    Qbf {
        prefix,
        matrix: Cnf {
            num_vars: 2 * n,
            clauses,
        },
    }
}

/// Random formula with `m` clauses of 1 to 3 distinct variables.
pub fn random_cnf(rng: &mut impl Rng, n: usize, m: usize) -> Cnf {
    let clauses = (0..m)
        .map(|_| {
            let size = rng.gen_range(1..=3.min(n));
            let mut vars: Vec<usize> = Vec::new();
            while vars.len() < size {
                let v = rng.gen_range(1..=n);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter()
                .map(|v| if rng.gen_bool(0.5) { v as i64 } else { -(v as i64) })
                .collect()
        })
        .collect();
    Cnf { num_vars: n, clauses }
}

pub fn random_qbf(rng: &mut impl Rng, n: usize, m: usize) -> Qbf {
    let matrix = random_cnf(rng, n, m);
    let prefix = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Quantifier::Forall
            } else {
                Quantifier::Exists
            }
        })
        .collect();
    Qbf { prefix, matrix }
}

/// Gadget role of a generated state. Gadget `0` is the assignment gadget,
/// gadgets `1..=m` check the clauses; variable and force indices start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Role {
    S { gadget: usize, var: usize },
    T { gadget: usize, var: usize, value: bool },
    R { gadget: usize, var: usize, value: bool },
    U { gadget: usize, index: usize },
}

impl Role {
    /// The sat gadget a state belongs to (force states belong to none).
    pub fn sat_gadget(&self) -> Option<usize> {
        match *self {
            Role::S { gadget, .. } | Role::T { gadget, .. } | Role::R { gadget, .. } => Some(gadget),
            Role::U { .. } => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Role::S { gadget, var } => write!(f, "s_{gadget}^{var}"),
            Role::T { gadget, var, value } => write!(f, "t_{gadget}^{{{var},{}}}", value as u8),
            Role::R { gadget, var, value } => write!(f, "r_{gadget}^{{{var},{}}}", value as u8),
            Role::U { gadget, index } => write!(f, "u_{gadget}^{index}"),
        }
    }
}

/// A generated game, its initial state and window objective.
#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub game: Game,
    pub initial: StateId,
    /// The objective over non-negative integer rewards `10·ρ + 1`.
    pub objective: WindowObjective,
    /// The objective over the original rewards in `{−1/10, 0, 1/10, 1, 11/10}`.
    pub original: WindowObjective,
    /// `(t, c)` with shifted reward `c·(ρ + t)`.
    pub shift: (Rational, Rational),
    pub roles: Vec<Role>,
    pub num_vars: usize,
    pub num_clauses: usize,
    /// Per clause: its distinct literals `(k, z)`, one `r_j^{k,z}` state each.
    pub clause_literals: Vec<Vec<(usize, bool)>>,
}

/// Number of states of the instance for `n` variables and the given clauses.
pub fn expected_state_count(n: usize, clauses: &[Vec<i64>]) -> usize {
    let m = clauses.len();
    let lits: usize = clauses.iter().map(|c| clause_literals(c).len()).sum();
    3 * n * (m + 1) + lits + 2 * m * (m + 1)
}

/// Distinct literals of a clause as `(variable, positive)`, sorted.
///
/// A variable occurring with both signs yields two literals, so the clause
/// gadget offers a witness state for either truth value.
pub fn clause_literals(clause: &[i64]) -> Vec<(usize, bool)> {
    let mut out: Vec<(usize, bool)> = clause.iter().map(|&l| (l.unsigned_abs() as usize, l > 0)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn gen_balanced_sat_instance(phi: &Cnf) -> Result<ReductionInstance> {
    gen_balanced_qbf_instance(&Qbf::existential(phi.clone()))
}

pub fn gen_balanced_qbf_instance(psi: &Qbf) -> Result<ReductionInstance> {
    let n = psi.num_vars();
    let phi = &psi.matrix;
    phi.validate()?;
    if !n.is_multiple_of(2) {
        return Err(Error::OddN(n));
    }
    if n == 0 {
        return Err(Error::BadFormula("no variables".into()));
    }
    if let Some(j) = phi.clauses.iter().position(|c| c.len() > 3) {
        return Err(Error::ClauseTooBig(j + 1));
    }
    let m = phi.clauses.len();
    if m == 0 {
        return Err(Error::BadFormula("no clauses".into()));
    }
    let clause_lits: Vec<Vec<(usize, bool)>> = phi.clauses.iter().map(|c| clause_literals(c)).collect();

    let mut roles: Vec<Role> = Vec::new();
    let mut owners: Vec<Owner> = Vec::new();
    // Rewards in tenths.
    let mut tenths: Vec<i64> = Vec::new();
    let mut add = |role: Role, owner: Owner, r: i64, roles: &mut Vec<Role>| {
        roles.push(role);
        owners.push(owner);
        tenths.push(r);
        roles.len() - 1
    };

    let mut s_id = vec![vec![0; n + 1]; m + 1];
    let mut t_id = vec![vec![[0; 2]; n + 1]; m + 1];
    let mut r_id: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n + 1]; m + 1];
    let mut u_id = vec![vec![0; 2 * m + 1]; m + 1];
    for j in 0..=m {
        for i in 1..=n {
            let owner = if j == 0 && psi.prefix[i - 1] == Quantifier::Forall {
                Owner::Diamond
            } else {
                Owner::Box
            };
            s_id[j][i] = add(Role::S { gadget: j, var: i }, owner, 0, &mut roles);
            t_id[j][i][1] = add(
                Role::T {
                    gadget: j,
                    var: i,
                    value: true,
                },
                Owner::Box,
                10,
                &mut roles,
            );
            t_id[j][i][0] = add(
                Role::T {
                    gadget: j,
                    var: i,
                    value: false,
                },
                Owner::Box,
                0,
                &mut roles,
            );
        }
        if j > 0 {
            for &(k, z) in &clause_lits[j - 1] {
                let r = if z { 11 } else { 1 };
                r_id[j][k].push(add(
                    Role::R {
                        gadget: j,
                        var: k,
                        value: z,
                    },
                    Owner::Box,
                    r,
                    &mut roles,
                ));
            }
        }
        for l in 1..=2 * m {
            let r = match () {
                _ if j > 0 && l == 2 * j - 1 => -1,
                _ if j > 0 && l == 2 * j => 1,
                _ => 0,
            };
            u_id[j][l] = add(Role::U { gadget: j, index: l }, Owner::Box, r, &mut roles);
        }
    }

    let mut edges = Vec::new();
    for j in 0..=m {
        for i in 1..=n {
            let next = if i < n { s_id[j][i + 1] } else { u_id[j][1] };
            for b in 0..2 {
                edges.push((s_id[j][i], t_id[j][i][b]));
                edges.push((t_id[j][i][b], next));
            }
            for &r in &r_id[j][i] {
                edges.push((s_id[j][i], r));
                edges.push((r, next));
            }
        }
        for l in 1..2 * m {
            edges.push((u_id[j][l], u_id[j][l + 1]));
        }
        edges.push((u_id[j][2 * m], s_id[j % m + 1][1]));
    }
    let labels = roles.iter().map(Role::to_string).collect();
    let game = Game::new(owners, &edges)?.with_labels(labels);
    debug_assert_eq!(game.num_states(), expected_state_count(n, &phi.clauses));

    let w = 2 * (n + m);
    let wi = w as i64;
    let original = WindowObjective::scalar(
        w,
        1,
        RewardFunction::new("r", tenths.iter().map(|&t| vec![t]).collect(), 10)?,
        Rational::new(n as i64, 2 * wi),
        Rational::new(n as i64, 2 * wi) + Rational::new(1, 5 * wi),
    )?;
    let shift = (Rational::new(1, 10), Rational::integer(10));
    let objective = original.shifted(&shift.0, &shift.1)?;
    Ok(ReductionInstance {
        game,
        initial: s_id[0][1],
        objective,
        original,
        shift,
        roles,
        num_vars: n,
        num_clauses: m,
        clause_literals: clause_lits,
    })
}

impl ReductionInstance {
    pub fn window(&self) -> usize {
        self.objective.window
    }

    /// Whether the controller achieves the objective from the initial state.
    pub fn solve(&self) -> Result<bool> {
        self.solve_with(&self.objective)
    }

    /// Verdict on the unshifted rewards.
    pub fn solve_original(&self) -> Result<bool> {
        self.solve_with(&self.original)
    }

    fn solve_with(&self, phi: &WindowObjective) -> Result<bool> {
        let scheme = build_scheme_rooted(&self.game, phi, &[self.initial])?;
        Ok(scheme.init(self.initial).is_some())
    }

    fn find(&self, role: Role) -> Option<StateId> {
        self.roles.iter().position(|r| *r == role)
    }

    /// The run of the copying strategy for a total assignment: choose
    /// `η(x_i)` in the assignment gadget and, in clause gadget `j`, visit the
    /// `r` state of the first variable whose literal `C_j` satisfies.
    pub fn assignment_lasso(&self, eta: &[bool]) -> Result<Lasso> {
        let n = self.num_vars;
        let missing = |r: Role| Error::BadFormula(format!("no state {r}"));
        let segment = |j: usize| -> Result<Vec<StateId>> {
            let witness = if j == 0 {
                None
            } else {
                self.clause_literals[j - 1]
                    .iter()
                    .find(|&&(k, z)| eta[k - 1] == z)
                    .map(|&(k, _)| k)
            };
            let mut out = Vec::new();
            for i in 1..=n {
                let s = Role::S { gadget: j, var: i };
                out.push(self.find(s).ok_or_else(|| missing(s))?);
                let next = if witness == Some(i) {
                    Role::R {
                        gadget: j,
                        var: i,
                        value: eta[i - 1],
                    }
                } else {
                    Role::T {
                        gadget: j,
                        var: i,
                        value: eta[i - 1],
                    }
                };
                out.push(self.find(next).ok_or_else(|| missing(next))?);
            }
            for l in 1..=2 * self.num_clauses {
                let u = Role::U { gadget: j, index: l };
                out.push(self.find(u).ok_or_else(|| missing(u))?);
            }
            Ok(out)
        };
        let prefix = segment(0)?;
        let mut cycle = Vec::new();
        for j in 1..=self.num_clauses {
            cycle.extend(segment(j)?);
        }
        let lasso = Lasso::new(prefix, cycle);
        lasso.validate(&self.game)?;
        Ok(lasso)
    }

    /// Provenance: the role of every state and the index conventions used.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "initial": self.initial,
            "states": self.roles.iter().enumerate().map(|(s, r)| serde_json::json!({
                "id": s,
                "name": r.to_string(),
                "role": r,
            })).collect::<Vec<_>>(),
            "window": self.objective.window,
            "checkpoint": self.objective.checkpoint,
            "shift": {"t": self.shift.0, "c": self.shift.1},
            "conventions": [
                "force states are numbered u_j^1 .. u_j^{2m}; gadget exits enter u_j^1",
                "u_j^{2m} enters s_{(j mod m)+1}^1",
                "t_j^{i,1} has reward 1; r_j^{k,z} has 11/10 if z = 1 and 1/10 otherwise",
                "a variable occurring with both signs in C_j gets both r_j^{k,1} and r_j^{k,0}",
                "rewards are stored as 10*r + 1 with bounds shifted alike",
            ],
        })
    }
}

/// The decomposition `ρ(h) = A + B + (B + C)/10 + F` of a window path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowClassification {
    /// 1: two sat gadgets and `F = 0`; 2: one sat gadget and `|F| ≤ 1/10`.
    pub case: u8,
    pub assignment: Vec<bool>,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub force: Rational,
    /// `ρ(h)` in original units, summed directly.
    pub reward: Rational,
}

impl WindowClassification {
    pub fn decomposed(&self) -> Rational {
        Rational::integer((self.a + self.b) as i64) + Rational::new((self.b + self.c) as i64, 10) + self.force.clone()
    }
}

/// Classifies a window path (`W` consecutive states of a run).
pub fn classify_window_path(inst: &ReductionInstance, path: &[StateId]) -> Result<WindowClassification> {
    let n = inst.num_vars;
    let bad = |msg: String| Error::NotAssignmentPath(msg);
    let mut seen = std::collections::HashSet::new();
    if let Some(&s) = path.iter().find(|&&s| !seen.insert(s)) {
        return Err(bad(format!("state {} repeats", inst.roles[s])));
    }
    let mut value: Vec<Option<bool>> = vec![None; n + 1];
    let mut s_seen = vec![0usize; n + 1];
    let (mut a, mut b, mut c) = (0, 0, 0);
    let mut force = Rational::zero();
    let mut reward = Rational::zero();
    let mut gadgets = Vec::new();
    for &s in path {
        let role = inst.roles.get(s).ok_or(Error::UnknownState(s))?;
        reward += &inst.original.reward.value(s, 0);
        if let Some(g) = role.sat_gadget() {
            if !gadgets.contains(&g) {
                gadgets.push(g);
            }
        }
        match *role {
            Role::S { var, .. } => s_seen[var] += 1,
            Role::T { var, value: v, .. } | Role::R { var, value: v, .. } => {
                if value[var].replace(v).is_some() {
                    return Err(bad(format!("variable {var} chosen twice")));
                }
                match role {
                    Role::T { .. } => a += v as usize,
                    _ if v => b += 1,
                    _ => c += 1,
                }
            }
            Role::U { .. } => force += &inst.original.reward.value(s, 0),
        }
    }
    let assignment = (1..=n)
        .map(|i| value[i].ok_or_else(|| bad(format!("variable {i} not chosen"))))
        .collect::<Result<Vec<_>>>()?;
    let tenth = Rational::new(1, 10);
    let case = if gadgets.len() == 2 && force.is_zero() {
        1
    } else if gadgets.len() == 1 && force.abs() <= tenth && s_seen[1..].iter().all(|&k| k == 1) {
        2
    } else {
        return Err(bad(format!("{} gadgets with force reward {force}", gadgets.len())));
    };
    Ok(WindowClassification {
        case,
        assignment,
        a,
        b,
        c,
        force,
        reward,
    })
}

/// Whether `(G, s, Φ)` is small: one-dimensional, and `W`, `D`, `maxr` and
/// the reduced numerators and denominators of `μ`, `ν` are at most `|S|`.
pub fn is_small(game: &Game, phi: &WindowObjective) -> bool {
    let n = game.num_states() as i64;
    let fits = |r: &Rational| {
        let (p, q) = match r.to_i64_pair() {
            Some(x) => x,
            None => return false,
        };
        p.abs() <= n && q <= n
    };
    phi.dim() == 1
        && phi.window as i64 <= n
        && phi.checkpoint as i64 <= n
        && phi.reward.maxr() <= n
        && phi.reward.scale() == 1
        && phi.mu.iter().chain(&phi.nu).all(fits)
}
