//! File formats: games with named rewards, objectives, lassos, strategies,
//! frequency vectors, convergence traces and Graphviz export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Owner, RewardFunction, StateId};
use crate::objective::{MeanPayoffObjective, VarianceObjective, WindowObjective};
use crate::rational::Rational;
use crate::variance::TracePoint;

/// On-disk game: `{"states": [{"id", "owner", "rewards": {name: [..]}}], "edges": [[a, b]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameFile {
    pub states: Vec<StateRecord>,
    pub edges: Vec<[StateId; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub id: StateId,
    pub owner: Owner,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub rewards: BTreeMap<String, Vec<Rational>>,
}

/// A game together with its reward functions, keyed by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameBundle {
    pub game: Game,
    pub rewards: BTreeMap<String, RewardFunction>,
}

impl GameBundle {
    pub fn new(game: Game, rewards: impl IntoIterator<Item = RewardFunction>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in rewards {
            r.check_states(&game)?;
            if map.insert(r.name().to_string(), r).is_some() {
                return Err(Error::BadReward("duplicate reward name".into()));
            }
        }
        Ok(GameBundle { game, rewards: map })
    }

    pub fn reward(&self, name: &str) -> Result<&RewardFunction> {
        self.rewards
            .get(name)
            .ok_or_else(|| Error::BadReward(format!("unknown reward {name:?}")))
    }

    pub fn from_file(file: &GameFile) -> Result<Self> {
        let n = file.states.len();
        let mut records: Vec<Option<&StateRecord>> = vec![None; n];
        for rec in &file.states {
            match records.get_mut(rec.id) {
                Some(slot @ None) => *slot = Some(rec),
                Some(Some(_)) => return Err(Error::Parse(format!("state {} listed twice", rec.id))),
                None => return Err(Error::Parse(format!("state id {} out of range 0..{n}", rec.id))),
            }
        }
        let records: Vec<&StateRecord> = records.into_iter().map(|r| r.expect("ids are a permutation")).collect();
        let edges: Vec<(StateId, StateId)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut game = Game::new(records.iter().map(|r| r.owner).collect(), &edges)?;
        if records.iter().any(|r| r.label.is_some()) {
            let labels = records
                .iter()
                .map(|r| r.label.clone().unwrap_or_else(|| format!("s{}", r.id)))
                .collect();
            game = game.with_labels(labels);
        }
        let names: Vec<&String> = records.first().map(|r| r.rewards.keys().collect()).unwrap_or_default();
        let mut rewards = Vec::new();
        for name in names {
            let values = records
                .iter()
                .map(|r| {
                    r.rewards
                        .get(name)
                        .cloned()
                        .ok_or_else(|| Error::BadReward(format!("state {} has no value for reward {name:?}", r.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            rewards.push(RewardFunction::from_rationals(name.clone(), &values)?);
        }
        if let Some(r) = records.iter().find(|r| r.rewards.len() != rewards.len()) {
            return Err(Error::BadReward(format!(
                "state {} declares a different set of rewards",
                r.id
            )));
        }
        GameBundle::new(game, rewards)
    }

    pub fn to_file(&self) -> GameFile {
        let g = &self.game;
        let states = (0..g.num_states())
            .map(|s| StateRecord {
                id: s,
                owner: g.owner(s),
                label: (g.label(s) != format!("s{s}")).then(|| g.label(s).to_string()),
                rewards: self
                    .rewards
                    .iter()
                    .map(|(name, r)| (name.clone(), r.vector(s)))
                    .collect(),
            })
            .collect();
        let edges = g.edges().into_iter().map(|(a, b)| [a, b]).collect();
        GameFile { states, edges }
    }

    pub fn parse(text: &str) -> Result<Self> {
        GameBundle::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("game serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        GameBundle::from_file(&read_json(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, &self.to_file())
    }
}

/// Per-dimension bounds: a single value for one-dimensional rewards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Scalar(Rational),
    Vector(Vec<Rational>),
}

impl Bounds {
    fn into_vec(self) -> Vec<Rational> {
        match self {
            Bounds::Scalar(r) => vec![r],
            Bounds::Vector(v) => v,
        }
    }

    fn from_vec(v: &[Rational]) -> Self {
        match v {
            [r] => Bounds::Scalar(r.clone()),
            _ => Bounds::Vector(v.to_vec()),
        }
    }
}

/// One entry of an objective file; rewards are referenced by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ObjectiveSpec {
    Window {
        #[serde(rename = "W")]
        window: usize,
        #[serde(rename = "D")]
        checkpoint: usize,
        reward: String,
        mu: Bounds,
        nu: Bounds,
    },
    #[serde(rename = "meanpayoff")]
    MeanPayoff {
        reward: String,
        b: Rational,
    },
    Variance {
        reward: String,
        b: Rational,
        c: Rational,
    },
}

/// An objective bound to a reward function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    Window(WindowObjective),
    MeanPayoff(MeanPayoffObjective),
    Variance(VarianceObjective),
}

impl ObjectiveSpec {
    pub fn resolve(&self, bundle: &GameBundle) -> Result<Objective> {
        Ok(match self {
            ObjectiveSpec::Window {
                window,
                checkpoint,
                reward,
                mu,
                nu,
            } => Objective::Window(WindowObjective::new(
                *window,
                *checkpoint,
                bundle.reward(reward)?.clone(),
                mu.clone().into_vec(),
                nu.clone().into_vec(),
            )?),
            ObjectiveSpec::MeanPayoff { reward, b } => {
                Objective::MeanPayoff(MeanPayoffObjective::new(bundle.reward(reward)?.clone(), b.clone())?)
            }
            ObjectiveSpec::Variance { reward, b, c } => Objective::Variance(VarianceObjective::new(
                bundle.reward(reward)?.clone(),
                b.clone(),
                c.clone(),
            )?),
        })
    }

    pub fn from_objective(obj: &Objective) -> Self {
        match obj {
            Objective::Window(phi) => ObjectiveSpec::Window {
                window: phi.window,
                checkpoint: phi.checkpoint,
                reward: phi.reward.name().to_string(),
                mu: Bounds::from_vec(&phi.mu),
                nu: Bounds::from_vec(&phi.nu),
            },
            Objective::MeanPayoff(psi) => ObjectiveSpec::MeanPayoff {
                reward: psi.reward.name().to_string(),
                b: psi.bound.clone(),
            },
            Objective::Variance(v) => ObjectiveSpec::Variance {
                reward: v.reward.name().to_string(),
                b: v.mean_bound.clone(),
                c: v.variance_bound.clone(),
            },
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(ObjectiveSpec),
    Many(Vec<ObjectiveSpec>),
}

/// Parses an objective file holding one entry or an array of entries.
pub fn parse_objectives(text: &str) -> Result<Vec<ObjectiveSpec>> {
    Ok(match serde_json::from_str(text)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

pub fn read_objectives(path: impl AsRef<Path>) -> Result<Vec<ObjectiveSpec>> {
    parse_objectives(&read_text(path)?)
}

/// A single entry is written as an object, several as an array.
pub fn objectives_to_json(specs: &[ObjectiveSpec]) -> String {
    match specs {
        [one] => serde_json::to_string_pretty(one),
        _ => serde_json::to_string_pretty(specs),
    }
    .expect("objectives serialize")
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// `step,mp,va` rows.
pub fn trace_csv(points: &[TracePoint]) -> String {
    let mut out = String::from("step,mp,va\n");
    for p in points {
        writeln!(out, "{},{},{}", p.step, p.mp, p.va).expect("write to string");
    }
    out
}

/// Graphviz text: controller states as squares, adversary states as diamonds,
/// rewards in the node labels.
pub fn to_dot(bundle: &GameBundle) -> String {
    let g = &bundle.game;
    let mut out = String::from("digraph game {\n");
    for s in 0..g.num_states() {
        let shape = match g.owner(s) {
            Owner::Box => "square",
            Owner::Diamond => "diamond",
        };
        let mut label = g.label(s).to_string();
        for (name, r) in &bundle.rewards {
            let vals: Vec<String> = r.vector(s).iter().map(|v| v.to_string()).collect();
            write!(label, "\\n{name}={}", vals.join(",")).expect("write to string");
        }
        writeln!(out, "  n{s} [shape={shape}, label=\"{label}\"];").expect("write to string");
    }
    for (a, b) in g.edges() {
        writeln!(out, "  n{a} -> n{b};").expect("write to string");
    }
    out.push_str("}\n");
    out
}
