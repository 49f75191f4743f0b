//! The declarative game file format. One TOML document describes a finite
//! Bayesian game and, optionally, a meta layer on top of it: transformation
//! payoff rewrites (always full tables), the policy rule, meta-action and
//! environment move spaces, the environment payoff, and meta-action costs.
//!
//! All flat tables are row-major with the last axis fastest. Payoff tables
//! run over `[a_1..a_n, th_1..th_n]`, rule and environment tables over
//! `[x_1..x_n, e, th_1..th_n]`, and cost tables over `[x_i, th_i]`.

use metagame::transform::{MetaActionSpaces, Transformation, TransformationRule, TransformationSet};
use metagame::{FiniteBayesianGame, MetaGame, Prior, WithinBackend};
use serde::Deserialize;
use std::fmt;
use std::path::Path;

pub const SCHEMA: &str = "game/1";

/// A load or validation failure, reported with enough context to fix the
/// file. Maps to exit code 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for SchemaError {}

fn err<T>(msg: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub schema: Option<String>,
    pub name: Option<String>,
    pub game: GameSection,
    pub meta: Option<MetaSection>,
    pub expect: Option<Expect>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub players: Vec<String>,
    /// Action labels per player, keyed by player name.
    pub actions: toml::Table,
    /// Type labels per player; players left out get the single type "*".
    pub types: Option<toml::Table>,
    pub prior: Option<PriorSection>,
    pub payoffs: Vec<PayoffSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Marginals per player, aligned with the players list.
    pub independent: Option<Vec<Vec<f64>>>,
    /// Joint table, flat over `[th_1..th_n]`.
    pub joint: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSection {
    pub player: String,
    pub table: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub env_moves: Vec<String>,
    /// Meta-action labels per player, keyed by player name.
    pub actions: toml::Table,
    pub transformations: Vec<TransformationSection>,
    pub rule: RuleSection,
    pub env_payoff: TableSection,
    /// Meta-action costs per player, flat over `[x_i, th_i]`.
    pub costs: Option<toml::Table>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformationSection {
    pub id: String,
    /// Full replacement payoff tables, one per player.
    pub rewrites: Vec<PayoffSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSection {
    /// Transformation ids, flat over `[x_1..x_n, e, th_1..th_n]`.
    pub table: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub table: Vec<f64>,
}

/// Expected-verdict annotations checked by the shipped-games test.
#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// Equilibrium count of the base game under enumeration.
    pub solve_equilibria: Option<usize>,
    /// Audit outcome over all transformations: unique, multiple, or unknown.
    pub audit: Option<String>,
    /// Meta-equilibrium count under enumeration.
    pub meta_equilibria: Option<usize>,
    /// Expected exit code of solve-meta with default flags.
    pub solve_meta_exit: Option<i32>,
}

pub fn load(path: &Path) -> Result<GameFile, SchemaError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    let file: GameFile = toml::from_str(&text)
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
    if let Some(schema) = &file.schema {
        if schema != SCHEMA {
            return err(format!(
                "{}: schema {schema:?} is not supported (expected {SCHEMA:?})",
                path.display()
            ));
        }
    }
    Ok(file)
}

fn string_list(
    table: &toml::Table,
    player: &str,
    what: &str,
) -> Result<Vec<String>, SchemaError> {
    let value = table
        .get(player)
        .ok_or_else(|| SchemaError(format!("{what}: no entry for player {player:?}")))?;
    let arr = value
        .as_array()
        .ok_or_else(|| SchemaError(format!("{what}.{player}: expected an array of strings")))?;
    arr.iter()
        .map(|v| {
            v.as_str().map(str::to_string).ok_or_else(|| {
                SchemaError(format!("{what}.{player}: expected an array of strings"))
            })
        })
        .collect()
}

fn check_players_cover(table: &toml::Table, players: &[String], what: &str) -> Result<(), SchemaError> {
    for key in table.keys() {
        if !players.iter().any(|p| p == key) {
            return err(format!("{what}: {key:?} is not a declared player"));
        }
    }
    Ok(())
}

impl GameFile {
    /// Builds the base finite Bayesian game, normalizing prior weights that
    /// are within 1e-9 of a probability vector.
    pub fn base_game(&self) -> Result<FiniteBayesianGame, SchemaError> {
        let g = &self.game;
        if g.players.is_empty() {
            return err("game.players: need at least one player");
        }
        for (i, p) in g.players.iter().enumerate() {
            if g.players[..i].contains(p) {
                return err(format!("game.players: duplicate player {p:?}"));
            }
        }
        check_players_cover(&g.actions, &g.players, "game.actions")?;
        let action_names: Vec<Vec<String>> = g
            .players
            .iter()
            .map(|p| string_list(&g.actions, p, "game.actions"))
            .collect::<Result<_, _>>()?;
        let type_names: Vec<Vec<String>> = match &g.types {
            None => vec![vec!["*".to_string()]; g.players.len()],
            Some(types) => {
                check_players_cover(types, &g.players, "game.types")?;
                g.players
                    .iter()
                    .map(|p| {
                        if types.contains_key(p.as_str()) {
                            string_list(types, p, "game.types")
                        } else {
                            Ok(vec!["*".to_string()])
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        let type_counts: Vec<usize> = type_names.iter().map(|t| t.len()).collect();
        let prior = self.build_prior(&type_counts)?;

        let mut cells: usize = action_names.iter().map(|a| a.len()).product();
        cells *= type_counts.iter().product::<usize>();
        let mut payoffs: Vec<Option<Vec<f64>>> = vec![None; g.players.len()];
        for section in &g.payoffs {
            let i = player_index(&g.players, &section.player, "game.payoffs")?;
            if payoffs[i].is_some() {
                return err(format!("game.payoffs: player {:?} listed twice", section.player));
            }
            if section.table.len() != cells {
                return err(format!(
                    "game.payoffs for {:?}: expected {cells} entries, got {}",
                    section.player,
                    section.table.len()
                ));
            }
            payoffs[i] = Some(section.table.clone());
        }
        let payoffs: Vec<Vec<f64>> = payoffs
            .into_iter()
            .zip(&g.players)
            .map(|(t, p)| t.ok_or_else(|| SchemaError(format!("game.payoffs: missing player {p:?}"))))
            .collect::<Result<_, _>>()?;

        FiniteBayesianGame::new(type_names, action_names, prior, payoffs)
            .map_err(|e| SchemaError(format!("game: {e}")))
    }

    fn build_prior(&self, type_counts: &[usize]) -> Result<Prior, SchemaError> {
        let section = match &self.game.prior {
            None => {
                let marginals: Vec<Vec<f64>> =
                    type_counts.iter().map(|&c| vec![1.0 / c as f64; c]).collect();
                return Prior::independent(&marginals)
                    .map_err(|e| SchemaError(format!("game.prior: {e}")));
            }
            Some(s) => s,
        };
        match (&section.independent, &section.joint) {
            (Some(marginals), None) => {
                if marginals.len() != type_counts.len() {
                    return err(format!(
                        "game.prior.independent: {} marginals for {} players",
                        marginals.len(),
                        type_counts.len()
                    ));
                }
                let mut normalized = Vec::with_capacity(marginals.len());
                for (i, m) in marginals.iter().enumerate() {
                    if m.len() != type_counts[i] {
                        return err(format!(
                            "game.prior.independent[{i}]: {} weights for {} types",
                            m.len(),
                            type_counts[i]
                        ));
                    }
                    normalized.push(normalize(m, &format!("game.prior.independent[{i}]"))?);
                }
                Prior::independent(&normalized).map_err(|e| SchemaError(format!("game.prior: {e}")))
            }
            (None, Some(joint)) => {
                let cells: usize = type_counts.iter().product();
                if joint.len() != cells {
                    return err(format!(
                        "game.prior.joint: expected {cells} entries, got {}",
                        joint.len()
                    ));
                }
                let flat = normalize(joint, "game.prior.joint")?;
                Prior::from_joint(type_counts.to_vec(), flat)
                    .map_err(|e| SchemaError(format!("game.prior: {e}")))
            }
            (Some(_), Some(_)) => err("game.prior: give either independent or joint, not both"),
            (None, None) => err("game.prior: give independent marginals or a joint table"),
        }
    }

    /// Builds the meta-game over the base game. Requires a meta section.
    pub fn meta_game(&self, base: &FiniteBayesianGame) -> Result<MetaGame, SchemaError> {
        let m = self
            .meta
            .as_ref()
            .ok_or_else(|| SchemaError("file has no [meta] section".into()))?;
        let players = &self.game.players;
        check_players_cover(&m.actions, players, "meta.actions")?;
        let player_actions: Vec<Vec<String>> = players
            .iter()
            .map(|p| string_list(&m.actions, p, "meta.actions"))
            .collect::<Result<_, _>>()?;
        let spaces = MetaActionSpaces::new(player_actions, m.env_moves.clone())
            .map_err(|e| SchemaError(format!("meta: {e}")))?;

        if m.transformations.is_empty() {
            return err("meta.transformations: need at least one transformation");
        }
        let cells: usize = (0..base.players())
            .map(|i| base.action_count(i))
            .chain((0..base.players()).map(|i| base.type_count(i)))
            .product();
        let mut transformations = Vec::with_capacity(m.transformations.len());
        for section in &m.transformations {
            let mut rewrite: Vec<Option<Vec<f64>>> = vec![None; players.len()];
            for r in &section.rewrites {
                let i = player_index(players, &r.player, "meta.transformations.rewrites")?;
                if rewrite[i].is_some() {
                    return err(format!(
                        "transformation {:?}: player {:?} rewritten twice",
                        section.id, r.player
                    ));
                }
                if r.table.len() != cells {
                    return err(format!(
                        "transformation {:?} rewrite for {:?}: expected {cells} entries, got {}",
                        section.id,
                        r.player,
                        r.table.len()
                    ));
                }
                rewrite[i] = Some(r.table.clone());
            }
            let rewrite: Vec<Vec<f64>> = rewrite
                .into_iter()
                .zip(players)
                .map(|(t, p)| {
                    t.ok_or_else(|| {
                        SchemaError(format!(
                            "transformation {:?}: missing rewrite for player {p:?}",
                            section.id
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            transformations.push(
                Transformation::new(section.id.clone(), rewrite)
                    .map_err(|e| SchemaError(format!("transformation {:?}: {e}", section.id)))?,
            );
        }
        let ids: Vec<String> = transformations.iter().map(|t| t.id().to_string()).collect();
        let tset = TransformationSet::new(transformations)
            .map_err(|e| SchemaError(format!("meta.transformations: {e}")))?;

        let type_counts: Vec<usize> = (0..base.players()).map(|i| base.type_count(i)).collect();
        let domain: usize = spaces
            .domain_shape(&type_counts)
            .iter()
            .product();
        if m.rule.table.len() != domain {
            return err(format!(
                "meta.rule.table: expected {domain} entries, got {}",
                m.rule.table.len()
            ));
        }
        let entries: Vec<usize> = m
            .rule
            .table
            .iter()
            .map(|id| {
                ids.iter().position(|known| known == id).ok_or_else(|| {
                    SchemaError(format!("meta.rule.table: unknown transformation {id:?}"))
                })
            })
            .collect::<Result<_, _>>()?;
        let rule = TransformationRule::new(ids, &spaces, &type_counts, entries)
            .map_err(|e| SchemaError(format!("meta.rule: {e}")))?;

        if m.env_payoff.table.len() != domain {
            return err(format!(
                "meta.env_payoff.table: expected {domain} entries, got {}",
                m.env_payoff.table.len()
            ));
        }

        let costs = match &m.costs {
            None => None,
            Some(table) => {
                check_players_cover(table, players, "meta.costs")?;
                let mut out = Vec::with_capacity(players.len());
                for (i, p) in players.iter().enumerate() {
                    let cells = spaces.action_count(i) * type_counts[i];
                    match table.get(p.as_str()) {
                        None => out.push(vec![0.0; cells]),
                        Some(v) => {
                            let arr = v.as_array().and_then(|a| {
                                a.iter().map(|x| x.as_float().or_else(|| x.as_integer().map(|n| n as f64))).collect::<Option<Vec<f64>>>()
                            });
                            let flat = arr.ok_or_else(|| {
                                SchemaError(format!("meta.costs.{p}: expected an array of numbers"))
                            })?;
                            if flat.len() != cells {
                                return err(format!(
                                    "meta.costs.{p}: expected {cells} entries, got {}",
                                    flat.len()
                                ));
                            }
                            out.push(flat);
                        }
                    }
                }
                Some(out)
            }
        };

        MetaGame::new(
            WithinBackend::Finite(base.clone()),
            tset,
            rule,
            spaces,
            m.env_payoff.table.clone(),
            costs,
        )
        .map_err(|e| SchemaError(format!("meta: {e}")))
    }
}

fn player_index(players: &[String], name: &str, what: &str) -> Result<usize, SchemaError> {
    players
        .iter()
        .position(|p| p == name)
        .ok_or_else(|| SchemaError(format!("{what}: {name:?} is not a declared player")))
}

/// Accepts weights within 1e-9 of summing to one and rescales exactly.
fn normalize(weights: &[f64], what: &str) -> Result<Vec<f64>, SchemaError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return err(format!("{what}: probabilities must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return err(format!("{what}: probabilities sum to {total}, expected 1 within 1e-9"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}
