//! Finite Bayesian games with private types, behavioral strategies, and the
//! agent-form reduction used by the equilibrium solvers.
//!
//! Payoff tables are dense and row-major with axes ordered
//! `[a_1, ..., a_n, theta_1, ..., theta_n]`; the last axis varies fastest.

use crate::table::{each_index, Table};
use thiserror::Error;

/// Sum tolerance for probability vectors built programmatically.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Slack used when collecting argmax tie sets.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("type {type_index} of player {player} has zero prior marginal")]
    ZeroMarginal { player: usize, type_index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Probability distribution over a finite, implicitly ordered set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Weights must be nonnegative and sum to 1 within `PROB_SUM_TOL`.
    pub fn new(weights: Vec<f64>) -> Result<Self, GameError> {
        if weights.is_empty() {
            return Err(GameError::InvalidInput("empty distribution".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GameError::InvalidInput(format!(
                "distribution weights must be finite and nonnegative, got {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(GameError::InvalidInput(format!(
                "distribution weights sum to {sum}, expected 1"
            )));
        }
        Ok(Distribution { weights })
    }

    /// Rescales weights whose sum is within `slack` of 1; rejects anything further off.
    pub fn normalized(mut weights: Vec<f64>, slack: f64) -> Result<Self, GameError> {
        if weights.is_empty() {
            return Err(GameError::InvalidInput("empty distribution".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GameError::InvalidInput(format!(
                "distribution weights must be finite and nonnegative, got {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > slack {
            return Err(GameError::InvalidInput(format!(
                "distribution weights sum to {sum}, outside normalization slack {slack}"
            )));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Distribution { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Distribution { weights: vec![1.0 / n as f64; n.max(1)] }
    }

    pub fn point(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Distribution { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest-weight index, lowest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Joint prior over type profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    table: Table<f64>,
}

impl Prior {
    pub fn from_joint(type_counts: Vec<usize>, flat: Vec<f64>) -> Result<Self, GameError> {
        let table = Table::from_flat(type_counts, flat)?;
        if table.data().iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(GameError::InvalidInput(
                "prior probabilities must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = table.data().iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(GameError::InvalidInput(format!(
                "prior sums to {sum}, expected 1"
            )));
        }
        Ok(Prior { table })
    }

    /// Product prior from independent per-player marginals.
    pub fn independent(marginals: &[Vec<f64>]) -> Result<Self, GameError> {
        let counts: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
        for m in marginals {
            // validate each factor as a distribution
            Distribution::new(m.clone())?;
        }
        let mut flat = Vec::with_capacity(counts.iter().product());
        each_index(&counts, |idx| {
            let p: f64 = idx.iter().enumerate().map(|(i, &t)| marginals[i][t]).product();
            flat.push(p);
        });
        Prior::from_joint(counts, flat)
    }

    pub fn type_counts(&self) -> &[usize] {
        self.table.shape()
    }

    pub fn prob(&self, theta: &[usize]) -> f64 {
        self.table.get(theta)
    }

    pub fn marginal(&self, player: usize, type_index: usize) -> f64 {
        let mut total = 0.0;
        each_index(self.table.shape(), |idx| {
            if idx[player] == type_index {
                total += self.table.get(idx);
            }
        });
        total
    }

    /// Conditional distribution over opponent type profiles given `(player, type_index)`,
    /// flattened row-major over the other players in increasing player order.
    pub fn conditional(&self, player: usize, type_index: usize) -> Result<Distribution, GameError> {
        let marginal = self.marginal(player, type_index);
        if marginal <= 0.0 {
            return Err(GameError::ZeroMarginal { player, type_index });
        }
        let mut weights = Vec::new();
        each_index(self.table.shape(), |idx| {
            if idx[player] == type_index {
                weights.push(self.table.get(idx) / marginal);
            }
        });
        Distribution::normalized(weights, 1e-9)
    }
}

/// One mixed action per (player, type) row.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralStrategyProfile {
    rows: Vec<Vec<Distribution>>,
}

impl BehavioralStrategyProfile {
    pub fn new(rows: Vec<Vec<Distribution>>) -> Self {
        BehavioralStrategyProfile { rows }
    }

    pub fn uniform(game: &FiniteBayesianGame) -> Self {
        let rows = (0..game.players())
            .map(|i| {
                (0..game.type_count(i))
                    .map(|_| Distribution::uniform(game.action_count(i)))
                    .collect()
            })
            .collect();
        BehavioralStrategyProfile { rows }
    }

    /// Pure profile; `picks[i][t]` is the action index of type `t` of player `i`.
    pub fn pure(game: &FiniteBayesianGame, picks: &[Vec<usize>]) -> Self {
        let rows = (0..game.players())
            .map(|i| {
                (0..game.type_count(i))
                    .map(|t| Distribution::point(game.action_count(i), picks[i][t]))
                    .collect()
            })
            .collect();
        BehavioralStrategyProfile { rows }
    }

    pub fn row(&self, player: usize, type_index: usize) -> &Distribution {
        &self.rows[player][type_index]
    }

    pub fn rows(&self) -> &[Vec<Distribution>] {
        &self.rows
    }

    pub fn set_row(&mut self, player: usize, type_index: usize, d: Distribution) {
        self.rows[player][type_index] = d;
    }

    /// Flattens all rows into one vector, players then types then actions.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for player in &self.rows {
            for row in player {
                out.extend_from_slice(row.weights());
            }
        }
        out
    }

    /// L-infinity distance between equally shaped profiles.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Shape check against a game, usable by callers holding untrusted profiles.
    pub fn validate(&self, game: &FiniteBayesianGame) -> Result<(), GameError> {
        self.check_shape(game)
    }

    fn check_shape(&self, game: &FiniteBayesianGame) -> Result<(), GameError> {
        if self.rows.len() != game.players() {
            return Err(GameError::ShapeMismatch(format!(
                "profile has {} players, game has {}",
                self.rows.len(),
                game.players()
            )));
        }
        for (i, player_rows) in self.rows.iter().enumerate() {
            if player_rows.len() != game.type_count(i) {
                return Err(GameError::ShapeMismatch(format!(
                    "player {i} has {} strategy rows, game has {} types",
                    player_rows.len(),
                    game.type_count(i)
                )));
            }
            for (t, d) in player_rows.iter().enumerate() {
                if d.len() != game.action_count(i) {
                    return Err(GameError::ShapeMismatch(format!(
                        "row ({i},{t}) has {} weights, game has {} actions",
                        d.len(),
                        game.action_count(i)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of a single-type deviation check.
#[derive(Debug, Clone)]
pub struct DeviationGain {
    /// Full argmax set over pure deviations, ties within `TIE_TOL`.
    pub best_actions: Vec<usize>,
    /// Best pure deviation value minus the current interim payoff.
    pub gain: f64,
}

/// Verdict of an epsilon equilibrium check.
#[derive(Debug, Clone)]
pub struct BneCheck {
    pub holds: bool,
    pub max_regret: f64,
}

#[derive(Debug, Clone)]
pub struct FiniteBayesianGame {
    type_names: Vec<Vec<String>>,
    action_names: Vec<Vec<String>>,
    prior: Prior,
    payoffs: Vec<Table<f64>>,
    zero_marginal: Vec<(usize, usize)>,
}

impl FiniteBayesianGame {
    /// `payoffs[i]` is flat over `[a_1, ..., a_n, theta_1, ..., theta_n]`.
    ///
    /// Types with zero prior marginal are allowed; they are excluded from
    /// equilibrium checks and a warning is logged.
    pub fn new(
        type_names: Vec<Vec<String>>,
        action_names: Vec<Vec<String>>,
        prior: Prior,
        payoffs: Vec<Vec<f64>>,
    ) -> Result<Self, GameError> {
        let n = type_names.len();
        if n == 0 {
            return Err(GameError::InvalidInput("game needs at least one player".into()));
        }
        if action_names.len() != n {
            return Err(GameError::ShapeMismatch(format!(
                "{} type lists but {} action lists",
                n,
                action_names.len()
            )));
        }
        let type_counts: Vec<usize> = type_names.iter().map(|t| t.len()).collect();
        if prior.type_counts() != type_counts.as_slice() {
            return Err(GameError::ShapeMismatch(format!(
                "prior shape {:?} does not match type counts {:?}",
                prior.type_counts(),
                type_counts
            )));
        }
        if type_counts.iter().any(|&c| c == 0) || action_names.iter().any(|a| a.is_empty()) {
            return Err(GameError::InvalidInput(
                "every player needs at least one type and one action".into(),
            ));
        }
        if payoffs.len() != n {
            return Err(GameError::ShapeMismatch(format!(
                "{} payoff tables for {} players",
                payoffs.len(),
                n
            )));
        }
        let mut shape: Vec<usize> = action_names.iter().map(|a| a.len()).collect();
        shape.extend(type_counts.iter().copied());
        let mut tables = Vec::with_capacity(n);
        for (i, flat) in payoffs.into_iter().enumerate() {
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(GameError::InvalidInput(format!(
                    "payoff table of player {i} contains a non-finite entry"
                )));
            }
            tables.push(Table::from_flat(shape.clone(), flat)?);
        }
        let mut zero_marginal = Vec::new();
        for (i, &count) in type_counts.iter().enumerate() {
            for t in 0..count {
                if prior.marginal(i, t) <= 0.0 {
                    log::warn!(
                        "type {t} of player {i} has zero prior marginal; it is excluded from equilibrium checks"
                    );
                    zero_marginal.push((i, t));
                }
            }
        }
        Ok(FiniteBayesianGame { type_names, action_names, prior, payoffs: tables, zero_marginal })
    }

    pub fn players(&self) -> usize {
        self.type_names.len()
    }

    pub fn type_count(&self, player: usize) -> usize {
        self.type_names[player].len()
    }

    pub fn action_count(&self, player: usize) -> usize {
        self.action_names[player].len()
    }

    pub fn type_names(&self, player: usize) -> &[String] {
        &self.type_names[player]
    }

    pub fn action_names(&self, player: usize) -> &[String] {
        &self.action_names[player]
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn zero_marginal_types(&self) -> &[(usize, usize)] {
        &self.zero_marginal
    }

    pub fn payoff(&self, player: usize, actions: &[usize], types: &[usize]) -> f64 {
        let mut idx = Vec::with_capacity(actions.len() + types.len());
        idx.extend_from_slice(actions);
        idx.extend_from_slice(types);
        self.payoffs[player].get(&idx)
    }

    pub fn payoff_table(&self, player: usize) -> &[f64] {
        self.payoffs[player].data()
    }

    /// Largest payoff magnitude, used to scale tolerances.
    pub fn payoff_scale(&self) -> f64 {
        self.payoffs
            .iter()
            .flat_map(|t| t.data())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn conditional_prior(&self, player: usize, type_index: usize) -> Result<Distribution, GameError> {
        self.prior.conditional(player, type_index)
    }

    /// Expected payoff of `(player, type_index)` given the conditional over
    /// opponent types and everyone mixing per `profile`.
    pub fn interim_expected_payoff(
        &self,
        profile: &BehavioralStrategyProfile,
        player: usize,
        type_index: usize,
    ) -> Result<f64, GameError> {
        profile.check_shape(self)?;
        self.interim_value(profile, player, type_index, None)
    }

    // Interim payoff with the (player, type) row optionally replaced by a pure action.
    fn interim_value(
        &self,
        profile: &BehavioralStrategyProfile,
        player: usize,
        type_index: usize,
        own_action: Option<usize>,
    ) -> Result<f64, GameError> {
        let marginal = self.prior.marginal(player, type_index);
        if marginal <= 0.0 {
            return Err(GameError::ZeroMarginal { player, type_index });
        }
        let n = self.players();
        let action_counts: Vec<usize> = (0..n).map(|i| self.action_count(i)).collect();
        let mut total = 0.0;
        let mut theta = vec![0usize; n];
        each_index(self.prior.type_counts(), |types| {
            if types[player] != type_index {
                return;
            }
            let weight = self.prior.prob(types) / marginal;
            if weight == 0.0 {
                return;
            }
            theta.copy_from_slice(types);
            let mut cell = 0.0;
            each_index(&action_counts, |actions| {
                let mut p = 1.0;
                for j in 0..n {
                    if j == player {
                        p *= match own_action {
                            Some(a) => {
                                if actions[j] == a {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            None => profile.row(j, theta[j]).get(actions[j]),
                        };
                    } else {
                        p *= profile.row(j, theta[j]).get(actions[j]);
                    }
                    if p == 0.0 {
                        return;
                    }
                }
                cell += p * self.payoff(player, actions, &theta);
            });
            total += weight * cell;
        });
        Ok(total)
    }

    /// Best pure deviation for one type, holding everything else fixed.
    pub fn deviation_gain(
        &self,
        profile: &BehavioralStrategyProfile,
        player: usize,
        type_index: usize,
    ) -> Result<DeviationGain, GameError> {
        profile.check_shape(self)?;
        let current = self.interim_value(profile, player, type_index, None)?;
        let mut values = Vec::with_capacity(self.action_count(player));
        for a in 0..self.action_count(player) {
            values.push(self.interim_value(profile, player, type_index, Some(a))?);
        }
        let best = values.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
        let tie = TIE_TOL * best.abs().max(1.0);
        let best_actions = (0..values.len()).filter(|&a| values[a] >= best - tie).collect();
        Ok(DeviationGain { best_actions, gain: best - current })
    }

    /// Epsilon equilibrium check over every positive-marginal (player, type) row.
    pub fn is_bne(
        &self,
        profile: &BehavioralStrategyProfile,
        epsilon: f64,
    ) -> Result<BneCheck, GameError> {
        profile.check_shape(self)?;
        let mut max_regret = f64::NEG_INFINITY;
        for i in 0..self.players() {
            for t in 0..self.type_count(i) {
                if self.zero_marginal.contains(&(i, t)) {
                    continue;
                }
                let gain = self.deviation_gain(profile, i, t)?.gain;
                max_regret = max_regret.max(gain);
            }
        }
        Ok(BneCheck { holds: max_regret <= epsilon, max_regret })
    }

    /// One agent per positive-marginal (player, type) pair; agent payoffs are
    /// interim payoffs, so epsilon verdicts carry over exactly.
    pub fn to_agent_form(&self) -> AgentFormGame {
        self.to_agent_form_masked(None).expect("full action sets are always valid")
    }

    /// Agent form with each agent restricted to a subset of its player's
    /// actions, in agent order. Used to enumerate over pre-screened supports;
    /// `action_labels` maps the reduced indices back.
    pub fn to_agent_form_masked(
        &self,
        allowed: Option<&[Vec<usize>]>,
    ) -> Result<AgentFormGame, GameError> {
        let mut agents = Vec::new();
        for i in 0..self.players() {
            for t in 0..self.type_count(i) {
                if !self.zero_marginal.contains(&(i, t)) {
                    agents.push(AgentId { player: i, type_index: t });
                }
            }
        }
        let action_labels: Vec<Vec<usize>> = match allowed {
            Some(masks) => {
                if masks.len() != agents.len() {
                    return Err(GameError::ShapeMismatch(format!(
                        "{} action masks for {} agents",
                        masks.len(),
                        agents.len()
                    )));
                }
                for (mask, agent) in masks.iter().zip(&agents) {
                    let limit = self.action_count(agent.player);
                    if mask.is_empty() || mask.iter().any(|&a| a >= limit) {
                        return Err(GameError::InvalidInput(format!(
                            "bad action mask {mask:?} for player {} (has {limit} actions)",
                            agent.player
                        )));
                    }
                }
                masks.to_vec()
            }
            None => agents
                .iter()
                .map(|a| (0..self.action_count(a.player)).collect())
                .collect(),
        };
        let action_counts: Vec<usize> = action_labels.iter().map(|l| l.len()).collect();
        // type profile -> agent index per player, None if that row is excluded
        let agent_of = |player: usize, type_index: usize| -> Option<usize> {
            agents
                .iter()
                .position(|a| a.player == player && a.type_index == type_index)
        };
        let mut payoffs: Vec<Vec<f64>> = Vec::with_capacity(agents.len());
        let joint: usize = action_counts.iter().product();
        for agent in &agents {
            let mut table = vec![0.0; joint];
            let marginal = self.prior.marginal(agent.player, agent.type_index);
            each_index(&action_counts, |assignment| {
                let mut value = 0.0;
                each_index(self.prior.type_counts(), |types| {
                    if types[agent.player] != agent.type_index {
                        return;
                    }
                    let w = self.prior.prob(types) / marginal;
                    if w == 0.0 {
                        return;
                    }
                    let mut actions = vec![0usize; self.players()];
                    for j in 0..self.players() {
                        match agent_of(j, types[j]) {
                            Some(idx) => actions[j] = action_labels[idx][assignment[idx]],
                            // zero-marginal opponents never co-occur with a
                            // positive conditional weight
                            None => unreachable!("positive weight on excluded type"),
                        }
                    }
                    value += w * self.payoff(agent.player, &actions, types);
                });
                table[crate::table::flat_index_of(&action_counts, assignment)] = value;
            });
            payoffs.push(table);
        }
        let game = NormalFormGame::new(action_counts, payoffs).expect("agent form is well shaped");
        Ok(AgentFormGame { agents, action_labels, game })
    }
}

/// Identifies one agent of the agent form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentId {
    pub player: usize,
    pub type_index: usize,
}

/// Agent form of a Bayesian game: a complete-information game with one agent
/// per (player, type) row. `action_labels[k][j]` is the base-game action that
/// agent k's reduced action j stands for.
#[derive(Debug, Clone)]
pub struct AgentFormGame {
    pub agents: Vec<AgentId>,
    pub action_labels: Vec<Vec<usize>>,
    pub game: NormalFormGame,
}

impl AgentFormGame {
    /// Requires the profile's mass to sit on each agent's allowed actions
    /// (within 1e-9); always holds for unmasked agent forms.
    pub fn behavioral_to_mixed(
        &self,
        profile: &BehavioralStrategyProfile,
    ) -> Result<MixedProfile, GameError> {
        self.agents
            .iter()
            .zip(&self.action_labels)
            .map(|(a, labels)| {
                let row = profile.row(a.player, a.type_index);
                let weights: Vec<f64> = labels.iter().map(|&orig| row.get(orig)).collect();
                Distribution::normalized(weights, 1e-9)
            })
            .collect()
    }

    /// Rows for excluded zero-marginal types are filled uniformly; weight goes
    /// to the labeled base actions, zero elsewhere.
    pub fn mixed_to_behavioral(
        &self,
        base: &FiniteBayesianGame,
        mixed: &MixedProfile,
    ) -> BehavioralStrategyProfile {
        let mut profile = BehavioralStrategyProfile::uniform(base);
        for (k, agent) in self.agents.iter().enumerate() {
            let mut weights = vec![0.0; base.action_count(agent.player)];
            for (j, &orig) in self.action_labels[k].iter().enumerate() {
                weights[orig] += mixed[k].get(j);
            }
            let row = Distribution::normalized(weights, 1e-9)
                .expect("mixed strategy rows stay normalized");
            profile.set_row(agent.player, agent.type_index, row);
        }
        profile
    }
}

/// One mixed strategy per agent.
pub type MixedProfile = Vec<Distribution>;

/// Complete-information game in normal form.
#[derive(Debug, Clone)]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    payoffs: Vec<Table<f64>>,
}

impl NormalFormGame {
    /// `payoffs[k]` is flat over the joint action space, last agent fastest.
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if payoffs.len() != action_counts.len() {
            return Err(GameError::ShapeMismatch(format!(
                "{} payoff tables for {} agents",
                payoffs.len(),
                action_counts.len()
            )));
        }
        let tables = payoffs
            .into_iter()
            .map(|flat| Table::from_flat(action_counts.clone(), flat))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NormalFormGame { action_counts, payoffs: tables })
    }

    pub fn agents(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn action_count(&self, agent: usize) -> usize {
        self.action_counts[agent]
    }

    pub fn payoff_entry(&self, agent: usize, joint: &[usize]) -> f64 {
        self.payoffs[agent].get(joint)
    }

    pub fn payoff_scale(&self) -> f64 {
        self.payoffs
            .iter()
            .flat_map(|t| t.data())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn uniform_profile(&self) -> MixedProfile {
        self.action_counts.iter().map(|&c| Distribution::uniform(c)).collect()
    }

    /// Expected payoff of agent `k` when it plays pure action `a` against the
    /// mixed play of everyone else.
    pub fn action_value(&self, k: usize, a: usize, profile: &MixedProfile) -> f64 {
        self.action_value_by(k, a, &|l, b| profile[l].get(b))
    }

    /// `action_value` with weights supplied by a closure instead of a
    /// profile; the weights need not be nonnegative or normalized. Solvers use
    /// this to evaluate residuals at raw Newton iterates.
    pub fn action_value_by(&self, k: usize, a: usize, weight: &dyn Fn(usize, usize) -> f64) -> f64 {
        let mut total = 0.0;
        each_index(&self.action_counts, |joint| {
            if joint[k] != a {
                return;
            }
            let mut p = 1.0;
            for l in 0..self.action_counts.len() {
                if l != k {
                    p *= weight(l, joint[l]);
                    if p == 0.0 {
                        return;
                    }
                }
            }
            total += p * self.payoffs[k].get(joint);
        });
        total
    }

    /// Partial derivative of `action_value(k, a, .)` in the weight of agent
    /// `l != k` on action `b`: the same sum with agent `l` pinned to `b`.
    pub fn action_value_partial(
        &self,
        k: usize,
        a: usize,
        l: usize,
        b: usize,
        profile: &MixedProfile,
    ) -> f64 {
        self.action_value_partial_by(k, a, l, b, &|j, c| profile[j].get(c))
    }

    /// Closure-weighted form of `action_value_partial`.
    pub fn action_value_partial_by(
        &self,
        k: usize,
        a: usize,
        l: usize,
        b: usize,
        weight: &dyn Fn(usize, usize) -> f64,
    ) -> f64 {
        debug_assert_ne!(k, l);
        let mut total = 0.0;
        each_index(&self.action_counts, |joint| {
            if joint[k] != a || joint[l] != b {
                return;
            }
            let mut p = 1.0;
            for j in 0..self.action_counts.len() {
                if j != k && j != l {
                    p *= weight(j, joint[j]);
                    if p == 0.0 {
                        return;
                    }
                }
            }
            total += p * self.payoffs[k].get(joint);
        });
        total
    }

    pub fn expected_payoff(&self, k: usize, profile: &MixedProfile) -> f64 {
        (0..self.action_counts[k])
            .map(|a| profile[k].get(a) * self.action_value(k, a, profile))
            .sum()
    }

    /// Argmax set (ties within `TIE_TOL`) and best value for agent `k`.
    pub fn best_reply(&self, k: usize, profile: &MixedProfile) -> (Vec<usize>, f64) {
        let values: Vec<f64> =
            (0..self.action_counts[k]).map(|a| self.action_value(k, a, profile)).collect();
        let best = values.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
        let tie = TIE_TOL * best.abs().max(1.0);
        let set = (0..values.len()).filter(|&a| values[a] >= best - tie).collect();
        (set, best)
    }

    pub fn regret(&self, k: usize, profile: &MixedProfile) -> f64 {
        let (_, best) = self.best_reply(k, profile);
        best - self.expected_payoff(k, profile)
    }

    pub fn max_regret(&self, profile: &MixedProfile) -> f64 {
        (0..self.agents()).map(|k| self.regret(k, profile)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_ne(&self, profile: &MixedProfile, epsilon: f64) -> (bool, f64) {
        let r = self.max_regret(profile);
        (r <= epsilon, r)
    }
}

/// Flattens a mixed profile for distance computations.
pub fn flatten_mixed(profile: &MixedProfile) -> Vec<f64> {
    profile.iter().flat_map(|d| d.weights().iter().copied()).collect()
}

/// L-infinity distance between equally shaped mixed profiles.
pub fn mixed_linf(a: &MixedProfile, b: &MixedProfile) -> f64 {
    flatten_mixed(a)
        .iter()
        .zip(flatten_mixed(b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    /// Two players, one type each; payoff tables are row-major over (a1, a2).
    fn complete_info_game(p1: [f64; 4], p2: [f64; 4]) -> FiniteBayesianGame {
        FiniteBayesianGame::new(
            vec![names(&["*"]), names(&["*"])],
            vec![names(&["x", "y"]), names(&["x", "y"])],
            Prior::from_joint(vec![1, 1], vec![1.0]).unwrap(),
            vec![p1.to_vec(), p2.to_vec()],
        )
        .unwrap()
    }

    fn prisoners_dilemma() -> FiniteBayesianGame {
        // (C,C)=(3,3) (C,D)=(0,5) (D,C)=(5,0) (D,D)=(1,1)
        complete_info_game([3.0, 0.0, 5.0, 1.0], [3.0, 5.0, 0.0, 1.0])
    }

    #[test]
    fn conditional_prior_matches_hand_computation() {
        let prior = Prior::from_joint(vec![2, 2], vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let c = prior.conditional(0, 0).unwrap();
        assert_abs_diff_eq!(c.get(0), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(1), 0.2, epsilon = 1e-15);
        let c1 = prior.conditional(1, 1).unwrap();
        assert_abs_diff_eq!(c1.get(0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c1.get(1), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn conditional_prior_rejects_zero_marginal() {
        let prior = Prior::from_joint(vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            prior.conditional(0, 1),
            Err(GameError::ZeroMarginal { player: 0, type_index: 1 })
        ));
    }

    #[test]
    fn independent_prior_multiplies_marginals() {
        let prior = Prior::independent(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert_abs_diff_eq!(prior.prob(&[1, 0]), 0.42, epsilon = 1e-15);
        assert_abs_diff_eq!(prior.marginal(1, 1), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn interim_uniform_is_mean_of_relevant_entries() {
        // 2 types and 2 actions per player; uniform prior and uniform mixing
        // average the 8 payoff entries with theta_1 fixed.
        let payoff1: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let payoff2 = vec![0.0; 16];
        let game = FiniteBayesianGame::new(
            vec![names(&["L", "H"]), names(&["L", "H"])],
            vec![names(&["a", "b"]), names(&["a", "b"])],
            Prior::from_joint(vec![2, 2], vec![0.25; 4]).unwrap(),
            vec![payoff1.clone(), payoff2],
        )
        .unwrap();
        let sigma = BehavioralStrategyProfile::uniform(&game);
        let got = game.interim_expected_payoff(&sigma, 0, 0).unwrap();
        // axes are (a1, a2, th1, th2); keep th1 = 0
        let mut expected = 0.0;
        for a1 in 0..2 {
            for a2 in 0..2 {
                for th2 in 0..2 {
                    expected += payoff1[a1 * 8 + a2 * 4 + th2];
                }
            }
        }
        expected /= 8.0;
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn prisoners_dilemma_defection_is_equilibrium() {
        let game = prisoners_dilemma();
        let defect = BehavioralStrategyProfile::pure(&game, &[vec![1], vec![1]]);
        let check = game.is_bne(&defect, 0.0).unwrap();
        assert!(check.holds);
        assert_abs_diff_eq!(check.max_regret, 0.0, epsilon = 1e-15);

        let cooperate = BehavioralStrategyProfile::pure(&game, &[vec![0], vec![0]]);
        let dev = game.deviation_gain(&cooperate, 0, 0).unwrap();
        assert_eq!(dev.best_actions, vec![1]);
        assert_abs_diff_eq!(dev.gain, 2.0, epsilon = 1e-15);
        assert!(!game.is_bne(&cooperate, 1.0).unwrap().holds);
        assert!(game.is_bne(&cooperate, 2.0).unwrap().holds);
    }

    #[test]
    fn matching_pennies_uniform_has_full_tie_set() {
        let game = complete_info_game([1.0, -1.0, -1.0, 1.0], [-1.0, 1.0, 1.0, -1.0]);
        let sigma = BehavioralStrategyProfile::uniform(&game);
        let dev = game.deviation_gain(&sigma, 0, 0).unwrap();
        assert_eq!(dev.best_actions, vec![0, 1]);
        assert_abs_diff_eq!(dev.gain, 0.0, epsilon = 1e-15);
        assert!(game.is_bne(&sigma, 0.0).unwrap().holds);
    }

    #[test]
    fn agent_form_matches_interim_payoffs() {
        let prior = Prior::from_joint(vec![2, 2], vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let payoff1: Vec<f64> = (0..16).map(|v| (v as f64) * 0.37 - 1.0).collect();
        let payoff2: Vec<f64> = (0..16).map(|v| ((v * 7 % 13) as f64) * 0.21).collect();
        let game = FiniteBayesianGame::new(
            vec![names(&["L", "H"]), names(&["L", "H"])],
            vec![names(&["a", "b"]), names(&["a", "b"])],
            prior,
            vec![payoff1, payoff2],
        )
        .unwrap();
        let af = game.to_agent_form();
        assert_eq!(af.agents.len(), 4);
        // pure assignment: player 1 plays (a, b) by type, player 2 plays (b, a)
        let profile = BehavioralStrategyProfile::pure(&game, &[vec![0, 1], vec![1, 0]]);
        let mixed = af.behavioral_to_mixed(&profile).unwrap();
        for (k, agent) in af.agents.iter().enumerate() {
            let direct = game
                .interim_expected_payoff(&profile, agent.player, agent.type_index)
                .unwrap();
            let via_agent = af.game.expected_payoff(k, &mixed);
            assert_abs_diff_eq!(direct, via_agent, epsilon = 1e-12);
        }
    }

    #[test]
    fn agent_form_deviation_gains_match_game() {
        let prior = Prior::independent(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let payoff1: Vec<f64> = (0..16).map(|v| ((v * 11 % 17) as f64) / 3.0).collect();
        let payoff2: Vec<f64> = (0..16).map(|v| ((v * 5 % 19) as f64) / 4.0).collect();
        let game = FiniteBayesianGame::new(
            vec![names(&["L", "H"]), names(&["L", "H"])],
            vec![names(&["a", "b"]), names(&["a", "b"])],
            prior,
            vec![payoff1, payoff2],
        )
        .unwrap();
        let af = game.to_agent_form();
        let profile = BehavioralStrategyProfile::uniform(&game);
        let mixed = af.behavioral_to_mixed(&profile).unwrap();
        for (k, agent) in af.agents.iter().enumerate() {
            let gain = game.deviation_gain(&profile, agent.player, agent.type_index).unwrap().gain;
            assert_abs_diff_eq!(af.game.regret(k, &mixed), gain, epsilon = 1e-12);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::normalized(vec![0.5, 0.5 + 5e-10], 1e-9).is_ok());
        assert!(Distribution::normalized(vec![0.5, 0.6], 1e-9).is_err());
    }

    #[test]
    fn zero_marginal_types_are_recorded_and_skipped() {
        let prior = Prior::from_joint(vec![2, 1], vec![1.0, 0.0]).unwrap();
        let game = FiniteBayesianGame::new(
            vec![names(&["L", "H"]), names(&["*"])],
            vec![names(&["a", "b"]), names(&["a", "b"])],
            prior,
            vec![vec![1.0; 8], vec![0.0; 8]],
        )
        .unwrap();
        assert_eq!(game.zero_marginal_types(), &[(0, 1)]);
        let sigma = BehavioralStrategyProfile::uniform(&game);
        assert!(game.is_bne(&sigma, 0.0).unwrap().holds);
        assert!(matches!(
            game.interim_expected_payoff(&sigma, 0, 1),
            Err(GameError::ZeroMarginal { .. })
        ));
        let af = game.to_agent_form();
        assert_eq!(af.agents.len(), 2);
    }
}
