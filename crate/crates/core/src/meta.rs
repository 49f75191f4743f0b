//! The meta-game: players pick meta-actions, the environment picks a move,
//! the rule selects a payoff transformation, and everyone is paid from the
//! unique equilibrium of the transformed game.
//!
//! The within-game solve is pluggable: either the finite-game machinery from
//! `solve`, or a hand-solved closed-form family. Every transformed game must
//! carry a uniqueness certificate before any meta-payoff is computed; there
//! is no equilibrium-selection fallback.

use crate::game::{
    BehavioralStrategyProfile, FiniteBayesianGame, GameError, Prior, TIE_TOL,
};
use crate::solve::{
    audit_uniqueness, default_logit_schedule, enumerate_equilibria,
    solve_best_response_iteration, solve_logit_homotopy, SolveError, SolveMethod,
    UniquenessStatus, DEFAULT_MAX_ITER,
};
use crate::table::{each_index, Table};
use crate::transform::{
    apply_transformation, transformation_probability, MetaActionSpaces, MetaStrategyProfile,
    TransformationRule, TransformationSet,
};
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("transformed game {id} has multiple equilibria")]
    UniquenessViolated { id: String },
    #[error("equilibrium uniqueness of transformed game {id} could not be certified")]
    UniquenessUnknown { id: String },
    #[error("family solver: {0}")]
    Family(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// How to treat transformed games whose uniqueness rests on a closed-form
/// argument rather than the numeric audit. Lenient accepts such certificates;
/// strict insists on an audit and treats everything else as uncertified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Lenient,
    Strict,
}

/// Why a transformed game is believed to have exactly one equilibrium.
#[derive(Debug, Clone)]
pub enum Certificate {
    /// Exhaustive enumeration found exactly one equilibrium.
    Audited,
    /// A closed-form family argument, labeled for reporting.
    Analytic(String),
}

impl Certificate {
    pub fn as_str(&self) -> &str {
        match self {
            Certificate::Audited => "audited",
            Certificate::Analytic(label) => label,
        }
    }
}

/// The within-game equilibrium in whatever space the backend works in.
#[derive(Debug, Clone)]
pub enum WithinEquilibrium {
    Behavioral(BehavioralStrategyProfile),
    /// One real-valued action per player per own type, for families with
    /// one-dimensional continuous actions.
    Scalar(Vec<Vec<f64>>),
}

/// Everything the meta layer needs from one solved transformed game.
#[derive(Debug, Clone)]
pub struct WithinSolution {
    pub equilibrium: WithinEquilibrium,
    pub certificate: Certificate,
    /// Per player, expected equilibrium payoff at each type profile, flat
    /// row-major over the type shape.
    pub expost: Vec<Vec<f64>>,
}

/// A closed-form example family acting as a within-game solver.
pub trait FamilyBackend: Send + Sync {
    fn name(&self) -> &str;
    fn type_counts(&self) -> Vec<usize>;
    fn prior(&self) -> Prior;
    fn solve_within(&self, id: &str, tol: f64) -> Result<WithinSolution, MetaError>;
    fn type_names(&self) -> Vec<Vec<String>> {
        self.type_counts()
            .iter()
            .map(|&c| (0..c).map(|t| format!("t{t}")).collect())
            .collect()
    }
}

/// The base layer a meta-game is built over.
#[derive(Clone)]
pub enum WithinBackend {
    Finite(FiniteBayesianGame),
    Family(Arc<dyn FamilyBackend>),
}

impl std::fmt::Debug for WithinBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WithinBackend::Finite(g) => write!(f, "Finite({} players)", g.players()),
            WithinBackend::Family(b) => write!(f, "Family({})", b.name()),
        }
    }
}

impl WithinBackend {
    pub fn players(&self) -> usize {
        match self {
            WithinBackend::Finite(g) => g.players(),
            WithinBackend::Family(b) => b.type_counts().len(),
        }
    }

    pub fn type_counts(&self) -> Vec<usize> {
        match self {
            WithinBackend::Finite(g) => (0..g.players()).map(|i| g.type_count(i)).collect(),
            WithinBackend::Family(b) => b.type_counts(),
        }
    }

    pub fn prior(&self) -> Prior {
        match self {
            WithinBackend::Finite(g) => g.prior().clone(),
            WithinBackend::Family(b) => b.prior(),
        }
    }

    pub fn type_names(&self) -> Vec<Vec<String>> {
        match self {
            WithinBackend::Finite(g) => {
                (0..g.players()).map(|i| g.type_names(i).to_vec()).collect()
            }
            WithinBackend::Family(b) => b.type_names(),
        }
    }
}

/// Base game plus the meta layer: transformation set, rule, meta-action and
/// environment move spaces, environment payoff, and optional meta-action
/// costs.
#[derive(Debug, Clone)]
pub struct MetaGame {
    backend: WithinBackend,
    tset: TransformationSet,
    rule: TransformationRule,
    spaces: MetaActionSpaces,
    env_payoff: Table<f64>,
    meta_cost: Vec<Table<f64>>,
}

impl MetaGame {
    /// `env_payoff` is flat over `[x_1..x_n, e, th_1..th_n]`; `meta_cost[i]`,
    /// when given, is flat over `[x_i, th_i]` and must be nonnegative.
    pub fn new(
        backend: WithinBackend,
        tset: TransformationSet,
        rule: TransformationRule,
        spaces: MetaActionSpaces,
        env_payoff: Vec<f64>,
        meta_cost: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, MetaError> {
        let n = backend.players();
        if spaces.players() != n {
            return Err(GameError::ShapeMismatch(format!(
                "meta-action spaces for {} players on a {}-player base",
                spaces.players(),
                n
            ))
            .into());
        }
        let type_counts = backend.type_counts();
        rule.check_against(&tset)?;
        let domain = spaces.domain_shape(&type_counts);
        if rule.shape() != domain.as_slice() {
            return Err(GameError::ShapeMismatch(format!(
                "rule table shape {:?} does not match the meta domain {:?}",
                rule.shape(),
                domain
            ))
            .into());
        }
        if env_payoff.iter().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidInput(
                "environment payoff has non-finite entries".into(),
            )
            .into());
        }
        let env_payoff = Table::from_flat(domain, env_payoff).map_err(GameError::from)?;
        let meta_cost = match meta_cost {
            None => (0..n)
                .map(|i| Table::filled(vec![spaces.action_count(i), type_counts[i]], 0.0))
                .collect(),
            Some(tables) => {
                if tables.len() != n {
                    return Err(GameError::ShapeMismatch(format!(
                        "{} cost tables for {n} players",
                        tables.len()
                    ))
                    .into());
                }
                let mut out = Vec::with_capacity(n);
                for (i, flat) in tables.into_iter().enumerate() {
                    if flat.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(GameError::InvalidInput(format!(
                            "player {i} meta-action costs must be finite and nonnegative"
                        ))
                        .into());
                    }
                    out.push(
                        Table::from_flat(vec![spaces.action_count(i), type_counts[i]], flat)
                            .map_err(GameError::from)?,
                    );
                }
                out
            }
        };
        Ok(MetaGame { backend, tset, rule, spaces, env_payoff, meta_cost })
    }

    pub fn backend(&self) -> &WithinBackend {
        &self.backend
    }

    pub fn tset(&self) -> &TransformationSet {
        &self.tset
    }

    pub fn rule(&self) -> &TransformationRule {
        &self.rule
    }

    pub fn spaces(&self) -> &MetaActionSpaces {
        &self.spaces
    }

    pub fn players(&self) -> usize {
        self.backend.players()
    }

    pub fn type_counts(&self) -> Vec<usize> {
        self.backend.type_counts()
    }

    pub fn prior(&self) -> Prior {
        self.backend.prior()
    }

    pub fn env_payoff_at(&self, x: &[usize], e: usize, types: &[usize]) -> f64 {
        let mut idx = Vec::with_capacity(x.len() + 1 + types.len());
        idx.extend_from_slice(x);
        idx.push(e);
        idx.extend_from_slice(types);
        self.env_payoff.get(&idx)
    }

    pub fn cost(&self, player: usize, meta_action: usize, type_index: usize) -> f64 {
        self.meta_cost[player].get(&[meta_action, type_index])
    }

    pub fn max_cost(&self) -> f64 {
        self.meta_cost
            .iter()
            .flat_map(|t| t.data())
            .fold(0.0f64, |acc, v| acc.max(*v))
    }

    pub fn uniform_profile(&self) -> MetaStrategyProfile {
        MetaStrategyProfile::uniform(&self.spaces, &self.type_counts())
    }
}

/// One solved transformation: who it is, its equilibrium, its certificate,
/// and the resulting expected payoffs at every type profile.
#[derive(Debug, Clone)]
pub struct EquilibriumEntry {
    pub id: String,
    pub equilibrium: WithinEquilibrium,
    pub certificate: Certificate,
    pub expost: Vec<Table<f64>>,
}

/// Solved equilibria for every transformation, aligned with the
/// transformation set's order.
#[derive(Debug, Clone)]
pub struct EquilibriumTable {
    entries: Vec<EquilibriumEntry>,
    type_counts: Vec<usize>,
}

impl EquilibriumTable {
    pub fn new(entries: Vec<EquilibriumEntry>, type_counts: Vec<usize>) -> Result<Self, MetaError> {
        for entry in &entries {
            if entry.expost.iter().any(|t| t.shape() != type_counts.as_slice()) {
                return Err(GameError::ShapeMismatch(format!(
                    "expost payoff shape for {} does not match type counts {:?}",
                    entry.id, type_counts
                ))
                .into());
            }
        }
        Ok(EquilibriumTable { entries, type_counts })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &EquilibriumEntry {
        &self.entries[index]
    }

    pub fn entries(&self) -> &[EquilibriumEntry] {
        &self.entries
    }

    pub fn type_counts(&self) -> &[usize] {
        &self.type_counts
    }

    /// Expected equilibrium payoff of `player` at `types` under
    /// transformation `index`.
    pub fn expost(&self, index: usize, player: usize, types: &[usize]) -> f64 {
        self.entries[index].expost[player].get(types)
    }

    pub fn max_abs_expost(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.expost.iter())
            .flat_map(|t| t.data())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Expected payoff per player per type profile under a behavioral profile.
fn expost_payoffs(game: &FiniteBayesianGame, sigma: &BehavioralStrategyProfile) -> Vec<Table<f64>> {
    let n = game.players();
    let type_counts: Vec<usize> = (0..n).map(|i| game.type_count(i)).collect();
    let action_counts: Vec<usize> = (0..n).map(|i| game.action_count(i)).collect();
    (0..n)
        .map(|i| {
            let mut flat = Vec::with_capacity(type_counts.iter().product());
            each_index(&type_counts, |theta| {
                let mut total = 0.0;
                each_index(&action_counts, |a| {
                    let mut w = 1.0;
                    for j in 0..n {
                        w *= sigma.row(j, theta[j]).get(a[j]);
                        if w == 0.0 {
                            return;
                        }
                    }
                    total += w * game.payoff(i, a, theta);
                });
                flat.push(total);
            });
            Table::from_flat(type_counts.clone(), flat).expect("shape by construction")
        })
        .collect()
}

/// Solves every transformed game and certifies uniqueness.
///
/// A Multiple verdict is always an error. An Unknown verdict from the numeric
/// audit is always an error. Analytic certificates from family backends pass
/// in lenient mode only.
pub fn build_equilibrium_table(
    mg: &MetaGame,
    tol: f64,
    strictness: Strictness,
) -> Result<EquilibriumTable, MetaError> {
    let ids: Vec<String> = mg.tset.ids().iter().map(|s| s.to_string()).collect();
    let entries: Result<Vec<EquilibriumEntry>, MetaError> = match &mg.backend {
        WithinBackend::Finite(base) => mg
            .tset
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|t| {
                let game = apply_transformation(t, base)?;
                let verdict = audit_uniqueness(&game, tol, crate::solve::DEFAULT_MERGE_RADIUS);
                match verdict.status {
                    UniquenessStatus::Multiple => {
                        Err(MetaError::UniquenessViolated { id: t.id().to_string() })
                    }
                    UniquenessStatus::Unknown => {
                        Err(MetaError::UniquenessUnknown { id: t.id().to_string() })
                    }
                    UniquenessStatus::Unique => {
                        let sigma = verdict.equilibria.into_iter().next().expect("unique verdict");
                        let expost = expost_payoffs(&game, &sigma);
                        Ok(EquilibriumEntry {
                            id: t.id().to_string(),
                            equilibrium: WithinEquilibrium::Behavioral(sigma),
                            certificate: Certificate::Audited,
                            expost,
                        })
                    }
                }
            })
            .collect(),
        WithinBackend::Family(family) => {
            let type_counts = mg.type_counts();
            ids.par_iter()
                .map(|id| {
                    let sol = family.solve_within(id, tol)?;
                    if strictness == Strictness::Strict
                        && matches!(sol.certificate, Certificate::Analytic(_))
                    {
                        return Err(MetaError::UniquenessUnknown { id: id.clone() });
                    }
                    let expost = sol
                        .expost
                        .into_iter()
                        .map(|flat| {
                            Table::from_flat(type_counts.clone(), flat).map_err(GameError::from)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(EquilibriumEntry {
                        id: id.clone(),
                        equilibrium: sol.equilibrium,
                        certificate: sol.certificate,
                        expost,
                    })
                })
                .collect()
        }
    };
    EquilibriumTable::new(entries?, mg.type_counts())
}

/// Interim meta-payoff of player `i` at type `type_index`: expected
/// equilibrium payoff over opponent types and transformations, less the
/// expected meta-action cost.
pub fn interim_meta_payoff(
    mg: &MetaGame,
    table: &EquilibriumTable,
    m: &MetaStrategyProfile,
    i: usize,
    type_index: usize,
) -> Result<f64, MetaError> {
    let prior = mg.prior();
    let marginal = prior.marginal(i, type_index);
    if marginal <= 0.0 {
        return Err(GameError::ZeroMarginal { player: i, type_index }.into());
    }
    let type_counts = mg.type_counts();
    let mut total = 0.0;
    each_index(&type_counts, |theta| {
        if theta[i] != type_index {
            return;
        }
        let w = prior.prob(theta) / marginal;
        if w == 0.0 {
            return;
        }
        let pi = transformation_probability(&mg.rule, m, theta);
        let mut inner = 0.0;
        for t in 0..table.len() {
            inner += pi.get(t) * table.expost(t, i, theta);
        }
        total += w * inner;
    });
    let cost: f64 = (0..mg.spaces.action_count(i))
        .map(|x| m.row(i, type_index).get(x) * mg.cost(i, x, type_index))
        .sum();
    Ok(total - cost)
}

/// The environment's expected payoff under mixed meta-play.
pub fn environment_payoff(mg: &MetaGame, m: &MetaStrategyProfile) -> f64 {
    let prior = mg.prior();
    let type_counts = mg.type_counts();
    let n = mg.players();
    let mut xe_shape: Vec<usize> = (0..n).map(|i| mg.spaces.action_count(i)).collect();
    xe_shape.push(mg.spaces.env_count());
    let mut total = 0.0;
    each_index(&type_counts, |theta| {
        let pw = prior.prob(theta);
        if pw == 0.0 {
            return;
        }
        each_index(&xe_shape, |xe| {
            let mut w = m.env().get(xe[n]);
            for i in 0..n {
                w *= m.row(i, theta[i]).get(xe[i]);
                if w == 0.0 {
                    return;
                }
            }
            total += pw * w * mg.env_payoff_at(&xe[..n], xe[n], theta);
        });
    });
    total
}

/// Argmax report for one deviation check.
#[derive(Debug, Clone)]
pub struct BestReplyReport {
    pub best_actions: Vec<usize>,
    pub value: f64,
    pub gain: f64,
}

/// Best pure meta-action for `(i, type_index)` holding everything else in `m`
/// fixed. Pure candidates suffice because the payoff is affine in this
/// coordinate.
pub fn meta_best_reply(
    mg: &MetaGame,
    table: &EquilibriumTable,
    m: &MetaStrategyProfile,
    i: usize,
    type_index: usize,
) -> Result<BestReplyReport, MetaError> {
    let current = interim_meta_payoff(mg, table, m, i, type_index)?;
    let values = (0..mg.spaces.action_count(i))
        .map(|x| {
            let mut trial = m.clone();
            trial.set_row(i, type_index, crate::game::Distribution::point(mg.spaces.action_count(i), x));
            interim_meta_payoff(mg, table, &trial, i, type_index)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(argmax_report(&values, current))
}

/// Best pure environment move against the players' mixing in `m`.
pub fn env_best_reply(mg: &MetaGame, m: &MetaStrategyProfile) -> BestReplyReport {
    let current = environment_payoff(mg, m);
    let values: Vec<f64> = (0..mg.spaces.env_count())
        .map(|e| {
            let mut trial = m.clone();
            trial.set_env(crate::game::Distribution::point(mg.spaces.env_count(), e));
            environment_payoff(mg, &trial)
        })
        .collect();
    argmax_report(&values, current)
}

fn argmax_report(values: &[f64], current: f64) -> BestReplyReport {
    let best = values.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
    let tie = TIE_TOL * best.abs().max(1.0);
    let best_actions = (0..values.len()).filter(|&a| values[a] >= best - tie).collect();
    BestReplyReport { best_actions, value: best, gain: best - current }
}

/// The deviation report behind a meta-equilibrium verdict.
#[derive(Debug, Clone)]
pub struct MetaBneCheck {
    pub holds: bool,
    pub max_gain: f64,
    /// One `(player, type, gain)` row per positive-marginal type.
    pub type_gains: Vec<(usize, usize, f64)>,
    pub env_gain: f64,
}

/// Checks the single-type deviation conditions: every positive-marginal
/// player type and the environment must gain at most `epsilon` from any
/// unilateral change.
pub fn is_meta_bne(
    mg: &MetaGame,
    table: &EquilibriumTable,
    m: &MetaStrategyProfile,
    epsilon: f64,
) -> Result<MetaBneCheck, MetaError> {
    let prior = mg.prior();
    let type_counts = mg.type_counts();
    let mut type_gains = Vec::new();
    for i in 0..mg.players() {
        for t in 0..type_counts[i] {
            if prior.marginal(i, t) <= 0.0 {
                continue;
            }
            let report = meta_best_reply(mg, table, m, i, t)?;
            type_gains.push((i, t, report.gain));
        }
    }
    let env_gain = env_best_reply(mg, m).gain;
    let max_gain = type_gains.iter().map(|g| g.2).fold(env_gain, f64::max);
    Ok(MetaBneCheck { holds: max_gain <= epsilon, max_gain, type_gains, env_gain })
}

/// Rebuilds the meta-game as an ordinary finite Bayesian game with the
/// environment as an extra last player holding a single type. A profile is an
/// epsilon meta-equilibrium exactly when it is an epsilon equilibrium here,
/// so all of `solve` applies unchanged.
pub fn to_meta_agent_game(
    mg: &MetaGame,
    table: &EquilibriumTable,
) -> Result<FiniteBayesianGame, MetaError> {
    let n = mg.players();
    let type_counts = mg.type_counts();
    let prior = mg.prior();

    let mut type_names = mg.backend.type_names();
    type_names.push(vec!["*".to_string()]);
    let mut action_names: Vec<Vec<String>> =
        (0..n).map(|i| mg.spaces.action_labels(i).to_vec()).collect();
    action_names.push(mg.spaces.env_labels().to_vec());

    let mut joint_counts = type_counts.clone();
    joint_counts.push(1);
    let mut prior_flat = Vec::with_capacity(joint_counts.iter().product());
    each_index(&type_counts, |theta| prior_flat.push(prior.prob(theta)));
    let extended_prior =
        Prior::from_joint(joint_counts, prior_flat).map_err(GameError::from)?;

    let domain = mg.spaces.domain_shape(&type_counts);
    let cells: usize = domain.iter().product();
    let mut payoffs: Vec<Vec<f64>> = (0..=n).map(|_| Vec::with_capacity(cells)).collect();
    each_index(&domain, |idx| {
        let (x, rest) = idx.split_at(n);
        let e = rest[0];
        let theta = &rest[1..];
        let t = mg.rule.transformation_index(x, e, theta);
        for i in 0..n {
            payoffs[i].push(table.expost(t, i, theta) - mg.cost(i, x[i], theta[i]));
        }
        payoffs[n].push(mg.env_payoff_at(x, e, theta));
    });
    FiniteBayesianGame::new(type_names, action_names, extended_prior, payoffs)
        .map_err(Into::into)
}

/// The players' rows plus the environment's row as the last player's single
/// type, matching `to_meta_agent_game`'s layout.
pub fn meta_profile_to_behavioral(m: &MetaStrategyProfile) -> BehavioralStrategyProfile {
    let mut rows = m.rows().to_vec();
    rows.push(vec![m.env().clone()]);
    BehavioralStrategyProfile::new(rows)
}

pub fn behavioral_to_meta_profile(
    profile: &BehavioralStrategyProfile,
    players: usize,
) -> MetaStrategyProfile {
    let rows = profile.rows()[..players].to_vec();
    let env = profile.row(players, 0).clone();
    MetaStrategyProfile::new(rows, env)
}

/// Outcome of a meta-equilibrium solve.
#[derive(Debug, Clone)]
pub struct MetaSolve {
    /// All equilibria for the enumeration method; a single profile otherwise.
    pub equilibria: Vec<MetaStrategyProfile>,
    pub method: String,
    pub iterations: usize,
    pub max_gain: f64,
    pub converged: bool,
}

/// Solves for meta-equilibria by running the chosen method on the agent-form
/// reduction. `seed` fixes the iterative methods' starting profile.
pub fn solve_meta_bne(
    mg: &MetaGame,
    method: SolveMethod,
    seed: u64,
    tol: f64,
    strictness: Strictness,
) -> Result<MetaSolve, MetaError> {
    let table = build_equilibrium_table(mg, tol, strictness)?;
    solve_meta_bne_with_table(mg, &table, method, seed, tol)
}

pub fn solve_meta_bne_with_table(
    mg: &MetaGame,
    table: &EquilibriumTable,
    method: SolveMethod,
    seed: u64,
    tol: f64,
) -> Result<MetaSolve, MetaError> {
    let agent_game = to_meta_agent_game(mg, table)?;
    let n = mg.players();
    match method {
        SolveMethod::Enumerate => {
            let eqs = enumerate_equilibria(&agent_game, tol)?;
            let max_gain = eqs
                .iter()
                .map(|e| agent_game.is_bne(e, tol).expect("validated profile").max_regret)
                .fold(0.0f64, f64::max);
            let converged = !eqs.is_empty();
            Ok(MetaSolve {
                equilibria: eqs.iter().map(|e| behavioral_to_meta_profile(e, n)).collect(),
                method: SolveMethod::Enumerate.as_str().to_string(),
                iterations: 0,
                max_gain,
                converged,
            })
        }
        SolveMethod::BestReply => {
            let mut rng = crate::random::rng_for(seed, 0);
            let init = crate::random::random_behavioral_profile(&agent_game, &mut rng);
            let report = solve_best_response_iteration(
                &agent_game,
                &init,
                0.5,
                DEFAULT_MAX_ITER,
                tol,
            )?;
            Ok(MetaSolve {
                equilibria: vec![behavioral_to_meta_profile(&report.profile, n)],
                method: report.method,
                iterations: report.iterations,
                max_gain: report.max_regret,
                converged: report.converged,
            })
        }
        SolveMethod::Logit => {
            let report = solve_logit_homotopy(&agent_game, &default_logit_schedule(), tol)?;
            Ok(MetaSolve {
                equilibria: vec![behavioral_to_meta_profile(&report.profile, n)],
                method: report.method,
                iterations: report.iterations,
                max_gain: report.max_regret,
                converged: report.converged,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Distribution;
    use crate::random::{random_meta_game, random_meta_profile, rng_for, RandomMetaGameConfig};
    use crate::transform::Transformation;
    use approx::assert_abs_diff_eq;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    // PD payoffs copied across 2x2 type profiles: defect stays dominant for
    // every type, so every constant-shift rewrite keeps a unique equilibrium.
    fn typed_pd() -> FiniteBayesianGame {
        let prior = Prior::from_joint(vec![2, 2], vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        let mut p1 = vec![0.0; 16];
        let mut p2 = vec![0.0; 16];
        for a1 in 0..2 {
            for a2 in 0..2 {
                for th in 0..4 {
                    p1[a1 * 8 + a2 * 4 + th] = [[3.0, 0.0], [5.0, 1.0]][a1][a2];
                    p2[a1 * 8 + a2 * 4 + th] = [[3.0, 5.0], [0.0, 1.0]][a1][a2];
                }
            }
        }
        FiniteBayesianGame::new(
            vec![names(&["L", "H"]), names(&["L", "H"])],
            vec![names(&["C", "D"]), names(&["C", "D"])],
            prior,
            vec![p1, p2],
        )
        .unwrap()
    }

    fn shifted(base: &FiniteBayesianGame, id: &str, d1: f64, d2: f64) -> Transformation {
        let r1 = base.payoff_table(0).iter().map(|v| v + d1).collect();
        let r2 = base.payoff_table(1).iter().map(|v| v + d2).collect();
        Transformation::new(id, vec![r1, r2]).unwrap()
    }

    fn lobby_spaces() -> MetaActionSpaces {
        MetaActionSpaces::new(
            vec![names(&["out", "lobby"]), names(&["out", "lobby"])],
            names(&["N", "R"]),
        )
        .unwrap()
    }

    // four constant-shift rewrites keyed by the lobbying outcome
    fn lobby_meta_game(costs: Option<Vec<Vec<f64>>>) -> MetaGame {
        let base = typed_pd();
        let tset = TransformationSet::new(vec![
            shifted(&base, "T0", 0.0, 0.0),
            shifted(&base, "T1", 2.0, 0.0),
            shifted(&base, "T2", 0.0, 2.0),
            shifted(&base, "TS", 1.0, 1.0),
        ])
        .unwrap();
        let spaces = lobby_spaces();
        let type_counts = [2usize, 2];
        let rule = TransformationRule::from_fn(
            names(&["T0", "T1", "T2", "TS"]),
            &spaces,
            &type_counts,
            |x, e, _| match (e, x[0], x[1]) {
                (0, _, _) => 0,
                (1, 1, 0) => 1,
                (1, 0, 1) => 2,
                (1, 1, 1) => 3,
                _ => 0,
            },
        )
        .unwrap();
        let cells: usize = spaces.domain_shape(&type_counts).iter().product();
        let env_payoff: Vec<f64> = (0..cells).map(|k| (k % 7) as f64 * 0.1).collect();
        MetaGame::new(
            WithinBackend::Finite(base),
            tset,
            rule,
            spaces,
            env_payoff,
            costs,
        )
        .unwrap()
    }

    fn singleton_meta_game(costs: Option<Vec<Vec<f64>>>) -> MetaGame {
        let base = typed_pd();
        let tset =
            TransformationSet::new(vec![Transformation::identity("only", &base)]).unwrap();
        let spaces = lobby_spaces();
        let type_counts = [2usize, 2];
        let rule =
            TransformationRule::from_fn(names(&["only"]), &spaces, &type_counts, |_, _, _| 0)
                .unwrap();
        let cells: usize = spaces.domain_shape(&type_counts).iter().product();
        MetaGame::new(
            WithinBackend::Finite(base),
            tset,
            rule,
            spaces,
            vec![0.25; cells],
            costs,
        )
        .unwrap()
    }

    #[test]
    fn identity_table_on_pd_gives_unit_payoffs() {
        let mg = singleton_meta_game(None);
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        assert_eq!(table.len(), 1);
        assert!(matches!(table.entry(0).certificate, Certificate::Audited));
        for theta in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_abs_diff_eq!(table.expost(0, 0, &theta), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(table.expost(0, 1, &theta), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn singleton_tset_collapses_to_interim_payoff_of_the_one_equilibrium() {
        let mg = singleton_meta_game(None);
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let base = match mg.backend() {
            WithinBackend::Finite(g) => g.clone(),
            _ => unreachable!(),
        };
        let sigma = match &table.entry(0).equilibrium {
            WithinEquilibrium::Behavioral(s) => s.clone(),
            _ => unreachable!(),
        };
        let mut rng = rng_for(5, 0);
        for _ in 0..20 {
            let m = random_meta_profile(mg.spaces(), &mg.type_counts(), &mut rng);
            for i in 0..2 {
                for t in 0..2 {
                    let v = interim_meta_payoff(&mg, &table, &m, i, t).unwrap();
                    let u = base.interim_expected_payoff(&sigma, i, t).unwrap();
                    assert_abs_diff_eq!(v, u, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_expost_payoffs_make_v_constant() {
        let mg = lobby_meta_game(None);
        let type_counts = mg.type_counts();
        let entries = mg
            .tset()
            .ids()
            .iter()
            .map(|id| EquilibriumEntry {
                id: id.to_string(),
                equilibrium: WithinEquilibrium::Scalar(vec![vec![0.0; 2]; 2]),
                certificate: Certificate::Analytic("constant".into()),
                expost: vec![Table::filled(type_counts.clone(), 2.5); 2],
            })
            .collect();
        let table = EquilibriumTable::new(entries, type_counts.clone()).unwrap();
        let mut rng = rng_for(6, 0);
        for _ in 0..10 {
            let m = random_meta_profile(mg.spaces(), &type_counts, &mut rng);
            for i in 0..2 {
                for t in 0..2 {
                    assert_abs_diff_eq!(
                        interim_meta_payoff(&mg, &table, &m, i, t).unwrap(),
                        2.5,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn costs_enter_linearly_and_push_toward_the_free_action() {
        let kappa = 0.375;
        let mg = singleton_meta_game(Some(vec![
            vec![0.0, 0.0, kappa, kappa],
            vec![0.0, 0.0, 0.0, 0.0],
        ]));
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let mut m = mg.uniform_profile();
        m.set_row(0, 0, Distribution::new(vec![0.3, 0.7]).unwrap());
        let report = meta_best_reply(&mg, &table, &m, 0, 0).unwrap();
        assert_eq!(report.best_actions, vec![0]);
        assert_abs_diff_eq!(report.gain, kappa * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn pure_lobbying_pays_the_solo_rewrite_minus_cost() {
        let kappa = 0.6;
        let mg = lobby_meta_game(Some(vec![
            vec![0.0, 0.0, kappa, kappa],
            vec![0.0, 0.0, kappa, kappa],
        ]));
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let m = MetaStrategyProfile::pure(mg.spaces(), &[vec![1, 1], vec![0, 0]], 1);
        for t in 0..2 {
            let v = interim_meta_payoff(&mg, &table, &m, 0, t).unwrap();
            // T1 shifts player 1 by +2 over the unit PD payoff
            assert_abs_diff_eq!(v, 3.0 - kappa, epsilon = 1e-9);
        }
    }

    #[test]
    fn uniform_env_mixing_averages_the_w_table() {
        let base = FiniteBayesianGame::new(
            vec![names(&["*"]), names(&["*"])],
            vec![names(&["c", "d"]), names(&["c", "d"])],
            Prior::from_joint(vec![1, 1], vec![1.0]).unwrap(),
            vec![vec![3.0, 0.0, 5.0, 1.0], vec![3.0, 5.0, 0.0, 1.0]],
        )
        .unwrap();
        let tset =
            TransformationSet::new(vec![Transformation::identity("only", &base)]).unwrap();
        let spaces = lobby_spaces();
        let rule =
            TransformationRule::from_fn(names(&["only"]), &spaces, &[1, 1], |_, _, _| 0).unwrap();
        let w: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let mg = MetaGame::new(WithinBackend::Finite(base), tset, rule, spaces, w, None).unwrap();
        let m = mg.uniform_profile();
        assert_abs_diff_eq!(environment_payoff(&mg, &m), 3.5, epsilon = 1e-12);
    }

    #[test]
    fn flat_w_gives_full_env_argmax_and_zero_gain() {
        let mg = singleton_meta_game(None);
        let m = mg.uniform_profile();
        let report = env_best_reply(&mg, &m);
        assert_eq!(report.best_actions, vec![0, 1]);
        assert!(report.gain.abs() <= 1e-12);
    }

    #[test]
    fn env_matches_the_players_pure_lobbying_choice() {
        let base = typed_pd();
        let tset = TransformationSet::new(vec![Transformation::identity("only", &base)]).unwrap();
        let spaces = lobby_spaces();
        let type_counts = [2usize, 2];
        let rule =
            TransformationRule::from_fn(names(&["only"]), &spaces, &type_counts, |_, _, _| 0)
                .unwrap();
        let domain = spaces.domain_shape(&type_counts);
        let mut w = Vec::new();
        each_index(&domain, |idx| {
            // reward e = 1 exactly when both players lobby
            let bonus = if idx[0] == 1 && idx[1] == 1 && idx[2] == 1 { 1.0 } else { 0.0 };
            w.push(bonus);
        });
        let mg =
            MetaGame::new(WithinBackend::Finite(base), tset, rule, spaces, w, None).unwrap();
        let m = MetaStrategyProfile::pure(mg.spaces(), &[vec![1, 1], vec![1, 1]], 0);
        let report = env_best_reply(&mg, &m);
        assert_eq!(report.best_actions, vec![1]);
        assert!(report.gain > 0.9);
    }

    #[test]
    fn multiple_equilibria_in_a_rewrite_abort_table_construction() {
        let base = typed_pd();
        // battle-of-the-sexes payoffs for every type profile
        let mut r1 = vec![0.0; 16];
        let mut r2 = vec![0.0; 16];
        for th in 0..4 {
            r1[th] = 2.0;
            r1[8 + 4 + th] = 1.0;
            r2[th] = 1.0;
            r2[8 + 4 + th] = 2.0;
        }
        let tset = TransformationSet::new(vec![
            Transformation::identity("base", &base),
            Transformation::new("bos", vec![r1, r2]).unwrap(),
        ])
        .unwrap();
        let spaces = lobby_spaces();
        let rule = TransformationRule::from_fn(
            names(&["base", "bos"]),
            &spaces,
            &[2, 2],
            |_, e, _| e,
        )
        .unwrap();
        let cells: usize = spaces.domain_shape(&[2, 2]).iter().product();
        let mg = MetaGame::new(
            WithinBackend::Finite(base),
            tset,
            rule,
            spaces,
            vec![0.0; cells],
            None,
        )
        .unwrap();
        match build_equilibrium_table(&mg, 1e-8, Strictness::Lenient) {
            Err(MetaError::UniquenessViolated { id }) => assert_eq!(id, "bos"),
            other => panic!("expected uniqueness violation, got {other:?}"),
        }
    }

    struct ConstantFamily;

    impl FamilyBackend for ConstantFamily {
        fn name(&self) -> &str {
            "constant"
        }
        fn type_counts(&self) -> Vec<usize> {
            vec![1, 1]
        }
        fn prior(&self) -> Prior {
            Prior::from_joint(vec![1, 1], vec![1.0]).unwrap()
        }
        fn solve_within(&self, id: &str, _tol: f64) -> Result<WithinSolution, MetaError> {
            Ok(WithinSolution {
                equilibrium: WithinEquilibrium::Scalar(vec![vec![1.0], vec![1.0]]),
                certificate: Certificate::Analytic("closed form".into()),
                expost: vec![vec![if id == "hi" { 2.0 } else { 1.0 }]; 2],
            })
        }
    }

    #[test]
    fn strict_mode_rejects_analytic_certificates() {
        let family: Arc<dyn FamilyBackend> = Arc::new(ConstantFamily);
        let tset = TransformationSet::new(vec![
            Transformation::new("lo", vec![]).unwrap(),
            Transformation::new("hi", vec![]).unwrap(),
        ])
        .unwrap();
        let spaces = lobby_spaces();
        let rule = TransformationRule::from_fn(
            names(&["lo", "hi"]),
            &spaces,
            &[1, 1],
            |_, e, _| e,
        )
        .unwrap();
        let cells: usize = spaces.domain_shape(&[1, 1]).iter().product();
        let mg = MetaGame::new(
            WithinBackend::Family(family),
            tset,
            rule,
            spaces,
            vec![0.0; cells],
            None,
        )
        .unwrap();
        let lenient = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        assert_abs_diff_eq!(lenient.expost(1, 0, &[0, 0]), 2.0, epsilon = 1e-15);
        assert!(matches!(
            build_equilibrium_table(&mg, 1e-8, Strictness::Strict),
            Err(MetaError::UniquenessUnknown { .. })
        ));
    }

    #[test]
    fn meta_verdicts_match_agent_game_verdicts() {
        let cfg = RandomMetaGameConfig::default();
        let mut tried = 0;
        let mut stream = 0;
        while tried < 3 {
            let mut rng = rng_for(21, stream);
            stream += 1;
            let mg = random_meta_game(&mut rng, &cfg);
            let table = match build_equilibrium_table(&mg, 1e-8, Strictness::Lenient) {
                Ok(t) => t,
                Err(_) => continue,
            };
            tried += 1;
            let agent_game = to_meta_agent_game(&mg, &table).unwrap();
            for _ in 0..100 {
                let m = random_meta_profile(mg.spaces(), &mg.type_counts(), &mut rng);
                let b = meta_profile_to_behavioral(&m);
                for eps in [0.0, 1e-6, 0.1] {
                    let meta = is_meta_bne(&mg, &table, &m, eps).unwrap();
                    let agent = agent_game.is_bne(&b, eps).unwrap();
                    assert_eq!(
                        meta.holds, agent.holds,
                        "eps {eps}: meta gain {} vs agent regret {}",
                        meta.max_gain, agent.max_regret
                    );
                    assert_abs_diff_eq!(meta.max_gain, agent.max_regret, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn v_is_affine_in_each_coordinate() {
        let (mg, table, _) = crate::random::random_audited_meta_game(
            33,
            0,
            1e-8,
            &RandomMetaGameConfig::default(),
        );
        let mut rng = rng_for(34, 0);
        let type_counts = mg.type_counts();
        for _ in 0..20 {
            let m = random_meta_profile(mg.spaces(), &type_counts, &mut rng);
            let mu_a = crate::random::random_distribution(mg.spaces().action_count(0), &mut rng);
            let mu_b = crate::random::random_distribution(mg.spaces().action_count(0), &mut rng);
            for t in [0.25, 0.5, 0.75] {
                let blend = Distribution::new(
                    mu_a.weights()
                        .iter()
                        .zip(mu_b.weights())
                        .map(|(a, b)| (1.0 - t) * a + t * b)
                        .collect(),
                )
                .unwrap();
                let mut ma = m.clone();
                ma.set_row(0, 0, mu_a.clone());
                let mut mb = m.clone();
                mb.set_row(0, 0, mu_b.clone());
                let mut mc = m.clone();
                mc.set_row(0, 0, blend);
                let va = interim_meta_payoff(&mg, &table, &ma, 0, 0).unwrap();
                let vb = interim_meta_payoff(&mg, &table, &mb, 0, 0).unwrap();
                let vc = interim_meta_payoff(&mg, &table, &mc, 0, 0).unwrap();
                assert_abs_diff_eq!(vc, (1.0 - t) * va + t * vb, epsilon = 1e-12);

                let nu_a = crate::random::random_distribution(mg.spaces().env_count(), &mut rng);
                let nu_b = crate::random::random_distribution(mg.spaces().env_count(), &mut rng);
                let nu_c = Distribution::new(
                    nu_a.weights()
                        .iter()
                        .zip(nu_b.weights())
                        .map(|(a, b)| (1.0 - t) * a + t * b)
                        .collect(),
                )
                .unwrap();
                let mut ea = m.clone();
                ea.set_env(nu_a);
                let mut eb = m.clone();
                eb.set_env(nu_b);
                let mut ec = m.clone();
                ec.set_env(nu_c);
                let wa = environment_payoff(&mg, &ea);
                let wb = environment_payoff(&mg, &eb);
                let wc = environment_payoff(&mg, &ec);
                assert_abs_diff_eq!(wc, (1.0 - t) * wa + t * wb, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn v_is_lipschitz_in_l1_distance() {
        let (mg, table, _) = crate::random::random_audited_meta_game(
            44,
            0,
            1e-8,
            &RandomMetaGameConfig::default(),
        );
        let bound = table.max_abs_expost() + mg.max_cost();
        let mut rng = rng_for(45, 0);
        let type_counts = mg.type_counts();
        for _ in 0..50 {
            let a = random_meta_profile(mg.spaces(), &type_counts, &mut rng);
            let b = random_meta_profile(mg.spaces(), &type_counts, &mut rng);
            let dist = a.l1_distance(&b);
            let va = interim_meta_payoff(&mg, &table, &a, 0, 0).unwrap();
            let vb = interim_meta_payoff(&mg, &table, &b, 0, 0).unwrap();
            assert!((va - vb).abs() <= bound * dist + 1e-12);
        }
    }

    #[test]
    fn enumeration_finds_meta_equilibria_that_verify() {
        for stream in 0..5 {
            let (mg, table, _) = crate::random::random_audited_meta_game(
                55,
                stream,
                1e-8,
                &RandomMetaGameConfig::default(),
            );
            let solved =
                solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, 0, 1e-8).unwrap();
            assert!(solved.converged);
            assert!(!solved.equilibria.is_empty());
            for m in &solved.equilibria {
                let check = is_meta_bne(&mg, &table, m, 1e-6).unwrap();
                assert!(check.holds, "max gain {}", check.max_gain);
            }
        }
    }

    #[test]
    fn singleton_spaces_make_everything_an_equilibrium() {
        let base = typed_pd();
        let tset = TransformationSet::new(vec![Transformation::identity("only", &base)]).unwrap();
        let spaces =
            MetaActionSpaces::new(vec![names(&["x"]), names(&["x"])], names(&["e"])).unwrap();
        let rule =
            TransformationRule::from_fn(names(&["only"]), &spaces, &[2, 2], |_, _, _| 0).unwrap();
        let cells: usize = spaces.domain_shape(&[2, 2]).iter().product();
        let mg = MetaGame::new(
            WithinBackend::Finite(base),
            tset,
            rule,
            spaces,
            vec![4.0; cells],
            None,
        )
        .unwrap();
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let m = mg.uniform_profile();
        let check = is_meta_bne(&mg, &table, &m, 0.0).unwrap();
        assert!(check.holds);
        assert!(check.max_gain.abs() <= 1e-12);
    }

    #[test]
    fn iterative_meta_solvers_verify_when_converged() {
        let (mg, table, _) = crate::random::random_audited_meta_game(
            66,
            0,
            1e-8,
            &RandomMetaGameConfig::default(),
        );
        let logit =
            solve_meta_bne_with_table(&mg, &table, SolveMethod::Logit, 3, 1e-8).unwrap();
        if logit.converged {
            let check = is_meta_bne(&mg, &table, &logit.equilibria[0], 1e-6).unwrap();
            assert!(check.holds, "logit max gain {}", check.max_gain);
        }
        let br = solve_meta_bne_with_table(&mg, &table, SolveMethod::BestReply, 3, 1e-8).unwrap();
        if br.converged {
            let check = is_meta_bne(&mg, &table, &br.equilibria[0], 1e-6).unwrap();
            assert!(check.holds, "best-reply max gain {}", check.max_gain);
        }
    }
}
