//! Payoff transformations, the transformation rule, and the induced
//! distribution over transformations.
//!
//! A transformation replaces the payoff tables of a base game while leaving
//! players, actions, types, and the prior untouched. The rule maps every
//! (meta-action profile, environment move, type profile) cell to one
//! transformation; mixing over meta-actions induces a distribution over
//! transformations.

use crate::game::{Distribution, FiniteBayesianGame, GameError};
use crate::table::{each_index, Table};

/// One payoff rewrite. `payoff_rewrite[i]` is player i's replacement table,
/// flat over `[a_1..a_n, th_1..th_n]` with the last axis fastest.
#[derive(Debug, Clone)]
pub struct Transformation {
    id: String,
    payoff_rewrite: Vec<Vec<f64>>,
}

impl Transformation {
    pub fn new(id: impl Into<String>, payoff_rewrite: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let id = id.into();
        if id.is_empty() {
            return Err(GameError::InvalidInput("empty transformation id".into()));
        }
        if payoff_rewrite.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidInput(format!(
                "transformation {id} has non-finite payoff entries"
            )));
        }
        Ok(Transformation { id, payoff_rewrite })
    }

    /// Rewrite equal to the base game's own payoffs.
    pub fn identity(id: impl Into<String>, base: &FiniteBayesianGame) -> Self {
        let rewrite = (0..base.players()).map(|i| base.payoff_table(i).to_vec()).collect();
        Transformation::new(id, rewrite).expect("base payoffs are finite")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn payoff_rewrite(&self) -> &[Vec<f64>] {
        &self.payoff_rewrite
    }
}

/// The finite, ordered transformation set. Ids are the canonical keys.
#[derive(Debug, Clone)]
pub struct TransformationSet {
    transformations: Vec<Transformation>,
}

impl TransformationSet {
    pub fn new(transformations: Vec<Transformation>) -> Result<Self, GameError> {
        if transformations.is_empty() {
            return Err(GameError::InvalidInput("empty transformation set".into()));
        }
        for (i, t) in transformations.iter().enumerate() {
            if transformations[..i].iter().any(|s| s.id == t.id) {
                return Err(GameError::InvalidInput(format!(
                    "duplicate transformation id {}",
                    t.id
                )));
            }
        }
        Ok(TransformationSet { transformations })
    }

    pub fn len(&self) -> usize {
        self.transformations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, index: usize) -> &Transformation {
        &self.transformations[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transformation> {
        self.transformations.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.transformations.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.transformations.iter().position(|t| t.id == id)
    }
}

/// Meta-action labels per player plus the environment's move labels.
#[derive(Debug, Clone)]
pub struct MetaActionSpaces {
    player_actions: Vec<Vec<String>>,
    env_moves: Vec<String>,
}

impl MetaActionSpaces {
    pub fn new(player_actions: Vec<Vec<String>>, env_moves: Vec<String>) -> Result<Self, GameError> {
        if player_actions.iter().any(|x| x.is_empty()) || env_moves.is_empty() {
            return Err(GameError::InvalidInput("empty meta-action or environment set".into()));
        }
        Ok(MetaActionSpaces { player_actions, env_moves })
    }

    pub fn players(&self) -> usize {
        self.player_actions.len()
    }

    pub fn action_count(&self, player: usize) -> usize {
        self.player_actions[player].len()
    }

    pub fn action_labels(&self, player: usize) -> &[String] {
        &self.player_actions[player]
    }

    pub fn env_count(&self) -> usize {
        self.env_moves.len()
    }

    pub fn env_labels(&self) -> &[String] {
        &self.env_moves
    }

    /// Table shape `[x_1..x_n, e, th_1..th_n]` shared by the rule and the
    /// environment payoff.
    pub fn domain_shape(&self, type_counts: &[usize]) -> Vec<usize> {
        let mut shape: Vec<usize> =
            self.player_actions.iter().map(|x| x.len()).collect();
        shape.push(self.env_moves.len());
        shape.extend_from_slice(type_counts);
        shape
    }
}

/// Dense total map from `(x, e, th)` to a transformation, stored by index
/// into an id list that must agree with the governing transformation set.
#[derive(Debug, Clone)]
pub struct TransformationRule {
    ids: Vec<String>,
    players: usize,
    table: Table<usize>,
}

impl TransformationRule {
    pub fn new(
        ids: Vec<String>,
        spaces: &MetaActionSpaces,
        type_counts: &[usize],
        entries: Vec<usize>,
    ) -> Result<Self, GameError> {
        if ids.is_empty() {
            return Err(GameError::InvalidInput("rule references no transformations".into()));
        }
        if type_counts.len() != spaces.players() {
            return Err(GameError::ShapeMismatch(format!(
                "{} type counts for {} players",
                type_counts.len(),
                spaces.players()
            )));
        }
        if let Some(&bad) = entries.iter().find(|&&t| t >= ids.len()) {
            return Err(GameError::InvalidInput(format!(
                "rule entry {bad} out of range for {} transformations",
                ids.len()
            )));
        }
        let table = Table::from_flat(spaces.domain_shape(type_counts), entries)?;
        Ok(TransformationRule { ids, players: spaces.players(), table })
    }

    /// Builds the dense table by evaluating `f(x, e, th)` on every cell.
    pub fn from_fn(
        ids: Vec<String>,
        spaces: &MetaActionSpaces,
        type_counts: &[usize],
        f: impl Fn(&[usize], usize, &[usize]) -> usize,
    ) -> Result<Self, GameError> {
        let n = spaces.players();
        let shape = spaces.domain_shape(type_counts);
        let mut entries = Vec::with_capacity(shape.iter().product());
        each_index(&shape, |idx| {
            entries.push(f(&idx[..n], idx[n], &idx[n + 1..]));
        });
        TransformationRule::new(ids, spaces, type_counts, entries)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn transformation_count(&self) -> usize {
        self.ids.len()
    }

    pub fn transformation_index(&self, x: &[usize], e: usize, types: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.players);
        let mut idx = Vec::with_capacity(self.table.shape().len());
        idx.extend_from_slice(x);
        idx.push(e);
        idx.extend_from_slice(types);
        self.table.get(&idx)
    }

    pub fn transformation_id(&self, x: &[usize], e: usize, types: &[usize]) -> &str {
        &self.ids[self.transformation_index(x, e, types)]
    }

    /// Checks that every id this rule refers to names a member of `tset`, in
    /// the same order, so indices agree across the two structures.
    pub fn check_against(&self, tset: &TransformationSet) -> Result<(), GameError> {
        if self.ids.len() != tset.len()
            || self.ids.iter().zip(tset.ids()).any(|(a, b)| a != b)
        {
            return Err(GameError::InvalidInput(format!(
                "rule ids {:?} do not match transformation set ids {:?}",
                self.ids,
                tset.ids()
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> &[usize] {
        self.table.shape()
    }
}

/// Type-dependent mixed meta-strategies for the players plus the
/// environment's mixed move.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaStrategyProfile {
    rows: Vec<Vec<Distribution>>,
    env: Distribution,
}

impl MetaStrategyProfile {
    pub fn new(rows: Vec<Vec<Distribution>>, env: Distribution) -> Self {
        MetaStrategyProfile { rows, env }
    }

    pub fn uniform(spaces: &MetaActionSpaces, type_counts: &[usize]) -> Self {
        let rows = (0..spaces.players())
            .map(|i| {
                (0..type_counts[i]).map(|_| Distribution::uniform(spaces.action_count(i))).collect()
            })
            .collect();
        MetaStrategyProfile { rows, env: Distribution::uniform(spaces.env_count()) }
    }

    /// Point masses: `picks[i][t]` is the meta-action of player i's type t.
    pub fn pure(spaces: &MetaActionSpaces, picks: &[Vec<usize>], env_move: usize) -> Self {
        let rows = picks
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter().map(|&x| Distribution::point(spaces.action_count(i), x)).collect()
            })
            .collect();
        MetaStrategyProfile { rows, env: Distribution::point(spaces.env_count(), env_move) }
    }

    pub fn players(&self) -> usize {
        self.rows.len()
    }

    pub fn type_count(&self, player: usize) -> usize {
        self.rows[player].len()
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

    pub fn env(&self) -> &Distribution {
        &self.env
    }

    pub fn set_env(&mut self, d: Distribution) {
        self.env = d;
    }

    pub fn validate(
        &self,
        spaces: &MetaActionSpaces,
        type_counts: &[usize],
    ) -> Result<(), GameError> {
        if self.rows.len() != spaces.players() {
            return Err(GameError::ShapeMismatch(format!(
                "{} strategy rows for {} players",
                self.rows.len(),
                spaces.players()
            )));
        }
        for (i, rows) in self.rows.iter().enumerate() {
            if rows.len() != type_counts[i] {
                return Err(GameError::ShapeMismatch(format!(
                    "player {i} has {} rows for {} types",
                    rows.len(),
                    type_counts[i]
                )));
            }
            if let Some(d) = rows.iter().find(|d| d.len() != spaces.action_count(i)) {
                return Err(GameError::ShapeMismatch(format!(
                    "player {i} row has {} weights for {} meta-actions",
                    d.len(),
                    spaces.action_count(i)
                )));
            }
        }
        if self.env.len() != spaces.env_count() {
            return Err(GameError::ShapeMismatch(format!(
                "environment row has {} weights for {} moves",
                self.env.len(),
                spaces.env_count()
            )));
        }
        Ok(())
    }

    pub fn l1_distance(&self, other: &MetaStrategyProfile) -> f64 {
        let mut total = 0.0;
        for (a, b) in self.rows.iter().flatten().zip(other.rows.iter().flatten()) {
            for (x, y) in a.weights().iter().zip(b.weights()) {
                total += (x - y).abs();
            }
        }
        for (x, y) in self.env.weights().iter().zip(other.env.weights()) {
            total += (x - y).abs();
        }
        total
    }
}

/// Replaces the base game's payoffs with the transformation's rewrite.
/// Everything else (players, actions, types, prior) carries over.
pub fn apply_transformation(
    t: &Transformation,
    base: &FiniteBayesianGame,
) -> Result<FiniteBayesianGame, GameError> {
    FiniteBayesianGame::new(
        (0..base.players()).map(|i| base.type_names(i).to_vec()).collect(),
        (0..base.players()).map(|i| base.action_names(i).to_vec()).collect(),
        base.prior().clone(),
        t.payoff_rewrite.clone(),
    )
}

/// Probability of each transformation under mixed meta-play at a fixed type
/// profile: the rule indicator summed over (x, e) cells weighted by the
/// product of the players' and the environment's mixing weights.
pub fn transformation_probability(
    rule: &TransformationRule,
    m: &MetaStrategyProfile,
    types: &[usize],
) -> Distribution {
    let shape = rule.shape();
    let n = m.players();
    let xe_shape: Vec<usize> = shape[..=n].to_vec();
    let mut weights = vec![0.0; rule.transformation_count()];
    each_index(&xe_shape, |xe| {
        let mut p = m.env().get(xe[n]);
        for i in 0..n {
            p *= m.row(i, types[i]).get(xe[i]);
            if p == 0.0 {
                return;
            }
        }
        if p == 0.0 {
            return;
        }
        weights[rule.transformation_index(&xe[..n], xe[n], types)] += p;
    });
    Distribution::normalized(weights, 1e-9).expect("product mixing weights sum to one")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Prior;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn small_base() -> FiniteBayesianGame {
        FiniteBayesianGame::new(
            vec![names(&["*"]), names(&["*"])],
            vec![names(&["c", "d"]), names(&["c", "d"])],
            Prior::from_joint(vec![1, 1], vec![1.0]).unwrap(),
            vec![vec![3.0, 0.0, 5.0, 1.0], vec![3.0, 5.0, 0.0, 1.0]],
        )
        .unwrap()
    }

    // 𝒯 = {T0, T1, T2, TS}; x_i ∈ {0 = stay out, 1 = lobby}; e ∈ {N, R}.
    // e=N keeps T0; under R, solo lobbying earns the solo rewrite and joint
    // lobbying the shared one.
    fn lobby_rule(spaces: &MetaActionSpaces, type_counts: &[usize]) -> TransformationRule {
        TransformationRule::from_fn(
            names(&["T0", "T1", "T2", "TS"]),
            spaces,
            type_counts,
            |x, e, _| match (e, x[0], x[1]) {
                (0, _, _) => 0,
                (1, 1, 0) => 1,
                (1, 0, 1) => 2,
                (1, 1, 1) => 3,
                _ => 0,
            },
        )
        .unwrap()
    }

    fn lobby_spaces() -> MetaActionSpaces {
        MetaActionSpaces::new(
            vec![names(&["out", "lobby"]), names(&["out", "lobby"])],
            names(&["N", "R"]),
        )
        .unwrap()
    }

    #[test]
    fn identity_transformation_preserves_payoffs() {
        let base = small_base();
        let t = Transformation::identity("same", &base);
        let out = apply_transformation(&t, &base).unwrap();
        for i in 0..2 {
            assert_eq!(out.payoff_table(i), base.payoff_table(i));
        }
    }

    #[test]
    fn rewrite_is_replacement_not_composition() {
        let base = small_base();
        let r1 = Transformation::new("r1", vec![vec![1.0; 4], vec![1.0; 4]]).unwrap();
        let r2 = Transformation::new("r2", vec![vec![2.0; 4], vec![9.0; 4]]).unwrap();
        let after_r1 = apply_transformation(&r1, &base).unwrap();
        let chained = apply_transformation(&r2, &after_r1).unwrap();
        let direct = apply_transformation(&r2, &base).unwrap();
        for i in 0..2 {
            assert_eq!(chained.payoff_table(i), direct.payoff_table(i));
        }
    }

    #[test]
    fn wrong_shape_rewrite_rejected() {
        let base = small_base();
        let bad = Transformation::new("bad", vec![vec![1.0; 3], vec![1.0; 4]]).unwrap();
        assert!(apply_transformation(&bad, &base).is_err());
    }

    #[test]
    fn non_finite_rewrite_rejected() {
        assert!(Transformation::new("nan", vec![vec![f64::NAN; 4]]).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = Transformation::new("x", vec![vec![0.0]]).unwrap();
        let b = Transformation::new("x", vec![vec![1.0]]).unwrap();
        assert!(TransformationSet::new(vec![a, b]).is_err());
    }

    #[test]
    fn pure_meta_play_gives_point_mass_on_rule_cell() {
        let spaces = lobby_spaces();
        let rule = lobby_rule(&spaces, &[1, 1]);
        let m = MetaStrategyProfile::pure(&spaces, &[vec![1], vec![0]], 1);
        let pi = transformation_probability(&rule, &m, &[0, 0]);
        assert_abs_diff_eq!(pi.get(1), 1.0, epsilon = 1e-15);
        let m_n = MetaStrategyProfile::pure(&spaces, &[vec![1], vec![1]], 0);
        let pi_n = transformation_probability(&rule, &m_n, &[0, 0]);
        assert_abs_diff_eq!(pi_n.get(0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn joint_lobbying_under_reform_selects_shared_rewrite() {
        let spaces = lobby_spaces();
        let rule = lobby_rule(&spaces, &[1, 1]);
        let m = MetaStrategyProfile::pure(&spaces, &[vec![1], vec![1]], 1);
        let pi = transformation_probability(&rule, &m, &[0, 0]);
        assert_abs_diff_eq!(pi.get(3), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_mixing_matches_hand_enumeration() {
        let spaces = lobby_spaces();
        let rule = lobby_rule(&spaces, &[1, 1]);
        let mut m = MetaStrategyProfile::uniform(&spaces, &[1, 1]);
        m.set_env(Distribution::uniform(2));
        let pi = transformation_probability(&rule, &m, &[0, 0]);
        assert_abs_diff_eq!(pi.get(0), 5.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.get(1), 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.get(2), 1.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.get(3), 1.0 / 8.0, epsilon = 1e-15);
    }

    fn random_profile(
        spaces: &MetaActionSpaces,
        type_counts: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> MetaStrategyProfile {
        let mut m = MetaStrategyProfile::uniform(spaces, type_counts);
        for i in 0..spaces.players() {
            for t in 0..type_counts[i] {
                m.set_row(i, t, random_distribution(spaces.action_count(i), rng));
            }
        }
        m.set_env(random_distribution(spaces.env_count(), rng));
        m
    }

    fn random_distribution(n: usize, rng: &mut ChaCha8Rng) -> Distribution {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-9).collect();
        let total: f64 = raw.iter().sum();
        Distribution::new(raw.iter().map(|v| v / total).collect()).unwrap()
    }

    #[test]
    fn probabilities_normalize_and_are_affine_per_coordinate() {
        let spaces = lobby_spaces();
        let type_counts = [2usize, 2];
        let rule = lobby_rule(&spaces, &type_counts);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let m = random_profile(&spaces, &type_counts, &mut rng);
            let types = [rng.random_range(0..2), rng.random_range(0..2)];
            let pi = transformation_probability(&rule, &m, &types);
            assert_abs_diff_eq!(pi.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);

            // affinity in player 0's row at the drawn type
            let mu_a = random_distribution(2, &mut rng);
            let mu_b = random_distribution(2, &mut rng);
            for t in [0.25, 0.5, 0.75] {
                let blend: Vec<f64> = mu_a
                    .weights()
                    .iter()
                    .zip(mu_b.weights())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                let mut ma = m.clone();
                ma.set_row(0, types[0], mu_a.clone());
                let mut mb = m.clone();
                mb.set_row(0, types[0], mu_b.clone());
                let mut mc = m.clone();
                mc.set_row(0, types[0], Distribution::new(blend).unwrap());
                let pa = transformation_probability(&rule, &ma, &types);
                let pb = transformation_probability(&rule, &mb, &types);
                let pc = transformation_probability(&rule, &mc, &types);
                for k in 0..4 {
                    assert_abs_diff_eq!(
                        pc.get(k),
                        (1.0 - t) * pa.get(k) + t * pb.get(k),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn monte_carlo_frequencies_match_probabilities() {
        let spaces = lobby_spaces();
        let rule = lobby_rule(&spaces, &[1, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_profile(&spaces, &[1, 1], &mut rng);
        let pi = transformation_probability(&rule, &m, &[0, 0]);
        let draws = 100_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let x = [sample(m.row(0, 0), &mut rng), sample(m.row(1, 0), &mut rng)];
            let e = sample(m.env(), &mut rng);
            counts[rule.transformation_index(&x, e, &[0, 0])] += 1;
        }
        for k in 0..4 {
            let p = pi.get(k);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = counts[k] as f64 / draws as f64;
            assert!(
                (freq - p).abs() <= 3.0 * se + 1e-12,
                "transformation {k}: freq {freq} vs p {p} (se {se})"
            );
        }
    }

    fn sample(d: &Distribution, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in d.weights().iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        d.len() - 1
    }
}
