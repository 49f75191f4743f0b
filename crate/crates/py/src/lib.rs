//! Python bindings over the core crate: finite Bayesian games, transformation
//! meta-games, and their solvers. Profiles cross the boundary as plain nested
//! lists, meta profiles as a `(rows, env)` pair.

use metagame::families::{cyber, platform, subsidy};
use metagame::meta::solve_meta_bne_with_table;
use metagame::random::{
    random_audited_meta_game, random_behavioral_profile, random_game, rng_for,
    RandomMetaGameConfig,
};
use metagame::solve::{default_logit_schedule, DEFAULT_MAX_ITER};
use metagame::{
    build_equilibrium_table, enumerate_equilibria, environment_payoff, interim_meta_payoff,
    is_meta_bne, solve_best_response_iteration, solve_logit_homotopy, transformation_probability,
    BehavioralStrategyProfile, Distribution, EquilibriumTable, FiniteBayesianGame,
    MetaActionSpaces, MetaStrategyProfile, Prior, SolveMethod, Strictness, Transformation,
    TransformationRule, TransformationSet, WithinBackend,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_method(method: &str) -> PyResult<SolveMethod> {
    match method {
        "enumerate" => Ok(SolveMethod::Enumerate),
        "br" => Ok(SolveMethod::BestReply),
        "logit" => Ok(SolveMethod::Logit),
        other => Err(PyValueError::new_err(format!(
            "unknown method {other:?}; expected \"enumerate\", \"br\", or \"logit\""
        ))),
    }
}

fn parse_rows(rows: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<Distribution>>> {
    rows.into_iter()
        .map(|player| player.into_iter().map(|w| Distribution::new(w).map_err(err)).collect())
        .collect()
}

fn rows_to_py(rows: &[Vec<Distribution>]) -> Vec<Vec<Vec<f64>>> {
    rows.iter().map(|player| player.iter().map(|d| d.weights().to_vec()).collect()).collect()
}

fn parse_meta(rows: Vec<Vec<Vec<f64>>>, env: Vec<f64>) -> PyResult<MetaStrategyProfile> {
    Ok(MetaStrategyProfile::new(parse_rows(rows)?, Distribution::new(env).map_err(err)?))
}

fn meta_to_py(m: &MetaStrategyProfile) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
    (rows_to_py(m.rows()), m.env().weights().to_vec())
}

/// A finite Bayesian game with a common prior over type profiles.
#[pyclass]
struct Game {
    inner: FiniteBayesianGame,
}

#[pymethods]
impl Game {
    /// `prior` is the flat joint over type profiles, row-major with the last
    /// player's type fastest; `payoffs[i]` is flat over
    /// `[a_1..a_n, th_1..th_n]` in the same convention.
    #[new]
    fn new(
        type_names: Vec<Vec<String>>,
        action_names: Vec<Vec<String>>,
        prior: Vec<f64>,
        payoffs: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let type_counts: Vec<usize> = type_names.iter().map(|t| t.len()).collect();
        let prior = Prior::from_joint(type_counts, prior).map_err(err)?;
        let inner =
            FiniteBayesianGame::new(type_names, action_names, prior, payoffs).map_err(err)?;
        Ok(Game { inner })
    }

    /// Uniform-payoff random draw with a random prior, reproducible in `seed`.
    #[staticmethod]
    #[pyo3(signature = (type_counts, action_counts, seed=0))]
    fn random(type_counts: Vec<usize>, action_counts: Vec<usize>, seed: u64) -> Self {
        let mut rng = rng_for(seed, 0);
        Game { inner: random_game(&type_counts, &action_counts, &mut rng) }
    }

    #[getter]
    fn players(&self) -> usize {
        self.inner.players()
    }

    fn type_counts(&self) -> Vec<usize> {
        (0..self.inner.players()).map(|i| self.inner.type_count(i)).collect()
    }

    fn action_counts(&self) -> Vec<usize> {
        (0..self.inner.players()).map(|i| self.inner.action_count(i)).collect()
    }

    fn type_names(&self) -> Vec<Vec<String>> {
        (0..self.inner.players()).map(|i| self.inner.type_names(i).to_vec()).collect()
    }

    fn action_names(&self) -> Vec<Vec<String>> {
        (0..self.inner.players()).map(|i| self.inner.action_names(i).to_vec()).collect()
    }

    fn payoff(&self, player: usize, actions: Vec<usize>, types: Vec<usize>) -> f64 {
        self.inner.payoff(player, &actions, &types)
    }

    /// Expected payoff of `(player, type_index)` under the conditional prior.
    fn interim_payoff(
        &self,
        profile: Vec<Vec<Vec<f64>>>,
        player: usize,
        type_index: usize,
    ) -> PyResult<f64> {
        let profile = BehavioralStrategyProfile::new(parse_rows(profile)?);
        self.inner.interim_expected_payoff(&profile, player, type_index).map_err(err)
    }

    /// `(holds, max_regret)` at tolerance `epsilon`.
    fn is_bne(&self, profile: Vec<Vec<Vec<f64>>>, epsilon: f64) -> PyResult<(bool, f64)> {
        let profile = BehavioralStrategyProfile::new(parse_rows(profile)?);
        let check = self.inner.is_bne(&profile, epsilon).map_err(err)?;
        Ok((check.holds, check.max_regret))
    }

    #[pyo3(signature = (tol=1e-8))]
    fn equilibria(&self, tol: f64) -> PyResult<Vec<Vec<Vec<Vec<f64>>>>> {
        let found = enumerate_equilibria(&self.inner, tol).map_err(err)?;
        Ok(found.iter().map(|p| rows_to_py(p.rows())).collect())
    }

    /// Runs one solver; `method` is "enumerate", "br", or "logit". Returns a
    /// dict with keys equilibria, converged, iterations, max_regret, method.
    #[pyo3(signature = (method="enumerate", seed=0, tol=1e-8))]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        seed: u64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        match parse_method(method)? {
            SolveMethod::Enumerate => {
                let found = enumerate_equilibria(&self.inner, tol).map_err(err)?;
                let max_regret = found
                    .iter()
                    .map(|p| self.inner.is_bne(p, tol).expect("enumerated profile fits").max_regret)
                    .fold(0.0f64, f64::max);
                out.set_item(
                    "equilibria",
                    found.iter().map(|p| rows_to_py(p.rows())).collect::<Vec<_>>(),
                )?;
                out.set_item("converged", !found.is_empty())?;
                out.set_item("iterations", 0)?;
                out.set_item("max_regret", max_regret)?;
            }
            m @ (SolveMethod::BestReply | SolveMethod::Logit) => {
                let report = if matches!(m, SolveMethod::BestReply) {
                    let mut rng = rng_for(seed, 0);
                    let init = random_behavioral_profile(&self.inner, &mut rng);
                    solve_best_response_iteration(&self.inner, &init, 0.5, DEFAULT_MAX_ITER, tol)
                        .map_err(err)?
                } else {
                    solve_logit_homotopy(&self.inner, &default_logit_schedule(), tol)
                        .map_err(err)?
                };
                out.set_item("equilibria", vec![rows_to_py(report.profile.rows())])?;
                out.set_item("converged", report.converged)?;
                out.set_item("iterations", report.iterations)?;
                out.set_item("max_regret", report.max_regret)?;
            }
        }
        out.set_item("method", method)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(players={}, types={:?}, actions={:?})",
            self.inner.players(),
            self.type_counts(),
            self.action_counts()
        )
    }
}

/// A payoff-transformation meta-game over a base game, carrying the audited
/// per-transformation equilibrium table.
#[pyclass]
struct MetaGame {
    inner: metagame::MetaGame,
    table: EquilibriumTable,
}

impl MetaGame {
    fn wrap(inner: metagame::MetaGame, tol: f64, strict: bool) -> PyResult<Self> {
        let strictness = if strict { Strictness::Strict } else { Strictness::Lenient };
        let table = build_equilibrium_table(&inner, tol, strictness).map_err(err)?;
        Ok(MetaGame { inner, table })
    }
}

#[pymethods]
impl MetaGame {
    /// `transformations` pairs each id with per-player payoff rewrites;
    /// `rule` lists a transformation id per `[x_1..x_n, e, th_1..th_n]` cell,
    /// last index fastest; `env_payoff` is flat over the same domain;
    /// `costs[i]`, when given, is flat over `[x_i, th_i]`.
    #[new]
    #[pyo3(signature = (base, transformations, meta_actions, env_moves, rule, env_payoff, costs=None, tol=1e-8, strict=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        base: PyRef<'_, Game>,
        transformations: Vec<(String, Vec<Vec<f64>>)>,
        meta_actions: Vec<Vec<String>>,
        env_moves: Vec<String>,
        rule: Vec<String>,
        env_payoff: Vec<f64>,
        costs: Option<Vec<Vec<f64>>>,
        tol: f64,
        strict: bool,
    ) -> PyResult<Self> {
        let tset = TransformationSet::new(
            transformations
                .into_iter()
                .map(|(id, rewrite)| Transformation::new(id, rewrite))
                .collect::<Result<_, _>>()
                .map_err(err)?,
        )
        .map_err(err)?;
        let spaces = MetaActionSpaces::new(meta_actions, env_moves).map_err(err)?;
        let type_counts = base.inner.prior().type_counts().to_vec();
        let entries = rule
            .iter()
            .map(|id| {
                tset.index_of(id)
                    .ok_or_else(|| PyValueError::new_err(format!("rule names unknown id {id:?}")))
            })
            .collect::<PyResult<Vec<usize>>>()?;
        let rule = TransformationRule::new(
            tset.ids().iter().map(|s| s.to_string()).collect(),
            &spaces,
            &type_counts,
            entries,
        )
        .map_err(err)?;
        let inner = metagame::MetaGame::new(
            WithinBackend::Finite(base.inner.clone()),
            tset,
            rule,
            spaces,
            env_payoff,
            costs,
        )
        .map_err(err)?;
        MetaGame::wrap(inner, tol, strict)
    }

    /// Random small meta-game that already passed the per-transformation
    /// uniqueness audit.
    #[staticmethod]
    #[pyo3(signature = (seed=0, stream=0, tol=1e-8))]
    fn random(seed: u64, stream: u64, tol: f64) -> Self {
        let (inner, table, _) =
            random_audited_meta_game(seed, stream, tol, &RandomMetaGameConfig::default());
        MetaGame { inner, table }
    }

    /// Duopoly subsidy-lobbying example at its default parameters.
    #[staticmethod]
    #[pyo3(signature = (tol=1e-8))]
    fn subsidy(tol: f64) -> PyResult<Self> {
        let inner =
            subsidy::build_subsidy_metagame(&subsidy::default_params()).map_err(err)?;
        MetaGame::wrap(inner, tol, false)
    }

    /// Security-standard adoption example at its default parameters.
    #[staticmethod]
    #[pyo3(signature = (tol=1e-8))]
    fn cyber(tol: f64) -> PyResult<Self> {
        let inner = cyber::build_cyber_metagame(&cyber::default_params()).map_err(err)?;
        MetaGame::wrap(inner, tol, false)
    }

    /// Platform governance example at its default parameters.
    #[staticmethod]
    #[pyo3(signature = (tol=1e-8))]
    fn platform(tol: f64) -> PyResult<Self> {
        let inner =
            platform::build_platform_metagame(&platform::default_params()).map_err(err)?;
        MetaGame::wrap(inner, tol, false)
    }

    #[getter]
    fn players(&self) -> usize {
        self.inner.players()
    }

    fn type_counts(&self) -> Vec<usize> {
        self.inner.type_counts()
    }

    fn transformation_ids(&self) -> Vec<String> {
        self.inner.tset().ids().iter().map(|s| s.to_string()).collect()
    }

    fn meta_action_names(&self) -> Vec<Vec<String>> {
        (0..self.inner.players())
            .map(|i| self.inner.spaces().action_labels(i).to_vec())
            .collect()
    }

    fn env_move_names(&self) -> Vec<String> {
        self.inner.spaces().env_labels().to_vec()
    }

    /// Probability of each transformation at `(rows, env)` given the type
    /// profile `types`.
    fn transformation_probability(
        &self,
        rows: Vec<Vec<Vec<f64>>>,
        env: Vec<f64>,
        types: Vec<usize>,
    ) -> PyResult<Vec<f64>> {
        let m = parse_meta(rows, env)?;
        Ok(transformation_probability(self.inner.rule(), &m, &types).weights().to_vec())
    }

    /// Equilibrium payoff of `player` at `types` under transformation
    /// `t_index`, before meta-action costs.
    fn equilibrium_payoff(&self, t_index: usize, player: usize, types: Vec<usize>) -> f64 {
        self.table.expost(t_index, player, &types)
    }

    fn interim_meta_payoff(
        &self,
        rows: Vec<Vec<Vec<f64>>>,
        env: Vec<f64>,
        player: usize,
        type_index: usize,
    ) -> PyResult<f64> {
        let m = parse_meta(rows, env)?;
        interim_meta_payoff(&self.inner, &self.table, &m, player, type_index).map_err(err)
    }

    fn environment_payoff(&self, rows: Vec<Vec<Vec<f64>>>, env: Vec<f64>) -> PyResult<f64> {
        let m = parse_meta(rows, env)?;
        Ok(environment_payoff(&self.inner, &m))
    }

    /// `(holds, max_gain)` at tolerance `epsilon`.
    fn is_meta_bne(
        &self,
        rows: Vec<Vec<Vec<f64>>>,
        env: Vec<f64>,
        epsilon: f64,
    ) -> PyResult<(bool, f64)> {
        let m = parse_meta(rows, env)?;
        let check = is_meta_bne(&self.inner, &self.table, &m, epsilon).map_err(err)?;
        Ok((check.holds, check.max_gain))
    }

    /// Runs one meta-solver; returns a dict with keys equilibria (a list of
    /// `(rows, env)` pairs), converged, iterations, max_gain, method.
    #[pyo3(signature = (method="enumerate", seed=0, tol=1e-8))]
    fn solve<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        seed: u64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let solved =
            solve_meta_bne_with_table(&self.inner, &self.table, parse_method(method)?, seed, tol)
                .map_err(err)?;
        let out = PyDict::new(py);
        out.set_item(
            "equilibria",
            solved.equilibria.iter().map(meta_to_py).collect::<Vec<_>>(),
        )?;
        out.set_item("converged", solved.converged)?;
        out.set_item("iterations", solved.iterations)?;
        out.set_item("max_gain", solved.max_gain)?;
        out.set_item("method", solved.method)?;
        Ok(out)
    }

    /// The reduction to an ordinary Bayesian game: the same players with the
    /// environment appended as a typeless final player, meta-action costs
    /// folded in, and epsilon verdicts matching `is_meta_bne`.
    fn to_game(&self) -> PyResult<Game> {
        let inner = metagame::to_meta_agent_game(&self.inner, &self.table).map_err(err)?;
        Ok(Game { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "MetaGame(players={}, transformations={:?}, env_moves={:?})",
            self.inner.players(),
            self.transformation_ids(),
            self.env_move_names()
        )
    }
}

#[pymodule]
fn metagame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<MetaGame>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
