//! Duopoly subsidy lobbying: two firms with private marginal costs price
//! differentiated goods; lobbying sways a regulator who may grant per-unit
//! subsidies. Within-game equilibria are closed-form, so the family backend
//! certifies uniqueness analytically.
//!
//! Demand for firm i is `a - b p_i + gamma p_j`; a subsidy s lowers the
//! effective cost, so interim best responses are
//! `p_i(th) = (a + b (c(th) - s_i) + gamma E[p_j]) / (2 b)`,
//! a contraction in the opponent's mean price since `gamma < b`.

use crate::families::FamilyError;
use crate::game::{Distribution, Prior};
use crate::meta::{
    build_equilibrium_table, interim_meta_payoff, solve_meta_bne_with_table, Certificate,
    EquilibriumTable, FamilyBackend, MetaError, MetaGame, Strictness, WithinBackend,
    WithinEquilibrium, WithinSolution,
};
use crate::random::rng_for;
use crate::solve::SolveMethod;
use crate::table::each_index;
use crate::transform::{
    MetaActionSpaces, MetaStrategyProfile, Transformation, TransformationRule, TransformationSet,
};
use rand::Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Policy regimes: no subsidy, solo subsidy for firm 1 or firm 2, shared.
pub const SUBSIDY_REGIMES: [&str; 4] = ["T0", "T1", "T2", "TS"];

pub const LOW: usize = 0;
pub const HIGH: usize = 1;

/// Slack on the monotone-lobbying comparison.
pub const MONOTONE_TOL: f64 = 1e-9;
/// Lobbying gains closer to zero than this are treated as knife-edge
/// indifference and the instance as non-generic.
pub const GENERIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SubsidyParams {
    /// Demand intercept, > 0.
    pub a: f64,
    /// Own-price slope, > 0.
    pub b: f64,
    /// Cross-price slope, in [0, b).
    pub gamma: f64,
    /// Marginal costs, 0 < c_low < c_high.
    pub c_low: f64,
    pub c_high: f64,
    /// Probability of the high-cost type, in (0, 1); independent across firms.
    pub q_high: f64,
    /// Per-unit subsidy granted by the responsive regulator, >= 0.
    pub subsidy: f64,
    /// Lobbying cost `kappa[firm][type]`, >= 0.
    pub kappa: [[f64; 2]; 2],
    /// Upper bound of the admissible price range.
    pub price_cap: f64,
    /// Small political payoff the regulator collects for being responsive,
    /// >= 0. Any positive value keeps the regulator's comparison strict, so
    /// its move never sits at a knife edge.
    pub responsive_bonus: f64,
}

impl SubsidyParams {
    pub fn new(
        a: f64,
        b: f64,
        gamma: f64,
        c_low: f64,
        c_high: f64,
        q_high: f64,
        subsidy: f64,
        kappa: [[f64; 2]; 2],
        price_cap: f64,
        responsive_bonus: f64,
    ) -> Result<Self, FamilyError> {
        let params = SubsidyParams {
            a,
            b,
            gamma,
            c_low,
            c_high,
            q_high,
            subsidy,
            kappa,
            price_cap,
            responsive_bonus,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<(), FamilyError> {
        let bad = |msg: String| Err(FamilyError::InvalidParams(msg));
        if !(self.a > 0.0 && self.b > 0.0) {
            return bad(format!("need a > 0 and b > 0, got a={}, b={}", self.a, self.b));
        }
        if !(self.gamma >= 0.0 && self.gamma < self.b) {
            return bad(format!(
                "need 0 <= gamma < b for a contracting best response, got gamma={}, b={}",
                self.gamma, self.b
            ));
        }
        if !(0.0 < self.c_low && self.c_low < self.c_high) {
            return bad(format!(
                "need 0 < c_low < c_high, got c_low={}, c_high={}",
                self.c_low, self.c_high
            ));
        }
        if !(self.q_high > 0.0 && self.q_high < 1.0) {
            return bad(format!("need q_high in (0,1), got {}", self.q_high));
        }
        if self.subsidy < 0.0 {
            return bad(format!("need subsidy >= 0, got {}", self.subsidy));
        }
        if self.kappa.iter().flatten().any(|k| !k.is_finite() || *k < 0.0) {
            return bad(format!("need nonnegative lobbying costs, got {:?}", self.kappa));
        }
        if !(self.price_cap > 0.0) {
            return bad(format!("need price_cap > 0, got {}", self.price_cap));
        }
        if self.responsive_bonus < 0.0 {
            return bad(format!("need responsive_bonus >= 0, got {}", self.responsive_bonus));
        }
        // every regime's equilibrium must be interior for the closed form
        for id in SUBSIDY_REGIMES {
            solve_within(self, id)?;
        }
        Ok(())
    }

    pub fn cost(&self, type_index: usize) -> f64 {
        if type_index == LOW {
            self.c_low
        } else {
            self.c_high
        }
    }

    /// Per-firm subsidy pair granted by a regime.
    pub fn regime_subsidies(&self, id: &str) -> Result<[f64; 2], FamilyError> {
        match id {
            "T0" => Ok([0.0, 0.0]),
            "T1" => Ok([self.subsidy, 0.0]),
            "T2" => Ok([0.0, self.subsidy]),
            "TS" => Ok([self.subsidy, self.subsidy]),
            other => Err(FamilyError::InvalidParams(format!("unknown regime {other}"))),
        }
    }
}

/// A mid-range parameterization exercised in tests: moderate demand, a cost
/// gap of 0.8, an affordable subsidy, and lobbying fees cheap enough that the
/// low-cost type always buys in.
pub fn default_params() -> SubsidyParams {
    SubsidyParams::new(10.0, 1.0, 0.3, 1.2, 2.0, 0.5, 0.8, [[0.5, 0.6], [0.5, 0.6]], 20.0, 0.01)
        .expect("checked parameterization")
}

/// Closed-form within-game equilibrium of one regime.
#[derive(Debug, Clone)]
pub struct SubsidyWithin {
    /// `prices[firm][type]`.
    pub prices: [[f64; 2]; 2],
    /// Expected price per firm under the type prior.
    pub mean_prices: [f64; 2],
    /// `expost[firm]` flat over `[th_1, th_2]`.
    pub expost: [[f64; 4]; 2],
}

/// Solves the interim first-order conditions of one regime exactly.
pub fn subsidy_within_game_solve(
    params: &SubsidyParams,
    regime: &str,
) -> Result<SubsidyWithin, FamilyError> {
    solve_within(params, regime)
}

fn solve_within(params: &SubsidyParams, regime: &str) -> Result<SubsidyWithin, FamilyError> {
    let s = params.regime_subsidies(regime)?;
    let (a, b, g) = (params.a, params.b, params.gamma);
    let q = params.q_high;
    let c_bar = q * params.c_high + (1.0 - q) * params.c_low;

    // mean prices solve a 2x2 linear system with determinant 4b^2 - g^2 > 0
    let k = [a + b * (c_bar - s[0]), a + b * (c_bar - s[1])];
    let det = 4.0 * b * b - g * g;
    let mean_prices = [
        (2.0 * b * k[0] + g * k[1]) / det,
        (g * k[0] + 2.0 * b * k[1]) / det,
    ];

    let mut prices = [[0.0; 2]; 2];
    for firm in 0..2 {
        for ty in 0..2 {
            let p = (a + b * (params.cost(ty) - s[firm]) + g * mean_prices[1 - firm]) / (2.0 * b);
            if !(p > 0.0 && p < params.price_cap) {
                return Err(FamilyError::BoundaryEquilibrium(format!(
                    "regime {regime}: firm {} type {} price {p:.4} leaves (0, {})",
                    firm + 1,
                    ["L", "H"][ty],
                    params.price_cap
                )));
            }
            prices[firm][ty] = p;
        }
    }

    let mut expost = [[0.0; 4]; 2];
    for t1 in 0..2 {
        for t2 in 0..2 {
            let ty = [t1, t2];
            for firm in 0..2 {
                let p_own = prices[firm][ty[firm]];
                let p_other = prices[1 - firm][ty[1 - firm]];
                let margin = p_own - params.cost(ty[firm]) + s[firm];
                let demand = a - b * p_own + g * p_other;
                expost[firm][t1 * 2 + t2] = margin * demand;
            }
        }
    }
    Ok(SubsidyWithin { prices, mean_prices, expost })
}

/// The closed-form within-game solver as a meta-game backend.
#[derive(Debug, Clone)]
pub struct SubsidyFamily {
    params: SubsidyParams,
}

impl SubsidyFamily {
    pub fn new(params: SubsidyParams) -> Self {
        SubsidyFamily { params }
    }

    pub fn params(&self) -> &SubsidyParams {
        &self.params
    }
}

impl FamilyBackend for SubsidyFamily {
    fn name(&self) -> &str {
        "subsidy"
    }

    fn type_counts(&self) -> Vec<usize> {
        vec![2, 2]
    }

    fn prior(&self) -> Prior {
        let q = self.params.q_high;
        Prior::independent(&[vec![1.0 - q, q], vec![1.0 - q, q]])
            .expect("validated q yields a prior")
    }

    fn type_names(&self) -> Vec<Vec<String>> {
        vec![
            vec!["L".to_string(), "H".to_string()],
            vec!["L".to_string(), "H".to_string()],
        ]
    }

    fn solve_within(&self, id: &str, _tol: f64) -> Result<WithinSolution, MetaError> {
        let within = solve_within(&self.params, id).map_err(MetaError::from)?;
        Ok(WithinSolution {
            equilibrium: WithinEquilibrium::Scalar(vec![
                within.prices[0].to_vec(),
                within.prices[1].to_vec(),
            ]),
            certificate: Certificate::Analytic(
                "interim pricing best responses contract at rate gamma/(2b) < 1/2".into(),
            ),
            expost: vec![within.expost[0].to_vec(), within.expost[1].to_vec()],
        })
    }
}

/// Assembles the lobbying meta-game: meta-actions {abstain, lobby}, regulator
/// moves {N, R}, the five-case policy rule, lobbying costs, and a regulator
/// payoff of minus the average equilibrium price plus a small bonus for
/// being responsive.
pub fn build_subsidy_metagame(params: &SubsidyParams) -> Result<MetaGame, FamilyError> {
    params.validate()?;
    let spaces = MetaActionSpaces::new(
        vec![
            vec!["abstain".to_string(), "lobby".to_string()],
            vec!["abstain".to_string(), "lobby".to_string()],
        ],
        vec!["N".to_string(), "R".to_string()],
    )
    .expect("fixed non-empty spaces");
    let type_counts = [2usize, 2];
    let ids: Vec<String> = SUBSIDY_REGIMES.iter().map(|s| s.to_string()).collect();
    let rule = TransformationRule::from_fn(
        ids.clone(),
        &spaces,
        &type_counts,
        |x, e, _| match (e, x[0], x[1]) {
            (1, 1, 0) => 1,
            (1, 0, 1) => 2,
            (1, 1, 1) => 3,
            _ => 0,
        },
    )
    .expect("total rule over the fixed domain");
    let tset = TransformationSet::new(
        ids.iter()
            .map(|id| Transformation::new(id.clone(), vec![]).expect("tag transformation"))
            .collect(),
    )
    .expect("distinct regime ids");

    let solved: Vec<SubsidyWithin> = SUBSIDY_REGIMES
        .iter()
        .map(|id| solve_within(params, id))
        .collect::<Result<_, _>>()?;
    let domain = spaces.domain_shape(&type_counts);
    let mut env_payoff = Vec::with_capacity(domain.iter().product());
    each_index(&domain, |idx| {
        let (x, rest) = idx.split_at(2);
        let e = rest[0];
        let theta = &rest[1..];
        let t = rule.transformation_index(x, e, theta);
        let w = &solved[t];
        let avg_price = (w.prices[0][theta[0]] + w.prices[1][theta[1]]) / 2.0;
        let bonus = if e == 1 { params.responsive_bonus } else { 0.0 };
        env_payoff.push(-avg_price + bonus);
    });

    let meta_cost = (0..2)
        .map(|i| {
            vec![0.0, 0.0, params.kappa[i][LOW], params.kappa[i][HIGH]]
        })
        .collect();
    MetaGame::new(
        WithinBackend::Family(Arc::new(SubsidyFamily::new(params.clone()))),
        tset,
        rule,
        spaces,
        env_payoff,
        Some(meta_cost),
    )
    .map_err(FamilyError::from)
}

/// Per-equilibrium outcome of the monotone-lobbying check.
#[derive(Debug, Clone)]
pub struct LobbyingCheck {
    /// `lobby_rates[firm][type]`.
    pub lobby_rates: [[f64; 2]; 2],
    /// Interim gain from switching to pure lobbying, `deltas[firm][type]`.
    pub deltas: [[f64; 2]; 2],
    /// `m_i(lobby|L) >= m_i(lobby|H) - MONOTONE_TOL` per firm.
    pub monotone: [bool; 2],
    /// `delta_i(L) >= delta_i(H)` per firm.
    pub delta_monotone: [bool; 2],
    /// All lobbying gains are bounded away from indifference.
    pub generic: bool,
}

/// Verdict of the monotone-lobbying claim over a set of equilibria.
#[derive(Debug, Clone)]
pub struct PropositionVerdict {
    /// Smallest single-crossing gap found while checking the hypotheses.
    pub min_gain_gap: f64,
    pub checks: Vec<LobbyingCheck>,
    pub all_monotone: bool,
    pub all_delta_monotone: bool,
    pub all_generic: bool,
}

/// Checks the monotone-lobbying claim: low-cost types lobby at least as much
/// as high-cost types in every supplied equilibrium.
///
/// Hypotheses verified first: lobbying gains satisfy single crossing in the
/// firm's own type (checked numerically from the equilibrium payoffs, for
/// both the solo-subsidy and the shared-subsidy comparison), and lobbying
/// costs do not favor the high-cost type.
pub fn check_proposition(
    params: &SubsidyParams,
    equilibria: &[MetaStrategyProfile],
) -> Result<PropositionVerdict, FamilyError> {
    let mg = build_subsidy_metagame(params)?;
    let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient)?;
    check_proposition_with(params, &mg, &table, equilibria)
}

pub fn check_proposition_with(
    params: &SubsidyParams,
    mg: &MetaGame,
    table: &EquilibriumTable,
    equilibria: &[MetaStrategyProfile],
) -> Result<PropositionVerdict, FamilyError> {
    let mut min_gain_gap = f64::INFINITY;
    for firm in 0..2 {
        if params.kappa[firm][LOW] > params.kappa[firm][HIGH] {
            return Err(FamilyError::HypothesisViolated(format!(
                "firm {} lobbying cost favors the high-cost type: {:?}",
                firm + 1,
                params.kappa[firm]
            )));
        }
        // (gained regime, baseline regime) when firm's lobbying flips the
        // outcome: solo subsidy vs none, and shared vs the opponent's solo
        let comparisons = if firm == 0 { [(1, 0), (3, 2)] } else { [(2, 0), (3, 1)] };
        for (hi, lo) in comparisons {
            for opp_type in 0..2 {
                let gain = |own: usize| {
                    let theta = if firm == 0 { [own, opp_type] } else { [opp_type, own] };
                    table.expost(hi, firm, &theta) - table.expost(lo, firm, &theta)
                };
                let gap = gain(LOW) - gain(HIGH);
                min_gain_gap = min_gain_gap.min(gap);
                if gap <= 0.0 {
                    return Err(FamilyError::HypothesisViolated(format!(
                        "firm {} lobbying gain is not single-crossing: gap {gap} \
                         between regimes {} and {}",
                        firm + 1,
                        SUBSIDY_REGIMES[hi],
                        SUBSIDY_REGIMES[lo]
                    )));
                }
            }
        }
    }

    let mut checks = Vec::with_capacity(equilibria.len());
    for m in equilibria {
        let mut lobby_rates = [[0.0; 2]; 2];
        let mut deltas = [[0.0; 2]; 2];
        for firm in 0..2 {
            for ty in 0..2 {
                lobby_rates[firm][ty] = m.row(firm, ty).get(1);
                let mut lobby = m.clone();
                lobby.set_row(firm, ty, Distribution::point(2, 1));
                let mut abstain = m.clone();
                abstain.set_row(firm, ty, Distribution::point(2, 0));
                let v1 = interim_meta_payoff(mg, table, &lobby, firm, ty)?;
                let v0 = interim_meta_payoff(mg, table, &abstain, firm, ty)?;
                deltas[firm][ty] = v1 - v0;
            }
        }
        let monotone = [
            lobby_rates[0][LOW] >= lobby_rates[0][HIGH] - MONOTONE_TOL,
            lobby_rates[1][LOW] >= lobby_rates[1][HIGH] - MONOTONE_TOL,
        ];
        let delta_monotone =
            [deltas[0][LOW] >= deltas[0][HIGH], deltas[1][LOW] >= deltas[1][HIGH]];
        let generic = deltas.iter().flatten().all(|d| d.abs() > GENERIC_TOL);
        checks.push(LobbyingCheck { lobby_rates, deltas, monotone, delta_monotone, generic });
    }
    Ok(PropositionVerdict {
        min_gain_gap,
        all_monotone: checks.iter().all(|c| c.monotone.iter().all(|&b| b)),
        all_delta_monotone: checks.iter().all(|c| c.delta_monotone.iter().all(|&b| b)),
        all_generic: checks.iter().all(|c| c.generic),
        checks,
    })
}

/// Parameter draw used by the sweep; windows keep every regime interior and
/// the claim hypotheses satisfied while leaving the lobbying decision itself
/// genuinely parameter-dependent.
pub fn random_subsidy_params(rng: &mut impl Rng) -> SubsidyParams {
    loop {
        let b = rng.random_range(0.9..1.2);
        let c_low = rng.random_range(1.0..2.0);
        let kappa_1_low = rng.random_range(0.05..2.0);
        let kappa_2_low = rng.random_range(0.05..2.0);
        let candidate = SubsidyParams::new(
            rng.random_range(8.0..12.0),
            b,
            b * rng.random_range(0.2..0.45),
            c_low,
            c_low + rng.random_range(0.5..1.5),
            rng.random_range(0.3..0.7),
            rng.random_range(0.4..1.0),
            [
                [kappa_1_low, kappa_1_low + rng.random_range(0.0..0.3)],
                [kappa_2_low, kappa_2_low + rng.random_range(0.0..0.3)],
            ],
            20.0,
            rng.random_range(0.005..0.03),
        );
        if let Ok(params) = candidate {
            return params;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubsidySweepInstance {
    pub stream: u64,
    /// Draws discarded for knife-edge indifference before this one.
    pub redraws: usize,
    pub equilibria: usize,
    pub monotone: bool,
    pub delta_monotone: bool,
    /// Smallest `m_i(lobby|L) - m_i(lobby|H)` across firms and equilibria.
    pub min_margin: f64,
    pub min_gain_gap: f64,
    /// Per-equilibrium detail, aligned with enumeration order.
    pub checks: Vec<LobbyingCheck>,
}

/// One seeded sweep instance: draw generic parameters, enumerate all
/// meta-equilibria, and run the monotone-lobbying check.
pub fn subsidy_sweep_instance(
    seed: u64,
    stream: u64,
    tol: f64,
) -> Result<SubsidySweepInstance, FamilyError> {
    let mut rng = rng_for(seed, stream);
    let mut redraws = 0;
    loop {
        let params = random_subsidy_params(&mut rng);
        let mg = build_subsidy_metagame(&params)?;
        let table = build_equilibrium_table(&mg, tol, Strictness::Lenient)?;
        let solved = solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, 0, tol)?;
        let verdict = check_proposition_with(&params, &mg, &table, &solved.equilibria)?;
        if !verdict.all_generic || solved.equilibria.is_empty() {
            redraws += 1;
            if redraws > 500 {
                return Err(FamilyError::InvalidParams(format!(
                    "stream {stream}: no generic draw within {redraws} attempts"
                )));
            }
            continue;
        }
        let min_margin = verdict
            .checks
            .iter()
            .flat_map(|c| {
                (0..2).map(move |f| c.lobby_rates[f][LOW] - c.lobby_rates[f][HIGH])
            })
            .fold(f64::INFINITY, f64::min);
        return Ok(SubsidySweepInstance {
            stream,
            redraws,
            equilibria: solved.equilibria.len(),
            monotone: verdict.all_monotone,
            delta_monotone: verdict.all_delta_monotone,
            min_margin,
            min_gain_gap: verdict.min_gain_gap,
            checks: verdict.checks,
        });
    }
}

/// Runs `count` independent instances in parallel.
pub fn subsidy_sweep(
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<SubsidySweepInstance>, FamilyError> {
    (0..count)
        .into_par_iter()
        .map(|k| subsidy_sweep_instance(seed, k as u64, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::transformation_probability;
    use approx::assert_abs_diff_eq;

    fn base_params() -> SubsidyParams {
        default_params()
    }

    #[test]
    fn zero_cross_slope_collapses_to_single_firm_pricing() {
        let mut params = base_params();
        params.gamma = 0.0;
        let w = subsidy_within_game_solve(&params, "T1").unwrap();
        for ty in 0..2 {
            let expected_1 =
                (params.a + params.b * (params.cost(ty) - params.subsidy)) / (2.0 * params.b);
            let expected_2 = (params.a + params.b * params.cost(ty)) / (2.0 * params.b);
            assert_abs_diff_eq!(w.prices[0][ty], expected_1, epsilon = 1e-12);
            assert_abs_diff_eq!(w.prices[1][ty], expected_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_subsidy_makes_all_regimes_identical() {
        let mut params = base_params();
        params.subsidy = 0.0;
        let base = subsidy_within_game_solve(&params, "T0").unwrap();
        for id in ["T1", "T2", "TS"] {
            let other = subsidy_within_game_solve(&params, id).unwrap();
            for firm in 0..2 {
                for ty in 0..2 {
                    assert_abs_diff_eq!(
                        other.prices[firm][ty],
                        base.prices[firm][ty],
                        epsilon = 1e-12
                    );
                }
                for cell in 0..4 {
                    assert_abs_diff_eq!(
                        other.expost[firm][cell],
                        base.expost[firm][cell],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn shared_subsidy_equals_a_cost_shift() {
        let params = base_params();
        let shared = subsidy_within_game_solve(&params, "TS").unwrap();
        let shifted = SubsidyParams::new(
            params.a,
            params.b,
            params.gamma,
            params.c_low - params.subsidy,
            params.c_high - params.subsidy,
            params.q_high,
            0.0,
            params.kappa,
            params.price_cap,
            params.responsive_bonus,
        )
        .unwrap();
        let base = subsidy_within_game_solve(&shifted, "T0").unwrap();
        for firm in 0..2 {
            for ty in 0..2 {
                assert_abs_diff_eq!(
                    shared.prices[firm][ty],
                    base.prices[firm][ty],
                    epsilon = 1e-12
                );
            }
            for cell in 0..4 {
                assert_abs_diff_eq!(
                    shared.expost[firm][cell],
                    base.expost[firm][cell],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn low_cost_margin_exceeds_high_cost_margin_by_half_the_cost_gap() {
        let params = base_params();
        for id in SUBSIDY_REGIMES {
            let w = subsidy_within_game_solve(&params, id).unwrap();
            let s = params.regime_subsidies(id).unwrap();
            for firm in 0..2 {
                let margin =
                    |ty: usize| w.prices[firm][ty] - params.cost(ty) + s[firm];
                assert_abs_diff_eq!(
                    margin(LOW) - margin(HIGH),
                    (params.c_high - params.c_low) / 2.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn tight_price_cap_reports_boundary() {
        let result = SubsidyParams::new(
            10.0,
            1.0,
            0.3,
            1.2,
            2.0,
            0.5,
            0.8,
            [[0.5, 0.6], [0.5, 0.6]],
            3.0,
            0.0,
        );
        assert!(matches!(result, Err(FamilyError::BoundaryEquilibrium(_))));
    }

    // interim best-reply iteration on a price grid, restarted from zero
    fn grid_oracle(params: &SubsidyParams, regime: &str, step: f64) -> [[f64; 2]; 2] {
        let s = params.regime_subsidies(regime).unwrap();
        let n = (params.price_cap / step).round() as usize + 1;
        let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
        let q = params.q_high;
        let mut prices = [[0.0f64; 2]; 2];
        for _ in 0..200 {
            let mut next = prices;
            for firm in 0..2 {
                let mean_other = (1.0 - q) * prices[1 - firm][LOW] + q * prices[1 - firm][HIGH];
                for ty in 0..2 {
                    let mut best = (f64::NEG_INFINITY, 0.0);
                    for &p in &grid {
                        let profit = (p - params.cost(ty) + s[firm])
                            * (params.a - params.b * p + params.gamma * mean_other);
                        if profit > best.0 {
                            best = (profit, p);
                        }
                    }
                    next[firm][ty] = best.1;
                }
            }
            let moved = prices
                .iter()
                .flatten()
                .zip(next.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            prices = next;
            if moved == 0.0 {
                break;
            }
        }
        prices
    }

    #[test]
    fn closed_form_matches_grid_oracle() {
        let mut rng = rng_for(17, 0);
        for _ in 0..3 {
            let params = random_subsidy_params(&mut rng);
            for id in ["T0", "TS"] {
                let w = subsidy_within_game_solve(&params, id).unwrap();
                let grid = grid_oracle(&params, id, 1e-3);
                for firm in 0..2 {
                    for ty in 0..2 {
                        assert!(
                            (w.prices[firm][ty] - grid[firm][ty]).abs() <= 2e-3,
                            "{id} firm {firm} type {ty}: closed {} vs grid {}",
                            w.prices[firm][ty],
                            grid[firm][ty]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn policy_rule_matches_the_case_table() {
        let params = base_params();
        let mg = build_subsidy_metagame(&params).unwrap();
        let cases = [
            (vec![1, 1], 0, "T0"),
            (vec![1, 0], 1, "T1"),
            (vec![0, 1], 1, "T2"),
            (vec![1, 1], 1, "TS"),
            (vec![0, 0], 1, "T0"),
        ];
        for (x, e, expect) in cases {
            let m = MetaStrategyProfile::pure(mg.spaces(), &[vec![x[0]; 2], vec![x[1]; 2]], e);
            let pi = transformation_probability(mg.rule(), &m, &[0, 1]);
            let idx = mg.tset().index_of(expect).unwrap();
            assert_abs_diff_eq!(pi.get(idx), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn prohibitive_costs_shut_lobbying_down() {
        let mut params = base_params();
        params.kappa = [[50.0, 50.0], [50.0, 50.0]];
        let mg = build_subsidy_metagame(&params).unwrap();
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let solved =
            solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, 0, 1e-8).unwrap();
        assert!(!solved.equilibria.is_empty());
        let verdict = check_proposition_with(&params, &mg, &table, &solved.equilibria).unwrap();
        assert!(verdict.all_monotone);
        for check in &verdict.checks {
            for firm in 0..2 {
                for ty in 0..2 {
                    assert_abs_diff_eq!(check.lobby_rates[firm][ty], 0.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn free_lobbying_with_positive_gains_is_universal() {
        let mut params = base_params();
        params.kappa = [[0.0, 0.0], [0.0, 0.0]];
        let mg = build_subsidy_metagame(&params).unwrap();
        let table = build_equilibrium_table(&mg, 1e-8, Strictness::Lenient).unwrap();
        let solved =
            solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, 0, 1e-8).unwrap();
        let verdict = check_proposition_with(&params, &mg, &table, &solved.equilibria).unwrap();
        assert!(verdict.all_monotone);
        assert!(verdict.min_gain_gap > 0.0);
        for check in &verdict.checks {
            for firm in 0..2 {
                // the subsidy raises profits, so free lobbying is dominant
                assert!(check.deltas[firm][LOW] > 0.0);
                assert_abs_diff_eq!(check.lobby_rates[firm][LOW], 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn small_sweep_is_monotone() {
        let results = subsidy_sweep(5, 2024, 1e-8).unwrap();
        assert_eq!(results.len(), 5);
        for r in &results {
            assert!(r.monotone, "instance {} broke monotonicity", r.stream);
            assert!(r.delta_monotone, "instance {} broke gain monotonicity", r.stream);
            assert!(r.equilibria >= 1);
            assert!(r.min_gain_gap > 0.0);
        }
    }
}
