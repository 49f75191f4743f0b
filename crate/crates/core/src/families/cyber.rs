//! Cybersecurity standards lock-in: two organizations running a legacy
//! interoperability regime choose whether to push for strict or open
//! standards when a regulator considers reform. Types are the organization's
//! security posture (weak or strong), and each candidate regime is a
//! coordination game over protocol variants A and B whose adoption costs
//! depend on the posture.
//!
//! Parameterizations used here make one variant strictly dominant per type
//! inside every regime, so each within-game equilibrium is unique and the
//! meta-stage comparison between regimes reduces to comparing locked-in
//! payoffs.

use crate::families::FamilyError;
use crate::game::{FiniteBayesianGame, Prior};
use crate::meta::{
    build_equilibrium_table, solve_meta_bne_with_table, EquilibriumTable, MetaGame, Strictness,
    WithinBackend,
};
use crate::random::rng_for;
use crate::solve::SolveMethod;
use crate::table::each_index;
use crate::transform::{
    MetaActionSpaces, MetaStrategyProfile, Transformation, TransformationRule, TransformationSet,
};
use rand::Rng;
use rayon::prelude::*;

pub const WEAK: usize = 0;
pub const STRONG: usize = 1;

/// Regimes in transformation order.
pub const CYBER_REGIMES: [&str; 3] = ["legacy", "strict", "open"];

/// Protocol variant granted the tie-breaking adoption bonus, per regime.
const FAVORED: [usize; 3] = [0, 1, 0];

/// Stage-payoff margins below this leave the separating prediction
/// inapplicable; above it, full separation is required.
pub const GAP_TOL: f64 = 1e-6;

/// One regime's coordination game.
#[derive(Debug, Clone)]
pub struct CyberTech {
    /// Interoperability benefit when both pick the same variant, > 0.
    pub benefit: f64,
    /// Adoption cost `cost[variant][type]`, >= 0.
    pub cost: [[f64; 2]; 2],
    /// Mismatch loss `loss[type]`, >= 0.
    pub loss: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct CyberParams {
    pub legacy: CyberTech,
    pub strict: CyberTech,
    pub open: CyberTech,
    /// Bonus paid on top of the benefit when both adopt the regime's favored
    /// variant; breaks payoff ties between regimes, >= 0.
    pub epsilon: f64,
    /// Probability of the weak posture, in (0, 1); independent across
    /// organizations.
    pub prob_weak: f64,
}

impl CyberParams {
    pub fn validate(&self) -> Result<(), FamilyError> {
        let bad = |msg: String| Err(FamilyError::InvalidParams(msg));
        for (id, tech) in self.techs() {
            if !(tech.benefit > 0.0) {
                return bad(format!("{id}: need benefit > 0, got {}", tech.benefit));
            }
            if tech.cost.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
                return bad(format!("{id}: need nonnegative costs, got {:?}", tech.cost));
            }
            if tech.loss.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return bad(format!("{id}: need nonnegative losses, got {:?}", tech.loss));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("need epsilon >= 0, got {}", self.epsilon));
        }
        if !(self.prob_weak > 0.0 && self.prob_weak < 1.0) {
            return bad(format!("need prob_weak in (0,1), got {}", self.prob_weak));
        }
        Ok(())
    }

    pub fn techs(&self) -> [(&'static str, &CyberTech); 3] {
        [
            ("legacy", &self.legacy),
            ("strict", &self.strict),
            ("open", &self.open),
        ]
    }

    /// Stage payoff inside one regime.
    fn stage_payoff(&self, regime: usize, own: usize, other: usize, ty: usize) -> f64 {
        let tech = self.techs()[regime].1;
        let mut u = -tech.cost[own][ty];
        if own == other {
            u += tech.benefit;
            if own == FAVORED[regime] {
                u += self.epsilon;
            }
        } else {
            u -= tech.loss[ty];
        }
        u
    }
}

/// A worked instance: weak organizations are locked into variant B under the
/// legacy regime while strong ones run A, strict standards suit the weak, and
/// open standards suit the strong.
pub fn default_params() -> CyberParams {
    CyberParams {
        legacy: CyberTech {
            benefit: 0.575,
            cost: [[2.475, 0.275], [0.275, 1.575]],
            loss: [1.225, 0.325],
        },
        strict: CyberTech {
            benefit: 1.1,
            cost: [[2.375, 4.05], [0.275, 2.25]],
            loss: [0.6, 0.3],
        },
        open: CyberTech {
            benefit: 1.05,
            cost: [[3.95, 0.3], [6.0, 2.05]],
            loss: [0.6, 0.3],
        },
        epsilon: 1.1e-3,
        prob_weak: 0.5,
    }
}

fn stage_tables(params: &CyberParams, regime: usize) -> Vec<Vec<f64>> {
    let shape = [2usize, 2, 2, 2];
    let mut tables = vec![Vec::with_capacity(16), Vec::with_capacity(16)];
    each_index(&shape, |idx| {
        let (a1, a2, t1, t2) = (idx[0], idx[1], idx[2], idx[3]);
        tables[0].push(params.stage_payoff(regime, a1, a2, t1));
        tables[1].push(params.stage_payoff(regime, a2, a1, t2));
    });
    tables
}

/// Builds the standards meta-game and verifies each regime pins down a
/// unique equilibrium; fails with a uniqueness error otherwise (for example
/// when costs cannot break the coordination multiplicity).
pub fn build_cyber_metagame(params: &CyberParams) -> Result<MetaGame, FamilyError> {
    build_cyber_metagame_with_table(params, 1e-8).map(|(mg, _)| mg)
}

pub fn build_cyber_metagame_with_table(
    params: &CyberParams,
    tol: f64,
) -> Result<(MetaGame, EquilibriumTable), FamilyError> {
    params.validate()?;
    let pw = params.prob_weak;
    let prior = Prior::independent(&[vec![pw, 1.0 - pw], vec![pw, 1.0 - pw]])
        .expect("validated prob_weak yields a prior");
    let names = |v: [&str; 2]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let base = FiniteBayesianGame::new(
        vec![names(["W", "S"]), names(["W", "S"])],
        vec![names(["A", "B"]), names(["A", "B"])],
        prior,
        stage_tables(params, 0),
    )
    .map_err(FamilyError::from)?;

    let tset = TransformationSet::new(
        CYBER_REGIMES
            .iter()
            .enumerate()
            .map(|(k, id)| {
                Transformation::new(id.to_string(), stage_tables(params, k))
                    .expect("finite stage payoffs")
            })
            .collect(),
    )
    .expect("distinct regime ids");

    let spaces = MetaActionSpaces::new(
        vec![names(["open", "strict"]), names(["open", "strict"])],
        names(["statusquo", "reform"]),
    )
    .expect("fixed non-empty spaces");
    let ids: Vec<String> = CYBER_REGIMES.iter().map(|s| s.to_string()).collect();
    let rule = TransformationRule::from_fn(ids, &spaces, &[2, 2], |x, e, _| {
        match (e, x[0], x[1]) {
            (1, 1, 1) => 1,
            (1, 0, 0) => 2,
            _ => 0,
        }
    })
    .expect("total rule over the fixed domain");

    // the regulator prefers any reform outcome to the status quo and gains
    // extra surplus when the organizations push in the same direction
    let domain = spaces.domain_shape(&[2, 2]);
    let mut env_payoff = Vec::with_capacity(domain.iter().product());
    each_index(&domain, |idx| {
        env_payoff.push(if idx[2] == 0 {
            0.5
        } else {
            1.0 + 0.25 * ((idx[0] == idx[1]) as usize as f64)
        });
    });

    let mg = MetaGame::new(
        WithinBackend::Finite(base),
        tset,
        rule,
        spaces,
        env_payoff,
        None,
    )
    .map_err(FamilyError::from)?;
    let table = build_equilibrium_table(&mg, tol, Strictness::Lenient)?;
    Ok((mg, table))
}

/// Smallest meta-stage dominance margin: how far the weak type's preference
/// for stricter regimes (and the strong type's for opener ones) is from
/// indifference, minimized over players and opponent types.
pub fn stage_gain_gap(table: &EquilibriumTable) -> f64 {
    let mut gap = f64::INFINITY;
    for player in 0..2 {
        for opp in 0..2 {
            let at = |regime: usize, own: usize| {
                let theta = if player == 0 { [own, opp] } else { [opp, own] };
                table.expost(regime, player, &theta)
            };
            let g_sl = |own: usize| at(1, own) - at(0, own);
            let g_lo = |own: usize| at(0, own) - at(2, own);
            gap = gap
                .min(g_sl(WEAK))
                .min(g_lo(WEAK))
                .min(-g_sl(STRONG))
                .min(-g_lo(STRONG));
        }
    }
    gap
}

#[derive(Debug, Clone)]
pub struct CyberClaimVerdict {
    pub gain_gap: f64,
    /// Weak types lobby for strict standards at least as often as strong
    /// types, in every equilibrium.
    pub weak_holds: bool,
    /// Every equilibrium fully separates the postures.
    pub separating: bool,
    /// The strict prediction only binds when the margin clears [`GAP_TOL`].
    pub strict_applicable: bool,
    pub holds: bool,
}

pub fn check_cyber_claim(
    params: &CyberParams,
    equilibria: &[MetaStrategyProfile],
) -> Result<CyberClaimVerdict, FamilyError> {
    let (_, table) = build_cyber_metagame_with_table(params, 1e-8)?;
    Ok(check_cyber_claim_with(&table, equilibria))
}

pub fn check_cyber_claim_with(
    table: &EquilibriumTable,
    equilibria: &[MetaStrategyProfile],
) -> CyberClaimVerdict {
    let gain_gap = stage_gain_gap(table);
    let mut weak_holds = true;
    let mut separating = !equilibria.is_empty();
    for m in equilibria {
        for player in 0..2 {
            let strict_rate = |ty: usize| m.row(player, ty).get(1);
            weak_holds &= strict_rate(WEAK) >= strict_rate(STRONG) - 1e-9;
            separating &= strict_rate(WEAK) >= 1.0 - 1e-6 && strict_rate(STRONG) <= 1e-6;
        }
    }
    let strict_applicable = gain_gap > GAP_TOL;
    CyberClaimVerdict {
        gain_gap,
        weak_holds,
        separating,
        strict_applicable,
        holds: weak_holds && (separating || !strict_applicable),
    }
}

/// Draws an instance with the lock-in structure: each regime keeps one
/// dominant variant per type and the meta-stage margins stay bounded away
/// from indifference.
pub fn random_cyber_params(rng: &mut impl Rng) -> CyberParams {
    let b_leg: f64 = rng.random_range(0.5..0.65);
    let b_str: f64 = rng.random_range(1.0..1.2);
    let b_open = rng.random_range(0.95..1.15);
    let eps = 1e-3 * b_str.max(b_leg).max(b_open);

    // locked-in payoff targets; gaps between the windows keep every
    // meta-stage comparison strict
    let u_str = [rng.random_range(0.7..0.95), rng.random_range(-1.3..-1.0)];
    let u_open = [rng.random_range(-3.2..-2.6), rng.random_range(0.6..0.9)];
    let u_leg_match = [rng.random_range(0.2..0.4), rng.random_range(0.2..0.4)];
    let u_leg_mismatch = [rng.random_range(-1.7..-1.3), rng.random_range(-0.7..-0.5)];

    // legacy: weak locked into B, strong into A
    let c_leg_bw = b_leg - u_leg_match[WEAK];
    let c_leg_as = b_leg + eps - u_leg_match[STRONG];
    let loss_leg = [
        -u_leg_mismatch[WEAK] - c_leg_bw,
        -u_leg_mismatch[STRONG] - c_leg_as,
    ];
    let c_leg_aw = c_leg_bw + b_leg + eps + loss_leg[WEAK] + rng.random_range(0.2..0.6);
    let c_leg_bs = c_leg_as + b_leg + eps + loss_leg[STRONG] + rng.random_range(0.2..0.6);

    // strict: everyone locked into B
    let loss_str = [rng.random_range(0.5..0.7), rng.random_range(0.25..0.35)];
    let c_str_b = [b_str + eps - u_str[WEAK], b_str + eps - u_str[STRONG]];
    let c_str_a = [
        c_str_b[WEAK] + b_str + eps + loss_str[WEAK] + rng.random_range(0.2..0.6),
        c_str_b[STRONG] + b_str + eps + loss_str[STRONG] + rng.random_range(0.2..0.6),
    ];

    // open: everyone locked into A
    let loss_open = [rng.random_range(0.5..0.7), rng.random_range(0.25..0.35)];
    let c_open_a = [b_open + eps - u_open[WEAK], b_open + eps - u_open[STRONG]];
    let c_open_b = [
        c_open_a[WEAK] + b_open + eps + loss_open[WEAK] + rng.random_range(0.2..0.6),
        c_open_a[STRONG] + b_open + eps + loss_open[STRONG] + rng.random_range(0.2..0.6),
    ];

    let params = CyberParams {
        legacy: CyberTech {
            benefit: b_leg,
            cost: [[c_leg_aw, c_leg_as], [c_leg_bw, c_leg_bs]],
            loss: loss_leg,
        },
        strict: CyberTech {
            benefit: b_str,
            cost: [[c_str_a[WEAK], c_str_a[STRONG]], [c_str_b[WEAK], c_str_b[STRONG]]],
            loss: loss_str,
        },
        open: CyberTech {
            benefit: b_open,
            cost: [[c_open_a[WEAK], c_open_a[STRONG]], [c_open_b[WEAK], c_open_b[STRONG]]],
            loss: loss_open,
        },
        epsilon: eps,
        prob_weak: rng.random_range(0.3..0.7),
    };
    params.validate().expect("generator windows satisfy validation");
    params
}

/// Makes the two defender types payoff-identical by copying every
/// strong-type cost and loss over the weak-type slot. With symmetric types
/// the within-game gain gap collapses to zero and the monotonicity claim
/// holds with equality.
pub fn symmetrize_types(params: &mut CyberParams) {
    for tech in [&mut params.legacy, &mut params.strict, &mut params.open] {
        tech.loss[WEAK] = tech.loss[STRONG];
        for variant in 0..2 {
            tech.cost[variant][WEAK] = tech.cost[variant][STRONG];
        }
    }
}

#[derive(Debug, Clone)]
pub struct CyberSweepInstance {
    pub stream: u64,
    pub equilibria: usize,
    pub gain_gap: f64,
    pub weak_holds: bool,
    pub separating: bool,
    pub holds: bool,
    /// Per equilibrium, P(strict standard) for each (player, type).
    pub rates: Vec<[[f64; 2]; 2]>,
}

pub fn cyber_sweep_instance(
    seed: u64,
    stream: u64,
    tol: f64,
) -> Result<CyberSweepInstance, FamilyError> {
    cyber_sweep_instance_with(seed, stream, tol, false)
}

/// Sweep instance with an optional filter forcing `loss(W) = loss(S)` (and
/// matching costs), the equality-tolerant edge of the claim.
pub fn cyber_sweep_instance_with(
    seed: u64,
    stream: u64,
    tol: f64,
    equal_types: bool,
) -> Result<CyberSweepInstance, FamilyError> {
    let mut rng = rng_for(seed, stream);
    let mut params = random_cyber_params(&mut rng);
    if equal_types {
        symmetrize_types(&mut params);
    }
    let (mg, table) = build_cyber_metagame_with_table(&params, tol)?;
    let solved = solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, 0, tol)?;
    let verdict = check_cyber_claim_with(&table, &solved.equilibria);
    let rates = solved
        .equilibria
        .iter()
        .map(|m| {
            std::array::from_fn(|i| std::array::from_fn(|ty| m.row(i, ty).get(1)))
        })
        .collect();
    Ok(CyberSweepInstance {
        stream,
        equilibria: solved.equilibria.len(),
        gain_gap: verdict.gain_gap,
        weak_holds: verdict.weak_holds,
        separating: verdict.separating,
        holds: verdict.holds,
        rates,
    })
}

pub fn cyber_sweep(
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<CyberSweepInstance>, FamilyError> {
    (0..count)
        .into_par_iter()
        .map(|k| cyber_sweep_instance(seed, k as u64, tol))
        .collect()
}
