//! Finite Bayesian games, payoff-transformation meta-games, and equilibrium
//! solvers for both layers.

pub mod families;
pub mod game;
pub mod meta;
pub mod random;
pub mod solve;
pub mod table;
pub mod transform;

pub use families::{
    cyber::{
        build_cyber_metagame, check_cyber_claim, cyber_sweep, random_cyber_params, CyberParams,
        CyberTech,
    },
    platform::{
        build_platform_metagame, check_platform_claim, platform_sweep, random_platform_params,
        PlatformParams, RegimeSpec,
    },
    subsidy::{
        build_subsidy_metagame, check_proposition, random_subsidy_params, subsidy_sweep,
        SubsidyParams,
    },
    FamilyError,
};
pub use game::{
    AgentFormGame, AgentId, BehavioralStrategyProfile, BneCheck, DeviationGain, Distribution,
    FiniteBayesianGame, GameError, MixedProfile, NormalFormGame, Prior,
};
pub use meta::{
    build_equilibrium_table, env_best_reply, environment_payoff, interim_meta_payoff,
    is_meta_bne, meta_best_reply, solve_meta_bne, to_meta_agent_game, Certificate,
    EquilibriumEntry, EquilibriumTable, FamilyBackend, MetaError, MetaGame, MetaSolve,
    Strictness, WithinBackend, WithinEquilibrium, WithinSolution,
};
pub use solve::{
    audit_uniqueness, enumerate_equilibria, solve_best_response_iteration, solve_logit_homotopy,
    EnumOptions, SolveError, SolveMethod, SolveReport, UniquenessStatus, UniquenessVerdict,
};
pub use table::Table;
pub use transform::{
    apply_transformation, transformation_probability, MetaActionSpaces, MetaStrategyProfile,
    Transformation, TransformationRule, TransformationSet,
};
