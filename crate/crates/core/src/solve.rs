//! Equilibrium solvers for finite games.
//!
//! Three methods, all operating on the agent form: exhaustive support
//! enumeration (the exact oracle, also the uniqueness auditor), damped
//! best-reply iteration, and a logit homotopy with a terminal polish step.

use crate::game::{
    mixed_linf, AgentFormGame, BehavioralStrategyProfile, Distribution, FiniteBayesianGame,
    GameError, MixedProfile, NormalFormGame,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default acceptance tolerance on max regret.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default L-infinity radius for merging near-duplicate equilibria.
pub const DEFAULT_MERGE_RADIUS: f64 = 1e-6;
/// Default iteration budget for the iterative solvers.
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "game too large to enumerate: {agents} agents (cap {max_agents}), \
         largest action set {actions} (cap {max_actions})"
    )]
    TooLarge { agents: usize, actions: usize, max_agents: usize, max_actions: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Enumerate,
    BestReply,
    Logit,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Enumerate => "enumerate",
            SolveMethod::BestReply => "br",
            SolveMethod::Logit => "logit",
        }
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub profile: BehavioralStrategyProfile,
    pub method: String,
    pub iterations: usize,
    pub max_regret: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessStatus {
    Unique,
    Multiple,
    Unknown,
}

impl UniquenessStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            UniquenessStatus::Unique => "unique",
            UniquenessStatus::Multiple => "multiple",
            UniquenessStatus::Unknown => "unknown",
        }
    }
}

/// Result of the equilibrium-count audit.
///
/// `Unique` is only reported when enumeration completed with no skipped
/// supports and exactly one equilibrium survived merging.
#[derive(Debug, Clone)]
pub struct UniquenessVerdict {
    pub status: UniquenessStatus,
    pub equilibria: Vec<BehavioralStrategyProfile>,
    pub merge_radius: f64,
    pub skipped_supports: usize,
}

/// Tuning knobs for support enumeration.
#[derive(Debug, Clone)]
pub struct EnumOptions {
    pub tol: f64,
    pub merge_radius: f64,
    pub max_agents: usize,
    pub max_actions: usize,
    /// Seeded random starts per support system, in addition to the barycenter.
    pub extra_starts: usize,
    pub newton_max_iter: usize,
    pub seed: u64,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            tol: DEFAULT_TOL,
            merge_radius: DEFAULT_MERGE_RADIUS,
            max_agents: 6,
            max_actions: 4,
            extra_starts: 12,
            newton_max_iter: 100,
            seed: 0x5EED_0001,
        }
    }
}

/// Enumeration output on a normal-form game, with degeneracy diagnostics.
#[derive(Debug, Clone)]
pub struct NormalFormEnumeration {
    pub profiles: Vec<MixedProfile>,
    pub skipped_supports: usize,
    pub supports_checked: usize,
}

// Per-support solve outcomes feeding the skip accounting.
struct SupportScan {
    roots: Vec<MixedProfile>,
    degenerate: bool,
}

/// All equilibria of a normal-form game by support enumeration.
///
/// Supports whose indifference system is singular at a near-zero residual are
/// skipped and counted: they indicate an equilibrium continuum that pointwise
/// enumeration cannot represent. Singular systems with a residual bounded away
/// from zero are rejected outright (the support admits no equilibrium).
pub fn enumerate_normal_form(
    game: &NormalFormGame,
    allowed: Option<&[Vec<usize>]>,
    opts: &EnumOptions,
) -> NormalFormEnumeration {
    let full: Vec<Vec<usize>>;
    let allowed: &[Vec<usize>] = match allowed {
        Some(a) => a,
        None => {
            full = (0..game.agents()).map(|k| (0..game.action_count(k)).collect()).collect();
            &full
        }
    };
    debug_assert_eq!(allowed.len(), game.agents());
    let scale = game.payoff_scale().max(1.0);
    let degen_tol = 1e-9 * scale;
    let ftol = 1e-11 * scale;

    // nonempty subsets per agent, ascending bitmask order
    let subsets: Vec<Vec<Vec<usize>>> = allowed
        .iter()
        .map(|acts| {
            (1u32..(1u32 << acts.len()))
                .map(|mask| {
                    (0..acts.len()).filter(|j| mask >> j & 1 == 1).map(|j| acts[j]).collect()
                })
                .collect()
        })
        .collect();

    let mut profiles: Vec<MixedProfile> = Vec::new();
    let mut skipped = 0usize;
    let mut checked = 0usize;
    let mut cursor = vec![0usize; game.agents()];
    loop {
        let support: Vec<&Vec<usize>> = cursor.iter().zip(&subsets).map(|(&c, s)| &s[c]).collect();
        checked += 1;
        let scan = scan_support(game, &support, opts, degen_tol, ftol, checked as u64);
        if scan.degenerate {
            skipped += 1;
        }
        for root in scan.roots {
            if !profiles.iter().any(|p| mixed_linf(p, &root) <= opts.merge_radius) {
                profiles.push(root);
            }
        }
        // odometer over subset choices, last agent fastest
        let mut pos = game.agents();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < subsets[pos].len() {
                break;
            }
            cursor[pos] = 0;
        }
        if cursor.iter().all(|&c| c == 0) {
            break;
        }
    }
    profiles.sort_by(|a, b| {
        let fa = crate::game::flatten_mixed(a);
        let fb = crate::game::flatten_mixed(b);
        fa.iter()
            .zip(&fb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    NormalFormEnumeration { profiles, skipped_supports: skipped, supports_checked: checked }
}

fn scan_support(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    opts: &EnumOptions,
    degen_tol: f64,
    ftol: f64,
    support_counter: u64,
) -> SupportScan {
    let mixed: Vec<usize> = (0..support.len()).filter(|&k| support[k].len() > 1).collect();
    if mixed.is_empty() {
        let profile: MixedProfile = support
            .iter()
            .enumerate()
            .map(|(k, s)| Distribution::point(game.action_count(k), s[0]))
            .collect();
        let ok = game.max_regret(&profile) <= opts.tol;
        return SupportScan { roots: if ok { vec![profile] } else { vec![] }, degenerate: false };
    }

    if mixed.len() == 1 {
        // Opponents are pure, so the mixed agent's action values are constants:
        // either the support is infeasible, or every mixture on it is a best
        // reply and the equilibrium set is a continuum.
        let k = mixed[0];
        let barycenter = support_barycenter(game, support, &mixed);
        let v0 = game.action_value(k, support[k][0], &barycenter);
        let infeasible = support[k]
            .iter()
            .any(|&a| (game.action_value(k, a, &barycenter) - v0).abs() > degen_tol);
        if infeasible {
            return SupportScan { roots: vec![], degenerate: false };
        }
        if game.regret(k, &barycenter) > opts.tol {
            // the whole family shares this constant regret; nothing to skip
            return SupportScan { roots: vec![], degenerate: false };
        }
        let ok = game.max_regret(&barycenter) <= opts.tol;
        return SupportScan {
            roots: if ok { vec![barycenter] } else { vec![] },
            degenerate: true,
        };
    }

    // Square system: per mixed agent, indifference across its support plus
    // normalization. Newton from the barycenter and seeded random starts.
    let mut rng = ChaCha8Rng::seed_from_u64(
        opts.seed ^ support_counter.wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let mut roots: Vec<MixedProfile> = Vec::new();
    let mut degenerate = false;
    for start_idx in 0..=opts.extra_starts {
        let start = if start_idx == 0 {
            stack_vars(support, &mixed, None)
        } else {
            stack_vars(support, &mixed, Some(&mut rng))
        };
        match newton_on_support(game, support, &mixed, start, opts, degen_tol, ftol) {
            NewtonOutcome::Root(weights) => {
                if let Some(profile) = validate_root(game, support, &mixed, &weights, opts.tol) {
                    if !roots.iter().any(|r| mixed_linf(r, &profile) <= 1e-9) {
                        roots.push(profile);
                    }
                }
            }
            NewtonOutcome::DegenerateNearRoot => {
                degenerate = true;
                break;
            }
            NewtonOutcome::Failed => {}
        }
    }
    SupportScan { roots, degenerate }
}

enum NewtonOutcome {
    Root(Vec<f64>),
    DegenerateNearRoot,
    Failed,
}

// Barycentric or Dirichlet(1) weights for the mixed agents, stacked.
fn stack_vars(
    support: &[&Vec<usize>],
    mixed: &[usize],
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<f64> {
    let mut vars = Vec::new();
    match rng {
        None => {
            for &k in mixed {
                let n = support[k].len();
                vars.extend(std::iter::repeat(1.0 / n as f64).take(n));
            }
        }
        Some(rng) => {
            for &k in mixed {
                let n = support[k].len();
                let draws: Vec<f64> =
                    (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-12)).collect();
                let total: f64 = draws.iter().sum();
                vars.extend(draws.iter().map(|d| d / total));
            }
        }
    }
    vars
}

fn support_barycenter(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    mixed: &[usize],
) -> MixedProfile {
    let vars = stack_vars(support, mixed, None);
    profile_from_vars(game, support, mixed, &vars)
}

fn profile_from_vars(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    mixed: &[usize],
    vars: &[f64],
) -> MixedProfile {
    let weights = weights_from_vars(game, support, mixed, vars);
    weights
        .into_iter()
        .map(|w| {
            let clamped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
            Distribution::normalized(clamped, 1e-6).expect("support weights near-normalized")
        })
        .collect()
}

fn weights_from_vars(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    mixed: &[usize],
    vars: &[f64],
) -> Vec<Vec<f64>> {
    let mut weights: Vec<Vec<f64>> =
        (0..game.agents()).map(|k| vec![0.0; game.action_count(k)]).collect();
    for (k, s) in support.iter().enumerate() {
        if s.len() == 1 {
            weights[k][s[0]] = 1.0;
        }
    }
    let mut off = 0;
    for &k in mixed {
        for &a in support[k] {
            weights[k][a] = vars[off];
            off += 1;
        }
    }
    weights
}

fn newton_on_support(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    mixed: &[usize],
    mut vars: Vec<f64>,
    opts: &EnumOptions,
    degen_tol: f64,
    ftol: f64,
) -> NewtonOutcome {
    let dim = vars.len();
    for _ in 0..opts.newton_max_iter {
        let weights = weights_from_vars(game, support, mixed, &vars);
        let value = |l: usize, b: usize| weights[l][b];

        let mut residual = vec![0.0; dim];
        let mut jac = vec![vec![0.0; dim]; dim];
        let mut row = 0;
        let offsets: Vec<usize> = {
            let mut offs = Vec::with_capacity(mixed.len());
            let mut o = 0;
            for &k in mixed {
                offs.push(o);
                o += support[k].len();
            }
            offs
        };
        for (mi, &k) in mixed.iter().enumerate() {
            let base_action = support[k][0];
            let v_base = game.action_value_by(k, base_action, &value);
            for &a in &support[k][1..] {
                residual[row] = game.action_value_by(k, a, &value) - v_base;
                for (mj, &l) in mixed.iter().enumerate() {
                    if l == k {
                        continue;
                    }
                    for (jb, &b) in support[l].iter().enumerate() {
                        jac[row][offsets[mj] + jb] = game
                            .action_value_partial_by(k, a, l, b, &value)
                            - game.action_value_partial_by(k, base_action, l, b, &value);
                    }
                }
                row += 1;
            }
            residual[row] = support[k].iter().enumerate().map(|(j, _)| vars[offsets[mi] + j]).sum::<f64>() - 1.0;
            for j in 0..support[k].len() {
                jac[row][offsets[mi] + j] = 1.0;
            }
            row += 1;
        }
        debug_assert_eq!(row, dim);

        let fnorm = residual.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
        if fnorm <= ftol {
            return NewtonOutcome::Root(vars);
        }
        let mut rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        match lu_solve(&mut jac, &mut rhs) {
            Ok(step) => {
                for (v, s) in vars.iter_mut().zip(&step) {
                    *v += s;
                }
                if vars.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
                    return NewtonOutcome::Failed;
                }
            }
            Err(_) => {
                return if fnorm <= degen_tol {
                    NewtonOutcome::DegenerateNearRoot
                } else {
                    NewtonOutcome::Failed
                };
            }
        }
    }
    NewtonOutcome::Failed
}

fn validate_root(
    game: &NormalFormGame,
    support: &[&Vec<usize>],
    mixed: &[usize],
    vars: &[f64],
    tol: f64,
) -> Option<MixedProfile> {
    if vars.iter().any(|&v| v < -1e-9 || v > 1.0 + 1e-9) {
        return None;
    }
    let profile = profile_from_vars(game, support, mixed, vars);
    if game.max_regret(&profile) <= tol {
        Some(profile)
    } else {
        None
    }
}

struct Singular;

// Partial-pivot LU solve of a dense square system, in place.
fn lu_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>, Singular> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-12 * scale {
            return Err(Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

fn check_caps(game: &AgentFormGame, opts: &EnumOptions) -> Result<(), SolveError> {
    let agents = game.game.agents();
    let actions = game.game.action_counts().iter().copied().max().unwrap_or(0);
    if agents > opts.max_agents || actions > opts.max_actions {
        return Err(SolveError::TooLarge {
            agents,
            actions,
            max_agents: opts.max_agents,
            max_actions: opts.max_actions,
        });
    }
    Ok(())
}

/// All equilibria of a finite Bayesian game, via support enumeration on the
/// agent form. Lexicographically sorted by flattened profile.
pub fn enumerate_equilibria(
    game: &FiniteBayesianGame,
    tol: f64,
) -> Result<Vec<BehavioralStrategyProfile>, SolveError> {
    let opts = EnumOptions { tol, ..EnumOptions::default() };
    enumerate_equilibria_with(game, &opts).map(|(profiles, _)| profiles)
}

/// Enumeration with explicit options; also reports skipped-support count.
pub fn enumerate_equilibria_with(
    game: &FiniteBayesianGame,
    opts: &EnumOptions,
) -> Result<(Vec<BehavioralStrategyProfile>, usize), SolveError> {
    let af = game.to_agent_form();
    check_caps(&af, opts)?;
    let outcome = enumerate_normal_form(&af.game, None, opts);
    let profiles =
        outcome.profiles.iter().map(|m| af.mixed_to_behavioral(game, m)).collect();
    Ok((profiles, outcome.skipped_supports))
}

/// Classifies the equilibrium count of a game.
///
/// Over-cap games and games whose enumeration skipped degenerate supports are
/// classified Unknown; a certificate of uniqueness is never issued on partial
/// evidence.
pub fn audit_uniqueness(game: &FiniteBayesianGame, tol: f64, merge_radius: f64) -> UniquenessVerdict {
    let opts = EnumOptions { tol, merge_radius, ..EnumOptions::default() };
    audit_uniqueness_with(game, &opts)
}

pub fn audit_uniqueness_with(game: &FiniteBayesianGame, opts: &EnumOptions) -> UniquenessVerdict {
    match enumerate_equilibria_with(game, opts) {
        Err(_) => UniquenessVerdict {
            status: UniquenessStatus::Unknown,
            equilibria: vec![],
            merge_radius: opts.merge_radius,
            skipped_supports: 0,
        },
        Ok((equilibria, skipped)) => {
            let status = if equilibria.len() >= 2 {
                UniquenessStatus::Multiple
            } else if skipped > 0 || equilibria.is_empty() {
                UniquenessStatus::Unknown
            } else {
                UniquenessStatus::Unique
            };
            UniquenessVerdict {
                status,
                equilibria,
                merge_radius: opts.merge_radius,
                skipped_supports: skipped,
            }
        }
    }
}

/// Damped simultaneous best-reply iteration.
///
/// Each agent moves toward its lowest-index pure best reply. Cycling is a
/// normal outcome for games with only mixed equilibria and is reported via
/// `converged = false`.
pub fn solve_best_response_iteration(
    game: &FiniteBayesianGame,
    init: &BehavioralStrategyProfile,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport, GameError> {
    assert!(damping > 0.0 && damping <= 1.0, "damping must lie in (0, 1]");
    init.validate(game)?;
    let af = game.to_agent_form();
    let mut current = af.behavioral_to_mixed(init)?;
    let mut iterations = 0;
    let mut regret = af.game.max_regret(&current);
    while regret > tol && iterations < max_iter {
        let mut next = Vec::with_capacity(current.len());
        for k in 0..af.game.agents() {
            let (ties, _) = af.game.best_reply(k, &current);
            let target = ties[0];
            let weights: Vec<f64> = (0..af.game.action_count(k))
                .map(|a| {
                    (1.0 - damping) * current[k].get(a) + damping * if a == target { 1.0 } else { 0.0 }
                })
                .collect();
            next.push(Distribution::normalized(weights, 1e-9).expect("convex mix stays normalized"));
        }
        current = next;
        iterations += 1;
        regret = af.game.max_regret(&current);
    }
    Ok(SolveReport {
        profile: af.mixed_to_behavioral(game, &current),
        method: SolveMethod::BestReply.as_str().to_string(),
        iterations,
        max_regret: regret,
        converged: regret <= tol,
    })
}

/// Geometric grid from `start` to `end` inclusive.
pub fn geometric_schedule(start: f64, end: f64, steps: usize) -> Vec<f64> {
    assert!(start > 0.0 && end > start && steps >= 2);
    let ratio = (end / start).powf(1.0 / (steps - 1) as f64);
    (0..steps).map(|i| start * ratio.powi(i as i32)).collect()
}

pub fn default_logit_schedule() -> Vec<f64> {
    geometric_schedule(1.0, 1e4, 40)
}

/// Logit-response homotopy: follow the smoothed fixed point along an
/// increasing precision schedule, then polish the terminal profile by solving
/// its apparent support exactly.
pub fn solve_logit_homotopy(
    game: &FiniteBayesianGame,
    schedule: &[f64],
    tol: f64,
) -> Result<SolveReport, GameError> {
    assert!(
        schedule.windows(2).all(|w| w[0] < w[1]) && !schedule.is_empty(),
        "schedule must be strictly increasing"
    );
    let af = game.to_agent_form();
    let nf = &af.game;
    let mut current = nf.uniform_profile();
    let mut iterations = 0;
    let inner_damping = 0.7;
    let inner_cap = 2000;
    for &lambda in schedule {
        for _ in 0..inner_cap {
            let mut next = Vec::with_capacity(current.len());
            for k in 0..nf.agents() {
                let values: Vec<f64> =
                    (0..nf.action_count(k)).map(|a| nf.action_value(k, a, &current)).collect();
                let top = values.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
                let weights: Vec<f64> = values.iter().map(|v| (lambda * (v - top)).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mixed: Vec<f64> = weights
                    .iter()
                    .enumerate()
                    .map(|(a, w)| {
                        (1.0 - inner_damping) * current[k].get(a) + inner_damping * w / total
                    })
                    .collect();
                next.push(
                    Distribution::normalized(mixed, 1e-9).expect("softmax mix stays normalized"),
                );
            }
            iterations += 1;
            let delta = mixed_linf(&current, &next);
            current = next;
            if delta <= 1e-13 {
                break;
            }
        }
    }
    // polish: solve the indifference system on the terminal support
    let polished = polish_on_support(nf, &current, tol);
    let final_profile = match polished {
        Some(p) if nf.max_regret(&p) <= nf.max_regret(&current) => p,
        _ => current,
    };
    let regret = nf.max_regret(&final_profile);
    Ok(SolveReport {
        profile: af.mixed_to_behavioral(game, &final_profile),
        method: SolveMethod::Logit.as_str().to_string(),
        iterations,
        max_regret: regret,
        converged: regret <= tol,
    })
}

const POLISH_SUPPORT_THRESHOLD: f64 = 1e-6;

fn polish_on_support(game: &NormalFormGame, profile: &MixedProfile, tol: f64) -> Option<MixedProfile> {
    let support: Vec<Vec<usize>> = profile
        .iter()
        .map(|d| {
            (0..d.len()).filter(|&a| d.get(a) > POLISH_SUPPORT_THRESHOLD).collect::<Vec<_>>()
        })
        .collect();
    if support.iter().any(|s| s.is_empty()) {
        return None;
    }
    let support_refs: Vec<&Vec<usize>> = support.iter().collect();
    let mixed: Vec<usize> = (0..support.len()).filter(|&k| support[k].len() > 1).collect();
    if mixed.is_empty() {
        let pure: MixedProfile = support
            .iter()
            .enumerate()
            .map(|(k, s)| Distribution::point(game.action_count(k), s[0]))
            .collect();
        return if game.max_regret(&pure) <= tol { Some(pure) } else { None };
    }
    let mut vars = Vec::new();
    for &k in &mixed {
        let total: f64 = support[k].iter().map(|&a| profile[k].get(a)).sum();
        vars.extend(support[k].iter().map(|&a| profile[k].get(a) / total));
    }
    let scale = game.payoff_scale().max(1.0);
    let opts = EnumOptions::default();
    match newton_on_support(game, &support_refs, &mixed, vars, &opts, 1e-9 * scale, 1e-11 * scale) {
        NewtonOutcome::Root(vars) => validate_root(game, &support_refs, &mixed, &vars, tol),
        _ => None,
    }
}
