//! The five subcommands. Each returns a rendered-ready report plus the
//! process exit code; main only parses flags and writes the output.
//!
//! Exit codes: 0 success, 2 malformed input, 3 uniqueness violation,
//! 4 non-convergence or an unresolved uniqueness audit.

use crate::gamefile::{self, GameFile, SchemaError};
use crate::report::*;
use clap::ValueEnum;
use metagame::meta::solve_meta_bne_with_table;
use metagame::random::{random_behavioral_profile, rng_for};
use metagame::solve::{default_logit_schedule, DEFAULT_MAX_ITER, DEFAULT_MERGE_RADIUS};
use metagame::table::each_index;
use metagame::{
    apply_transformation, audit_uniqueness, build_equilibrium_table, enumerate_equilibria,
    is_meta_bne, solve_best_response_iteration, solve_logit_homotopy, BehavioralStrategyProfile,
    EquilibriumTable, FamilyError, FiniteBayesianGame, MetaError, MetaGame, MetaStrategyProfile,
    SolveMethod, Strictness, UniquenessStatus, WithinEquilibrium,
};
use rayon::prelude::*;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_MULTIPLE: i32 = 3;
pub const EXIT_UNRESOLVED: i32 = 4;

/// Margins below this leave a strict separating prediction inapplicable.
const GAP_TOL: f64 = 1e-6;

pub struct CmdResult {
    pub report: Report,
    pub exit: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Subsidy,
    Cyber,
    Platform,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Subsidy => "subsidy",
            Family::Cyber => "cyber",
            Family::Platform => "platform",
        }
    }
}

fn exit_for_meta(e: &MetaError) -> i32 {
    match e {
        MetaError::UniquenessViolated { .. } => EXIT_MULTIPLE,
        MetaError::UniquenessUnknown { .. } => EXIT_UNRESOLVED,
        MetaError::Family(_) | MetaError::Game(_) => EXIT_SCHEMA,
        MetaError::Solve(_) => EXIT_UNRESOLVED,
    }
}

fn exit_for_family(e: &FamilyError) -> i32 {
    match e {
        FamilyError::InvalidParams(_) | FamilyError::HypothesisViolated(_) => EXIT_SCHEMA,
        FamilyError::BoundaryEquilibrium(_) | FamilyError::GridTooCoarse(_) => EXIT_UNRESOLVED,
        FamilyError::UniquenessViolated { .. } => EXIT_MULTIPLE,
        FamilyError::Meta(inner) => exit_for_meta(inner),
    }
}

fn fail(command: &'static str, message: String, exit: i32) -> CmdResult {
    let mut report = Report::new();
    report.line(format!("error: {message}"));
    report.record(&ErrorRecord { record: "error", instance: None, error: message.clone() });
    let mut summary = SummaryRecord::new(command, "error", exit);
    summary.errors = Some(1);
    report.record(&summary);
    CmdResult { report, exit }
}

fn load_file(path: &Path, command: &'static str) -> Result<GameFile, CmdResult> {
    gamefile::load(path).map_err(|e| fail(command, e.0, EXIT_SCHEMA))
}

fn strategy_cell(actions: &[String], probs: &[f64]) -> String {
    actions
        .iter()
        .zip(probs)
        .map(|(a, p)| format!("{a}={}", fmt_prob(*p)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn behavioral_rows(
    players: &[String],
    type_names: &[Vec<String>],
    action_names: &[Vec<String>],
    profile: &BehavioralStrategyProfile,
) -> Vec<StrategyRow> {
    let mut rows = Vec::new();
    for (i, player) in players.iter().enumerate() {
        for (t, type_name) in type_names[i].iter().enumerate() {
            rows.push(StrategyRow {
                player: player.clone(),
                type_name: type_name.clone(),
                actions: action_names[i].clone(),
                probs: profile.row(i, t).weights().to_vec(),
            });
        }
    }
    rows
}

fn push_strategy_table(report: &mut Report, rows: &[StrategyRow]) {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.player.clone(), r.type_name.clone(), strategy_cell(&r.actions, &r.probs)]
        })
        .collect();
    report.table(&["player", "type", "strategy"], &table);
}

fn meta_rows(
    players: &[String],
    mg: &MetaGame,
    m: &MetaStrategyProfile,
) -> (Vec<StrategyRow>, EnvRecord) {
    let type_names = mg.backend().type_names();
    let mut rows = Vec::new();
    for (i, player) in players.iter().enumerate() {
        for (t, type_name) in type_names[i].iter().enumerate() {
            rows.push(StrategyRow {
                player: player.clone(),
                type_name: type_name.clone(),
                actions: mg.spaces().action_labels(i).to_vec(),
                probs: m.row(i, t).weights().to_vec(),
            });
        }
    }
    let env = EnvRecord {
        moves: mg.spaces().env_labels().to_vec(),
        probs: m.env().weights().to_vec(),
    };
    (rows, env)
}

fn push_meta_table(report: &mut Report, rows: &[StrategyRow], env: &EnvRecord) {
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.player.clone(), r.type_name.clone(), strategy_cell(&r.actions, &r.probs)]
        })
        .collect();
    table.push(vec![
        "environment".to_string(),
        "-".to_string(),
        strategy_cell(&env.moves, &env.probs),
    ]);
    report.table(&["player", "type", "strategy"], &table);
}

/// Emits the solved within-game table: one strategy block and one payoff
/// table per transformation.
fn push_within_table(report: &mut Report, players: &[String], mg: &MetaGame, table: &EquilibriumTable) {
    let type_names = mg.backend().type_names();
    let type_counts = mg.type_counts();
    for entry in table.entries() {
        report.line(format!(
            "transformation {}  (certificate: {})",
            entry.id,
            entry.certificate.as_str()
        ));
        let mut record = WithinRecord {
            record: "within",
            id: entry.id.clone(),
            certificate: entry.certificate.as_str().to_string(),
            rows: None,
            scalar: None,
            payoffs: Vec::new(),
        };
        match &entry.equilibrium {
            WithinEquilibrium::Behavioral(profile) => {
                let action_names: Vec<Vec<String>> = match mg.backend() {
                    metagame::WithinBackend::Finite(game) => {
                        (0..game.players()).map(|i| game.action_names(i).to_vec()).collect()
                    }
                    metagame::WithinBackend::Family(_) => (0..mg.players())
                        .map(|i| {
                            (0..profile.row(i, 0).weights().len())
                                .map(|a| format!("a{a}"))
                                .collect()
                        })
                        .collect(),
                };
                let rows = behavioral_rows(players, &type_names, &action_names, profile);
                push_strategy_table(report, &rows);
                record.rows = Some(rows);
            }
            WithinEquilibrium::Scalar(actions) => {
                let mut rows = Vec::new();
                for (i, player) in players.iter().enumerate() {
                    for (t, value) in actions[i].iter().enumerate() {
                        rows.push(vec![
                            player.clone(),
                            type_names[i][t].clone(),
                            fmt_val(*value),
                        ]);
                    }
                }
                report.table(&["player", "type", "action"], &rows);
                record.scalar = Some(actions.clone());
            }
        }
        let mut payoff_rows = Vec::new();
        let mut human_rows = Vec::new();
        each_index(&type_counts, |idx| {
            let labels: Vec<String> =
                idx.iter().enumerate().map(|(i, &t)| type_names[i][t].clone()).collect();
            let values: Vec<f64> =
                (0..players.len()).map(|i| entry.expost[i].get(idx)).collect();
            let mut row = vec![format!("({})", labels.join(", "))];
            row.extend(values.iter().map(|v| fmt_val(*v)));
            human_rows.push(row);
            payoff_rows.push(ExpostRow { types: labels, values });
        });
        let mut headers = vec!["types"];
        for p in players {
            headers.push(p.as_str());
        }
        report.line("equilibrium payoffs by type profile:");
        report.table(&headers, &human_rows);
        record.payoffs = payoff_rows;
        report.record(&record);
        report.blank();
    }
}

pub fn cmd_solve(path: &Path, method: SolveMethod, seed: u64, tol: f64) -> CmdResult {
    let file = match load_file(path, "solve") {
        Ok(f) => f,
        Err(r) => return r,
    };
    let game = match file.base_game() {
        Ok(g) => g,
        Err(e) => return fail("solve", e.0, EXIT_SCHEMA),
    };
    let players = file.game.players.clone();
    let type_names: Vec<Vec<String>> =
        (0..game.players()).map(|i| game.type_names(i).to_vec()).collect();
    let action_names: Vec<Vec<String>> =
        (0..game.players()).map(|i| game.action_names(i).to_vec()).collect();

    let mut report = Report::new();
    report.line(format!("file: {}", path.display()));
    report.line(format!("method: {}  tol: {tol:e}", method.as_str()));
    report.blank();

    let mut summary = SummaryRecord::new("solve", "", EXIT_OK);
    summary.file = Some(path.display().to_string());
    summary.method = Some(method.as_str().to_string());
    summary.seed = Some(seed);
    summary.tol = Some(tol);

    match method {
        SolveMethod::Enumerate => {
            let eqs = match enumerate_equilibria(&game, tol) {
                Ok(eqs) => eqs,
                Err(e) => return fail("solve", e.to_string(), EXIT_UNRESOLVED),
            };
            for (k, profile) in eqs.iter().enumerate() {
                let check = game.is_bne(profile, tol).expect("enumerated profile fits the game");
                let rows = behavioral_rows(&players, &type_names, &action_names, profile);
                report.line(format!(
                    "equilibrium {} of {}  (max regret {})",
                    k + 1,
                    eqs.len(),
                    fmt_val(check.max_regret)
                ));
                push_strategy_table(&mut report, &rows);
                report.blank();
                report.record(&ProfileRecord {
                    record: "profile",
                    index: k,
                    max_regret: check.max_regret,
                    rows,
                });
            }
            let exit = if eqs.is_empty() { EXIT_UNRESOLVED } else { EXIT_OK };
            let verdict = match eqs.len() {
                0 => "no equilibrium found".to_string(),
                1 => "1 equilibrium".to_string(),
                n => format!("{n} equilibria"),
            };
            report.line(format!("{verdict}"));
            summary.equilibria = Some(eqs.len());
            summary.converged = Some(!eqs.is_empty());
            summary.verdict = verdict;
            summary.exit = exit;
            report.record(&summary);
            CmdResult { report, exit }
        }
        SolveMethod::BestReply | SolveMethod::Logit => {
            let solve_result = if method == SolveMethod::BestReply {
                let init = random_behavioral_profile(&game, &mut rng_for(seed, 0));
                solve_best_response_iteration(&game, &init, 0.5, DEFAULT_MAX_ITER, tol)
            } else {
                solve_logit_homotopy(&game, &default_logit_schedule(), tol)
            };
            let solved = match solve_result {
                Ok(s) => s,
                Err(e) => return fail("solve", e.to_string(), EXIT_UNRESOLVED),
            };
            let rows = behavioral_rows(&players, &type_names, &action_names, &solved.profile);
            report.line(format!(
                "max regret {} after {} iterations ({})",
                fmt_val(solved.max_regret),
                solved.iterations,
                if solved.converged { "converged" } else { "did not converge" }
            ));
            push_strategy_table(&mut report, &rows);
            report.record(&ProfileRecord {
                record: "profile",
                index: 0,
                max_regret: solved.max_regret,
                rows,
            });
            let exit = if solved.converged { EXIT_OK } else { EXIT_UNRESOLVED };
            summary.equilibria = Some(1);
            summary.iterations = Some(solved.iterations);
            summary.max_regret = Some(solved.max_regret);
            summary.converged = Some(solved.converged);
            summary.verdict =
                if solved.converged { "converged".into() } else { "did not converge".into() };
            summary.exit = exit;
            report.record(&summary);
            CmdResult { report, exit }
        }
    }
}

/// Rebuilds the named transformation's game and lists its equilibria, for
/// the report accompanying a uniqueness violation.
fn describe_offender(
    report: &mut Report,
    file: &GameFile,
    base: &FiniteBayesianGame,
    id: &str,
    tol: f64,
) {
    let Some(meta) = &file.meta else { return };
    let Some(section) = meta.transformations.iter().find(|t| t.id == id) else { return };
    let players = &file.game.players;
    let mut rewrite = vec![Vec::new(); players.len()];
    for r in &section.rewrites {
        if let Some(i) = players.iter().position(|p| p == &r.player) {
            rewrite[i] = r.table.clone();
        }
    }
    let rebuilt = metagame::Transformation::new(id.to_string(), rewrite)
        .ok()
        .and_then(|t| apply_transformation(&t, base).ok());
    let Some(game) = rebuilt else { return };
    let Ok(eqs) = enumerate_equilibria(&game, tol) else { return };
    report.line(format!("equilibria of transformation {id}:"));
    let type_names: Vec<Vec<String>> =
        (0..game.players()).map(|i| game.type_names(i).to_vec()).collect();
    let action_names: Vec<Vec<String>> =
        (0..game.players()).map(|i| game.action_names(i).to_vec()).collect();
    for (k, profile) in eqs.iter().enumerate() {
        let rows = behavioral_rows(players, &type_names, &action_names, profile);
        report.line(format!("equilibrium {} of {}", k + 1, eqs.len()));
        push_strategy_table(report, &rows);
        report.record(&ProfileRecord { record: "profile", index: k, max_regret: 0.0, rows });
    }
}

pub fn cmd_solve_meta(
    path: &Path,
    method: SolveMethod,
    seed: u64,
    tol: f64,
    strictness: Strictness,
) -> CmdResult {
    let file = match load_file(path, "solve-meta") {
        Ok(f) => f,
        Err(r) => return r,
    };
    let base = match file.base_game() {
        Ok(g) => g,
        Err(e) => return fail("solve-meta", e.0, EXIT_SCHEMA),
    };
    let mg = match file.meta_game(&base) {
        Ok(m) => m,
        Err(e) => return fail("solve-meta", e.0, EXIT_SCHEMA),
    };
    let players = file.game.players.clone();

    let mut report = Report::new();
    report.line(format!("file: {}", path.display()));
    report.line(format!("method: {}  tol: {tol:e}", method.as_str()));
    report.blank();

    let mut summary = SummaryRecord::new("solve-meta", "", EXIT_OK);
    summary.file = Some(path.display().to_string());
    summary.method = Some(method.as_str().to_string());
    summary.seed = Some(seed);
    summary.tol = Some(tol);

    if mg.tset().len() == 1 && mg.max_cost() == 0.0 {
        report.line(
            "note: one transformation and zero meta-action costs; the meta-game \
             reduces to the base Bayesian game and meta-equilibria are exactly \
             its Bayes-Nash equilibria paired with any environment move",
        );
        report.blank();
    }

    let table = match build_equilibrium_table(&mg, tol, strictness) {
        Ok(t) => t,
        Err(MetaError::UniquenessViolated { id }) => {
            let message = format!("transformation {id} has multiple equilibria");
            report.line(format!("error: {message}"));
            report.record(&ErrorRecord { record: "error", instance: None, error: message });
            describe_offender(&mut report, &file, &base, &id, tol);
            summary.verdict = format!("uniqueness violated at {id}");
            summary.exit = EXIT_MULTIPLE;
            report.record(&summary);
            return CmdResult { report, exit: EXIT_MULTIPLE };
        }
        Err(e) => return fail("solve-meta", e.to_string(), exit_for_meta(&e)),
    };

    push_within_table(&mut report, &players, &mg, &table);

    let solved = match solve_meta_bne_with_table(&mg, &table, method, seed, tol) {
        Ok(s) => s,
        Err(e) => return fail("solve-meta", e.to_string(), exit_for_meta(&e)),
    };

    let mut all_hold = !solved.equilibria.is_empty();
    for (k, m) in solved.equilibria.iter().enumerate() {
        let check = match is_meta_bne(&mg, &table, m, tol) {
            Ok(c) => c,
            Err(e) => return fail("solve-meta", e.to_string(), exit_for_meta(&e)),
        };
        all_hold &= check.holds;
        let (rows, env) = meta_rows(&players, &mg, m);
        report.line(format!(
            "meta-equilibrium {} of {}  (max gain {}, environment gain {})",
            k + 1,
            solved.equilibria.len(),
            fmt_val(check.max_gain),
            fmt_val(check.env_gain)
        ));
        push_meta_table(&mut report, &rows, &env);
        report.blank();
        report.record(&MetaProfileRecord {
            record: "meta-profile",
            index: k,
            max_gain: check.max_gain,
            env_gain: check.env_gain,
            rows,
            env,
        });
    }

    let converged = solved.converged && all_hold;
    let exit = if converged { EXIT_OK } else { EXIT_UNRESOLVED };
    let verdict = if !solved.converged {
        "did not converge".to_string()
    } else if !all_hold {
        "solution failed the equilibrium check".to_string()
    } else {
        match solved.equilibria.len() {
            1 => "1 meta-equilibrium".to_string(),
            n => format!("{n} meta-equilibria"),
        }
    };
    report.line(format!(
        "{verdict} ({} iterations, max gain {})",
        solved.iterations,
        fmt_val(solved.max_gain)
    ));
    summary.equilibria = Some(solved.equilibria.len());
    summary.iterations = Some(solved.iterations);
    summary.max_gain = Some(solved.max_gain);
    summary.converged = Some(converged);
    summary.verdict = verdict;
    summary.exit = exit;
    report.record(&summary);
    CmdResult { report, exit }
}

pub fn cmd_audit(path: &Path, tol: f64) -> CmdResult {
    let file = match load_file(path, "audit") {
        Ok(f) => f,
        Err(r) => return r,
    };
    let base = match file.base_game() {
        Ok(g) => g,
        Err(e) => return fail("audit", e.0, EXIT_SCHEMA),
    };
    let mg = match file.meta_game(&base) {
        Ok(m) => m,
        Err(e) => return fail("audit", e.0, EXIT_SCHEMA),
    };

    let mut report = Report::new();
    report.line(format!("file: {}", path.display()));
    report.line(format!("tol: {tol:e}  merge radius: {DEFAULT_MERGE_RADIUS:e}"));
    report.blank();

    let mut rows = Vec::new();
    let mut multiple = 0usize;
    let mut unknown = 0usize;
    for t in mg.tset().iter() {
        let game = match apply_transformation(t, &base) {
            Ok(g) => g,
            Err(e) => return fail("audit", e.to_string(), EXIT_SCHEMA),
        };
        let verdict = audit_uniqueness(&game, tol, DEFAULT_MERGE_RADIUS);
        match verdict.status {
            UniquenessStatus::Multiple => multiple += 1,
            UniquenessStatus::Unknown => unknown += 1,
            UniquenessStatus::Unique => {}
        }
        rows.push(vec![
            t.id().to_string(),
            verdict.status.as_str().to_string(),
            verdict.equilibria.len().to_string(),
            verdict.skipped_supports.to_string(),
        ]);
        report.record(&AuditRecord {
            record: "audit",
            id: t.id().to_string(),
            status: verdict.status.as_str().to_string(),
            equilibria: verdict.equilibria.len(),
            skipped_supports: verdict.skipped_supports,
        });
    }
    report.table(&["transformation", "status", "equilibria", "skipped supports"], &rows);
    report.blank();

    let (verdict, exit) = if multiple > 0 {
        (format!("{multiple} transformation(s) with multiple equilibria"), EXIT_MULTIPLE)
    } else if unknown > 0 {
        (format!("{unknown} audit(s) unresolved"), EXIT_UNRESOLVED)
    } else {
        ("all transformations have a unique equilibrium".to_string(), EXIT_OK)
    };
    report.line(&verdict);

    let mut summary = SummaryRecord::new("audit", verdict, exit);
    summary.file = Some(path.display().to_string());
    summary.tol = Some(tol);
    summary.instances = Some(mg.tset().len());
    summary.exit = exit;
    report.record(&summary);
    CmdResult { report, exit }
}

fn stance_row(
    instance: usize,
    equilibrium: usize,
    rates: [[f64; 2]; 2],
    weak_index: usize,
    gain_gap: f64,
    refine_consistent: Option<bool>,
) -> StanceRowRecord {
    let strong_index = 1 - weak_index;
    let weak_pass = (0..2)
        .all(|i| rates[i][weak_index] >= rates[i][strong_index] - 1e-9);
    let separated = (0..2).all(|i| {
        rates[i][weak_index] >= 1.0 - GAP_TOL && rates[i][strong_index] <= GAP_TOL
    });
    let strict_applicable = gain_gap > GAP_TOL;
    StanceRowRecord {
        record: "row",
        instance,
        equilibrium,
        strict_rates: rates,
        gain_gap,
        weak_pass,
        strict_applicable,
        strict_pass: !strict_applicable || separated,
        refine_consistent,
    }
}

pub fn cmd_sweep(
    family: Family,
    count: usize,
    seed: u64,
    tol: f64,
    equal_losses: bool,
) -> CmdResult {
    if equal_losses && family != Family::Cyber {
        return fail(
            "sweep",
            "--equal-losses only applies to the cyber family".to_string(),
            EXIT_SCHEMA,
        );
    }
    let started = std::time::Instant::now();
    let mut report = Report::new();
    report.line(format!(
        "family: {}  instances: {count}  seed: {seed}  tol: {tol:e}{}",
        family.as_str(),
        if equal_losses { "  equal-losses" } else { "" }
    ));
    report.blank();

    let mut summary = SummaryRecord::new("sweep", "", EXIT_OK);
    summary.family = Some(family.as_str().to_string());
    summary.seed = Some(seed);
    summary.tol = Some(tol);
    summary.instances = Some(count);

    let mut errors = 0usize;
    let mut row_count = 0usize;
    let mut weak_pass = 0usize;
    let mut strict_applicable = 0usize;
    let mut strict_pass = 0usize;
    let mut human = Vec::new();

    macro_rules! error_row {
        ($k:expr, $e:expr) => {{
            errors += 1;
            human.push(vec![
                $k.to_string(),
                "-".to_string(),
                format!("error: {}", $e),
            ]);
            report.record(&ErrorRecord {
                record: "error",
                instance: Some($k),
                error: $e.to_string(),
            });
        }};
    }

    match family {
        Family::Subsidy => {
            let results: Vec<_> = (0..count)
                .into_par_iter()
                .map(|k| metagame::families::subsidy::subsidy_sweep_instance(seed, k as u64, tol))
                .collect();
            let mut rows = Vec::new();
            for (k, result) in results.into_iter().enumerate() {
                match result {
                    Err(e) => error_row!(k, e),
                    Ok(instance) => {
                        for (eq, check) in instance.checks.iter().enumerate() {
                            let monotone = check.monotone[0] && check.monotone[1];
                            let delta_monotone =
                                check.delta_monotone[0] && check.delta_monotone[1];
                            let pass = monotone && delta_monotone;
                            row_count += 1;
                            if pass {
                                weak_pass += 1;
                            }
                            rows.push(vec![
                                k.to_string(),
                                eq.to_string(),
                                fmt_prob(check.lobby_rates[0][0]),
                                fmt_prob(check.lobby_rates[0][1]),
                                fmt_prob(check.lobby_rates[1][0]),
                                fmt_prob(check.lobby_rates[1][1]),
                                monotone.to_string(),
                                delta_monotone.to_string(),
                                pass.to_string(),
                            ]);
                            report.record(&SubsidyRowRecord {
                                record: "row",
                                instance: k,
                                equilibrium: eq,
                                redraws: instance.redraws,
                                lobby_rates: check.lobby_rates,
                                deltas: check.deltas,
                                monotone,
                                delta_monotone,
                                pass,
                            });
                        }
                    }
                }
            }
            report.table(
                &[
                    "instance", "eq", "m1(L)", "m1(H)", "m2(L)", "m2(H)", "monotone",
                    "delta-monotone", "pass",
                ],
                &rows,
            );
            for row in human {
                report.line(row.join("  "));
            }
            summary.weak_pass = Some(weak_pass);
            summary.verdict = format!("{weak_pass}/{row_count} rows pass, {errors} errors");
        }
        Family::Cyber | Family::Platform => {
            enum Outcome {
                Cyber(metagame::families::cyber::CyberSweepInstance),
                Platform(metagame::families::platform::PlatformSweepInstance),
            }
            let results: Vec<Result<Outcome, FamilyError>> = (0..count)
                .into_par_iter()
                .map(|k| match family {
                    Family::Cyber => metagame::families::cyber::cyber_sweep_instance_with(
                        seed,
                        k as u64,
                        tol,
                        equal_losses,
                    )
                    .map(Outcome::Cyber),
                    Family::Platform => {
                        metagame::families::platform::platform_sweep_instance(seed, k as u64, tol)
                            .map(Outcome::Platform)
                    }
                    Family::Subsidy => unreachable!(),
                })
                .collect();
            // cyber types run weak then strong; platform low then high
            // quality with the high type predicted strict
            let weak_index = if family == Family::Cyber { 0 } else { 1 };
            let mut rows = Vec::new();
            for (k, result) in results.into_iter().enumerate() {
                match result {
                    Err(e) => error_row!(k, e),
                    Ok(outcome) => {
                        let (rates, gain_gap, refine) = match &outcome {
                            Outcome::Cyber(i) => (&i.rates, i.gain_gap, None),
                            Outcome::Platform(i) => {
                                (&i.rates, i.gain_gap, Some(i.refine_consistent))
                            }
                        };
                        for (eq, r) in rates.iter().enumerate() {
                            let rec = stance_row(k, eq, *r, weak_index, gain_gap, refine);
                            row_count += 1;
                            if rec.weak_pass {
                                weak_pass += 1;
                            }
                            if rec.strict_applicable {
                                strict_applicable += 1;
                                if rec.strict_pass {
                                    strict_pass += 1;
                                }
                            }
                            let mut row = vec![
                                k.to_string(),
                                eq.to_string(),
                                fmt_prob(r[0][0]),
                                fmt_prob(r[0][1]),
                                fmt_prob(r[1][0]),
                                fmt_prob(r[1][1]),
                                fmt_val(gain_gap),
                                rec.weak_pass.to_string(),
                                if rec.strict_applicable {
                                    rec.strict_pass.to_string()
                                } else {
                                    "n/a".to_string()
                                },
                            ];
                            if let Some(rc) = rec.refine_consistent {
                                row.push(rc.to_string());
                            }
                            rows.push(row);
                            report.record(&rec);
                        }
                    }
                }
            }
            let mut headers = vec!["instance", "eq"];
            if family == Family::Cyber {
                headers.extend(["m1(W)", "m1(S)", "m2(W)", "m2(S)"]);
            } else {
                headers.extend(["m1(L)", "m1(H)", "m2(L)", "m2(H)"]);
            }
            headers.extend(["gain gap", "weak", "strict"]);
            if family == Family::Platform {
                headers.push("refine ok");
            }
            report.table(&headers, &rows);
            for row in human {
                report.line(row.join("  "));
            }
            summary.weak_pass = Some(weak_pass);
            summary.strict_applicable = Some(strict_applicable);
            summary.strict_pass = Some(strict_pass);
            summary.verdict = format!(
                "{weak_pass}/{row_count} weak, {strict_pass}/{strict_applicable} strict, {errors} errors"
            );
        }
    }

    report.blank();
    report.line(format!("{}", summary.verdict));
    report.line(format!("elapsed: {:.2}s", started.elapsed().as_secs_f64()));
    summary.rows = Some(row_count);
    summary.errors = Some(errors);
    report.record(&summary);
    CmdResult { report, exit: EXIT_OK }
}

fn parse_overrides(sets: &[String]) -> Result<Vec<(String, f64)>, SchemaError> {
    sets.iter()
        .map(|s| {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| SchemaError(format!("--set {s:?}: expected key=value")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| SchemaError(format!("--set {s:?}: {value:?} is not a number")))?;
            Ok((key.trim().to_string(), value))
        })
        .collect()
}

fn apply_subsidy_overrides(
    sets: &[(String, f64)],
) -> Result<metagame::SubsidyParams, SchemaError> {
    let mut p = metagame::families::subsidy::default_params();
    for (key, value) in sets {
        match key.as_str() {
            "a" => p.a = *value,
            "b" => p.b = *value,
            "gamma" => p.gamma = *value,
            "c_low" => p.c_low = *value,
            "c_high" => p.c_high = *value,
            "q_high" => p.q_high = *value,
            "subsidy" => p.subsidy = *value,
            "price_cap" => p.price_cap = *value,
            "responsive_bonus" => p.responsive_bonus = *value,
            "kappa00" => p.kappa[0][0] = *value,
            "kappa01" => p.kappa[0][1] = *value,
            "kappa10" => p.kappa[1][0] = *value,
            "kappa11" => p.kappa[1][1] = *value,
            _ => {
                return Err(SchemaError(format!(
                    "unknown subsidy key {key:?}; known keys: a b gamma c_low c_high q_high \
                     subsidy price_cap responsive_bonus kappa00 kappa01 kappa10 kappa11"
                )))
            }
        }
    }
    metagame::SubsidyParams::new(
        p.a,
        p.b,
        p.gamma,
        p.c_low,
        p.c_high,
        p.q_high,
        p.subsidy,
        p.kappa,
        p.price_cap,
        p.responsive_bonus,
    )
    .map_err(|e| SchemaError(e.to_string()))
}

fn apply_cyber_overrides(sets: &[(String, f64)]) -> Result<metagame::CyberParams, SchemaError> {
    let mut p = metagame::families::cyber::default_params();
    for (key, value) in sets {
        let (tech, field) = match key.split_once('.') {
            None => match key.as_str() {
                "epsilon" => {
                    p.epsilon = *value;
                    continue;
                }
                "prob_weak" => {
                    p.prob_weak = *value;
                    continue;
                }
                _ => {
                    return Err(SchemaError(format!(
                        "unknown cyber key {key:?}; known keys: epsilon prob_weak \
                         {{legacy|strict|open}}.{{benefit|loss_weak|loss_strong|\
                         cost_a_weak|cost_a_strong|cost_b_weak|cost_b_strong}}"
                    )))
                }
            },
            Some(pair) => pair,
        };
        let tech = match tech {
            "legacy" => &mut p.legacy,
            "strict" => &mut p.strict,
            "open" => &mut p.open,
            _ => return Err(SchemaError(format!("unknown cyber technology {tech:?}"))),
        };
        match field {
            "benefit" => tech.benefit = *value,
            "loss_weak" => tech.loss[0] = *value,
            "loss_strong" => tech.loss[1] = *value,
            "cost_a_weak" => tech.cost[0][0] = *value,
            "cost_a_strong" => tech.cost[0][1] = *value,
            "cost_b_weak" => tech.cost[1][0] = *value,
            "cost_b_strong" => tech.cost[1][1] = *value,
            _ => return Err(SchemaError(format!("unknown cyber field {field:?}"))),
        }
    }
    p.validate().map_err(|e| SchemaError(e.to_string()))?;
    Ok(p)
}

fn apply_platform_overrides(
    sets: &[(String, f64)],
) -> Result<metagame::PlatformParams, SchemaError> {
    let mut p = metagame::families::platform::default_params();
    for (key, value) in sets {
        let (regime, field) = match key.split_once('.') {
            None => {
                match key.as_str() {
                    "beta" => p.beta = *value,
                    "gamma" => p.gamma = *value,
                    "price_cap" => p.price_cap = *value,
                    "grid_points" => p.grid_points = *value as usize,
                    "refine_bound" => p.refine_bound = *value,
                    "prob_high" => p.prob_high = *value,
                    _ => {
                        return Err(SchemaError(format!(
                            "unknown platform key {key:?}; known keys: beta gamma price_cap \
                             grid_points refine_bound prob_high \
                             {{tl|ts|tq}}.{{revenue_share|fixed_cost_low|fixed_cost_high|\
                             intercept_low|intercept_high}}"
                        )))
                    }
                }
                continue;
            }
            Some(pair) => pair,
        };
        let regime = match regime {
            "tl" => &mut p.regimes[0],
            "ts" => &mut p.regimes[1],
            "tq" => &mut p.regimes[2],
            _ => return Err(SchemaError(format!("unknown platform regime {regime:?}"))),
        };
        match field {
            "revenue_share" => regime.revenue_share = *value,
            "fixed_cost_low" => regime.fixed_cost[0] = *value,
            "fixed_cost_high" => regime.fixed_cost[1] = *value,
            "intercept_low" => regime.intercept[0] = *value,
            "intercept_high" => regime.intercept[1] = *value,
            _ => return Err(SchemaError(format!("unknown platform field {field:?}"))),
        }
    }
    p.validate().map_err(|e| SchemaError(e.to_string()))?;
    Ok(p)
}

pub fn cmd_example(family: Family, sets: &[String], seed: u64, tol: f64) -> CmdResult {
    let sets = match parse_overrides(sets) {
        Ok(s) => s,
        Err(e) => return fail("example", e.0, EXIT_SCHEMA),
    };

    let mut report = Report::new();
    report.line(format!("family: {}  tol: {tol:e}", family.as_str()));
    report.blank();

    let mut summary = SummaryRecord::new("example", "", EXIT_OK);
    summary.family = Some(family.as_str().to_string());
    summary.seed = Some(seed);
    summary.tol = Some(tol);

    let build: Result<(MetaGame, Vec<String>), SchemaError> = match family {
        Family::Subsidy => apply_subsidy_overrides(&sets).and_then(|p| {
            metagame::build_subsidy_metagame(&p)
                .map(|mg| (mg, vec!["firm1".to_string(), "firm2".to_string()]))
                .map_err(|e| SchemaError(e.to_string()))
        }),
        Family::Cyber => apply_cyber_overrides(&sets).and_then(|p| {
            metagame::build_cyber_metagame(&p)
                .map(|mg| (mg, vec!["org1".to_string(), "org2".to_string()]))
                .map_err(|e| SchemaError(e.to_string()))
        }),
        Family::Platform => apply_platform_overrides(&sets).and_then(|p| {
            metagame::build_platform_metagame(&p)
                .map(|mg| (mg, vec!["seller1".to_string(), "seller2".to_string()]))
                .map_err(|e| SchemaError(e.to_string()))
        }),
    };
    // rebuild the params a second time for the claim checks; overrides are
    // deterministic so both copies agree
    let (mg, players) = match build {
        Ok(pair) => pair,
        Err(e) => return fail("example", e.0, EXIT_SCHEMA),
    };

    let table = match build_equilibrium_table(&mg, tol, Strictness::Lenient) {
        Ok(t) => t,
        Err(e) => return fail("example", e.to_string(), exit_for_meta(&e)),
    };
    push_within_table(&mut report, &players, &mg, &table);

    let solved = match solve_meta_bne_with_table(&mg, &table, SolveMethod::Enumerate, seed, tol) {
        Ok(s) => s,
        Err(e) => return fail("example", e.to_string(), exit_for_meta(&e)),
    };
    for (k, m) in solved.equilibria.iter().enumerate() {
        let check = match is_meta_bne(&mg, &table, m, tol) {
            Ok(c) => c,
            Err(e) => return fail("example", e.to_string(), exit_for_meta(&e)),
        };
        let (rows, env) = meta_rows(&players, &mg, m);
        report.line(format!(
            "meta-equilibrium {} of {}  (max gain {})",
            k + 1,
            solved.equilibria.len(),
            fmt_val(check.max_gain)
        ));
        push_meta_table(&mut report, &rows, &env);
        report.blank();
        report.record(&MetaProfileRecord {
            record: "meta-profile",
            index: k,
            max_gain: check.max_gain,
            env_gain: check.env_gain,
            rows,
            env,
        });
    }

    let (verdict, pass) = match family {
        Family::Subsidy => {
            let p = apply_subsidy_overrides(&sets).expect("validated above");
            let v = match metagame::check_proposition(&p, &solved.equilibria) {
                Ok(v) => v,
                Err(e) => return fail("example", e.to_string(), exit_for_family(&e)),
            };
            let mut rows = Vec::new();
            for (eq, check) in v.checks.iter().enumerate() {
                report.record(&SubsidyRowRecord {
                    record: "row",
                    instance: 0,
                    equilibrium: eq,
                    redraws: 0,
                    lobby_rates: check.lobby_rates,
                    deltas: check.deltas,
                    monotone: check.monotone[0] && check.monotone[1],
                    delta_monotone: check.delta_monotone[0] && check.delta_monotone[1],
                    pass: check.monotone[0]
                        && check.monotone[1]
                        && check.delta_monotone[0]
                        && check.delta_monotone[1],
                });
                for firm in 0..2 {
                    rows.push(vec![
                        format!("firm{}", firm + 1),
                        fmt_prob(check.lobby_rates[firm][0]),
                        fmt_prob(check.lobby_rates[firm][1]),
                        fmt_val(check.deltas[firm][0]),
                        fmt_val(check.deltas[firm][1]),
                        check.monotone[firm].to_string(),
                    ]);
                }
            }
            report.line("lobbying for the responsive regime, by cost type:");
            report.table(
                &["firm", "m(L)", "m(H)", "delta(L)", "delta(H)", "monotone"],
                &rows,
            );
            report.blank();
            let pass = v.all_monotone && v.all_delta_monotone;
            (
                format!(
                    "low-cost types lobby at least as hard as high-cost types: {}",
                    if pass { "holds" } else { "fails" }
                ),
                pass,
            )
        }
        Family::Cyber => {
            let p = apply_cyber_overrides(&sets).expect("validated above");
            let v = match metagame::check_cyber_claim(&p, &solved.equilibria) {
                Ok(v) => v,
                Err(e) => return fail("example", e.to_string(), exit_for_family(&e)),
            };
            report.line(format!(
                "gain gap {}  weak monotonicity {}  separating {}",
                fmt_val(v.gain_gap),
                v.weak_holds,
                v.separating
            ));
            (
                format!(
                    "weak postures back the strict standard at least as often: {}",
                    if v.holds { "holds" } else { "fails" }
                ),
                v.holds,
            )
        }
        Family::Platform => {
            let p = apply_platform_overrides(&sets).expect("validated above");
            let v = match metagame::check_platform_claim(&p, &solved.equilibria) {
                Ok(v) => v,
                Err(e) => return fail("example", e.to_string(), exit_for_family(&e)),
            };
            report.line(format!(
                "gain gap {}  weak monotonicity {}  separating {}",
                fmt_val(v.gain_gap),
                v.weak_holds,
                v.separating
            ));
            (
                format!(
                    "high-quality sellers back strict governance at least as strongly: {}",
                    if v.holds { "holds" } else { "fails" }
                ),
                v.holds,
            )
        }
    };
    report.line(&verdict);

    let exit = if pass { EXIT_OK } else { 1 };
    summary.equilibria = Some(solved.equilibria.len());
    summary.verdict = verdict;
    summary.exit = exit;
    report.record(&summary);
    CmdResult { report, exit }
}
