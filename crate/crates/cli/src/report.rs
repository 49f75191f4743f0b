//! Two renderings of one report: aligned tables for people, line-delimited
//! JSON records for machines. Commands append to both as they go; `render`
//! picks one at the end.
//!
//! Machine output must be byte-identical across runs with the same inputs,
//! so records are typed structs (stable field order) and never carry wall
//! times or other ambient state.

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Records,
}

#[derive(Default)]
pub struct Report {
    records: Vec<String>,
    human: String,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn record(&mut self, value: &impl Serialize) {
        self.records.push(serde_json::to_string(value).expect("record structs serialize"));
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        self.human.push_str(text.as_ref());
        self.human.push('\n');
    }

    pub fn blank(&mut self) {
        self.human.push('\n');
    }

    /// Appends a left-aligned table with a dashed rule under the header.
    pub fn table(&mut self, headers: &[&str], rows: &[Vec<String>]) {
        let cols = headers.len();
        let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for row in rows {
            debug_assert_eq!(row.len(), cols);
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut render_row = |cells: &[String]| {
            let mut line = String::new();
            for (k, cell) in cells.iter().enumerate() {
                if k > 0 {
                    line.push_str("  ");
                }
                line.push_str(cell);
                if k + 1 < cols {
                    for _ in cell.len()..widths[k] {
                        line.push(' ');
                    }
                }
            }
            self.human.push_str(line.trim_end());
            self.human.push('\n');
        };
        render_row(&headers.iter().map(|h| h.to_string()).collect::<Vec<_>>());
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        render_row(&rule);
        for row in rows {
            render_row(row);
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.human.clone(),
            Format::Records => {
                let mut out = self.records.join("\n");
                if !out.is_empty() {
                    out.push('\n');
                }
                out
            }
        }
    }
}

pub fn fmt_prob(p: f64) -> String {
    format!("{p:.6}")
}

pub fn fmt_val(v: f64) -> String {
    format!("{v:.6}")
}

/// One (player, type) strategy row, self-describing so downstream readers
/// never need the game file to interpret indices.
#[derive(Serialize)]
pub struct StrategyRow {
    pub player: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub actions: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Serialize)]
pub struct ProfileRecord {
    pub record: &'static str,
    pub index: usize,
    pub max_regret: f64,
    pub rows: Vec<StrategyRow>,
}

#[derive(Serialize)]
pub struct EnvRecord {
    pub moves: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Serialize)]
pub struct MetaProfileRecord {
    pub record: &'static str,
    pub index: usize,
    pub max_gain: f64,
    pub env_gain: f64,
    pub rows: Vec<StrategyRow>,
    pub env: EnvRecord,
}

/// Equilibrium payoffs for one type profile, one value per player.
#[derive(Serialize)]
pub struct ExpostRow {
    pub types: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Serialize)]
pub struct WithinRecord {
    pub record: &'static str,
    pub id: String,
    pub certificate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<StrategyRow>>,
    /// Scalar-action equilibria: one value per (player, type).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<Vec<Vec<f64>>>,
    pub payoffs: Vec<ExpostRow>,
}

#[derive(Serialize)]
pub struct AuditRecord {
    pub record: &'static str,
    pub id: String,
    pub status: String,
    pub equilibria: usize,
    pub skipped_supports: usize,
}

#[derive(Serialize)]
pub struct ErrorRecord {
    pub record: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    pub error: String,
}

#[derive(Serialize)]
pub struct SubsidyRowRecord {
    pub record: &'static str,
    pub instance: usize,
    pub equilibrium: usize,
    pub redraws: usize,
    /// `lobby_rates[firm][type]`, types ordered low cost then high cost.
    pub lobby_rates: [[f64; 2]; 2],
    pub deltas: [[f64; 2]; 2],
    pub monotone: bool,
    pub delta_monotone: bool,
    pub pass: bool,
}

/// Shared row shape for the two technology-standards sweeps.
#[derive(Serialize)]
pub struct StanceRowRecord {
    pub record: &'static str,
    pub instance: usize,
    pub equilibrium: usize,
    /// `strict_rates[player][type]`: probability of the strict stance.
    pub strict_rates: [[f64; 2]; 2],
    pub gain_gap: f64,
    pub weak_pass: bool,
    pub strict_applicable: bool,
    pub strict_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_consistent: Option<bool>,
}

#[derive(Serialize)]
pub struct SummaryRecord {
    pub record: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibria: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_regret: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_pass: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_applicable: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_pass: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<usize>,
    pub verdict: String,
    pub exit: i32,
    pub version: &'static str,
}

impl SummaryRecord {
    pub fn new(command: &'static str, verdict: impl Into<String>, exit: i32) -> Self {
        SummaryRecord {
            record: "summary",
            command,
            file: None,
            family: None,
            method: None,
            seed: None,
            tol: None,
            equilibria: None,
            iterations: None,
            max_regret: None,
            max_gain: None,
            converged: None,
            instances: None,
            rows: None,
            weak_pass: None,
            strict_applicable: None,
            strict_pass: None,
            errors: None,
            verdict: verdict.into(),
            exit,
            version: VERSION,
        }
    }
}
