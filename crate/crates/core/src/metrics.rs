//! Success rate, SPL, ask-rate, the ask taxonomy and per-class uncertainty
//! change, computed from episode logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, ActionClass, EpisodeLog, FeedbackVariant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    Empty,
    #[error("episode {index} has no reachable shortest path")]
    Unreachable { index: usize },
    #[error("episode {index} carries no seen/unseen split tags")]
    Untagged { index: usize },
}

pub fn success_rate(logs: &[EpisodeLog]) -> Result<f64, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let wins = logs.iter().filter(|l| l.summary.success()).count();
    Ok(100.0 * wins as f64 / logs.len() as f64)
}

/// Path length actually taken: every primitive action except the final Stop.
pub fn path_taken(log: &EpisodeLog) -> usize {
    log.steps.iter().filter(|s| s.action != Action::Stop).count()
}

/// `S * l / max(p, l)` for one episode; an optimal zero-length success scores 1.
pub fn spl_term(success: bool, shortest: u32, taken: usize) -> f64 {
    if !success {
        return 0.0;
    }
    let l = shortest as f64;
    let denom = l.max(taken as f64);
    if denom == 0.0 {
        1.0
    } else {
        l / denom
    }
}

pub fn spl(logs: &[EpisodeLog]) -> Result<f64, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (index, log) in logs.iter().enumerate() {
        let l = log.summary.shortest_path_len.ok_or(MetricsError::Unreachable { index })?;
        total += spl_term(log.summary.success(), l, path_taken(log));
    }
    Ok(100.0 * total / logs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyParams {
    pub gamma: f64,
    pub vapid_fraction: f64,
}

impl Default for TaxonomyParams {
    fn default() -> Self {
        TaxonomyParams { gamma: 2.0, vapid_fraction: 0.10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AskTaxonomy {
    pub total_actions: usize,
    pub total_asks: usize,
    pub consecutive_asks: usize,
    pub vapid_asks: usize,
    pub insignificant_asks: usize,
    pub params: TaxonomyParams,
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

impl AskTaxonomy {
    pub fn ask_rate(&self) -> Option<f64> {
        pct(self.total_asks, self.total_actions)
    }

    pub fn consecutive_pct(&self) -> Option<f64> {
        pct(self.consecutive_asks, self.total_asks)
    }

    pub fn vapid_pct(&self) -> Option<f64> {
        pct(self.vapid_asks, self.total_asks)
    }

    pub fn insignificant_pct(&self) -> Option<f64> {
        pct(self.insignificant_asks, self.total_asks)
    }
}

/// Counts asks and the three overlapping ask categories. Percentages use
/// the pooled ask count of all episodes as denominator.
pub fn ask_stats(logs: &[EpisodeLog], params: &TaxonomyParams) -> AskTaxonomy {
    let mut tax = AskTaxonomy {
        total_actions: 0,
        total_asks: 0,
        consecutive_asks: 0,
        vapid_asks: 0,
        insignificant_asks: 0,
        params: *params,
    };
    for log in logs {
        let lambda0 = log.summary.lambda_0;
        let mut prev_lambda = lambda0;
        let mut prev_ask = false;
        for step in &log.steps {
            tax.total_actions += 1;
            let ask = step.action == Action::Ask;
            if ask {
                tax.total_asks += 1;
                if prev_ask {
                    tax.consecutive_asks += 1;
                }
                if prev_lambda < params.vapid_fraction * lambda0 {
                    tax.vapid_asks += 1;
                }
                if step.delta_lambda < params.gamma {
                    tax.insignificant_asks += 1;
                }
            }
            prev_ask = ask;
            prev_lambda = step.lambda;
        }
    }
    tax
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLambdaStats {
    /// `None` when no step of the class was taken.
    pub nav_mean: Option<f64>,
    pub ask_mean: Option<f64>,
    pub nav_steps: usize,
    pub ask_steps: usize,
}

pub fn delta_lambda_stats(logs: &[EpisodeLog]) -> DeltaLambdaStats {
    let (mut nav, mut ask) = ((0.0, 0usize), (0.0, 0usize));
    for step in logs.iter().flat_map(|l| &l.steps) {
        let acc = match step.action_class {
            ActionClass::Nav => &mut nav,
            ActionClass::Ask => &mut ask,
            ActionClass::Terminal => continue,
        };
        acc.0 += step.delta_lambda;
        acc.1 += 1;
    }
    let mean = |(sum, n): (f64, usize)| (n > 0).then(|| sum / n as f64);
    DeltaLambdaStats { nav_mean: mean(nav), ask_mean: mean(ask), nav_steps: nav.1, ask_steps: ask.1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    BothSeen,
    UnseenScenes,
    UnseenObjects,
    BothUnseen,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::BothSeen, Split::UnseenScenes, Split::UnseenObjects, Split::BothUnseen];

    pub fn of(scene_seen: bool, object_seen: bool) -> Split {
        match (scene_seen, object_seen) {
            (true, true) => Split::BothSeen,
            (false, true) => Split::UnseenScenes,
            (true, false) => Split::UnseenObjects,
            (false, false) => Split::BothUnseen,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Split::BothSeen => "Both Seen",
            Split::UnseenScenes => "Unseen Scenes",
            Split::UnseenObjects => "Unseen Objects",
            Split::BothUnseen => "Both Unseen",
        }
    }
}

pub fn split_of(log: &EpisodeLog, index: usize) -> Result<Split, MetricsError> {
    match (log.summary.scene_seen, log.summary.object_seen) {
        (Some(s), Some(o)) => Ok(Split::of(s, o)),
        _ => Err(MetricsError::Untagged { index }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub split: Split,
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub ask_rate: Option<f64>,
    pub taxonomy: AskTaxonomy,
    pub consecutive_pct: Option<f64>,
    pub vapid_pct: Option<f64>,
    pub insignificant_pct: Option<f64>,
    pub delta_lambda: DeltaLambdaStats,
}

/// Report over the logs of one split; `Ok(None)` marks an empty split.
pub fn aggregate_report(
    logs: &[EpisodeLog],
    split: Split,
    params: &TaxonomyParams,
) -> Result<Option<Report>, MetricsError> {
    let mut picked = Vec::new();
    for (i, log) in logs.iter().enumerate() {
        if split_of(log, i)? == split {
            picked.push(log.clone());
        }
    }
    if picked.is_empty() {
        return Ok(None);
    }
    let taxonomy = ask_stats(&picked, params);
    Ok(Some(Report {
        split,
        episodes: picked.len(),
        sr: success_rate(&picked)?,
        spl: spl(&picked)?,
        ask_rate: taxonomy.ask_rate(),
        consecutive_pct: taxonomy.consecutive_pct(),
        vapid_pct: taxonomy.vapid_pct(),
        insignificant_pct: taxonomy.insignificant_pct(),
        taxonomy,
        delta_lambda: delta_lambda_stats(&picked),
    }))
}

/// One evaluated setup: who acted, with which feedback, teacher on or off.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub agent: String,
    pub feedback: FeedbackVariant,
    pub teacher_present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub key: RowKey,
    pub episodes: usize,
    /// One entry per split in [`Split::ALL`] order.
    pub splits: Vec<Option<Report>>,
    pub delta_lambda: DeltaLambdaStats,
    pub taxonomy: AskTaxonomy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub params: TaxonomyParams,
    pub rows: Vec<RowReport>,
}

/// Groups logs by setup and reports every split of every group.
pub fn analyze(logs: &[EpisodeLog], params: &TaxonomyParams) -> Result<Analysis, MetricsError> {
    let mut groups: BTreeMap<RowKey, Vec<EpisodeLog>> = BTreeMap::new();
    for (i, log) in logs.iter().enumerate() {
        split_of(log, i)?;
        let key = RowKey {
            agent: log.summary.agent.clone().unwrap_or_else(|| "unknown".into()),
            feedback: log.summary.feedback,
            teacher_present: log.summary.teacher_present,
        };
        groups.entry(key).or_default().push(log.clone());
    }
    let mut rows = Vec::new();
    for (key, group) in groups {
        let splits = Split::ALL.iter().map(|s| aggregate_report(&group, *s, params)).collect::<Result<Vec<_>, _>>()?;
        rows.push(RowReport {
            key,
            episodes: group.len(),
            splits,
            delta_lambda: delta_lambda_stats(&group),
            taxonomy: ask_stats(&group, params),
        });
    }
    Ok(Analysis { params: *params, rows })
}

pub const EMPTY_MARKER: &str = "(empty)";
pub const ABSENT_MARKER: &str = "-";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| ABSENT_MARKER.to_string(), |x| format!("{x:.1}"))
}

fn render_table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(&format!("{cell:<w$}", w = widths[i]));
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header));
    let rule: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
    let _ = writeln!(out, "{}", "-".repeat(rule));
    for row in rows {
        let _ = writeln!(out, "{}", line(row));
    }
    out.push('\n');
}

fn row_label(key: &RowKey) -> Vec<String> {
    vec![
        key.agent.clone(),
        key.feedback.name().to_string(),
        if key.teacher_present { "present".into() } else { "absent".into() },
    ]
}

/// The three aligned tables: success, uncertainty change, ask taxonomy.
pub fn render_analysis(analysis: &Analysis) -> String {
    let mut out = String::new();
    let base = ["agent", "feedback", "teacher"].map(String::from).to_vec();

    let mut header = base.clone();
    for s in Split::ALL {
        header.push(format!("{} SR", s.label()));
        header.push(format!("{} SPL", s.label()));
    }
    let rows: Vec<Vec<String>> = analysis
        .rows
        .iter()
        .map(|r| {
            let mut cells = row_label(&r.key);
            for cell in &r.splits {
                match cell {
                    Some(rep) => {
                        cells.push(format!("{:.1}", rep.sr));
                        cells.push(format!("{:.1}", rep.spl));
                    }
                    None => {
                        cells.push(EMPTY_MARKER.into());
                        cells.push(EMPTY_MARKER.into());
                    }
                }
            }
            cells
        })
        .collect();
    render_table(&mut out, "Table 1. Success rate and SPL (%) by split", &header, &rows);

    let mut header = base.clone();
    header.extend(["nav steps", "nav mean dlambda", "ask steps", "ask mean dlambda"].map(String::from));
    let rows: Vec<Vec<String>> = analysis
        .rows
        .iter()
        .map(|r| {
            let mut cells = row_label(&r.key);
            let d = &r.delta_lambda;
            cells.push(d.nav_steps.to_string());
            cells.push(num(d.nav_mean));
            cells.push(d.ask_steps.to_string());
            cells.push(num(d.ask_mean));
            cells
        })
        .collect();
    render_table(&mut out, "Table 2. Mean decrease of lambda per action class", &header, &rows);

    let mut header = base;
    header.extend(["asks", "ask rate %", "consecutive %", "vapid %", "insignificant %"].map(String::from));
    let rows: Vec<Vec<String>> = analysis
        .rows
        .iter()
        .map(|r| {
            let mut cells = row_label(&r.key);
            let t = &r.taxonomy;
            cells.push(t.total_asks.to_string());
            cells.push(num(t.ask_rate()));
            cells.push(num(t.consecutive_pct()));
            cells.push(num(t.vapid_pct()));
            cells.push(num(t.insignificant_pct()));
            cells
        })
        .collect();
    let title = format!(
        "Table 3. Ask taxonomy (gamma={}, vapid_fraction={})",
        analysis.params.gamma, analysis.params.vapid_fraction
    );
    render_table(&mut out, &title, &header, &rows);
    out
}

/// Machine-readable form of the analysis as one JSON object.
pub fn summary_json(analysis: &Analysis) -> String {
    serde_json::to_string(analysis).expect("analysis serializes")
}
