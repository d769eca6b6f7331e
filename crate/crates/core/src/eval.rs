//! Categorized query cases, judging, and accuracy reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assistant::{Assistant, Session};
use crate::corpus::PantryCorpus;
use crate::model::{Day, GroundedResponse, IdRequirement, PantryRecord, ResponseKind};

pub const LABEL_COUNTIES: &str = "Retrieving counties";
pub const LABEL_ID: &str = "ID constraint errors";
pub const LABEL_HOURS: &str = "Hours constraint errors";
pub const LABEL_NEEDS_CLARIFICATION: &str = "Needs clarification";
pub const LABEL_UNEXPECTED_CLARIFICATION: &str = "Unexpected clarification";
pub const LABEL_MISSED: &str = "Missed gold pantries";
pub const LABEL_HALLUCINATED: &str = "Hallucinated pantry";
pub const NO_ERRORS: &str = "No errors";
pub const UNDEFINED_ACCURACY: &str = "—";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading cases {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("case file line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("case `{case_id}`: {reason}")]
    Invalid { case_id: String, reason: String },
    #[error("duplicate case id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    OnlyLocation,
    LocationHours,
    LocationId,
    AmbiguousLocation,
    RecallExact,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::OnlyLocation,
        Category::LocationHours,
        Category::LocationId,
        Category::AmbiguousLocation,
        Category::RecallExact,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Category::OnlyLocation => "Only location",
            Category::LocationHours => "Location + hours",
            Category::LocationId => "Location + ID requirement",
            Category::AmbiguousLocation => "Ambiguous location",
            Category::RecallExact => "Recall-based exact search",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Expectation {
    ExpectClarification,
    ExpectPantries {
        gold_ids: Vec<String>,
        #[serde(default)]
        require_all: bool,
    },
}

/// The hard constraint a case's answers must respect, stated by the case
/// author rather than re-derived from the query text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConstraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub county: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<Day>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_id: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub case_id: String,
    pub query: String,
    pub category: Category,
    pub expectation: Expectation,
    #[serde(default)]
    pub constraint: CaseConstraint,
}

impl EvalCase {
    pub fn check(&self) -> Result<(), EvalError> {
        let bad = |reason: &str| EvalError::Invalid { case_id: self.case_id.clone(), reason: reason.into() };
        match (&self.expectation, self.category) {
            (Expectation::ExpectClarification, Category::AmbiguousLocation) => Ok(()),
            (Expectation::ExpectClarification, _) => Err(bad("only ambiguous-location cases expect clarification")),
            (Expectation::ExpectPantries { .. }, Category::AmbiguousLocation) => {
                Err(bad("ambiguous-location cases must expect clarification"))
            }
            (Expectation::ExpectPantries { gold_ids, .. }, _) if gold_ids.is_empty() => Err(bad("empty gold set")),
            _ => Ok(()),
        }
    }
}

pub fn parse_cases(jsonl: &str) -> Result<Vec<EvalCase>, EvalError> {
    let mut cases = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: EvalCase =
            serde_json::from_str(line).map_err(|source| EvalError::Malformed { line: i + 1, source })?;
        case.check()?;
        if !seen.insert(case.case_id.clone()) {
            return Err(EvalError::DuplicateId(case.case_id));
        }
        cases.push(case);
    }
    Ok(cases)
}

pub fn load_cases(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_cases(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    pub failure_label: Option<String>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict { correct: true, failure_label: None }
    }

    fn fail(label: &str) -> Self {
        Verdict { correct: false, failure_label: Some(label.to_string()) }
    }
}

fn eq_fold(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

fn violation_label(c: &CaseConstraint, r: &PantryRecord) -> Option<&'static str> {
    let region_ok = c.county.as_deref().is_none_or(|v| eq_fold(v, &r.county))
        && c.city.as_deref().is_none_or(|v| eq_fold(v, &r.city))
        && c.zip.as_deref().is_none_or(|v| eq_fold(v, &r.zip));
    if !region_ok {
        return Some(LABEL_COUNTIES);
    }
    if let Some(day) = c.day {
        if r.hours.is_known() && !r.hours.open_on(day) {
            return Some(LABEL_HOURS);
        }
    }
    if c.no_id && r.id_requirement == IdRequirement::Required {
        return Some(LABEL_ID);
    }
    None
}

/// Total and deterministic. Checks run in a fixed order and the first failure
/// names the label.
pub fn judge(case: &EvalCase, response: &GroundedResponse, dataset: &HashMap<&str, &PantryRecord>) -> Verdict {
    match &case.expectation {
        Expectation::ExpectClarification => {
            if response.kind == ResponseKind::Clarification {
                Verdict::pass()
            } else {
                Verdict::fail(LABEL_NEEDS_CLARIFICATION)
            }
        }
        Expectation::ExpectPantries { gold_ids, require_all } => {
            if response.kind == ResponseKind::Clarification {
                return Verdict::fail(LABEL_UNEXPECTED_CLARIFICATION);
            }
            let mut cited = Vec::with_capacity(response.cited_ids.len());
            for id in &response.cited_ids {
                match dataset.get(id.as_str()) {
                    Some(r) => cited.push(*r),
                    None => return Verdict::fail(LABEL_HALLUCINATED),
                }
            }
            if let Some(label) = cited.iter().find_map(|r| violation_label(&case.constraint, r)) {
                return Verdict::fail(label);
            }
            let hit_any = gold_ids.iter().any(|g| response.cited_ids.contains(g));
            let hit_all = gold_ids.iter().all(|g| response.cited_ids.contains(g));
            if !hit_any || (*require_all && !hit_all) {
                return Verdict::fail(LABEL_MISSED);
            }
            Verdict::pass()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub category: Category,
    pub query: String,
    pub correct: bool,
    pub failure_label: Option<String>,
    #[serde(default)]
    pub kind: Option<ResponseKind>,
    #[serde(default)]
    pub cited_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub example: String,
    pub count: usize,
    pub correct: usize,
    /// Rounded half-up to two decimals; `None` when count is zero.
    pub accuracy: Option<String>,
    pub failure_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<CategoryRow>,
    pub overall: Totals,
    pub cases: Vec<CaseResult>,
}

/// `correct / count` rounded half-up to two decimals, computed exactly in
/// integers.
pub fn format_accuracy(correct: usize, count: usize) -> Option<String> {
    if count == 0 {
        return None;
    }
    let hundredths = (correct as u128 * 200 + count as u128) / (count as u128 * 2);
    Some(format!("{}.{:02}", hundredths / 100, hundredths % 100))
}

fn modal_label<'a>(labels: impl Iterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // BTreeMap iterates in key order, so max_by_key's last-wins rule is
    // countered by reversing: ties go to the smallest label
    counts
        .into_iter()
        .rev()
        .max_by_key(|(_, n)| *n)
        .map(|(l, _)| l.to_string())
        .unwrap_or_else(|| NO_ERRORS.to_string())
}

/// Folds judged results, ordered by case id, into per-category rows.
pub fn aggregate(results: &[CaseResult]) -> EvalReport {
    let mut cases = results.to_vec();
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let mut rows = Vec::new();
    for category in Category::ALL {
        let in_cat: Vec<&CaseResult> = cases.iter().filter(|c| c.category == category).collect();
        if in_cat.is_empty() {
            continue;
        }
        let correct = in_cat.iter().filter(|c| c.correct).count();
        rows.push(CategoryRow {
            category,
            example: in_cat[0].query.clone(),
            count: in_cat.len(),
            correct,
            accuracy: format_accuracy(correct, in_cat.len()),
            failure_note: modal_label(in_cat.iter().filter(|c| !c.correct).filter_map(|c| c.failure_label.as_deref())),
        });
    }
    let count = rows.iter().map(|r| r.count).sum();
    let correct = rows.iter().map(|r| r.correct).sum();
    EvalReport {
        rows,
        overall: Totals { count, correct, accuracy: format_accuracy(correct, count) },
        cases,
    }
}

/// Answers one case in a fresh session.
pub trait SystemUnderTest {
    fn respond(&self, case: &EvalCase) -> GroundedResponse;
}

pub struct AssistantUnderTest<'a> {
    pub assistant: &'a Assistant,
    pub corpus: &'a PantryCorpus,
}

impl SystemUnderTest for AssistantUnderTest<'_> {
    fn respond(&self, case: &EvalCase) -> GroundedResponse {
        let mut session = Session::new(format!("eval-{}", case.case_id), chrono::Utc::now());
        match self.assistant.handle_turn(&mut session, &case.query, self.corpus) {
            Ok(out) => out.response,
            Err(e) => {
                log::error!("case {} failed to run: {e}", case.case_id);
                GroundedResponse {
                    kind: ResponseKind::Answer,
                    text: format!("error: {e}"),
                    cited_ids: Vec::new(),
                    grounding_violations: Vec::new(),
                    session_id: session.session_id,
                }
            }
        }
    }
}

pub fn run_eval(cases: &[EvalCase], sut: &dyn SystemUnderTest, dataset: &[PantryRecord]) -> EvalReport {
    let by_id: HashMap<&str, &PantryRecord> = dataset.iter().map(|r| (r.id.as_str(), r)).collect();
    let results: Vec<CaseResult> = cases
        .iter()
        .map(|case| {
            let response = sut.respond(case);
            let verdict = judge(case, &response, &by_id);
            CaseResult {
                case_id: case.case_id.clone(),
                category: case.category,
                query: case.query.clone(),
                correct: verdict.correct,
                failure_label: verdict.failure_label,
                kind: Some(response.kind),
                cited_ids: response.cited_ids,
            }
        })
        .collect();
    aggregate(&results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}` (expected text, csv or json)")),
        }
    }
}

pub const COLUMNS: [&str; 6] = ["Type of User Query", "Example", "# Queries", "Correct", "Accuracy", "Failure Notes"];

fn table_rows(report: &EvalReport) -> Vec<[String; 6]> {
    let acc = |a: &Option<String>| a.clone().unwrap_or_else(|| UNDEFINED_ACCURACY.to_string());
    let mut out: Vec<[String; 6]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.category.display_name().to_string(),
                r.example.clone(),
                r.count.to_string(),
                r.correct.to_string(),
                acc(&r.accuracy),
                r.failure_note.clone(),
            ]
        })
        .collect();
    out.push([
        "Total".to_string(),
        String::new(),
        report.overall.count.to_string(),
        report.overall.correct.to_string(),
        acc(&report.overall.accuracy),
        String::new(),
    ]);
    out
}

fn render_text(report: &EvalReport) -> String {
    let rows = table_rows(report);
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.chars().count()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let numeric = [false, false, true, true, true, false];
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .zip(numeric)
            .map(|((c, &w), right)| if right { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    let mut out = vec![line(&header), rule.clone()];
    let (total, body) = rows.split_last().expect("total row always present");
    out.extend(body.iter().map(|r| line(r)));
    out.push(rule);
    out.push(line(total));

    let failures: Vec<&CaseResult> = report.cases.iter().filter(|c| !c.correct).collect();
    if !failures.is_empty() {
        out.push(String::new());
        out.push("Failed cases:".to_string());
        for c in failures {
            out.push(format!(
                "  {} [{}] {}: {}",
                c.case_id,
                c.category.display_name(),
                c.failure_label.as_deref().unwrap_or("?"),
                c.query
            ));
        }
    }
    out.join("\n") + "\n"
}

fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory csv write");
    for row in table_rows(report) {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    }
}
