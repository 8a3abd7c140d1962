//! Paper corpus: records, loading and validation, ground-truth selection.

mod stats;
mod text;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use stats::{compute_stats, CorpusStats, LengthSummary};
pub use text::{
    clean_abstract, clean_caption, strip_caption_tags, strip_special_tokens, whitespace_tokens,
    SpecialTokenMode, TextError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaType {
    Original,
    Reuse,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubfigureRecord {
    pub subfigure_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRecord {
    pub figure_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub subfigures: Vec<SubfigureRecord>,
    #[serde(default)]
    pub is_ga_component: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaRecord {
    pub ga_figure_id: String,
    pub ga_type: GaType,
    #[serde(default)]
    pub component_figure_ids: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub primary_category: String,
    pub split: Split,
    #[serde(default)]
    pub figures: Vec<FigureRecord>,
    #[serde(default)]
    pub ga: Option<GaRecord>,
    #[serde(default)]
    pub teaser_figure_id: Option<String>,
    /// Fields the toolkit does not model (authors, sections, ...), kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PaperRecord {
    pub fn figure(&self, figure_id: &str) -> Option<&FigureRecord> {
        self.figures.iter().find(|f| f.figure_id == figure_id)
    }

    pub fn has_figure(&self, figure_id: &str) -> bool {
        self.figure(figure_id).is_some()
    }
}

/// Which figures count as ground truth for a paper.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GtPolicy {
    #[default]
    GaOnly,
    Components,
    TeaserFallback,
}

impl FromStr for GtPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ga-only" => Ok(GtPolicy::GaOnly),
            "components" => Ok(GtPolicy::Components),
            "teaser-fallback" => Ok(GtPolicy::TeaserFallback),
            other => Err(format!("unknown ground-truth policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("paper `{0}` has no ground truth under the selected policy")]
pub struct NoGroundTruth(pub String);

/// Ground-truth figure ids for `paper`; never empty.
pub fn ground_truth_set(
    paper: &PaperRecord,
    policy: GtPolicy,
) -> Result<BTreeSet<String>, NoGroundTruth> {
    let missing = || NoGroundTruth(paper.paper_id.clone());
    let set: BTreeSet<String> = match (policy, &paper.ga) {
        (GtPolicy::GaOnly, Some(ga)) => [ga.ga_figure_id.clone()].into(),
        (GtPolicy::Components, Some(ga)) if !ga.component_figure_ids.is_empty() => {
            ga.component_figure_ids.iter().cloned().collect()
        }
        (GtPolicy::Components, Some(ga)) => [ga.ga_figure_id.clone()].into(),
        (GtPolicy::TeaserFallback, Some(ga)) => [ga.ga_figure_id.clone()].into(),
        (GtPolicy::TeaserFallback, None) => match &paper.teaser_figure_id {
            Some(t) => [t.clone()].into(),
            None => return Err(missing()),
        },
        (_, None) => return Err(missing()),
    };
    Ok(set)
}

/// One problem found while loading, located by line (JSONL) or record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub line: usize,
    pub paper_id: Option<String>,
    pub kind: IssueKind,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}", self.line)?;
        if let Some(id) = &self.paper_id {
            write!(f, " (`{id}`)")?;
        }
        write!(f, ": {}", self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IssueKind {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("empty paper_id")]
    EmptyPaperId,
    #[error("unknown split value `{0}`")]
    UnknownSplit(String),
    #[error("duplicate paper_id `{0}`")]
    DuplicatePaperId(String),
    #[error("duplicate figure_id `{0}`")]
    DuplicateFigureId(String),
    #[error("figure `{figure}`: duplicate subfigure_id `{subfigure}`")]
    DuplicateSubfigureId { figure: String, subfigure: String },
    #[error("ga references nonexistent figure `{0}`")]
    GaUnknownFigure(String),
    #[error("ga_type Reuse needs exactly one component figure, found {0}")]
    ReuseComponentCount(usize),
    #[error("teaser_figure_id references nonexistent figure `{0}`")]
    TeaserUnknownFigure(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} invalid record(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Issue>),
}

impl CorpusError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            CorpusError::Invalid(v) => v,
            CorpusError::Io(_) => &[],
        }
    }
}

/// Immutable, validated collection of papers ordered by `paper_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Accepts newline-delimited records, a JSON array of records, or a JSON
    /// object mapping paper ids to records.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut issues = Vec::new();
        let mut papers = Vec::new();
        for (line, value) in split_records(text, &mut issues) {
            match decode_record(value) {
                Ok(p) => papers.push((line, p)),
                Err((paper_id, kind)) => issues.push(Issue {
                    line,
                    paper_id,
                    kind,
                }),
            }
        }
        let mut seen = HashSet::new();
        let mut valid = Vec::with_capacity(papers.len());
        for (line, paper) in papers {
            let problems = validate(&paper);
            let dup = !seen.insert(paper.paper_id.clone());
            if dup {
                issues.push(Issue {
                    line,
                    paper_id: Some(paper.paper_id.clone()),
                    kind: IssueKind::DuplicatePaperId(paper.paper_id.clone()),
                });
            }
            issues.extend(problems.into_iter().map(|kind| Issue {
                line,
                paper_id: Some(paper.paper_id.clone()),
                kind,
            }));
            valid.push(paper);
        }
        if !issues.is_empty() {
            issues.sort_by_key(|i| i.line);
            return Err(CorpusError::Invalid(issues));
        }
        Ok(Self::from_validated(valid))
    }

    /// Builds a corpus from in-memory records, applying the same validation
    /// as [`Corpus::parse`].
    pub fn from_records(records: Vec<PaperRecord>) -> Result<Self, CorpusError> {
        let mut issues = Vec::new();
        let mut seen = HashSet::new();
        for (i, paper) in records.iter().enumerate() {
            let mut kinds = validate(paper);
            if !seen.insert(paper.paper_id.as_str()) {
                kinds.insert(0, IssueKind::DuplicatePaperId(paper.paper_id.clone()));
            }
            issues.extend(kinds.into_iter().map(|kind| Issue {
                line: i + 1,
                paper_id: Some(paper.paper_id.clone()),
                kind,
            }));
        }
        if !issues.is_empty() {
            return Err(CorpusError::Invalid(issues));
        }
        Ok(Self::from_validated(records))
    }

    fn from_validated(mut papers: Vec<PaperRecord>) -> Self {
        papers.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        let index = papers
            .iter()
            .enumerate()
            .map(|(i, p)| (p.paper_id.clone(), i))
            .collect();
        Self { papers, index }
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, paper_id: &str) -> Option<&PaperRecord> {
        self.index.get(paper_id).map(|&i| &self.papers[i])
    }

    /// All papers in canonical (`paper_id`) order.
    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &PaperRecord> {
        self.papers.iter().filter(move |p| p.split == split)
    }

    /// Canonical newline-delimited form; re-ingesting it is a fixed point.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.papers {
            out.push_str(&serde_json::to_string(p).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

fn split_records(text: &str, issues: &mut Vec<Issue>) -> Vec<(usize, Value)> {
    let trimmed = text.trim_start_matches('\u{feff}').trim();
    if trimmed.starts_with('[') {
        return match serde_json::from_str::<Vec<Value>>(trimmed) {
            Ok(items) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i + 1, v))
                .collect(),
            Err(e) => {
                issues.push(Issue {
                    line: e.line(),
                    paper_id: None,
                    kind: IssueKind::Parse(e.to_string()),
                });
                Vec::new()
            }
        };
    }
    if trimmed.starts_with('{') {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(trimmed) {
            let keyed = !map.contains_key("paper_id")
                && !map.is_empty()
                && map.values().all(Value::is_object);
            if keyed {
                return map
                    .into_iter()
                    .enumerate()
                    .map(|(i, (id, mut v))| {
                        if let Value::Object(obj) = &mut v {
                            obj.entry("paper_id").or_insert(Value::String(id));
                        }
                        (i + 1, v)
                    })
                    .collect();
            }
        }
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(v) => out.push((i + 1, v)),
            Err(e) => issues.push(Issue {
                line: i + 1,
                paper_id: None,
                kind: IssueKind::Parse(e.to_string()),
            }),
        }
    }
    out
}

fn decode_record(value: Value) -> Result<PaperRecord, (Option<String>, IssueKind)> {
    let paper_id = value
        .get("paper_id")
        .and_then(Value::as_str)
        .map(str::to_owned);
    if let Some(split) = value.get("split") {
        let ok = split.as_str().is_some_and(|s| s.parse::<Split>().is_ok());
        if !ok {
            let shown = split
                .as_str()
                .map(str::to_owned)
                .unwrap_or_else(|| split.to_string());
            return Err((paper_id, IssueKind::UnknownSplit(shown)));
        }
    }
    serde_json::from_value::<PaperRecord>(value)
        .map_err(|e| (paper_id, IssueKind::Parse(e.to_string())))
}

fn validate(paper: &PaperRecord) -> Vec<IssueKind> {
    let mut out = Vec::new();
    if paper.paper_id.is_empty() {
        out.push(IssueKind::EmptyPaperId);
    }
    let mut figure_ids = HashSet::new();
    for fig in &paper.figures {
        if !figure_ids.insert(fig.figure_id.as_str()) {
            out.push(IssueKind::DuplicateFigureId(fig.figure_id.clone()));
        }
        let mut subs = HashSet::new();
        for sub in &fig.subfigures {
            if !subs.insert(sub.subfigure_id.as_str()) {
                out.push(IssueKind::DuplicateSubfigureId {
                    figure: fig.figure_id.clone(),
                    subfigure: sub.subfigure_id.clone(),
                });
            }
        }
    }
    if let Some(ga) = &paper.ga {
        if !figure_ids.contains(ga.ga_figure_id.as_str()) {
            out.push(IssueKind::GaUnknownFigure(ga.ga_figure_id.clone()));
        }
        for c in &ga.component_figure_ids {
            if !figure_ids.contains(c.as_str()) {
                out.push(IssueKind::GaUnknownFigure(c.clone()));
            }
        }
        if ga.ga_type == GaType::Reuse && ga.component_figure_ids.len() != 1 {
            out.push(IssueKind::ReuseComponentCount(
                ga.component_figure_ids.len(),
            ));
        }
    }
    if let Some(t) = &paper.teaser_figure_id {
        if !figure_ids.contains(t.as_str()) {
            out.push(IssueKind::TeaserUnknownFigure(t.clone()));
        }
    }
    out
}
