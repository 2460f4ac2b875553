//! Converters from the published layouts of the individual corpora into
//! canonical records.
//!
//! The converters are lenient about field names (the corpora have shipped
//! several revisions) but strict about content: a record without claim text
//! is an error naming its line or array index. Repeated questions within one
//! claim are dropped after whitespace normalization.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Claim, DatasetError, DatasetRecord, GoldLabel, Split};
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatHint {
    /// The crate's own line-delimited record format.
    Canonical,
    /// JSON array (or JSON lines) of objects with `claim`, `label` and
    /// `questions: [{"question": ..., "answers": [...]}]`.
    Averitec,
    /// JSON lines with `example_id`, `claim`, `label` and either
    /// `questions` or `annotations[].questions`.
    ClaimDecomp,
    /// JSON lines with `claim` and `questions` (strings or objects with a
    /// `question` field).
    QaBriefs,
    /// JSON lines, one claim-question pair per line.
    FavIq,
}

impl FormatHint {
    pub const ALL: [FormatHint; 5] = [
        Self::Canonical,
        Self::Averitec,
        Self::ClaimDecomp,
        Self::QaBriefs,
        Self::FavIq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Canonical => "canonical",
            Self::Averitec => "averitec",
            Self::ClaimDecomp => "claimdecomp",
            Self::QaBriefs => "qabriefs",
            Self::FavIq => "faviq",
        }
    }
}

impl FromStr for FormatHint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| format!("unknown dataset format {s:?}"))
    }
}

pub(super) fn convert<R: BufRead>(
    path: &Path,
    mut reader: R,
    format: FormatHint,
) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file_split = split_from_file_name(path);
    let source = format.name();

    let items = json_items(path, &text)?;
    let mut records = Vec::with_capacity(items.len());
    let mut ids = HashSet::new();
    for (line, value) in items {
        let err = |message: String| DatasetError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let obj = value
            .as_object()
            .ok_or_else(|| err("expected a JSON object".into()))?;

        let text = first_str(obj, &["claim", "claim_text", "text"])
            .ok_or_else(|| err("missing claim text".into()))?;
        let id = first_scalar(obj, &["id", "example_id", "claim_id", "uid"])
            .unwrap_or_else(|| format!("{source}-{line}"));
        let split = match first_str(obj, &["split"]) {
            Some(s) => Split::from_str(&s).map_err(err)?,
            None => file_split.ok_or_else(|| {
                err("no split field and the file name does not mention train/dev/test".into())
            })?,
        };
        let label = first_str(obj, &["label", "gold_label", "verdict"]).map(|l| map_label(format, &l));

        let mut questions = Vec::new();
        match format {
            FormatHint::ClaimDecomp => {
                collect_questions(obj.get("questions"), &mut questions);
                if let Some(Value::Array(annotations)) = obj.get("annotations") {
                    for a in annotations {
                        collect_questions(a.get("questions"), &mut questions);
                    }
                }
            }
            FormatHint::FavIq => {
                collect_questions(obj.get("question"), &mut questions);
                collect_questions(obj.get("questions"), &mut questions);
            }
            _ => {
                collect_questions(obj.get("questions"), &mut questions);
                collect_questions(obj.get("qa_pairs"), &mut questions);
            }
        }

        let claim = Claim {
            id,
            text: text.trim().to_string(),
            gold_label: label,
            source: source.to_string(),
            language: first_str(obj, &["language", "lang"]),
        };
        let record = DatasetRecord {
            claim,
            reference_questions: dedup_questions(questions),
            split,
        };
        record.validate().map_err(err)?;
        if !ids.insert(record.claim.id.clone()) {
            return Err(err(format!("duplicate claim id {:?}", record.claim.id)));
        }
        records.push(record);
    }
    Ok(records)
}

/// Returns (line-or-index, value) for either a top-level JSON array or
/// line-delimited objects. Array entries are numbered from 1.
fn json_items(path: &Path, text: &str) -> Result<Vec<(usize, Value)>, DatasetError> {
    if text.trim_start().starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        return Ok(values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect());
    }
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

fn split_from_file_name(path: &Path) -> Option<Split> {
    let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
    if name.contains("train") {
        Some(Split::Train)
    } else if name.contains("dev") || name.contains("test") || name.contains("valid") {
        Some(Split::Test)
    } else {
        None
    }
}

fn map_label(format: FormatHint, raw: &str) -> GoldLabel {
    let lower = raw.trim().to_ascii_lowercase();
    match (format, lower.as_str()) {
        (FormatHint::Averitec, "supported") => GoldLabel::True,
        (FormatHint::Averitec, "refuted") => GoldLabel::False,
        (FormatHint::ClaimDecomp, "true" | "mostly-true") => GoldLabel::True,
        (FormatHint::ClaimDecomp, "false" | "pants-fire" | "barely-true") => GoldLabel::False,
        (FormatHint::FavIq, "supports" | "support") => GoldLabel::True,
        (FormatHint::FavIq, "refutes" | "refute") => GoldLabel::False,
        _ => GoldLabel::parse(raw),
    }
}

fn first_str(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| obj.get(*k)?.as_str().map(str::to_string))
}

fn first_scalar(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match obj.get(*k)? {
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn collect_questions(value: Option<&Value>, out: &mut Vec<String>) {
    match value {
        Some(Value::String(s)) => out.push(s.clone()),
        Some(Value::Array(items)) => {
            for item in items {
                match item {
                    Value::String(s) => out.push(s.clone()),
                    Value::Object(o) => {
                        if let Some(Value::String(s)) = o.get("question") {
                            out.push(s.clone());
                        }
                    }
                    _ => {}
                }
            }
        }
        _ => {}
    }
}

fn dedup_questions(questions: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    questions
        .into_iter()
        .map(|q| q.trim().to_string())
        .filter(|q| !q.is_empty() && seen.insert(normalize_whitespace(q)))
        .collect()
}
