//! Claim-question corpora: loading, pair expansion, summary statistics and
//! curriculum-ordered training exports.
//!
//! Every corpus is normalized into one line-delimited JSON record format:
//!
//! ```text
//! {"id":"c1","claim":"...","questions":["...","..."],"split":"train","source":"averitec","label":"false"}
//! ```
//!
//! `label` and `language` are optional. Converters in [`formats`] read the
//! published layouts of the individual corpora into the same records.

mod curriculum;
mod formats;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::normalize_whitespace;

pub use curriculum::{
    curriculum_order, manifest_path, curriculum_plan, write_curriculum, CurriculumEntry, CurriculumExport,
    NamedPairs,
};
pub use formats::FormatHint;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Validation(String),
}

/// Gold veracity label attached to a claim. Anything that is not plainly
/// true or false is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GoldLabel {
    True,
    False,
    Other(String),
}

impl GoldLabel {
    pub fn parse(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "true" => Self::True,
            "false" => Self::False,
            _ => Self::Other(raw.trim().to_string()),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Self::True => Some(true),
            Self::False => Some(false),
            Self::Other(_) => None,
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::True => f.write_str("true"),
            Self::False => f.write_str("false"),
            Self::Other(s) => f.write_str(s),
        }
    }
}

impl Serialize for GoldLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GoldLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(|s| Self::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<GoldLabel>,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl Claim {
    /// Builds a claim, rejecting text that is empty after trimming.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DatasetError> {
        let claim = Self {
            id: id.into(),
            text: text.into(),
            gold_label: None,
            source: String::new(),
            language: None,
        };
        claim.validate().map_err(DatasetError::Validation)?;
        Ok(claim)
    }

    pub fn with_label(mut self, label: GoldLabel) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("claim id is empty".into());
        }
        if self.text.trim().is_empty() {
            return Err(format!("claim {} has empty text", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "test" | "dev" | "eval" | "validation" => Ok(Self::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub claim: Claim,
    pub reference_questions: Vec<String>,
    pub split: Split,
}

impl DatasetRecord {
    /// Checks the claim and the question list: every question non-empty and
    /// unique after whitespace normalization.
    pub fn validate(&self) -> Result<(), String> {
        self.claim.validate()?;
        let mut seen = HashSet::new();
        for q in &self.reference_questions {
            let norm = normalize_whitespace(q);
            if norm.is_empty() {
                return Err(format!("claim {} has an empty question", self.claim.id));
            }
            if !seen.insert(norm) {
                return Err(format!(
                    "claim {} repeats the question {q:?}",
                    self.claim.id
                ));
            }
        }
        Ok(())
    }
}

/// One line of the canonical dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalLine {
    id: String,
    claim: String,
    questions: Vec<String>,
    split: Split,
    #[serde(default)]
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<GoldLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<String>,
}

impl From<CanonicalLine> for DatasetRecord {
    fn from(line: CanonicalLine) -> Self {
        Self {
            claim: Claim {
                id: line.id,
                text: line.claim,
                gold_label: line.label,
                source: line.source,
                language: line.language,
            },
            reference_questions: line.questions.iter().map(|q| q.trim().to_string()).collect(),
            split: line.split,
        }
    }
}

impl From<&DatasetRecord> for CanonicalLine {
    fn from(r: &DatasetRecord) -> Self {
        Self {
            id: r.claim.id.clone(),
            claim: r.claim.text.clone(),
            questions: r.reference_questions.clone(),
            split: r.split,
            source: r.claim.source.clone(),
            label: r.claim.gold_label.clone(),
            language: r.claim.language.clone(),
        }
    }
}

/// Serializes one record as a canonical line (no trailing newline).
pub fn to_canonical_line(record: &DatasetRecord) -> String {
    serde_json::to_string(&CanonicalLine::from(record)).expect("canonical record serializes")
}

/// Parses one canonical line. Returns the validation message on failure.
pub fn parse_canonical_line(line: &str) -> Result<DatasetRecord, String> {
    let parsed: CanonicalLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let record = DatasetRecord::from(parsed);
    record.validate()?;
    Ok(record)
}

/// Loads a dataset file in the given layout. Fails on the first malformed
/// line, naming it, and on duplicate claim ids or an empty result.
pub fn load_dataset(path: &Path, format: FormatHint) -> Result<Vec<DatasetRecord>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let records = match format {
        FormatHint::Canonical => read_canonical(path, BufReader::new(file))?,
        other => formats::convert(path, BufReader::new(file), other)?,
    };
    if records.is_empty() {
        return Err(DatasetError::Validation(format!(
            "{} contains no records",
            path.display()
        )));
    }
    Ok(records)
}

fn read_canonical<R: BufRead>(path: &Path, reader: R) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| DatasetError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let record = parse_canonical_line(&line).map_err(parse_err)?;
        if !ids.insert(record.claim.id.clone()) {
            return Err(parse_err(format!("duplicate claim id {:?}", record.claim.id)));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records in the canonical line format.
pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in records {
        writeln!(out, "{}", to_canonical_line(r)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimQuestionPair {
    pub pair_id: String,
    pub claim: Claim,
    pub reference_question: String,
}

/// One pair per (claim, reference question), in dataset order then
/// question order.
pub fn expand_pairs(records: &[DatasetRecord]) -> Vec<ClaimQuestionPair> {
    records
        .iter()
        .flat_map(|r| {
            r.reference_questions
                .iter()
                .enumerate()
                .map(move |(i, q)| ClaimQuestionPair {
                    pair_id: format!("{}#{}", r.claim.id, i),
                    claim: r.claim.clone(),
                    reference_question: q.clone(),
                })
        })
        .collect()
}

/// Expands only the records of one split.
pub fn expand_split(records: &[DatasetRecord], split: Split) -> Vec<ClaimQuestionPair> {
    let subset: Vec<DatasetRecord> = records.iter().filter(|r| r.split == split).cloned().collect();
    expand_pairs(&subset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_claims: usize,
    pub total_questions: usize,
    pub train_size: usize,
    pub test_size: usize,
}

impl DatasetStats {
    pub fn avg_questions(&self) -> f64 {
        self.total_questions as f64 / self.num_claims as f64
    }

    /// Average questions per claim rounded to two decimals, as reported.
    pub fn avg_questions_display(&self) -> String {
        format!("{:.2}", self.avg_questions())
    }

    pub fn total_pairs(&self) -> usize {
        self.train_size + self.test_size
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "claims={} avg_questions={} train={} test={}",
            self.num_claims,
            self.avg_questions_display(),
            self.train_size,
            self.test_size
        )
    }
}

pub fn compute_stats(records: &[DatasetRecord]) -> Result<DatasetStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Validation("no records to summarize".into()));
    }
    let mut stats = DatasetStats {
        num_claims: records.len(),
        total_questions: 0,
        train_size: 0,
        test_size: 0,
    };
    for r in records {
        let n = r.reference_questions.len();
        stats.total_questions += n;
        match r.split {
            Split::Train => stats.train_size += n,
            Split::Test => stats.test_size += n,
        }
    }
    Ok(stats)
}

/// Expected counts shipped next to a dataset file. Any field left out is
/// not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsManifest {
    #[serde(default)]
    pub num_claims: Option<usize>,
    #[serde(default)]
    pub total_questions: Option<usize>,
    /// Two-decimal string, e.g. `"2.50"`.
    #[serde(default)]
    pub avg_questions: Option<String>,
    #[serde(default)]
    pub train_size: Option<usize>,
    #[serde(default)]
    pub test_size: Option<usize>,
}

impl StatsManifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Lists every field whose observed value differs from the manifest.
    pub fn mismatches(&self, observed: &DatasetStats) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, expected: Option<String>, got: String| {
            if let Some(expected) = expected {
                if expected != got {
                    out.push(format!("{name}: manifest {expected}, observed {got}"));
                }
            }
        };
        check("num_claims", self.num_claims.map(|v| v.to_string()), observed.num_claims.to_string());
        check(
            "total_questions",
            self.total_questions.map(|v| v.to_string()),
            observed.total_questions.to_string(),
        );
        check("avg_questions", self.avg_questions.clone(), observed.avg_questions_display());
        check("train_size", self.train_size.map(|v| v.to_string()), observed.train_size.to_string());
        check("test_size", self.test_size.map(|v| v.to_string()), observed.test_size.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::io::Write as _;

    use proptest::prelude::*;

    use super::*;

    fn record(id: &str, qs: &[&str], split: Split) -> DatasetRecord {
        DatasetRecord {
            claim: Claim::new(id, format!("claim {id}")).unwrap(),
            reference_questions: qs.iter().map(|s| s.to_string()).collect(),
            split,
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_lines() {
        let f = write_tmp(concat!(
            r#"{"id":"a","claim":"A claim","questions":["Q1?"],"split":"train","source":"s"}"#,
            "\n",
            r#"{"id":"b","claim":"B claim","questions":["Q2?","Q3?"],"split":"test","source":"s","label":"False"}"#,
            "\n"
        ));
        let records = load_dataset(f.path(), FormatHint::Canonical).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].claim.gold_label, Some(GoldLabel::False));
        assert_eq!(records[1].split, Split::Test);
    }

    #[test]
    fn empty_claim_text_names_line() {
        let f = write_tmp(concat!(
            r#"{"id":"a","claim":"ok","questions":["Q?"],"split":"train"}"#,
            "\n",
            r#"{"id":"b","claim":"   ","questions":["Q?"],"split":"train"}"#,
            "\n"
        ));
        match load_dataset(f.path(), FormatHint::Canonical) {
            Err(DatasetError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("empty text"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_and_duplicate_id_rejected() {
        let f = write_tmp(r#"{"id":"a","claim":"x","questions":[],"split":"train","extra":1}"#);
        assert!(matches!(
            load_dataset(f.path(), FormatHint::Canonical),
            Err(DatasetError::Parse { line: 1, .. })
        ));
        let f = write_tmp(concat!(
            r#"{"id":"a","claim":"x","questions":[],"split":"train"}"#,
            "\n",
            r#"{"id":"a","claim":"y","questions":[],"split":"train"}"#
        ));
        assert!(matches!(
            load_dataset(f.path(), FormatHint::Canonical),
            Err(DatasetError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_questions_after_normalization_rejected() {
        let r = record("a", &["What  is X?", " What is X? "], Split::Train);
        assert!(r.validate().is_err());
        let r = record("a", &["What is X?", "what is X?"], Split::Train);
        assert!(r.validate().is_ok(), "case is significant");
    }

    #[test]
    fn empty_file_and_missing_file() {
        let f = write_tmp("\n\n");
        assert!(matches!(
            load_dataset(f.path(), FormatHint::Canonical),
            Err(DatasetError::Validation(_))
        ));
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.jsonl"), FormatHint::Canonical),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn expansion_examples() {
        let one = vec![record("a", &["q1", "q2", "q3"], Split::Train)];
        assert_eq!(expand_pairs(&one).len(), 3);

        let two = vec![
            record("a", &["a1", "a2"], Split::Train),
            record("b", &["b1"], Split::Test),
        ];
        let pairs = expand_pairs(&two);
        let got: Vec<_> = pairs.iter().map(|p| p.reference_question.as_str()).collect();
        assert_eq!(got, ["a1", "a2", "b1"]);
        assert_eq!(pairs[2].pair_id, "b#0");
        assert!(expand_pairs(&[]).is_empty());
    }

    #[test]
    fn stats_examples() {
        let s = compute_stats(&[record("a", &["q"], Split::Train)]).unwrap();
        assert_eq!((s.num_claims, s.avg_questions_display(), s.train_size, s.test_size), (1, "1.00".into(), 1, 0));
        assert!(compute_stats(&[]).is_err());
    }

    #[test]
    fn manifest_mismatch_listing() {
        let stats = DatasetStats { num_claims: 10, total_questions: 25, train_size: 18, test_size: 7 };
        let ok = StatsManifest {
            num_claims: Some(10),
            avg_questions: Some("2.50".into()),
            ..Default::default()
        };
        assert!(ok.mismatches(&stats).is_empty());
        let bad = StatsManifest { test_size: Some(8), ..ok };
        assert_eq!(bad.mismatches(&stats).len(), 1);
    }

    #[test]
    fn write_then_load_is_identity() {
        let records = vec![
            record("a", &["a1", "a2"], Split::Train),
            DatasetRecord {
                claim: Claim::new("b", "B").unwrap().with_label(GoldLabel::Other("Conflicting".into())),
                reference_questions: vec!["b1".into()],
                split: Split::Test,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &records).unwrap();
        let first = load_dataset(&path, FormatHint::Canonical).unwrap();
        let second = load_dataset(&path, FormatHint::Canonical).unwrap();
        assert_eq!(first, records);
        assert_eq!(first, second);
    }

    fn arb_records() -> impl Strategy<Value = Vec<DatasetRecord>> {
        prop::collection::vec((prop::collection::btree_set("[a-z]{1,6}", 0..5), any::<bool>()), 0..8).prop_map(
            |items| {
                items
                    .into_iter()
                    .enumerate()
                    .map(|(i, (qs, train))| DatasetRecord {
                        claim: Claim::new(format!("c{i}"), format!("claim {i}")).unwrap(),
                        reference_questions: qs.into_iter().collect(),
                        split: if train { Split::Train } else { Split::Test },
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn grouping_pairs_reconstructs_questions(records in arb_records()) {
            let pairs = expand_pairs(&records);
            let mut grouped: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for p in &pairs {
                grouped.entry(p.claim.id.clone()).or_default().push(p.reference_question.clone());
            }
            for r in &records {
                let got = grouped.remove(&r.claim.id).unwrap_or_default();
                prop_assert_eq!(&got, &r.reference_questions);
            }
            prop_assert!(grouped.is_empty());
        }

        #[test]
        fn stats_pair_totals_match_expansion(records in arb_records()) {
            prop_assume!(!records.is_empty());
            let stats = compute_stats(&records).unwrap();
            prop_assert_eq!(stats.total_pairs(), expand_pairs(&records).len());
            prop_assert_eq!(stats.total_questions, stats.total_pairs());
        }
    }
}
