//! Synthetic claim-question datasets produced by a generation backend.
//!
//! Output is appended to a canonical dataset file; a journal next to it
//! records every claim that was processed so an interrupted run can resume.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{generate_questions, Backend, GenerationError, PromptTemplate};
use crate::datasets::{parse_canonical_line, to_canonical_line, Claim, DatasetError, DatasetRecord, Split};
use crate::text::fnv1a64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Samples requested per claim.
    pub questions_per_claim: usize,
    /// Share of claims assigned to the test split, by a hash of the claim id.
    pub test_fraction: f64,
    /// Claims generated concurrently. Output order is still claim order.
    pub parallelism: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            questions_per_claim: 3,
            test_fraction: 0.2,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum JournalStatus {
    Written,
    Null,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JournalEntry {
    claim_id: String,
    status: JournalStatus,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub written: usize,
    /// Claims whose every sample was non-conforming.
    pub null_claims: Vec<String>,
    /// Claims whose backend call failed; retried on the next run.
    pub failed_claims: Vec<(String, String)>,
    /// Claims skipped because an earlier run already handled them.
    pub resumed: usize,
    pub journal: PathBuf,
    pub skip_report: PathBuf,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn journal_path(out: &Path) -> PathBuf {
    sibling(out, ".journal.jsonl")
}

pub fn skip_report_path(out: &Path) -> PathBuf {
    sibling(out, ".skipped.jsonl")
}

fn assign_split(claim_id: &str, test_fraction: f64) -> Split {
    let bucket = (fnv1a64(claim_id.as_bytes()) % 10_000) as f64 / 10_000.0;
    if bucket < test_fraction {
        Split::Test
    } else {
        Split::Train
    }
}

/// Ids already handled by a previous run: every record in the output file
/// plus every journaled null. Failed claims are retried.
fn processed_ids(out: &Path) -> Result<HashSet<String>, DatasetError> {
    let mut done = HashSet::new();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    if out.exists() {
        let reader = BufReader::new(File::open(out).map_err(io_err(out))?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err(out))?;
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_canonical_line(&line).map_err(|message| DatasetError::Parse {
                path: out.to_path_buf(),
                line: idx + 1,
                message,
            })?;
            done.insert(record.claim.id);
        }
    }
    let journal = journal_path(out);
    if journal.exists() {
        let reader = BufReader::new(File::open(&journal).map_err(io_err(&journal))?);
        for line in reader.lines() {
            let line = line.map_err(io_err(&journal))?;
            // a torn final line from a crash is ignored
            if let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) {
                if entry.status == JournalStatus::Null {
                    done.insert(entry.claim_id);
                }
            }
        }
    }
    Ok(done)
}

/// Generates questions for each claim and appends one canonical record per
/// claim with a non-null generation to `out`. Null and failed claims are
/// listed in the skip report; provider failures do not stop the run.
pub async fn synthesize_dataset(
    claims: &[Claim],
    backend: &Backend,
    template: &PromptTemplate,
    options: &SynthesisOptions,
    out: &Path,
) -> Result<SynthesisReport, DatasetError> {
    if claims.is_empty() {
        return Err(DatasetError::Validation("no claims to synthesize from".into()));
    }
    if options.questions_per_claim == 0 || !(0.0..=1.0).contains(&options.test_fraction) {
        return Err(DatasetError::Validation(format!("invalid synthesis options {options:?}")));
    }
    let done = processed_ids(out)?;
    let pending: Vec<&Claim> = claims.iter().filter(|c| !done.contains(&c.id)).collect();

    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    let append = |path: &Path| OpenOptions::new().create(true).append(true).open(path);
    let mut data = append(out).map_err(io_err(out))?;
    let journal = journal_path(out);
    let mut journal_file = append(&journal).map_err(io_err(&journal))?;

    let mut report = SynthesisReport {
        resumed: claims.len() - pending.len(),
        journal: journal.clone(),
        skip_report: skip_report_path(out),
        ..Default::default()
    };

    let mut results = stream::iter(pending)
        .map(|claim| async move {
            (claim, generate_questions(claim, backend, template, options.questions_per_claim).await)
        })
        .buffered(options.parallelism.max(1));

    while let Some((claim, result)) = results.next().await {
        let entry = match result {
            Ok(set) if !set.is_null() => {
                let record = DatasetRecord {
                    claim: claim.clone().with_source(if claim.source.is_empty() {
                        backend.id().to_string()
                    } else {
                        claim.source.clone()
                    }),
                    reference_questions: set.questions().to_vec(),
                    split: assign_split(&claim.id, options.test_fraction),
                };
                writeln!(data, "{}", to_canonical_line(&record)).map_err(io_err(out))?;
                data.flush().map_err(io_err(out))?;
                report.written += 1;
                JournalEntry {
                    claim_id: claim.id.clone(),
                    status: JournalStatus::Written,
                    detail: String::new(),
                }
            }
            Ok(set) => {
                report.null_claims.push(claim.id.clone());
                JournalEntry {
                    claim_id: claim.id.clone(),
                    status: JournalStatus::Null,
                    detail: set.raw_responses.join("\n---\n"),
                }
            }
            Err(e @ (GenerationError::Provider { .. } | GenerationError::Validation(_))) => {
                report.failed_claims.push((claim.id.clone(), e.to_string()));
                JournalEntry {
                    claim_id: claim.id.clone(),
                    status: JournalStatus::Error,
                    detail: e.to_string(),
                }
            }
        };
        let line = serde_json::to_string(&entry).expect("journal entry serializes");
        writeln!(journal_file, "{line}").map_err(io_err(&journal))?;
        journal_file.flush().map_err(io_err(&journal))?;
    }

    write_skip_report(&journal, &report.skip_report)?;
    Ok(report)
}

/// Rewrites the skip report from the journal: the latest status of every
/// claim that is currently null or failed.
fn write_skip_report(journal: &Path, target: &Path) -> Result<(), DatasetError> {
    let text = std::fs::read_to_string(journal).map_err(|source| DatasetError::Io {
        path: journal.to_path_buf(),
        source,
    })?;
    let mut latest: Vec<JournalEntry> = Vec::new();
    for line in text.lines() {
        if let Ok(entry) = serde_json::from_str::<JournalEntry>(line) {
            latest.retain(|e| e.claim_id != entry.claim_id);
            latest.push(entry);
        }
    }
    let mut body = String::new();
    for e in latest.iter().filter(|e| e.status != JournalStatus::Written) {
        body.push_str(&serde_json::to_string(e).expect("journal entry serializes"));
        body.push('\n');
    }
    std::fs::write(target, body).map_err(|source| DatasetError::Io {
        path: target.to_path_buf(),
        source,
    })
}
