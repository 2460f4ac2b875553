//! Combined training exports ordered smallest-dataset-first.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{to_canonical_line, ClaimQuestionPair, DatasetError, DatasetRecord, Split};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedPairs {
    pub name: String,
    pub pairs: Vec<ClaimQuestionPair>,
}

/// Manifest line for one dataset in the export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumEntry {
    pub position: usize,
    pub name: String,
    pub pair_count: usize,
    /// Index of the dataset's first pair in the concatenated export.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurriculumExport {
    pub pairs: Vec<ClaimQuestionPair>,
    pub manifest: Vec<CurriculumEntry>,
}

/// Orders datasets by ascending pair count. Equal counts keep input order.
pub fn curriculum_plan(sizes: &[(&str, usize)]) -> Result<Vec<CurriculumEntry>, DatasetError> {
    let mut seen = HashSet::new();
    for (name, _) in sizes {
        if !seen.insert(*name) {
            return Err(DatasetError::Validation(format!(
                "dataset name {name:?} appears more than once"
            )));
        }
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| sizes[i].1);
    let mut offset = 0;
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(position, i)| {
            let entry = CurriculumEntry {
                position,
                name: sizes[i].0.to_string(),
                pair_count: sizes[i].1,
                offset,
            };
            offset += sizes[i].1;
            entry
        })
        .collect())
}

pub fn curriculum_order(collections: Vec<NamedPairs>) -> Result<CurriculumExport, DatasetError> {
    let sizes: Vec<(&str, usize)> = collections
        .iter()
        .map(|c| (c.name.as_str(), c.pairs.len()))
        .collect();
    let manifest = curriculum_plan(&sizes)?;
    let mut by_name: Vec<Option<NamedPairs>> = collections.into_iter().map(Some).collect();
    let mut pairs = Vec::with_capacity(manifest.iter().map(|e| e.pair_count).sum());
    for entry in &manifest {
        let slot = by_name
            .iter_mut()
            .find(|c| c.as_ref().is_some_and(|c| c.name == entry.name))
            .expect("manifest built from these collections");
        pairs.extend(slot.take().expect("each name used once").pairs);
    }
    Ok(CurriculumExport { pairs, manifest })
}

/// Path of the manifest written next to an export file.
pub fn manifest_path(export: &Path) -> PathBuf {
    let mut name = export.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    export.with_file_name(name)
}

/// Writes the export as canonical records (one pair per line, split
/// `train`) plus the manifest. Returns the manifest path.
pub fn write_curriculum(export: &CurriculumExport, out: &Path) -> Result<PathBuf, DatasetError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    let mut w = BufWriter::new(File::create(out).map_err(io_err(out))?);
    for pair in &export.pairs {
        let mut claim = pair.claim.clone();
        claim.id = pair.pair_id.clone();
        let record = DatasetRecord {
            claim,
            reference_questions: vec![pair.reference_question.clone()],
            split: Split::Train,
        };
        writeln!(w, "{}", to_canonical_line(&record)).map_err(io_err(out))?;
    }
    w.flush().map_err(io_err(out))?;

    let mpath = manifest_path(out);
    let body = serde_json::to_string_pretty(&export.manifest).expect("manifest serializes");
    std::fs::write(&mpath, body + "\n").map_err(io_err(&mpath))?;
    Ok(mpath)
}
