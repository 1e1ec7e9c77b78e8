//! Task corpora stored as JSONL.
//!
//! A corpus file holds one JSON record per line. Plain-text records carry a
//! `text` field; multiple-choice records carry `context`, `choices`, and a
//! `gold` index. The two kinds may be mixed in one file and are told apart by
//! field presence.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer;

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    /// Plain text, used for activation profiling.
    Text { text: String },
    /// A multiple-choice item, used for evaluation. Profiling treats it as
    /// the context followed by the gold choice.
    MultipleChoice {
        context: String,
        choices: Vec<String>,
        gold: usize,
    },
}

/// A named set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCorpus {
    pub task_id: String,
    pub split: String,
    pub records: Vec<Record>,
}

impl TaskCorpus {
    /// Creates a corpus on the default `train` split and validates it.
    pub fn new(task_id: impl Into<String>, records: Vec<Record>) -> Result<Self> {
        let corpus = TaskCorpus {
            task_id: task_id.into(),
            split: "train".to_string(),
            records,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Non-empty id and records, non-empty texts, and in-range gold indices.
    pub fn validate(&self) -> Result<()> {
        if self.task_id.is_empty() {
            return Err(Error::Input("corpus task_id must not be empty".into()));
        }
        if self.records.is_empty() {
            return Err(Error::Input(format!(
                "corpus {} contains no records",
                self.task_id
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            match r {
                Record::Text { text } => {
                    if text.is_empty() {
                        return Err(Error::Input(format!(
                            "record {i} of corpus {} has empty text",
                            self.task_id
                        )));
                    }
                }
                Record::MultipleChoice {
                    context,
                    choices,
                    gold,
                } => {
                    if context.is_empty() {
                        return Err(Error::Input(format!(
                            "record {i} of corpus {} has an empty context",
                            self.task_id
                        )));
                    }
                    if choices.len() < 2 {
                        return Err(Error::Input(format!(
                            "record {i} of corpus {} needs at least two choices",
                            self.task_id
                        )));
                    }
                    if choices.iter().any(String::is_empty) {
                        return Err(Error::Input(format!(
                            "record {i} of corpus {} has an empty choice",
                            self.task_id
                        )));
                    }
                    if *gold >= choices.len() {
                        return Err(Error::Input(format!(
                            "record {i} of corpus {}: gold index {gold} out of range for {} choices",
                            self.task_id,
                            choices.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Byte-token sequences for profiling: the text of plain records, or
    /// context followed by the gold choice for multiple-choice records.
    #[must_use]
    pub fn token_sequences(&self) -> Vec<Vec<u32>> {
        self.records
            .iter()
            .map(|r| match r {
                Record::Text { text } => tokenizer::tokenize(text),
                Record::MultipleChoice {
                    context,
                    choices,
                    gold,
                } => {
                    let mut toks = tokenizer::tokenize(context);
                    toks.extend(tokenizer::tokenize(&choices[*gold]));
                    toks
                }
            })
            .collect()
    }
}

/// Loads a JSONL corpus. The task id is the file stem and the split defaults
/// to `train`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<TaskCorpus> {
    let path = path.as_ref();
    let task_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let file = fs::File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!(
                "{} line {}: not a corpus record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        records.push(record);
    }
    let corpus = TaskCorpus {
        task_id,
        split: "train".to_string(),
        records,
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Writes a corpus as JSONL, one compact record per line.
pub fn save_corpus(path: impl AsRef<Path>, corpus: &TaskCorpus) -> Result<()> {
    corpus.validate()?;
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    for record in &corpus.records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
