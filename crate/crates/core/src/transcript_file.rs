//! Line-delimited JSON transcripts.
//!
//! ```text
//! {"type":"header","n":2,"epsilon":"1/4","kappa":"1","algo":"all-to-one"}
//! {"type":"chore","index":1,"costs":["16/289","4"],"assigned":2}
//! {"type":"chore","index":2,"costs":["16/17","4"],"assigned":2}
//! {"type":"violation","agent":2,"assigned_cost":"8","mms_upper":"4","ratio":"2","witness":[[1],[2]]}
//! ```
//!
//! Chore and witness indices are 1-based. Every number is a canonical
//! rational string, so saving a loaded transcript reproduces it byte for byte.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChoreCosts, Partition, Transcript, Verdict};
use crate::rat::Rat;

#[derive(Debug, Error)]
pub enum TranscriptFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn malformed(line: usize, message: impl Into<String>) -> TranscriptFileError {
    TranscriptFileError::Malformed {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        n: usize,
        epsilon: Rat,
        kappa: Rat,
        algo: String,
    },
    Chore {
        index: usize,
        costs: Vec<Rat>,
        assigned: usize,
    },
}

enum Line {
    Record(Record),
    Verdict(VerdictRecord),
}

fn parse_line(text: &str) -> Result<Line, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("type").and_then(|t| t.as_str()) {
        Some("header" | "chore") => serde_json::from_value(value).map(Line::Record),
        _ => serde_json::from_value(value).map(Line::Verdict),
    }
}

/// The serialized form of a [`Verdict`], shared with the wire protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerdictRecord {
    Violation {
        agent: usize,
        assigned_cost: Rat,
        mms_upper: Rat,
        ratio: Rat,
        witness: Vec<Vec<usize>>,
    },
    BudgetExhausted {
        chores_emitted: usize,
        best_certified_ratio: Option<Rat>,
    },
    ProtocolFailure {
        reason: String,
    },
    Anomaly {
        reason: String,
    },
}

impl From<&Verdict> for VerdictRecord {
    fn from(verdict: &Verdict) -> Self {
        match verdict {
            Verdict::Violation {
                agent,
                assigned_cost,
                witness,
                mms_upper,
                ratio,
            } => VerdictRecord::Violation {
                agent: agent.index(),
                assigned_cost: assigned_cost.clone(),
                mms_upper: mms_upper.clone(),
                ratio: ratio.clone(),
                witness: witness
                    .bundles
                    .iter()
                    .map(|b| b.iter().map(|i| i + 1).collect())
                    .collect(),
            },
            Verdict::BudgetExhausted {
                chores_emitted,
                best_certified_ratio,
            } => VerdictRecord::BudgetExhausted {
                chores_emitted: *chores_emitted,
                best_certified_ratio: best_certified_ratio.clone(),
            },
            Verdict::ProtocolFailure { reason } => VerdictRecord::ProtocolFailure { reason: reason.clone() },
            Verdict::Anomaly { reason } => VerdictRecord::Anomaly { reason: reason.clone() },
        }
    }
}

impl VerdictRecord {
    fn into_verdict(self, transcript: &Transcript, line: usize) -> Result<Verdict, TranscriptFileError> {
        Ok(match self {
            VerdictRecord::Violation {
                agent,
                assigned_cost,
                mms_upper,
                ratio,
                witness,
            } => {
                let agent = transcript.agent(agent).map_err(|e| malformed(line, e.to_string()))?;
                let bundles = witness
                    .into_iter()
                    .map(|bundle| {
                        bundle
                            .into_iter()
                            .map(|i| i.checked_sub(1).ok_or_else(|| malformed(line, "witness index 0")))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Verdict::Violation {
                    agent,
                    assigned_cost,
                    witness: Partition::new(bundles),
                    mms_upper,
                    ratio,
                }
            }
            VerdictRecord::BudgetExhausted {
                chores_emitted,
                best_certified_ratio,
            } => Verdict::BudgetExhausted {
                chores_emitted,
                best_certified_ratio,
            },
            VerdictRecord::ProtocolFailure { reason } => Verdict::ProtocolFailure { reason },
            VerdictRecord::Anomaly { reason } => Verdict::Anomaly { reason },
        })
    }
}

fn to_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("transcript records always serialize")
}

pub fn write_transcript<W: Write>(transcript: &Transcript, mut out: W) -> io::Result<()> {
    let header = Record::Header {
        n: transcript.n,
        epsilon: transcript.epsilon.clone(),
        kappa: transcript.kappa.clone(),
        algo: transcript.algo_name.clone(),
    };
    writeln!(out, "{}", to_line(&header))?;
    for (i, event) in transcript.events().iter().enumerate() {
        let record = Record::Chore {
            index: i + 1,
            costs: event.chore.as_slice().to_vec(),
            assigned: event.assignee.index(),
        };
        writeln!(out, "{}", to_line(&record))?;
    }
    if let Some(verdict) = &transcript.verdict {
        writeln!(out, "{}", to_line(&VerdictRecord::from(verdict)))?;
    }
    out.flush()
}

pub fn transcript_to_string(transcript: &Transcript) -> String {
    let mut buf = Vec::new();
    write_transcript(transcript, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn save(transcript: &Transcript, path: &Path) -> io::Result<()> {
    let file = fs::File::create(path)?;
    write_transcript(transcript, io::BufWriter::new(file))
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Transcript, TranscriptFileError> {
    let mut transcript: Option<Transcript> = None;
    let mut finished = false;
    for (number, line) in input.lines().enumerate() {
        let line_no = number + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if finished {
            return Err(malformed(line_no, "record after the verdict"));
        }
        let parsed = parse_line(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        match (parsed, transcript.as_mut()) {
            (
                Line::Record(Record::Header {
                    n,
                    epsilon,
                    kappa,
                    algo,
                }),
                None,
            ) => {
                transcript =
                    Some(Transcript::new(n, epsilon, kappa, algo).map_err(|e| malformed(line_no, e.to_string()))?);
            }
            (Line::Record(Record::Header { .. }), Some(_)) => return Err(malformed(line_no, "duplicate header")),
            (_, None) => return Err(malformed(line_no, "missing header")),
            (Line::Record(Record::Chore { index, costs, assigned }), Some(t)) => {
                if index != t.m() + 1 {
                    return Err(malformed(
                        line_no,
                        format!("chore index {index}, expected {}", t.m() + 1),
                    ));
                }
                let assignee = t.agent(assigned).map_err(|e| malformed(line_no, e.to_string()))?;
                t.push(ChoreCosts::new(costs), assignee)
                    .map_err(|e| malformed(line_no, e.to_string()))?;
            }
            (Line::Verdict(record), Some(t)) => {
                t.verdict = Some(record.into_verdict(t, line_no)?);
                finished = true;
            }
        }
    }
    transcript.ok_or_else(|| malformed(0, "empty transcript"))
}

pub fn transcript_from_str(text: &str) -> Result<Transcript, TranscriptFileError> {
    read_transcript(text.as_bytes())
}

pub fn load(path: &Path) -> Result<Transcript, TranscriptFileError> {
    read_transcript(BufReader::new(fs::File::open(path)?))
}
