//! Duel orchestration, certificate checking, reports and the interactive
//! policy used by the command-line front end.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::adversary::{new_adversary, AdversaryError, AdversaryParams, Emission, Step};
use crate::algorithms::{Builtin, DecisionContext, Policy, PolicyError};
use crate::external::ExternalPolicy;
use crate::mms::{verify_violation, VerifyError};
use crate::model::{violation_threshold, Transcript, Verdict};
use crate::rat::Rat;
use crate::transcript_file::{self, TranscriptFileError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;
pub const EXIT_ANOMALY: i32 = 5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("cannot write transcript to {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgoSelector {
    Builtin(Builtin),
    External { command: String, timeout: Duration },
}

impl AlgoSelector {
    pub fn policy(&self) -> Box<dyn Policy> {
        match self {
            AlgoSelector::Builtin(b) => Box::new(b.policy()),
            AlgoSelector::External { command, timeout } => Box::new(ExternalPolicy::new(command, *timeout)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DuelConfig {
    pub n: usize,
    pub epsilon: Rat,
    pub kappa: Rat,
    pub budget: usize,
    pub algo: AlgoSelector,
    pub eager_check: bool,
    pub out: Option<PathBuf>,
}

impl DuelConfig {
    pub fn params(&self) -> Result<AdversaryParams, AdversaryError> {
        AdversaryParams::new(
            self.n,
            self.epsilon.clone(),
            self.kappa.clone(),
            self.budget,
            self.eager_check,
        )
    }
}

/// Exit status for a finished duel. `None` means the operator quit.
pub fn duel_exit_code(verdict: Option<&Verdict>) -> i32 {
    match verdict {
        Some(Verdict::Violation { .. }) => EXIT_OK,
        Some(Verdict::BudgetExhausted { .. }) => EXIT_BUDGET,
        Some(Verdict::ProtocolFailure { .. }) => EXIT_PROTOCOL,
        Some(Verdict::Anomaly { .. }) => EXIT_ANOMALY,
        None => EXIT_FAILURE,
    }
}

/// Alternates adversary and policy until a verdict is reached.
///
/// Misbehaviour of the policy ends the duel with a protocol failure. The
/// only error returned is an adversary that cannot be built at all.
pub fn run_duel(params: AdversaryParams, policy: &mut dyn Policy) -> Result<Transcript, AdversaryError> {
    let n = params.n;
    let epsilon = params.epsilon.clone();
    let mut state = new_adversary(params, &policy.name())?;

    if let Err(e) = policy.start(n, &epsilon) {
        let verdict = state.abort(e.to_string());
        policy.finish(Some(&verdict));
        return Ok(state.into_transcript());
    }

    loop {
        match state.next_chore() {
            Ok(Emission::Chore(_)) => {}
            Ok(Emission::Finished(_)) => break,
            Err(e) => {
                state.anomaly(e.to_string());
                break;
            }
        }
        let decision = {
            let chore = state.pending().expect("a chore was just emitted");
            let ctx = DecisionContext {
                history: state.transcript(),
                chore,
                adversary: policy.white_box().then_some(&state),
            };
            policy.decide(&ctx)
        };
        let choice = match decision {
            Ok(choice) => choice,
            Err(PolicyError::Aborted) => {
                policy.finish(None);
                return Ok(state.into_transcript());
            }
            Err(e) => {
                state.abort(e.to_string());
                break;
            }
        };
        match state.observe(choice) {
            Ok(Step::Continue) => {}
            Ok(Step::Finished(_)) => break,
            Err(AdversaryError::Protocol(reason)) => {
                state.abort(reason);
                break;
            }
            Err(e) => {
                state.anomaly(e.to_string());
                break;
            }
        }
    }
    policy.finish(state.transcript().verdict.as_ref());
    Ok(state.into_transcript())
}

/// Runs a configured duel and writes its transcript if an output path is set.
pub fn duel(config: &DuelConfig) -> Result<Transcript, HarnessError> {
    let params = config.params()?;
    let mut policy = config.algo.policy();
    let transcript = run_duel(params, policy.as_mut())?;
    if let Some(path) = &config.out {
        transcript_file::save(&transcript, path).map_err(|source| HarnessError::Output {
            path: path.clone(),
            source,
        })?;
    }
    Ok(transcript)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Valid,
    Invalid(String),
    Malformed(String),
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerifyOutcome::Valid => EXIT_OK,
            VerifyOutcome::Invalid(_) => EXIT_FAILURE,
            VerifyOutcome::Malformed(_) => EXIT_MALFORMED,
        }
    }
}

pub fn verify_transcript(transcript: &Transcript) -> VerifyOutcome {
    match &transcript.verdict {
        None => return VerifyOutcome::Malformed("transcript has no verdict record".into()),
        Some(Verdict::Violation { .. }) => {}
        Some(other) => return VerifyOutcome::Invalid(format!("verdict is {}, not a violation", other.kind())),
    }
    match verify_violation(transcript) {
        Ok(true) => VerifyOutcome::Valid,
        Ok(false) => VerifyOutcome::Invalid("recomputed certificate does not match the claim".into()),
        Err(VerifyError::Structural(e)) => VerifyOutcome::Malformed(e.to_string()),
        Err(VerifyError::NoViolation) => VerifyOutcome::Invalid("no violation claimed".into()),
    }
}

pub fn verify_file(path: &Path) -> VerifyOutcome {
    match transcript_file::load(path) {
        Ok(t) => verify_transcript(&t),
        Err(e) => VerifyOutcome::Malformed(e.to_string()),
    }
}

/// Exact value followed by a display-only decimal approximation.
pub fn display_rat(value: &Rat) -> String {
    if value.denom() == &1 {
        value.to_string()
    } else {
        format!("{value} (≈{})", value.to_decimal_string(4))
    }
}

pub fn describe_verdict(verdict: Option<&Verdict>, threshold: &Rat) -> String {
    match verdict {
        Some(Verdict::Violation {
            agent,
            assigned_cost,
            mms_upper,
            ratio,
            ..
        }) => format!(
            "violation by {agent}: assigned cost {}, MMS at most {}, ratio {} >= threshold {}",
            display_rat(assigned_cost),
            display_rat(mms_upper),
            display_rat(ratio),
            display_rat(threshold)
        ),
        Some(Verdict::BudgetExhausted {
            chores_emitted,
            best_certified_ratio,
        }) => format!(
            "budget exhausted after {chores_emitted} chores, best certified ratio {}",
            best_certified_ratio.as_ref().map_or("—".to_string(), display_rat)
        ),
        Some(Verdict::ProtocolFailure { reason }) => format!("protocol failure: {reason}"),
        Some(Verdict::Anomaly { reason }) => format!("anomaly: {reason}"),
        None => "aborted without a verdict".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub source: String,
    pub algo: String,
    pub n: usize,
    pub epsilon: Rat,
    pub chores: usize,
    pub verdict: String,
    pub ratio: Option<Rat>,
    pub threshold: Rat,
}

impl ReportRow {
    pub fn new(source: impl Into<String>, transcript: &Transcript) -> Self {
        let (verdict, ratio) = match &transcript.verdict {
            Some(Verdict::Violation { agent, ratio, .. }) => (format!("violation({agent})"), Some(ratio.clone())),
            Some(Verdict::BudgetExhausted {
                best_certified_ratio, ..
            }) => ("budget_exhausted".to_string(), best_certified_ratio.clone()),
            Some(other) => (other.kind().to_string(), None),
            None => ("none".to_string(), None),
        };
        ReportRow {
            source: source.into(),
            algo: transcript.algo_name.clone(),
            n: transcript.n,
            epsilon: transcript.epsilon.clone(),
            chores: transcript.m(),
            verdict,
            ratio,
            threshold: transcript.threshold(),
        }
    }
}

pub fn report_rows(paths: &[PathBuf]) -> Result<Vec<ReportRow>, (PathBuf, TranscriptFileError)> {
    paths
        .iter()
        .map(|p| {
            transcript_file::load(p)
                .map(|t| ReportRow::new(p.display().to_string(), &t))
                .map_err(|e| (p.clone(), e))
        })
        .collect()
}

/// Plain-text table. Values in parentheses marked ≈ are rounded for display only.
pub fn render_report(rows: &[ReportRow]) -> String {
    let header = [
        "transcript",
        "algo",
        "n",
        "eps",
        "chores",
        "verdict",
        "ratio",
        "threshold",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        table.push(vec![
            row.source.clone(),
            row.algo.clone(),
            row.n.to_string(),
            row.epsilon.to_string(),
            row.chores.to_string(),
            row.verdict.clone(),
            row.ratio.as_ref().map_or("—".to_string(), display_rat),
            display_rat(&row.threshold),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for cells in &table {
        let line: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    let _ = writeln!(out, "(≈ values are decimal approximations for display only)");
    out
}

/// A person at a terminal choosing each assignee.
pub struct HumanPolicy<R, W> {
    input: R,
    output: W,
    n: usize,
    threshold: Rat,
}

impl<R: BufRead, W: Write> HumanPolicy<R, W> {
    pub fn new(input: R, output: W) -> Self {
        HumanPolicy {
            input,
            output,
            n: 0,
            threshold: Rat::zero(),
        }
    }

    pub fn into_output(self) -> W {
        self.output
    }
}

impl<R: BufRead, W: Write> Policy for HumanPolicy<R, W> {
    fn name(&self) -> String {
        "human".to_string()
    }

    fn start(&mut self, n: usize, epsilon: &Rat) -> Result<(), PolicyError> {
        self.n = n;
        self.threshold = violation_threshold(n, epsilon);
        let _ = writeln!(
            self.output,
            "duel with n = {n}, eps = {epsilon}; type an agent number or q to quit"
        );
        Ok(())
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        let _ = writeln!(self.output, "chore {}:", ctx.history.m() + 1);
        for (slot, cost) in ctx.chore.as_slice().iter().enumerate() {
            let _ = writeln!(self.output, "  a_{}: {}", slot + 1, display_rat(cost));
        }
        loop {
            let _ = write!(self.output, "assign to [1-{}]> ", self.n);
            let _ = self.output.flush();
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => return Err(PolicyError::Aborted),
                Ok(_) => {}
            }
            let answer = line.trim();
            if answer.eq_ignore_ascii_case("q") {
                return Err(PolicyError::Aborted);
            }
            match answer.parse::<usize>() {
                Ok(k) if (1..=self.n).contains(&k) => return Ok(k),
                _ => {
                    let _ = writeln!(self.output, "expected a number from 1 to {}", self.n);
                }
            }
        }
    }

    fn finish(&mut self, verdict: Option<&Verdict>) {
        let _ = writeln!(self.output, "{}", describe_verdict(verdict, &self.threshold));
    }
}
