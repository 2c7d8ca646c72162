//! Instances, transcripts, partitions and verdicts.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("agent index {index} out of range 1..={n}")]
    AgentOutOfRange { index: usize, n: usize },
    #[error("chore index {index} out of range (m = {m})")]
    ChoreOutOfRange { index: usize, m: usize },
    #[error("cost vector has {got} entries, expected {expected}")]
    CostLength { got: usize, expected: usize },
    #[error("partition has {got} bundles, expected {expected}")]
    BundleCount { got: usize, expected: usize },
    #[error("partition is not an exact cover of {m} chores: {detail}")]
    NotACover { m: usize, detail: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// 1-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(usize);

impl AgentId {
    pub fn new(index: usize, n: usize) -> Result<Self, ModelError> {
        if index == 0 || index > n {
            return Err(ModelError::AgentOutOfRange { index, n });
        }
        Ok(AgentId(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// Position in per-agent vectors.
    pub fn slot(self) -> usize {
        self.0 - 1
    }

    pub(crate) fn from_slot(slot: usize) -> Self {
        AgentId(slot + 1)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a_{}", self.0)
    }
}

/// One chore's cost for every agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChoreCosts(Vec<Rat>);

impl ChoreCosts {
    pub fn new(costs: Vec<Rat>) -> Self {
        ChoreCosts(costs)
    }

    pub fn cost(&self, agent: AgentId) -> &Rat {
        &self.0[agent.slot()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Rat] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub chore: ChoreCosts,
    pub assignee: AgentId,
}

/// `n` bundles of 0-based chore indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub bundles: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(bundles: Vec<Vec<usize>>) -> Self {
        Partition { bundles }
    }

    /// Checks that the bundles are pairwise disjoint and cover `0..m` exactly.
    pub fn validate_cover(&self, m: usize) -> Result<(), ModelError> {
        let mut seen = vec![false; m];
        for &index in self.bundles.iter().flatten() {
            if index >= m {
                return Err(ModelError::NotACover {
                    m,
                    detail: format!("index {} out of range", index + 1),
                });
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(ModelError::NotACover {
                    m,
                    detail: format!("chore {} appears twice", index + 1),
                });
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(ModelError::NotACover {
                m,
                detail: format!("chore {} is missing", missing + 1),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Violation {
        agent: AgentId,
        assigned_cost: Rat,
        witness: Partition,
        mms_upper: Rat,
        ratio: Rat,
    },
    BudgetExhausted {
        chores_emitted: usize,
        best_certified_ratio: Option<Rat>,
    },
    /// The algorithm broke the interaction contract (bad reply, crash, timeout).
    ProtocolFailure { reason: String },
    /// The adversary could not certify a claim it should have; an implementation bug.
    Anomaly { reason: String },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Violation { .. } => "violation",
            Verdict::BudgetExhausted { .. } => "budget_exhausted",
            Verdict::ProtocolFailure { .. } => "protocol_failure",
            Verdict::Anomaly { .. } => "anomaly",
        }
    }
}

/// A duel record: parameters, every chore with its irrevocable assignment, and the outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub n: usize,
    pub epsilon: Rat,
    pub kappa: Rat,
    pub algo_name: String,
    events: Vec<Event>,
    pub verdict: Option<Verdict>,
}

impl Transcript {
    pub fn new(n: usize, epsilon: Rat, kappa: Rat, algo_name: impl Into<String>) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Parameter("n must be at least 1".into()));
        }
        if epsilon.is_zero() || epsilon >= Rat::one() {
            return Err(ModelError::Parameter(format!("epsilon {epsilon} not in (0,1)")));
        }
        if kappa.is_zero() {
            return Err(ModelError::Parameter("kappa must be positive".into()));
        }
        Ok(Transcript {
            n,
            epsilon,
            kappa,
            algo_name: algo_name.into(),
            events: Vec::new(),
            verdict: None,
        })
    }

    /// Appends one arrival and its assignment. Earlier events are never touched.
    pub fn push(&mut self, chore: ChoreCosts, assignee: AgentId) -> Result<(), ModelError> {
        if chore.len() != self.n {
            return Err(ModelError::CostLength {
                got: chore.len(),
                expected: self.n,
            });
        }
        AgentId::new(assignee.index(), self.n)?;
        self.events.push(Event { chore, assignee });
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn m(&self) -> usize {
        self.events.len()
    }

    pub fn agent(&self, index: usize) -> Result<AgentId, ModelError> {
        AgentId::new(index, self.n)
    }

    pub fn agents(&self) -> impl DoubleEndedIterator<Item = AgentId> {
        (0..self.n).map(AgentId::from_slot)
    }

    /// The agent's cost for every arrived chore, in arrival order.
    pub fn costs_for(&self, agent: AgentId) -> Vec<Rat> {
        self.events.iter().map(|e| e.chore.cost(agent).clone()).collect()
    }

    /// `(1 - epsilon) * n`, the ratio a violation must reach.
    pub fn threshold(&self) -> Rat {
        violation_threshold(self.n, &self.epsilon)
    }

    /// Test hook for corruption scenarios.
    #[doc(hidden)]
    pub fn events_mut(&mut self) -> &mut Vec<Event> {
        &mut self.events
    }
}

pub fn violation_threshold(n: usize, epsilon: &Rat) -> Rat {
    let one_minus = Rat::one().checked_sub(epsilon).unwrap_or_else(Rat::zero);
    &one_minus * &Rat::from_integer(n as u64)
}

/// Additive cost of a set of chores for one agent.
pub fn bundle_cost(transcript: &Transcript, agent: AgentId, indices: &[usize]) -> Result<Rat, ModelError> {
    let m = transcript.m();
    let mut total = Rat::zero();
    for &index in indices {
        let event = transcript
            .events
            .get(index)
            .ok_or(ModelError::ChoreOutOfRange { index: index + 1, m })?;
        total += event.chore.cost(agent);
    }
    Ok(total)
}

/// Cost to `agent` of the chores assigned to her.
pub fn assigned_cost(transcript: &Transcript, agent: AgentId) -> Rat {
    transcript
        .events
        .iter()
        .filter(|e| e.assignee == agent)
        .map(|e| e.chore.cost(agent))
        .sum()
}
