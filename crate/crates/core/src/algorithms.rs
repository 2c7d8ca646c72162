//! Online assignment policies.
//!
//! A policy sees the transcript so far and the chore that just arrived, and
//! names the agent that receives it. Built-in policies are deterministic; the
//! delayer additionally inspects the adversary's internal state and is only
//! meant for stress-testing duel lengths.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::adversary::AdversaryState;
use crate::model::{assigned_cost, AgentId, ChoreCosts, Transcript, Verdict};
use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("protocol failure: {0}")]
    Protocol(String),
    #[error("no reply within {0} ms")]
    Timeout(u128),
    #[error("policy `{0}` needs white-box access to the adversary")]
    WhiteBoxRequired(String),
    /// The operator quit; the duel ends without a verdict.
    #[error("aborted by operator")]
    Aborted,
}

pub struct DecisionContext<'a> {
    pub history: &'a Transcript,
    pub chore: &'a ChoreCosts,
    /// Present only for white-box policies.
    pub adversary: Option<&'a AdversaryState>,
}

pub trait Policy {
    fn name(&self) -> String;

    fn white_box(&self) -> bool {
        false
    }

    fn start(&mut self, _n: usize, _epsilon: &Rat) -> Result<(), PolicyError> {
        Ok(())
    }

    /// Returns a 1-based agent index. Out-of-range answers are the
    /// adversary's to reject.
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError>;

    fn finish(&mut self, _verdict: Option<&Verdict>) {}
}

/// Every chore to `a_1`.
pub fn all_to_one(_history: &Transcript, _chore: &ChoreCosts) -> AgentId {
    AgentId::from_slot(0)
}

/// Chore `t` to agent `((t - 1) mod n) + 1`.
pub fn round_robin(history: &Transcript, _chore: &ChoreCosts) -> AgentId {
    AgentId::from_slot(history.m() % history.n)
}

/// Cheapest agent for this chore; ties to the lowest index.
pub fn greedy_marginal(_history: &Transcript, chore: &ChoreCosts) -> AgentId {
    argmin(chore.as_slice().iter().cloned())
}

/// Agent minimizing current assigned cost plus this chore's cost; ties to the lowest index.
pub fn greedy_load(history: &Transcript, chore: &ChoreCosts) -> AgentId {
    let loads: Vec<Rat> = history.agents().map(|a| assigned_cost(history, a)).collect();
    greedy_load_with(&loads, chore)
}

fn greedy_load_with(loads: &[Rat], chore: &ChoreCosts) -> AgentId {
    argmin(loads.iter().zip(chore.as_slice()).map(|(load, cost)| load + cost))
}

fn argmin(values: impl Iterator<Item = Rat>) -> AgentId {
    let mut best: Option<(usize, Rat)> = None;
    for (slot, value) in values.enumerate() {
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((slot, value));
        }
    }
    AgentId::from_slot(best.map_or(0, |(slot, _)| slot))
}

/// White-box stress policy: the deepest agent whose assignment does not end
/// the duel through the scenario rules, falling back to `a_1`.
pub fn delayer(adversary: &AdversaryState) -> AgentId {
    adversary
        .transcript()
        .agents()
        .rev()
        .find(|&agent| !adversary.would_fire(agent))
        .unwrap_or(AgentId::from_slot(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    AllToOne,
    RoundRobin,
    GreedyMarginal,
    GreedyLoad,
    Delayer,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::AllToOne,
        Builtin::RoundRobin,
        Builtin::GreedyMarginal,
        Builtin::GreedyLoad,
        Builtin::Delayer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::AllToOne => "all-to-one",
            Builtin::RoundRobin => "round-robin",
            Builtin::GreedyMarginal => "greedy-marginal",
            Builtin::GreedyLoad => "greedy-load",
            Builtin::Delayer => "delayer",
        }
    }

    pub fn policy(self) -> BuiltinPolicy {
        BuiltinPolicy {
            kind: self,
            loads: Vec::new(),
            seen: 0,
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected one of: all-to-one, round-robin, greedy-marginal, greedy-load, delayer)"))
    }
}

/// [`Policy`] wrapper around the built-in decision rules.
///
/// `greedy-load` keeps running loads for the history it has already seen so
/// long duels stay linear; the decisions are the same as [`greedy_load`].
#[derive(Debug, Clone)]
pub struct BuiltinPolicy {
    kind: Builtin,
    loads: Vec<Rat>,
    seen: usize,
}

impl BuiltinPolicy {
    fn refresh_loads(&mut self, history: &Transcript) {
        if self.seen > history.m() || self.loads.len() != history.n {
            self.loads = vec![Rat::zero(); history.n];
            self.seen = 0;
        }
        for event in &history.events()[self.seen..] {
            self.loads[event.assignee.slot()] += event.chore.cost(event.assignee);
        }
        self.seen = history.m();
    }
}

impl Policy for BuiltinPolicy {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn white_box(&self) -> bool {
        self.kind == Builtin::Delayer
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize, PolicyError> {
        let agent = match self.kind {
            Builtin::AllToOne => all_to_one(ctx.history, ctx.chore),
            Builtin::RoundRobin => round_robin(ctx.history, ctx.chore),
            Builtin::GreedyMarginal => greedy_marginal(ctx.history, ctx.chore),
            Builtin::GreedyLoad => {
                self.refresh_loads(ctx.history);
                greedy_load_with(&self.loads, ctx.chore)
            }
            Builtin::Delayer => {
                let adversary = ctx
                    .adversary
                    .ok_or_else(|| PolicyError::WhiteBoxRequired(self.name()))?;
                delayer(adversary)
            }
        };
        Ok(agent.index())
    }
}
