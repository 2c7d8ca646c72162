//! Adaptive adversary for online chore division.
//!
//! The adversary is a stack of `n` scenario levels. Level `d` (1-based)
//! decides agent `a_d`'s cost for every chore:
//!
//! * levels `d < n` are *pattern* levels: within a pattern the target's costs
//!   follow the geometric schedule `w / (1 + 1/ε')^(L - i + 1)`, `i = 1, 2, ...`,
//!   and the pattern ends when the target receives a chore;
//! * level `n` is the *base* level: every chore costs `w` to its target, and
//!   `n` consecutive chores to that target force a violation.
//!
//! When a pattern ends, the level either stops (its target has been offered at
//! least `n * w` since the level was instantiated) or restarts at `i = 1` with
//! every deeper level instantiated afresh from the current arrived totals.
//! Every violation is certified by an explicit witness partition.

use rug::Integer;
use thiserror::Error;

use crate::mms::{lpt_partition, mms_exact, partition_max_bundle, DEFAULT_EXACT_CAP};
use crate::model::{violation_threshold, AgentId, ChoreCosts, ModelError, Transcript, Verdict};
use crate::rat::Rat;

/// Longest schedule the adversary will materialize. Schedule costs involve
/// `(1 + 1/ε')^L`, so `L` has to stay a machine-sized exponent.
pub const EXPONENT_CEILING: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("schedule index {i} outside 1..={length}")]
    ScheduleIndex { i: u64, length: u64 },
    #[error("call out of order: {0}")]
    OutOfOrder(&'static str),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("adversary invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryParams {
    pub n: usize,
    pub epsilon: Rat,
    pub kappa: Rat,
    pub budget: usize,
    pub eager_check: bool,
}

impl AdversaryParams {
    pub fn new(n: usize, epsilon: Rat, kappa: Rat, budget: usize, eager_check: bool) -> Result<Self, AdversaryError> {
        let params = AdversaryParams {
            n,
            epsilon,
            kappa,
            budget,
            eager_check,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        if self.n == 0 {
            return Err(ModelError::Parameter("n must be at least 1".into()).into());
        }
        if self.epsilon.is_zero() || self.epsilon >= Rat::one() {
            return Err(ModelError::Parameter(format!("epsilon {} not in (0,1)", self.epsilon)).into());
        }
        if self.kappa.is_zero() {
            return Err(ModelError::Parameter("kappa must be positive".into()).into());
        }
        if self.budget == 0 {
            return Err(ModelError::Parameter("budget must be at least 1".into()).into());
        }
        Ok(())
    }

    /// ε' = ε/4, used by every pattern level.
    pub fn eps_prime(&self) -> Rat {
        &self.epsilon / &Rat::from_integer(4)
    }

    pub fn threshold(&self) -> Rat {
        violation_threshold(self.n, &self.epsilon)
    }
}

/// `1 + 1/ε'`.
fn growth(eps_prime: &Rat) -> Rat {
    &Rat::one() + &eps_prime.recip().expect("eps_prime is positive")
}

/// Upper bound on the chores a `k`-agent sub-scenario can emit before it
/// certifies a violation: `ℓ_1 = n`, `ℓ_k = ℓ_{k-1} · n · ⌈(1 + 1/ε')^{ℓ_{k-1}}⌉`.
pub fn ell_bound(k: usize, n: usize, eps_prime: &Rat) -> Result<Integer, AdversaryError> {
    if k == 0 {
        return Err(ModelError::Parameter("ell_bound needs k >= 1".into()).into());
    }
    if eps_prime.is_zero() {
        return Err(ModelError::Parameter("eps_prime must be positive".into()).into());
    }
    let r = growth(eps_prime);
    let mut ell = Integer::from(n);
    for level in 2..=k {
        let exponent = ell
            .to_u64()
            .filter(|&e| e <= EXPONENT_CEILING)
            .ok_or_else(|| AdversaryError::ResourceLimit(format!("ell_{} exceeds {EXPONENT_CEILING}", level - 1)))?;
        ell = ell * n * r.pow(exponent as u32).ceil();
    }
    Ok(ell)
}

/// `w / (1 + 1/ε')^(L - i + 1)` for `1 <= i <= L`.
pub fn schedule_cost(w: &Rat, eps_prime: &Rat, length: u64, i: u64) -> Result<Rat, AdversaryError> {
    if i == 0 || i > length {
        return Err(AdversaryError::ScheduleIndex { i, length });
    }
    if length > EXPONENT_CEILING {
        return Err(AdversaryError::ResourceLimit(format!(
            "schedule length {length} exceeds {EXPONENT_CEILING}"
        )));
    }
    Ok(w / &growth(eps_prime).pow((length - i + 1) as u32))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelKind {
    Pattern {
        /// Schedule length `L`.
        length: u64,
        /// Position `i` within the current pattern, `1..=L`.
        position: u64,
        /// Cost offered to the target since the level was instantiated.
        generated: Rat,
        /// `(1 + 1/ε')^L`, fixed for the level's lifetime.
        span: Rat,
        /// Schedule cost at `position`.
        current: Rat,
    },
    Base {
        /// Chores given to the target since the level was instantiated.
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioLevel {
    pub target: AgentId,
    pub eps_local: Rat,
    /// Target's arrived cost when the level was instantiated.
    pub x_snapshot: Rat,
    /// `max(x_snapshot, κ) / eps_local`.
    pub w: Rat,
    pub kind: LevelKind,
}

impl ScenarioLevel {
    fn instantiate(&mut self, arrived: &Rat, kappa: &Rat) {
        self.x_snapshot = arrived.clone();
        let base = if arrived > kappa { arrived } else { kappa };
        self.w = base / &self.eps_local;
        match &mut self.kind {
            LevelKind::Pattern {
                position,
                generated,
                span,
                current,
                ..
            } => {
                *position = 1;
                *generated = Rat::zero();
                *current = &self.w / span;
            }
            LevelKind::Base { count } => *count = 0,
        }
    }

    /// Starts the next pattern of a pattern level.
    fn restart_pattern(&mut self) {
        if let LevelKind::Pattern {
            position,
            span,
            current,
            ..
        } = &mut self.kind
        {
            *position = 1;
            *current = &self.w / span;
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self.kind, LevelKind::Base { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    Chore(ChoreCosts),
    /// The chore budget ran out before a violation; the verdict is recorded.
    Finished(Verdict),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Continue,
    Finished(Verdict),
}

#[derive(Debug, Clone)]
pub struct AdversaryState {
    params: AdversaryParams,
    levels: Vec<ScenarioLevel>,
    transcript: Transcript,
    pending: Option<ChoreCosts>,
    // Per-agent running totals over arrived / assigned chores.
    arrived: Vec<Rat>,
    assigned: Vec<Rat>,
    largest: Vec<Rat>,
}

/// Builds the full level stack with every `x_snapshot = 0`.
pub fn new_adversary(params: AdversaryParams, algo_name: &str) -> Result<AdversaryState, AdversaryError> {
    params.validate()?;
    let n = params.n;
    let eps_prime = params.eps_prime();
    let mut levels = Vec::with_capacity(n);
    for depth in 1..=n {
        let (eps_local, kind) = if depth < n {
            let length = ell_bound(n - depth, n, &eps_prime)?
                .to_u64()
                .filter(|&l| l <= EXPONENT_CEILING)
                .ok_or_else(|| {
                    AdversaryError::ResourceLimit(format!(
                        "schedule length for level {depth} exceeds {EXPONENT_CEILING}"
                    ))
                })?;
            let span = growth(&eps_prime).pow(length as u32);
            let kind = LevelKind::Pattern {
                length,
                position: 1,
                generated: Rat::zero(),
                span,
                current: Rat::zero(),
            };
            (eps_prime.clone(), kind)
        } else {
            (params.epsilon.clone(), LevelKind::Base { count: 0 })
        };
        let mut level = ScenarioLevel {
            target: AgentId::new(depth, n)?,
            eps_local,
            x_snapshot: Rat::zero(),
            w: Rat::zero(),
            kind,
        };
        level.instantiate(&Rat::zero(), &params.kappa);
        levels.push(level);
    }
    let transcript = Transcript::new(n, params.epsilon.clone(), params.kappa.clone(), algo_name)?;
    Ok(AdversaryState {
        levels,
        transcript,
        pending: None,
        arrived: vec![Rat::zero(); n],
        assigned: vec![Rat::zero(); n],
        largest: vec![Rat::zero(); n],
        params,
    })
}

impl AdversaryState {
    pub fn params(&self) -> &AdversaryParams {
        &self.params
    }

    pub fn levels(&self) -> &[ScenarioLevel] {
        &self.levels
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn chores_emitted(&self) -> usize {
        self.transcript.m() + usize::from(self.pending.is_some())
    }

    /// The chore awaiting a decision, if any.
    pub fn pending(&self) -> Option<&ChoreCosts> {
        self.pending.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.transcript.verdict.is_some()
    }

    pub fn arrived_cost(&self, agent: AgentId) -> &Rat {
        &self.arrived[agent.slot()]
    }

    pub fn assigned_cost(&self, agent: AgentId) -> &Rat {
        &self.assigned[agent.slot()]
    }

    pub fn next_chore(&mut self) -> Result<Emission, AdversaryError> {
        if self.is_finished() {
            return Err(AdversaryError::OutOfOrder("duel already has a verdict"));
        }
        if self.pending.is_some() {
            return Err(AdversaryError::OutOfOrder("previous chore has not been assigned"));
        }
        if self.transcript.m() >= self.params.budget {
            let verdict = Verdict::BudgetExhausted {
                chores_emitted: self.transcript.m(),
                best_certified_ratio: self.best_certified_ratio(),
            };
            self.transcript.verdict = Some(verdict.clone());
            return Ok(Emission::Finished(verdict));
        }

        let mut costs = Vec::with_capacity(self.params.n);
        for level in &mut self.levels {
            let cost = match &mut level.kind {
                LevelKind::Pattern { current, generated, .. } => {
                    *generated += &*current;
                    current.clone()
                }
                LevelKind::Base { .. } => level.w.clone(),
            };
            costs.push(cost);
        }
        for (slot, cost) in costs.iter().enumerate() {
            self.arrived[slot] += cost;
            if *cost > self.largest[slot] {
                self.largest[slot] = cost.clone();
            }
        }
        let chore = ChoreCosts::new(costs);
        self.pending = Some(chore.clone());
        Ok(Emission::Chore(chore))
    }

    /// Whether giving the pending chore to `agent` would end the duel through
    /// the scenario rules (eager checks aside).
    pub fn would_fire(&self, agent: AgentId) -> bool {
        let n = self.params.n;
        match self.levels.get(agent.slot()).map(|l| (&l.kind, &l.w)) {
            Some((LevelKind::Base { count }, _)) => count + 1 >= n,
            Some((LevelKind::Pattern { generated, .. }, w)) => *generated >= w * &Rat::from_integer(n as u64),
            None => false,
        }
    }

    /// Records the irrevocable assignment of the pending chore.
    pub fn observe(&mut self, assignee: usize) -> Result<Step, AdversaryError> {
        if self.is_finished() {
            return Err(AdversaryError::OutOfOrder("duel already has a verdict"));
        }
        let agent = AgentId::new(assignee, self.params.n)
            .map_err(|_| AdversaryError::Protocol(format!("assignee {assignee} outside 1..={}", self.params.n)))?;
        let chore = self
            .pending
            .take()
            .ok_or(AdversaryError::OutOfOrder("no chore awaiting a decision"))?;
        self.assigned[agent.slot()] += chore.cost(agent);
        self.transcript.push(chore, agent)?;

        let depth = agent.slot();
        let n = self.params.n;
        let fired = self.would_fire(agent);
        if let LevelKind::Base { count } = &mut self.levels[depth].kind {
            *count += 1;
        }
        if fired {
            let verdict = self.build_certificate(agent);
            self.transcript.verdict = Some(verdict.clone());
            return Ok(Step::Finished(verdict));
        }

        if !self.levels[depth].is_base() {
            self.levels[depth].restart_pattern();
            for deeper in depth + 1..n {
                let arrived = self.arrived[deeper].clone();
                self.levels[deeper].instantiate(&arrived, &self.params.kappa);
            }
        }
        let growth = growth(&self.params.eps_prime());
        for level in &mut self.levels[..depth] {
            if let LevelKind::Pattern {
                length,
                position,
                current,
                ..
            } = &mut level.kind
            {
                *position += 1;
                *current = &*current * &growth;
                if *position > *length {
                    return Err(AdversaryError::Invariant(format!(
                        "pattern of {} outgrew its schedule length {length}",
                        level.target
                    )));
                }
            }
        }

        if self.params.eager_check {
            if let Some(verdict) = self.eager_certificate() {
                self.transcript.verdict = Some(verdict.clone());
                return Ok(Step::Finished(verdict));
            }
        }
        Ok(Step::Continue)
    }

    /// Records a protocol failure as the duel's verdict.
    pub fn abort(&mut self, reason: impl Into<String>) -> Verdict {
        let verdict = Verdict::ProtocolFailure { reason: reason.into() };
        self.pending = None;
        self.transcript.verdict = Some(verdict.clone());
        verdict
    }

    /// Records an internal failure as the duel's verdict.
    pub fn anomaly(&mut self, reason: impl Into<String>) -> Verdict {
        let verdict = Verdict::Anomaly { reason: reason.into() };
        self.pending = None;
        self.transcript.verdict = Some(verdict.clone());
        verdict
    }

    /// Certificate for a violation that the scenario rules just fired.
    ///
    /// The witness is the LPT partition of every arrived chore under the
    /// agent's costs; if that is not tight enough the exact optimum is tried
    /// on small instances. An unverifiable claim becomes an anomaly.
    pub fn build_certificate(&self, agent: AgentId) -> Verdict {
        let threshold = self.params.threshold();
        if let Some(verdict) = certify_agent(&self.transcript, agent, &threshold) {
            return verdict;
        }
        let costs = self.transcript.costs_for(agent);
        if costs.len() <= DEFAULT_EXACT_CAP {
            if let Ok(exact) = mms_exact(&costs, self.params.n) {
                let assigned = self.assigned[agent.slot()].clone();
                if let Some(ratio) = assigned.checked_div(&exact.value) {
                    if assigned >= &threshold * &exact.value {
                        return Verdict::Violation {
                            agent,
                            assigned_cost: assigned,
                            witness: exact.optimal_partition,
                            mms_upper: exact.value,
                            ratio,
                        };
                    }
                }
            }
        }
        Verdict::Anomaly {
            reason: format!("could not certify a violation for {agent} after {} chores", costs.len()),
        }
    }

    fn eager_certificate(&self) -> Option<Verdict> {
        let threshold = self.params.threshold();
        let k = Rat::from_integer(self.params.n as u64);
        self.transcript.agents().find_map(|agent| {
            let slot = agent.slot();
            let average = &self.arrived[slot] / &k;
            let floor = if average > self.largest[slot] {
                average
            } else {
                self.largest[slot].clone()
            };
            if self.assigned[slot] < &threshold * &floor {
                return None;
            }
            certify_agent(&self.transcript, agent, &threshold)
        })
    }

    fn best_certified_ratio(&self) -> Option<Rat> {
        self.transcript
            .agents()
            .filter(|a| !self.assigned[a.slot()].is_zero())
            .filter_map(|agent| {
                let costs = self.transcript.costs_for(agent);
                let upper = partition_max_bundle(&costs, &lpt_partition(&costs, self.params.n)).ok()?;
                self.assigned[agent.slot()].checked_div(&upper)
            })
            .max()
    }

    /// Checks the level invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), AdversaryError> {
        for level in &self.levels {
            if level.x_snapshot > &level.eps_local * &level.w {
                return Err(AdversaryError::Invariant(format!(
                    "x_snapshot exceeds eps*w at {}",
                    level.target
                )));
            }
            if let LevelKind::Pattern { length, position, .. } = level.kind {
                if position == 0 || position > length {
                    return Err(AdversaryError::Invariant(format!(
                        "position {position} outside 1..={length}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Violation certificate for `agent` from the LPT witness, if it reaches `threshold`.
fn certify_agent(transcript: &Transcript, agent: AgentId, threshold: &Rat) -> Option<Verdict> {
    let costs = transcript.costs_for(agent);
    let witness = lpt_partition(&costs, transcript.n);
    let upper = partition_max_bundle(&costs, &witness).ok()?;
    let assigned = crate::model::assigned_cost(transcript, agent);
    let ratio = assigned.checked_div(&upper)?;
    if assigned < threshold * &upper {
        return None;
    }
    Some(Verdict::Violation {
        agent,
        assigned_cost: assigned,
        witness,
        mms_upper: upper,
        ratio,
    })
}

/// Looks for any agent whose assigned cost already reaches `threshold` times
/// the LPT upper bound on her share. Lowest agent index wins.
pub fn eager_check(transcript: &Transcript, threshold: &Rat) -> Option<Verdict> {
    transcript
        .agents()
        .find_map(|agent| certify_agent(transcript, agent, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms::verify_violation;
    use crate::model::Partition;
    use proptest::prelude::*;

    fn params(n: usize, eps: Rat) -> AdversaryParams {
        AdversaryParams::new(n, eps, Rat::one(), 10_000, false).unwrap()
    }

    fn chore(e: Emission) -> ChoreCosts {
        match e {
            Emission::Chore(c) => c,
            Emission::Finished(v) => panic!("unexpected verdict {v:?}"),
        }
    }

    fn r(s: &str) -> Rat {
        s.parse().unwrap()
    }

    #[test]
    fn ell_bound_values() {
        assert_eq!(ell_bound(1, 2, &Rat::new(1, 8)).unwrap(), Integer::from(2u32));
        assert_eq!(ell_bound(2, 2, &Rat::new(1, 8)).unwrap(), Integer::from(324u32));
        assert_eq!(ell_bound(2, 2, &Rat::new(1, 16)).unwrap(), Integer::from(1156u32));
        assert_eq!(ell_bound(2, 3, &Rat::new(1, 8)).unwrap(), Integer::from(6561u32));
        // Non-integer growth rounds up: ε' = 2/3 gives r = 5/2, ⌈(5/2)^2⌉ = 7.
        assert_eq!(ell_bound(2, 2, &Rat::new(2, 3)).unwrap(), Integer::from(28u32));
        assert!(ell_bound(0, 2, &Rat::new(1, 8)).is_err());
        assert!(matches!(
            ell_bound(3, 4, &Rat::new(1, 16)),
            Err(AdversaryError::ResourceLimit(_))
        ));
    }

    #[test]
    fn ell_bound_is_monotone() {
        let eps = Rat::new(1, 8);
        for n in 1..=3 {
            assert!(ell_bound(2, n, &eps).unwrap() >= ell_bound(1, n, &eps).unwrap());
        }
    }

    #[test]
    fn schedule_values() {
        let q = Rat::new(1, 4);
        let w = Rat::one();
        assert_eq!(schedule_cost(&w, &q, 3, 1).unwrap(), r("1/125"));
        assert_eq!(schedule_cost(&w, &q, 3, 2).unwrap(), r("1/25"));
        assert_eq!(schedule_cost(&w, &q, 3, 3).unwrap(), r("1/5"));
        let w = Rat::from_integer(16);
        let q = Rat::new(1, 16);
        assert_eq!(schedule_cost(&w, &q, 2, 1).unwrap(), r("16/289"));
        assert_eq!(schedule_cost(&w, &q, 2, 2).unwrap(), r("16/17"));
        assert_eq!(
            schedule_cost(&w, &q, 2, 3),
            Err(AdversaryError::ScheduleIndex { i: 3, length: 2 })
        );
        assert!(schedule_cost(&w, &q, 2, 0).is_err());
    }

    #[test]
    fn schedule_dominance_example() {
        let q = Rat::new(1, 4);
        let one = Rat::one();
        let c1 = schedule_cost(&one, &q, 3, 1).unwrap();
        let c2 = schedule_cost(&one, &q, 3, 2).unwrap();
        assert_eq!(&c1 * &q.recip().unwrap(), r("4/125"));
        assert!(c2 >= &c1 * &q.recip().unwrap());
    }

    #[test]
    fn fresh_stack_n2() {
        let state = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        let top = &state.levels()[0];
        assert_eq!(top.eps_local, r("1/16"));
        assert_eq!(top.w, 16);
        let LevelKind::Pattern {
            length,
            position,
            generated,
            span,
            current,
        } = &top.kind
        else {
            panic!("top level should be a pattern level")
        };
        assert_eq!((*length, *position, generated.is_zero()), (2, 1, true));
        assert_eq!(*span, 289);
        assert_eq!(*current, r("16/289"));
        let base = &state.levels()[1];
        assert_eq!(base.eps_local, r("1/4"));
        assert_eq!(base.w, 4);
        assert_eq!(base.kind, LevelKind::Base { count: 0 });
        state.check_invariants().unwrap();
    }

    #[test]
    fn fresh_stack_n1_and_n3() {
        let state = new_adversary(params(1, Rat::new(1, 2)), "t").unwrap();
        assert_eq!(state.levels().len(), 1);
        assert!(state.levels()[0].is_base());
        assert_eq!(state.levels()[0].w, 2);

        let state = new_adversary(params(3, Rat::new(1, 2)), "t").unwrap();
        let lengths: Vec<_> = state
            .levels()
            .iter()
            .filter_map(|l| match l.kind {
                LevelKind::Pattern { length, .. } => Some(length),
                LevelKind::Base { .. } => None,
            })
            .collect();
        assert_eq!(lengths, vec![6561, 3]);
    }

    #[test]
    fn rejects_unrepresentable_stacks() {
        assert!(matches!(
            new_adversary(params(4, Rat::new(1, 4)), "t"),
            Err(AdversaryError::ResourceLimit(_))
        ));
    }

    #[test]
    fn emission_trace_n2() {
        let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        let c = chore(s.next_chore().unwrap());
        assert_eq!(c.as_slice(), &[r("16/289"), r("4")]);
        assert_eq!(s.observe(2).unwrap(), Step::Continue);
        let c = chore(s.next_chore().unwrap());
        assert_eq!(c.as_slice(), &[r("16/17"), r("4")]);
        // The top-level target takes it: pattern restarts, base level re-reads x = 8.
        assert_eq!(s.observe(1).unwrap(), Step::Continue);
        assert_eq!(s.levels()[1].x_snapshot, 8);
        assert_eq!(s.levels()[1].w, 32);
        let c = chore(s.next_chore().unwrap());
        assert_eq!(c.as_slice(), &[r("16/289"), r("32")]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn cached_schedule_matches_closed_form() {
        let mut s = new_adversary(params(3, Rat::new(1, 2)), "t").unwrap();
        // Keep feeding a_3 and a_2 so both pattern levels walk their schedules.
        for assignee in [3, 3, 2, 3, 3, 2, 3, 2, 1, 3] {
            let Emission::Chore(c) = s.next_chore().unwrap() else {
                panic!()
            };
            for level in &s.levels()[..2] {
                let LevelKind::Pattern { length, position, .. } = level.kind else {
                    unreachable!()
                };
                let expected = schedule_cost(&level.w, &level.eps_local, length, position).unwrap();
                assert_eq!(*c.cost(level.target), expected);
            }
            assert_eq!(s.observe(assignee).unwrap(), Step::Continue);
        }
    }

    #[test]
    fn base_violation_trace() {
        let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        chore(s.next_chore().unwrap());
        assert_eq!(s.observe(2).unwrap(), Step::Continue);
        chore(s.next_chore().unwrap());
        let Step::Finished(verdict) = s.observe(2).unwrap() else {
            panic!("expected a verdict")
        };
        let Verdict::Violation {
            agent,
            assigned_cost,
            witness,
            mms_upper,
            ratio,
        } = &verdict
        else {
            panic!("expected a violation, got {verdict:?}")
        };
        assert_eq!(agent.index(), 2);
        assert_eq!(*assigned_cost, 8);
        assert_eq!(*witness, Partition::new(vec![vec![0], vec![1]]));
        assert_eq!(*mms_upper, 4);
        assert_eq!(*ratio, 2);
        assert!(verify_violation(s.transcript()).unwrap());
        assert!(matches!(s.next_chore(), Err(AdversaryError::OutOfOrder(_))));
    }

    #[test]
    fn accumulation_trace_all_to_first() {
        let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        let mut patterns = 0;
        let verdict = loop {
            let c = chore(s.next_chore().unwrap());
            assert_eq!(*c.cost(AgentId::new(1, 2).unwrap()), r("16/289"));
            patterns += 1;
            if let Step::Finished(v) = s.observe(1).unwrap() {
                break v;
            }
        };
        assert_eq!(patterns, 578);
        let Verdict::Violation { agent, mms_upper, .. } = &verdict else {
            panic!("{verdict:?}")
        };
        assert_eq!(agent.index(), 1);
        assert!(*mms_upper <= &Rat::from_integer(16) + &r("16/17"));
        assert!(verify_violation(s.transcript()).unwrap());
    }

    #[test]
    fn single_agent_duel() {
        let mut s = new_adversary(params(1, Rat::new(1, 2)), "t").unwrap();
        let c = chore(s.next_chore().unwrap());
        assert_eq!(c.as_slice(), &[Rat::from_integer(2)]);
        let Step::Finished(Verdict::Violation { ratio, witness, .. }) = s.observe(1).unwrap() else {
            panic!("expected violation")
        };
        assert_eq!(ratio, 1);
        assert_eq!(witness, Partition::new(vec![vec![0]]));
        assert!(verify_violation(s.transcript()).unwrap());
    }

    #[test]
    fn protocol_and_order_errors() {
        let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        assert!(matches!(s.observe(1), Err(AdversaryError::OutOfOrder(_))));
        chore(s.next_chore().unwrap());
        assert!(matches!(s.next_chore(), Err(AdversaryError::OutOfOrder(_))));
        assert!(matches!(s.observe(5), Err(AdversaryError::Protocol(_))));
        assert!(matches!(s.observe(0), Err(AdversaryError::Protocol(_))));
        let v = s.abort("bad reply");
        assert_eq!(
            v,
            Verdict::ProtocolFailure {
                reason: "bad reply".into()
            }
        );
        assert!(s.is_finished());
    }

    #[test]
    fn budget_exhaustion() {
        let p = AdversaryParams::new(2, Rat::new(1, 4), Rat::one(), 3, false).unwrap();
        let mut s = new_adversary(p, "t").unwrap();
        for _ in 0..3 {
            chore(s.next_chore().unwrap());
            assert_eq!(s.observe(1).unwrap(), Step::Continue);
        }
        let Emission::Finished(Verdict::BudgetExhausted {
            chores_emitted,
            best_certified_ratio,
        }) = s.next_chore().unwrap()
        else {
            panic!("expected budget exhaustion")
        };
        assert_eq!(chores_emitted, 3);
        // Three equal chores to a_1: LPT witness {1,3},{2} gives U = 32/289, C = 48/289.
        assert_eq!(best_certified_ratio, Some(r("3/2")));
    }

    #[test]
    fn eager_check_examples() {
        let mut t = Transcript::new(2, Rat::new(1, 4), Rat::one(), "t").unwrap();
        let threshold = t.threshold();
        assert_eq!(eager_check(&t, &threshold), None);
        let a1 = t.agent(1).unwrap();
        for _ in 0..3 {
            t.push(ChoreCosts::new(vec![Rat::one(), Rat::one()]), a1).unwrap();
        }
        let Some(Verdict::Violation {
            agent,
            assigned_cost,
            mms_upper,
            ..
        }) = eager_check(&t, &threshold)
        else {
            panic!("eager check should fire")
        };
        assert_eq!(agent, a1);
        assert_eq!(assigned_cost, 3);
        assert_eq!(mms_upper, 2);
    }

    #[test]
    fn eager_flag_gates_early_exit() {
        let run = |eager: bool| {
            let p = AdversaryParams::new(2, Rat::new(1, 4), Rat::one(), 10_000, eager).unwrap();
            let mut s = new_adversary(p, "t").unwrap();
            loop {
                chore(s.next_chore().unwrap());
                if let Step::Finished(v) = s.observe(1).unwrap() {
                    return (s.transcript().m(), v);
                }
            }
        };
        let (lazy_m, _) = run(false);
        let (eager_m, verdict) = run(true);
        assert_eq!(lazy_m, 578);
        // Two equal chores to a_1 already give ratio 2 against the split witness.
        assert_eq!(eager_m, 2);
        assert!(matches!(verdict, Verdict::Violation { .. }));
    }

    #[test]
    fn would_fire_matches_rules() {
        let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
        chore(s.next_chore().unwrap());
        let a1 = AgentId::new(1, 2).unwrap();
        let a2 = AgentId::new(2, 2).unwrap();
        assert!(!s.would_fire(a1));
        assert!(!s.would_fire(a2));
        s.observe(2).unwrap();
        chore(s.next_chore().unwrap());
        assert!(s.would_fire(a2));
        assert!(!s.would_fire(a1));
    }

    proptest! {
        #[test]
        fn geometric_dominance(p in 1u64..50, extra in 1u64..50, length in 1u64..=12, wn in 1u64..100, wd in 1u64..10) {
            let eps = Rat::new(p, p + extra);
            let w = Rat::new(wn, wd);
            let inv = eps.recip().unwrap();
            let mut prefix = Rat::zero();
            for i in 1..=length {
                let c = schedule_cost(&w, &eps, length, i).unwrap();
                prop_assert!(c >= &inv * &prefix);
                prefix += &c;
            }
            let last = schedule_cost(&w, &eps, length, length).unwrap();
            prop_assert_eq!(&last, &(&w / &growth(&eps)));
            prop_assert!(last <= &eps * &w);
        }

        #[test]
        fn random_policies_lose_at_n2(choices in prop::collection::vec(1usize..=2, 1200)) {
            let mut s = new_adversary(params(2, Rat::new(1, 4)), "t").unwrap();
            let mut step = 0;
            let verdict = loop {
                prop_assert!(step < 1156, "no violation within the bound");
                chore(s.next_chore().unwrap());
                s.check_invariants().unwrap();
                if let Step::Finished(v) = s.observe(choices[step]).unwrap() {
                    break v;
                }
                step += 1;
            };
            let is_violation = matches!(verdict, Verdict::Violation { .. });
            prop_assert!(is_violation);
            prop_assert!(verify_violation(s.transcript()).unwrap());
        }

        #[test]
        fn identical_decisions_replay_identically(choices in prop::collection::vec(1usize..=3, 1..60)) {
            let p = AdversaryParams::new(3, Rat::new(1, 2), Rat::one(), 60, true).unwrap();
            let play = || {
                let mut s = new_adversary(p.clone(), "t").unwrap();
                for &c in &choices {
                    match s.next_chore().unwrap() {
                        Emission::Chore(_) => {}
                        Emission::Finished(_) => break,
                    }
                    if let Step::Finished(_) = s.observe(c).unwrap() {
                        break;
                    }
                    s.check_invariants().unwrap();
                }
                s.into_transcript()
            };
            prop_assert_eq!(play(), play());
        }
    }
}
