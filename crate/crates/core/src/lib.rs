//! Adversarial testbed for online chore division under maximin-share fairness.
//!
//! An [`adversary::AdversaryState`] emits chores one at a time against an
//! online assignment [`algorithms::Policy`]. Every duel produces a
//! [`model::Transcript`]; a violation verdict carries a witness partition
//! that [`mms::verify_violation`] re-checks with exact arithmetic.

pub mod adversary;
pub mod algorithms;
pub mod external;
pub mod harness;
pub mod mms;
pub mod model;
pub mod rat;
pub mod transcript_file;

pub use model::{AgentId, ChoreCosts, Partition, Transcript, Verdict};
pub use rat::Rat;
