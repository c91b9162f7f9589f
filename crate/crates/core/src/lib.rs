//! Temporal persistence evaluation for retrieval systems.
//!
//! The crate scores TREC-style runs against graded qrels in several
//! evaluation environments (snapshots of an evolving test collection) and
//! relates the results through a pivot system:
//!
//! * [`run_io`] parses runs, qrels and topic lists and computes core topics.
//! * [`measures`] computes P@k, nDCG and bpref per topic, and their mean (ARP).
//! * [`persistence`] implements Result Delta, RI/ΔRI, per-topic deltas and
//!   the Effect Ratio, assembled into a [`persistence::PersistenceCell`].
//! * [`stats`] provides the unpaired two-sample t-test.
//! * [`corpus_diff`] classifies document evolution between two snapshots.
//! * [`report`] renders cells as tables, scatter data and per-topic series.

pub mod corpus_diff;
pub mod diagnostics;
pub mod error;
pub mod measures;
pub mod persistence;
pub mod report;
pub mod run_io;
pub mod stats;

pub use diagnostics::{Diagnostics, Warning};
pub use error::{Error, Result};
pub use measures::{ArpValue, MeasureId, TopicScoreVector};
pub use persistence::{EePair, PersistenceCell, Quantity, TopicDeltaVector};
pub use run_io::{Grade, Qrels, Run, TopicSet};
pub use stats::{TTestResult, TTestVariant};
