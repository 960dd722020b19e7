//! Estimating the length of memory words of a stationary process from a
//! single sample path.
//!
//! - [`seq`]: sample paths and exact word counting with threshold pruning.
//! - [`estimator`]: empirical conditionals, discrepancies, and the order
//!   estimator `chi_n`.
//! - [`oracle`]: exact memory-word analysis of explicit finite chains.
//! - [`process`]: samplers, relabelings, and the staged adversary against
//!   shortest-memory-word estimators.
//! - [`bounds`]: Hoeffding's inequality and the error bound on `chi_n`.

pub mod bounds;
pub mod estimator;
pub mod oracle;
pub mod process;
pub mod seq;

pub use bounds::{chi_error_bound, hoeffding_bound, BoundsError, HoeffdingInput, Ranges};
pub use estimator::{
    empirical_conditional, empirical_discrepancy, order_estimate, order_trajectory,
    shortest_word_estimate, support_set, CheckpointReport, DiscrepancyReport, EstimatorError,
    EstimatorParams,
};
pub use oracle::{ChainSpec, ExplicitChain, MemoryWordReport, OracleError};
pub use process::{
    build_adversary, fold_stage, relabel, sample_explicit, sample_ryabko, stopping_reduction,
    AdversaryConfig, ProcessError, Relabeling, SequenceEstimator, StagePlan,
};
pub use seq::{ContextIndex, Direction, SeqError, Sequence, Symbol, Word};
