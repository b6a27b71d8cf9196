//! Community Hawkes Independent Pairs (CHIP) model for continuous-time
//! relational event networks.
//!
//! Each ordered node pair `(i, j)` emits events from an independent
//! univariate Hawkes process whose parameters `(μ, α, β)` depend only on the
//! blocks of `i` and `j`. The crate simulates such networks, recovers blocks
//! by spectral clustering of the count matrix, estimates block parameters by
//! moment matching plus a one-dimensional likelihood search, and evaluates
//! held-out log-likelihood.

pub mod ari;
pub mod bounds;
pub mod community;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod golden;
pub mod hawkes;
pub mod ingest;
pub mod kmeans;
pub mod likelihood;
pub mod matrix;
pub mod network;
pub mod par;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod svd;

pub use community::{BlockMatrix, CommunityAssignment};
pub use error::{ChipError, Result};
pub use estimation::{fit_chip, fit_with_assignment, BlockParamEstimates, ChipFit, FitConfig};
pub use hawkes::{EventTimes, HawkesParams};
pub use matrix::{CountMatrix, MatrixKind, Mode};
pub use network::{ChipModelSpec, Event, EventLog, EventNetwork, SimplifiedSpec};
