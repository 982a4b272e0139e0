//! Purchasing private data bits from players with monotonic privacy
//! valuations.
//!
//! The crate has three layers:
//!
//! * [`model`], [`dist`] and [`mechanism`]: players, inputs, exact count
//!   laws and the concrete mechanisms (the threshold mechanism, its
//!   bit-zero variant, subsampling and a few baselines).
//! * [`loss`]: privacy-loss families and their expectations over a
//!   mechanism's output law.
//! * [`verify`] and [`audit`]: interval-sound checkers for individual
//!   rationality, truthfulness, accuracy, differential privacy and
//!   distinguishability, plus executable hybrid-chain audits.
//!
//! Every probability that feeds a verdict comes from an exact law with a
//! certified truncation bound, so a verdict is either `Pass`, `Fail`, or
//! honestly `Inconclusive`.
//!
//! Batch work (grids of profiles, subset enumeration, Monte Carlo) runs on
//! rayon when the default `parallel` feature is on; see [`par::Exec`].

pub mod audit;
pub mod dist;
pub mod error;
pub mod loss;
pub mod mechanism;
pub mod model;
pub mod par;
pub mod verify;

pub use dist::{CountDistribution, GeomParams, Interval};
pub use error::{Error, Result};
pub use loss::{LossKind, LossModel, ThresholdFn};

pub use mechanism::{
    Alg1, Alg1Prime, BudgetParams, ConstantOutput, ExactSum, Mechanism, PayDeclared, Subsample,
    SubsampleParams,
};
pub use model::{InputProfile, NeighborRelation, Outcome, PlayerType};
pub use par::Exec;
pub use verify::Verdict;

/// Default certified truncation tolerance for geometric laws.
pub const DEFAULT_MASS_TOL: f64 = 1e-12;
