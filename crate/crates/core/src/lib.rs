//! Factor-of-IID processes on regular trees and their emulation on finite graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`math`]: closed-form constants (spectral radius, bisection bounds,
//!   block-factor correlations, Markov-chain sphere statistics).
//! - [`tree`]: explicit balls of the d-regular tree.
//! - [`graph`]: finite graphs, random regular graphs, girth and local tree-likeness.
//! - [`processes`]: samplers for the tree-indexed Markov chain, perfect
//!   matchings, proper edge colorings and the matching-list construction.
//! - [`gaussian`]: the Gaussian block factor on tree balls and on graphs.
//! - [`obstruction`]: sphere-sum statistics and the obstruction classifier.
//! - [`partition`]: cut sizes, rebalancing, local search and the bisection and
//!   edge-cut experiments.
//!
//! All randomness flows through [`rng::derive_substream`], so results depend on
//! the seed and never on the number of threads.

pub mod error;
pub mod gaussian;
pub mod graph;
pub mod math;
pub mod obstruction;
pub mod partition;
pub mod processes;
pub mod rng;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use gaussian::{BlockFactorSpec, BlockSign, GaussField};
pub use graph::{Graph, TreeLikeReport};
pub use math::{CutMode, DegreeParams, MarkovParams};
pub use obstruction::{Classification, ObstructionReport};
pub use partition::{BisectionRun, CutResult, EdgeCutSample, Stage};
pub use processes::{ColoringConfig, MatchingConfig, MatchingListConfig, SpinField, UniformLabelField};
pub use tree::TreeBall;
