//! Evaluation and repair harness for GUI programs.
//!
//! * [`ies`]: declarative interaction/assertion scripts and metadata checks.
//! * [`driver`] and [`sim`]: runtime access to applications, with a
//!   deterministic simulator backend.
//! * [`eval`]: script execution and benchmark metrics.
//! * [`layout`]: layout-similarity scoring and the perturbation corpus.
//! * [`agent`]: the planner / operator / fixer debugging loop.
//! * [`suite`] and [`config`]: on-disk benchmark suites and batch settings.

pub mod agent;
pub mod cli;
pub mod config;
pub mod driver;
pub mod eval;
pub mod ies;
pub mod layout;
pub mod raster;
pub mod sim;
pub mod suite;
