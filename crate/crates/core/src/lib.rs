//! Sequential hypothesis tests and index policies for locating abnormal
//! components with a limited number of probes.
//!
//! - [`observation`]: observation families, likelihood ratios, divergences.
//! - [`sequential`]: SPRT and the composite SGLRT / SALRT tests.
//! - [`index`]: expected sample sizes, the `pi c / E(N)` style indices,
//!   closed-form expected costs and brute-force order search.
//! - [`sim`]: trial simulation with `M` probe slots and Monte Carlo
//!   aggregation.

pub mod error;
pub mod index;
pub mod observation;
pub mod rng;
pub mod sequential;
pub mod sim;

pub use error::{Error, Result};
pub use index::{AnomalyModel, ComponentId, ComponentProfile, Ordering};
pub use observation::{CompositeSpace, Family, HypothesisPair, ObservationModel};
pub use sequential::{CompositeTestConfig, Decision, SprtConfig, TestProcedure, TestVerdict};
