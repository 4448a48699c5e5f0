//! Simulation harness for anchoring effects in agent-vs-agent price
//! negotiation, with persona prompting, outcome metrics, satisfaction surveys
//! and the statistics used to compare conditions.

pub mod agents;
pub mod analysis;
pub mod catalog;
pub mod dialogue;
pub mod experiment;
pub mod metrics;
pub mod money;
pub mod persona;
pub mod rng;
pub mod stats;
pub mod store;
pub mod survey;
pub mod transport;

pub use money::Money;
