//! Domain-oriented fact comparison authentication.
//!
//! Two users each hold a knowledge [`domain::Domain`]. Every round each user
//! plays one fact, the facts are combined into a resultant fact, and when the
//! resultant lands in both users' target sets both confidence counters go up
//! and the resultant is absorbed into both domains. A session authenticates
//! once both counters reach their thresholds.
//!
//! Modules, bottom-up:
//!
//! - [`domain`]: facts, magnitudes, defining properties, operators, mappings
//! - [`comparison`]: the combiner, target sets and the joint match rule
//! - [`agents`]: fact selection policies and the impostor model
//! - [`protocol`]: the session state machine and the two-party driver
//! - [`codec`]: wire messages, loopback transport, transcript files
//! - [`harness`]: scenario files, experiments, threshold sweeps, the
//!   brute-force oracle and transcript replay

pub mod agents;
pub mod codec;
pub mod comparison;
pub mod domain;
pub mod harness;
pub mod protocol;
