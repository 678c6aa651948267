//! Strategyproof mechanisms for locating a single obnoxious facility on the
//! unit interval, evaluated under L_p-aggregated social utility and social
//! cost objectives.
//!
//! The crate is organised bottom-up:
//!
//! - [`profile`]: agent profiles, side counts and facility distributions.
//! - [`objective`]: objective selectors and their evaluation for points and
//!   distributions.
//! - [`optima`]: optimal objective values and locations.
//! - [`mechanism`]: Majority Vote, the uniform mechanism, the two weighted
//!   randomized mechanisms, the two-candidate threshold family and custom
//!   black-box mechanisms.
//! - [`truthfulness`]: exhaustive grid search for (group) manipulation.
//! - [`adversary`]: worst-case approximation ratio search and the bound
//!   catalog.
//! - [`witnesses`]: executable lower-bound constructions.
//! - [`table`]: the summary table of every bound the crate can check.

pub mod adversary;
pub mod error;
pub mod fmt;
pub mod mechanism;
pub mod objective;
pub mod optima;
pub mod profile;
pub mod quadrature;
pub mod table;
pub mod truthfulness;
pub mod witnesses;

pub use error::{Error, Result};
pub use mechanism::MechanismSpec;
pub use objective::{Convention, ObjectiveSpec, Sense};
pub use profile::{FacilityDistribution, Profile, SideCounts};
