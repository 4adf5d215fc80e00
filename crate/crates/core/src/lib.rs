//! Two-timescale cascading-blackout simulator for power grids with
//! renewable plants and storage.
//!
//! The fast timescale ([`cascade`]) plays out one day: random line outages,
//! DC redispatch ([`dispatch`]) and probabilistic overload failures. The slow
//! timescale ([`evolution`]) grows demand, upgrades lines after blackouts and
//! adds generation capacity to hold the margin near a critical value.
//! Renewable plants ([`res`]) deliver a monthly planned outflow backed by
//! storage. [`scenario`] drives Monte Carlo studies and [`metrics`] turns
//! runs into risk, performance and stress figures.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cascade;
pub mod dispatch;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod lp;
pub mod metrics;
pub mod reference;
pub mod res;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
