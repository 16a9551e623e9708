//! Simulation and analysis toolkit for hardware-enabled compute governance.
//!
//! - [`protocol`]: signed, expiring firmware updates and the on-device state
//!   machine that enforces them, plus licenses, location checks, attestation
//!   and equivocation detection.
//! - [`oversight`]: production sampling, randomized device assignment, the
//!   entity registry, inspections and power-log audits.
//! - [`stability`]: a two-player race model for when cooperation is stable.
//! - [`scenario`]: JSON-configured, seeded end-to-end runs and their reports.
//! - [`repro`]: executable checks for the reference numbers.

pub mod encoding;
pub mod oversight;
pub mod protocol;
pub mod rng;
pub mod signature;
pub mod stability;
pub mod scenario;
pub mod repro;
