//! Human-centric requirement monitoring for ML components.
//!
//! Five model files (human-centric requirements, technical requirements,
//! architecture, ML design, context) are parsed ([`dsml`]), woven into one
//! traced graph ([`weaver`]) and compiled into a monitor plan ([`compiler`]).
//! The [`engine`] runs a plan over an event stream, the [`adaptation`] loop
//! reacts to violations, and the [`harness`] simulates a delivery-drone
//! system with injectable faults to score detection.

pub mod adaptation;
pub mod compiler;
pub mod diag;
pub mod dsml;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod weaver;

#[cfg(test)]
mod testutil;
