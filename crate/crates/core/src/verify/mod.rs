//! Verification support shared by the unit tests, the acceptance suite and
//! the CLI `selftest`: a seeded sampler, deliberately naive reference
//! implementations, and a central finite-difference gradient checker.

pub mod gradcheck;
pub mod oracle;
pub mod overfit;
pub mod rng;
pub mod suites;
pub mod synthetic;
