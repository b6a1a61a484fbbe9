//! Numerics for the averaged integral means spectrum of exterior
//! whole-plane SLE: the closed-form spectrum with all its transitions,
//! the hypergeometric boundary solutions behind it, operator-level
//! verification scans, and an independent backward-Loewner Monte Carlo
//! estimator.

pub mod exponents;
pub mod hyper;
pub mod pde;
pub mod sim;
