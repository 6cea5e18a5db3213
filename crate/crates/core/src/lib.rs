//! Network NOMA (N-NOMA) for vehicular networks whose roads form a Poisson
//! line process and whose base stations form a Poisson line Cox process.
//!
//! Two cooperating base stations serve a far "CoMP" user with Alamouti coding
//! while each superposes a signal for a nearby NOMA user. The crate provides:
//!
//! * [`point_process`]: samplers for lines, per-line node sets and the typical
//!   road layout.
//! * [`link`]: channel gains, normalized interference powers, SINRs and a
//!   signal-level two-slot Alamouti simulator.
//! * [`numerics`]: hypergeometric and beta functions, adaptive quadrature,
//!   Chebyshev nodes and numeric differentiation.
//! * [`analytic`]: closed-form Laplace transforms and outage probabilities.
//! * [`monte_carlo`]: seeded, worker-count independent outage estimation.
//! * [`experiments`]: figure recipes, sweeps, CSV output and validation suites.

pub mod analytic;
pub mod config;
mod error;
pub mod experiments;
pub mod link;
pub mod monte_carlo;
pub mod numerics;
pub mod point_process;
mod streams;

pub use config::{DerivedParams, SystemConfig};
pub use error::{Error, Result};
