//! Exact and asymptotic local probabilities for arithmetic compound renewal
//! processes.
//!
//! The step law `xi = (tau, zeta)` lives on `Z^2` with `tau >= 1`; the first
//! jump `xi_1` may differ. Modules, bottom-up:
//!
//! * [`lattice_model`]: jump laws, condition [Z], the cumulant function `A`.
//! * [`deviation`]: the Legendre transform `Lambda`, ray minimisation and the
//!   local limit theorem for the sums `S_n = (T_n, Z_n)`.
//! * [`second_deviation`]: `A(mu)`, `D(alpha)`, `D(theta, alpha)` and the
//!   domain boundaries.
//! * [`asymptotics`]: local theorems for `P(Z(n) = x)` and the renewal
//!   measure `H({t} x {x})`.
//! * [`oracle`]: exact convolution tables and a seeded Monte Carlo sampler.

pub mod asymptotics;
pub mod deviation;
pub mod error;
pub mod lattice_model;
pub mod numeric;
pub mod oracle;
pub mod second_deviation;

pub use asymptotics::{AsymptoticEstimate, ConditionFlags};
pub use deviation::{RayMinimum, SaddleSolution};
pub use error::{Condition, CrpError, Result};
pub use lattice_model::{
    Atom, CrpModel, GeometricTail, JumpDistribution, Moments, TiltPoint, TimeFloor,
    ValidationReport,
};
pub use numeric::Sym2;
pub use oracle::{RenewalTable, SparsePmf};
pub use second_deviation::{DomainSummary, RatePoint};
