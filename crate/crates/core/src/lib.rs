//! Tikhonov-Mann iteration in W-hyperbolic spaces.
//!
//! The iteration is
//!
//! ```text
//! y_n     = (1-β_n) u ⊕ β_n x_n
//! x_{n+1} = (1-λ_n) y_n ⊕ λ_n T y_n
//! ```
//!
//! for a nonexpansive `T`, an anchor `u` and parameter sequences (λ_n), (β_n).
//! The crate provides
//!
//! * [`geometry`]: concrete W-hyperbolic spaces and axiom samplers;
//! * [`operators`]: nonexpansive maps on them;
//! * [`schedule`]: parameter sequences and their quantitative moduli;
//! * [`rates`]: the rates of (T-)asymptotic regularity as exact integer functions;
//! * [`iteration`]: the iteration itself, recording every distance the bounds speak about;
//! * [`verify`]: empirical certification of rates and inequalities along traces;
//! * [`scenarios`]: ready-made scenarios used by the CLI and the test suites.

pub mod error;
pub mod geometry;
pub mod iteration;
pub mod operators;
pub mod rates;
pub mod report;
pub mod scenarios;
pub mod schedule;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{SpaceHandle, SpaceKind, SpacePoint, Tolerance};
pub use iteration::{IterationTrace, Scenario};
pub use operators::{MapHandle, MapKind};
pub use rates::{Nat, NatRate, RateBound, Sigma5Argument};
pub use report::{CheckEntry, Status, ValidationReport, Witness};
pub use schedule::{KBound, ModuliBundle, ScalarSchedule};
