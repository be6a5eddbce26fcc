//! Extremal coefficient functions (ECFs) of simple max-stable processes as
//! computable objects on a finite ground set.
//!
//! The crate is organised bottom-up:
//!
//! * [`subset`] – bitmask algebra on the union semigroup of subsets, finite
//!   differences and the direct complete-alternation check.
//! * [`ecf`] – ECF tables, the τ-coefficients of the Tawn–Molchanov (TM)
//!   model, marginalisation and ECFs of max-linear models.
//! * [`tm`] – the TM process: exact distribution function, exact simulation,
//!   empirical ECF estimation and the stochastic continuity bound.
//! * [`models`] – closed-form and Monte Carlo ECFs of standard processes.
//! * [`transforms`] – Bernstein-function transforms, convex combinations and
//!   triangle-inequality checks.
//! * [`depset`] – the TM dependency set as a polytope, support functions and
//!   sharp lower bounds on distribution functions.
//! * [`io`] – JSON and CSV exchange formats.

pub mod depset;
pub mod ecf;
pub mod error;
pub mod io;
pub mod models;
pub mod rng;
pub mod subset;
pub mod tm;
pub mod transforms;

pub use depset::{DepSetPolytope, Halfspace};
pub use ecf::{DiscreteSpectralMeasure, EcfTable, TauTable, Validation, TOL_VALIDATE};
pub use error::{Error, Result};
pub use models::{BoxKernel, VariogramSpec};
pub use subset::{GroundSet, SetFunction, SubsetMask};
pub use tm::{SampleBatch, TmProcess};
pub use transforms::BernsteinFunction;
