//! Core library of the `etsflow` toolchain.
//!
//! `etsflow` treats energy, time, and security as first-class properties of
//! task-based embedded applications. The library is organised along the
//! stages of the flow:
//!
//! * [`spec`] — the `.ets` application specification language: tasks,
//!   dependencies, and their energy/time/security contracts.
//! * [`ir`] — the structured program representation (`.ir` files) that all
//!   static analyses operate on.
//! * [`timing`] — worst-/best-case cycle bounds on predictable cores.
//! * [`energy`] — instruction-level energy model fitting, per-task energy
//!   prediction, dynamic profile ingestion, and frequency selection.
//! * [`security`] — side-channel leakage quantification of secret-dependent
//!   branches and the branch-balancing transform.
//! * [`model`] — the task graph, platform description, and analysis results
//!   that flow between the stages.
//! * [`sched`] — variant/frequency-aware scheduling onto heterogeneous
//!   multicore platforms, schedule validation, Pareto exploration, and glue
//!   code generation.
//! * [`contracts`] — contract obligation checking and certificate emission.
//! * [`pipeline`] — the end-to-end flows for predictable and complex
//!   (profile-driven) targets.
//!
//! Real-valued kernels (least squares, power curves, order statistics) are
//! generic over the scalar type via [`real::Real`]; the domain and file
//! layer instantiate them at [`Scalar`].

pub mod contracts;
pub mod diag;
pub mod energy;
pub mod gen;
pub mod ir;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod real;
pub mod sched;
pub mod security;
pub mod spec;
pub mod timing;

/// Concrete scalar type used by the domain layer and all file formats.
pub type Scalar = f64;

/// Milliseconds.
pub type Millis = Scalar;
/// Millijoules.
pub type Millijoules = Scalar;
/// Megahertz.
pub type MegaHertz = Scalar;
/// Processor cycles.
pub type Cycles = u64;

/// Toolchain version stamped into certificates and generated artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
