//! Dense 64-bit tensors with reverse-mode differentiation, the Adamax
//! optimizer, and a finite-difference gradient checker.
//!
//! The [`Tape`] records primitive operations as they execute and replays
//! them backwards to accumulate gradients. Learned tensors live in a named
//! [`ParamSet`]; registering a parameter on a tape is idempotent, so every
//! use of a shared weight contributes to one gradient slot. Everything runs
//! on one thread in deterministic order: a fixed seed reproduces training
//! bit for bit.

mod optim;
mod tape;
mod value;

pub use optim::{adamax_step, finite_diff_check, AdamaxState};
pub use tape::{Tape, VarId};
pub use value::{
    xavier_uniform, zeros, CheckpointError, ParamSet, ShapeError, TensorValue, uniform_init,
};
