//! Small multilayer perceptrons with a per-forward tape for reverse-mode
//! gradients, an Adam optimizer, and Polyak target updates.
//!
//! Everything is computed in `f64`. A network owns its parameters, the
//! gradient accumulator, and the optimizer moments in flat vectors of equal
//! length; per-layer weight and bias views are slices into the same storage.

mod checkpoint;
mod error;
mod gemm;
mod mlp;
mod optim;
mod spec;

pub use checkpoint::{Checkpoint, NetState, FORMAT_TAG};
pub use error::{NnError, Result};
pub use mlp::{LayerMut, LayerRef, Mlp, Tape};
pub use optim::{soft_update, AdamConfig};
pub use spec::{Activation, NetSpec};
