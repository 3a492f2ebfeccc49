//! Feed-forward networks with reverse-mode gradients and Adam, in f64.

mod adam;
mod checkpoint;
mod gradcheck;
mod network;
mod ops;
mod spec;

pub use adam::AdamState;
pub use checkpoint::{
    load_checkpoint, params_from_bytes, params_to_bytes, save_checkpoint, CheckpointDescriptor,
};
pub use gradcheck::{check_network, gradcheck_suite, relative_error, suite_cases, GradCheckReport};
pub use network::{LayerOffsets, Mode, Network, Pass};
pub use spec::{Activation, LayerSpec, NetworkSpec};
