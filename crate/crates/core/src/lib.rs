//! Spiking neural networks with learnable-weight axonal delays.
//!
//! Leaky integrate-and-fire layers are unrolled in time and trained with
//! surrogate-gradient backpropagation. Delayed projections keep one weight
//! per (pre, post, delay) triple, so magnitude pruning selects which delays
//! survive. A hardware cost model counts parameters, state, delay buffer
//! memory and per-operation energy.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod hwcost;
pub mod layers;
pub mod network;
pub mod neuron;
pub mod pruning;
pub mod tasks;
pub mod training;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use error::{Error, Result};
pub use hwcost::{ArchLayer, ArchSpec, CostReport, DelayMechanism, EnergyCoeffs};
pub use layers::{DelayLayerParams, DelaySpec, SpikeHistory};
pub use network::{backward, forward, LayerKind, LayerSpec, NetworkParams, NetworkSpec, ReadoutSpec};
pub use neuron::{NeuronConfig, SpikeMode, SurrogateConfig};
pub use pruning::{PruneConfig, PruneRule};
pub use training::{Hyperparams, LossKind, Sample, Target};
