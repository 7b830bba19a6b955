//! Deterministic spiking-network simulation and synaptic conductance calibration.
//!
//! The crate is organized around the pipeline used to keep spiking activity
//! stable while connectivity changes:
//!
//! * [`model`] describes networks declaratively and builds the two benchmark
//!   topologies (a random Izhikevich cortex and an insect mushroom body).
//! * [`connectivity`] stores synapses densely or in compressed row storage and
//!   reports the element counts of both layouts.
//! * [`engine`] runs fixed-step simulations with either storage, tracking
//!   neurons whose state overflows to non-finite values.
//! * [`calibration`] sweeps `(nConn, gScale)` grids, picks the spike-rate
//!   matching scale per connection count and fits `gScale = k1 / (k2 + nConn) + k3`.
//! * [`occupancy`] models GPU occupancy limits and recommends a block size.

pub mod calibration;
pub mod connectivity;
pub mod engine;
pub mod error;
pub mod model;
pub mod occupancy;
pub mod rng;

pub use calibration::{
    fit_gscale, mape, predict, select_optima, sweep, FitResult, Selection, SweepOutcome, SweepRow,
};
pub use connectivity::{mem_dense, mem_sparse, DenseMatrix, MemReport, SparseCrs, WeightDist};
pub use engine::{run, RunResult, Simulation, StorageChoice};
pub use error::{Error, Result};
pub use model::{
    build_izhikevich_net, build_mbody_net, validate, NetworkSpec, NeuronPopulation, Sign, Storage,
    SynapseGroupSpec, Violation,
};
pub use occupancy::{
    device_preset, occupancy, recommend_block_size, DeviceSpec, KernelSpec, Limiter, OccupancyResult,
    Recommendation,
};

/// Numeric type of neuron state and synaptic weights.
#[cfg(not(feature = "f64"))]
pub type Real = f32;

/// Numeric type of neuron state and synaptic weights.
#[cfg(feature = "f64")]
pub type Real = f64;
