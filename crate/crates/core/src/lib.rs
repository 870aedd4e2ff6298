//! Clustered multitask diffusion LMS over networks.
//!
//! - [`topology`]: graphs, cluster partitions and combiner matrices.
//! - [`synth`]: streaming data for the linear model and application scenarios.
//! - [`adapt`]: the diffusion recursions and reference solvers.
//! - [`theory`]: mean and mean-square performance models.
//! - [`harness`]: seeded Monte Carlo runs and theory overlays.
//! - [`config`]: the JSON experiment format driven by the `cdiff` binary.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod harness;
pub mod rng;
pub mod synth;
pub mod theory;
pub mod topology;
