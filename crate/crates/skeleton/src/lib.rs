//! Algorithmic skeletons for structured 2D grids.
//!
//! A global raster is split into balanced blocks on a 2D Cartesian
//! arrangement of workers ([`decompose`]). Each worker owns a [`DMatrix`]
//! block with a halo frame, and user code is written as sequential
//! whole-block kernels handed to [`Worker::apply`] or [`Worker::apply_list`].
//! Halo exchanges, reductions and gathers are the only communication and are
//! all message-passing between long-lived worker threads.

mod apply;
mod comm;
mod dmatrix;
mod error;
mod flow;
mod topology;

pub use apply::{Access, FieldId, FieldSet, Kernel, Step, Writes};
pub use comm::{CommStats, Executor, HaloMessage, Worker};
pub use dmatrix::{DMatrix, HALO_CHECK_ENV, NEIGHBOR_OFFSETS};
pub use error::SkelError;
pub use flow::{directions, flow_direction};
pub use topology::{decompose, split_extent, BlockLayout, Side, Topology};

/// Environment variable selecting the worker count.
pub const WORKERS_ENV: &str = "OVERLAND_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set and valid.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&p| p >= 1)
}
