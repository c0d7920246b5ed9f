//! Bitemporal change detection with a dense Swin V2 grid, a mixed feature
//! pyramid and a self-supervised CNN branch.

pub mod attention;
pub mod branch;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod multiscale;
pub mod network;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
