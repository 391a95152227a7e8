//! Simulation kernels for entanglement-buffered classical communication.
//!
//! A sender that is idle generates EPR pairs and keeps one half in a bounded
//! quantum memory while the other half waits at the receiver. When messages
//! arrive, stored pairs let the sender transmit two bits per qubit with
//! superdense coding; otherwise it falls back to one bit per qubit. Stored
//! pairs decohere under a T1/T2 memory model.
//!
//! * [`qcore`]: two-qubit density matrices, memory noise, superdense coding.
//! * [`buffers`]: entanglement and message queues with their policies.
//! * [`link`]: the point-to-point tick-driven engine and its metrics.
//! * [`network`]: multi-hop relay networks with per-link buffers.
//! * [`cluster`]: two-party distributed k-means over an assisted channel.
//!
//! The crate is `no_std` and needs only `alloc`. Every run is a pure function
//! of its configuration and seed.

#![no_std]
// `!(x > 0.0)` rejects NaN; matrix code indexes by row and column; noisy
// states travel by value.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod buffers;
pub mod cluster;
pub mod error;
pub mod event;
pub mod link;
pub mod network;
pub mod qcore;
pub mod rng;

mod splitmix;

pub use error::Error;
