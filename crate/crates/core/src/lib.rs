//! Simulation toolkit for spatial random graphs.
//!
//! Vertex layers ([`point_process`]), edge models ([`models`]), chemical
//! distances ([`graph_core`]), long-edge statistics ([`long_edges`]), the
//! multiscale box classifier ([`renorm`]), covariance estimates of local
//! events ([`mixing`]) and the experiment driver ([`experiments`]).

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod graph_core;
pub mod long_edges;
pub mod mixing;
pub mod models;
pub mod point_process;
pub mod quadrature;
pub mod renorm;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
