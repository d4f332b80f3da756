//! Ground-truth semantic room wireframes from 3D plane-annotated scenes, and
//! the metrics used to score predicted wireframes against them.

pub mod cli;
pub mod config;
pub mod doors;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod polygon;
pub mod scene;
pub mod synth;
pub mod visibility;
pub mod wireframe;

pub use error::{Error, Result};
