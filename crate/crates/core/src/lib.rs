//! Urban activity mining and neighborhood detection from location-based
//! check-in data.
//!
//! The pipeline runs in stages: [`ingest`] a city's venues and check-ins,
//! derive per-venue [`features`], find per-feature density [`hotspots`] and
//! rasterize them into cell vectors, score grid [`homogeneity`], grow
//! neighborhoods with the moving-threshold [`boundaries`] search, and
//! evaluate profile-based neighborhood [`recommend`]ations. [`synth`] builds
//! cities with planted neighborhoods, and [`pipeline`] wires the stages
//! together with file-based handoff.

pub mod boundaries;
pub mod error;
pub mod geo;
pub mod features;
pub mod homogeneity;
pub mod hotspots;
pub mod ingest;
pub mod pipeline;
pub mod recommend;
pub mod synth;

pub use error::{Error, Result};
