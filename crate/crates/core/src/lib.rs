//! Cluster MOOC students by how they take part in comment threads.
//!
//! Comments are split into ice-breaking, responding and solo posts
//! ([`ingest`]), counted per student ([`features`]), standardized and
//! clustered with k-means ([`cluster`]). The number of clusters is chosen by
//! sweeping k and keeping the largest k whose clusters differ pairwise on
//! every variable under Kruskal-Wallis and Mann-Whitney tests
//! ([`stattests`], [`protocol`]). [`synth`] generates seeded cohorts with
//! planted personas for end-to-end checks.

pub mod cli;
pub mod cluster;
pub mod error;
pub mod features;
pub mod ingest;
pub mod matrix;
pub mod protocol;
pub mod stattests;
pub mod synth;

pub use error::{Error, Result};
