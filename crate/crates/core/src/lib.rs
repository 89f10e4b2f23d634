//! Two-phase collaborative ranking for point-of-interest recommendation.
//!
//! Users and POIs get `d`-dimensional latent factors scored by a dot product.
//! Training alternates two pairwise objectives: visited POIs above unvisited
//! ones (discounted by geographical proximity), then repeatedly visited POIs
//! above once-visited ones. Both are shrunk by per-entity coefficients derived
//! from how much each user's (and each POI category's) monthly activity varies.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod geo;
pub mod model;
pub mod temporal;
pub mod train;

pub use error::{Error, Result};
