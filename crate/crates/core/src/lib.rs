//! Randomness certification for CHSH experiments whose devices leak a
//! bounded amount of cross-talk.
//!
//! Layers, bottom up: dense linear algebra ([`linalg`]), Bell scenarios and
//! behaviors ([`bell`]), closed-form and linear-programming bounds
//! ([`bounds`], [`lp`]), a conic interior-point solver ([`sdp`]), moment
//! relaxations of the cross-talk programs ([`relax`]), physical device models
//! ([`models`]) and the simulate/estimate/extract pipeline ([`pipeline`]).

pub mod bell;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod models;
pub mod numeric;
pub mod pipeline;
pub mod relax;
pub mod sdp;

pub use error::{Error, Result};
