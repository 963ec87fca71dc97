//! Physics engine for a throw-and-catch Talbot-Lau interferometer with a
//! levitated dielectric nanoparticle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod mie;
pub mod model;
pub mod recapture;
pub mod special;
pub mod stochastic;
pub mod talbot;

pub use error::{Error, Result};
