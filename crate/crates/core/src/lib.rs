//! Desk-scale adversarial robustness toolkit: an entropic optimal
//! transport core, a small reverse-mode MLP, bounded and
//! minimal-perturbation attacks, five defense training loops, and
//! accuracy-curve / area-under-curve evaluation.

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod eval;
pub mod measure;
pub mod nn;
pub mod ot;
mod par;

pub use error::{Error, Result};
