// SPDX-License-Identifier: Apache-2.0

//! Hyperdimensional intelligent sensing: a sliding-window HDC fragment
//! classifier that gates a high-precision ADC, the chunk-shift encoding
//! computation-reuse scheme (functional and cycle-level), ROC evaluation and
//! an edge energy model.

pub mod accel;
pub mod config;
pub mod energy;
pub mod error;
pub mod eval;
pub mod fragment;
pub mod hdc;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod sense;
pub mod sliding;
pub mod synth;

pub use error::{Error, Result};
