//! Design and evaluation of orthogonal unimodular polyphase codes with
//! jointly optimized mismatched compression filters.
//!
//! The crate is organised bottom-up:
//!
//! - [`waveforms`]: random, Hadamard, Chu and LFM chirp generators.
//! - [`correlation`]: aperiodic/periodic correlation, convolution matrices,
//!   ISL and PSL metrics.
//! - [`filter_design`]: closed-form minimum-ISL mismatched filters for a single
//!   code and for a code set (auto + cross energy).
//! - [`optimizer`]: weighted sidelobe error, analytic phase gradient,
//!   alternating local search and multistart global search.
//! - [`can`]: CAN / WeCAN matched-filter baselines.
//! - [`ambiguity`]: auto- and cross-ambiguity surfaces.
//! - [`echo_sim`]: weather echo time series, two-trip pulse trains,
//!   compression, Doppler spectra and second-trip suppression.
//!
//! Data-parallel loops (optimizer starts, ambiguity rows, simulation
//! ensembles) run on rayon when the `parallel` feature is enabled and fall
//! back to sequential iteration otherwise; see [`Execution`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod can;
pub mod correlation;
pub mod echo_sim;
mod error;
mod exec;
mod fft;
pub mod filter_design;
mod linalg;
pub mod optimizer;
pub mod waveforms;

pub use error::{Error, Result};
pub use exec::Execution;

pub use num_complex::Complex64;
