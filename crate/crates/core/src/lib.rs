//! Minimum-probability-of-error (MPE) multiuser transmit precoding for BPSK
//! signalling over a MISO broadcast channel.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: channels, symbol enumeration, propagation and hard detection.
//! - [`errorprob`]: exact error-probability objectives and their gradients.
//! - [`optim`]: the constrained first-order minimizer shared by the MPE solvers.
//! - [`precoders`]: MPE-ML, joint Tx-Rx MPE and the classical baselines.
//! - [`selection`]: geometric user selection (GUS) and the SUS baseline.
//! - [`sim`]: Monte Carlo campaigns, BER measurement and throughput.

pub mod errorprob;
pub mod model;
pub mod optim;
pub mod precoders;
pub mod selection;
pub mod sim;

mod error;

pub use error::{Error, Result};
pub use model::{ChannelSet, CMatrix, ReceiveFilters, SymbolBook, SystemConfig, MAX_USERS};
pub use num_complex::Complex64;
